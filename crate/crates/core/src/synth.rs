//! Forward simulation from the factor-model priors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{reconstruct, LatentState, ModelSpec, NoiseModel, Shape};
use crate::profiles::{one_hot, ProfileSet};
use crate::tensor::ScoreTensor;

/// Structure planted on top of the prior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Plant {
    /// One-hot group profiles. Drives the means only for constrained variants.
    Profiles { model_groups: usize, dataset_groups: usize },
    /// Models in the same group share one latent row.
    RowBlocks { groups: usize },
    /// The first `count` models have their latent rows multiplied by `scale`.
    Outliers { count: usize, scale: f64 },
    /// Constrained variants only: datasets `first..first + count` get
    /// `Y_k · V'_n` raised by `effect` for model-profile column `column`.
    FeatureEffect {
        column: usize,
        first: usize,
        count: usize,
        effect: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    /// Fully observed, every metric valid.
    pub tensor: ScoreTensor,
    pub state: LatentState,
    pub profiles: Option<ProfileSet>,
    /// Noiseless means, same layout as the tensor.
    pub means: Vec<f64>,
    /// Model group of each row under `Profiles` or `RowBlocks`.
    pub model_groups: Option<Vec<usize>>,
}

const DEFAULT_GROUPS: usize = 3;

fn normals<R: Rng>(rng: &mut R, n: usize, sd: f64) -> Vec<f64> {
    let dist = Normal::new(0.0, sd).expect("positive scale");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Balanced random assignment of `n` items to `k` groups (each non-empty when
/// `n ≥ k`).
fn groups<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..n).map(|i| i % k).collect();
    g.shuffle(rng);
    g
}

/// Draw of a `d×d` correlation Cholesky factor from LKJ(η) via canonical
/// partial correlations `z_ij ~ 2 Beta(β_j, β_j) − 1`, `β_j = η + (d − 2 − j)/2`.
pub fn sample_lkj_cholesky<R: Rng>(rng: &mut R, d: usize, eta: f64) -> Vec<f64> {
    let mut l = vec![0.0; d * d];
    l[0] = 1.0;
    for i in 1..d {
        let mut rem = 1.0_f64;
        for j in 0..i {
            let beta = eta + (d as f64 - 2.0 - j as f64) / 2.0;
            let z = 2.0 * Beta::new(beta, beta).expect("positive shape").sample(rng) - 1.0;
            l[i * d + j] = z * rem.sqrt();
            rem *= 1.0 - z * z;
        }
        l[i * d + i] = rem.sqrt();
    }
    l
}

/// `rows` draws of `N(mu, Σ)` with `Σ = (diag(τ) L)(diag(τ) L)ᵀ`.
fn correlated_rows<R: Rng>(rng: &mut R, rows: usize, mu: &[f64], l: &[f64], tau: &[f64]) -> Vec<f64> {
    let d = mu.len();
    let mut out = Vec::with_capacity(rows * d);
    for _ in 0..rows {
        let z = normals(rng, d, 1.0);
        for i in 0..d {
            let lz: f64 = (0..=i).map(|j| l[i * d + j] * z[j]).sum();
            out.push(mu[i] + tau[i] * lz);
        }
    }
    out
}

struct Hier {
    mu: Vec<f64>,
    chol: Vec<f64>,
    tau: Vec<f64>,
    rows: Vec<f64>,
}

fn hierarchical<R: Rng>(rng: &mut R, rows: usize, spec: &ModelSpec) -> Hier {
    let d = spec.latent_dim;
    let exp = Exp::new(spec.scale_rate).expect("positive rate");
    let tau: Vec<f64> = (0..d).map(|_| exp.sample(rng)).collect();
    let chol = sample_lkj_cholesky(rng, d, spec.lkj_eta);
    let mu = correlated_rows(rng, 1, &vec![0.0; d], &chol, &tau);
    let rows = correlated_rows(rng, rows, &mu, &chol, &tau);
    Hier { mu, chol, tau, rows }
}

fn ids(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{prefix}{i}")).collect()
}

/// Draws a latent state from the priors of `spec`, applies `plant`, and
/// returns the fully observed tensor `mean + N(0, noise_sd²)`. Deterministic
/// per `seed`.
pub fn generate(
    spec: &ModelSpec,
    models: usize,
    datasets: usize,
    metrics: usize,
    noise_sd: f64,
    seed: u64,
    plant: Option<&Plant>,
) -> Result<Synthetic> {
    spec.validate()?;
    if models == 0 || datasets == 0 || metrics == 0 {
        return Err(Error::arg("dims", "models, datasets and metrics must be at least 1"));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::arg("noise", "must be a finite non-negative number"));
    }
    let variant = spec.variant;
    let d = spec.latent_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // profiles first so that their draws do not shift with the variant
    let (model_group_count, dataset_group_count) = match plant {
        Some(Plant::Profiles {
            model_groups,
            dataset_groups,
        }) => (*model_groups, *dataset_groups),
        _ => (DEFAULT_GROUPS, DEFAULT_GROUPS),
    };
    let wants_profiles = variant.is_constrained() || matches!(plant, Some(Plant::Profiles { .. }));
    if wants_profiles && (model_group_count == 0 || dataset_group_count == 0) {
        return Err(Error::arg("plant", "profile group counts must be at least 1"));
    }
    let (profiles, profile_groups) = if wants_profiles {
        let mg = groups(&mut rng, models, model_group_count);
        let dg = groups(&mut rng, datasets, dataset_group_count);
        let names = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let set = ProfileSet::new(
            one_hot(&mg, model_group_count),
            one_hot(&dg, dataset_group_count),
            names("group=", model_group_count),
            names("cluster=", dataset_group_count),
        )?;
        (Some(set), Some(mg))
    } else {
        (None, None)
    };

    let shape = Shape {
        models,
        datasets,
        metrics,
        model_features: if variant.is_constrained() { model_group_count } else { 0 },
        dataset_features: if variant.is_constrained() {
            dataset_group_count
        } else {
            0
        },
        latent_dim: d,
    };
    let mut state = LatentState {
        shape,
        u: Vec::new(),
        v: Vec::new(),
        w: None,
        b: None,
        mu_u: None,
        mu_v: None,
        chol_u: None,
        chol_v: None,
        scale_u: None,
        scale_v: None,
        y: None,
        x: None,
        log_sigma: match spec.noise {
            NoiseModel::Learned => Some(noise_sd.max(f64::MIN_POSITIVE).ln()),
            NoiseModel::Fixed(_) => None,
        },
    };
    if variant.is_hierarchical() {
        let hu = hierarchical(&mut rng, models, spec);
        let hv = hierarchical(&mut rng, datasets, spec);
        state.u = hu.rows;
        state.v = hv.rows;
        state.mu_u = Some(hu.mu);
        state.mu_v = Some(hv.mu);
        state.chol_u = Some(hu.chol);
        state.chol_v = Some(hv.chol);
        state.scale_u = Some(hu.tau);
        state.scale_v = Some(hv.tau);
    } else {
        state.u = normals(&mut rng, models * d, spec.sigma_u);
        state.v = normals(&mut rng, datasets * d, spec.sigma_v);
    }
    if variant.has_metric_affine() {
        state.w = Some(normals(&mut rng, metrics, spec.sigma_w));
        state.b = Some(normals(&mut rng, metrics, spec.sigma_b));
    }
    if variant.is_constrained() {
        state.y = Some(normals(&mut rng, model_group_count * d, spec.sigma_y));
        state.x = Some(normals(&mut rng, dataset_group_count * d, spec.sigma_x));
    }

    let mut model_groups = profile_groups;
    match plant {
        Some(Plant::RowBlocks { groups: k }) => {
            if *k == 0 || *k > models {
                return Err(Error::arg("plant", "row-block count must lie in 1..=models"));
            }
            let g = groups(&mut rng, models, *k);
            let mut leader = vec![None; *k];
            for (m, &gm) in g.iter().enumerate() {
                match leader[gm] {
                    None => leader[gm] = Some(m),
                    Some(first) => {
                        let row = state.u[first * d..(first + 1) * d].to_vec();
                        state.u[m * d..(m + 1) * d].copy_from_slice(&row);
                    }
                }
            }
            model_groups = Some(g);
        }
        Some(Plant::Outliers { count, scale }) => {
            if *count > models {
                return Err(Error::arg("plant", "outlier count exceeds models"));
            }
            for x in &mut state.u[..count * d] {
                *x *= scale;
            }
        }
        Some(Plant::FeatureEffect {
            column,
            first,
            count,
            effect,
        }) => {
            let Some(y) = state.y.as_ref() else {
                return Err(Error::arg("plant", "feature effects need a constrained variant"));
            };
            if *column >= model_group_count || first + count > datasets {
                return Err(Error::arg("plant", "feature column or dataset block out of range"));
            }
            let yk = y[column * d..(column + 1) * d].to_vec();
            let norm_sq: f64 = yk.iter().map(|x| x * x).sum();
            if norm_sq == 0.0 {
                return Err(Error::arg("plant", "profile effect row is zero"));
            }
            // V'_n = V_n + G_n X; shifting V_n along Y_k moves Y_k · V'_n by `effect`
            for n in *first..first + count {
                for (i, yi) in yk.iter().enumerate() {
                    state.v[n * d + i] += effect * yi / norm_sq;
                }
            }
        }
        Some(Plant::Profiles { .. }) | None => {}
    }

    let hg = profiles.as_ref().map(|p| (&p.h, &p.g));
    let means = reconstruct(&state, spec, if variant.is_constrained() { hg } else { None })?;
    let noise = normals(&mut rng, means.len(), noise_sd.max(f64::MIN_POSITIVE));
    let values: Vec<f64> = if noise_sd == 0.0 {
        means.clone()
    } else {
        means.iter().zip(&noise).map(|(m, e)| m + e).collect()
    };
    let tensor = ScoreTensor::complete(ids("m", models), ids("d", datasets), ids("s", metrics), values)?;
    Ok(Synthetic {
        tensor,
        state,
        profiles,
        means,
        model_groups,
    })
}

impl Synthetic {
    /// Profiles restricted to what a model fit needs (H, G).
    pub fn profile_matrices(&self) -> Option<(&Matrix, &Matrix)> {
        self.profiles.as_ref().map(|p| (&p.h, &p.g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, singular_values};
    use crate::model::{ParamLayout, Variant};
    use crate::tensor::Mask;

    #[test]
    fn noiseless_pmf_is_the_dot_product() {
        let spec = ModelSpec::new(Variant::Pmf, 3);
        let s = generate(&spec, 4, 5, 1, 0.0, 7, None).unwrap();
        let dims = s.tensor.dims();
        for m in 0..4 {
            for n in 0..5 {
                let expect = dot(&s.state.u[m * 3..m * 3 + 3], &s.state.v[n * 3..n * 3 + 3]);
                assert_eq!(s.tensor.values()[dims.index(m, n, 0)], expect);
            }
        }
        assert_eq!(s.tensor.observed(), &Mask::full(dims));
    }

    #[test]
    fn deterministic_per_seed() {
        for variant in Variant::ALL {
            let spec = ModelSpec::new(variant, 2);
            let a = generate(&spec, 5, 6, 2, 0.1, 3, None).unwrap();
            let b = generate(&spec, 5, 6, 2, 0.1, 3, None).unwrap();
            assert_eq!(a.tensor.values(), b.tensor.values());
            assert_eq!(a.state, b.state);
            let c = generate(&spec, 5, 6, 2, 0.1, 4, None).unwrap();
            assert_ne!(a.tensor.values(), c.tensor.values());
        }
    }

    #[test]
    fn noise_sd_is_recovered() {
        let spec = ModelSpec::new(Variant::Ptf, 2);
        let s = generate(&spec, 100, 100, 1, 0.3, 1, None).unwrap();
        let resid: Vec<f64> = s.tensor.values().iter().zip(&s.means).map(|(x, m)| x - m).collect();
        let n = resid.len() as f64;
        let mu = resid.iter().sum::<f64>() / n;
        let sd = (resid.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd / 0.3 - 1.0).abs() < 0.05, "sd = {sd}");
    }

    #[test]
    fn noiseless_pmf_has_rank_at_most_d() {
        let spec = ModelSpec::new(Variant::Pmf, 5);
        let s = generate(&spec, 30, 40, 1, 0.0, 2, None).unwrap();
        let sv = singular_values(&s.tensor.metric_matrix(0).unwrap());
        assert!(sv[5] / sv[0] < 1e-10, "{sv:?}");
    }

    #[test]
    fn states_pack_into_their_layout() {
        for variant in Variant::ALL {
            let spec = ModelSpec::new(variant, 3);
            let s = generate(&spec, 4, 5, 2, 0.1, 9, None).unwrap();
            let layout = ParamLayout::new(&spec, s.state.shape).unwrap();
            let v = layout.pack(&s.state).unwrap();
            let back = layout.unpack(&v).unwrap();
            for (a, b) in back.u.iter().zip(&s.state.u) {
                assert_eq!(a, b);
            }
            if let (Some(a), Some(b)) = (&back.chol_u, &s.state.chol_u) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn lkj_draws_have_the_beta_marginal_variance() {
        // off-diagonal r ~ 2 Beta(η − 1 + d/2) − 1 marginally, var = 1 / (2η + d − 1)
        let (d, eta) = (3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 40_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let l = sample_lkj_cholesky(&mut rng, d, eta);
            let r = |i: usize, j: usize| (0..d).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            sums[0] += r(1, 0).powi(2);
            sums[1] += r(2, 0).powi(2);
            sums[2] += r(2, 1).powi(2);
        }
        let expect = 1.0 / (2.0 * eta + d as f64 - 1.0);
        for s in sums {
            let var = s / n as f64;
            // se of a mean of r² with var(r²) < 0.1 is below 2e-3
            assert!((var - expect).abs() < 6e-3, "var = {var}, expect {expect}");
        }
    }

    #[test]
    fn row_blocks_share_rows() {
        let spec = ModelSpec::new(Variant::Pmf, 2);
        let s = generate(&spec, 9, 4, 1, 0.0, 5, Some(&Plant::RowBlocks { groups: 3 })).unwrap();
        let g = s.model_groups.unwrap();
        for a in 0..9 {
            for b in 0..9 {
                if g[a] == g[b] {
                    assert_eq!(s.state.u[a * 2..a * 2 + 2], s.state.u[b * 2..b * 2 + 2]);
                }
            }
        }
    }

    #[test]
    fn feature_effect_shifts_the_block() {
        let spec = ModelSpec::new(Variant::Cptf, 2);
        let plant = Plant::FeatureEffect {
            column: 1,
            first: 0,
            count: 3,
            effect: 0.5,
        };
        let base = generate(&spec, 6, 6, 1, 0.0, 4, None).unwrap();
        let s = generate(&spec, 6, 6, 1, 0.0, 4, Some(&plant)).unwrap();
        let y = s.state.y.as_ref().unwrap();
        let yk = &y[2..4];
        for n in 0..6 {
            let shift = dot(yk, &s.state.v[n * 2..n * 2 + 2]) - dot(yk, &base.state.v[n * 2..n * 2 + 2]);
            let expect = if n < 3 { 0.5 } else { 0.0 };
            assert!((shift - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn constrained_profiles_are_one_hot() {
        let spec = ModelSpec::new(Variant::Bcptf, 2);
        let s = generate(&spec, 7, 8, 2, 0.1, 1, None).unwrap();
        let p = s.profiles.unwrap();
        for m in 0..7 {
            assert_eq!(p.h.row(m).iter().sum::<f64>(), 1.0);
        }
        assert_eq!(p.g.rows, 8);
    }
}
