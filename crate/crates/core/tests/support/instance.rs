//! Random small instances shared by the oracle tests: the library model and
//! the reference model built from the same draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use scorefill::linalg::Matrix;
use scorefill::model::{FactorModel, ModelSpec, NoiseModel, Observation, Variant};
use scorefill::tensor::Dims;

use super::reference::RefModel;

pub struct Instance {
    pub model: FactorModel,
    pub reference: RefModel,
    pub obs: Vec<(usize, usize, usize, f64)>,
    pub point: Vec<f64>,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let nd = Normal::new(0.0, 1.0).unwrap();
    (0..rows).map(|_| (0..cols).map(|_| nd.sample(rng)).collect()).collect()
}

/// `M, N ≤ 5`, `S ≤ 3`, `D ≤ 3`, random hyperparameters, roughly 60% of cells
/// observed (at least one), and a random evaluation point.
pub fn random_instance(variant: Variant, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=5);
    let n = rng.random_range(1..=5);
    let s = rng.random_range(1..=3);
    let d = rng.random_range(1..=3);
    let mut spec = ModelSpec::new(variant, d);
    spec.sigma_u = rng.random_range(0.5..2.0);
    spec.sigma_v = rng.random_range(0.5..2.0);
    spec.sigma_w = rng.random_range(0.5..2.0);
    spec.sigma_b = rng.random_range(0.5..2.0);
    spec.sigma_y = rng.random_range(0.5..2.0);
    spec.sigma_x = rng.random_range(0.5..2.0);
    spec.lkj_eta = rng.random_range(0.5..4.0);
    spec.scale_rate = rng.random_range(0.5..2.0);
    spec.noise = if rng.random_bool(0.5) {
        NoiseModel::Learned
    } else {
        NoiseModel::Fixed(rng.random_range(0.2..1.5))
    };

    let profiles = variant.is_constrained().then(|| {
        let k = rng.random_range(1..=3);
        let j = rng.random_range(1..=3);
        (random_matrix(&mut rng, m, k), random_matrix(&mut rng, n, j))
    });

    let value = Normal::new(0.0, 1.0).unwrap();
    let mut obs = Vec::new();
    for mi in 0..m {
        for ni in 0..n {
            for si in 0..s {
                if rng.random_bool(0.6) {
                    obs.push((mi, ni, si, value.sample(&mut rng)));
                }
            }
        }
    }
    if obs.is_empty() {
        obs.push((0, 0, 0, value.sample(&mut rng)));
    }

    let reference = RefModel {
        m,
        n,
        s,
        d,
        affine: variant.has_metric_affine(),
        hierarchical: variant.is_hierarchical(),
        h: profiles.as_ref().map(|p| p.0.clone()),
        g: profiles.as_ref().map(|p| p.1.clone()),
        sigma_u: spec.sigma_u,
        sigma_v: spec.sigma_v,
        sigma_w: spec.sigma_w,
        sigma_b: spec.sigma_b,
        sigma_y: spec.sigma_y,
        sigma_x: spec.sigma_x,
        eta: spec.lkj_eta,
        lambda: spec.scale_rate,
        noise: match spec.noise {
            NoiseModel::Fixed(sigma) => Some(sigma),
            NoiseModel::Learned => None,
        },
    };

    let lib_obs = obs
        .iter()
        .map(|&(m, n, s, value)| Observation {
            m: m as u32,
            n: n as u32,
            s: s as u32,
            value,
        })
        .collect();
    let lib_profiles = profiles.map(|(h, g)| (Matrix::from_rows(&h), Matrix::from_rows(&g)));
    let model = FactorModel::new(spec, Dims::new(m, n, s), lib_obs, lib_profiles).unwrap();

    let coord = Normal::new(0.0, 0.7).unwrap();
    let point: Vec<f64> = (0..model.layout().len()).map(|_| coord.sample(&mut rng)).collect();
    assert_eq!(point.len(), reference.n_params());
    Instance {
        model,
        reference,
        obs,
        point,
    }
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Central finite-difference gradient.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
