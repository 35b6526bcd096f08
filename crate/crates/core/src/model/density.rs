use super::layout::{Block, LatentState, ParamLayout, Shape};
use super::{lkj, priors};
use super::{ModelSpec, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{dot, matmul_add, matmul_tn_add, Matrix};
use crate::profiles::ProfileSet;
use crate::tensor::{Dims, Mask, Normalizer, ScoreTensor};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// One training cell on the normalized scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub m: u32,
    pub n: u32,
    pub s: u32,
    pub value: f64,
}

/// Log-joint density of one factor model conditioned on a fixed set of
/// observations. Evaluation is pure, so one instance can serve many chains.
#[derive(Debug, Clone)]
pub struct FactorModel {
    spec: ModelSpec,
    layout: ParamLayout,
    obs: Vec<Observation>,
    h: Option<Matrix>,
    g: Option<Matrix>,
}

impl FactorModel {
    /// `profiles` is `(H, G)`; required for the constrained variants and
    /// ignored otherwise.
    pub fn new(spec: ModelSpec, dims: Dims, obs: Vec<Observation>, profiles: Option<(Matrix, Matrix)>) -> Result<Self> {
        let (h, g) = match profiles {
            Some((h, g)) if spec.variant.is_constrained() => {
                if h.rows != dims.models {
                    return Err(Error::DimensionMismatch {
                        expected: dims.models,
                        got: h.rows,
                    });
                }
                if g.rows != dims.datasets {
                    return Err(Error::DimensionMismatch {
                        expected: dims.datasets,
                        got: g.rows,
                    });
                }
                (Some(h), Some(g))
            }
            _ => (None, None),
        };
        let shape = Shape {
            models: dims.models,
            datasets: dims.datasets,
            metrics: dims.metrics,
            model_features: h.as_ref().map_or(0, |h| h.cols),
            dataset_features: g.as_ref().map_or(0, |g| g.cols),
            latent_dim: spec.latent_dim,
        };
        let layout = ParamLayout::new(&spec, shape)?;
        for o in &obs {
            if o.m as usize >= dims.models || o.n as usize >= dims.datasets || o.s as usize >= dims.metrics {
                return Err(Error::InvalidTensor(format!(
                    "observation ({}, {}, {}) outside tensor",
                    o.m, o.n, o.s
                )));
            }
            if !o.value.is_finite() {
                return Err(Error::InvalidTensor("non-finite observation".into()));
            }
        }
        Ok(FactorModel {
            spec,
            layout,
            obs,
            h,
            g,
        })
    }

    /// Model over the normalized `train` cells of a tensor.
    pub fn from_tensor(
        spec: ModelSpec,
        tensor: &ScoreTensor,
        normalizer: &Normalizer,
        train: &Mask,
        profiles: Option<&ProfileSet>,
    ) -> Result<Self> {
        let dims = tensor.dims();
        if !train.is_subset_of(tensor.observed()) {
            return Err(Error::InvalidTensor("train mask exceeds observed cells".into()));
        }
        let obs = train
            .indices()
            .map(|idx| {
                let (m, n, s) = dims.coords(idx);
                Observation {
                    m: m as u32,
                    n: n as u32,
                    s: s as u32,
                    value: normalizer.normalize(s, tensor.values()[idx]),
                }
            })
            .collect();
        let profiles = profiles.map(|p| (p.h.clone(), p.g.clone()));
        FactorModel::new(spec, dims, obs, profiles)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn profiles(&self) -> Option<(&Matrix, &Matrix)> {
        self.h.as_ref().zip(self.g.as_ref())
    }

    pub fn dims(&self) -> Dims {
        let s = self.layout.shape();
        Dims::new(s.models, s.datasets, s.metrics)
    }

    pub fn log_joint(&self, v: &[f64]) -> Result<f64> {
        self.layout.check_len(v)?;
        let mut scratch = vec![0.0; v.len()];
        Ok(self.log_joint_and_grad(v, &mut scratch))
    }

    pub fn grad_log_joint(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.layout.check_len(v)?;
        let mut grad = vec![0.0; v.len()];
        self.log_joint_and_grad(v, &mut grad);
        Ok(grad)
    }

    /// Log joint and its gradient (overwrites `grad`). Both slices must have
    /// the layout length.
    pub fn log_joint_and_grad(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let layout = &self.layout;
        let shape = layout.shape();
        let d = shape.latent_dim;
        let spec = &self.spec;
        grad.fill(0.0);

        let block = |b: Block| layout.slice(b, v);
        let u = block(Block::U).unwrap();
        let vv = block(Block::V).unwrap();
        let (eu, ev) = effective_latents(
            u,
            vv,
            self.h.as_ref(),
            block(Block::Y),
            self.g.as_ref(),
            block(Block::X),
            shape,
        );
        let w = block(Block::W);
        let b = block(Block::B);

        let (sigma, log_sigma) = match spec.noise {
            NoiseModel::Fixed(s) => (s, s.ln()),
            NoiseModel::Learned => {
                let t = block(Block::LogSigma).unwrap()[0];
                (t.exp(), t)
            }
        };
        let inv_var = 1.0 / (sigma * sigma);

        // likelihood
        let mut g_eu = vec![0.0; shape.models * d];
        let mut g_ev = vec![0.0; shape.datasets * d];
        let mut g_w = vec![0.0; shape.metrics];
        let mut g_b = vec![0.0; shape.metrics];
        let mut sum_e2 = 0.0;
        for o in &self.obs {
            let (m, n, s) = (o.m as usize, o.n as usize, o.s as usize);
            let um = &eu[m * d..(m + 1) * d];
            let vn = &ev[n * d..(n + 1) * d];
            let inner = dot(um, vn);
            let (ws, bs) = match (w, b) {
                (Some(w), Some(b)) => (w[s], b[s]),
                _ => (1.0, 0.0),
            };
            let e = o.value - (inner * ws + bs);
            sum_e2 += e * e;
            let gp = e * inv_var;
            g_w[s] += gp * inner;
            g_b[s] += gp;
            let gd = gp * ws;
            for k in 0..d {
                g_eu[m * d + k] += gd * vn[k];
                g_ev[n * d + k] += gd * um[k];
            }
        }
        let n_obs = self.obs.len() as f64;
        let mut lp = -n_obs * (HALF_LN_2PI + log_sigma) - 0.5 * sum_e2 * inv_var;

        if let Some(r) = layout.range(Block::LogSigma) {
            // half-normal(1) on σ plus the log-transform Jacobian
            let (prior, g_prior) = priors::log_half_normal_scale(log_sigma);
            lp += prior;
            grad[r.start] = -n_obs + sum_e2 * inv_var + g_prior;
        }
        if let (Some(rw), Some(rb)) = (layout.range(Block::W), layout.range(Block::B)) {
            lp += iso_normal(w.unwrap(), spec.sigma_w, &mut g_w);
            lp += iso_normal(b.unwrap(), spec.sigma_b, &mut g_b);
            grad[rw].copy_from_slice(&g_w);
            grad[rb].copy_from_slice(&g_b);
        }

        // profile effects see the gradient of the effective latents
        if let (Some(h), Some(ry)) = (self.h.as_ref(), layout.range(Block::Y)) {
            let y = &v[ry.clone()];
            let mut gy = vec![0.0; y.len()];
            matmul_tn_add(&h.data, &g_eu, shape.models, h.cols, d, &mut gy);
            lp += iso_normal(y, spec.sigma_y, &mut gy);
            grad[ry].copy_from_slice(&gy);
        }
        if let (Some(g), Some(rx)) = (self.g.as_ref(), layout.range(Block::X)) {
            let x = &v[rx.clone()];
            let mut gx = vec![0.0; x.len()];
            matmul_tn_add(&g.data, &g_ev, shape.datasets, g.cols, d, &mut gx);
            lp += iso_normal(x, spec.sigma_x, &mut gx);
            grad[rx].copy_from_slice(&gx);
        }

        // latent priors; g_eu / g_ev become the gradients of U / V
        if spec.variant.is_hierarchical() {
            for (rows, g_rows, mu, chol, scale) in [
                (u, &mut g_eu, Block::MuU, Block::CholU, Block::ScaleU),
                (vv, &mut g_ev, Block::MuV, Block::CholV, Block::ScaleV),
            ] {
                let (rmu, rchol, rscale) = (
                    layout.range(mu).unwrap(),
                    layout.range(chol).unwrap(),
                    layout.range(scale).unwrap(),
                );
                let mut gmu = vec![0.0; d];
                let mut gchol = vec![0.0; rchol.len()];
                let mut gscale = vec![0.0; d];
                lp += hierarchical_prior(
                    rows,
                    &v[rmu.clone()],
                    &v[rchol.clone()],
                    &v[rscale.clone()],
                    d,
                    spec.lkj_eta,
                    spec.scale_rate,
                    HierGrads {
                        rows: g_rows,
                        mu: &mut gmu,
                        chol: &mut gchol,
                        log_scale: &mut gscale,
                    },
                );
                grad[rmu].copy_from_slice(&gmu);
                grad[rchol].copy_from_slice(&gchol);
                grad[rscale].copy_from_slice(&gscale);
            }
        } else {
            lp += iso_normal(u, spec.sigma_u, &mut g_eu);
            lp += iso_normal(vv, spec.sigma_v, &mut g_ev);
        }
        grad[layout.range(Block::U).unwrap()].copy_from_slice(&g_eu);
        grad[layout.range(Block::V).unwrap()].copy_from_slice(&g_ev);
        lp
    }

    /// Normalized-scale predictions for every cell at parameter vector `v`.
    pub fn predict(&self, v: &[f64]) -> Vec<f64> {
        let layout = &self.layout;
        let shape = layout.shape();
        let (eu, ev) = effective_latents(
            layout.slice(Block::U, v).unwrap(),
            layout.slice(Block::V, v).unwrap(),
            self.h.as_ref(),
            layout.slice(Block::Y, v),
            self.g.as_ref(),
            layout.slice(Block::X, v),
            shape,
        );
        mean_tensor(&eu, &ev, layout.slice(Block::W, v), layout.slice(Block::B, v), shape)
    }

    /// Effective latent matrices `(U', V')` at parameter vector `v`.
    pub fn effective_latents(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let layout = &self.layout;
        effective_latents(
            layout.slice(Block::U, v).unwrap(),
            layout.slice(Block::V, v).unwrap(),
            self.h.as_ref(),
            layout.slice(Block::Y, v),
            self.g.as_ref(),
            layout.slice(Block::X, v),
            layout.shape(),
        )
    }
}

fn effective_latents(
    u: &[f64],
    v: &[f64],
    h: Option<&Matrix>,
    y: Option<&[f64]>,
    g: Option<&Matrix>,
    x: Option<&[f64]>,
    shape: Shape,
) -> (Vec<f64>, Vec<f64>) {
    let d = shape.latent_dim;
    let mut eu = u.to_vec();
    let mut ev = v.to_vec();
    if let (Some(h), Some(y)) = (h, y) {
        matmul_add(&h.data, y, shape.models, h.cols, d, &mut eu);
    }
    if let (Some(g), Some(x)) = (g, x) {
        matmul_add(&g.data, x, shape.datasets, g.cols, d, &mut ev);
    }
    (eu, ev)
}

fn mean_tensor(eu: &[f64], ev: &[f64], w: Option<&[f64]>, b: Option<&[f64]>, shape: Shape) -> Vec<f64> {
    let d = shape.latent_dim;
    let dims = Dims::new(shape.models, shape.datasets, shape.metrics);
    let mut out = vec![0.0; dims.len()];
    for m in 0..shape.models {
        for n in 0..shape.datasets {
            let inner = dot(&eu[m * d..(m + 1) * d], &ev[n * d..(n + 1) * d]);
            for s in 0..shape.metrics {
                out[dims.index(m, n, s)] = match (w, b) {
                    (Some(w), Some(b)) => inner * w[s] + b[s],
                    _ => inner,
                };
            }
        }
    }
    out
}

/// Predicted `M×N×S` tensor (normalized scale) for a constrained-form state.
pub fn reconstruct(state: &LatentState, spec: &ModelSpec, profiles: Option<(&Matrix, &Matrix)>) -> Result<Vec<f64>> {
    let shape = state.shape;
    let (h, g) = if spec.variant.is_constrained() {
        let (h, g) = profiles.ok_or_else(|| Error::arg("profiles", "constrained variant needs profiles"))?;
        (Some(h), Some(g))
    } else {
        (None, None)
    };
    let (eu, ev) = effective_latents(&state.u, &state.v, h, state.y.as_deref(), g, state.x.as_deref(), shape);
    let (w, b) = if spec.variant.has_metric_affine() {
        (state.w.as_deref(), state.b.as_deref())
    } else {
        (None, None)
    };
    Ok(mean_tensor(&eu, &ev, w, b, shape))
}

/// `Σ log N(x_i | 0, sd²)`, subtracting `x_i / sd²` from `grad`.
fn iso_normal(x: &[f64], sd: f64, grad: &mut [f64]) -> f64 {
    let inv = 1.0 / (sd * sd);
    let mut sq = 0.0;
    for (xi, gi) in x.iter().zip(grad.iter_mut()) {
        sq += xi * xi;
        *gi -= xi * inv;
    }
    -(x.len() as f64) * (HALF_LN_2PI + sd.ln()) - 0.5 * sq * inv
}

struct HierGrads<'a> {
    rows: &'a mut [f64],
    mu: &'a mut [f64],
    chol: &'a mut [f64],
    log_scale: &'a mut [f64],
}

/// `log N(μ | 0, Σ) + Σ_r log N(x_r | μ, Σ) + log LKJ(L | η) + Σ_d log Exp(τ_d | λ)`
/// with `Σ = (diag(τ) L)(diag(τ) L)ᵀ`, including transform Jacobians.
/// `grads.rows` already holds the likelihood gradient and is added to.
#[allow(clippy::too_many_arguments)]
fn hierarchical_prior(
    rows: &[f64],
    mu: &[f64],
    chol_free: &[f64],
    log_scale: &[f64],
    d: usize,
    eta: f64,
    rate: f64,
    grads: HierGrads<'_>,
) -> f64 {
    let n_rows = rows.len() / d;
    let (corr, log_jac) = lkj::corr_cholesky(chol_free, d);
    let tau: Vec<f64> = log_scale.iter().map(|t| t.exp()).collect();
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            c[i * d + j] = tau[i] * corr[i * d + j];
        }
    }
    let n_vec = (n_rows + 1) as f64;
    let log_diag: f64 = (0..d).map(|i| c[i * d + i].ln()).sum();
    let mut lp = -n_vec * (d as f64 * HALF_LN_2PI + log_diag);

    let mut gc = vec![0.0; d * d];
    let mut diff = vec![0.0; d];
    let mut a = vec![0.0; d];
    let mut bvec = vec![0.0; d];
    for r in 0..=n_rows {
        // r == n_rows is μ itself with mean zero
        if r < n_rows {
            for k in 0..d {
                diff[k] = rows[r * d + k] - mu[k];
            }
        } else {
            diff.copy_from_slice(mu);
        }
        for i in 0..d {
            let mut acc = diff[i];
            for j in 0..i {
                acc -= c[i * d + j] * a[j];
            }
            a[i] = acc / c[i * d + i];
        }
        for i in (0..d).rev() {
            let mut acc = a[i];
            for j in (i + 1)..d {
                acc -= c[j * d + i] * bvec[j];
            }
            bvec[i] = acc / c[i * d + i];
        }
        lp -= 0.5 * dot(&a, &a);
        for i in 0..d {
            for j in 0..=i {
                gc[i * d + j] += bvec[i] * a[j];
            }
        }
        if r < n_rows {
            for k in 0..d {
                grads.rows[r * d + k] -= bvec[k];
                grads.mu[k] += bvec[k];
            }
        } else {
            for k in 0..d {
                grads.mu[k] -= bvec[k];
            }
        }
    }
    for i in 0..d {
        gc[i * d + i] -= n_vec / c[i * d + i];
    }

    let mut gl = vec![0.0; d * d];
    let mut gtau = vec![0.0; d];
    for i in 0..d {
        for j in 0..=i {
            gtau[i] += gc[i * d + j] * corr[i * d + j];
            gl[i * d + j] = gc[i * d + j] * tau[i];
        }
    }
    lp += lkj::log_density(&corr, d, eta) + log_jac;
    lkj::log_density_grad(&corr, d, eta, &mut gl);
    lkj::corr_cholesky_backward(chol_free, d, &corr, &gl, grads.chol);

    for i in 0..d {
        let (prior, g_prior) = priors::log_exponential_scale(log_scale[i], rate);
        lp += prior;
        grads.log_scale[i] += gtau[i] * tau[i] + g_prior;
    }
    lp
}
