//! Correlation Cholesky factors from unconstrained reals, and the LKJ density.
//!
//! The `d(d-1)/2` unconstrained values are mapped through `tanh` to canonical
//! partial correlations `z_ij ∈ (-1, 1)` (strictly-lower entries, row-major:
//! `(1,0), (2,0), (2,1), (3,0), ...`). Row `i` of the factor is then
//!
//! ```text
//! L_i0 = z_i0
//! L_ij = z_ij · sqrt(1 - Σ_{k<j} L_ik²)      0 < j < i
//! L_ii = sqrt(1 - Σ_{k<i} L_ik²)
//! ```
//!
//! so every row has unit norm and a positive diagonal.

use statrs::function::beta::ln_beta;

/// Number of unconstrained values for a `d×d` correlation factor.
pub fn n_free(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// `ln(1 - tanh(y)²)` without cancellation for large `|y|`.
#[inline]
fn log_sech2(y: f64) -> f64 {
    let a = y.abs();
    2.0 * (std::f64::consts::LN_2 - a - (-2.0 * a).exp().ln_1p())
}

/// Correlation Cholesky factor (`d×d`, row-major, lower) and the log absolute
/// Jacobian of the map from `y` to its strictly-lower entries.
pub fn corr_cholesky(y: &[f64], d: usize) -> (Vec<f64>, f64) {
    debug_assert_eq!(y.len(), n_free(d));
    let mut l = vec![0.0; d * d];
    let mut log_jac = 0.0;
    let mut k = 0;
    l[0] = 1.0;
    for i in 1..d {
        // ln(1 - Σ_{k<j} L_ik²) = Σ_{k<j} ln(1 - z_ik²), kept in log form so
        // saturated tanh values do not round the diagonal to zero
        let mut log_rem = 0.0_f64;
        for j in 0..i {
            if j > 0 {
                log_jac += 0.5 * log_rem;
            }
            let ls = log_sech2(y[k]);
            log_jac += ls;
            l[i * d + j] = y[k].tanh() * (0.5 * log_rem).exp();
            log_rem += ls;
            k += 1;
        }
        l[i * d + i] = (0.5 * log_rem).exp();
    }
    (l, log_jac)
}

/// Back-propagates `grad_l` (gradient w.r.t. the lower entries of the factor,
/// including the diagonal) to `grad_y`, adding the gradient of the log-Jacobian.
/// `l` must be the factor produced by [`corr_cholesky`] for the same `y`.
pub fn corr_cholesky_backward(y: &[f64], d: usize, l: &[f64], grad_l: &[f64], grad_y: &mut [f64]) {
    let mut k0 = 0;
    let mut gs = vec![0.0; d + 1];
    let mut rem = vec![0.0; d + 1];
    for i in 1..d {
        let row = &l[i * d..i * d + d];
        // rem[j] = 1 - Σ_{k<j} L_ik²
        let mut log_rem = 0.0_f64;
        for j in 0..=i {
            rem[j] = log_rem.exp();
            if j < i {
                log_rem += log_sech2(y[k0 + j]);
            }
        }
        gs[..=i].iter_mut().for_each(|g| *g = 0.0);
        gs[i] = -0.5 * grad_l[i * d + i] / row[i];
        for j in 1..i {
            gs[j] += -0.5 / rem[j];
        }
        for j in (0..i).rev() {
            let k = k0 + j;
            let z = y[k].tanh();
            let r = rem[j].sqrt();
            let g_lij = grad_l[i * d + j] + gs[j + 1] * 2.0 * row[j];
            gs[j] += gs[j + 1];
            let gz = g_lij * r;
            if j > 0 {
                gs[j] += g_lij * z * (-0.5 / r);
            }
            grad_y[k] += gz * (1.0 - z * z) - 2.0 * z;
        }
        k0 += i;
    }
}

/// Inverse of [`corr_cholesky`].
pub fn corr_cholesky_inverse(l: &[f64], d: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(n_free(d));
    for i in 1..d {
        let mut sum_sq = 0.0_f64;
        for j in 0..i {
            let v = l[i * d + j];
            let z = if j == 0 { v } else { v / (1.0 - sum_sq).sqrt() };
            y.push(z.atanh());
            sum_sq += v * v;
        }
    }
    y
}

/// `ln ∫ det(R)^(η-1) dR` over `d×d` correlation matrices.
pub fn log_normalizer(d: usize, eta: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..d {
        let dk = (d - k) as f64;
        let b = eta + (dk - 1.0) / 2.0;
        total += (2.0 * eta - 2.0 + dk) * dk * std::f64::consts::LN_2 + dk * ln_beta(b, b);
    }
    total
}

#[inline]
fn diag_exponent(d: usize, i: usize, eta: f64) -> f64 {
    (d - i) as f64 + 2.0 * eta - 3.0
}

/// Normalized log density of `L` when `L Lᵀ ~ LKJ(η)`, with respect to the
/// strictly-lower entries of `L`.
pub fn log_density(l: &[f64], d: usize, eta: f64) -> f64 {
    let mut lp = -log_normalizer(d, eta);
    for i in 1..d {
        lp += diag_exponent(d, i, eta) * l[i * d + i].ln();
    }
    lp
}

/// Adds `∂ log_density / ∂L_ii` into `grad_l`.
pub fn log_density_grad(l: &[f64], d: usize, eta: f64, grad_l: &mut [f64]) {
    for i in 1..d {
        grad_l[i * d + i] += diag_exponent(d, i, eta) / l[i * d + i];
    }
}
