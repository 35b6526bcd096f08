//! Priors on positive scales, written on the log scale with the Jacobian of
//! `x = exp(t)` folded in. Each returns `(log density, d/dt)`.

use std::f64::consts::PI;

/// `τ = exp(t)`, `τ ~ Exp(rate)`.
pub fn log_exponential_scale(t: f64, rate: f64) -> (f64, f64) {
    let tau = t.exp();
    (rate.ln() - rate * tau + t, 1.0 - rate * tau)
}

/// `σ = exp(t)`, `σ ~ HalfNormal(1)`.
pub fn log_half_normal_scale(t: f64) -> (f64, f64) {
    let s2 = (2.0 * t).exp();
    (0.5 * (2.0 / PI).ln() - 0.5 * s2 + t, 1.0 - s2)
}
