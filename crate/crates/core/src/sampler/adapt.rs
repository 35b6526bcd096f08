//! Step-size selection: initial heuristic and dual averaging.

use rand::Rng;
use rand_distr::StandardNormal;

use super::leapfrog::{leapfrog, Phase};
use super::LogDensity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualAverageSettings {
    pub gamma: f64,
    pub t0: f64,
    pub kappa: f64,
}

impl Default for DualAverageSettings {
    fn default() -> Self {
        DualAverageSettings {
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
        }
    }
}

/// Dual averaging of `log eps` toward a target acceptance statistic, shrunk
/// toward `μ = log(10 · eps₀)`.
#[derive(Debug, Clone)]
pub struct DualAverage {
    settings: DualAverageSettings,
    target: f64,
    mu: f64,
    hbar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    count: u64,
}

impl DualAverage {
    pub fn new(initial_eps: f64, target: f64, settings: DualAverageSettings) -> Self {
        DualAverage {
            settings,
            target,
            mu: (10.0 * initial_eps).ln(),
            hbar: 0.0,
            log_eps: initial_eps.ln(),
            log_eps_bar: 0.0,
            count: 0,
        }
    }

    /// Shrinkage point `exp(μ)` of the iteration.
    pub fn shrinkage_point(&self) -> f64 {
        self.mu.exp()
    }

    pub fn update(&mut self, accept_stat: f64) {
        self.count += 1;
        let t = self.count as f64;
        let s = &self.settings;
        let w = 1.0 / (t + s.t0);
        self.hbar = (1.0 - w) * self.hbar + w * (self.target - accept_stat);
        self.log_eps = self.mu - t.sqrt() / s.gamma * self.hbar;
        let eta = t.powf(-s.kappa);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }

    /// Step size to use for the next tuning iteration.
    pub fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    /// Averaged step size to freeze after tuning.
    pub fn adapted(&self) -> f64 {
        if self.count == 0 {
            self.log_eps.exp()
        } else {
            self.log_eps_bar.exp()
        }
    }
}

/// Doubles or halves `eps` from 1 until the one-step acceptance ratio crosses
/// one half.
pub fn find_initial_step<D: LogDensity + ?Sized, R: Rng>(density: &D, q: &[f64], rng: &mut R) -> f64 {
    let p: Vec<f64> = (0..q.len()).map(|_| rng.sample(StandardNormal)).collect();
    let start = Phase::at(density, q.to_vec(), p);
    let h0 = start.energy();
    let log_ratio = |eps: f64| {
        let mut s = start.clone();
        leapfrog(density, &mut s, eps);
        let h = s.energy();
        if h.is_finite() {
            h0 - h
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut eps = 1.0;
    let dir = if log_ratio(eps) > 0.5f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let lr = log_ratio(eps);
        if dir * lr <= -dir * std::f64::consts::LN_2 {
            break;
        }
        let next = eps * 2f64.powf(dir);
        if !(1e-10..=1e7).contains(&next) {
            break;
        }
        eps = next;
    }
    eps
}
