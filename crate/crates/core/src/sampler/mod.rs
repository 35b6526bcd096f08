//! Gradient-based MCMC: leapfrog integration, multinomial NUTS with
//! dual-averaging step-size adaptation, and chain diagnostics.

pub mod adapt;
pub mod leapfrog;
pub mod nuts;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FactorModel;
use crate::par::{self, Execution};

pub use adapt::{DualAverage, DualAverageSettings};
pub use leapfrog::{leapfrog, Phase};

/// A differentiable log density over unconstrained reals. Must be reentrant:
/// chains call it concurrently.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density.
    fn logp_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;
}

impl LogDensity for FactorModel {
    fn dim(&self) -> usize {
        self.layout().len()
    }

    fn logp_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        self.log_joint_and_grad(q, grad)
    }
}

/// Adapter turning a closure into a [`LogDensity`] of unchecked dimension.
pub struct FnDensity<F> {
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64 + Sync> FnDensity<F> {
    pub fn new(f: F) -> Self {
        FnDensity { f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64 + Sync> LogDensity for FnDensity<F> {
    fn dim(&self) -> usize {
        usize::MAX
    }

    fn logp_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(q, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_tune: usize,
    pub n_draws: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    pub n_chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_tune: 500,
            n_draws: 100,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed: 0,
            n_chains: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::arg("n_draws", "must be at least 1"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::arg("target_accept", "must lie in (0, 1)"));
        }
        if !(1..=15).contains(&self.max_tree_depth) {
            return Err(Error::arg("max_tree_depth", "must lie in 1..=15"));
        }
        if self.n_chains == 0 {
            return Err(Error::arg("n_chains", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub accept_mean: f64,
    pub step_size: f64,
    pub divergences: usize,
    pub tune_divergences: usize,
    pub draws: usize,
    pub mean_tree_depth: f64,
}

/// Post-tuning draws of all chains, concatenated in chain order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub draws: Vec<Vec<f64>>,
    pub log_joint: Vec<f64>,
    pub chains: Vec<ChainDiagnostics>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }
}

fn run_chain<D: LogDensity + ?Sized>(
    density: &D,
    init: &[f64],
    cfg: &SamplerConfig,
    chain: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, ChainDiagnostics)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(chain as u64));
    let mut current = Phase::at(density, init.to_vec(), vec![0.0; init.len()]);
    if !current.is_finite() {
        return Err(Error::Sampler(format!(
            "chain {chain}: log density or gradient not finite at the initial point"
        )));
    }
    let eps0 = adapt::find_initial_step(density, &current.q, &mut rng);
    let mut da = DualAverage::new(eps0, cfg.target_accept, DualAverageSettings::default());
    let mut tune_divergences = 0;
    for _ in 0..cfg.n_tune {
        let t = nuts::transition(density, &current, da.current(), cfg.max_tree_depth, &mut rng);
        tune_divergences += usize::from(t.divergent);
        da.update(t.accept_stat);
        current.q = t.q;
        current.grad = t.grad;
        current.logp = t.logp;
    }
    if cfg.n_tune > 0 && tune_divergences == cfg.n_tune {
        return Err(Error::Sampler(format!(
            "chain {chain}: all {} tuning transitions diverged (final step size {:.3e})",
            cfg.n_tune,
            da.current()
        )));
    }
    let eps = if cfg.n_tune > 0 { da.adapted() } else { eps0 };

    let mut draws = Vec::with_capacity(cfg.n_draws);
    let mut log_joint = Vec::with_capacity(cfg.n_draws);
    let mut accept_sum = 0.0;
    let mut depth_sum = 0usize;
    let mut divergences = 0;
    for _ in 0..cfg.n_draws {
        let t = nuts::transition(density, &current, eps, cfg.max_tree_depth, &mut rng);
        accept_sum += t.accept_stat;
        depth_sum += t.depth;
        divergences += usize::from(t.divergent);
        current.q = t.q;
        current.grad = t.grad;
        current.logp = t.logp;
        draws.push(current.q.clone());
        log_joint.push(current.logp);
    }
    let diag = ChainDiagnostics {
        chain,
        accept_mean: accept_sum / cfg.n_draws as f64,
        step_size: eps,
        divergences,
        tune_divergences,
        draws: cfg.n_draws,
        mean_tree_depth: depth_sum as f64 / cfg.n_draws as f64,
    };
    Ok((draws, log_joint, diag))
}

/// Runs `cfg.n_chains` independent NUTS chains from `init`. Chain `c` uses
/// the random stream seeded with `cfg.seed + c`; results do not depend on
/// `exec`.
pub fn nuts_sample<D: LogDensity + ?Sized>(
    density: &D,
    init: &[f64],
    cfg: &SamplerConfig,
    exec: Execution,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let chains = par::try_map_range(exec, cfg.n_chains, |c| run_chain(density, init, cfg, c))?;
    let mut out = PosteriorSamples {
        draws: Vec::with_capacity(cfg.n_draws * cfg.n_chains),
        log_joint: Vec::with_capacity(cfg.n_draws * cfg.n_chains),
        chains: Vec::with_capacity(cfg.n_chains),
    };
    for (draws, lj, diag) in chains {
        out.draws.extend(draws);
        out.log_joint.extend(lj);
        out.chains.push(diag);
    }
    Ok(out)
}
