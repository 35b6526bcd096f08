//! Run configuration: optional JSON file values, overridden by flags.

use std::path::{Path, PathBuf};

use clap::Args;
use scorefill::fit::FitConfig;
use scorefill::model::{ModelSpec, NoiseModel, Variant};
use scorefill::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Every key is optional; a flag given on the command line wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub variant: Option<Variant>,
    pub d: Option<usize>,
    pub noise: Option<String>,
    pub sigma_u: Option<f64>,
    pub sigma_v: Option<f64>,
    pub sigma_w: Option<f64>,
    pub sigma_b: Option<f64>,
    pub sigma_y: Option<f64>,
    pub sigma_x: Option<f64>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub tune: Option<usize>,
    pub draws: Option<usize>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
    pub target_accept: Option<f64>,
    pub max_tree_depth: Option<usize>,
    pub test_ratio: Option<f64>,
    pub validity: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub cluster_k: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<FileConfig> {
        match path {
            Some(p) => Ok(scorefill::io::read_json(p)?),
            None => Ok(FileConfig::default()),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Model variant: pmf, ptf, bptf, cptf or bcptf [default: pmf]
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Latent dimension D [default: 5]
    #[arg(long)]
    pub d: Option<usize>,
    /// Observation noise: "learned" or a fixed σ [default: learned]
    #[arg(long)]
    pub noise: Option<String>,
    /// Prior scale of U [default: 1]
    #[arg(long)]
    pub sigma_u: Option<f64>,
    /// Prior scale of V [default: 1]
    #[arg(long)]
    pub sigma_v: Option<f64>,
    /// Prior scale of the metric weights [default: 1]
    #[arg(long)]
    pub sigma_w: Option<f64>,
    /// Prior scale of the metric biases [default: 1]
    #[arg(long)]
    pub sigma_b: Option<f64>,
    /// Prior scale of the model-profile effects Y [default: 1]
    #[arg(long)]
    pub sigma_y: Option<f64>,
    /// Prior scale of the dataset-profile effects X [default: 1]
    #[arg(long)]
    pub sigma_x: Option<f64>,
    /// LKJ concentration η [default: 2]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Exponential rate λ of the covariance scales [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    /// Tuning iterations per chain [default: 500]
    #[arg(long)]
    pub tune: Option<usize>,
    /// Kept draws per chain [default: 100]
    #[arg(long)]
    pub draws: Option<usize>,
    /// Independent chains [default: 1]
    #[arg(long)]
    pub chains: Option<usize>,
    /// Seed for the split and the sampler [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dual-averaging acceptance target [default: 0.8]
    #[arg(long)]
    pub target_accept: Option<f64>,
    /// Maximum NUTS tree depth [default: 10]
    #[arg(long)]
    pub max_tree_depth: Option<usize>,
}

pub fn parse_noise(text: &str) -> CliResult<NoiseModel> {
    if text.eq_ignore_ascii_case("learned") {
        return Ok(NoiseModel::Learned);
    }
    match text.parse::<f64>() {
        Ok(sigma) if sigma > 0.0 && sigma.is_finite() => Ok(NoiseModel::Fixed(sigma)),
        _ => Err(CliError::flag(
            "--noise",
            format!("expected \"learned\" or a positive number, got {text}"),
        )),
    }
}

pub fn resolve_spec(args: &ModelArgs, file: &FileConfig) -> CliResult<ModelSpec> {
    let variant = args.variant.or(file.variant).unwrap_or(Variant::Pmf);
    let d = args.d.or(file.d).unwrap_or(5);
    let mut spec = ModelSpec::new(variant, d);
    let pick = |flag: Option<f64>, file: Option<f64>, default: f64| flag.or(file).unwrap_or(default);
    spec.sigma_u = pick(args.sigma_u, file.sigma_u, spec.sigma_u);
    spec.sigma_v = pick(args.sigma_v, file.sigma_v, spec.sigma_v);
    spec.sigma_w = pick(args.sigma_w, file.sigma_w, spec.sigma_w);
    spec.sigma_b = pick(args.sigma_b, file.sigma_b, spec.sigma_b);
    spec.sigma_y = pick(args.sigma_y, file.sigma_y, spec.sigma_y);
    spec.sigma_x = pick(args.sigma_x, file.sigma_x, spec.sigma_x);
    spec.lkj_eta = pick(args.eta, file.eta, spec.lkj_eta);
    spec.scale_rate = pick(args.lambda, file.lambda, spec.scale_rate);
    if let Some(noise) = args.noise.as_ref().or(file.noise.as_ref()) {
        spec.noise = parse_noise(noise)?;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn resolve_sampler(args: &SamplerArgs, file: &FileConfig) -> CliResult<SamplerConfig> {
    let base = SamplerConfig::default();
    let cfg = SamplerConfig {
        n_tune: args.tune.or(file.tune).unwrap_or(base.n_tune),
        n_draws: args.draws.or(file.draws).unwrap_or(base.n_draws),
        n_chains: args.chains.or(file.chains).unwrap_or(base.n_chains),
        seed: args.seed.or(file.seed).unwrap_or(base.seed),
        target_accept: args.target_accept.or(file.target_accept).unwrap_or(base.target_accept),
        max_tree_depth: args
            .max_tree_depth
            .or(file.max_tree_depth)
            .unwrap_or(base.max_tree_depth),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn resolve_fit(model: &ModelArgs, sampler: &SamplerArgs, file: &FileConfig) -> CliResult<FitConfig> {
    Ok(FitConfig::new(
        resolve_spec(model, file)?,
        resolve_sampler(sampler, file)?,
    ))
}

/// `0 ≤ p < 1`; zero keeps every observed cell for training.
pub fn resolve_test_ratio(flag: Option<f64>, file: &FileConfig, default: f64) -> CliResult<f64> {
    let p = flag.or(file.test_ratio).unwrap_or(default);
    if !(0.0..1.0).contains(&p) {
        return Err(CliError::flag("--test-ratio", format!("{p} is outside [0, 1)")));
    }
    Ok(p)
}
