//! Posterior fitting: normalize the training cells, build the log-joint, and
//! run NUTS from a seeded initial state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{init_state, FactorModel, LatentState, ModelSpec, Variant};
use crate::par::Execution;
use crate::profiles::ProfileSet;
use crate::sampler::{nuts_sample, ChainDiagnostics, PosteriorSamples, SamplerConfig};
use crate::tensor::{Dims, Mask, Normalizer, ScoreTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub spec: ModelSpec,
    pub sampler: SamplerConfig,
}

impl FitConfig {
    pub fn new(spec: ModelSpec, sampler: SamplerConfig) -> Self {
        FitConfig { spec, sampler }
    }
}

/// A fitted posterior over one tensor.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: FactorModel,
    pub normalizer: Normalizer,
    pub samples: PosteriorSamples,
}

impl Fit {
    pub fn dims(&self) -> Dims {
        self.model.dims()
    }

    /// Normalized-scale prediction tensor for every draw.
    pub fn draw_predictions(&self) -> Vec<Vec<f64>> {
        self.samples.draws.iter().map(|v| self.model.predict(v)).collect()
    }

    pub fn states(&self) -> Result<Vec<LatentState>> {
        self.samples
            .draws
            .iter()
            .map(|v| self.model.layout().unpack(v))
            .collect()
    }

    /// Rebuilds a fit from a saved posterior over the same tensor and mask.
    pub fn from_record(
        record: &PosteriorRecord,
        tensor: &ScoreTensor,
        train: &Mask,
        profiles: Option<&ProfileSet>,
    ) -> Result<Fit> {
        let model = FactorModel::from_tensor(record.spec.clone(), tensor, &record.normalizer, train, profiles)?;
        let draws = record
            .draws
            .iter()
            .map(|state| model.layout().pack(state))
            .collect::<Result<Vec<_>>>()?;
        if record.log_joint.len() != draws.len() {
            return Err(Error::DimensionMismatch {
                expected: draws.len(),
                got: record.log_joint.len(),
            });
        }
        Ok(Fit {
            model,
            normalizer: record.normalizer.clone(),
            samples: PosteriorSamples {
                draws,
                log_joint: record.log_joint.clone(),
                chains: record.chains.clone(),
            },
        })
    }

    pub fn record(&self) -> Result<PosteriorRecord> {
        Ok(PosteriorRecord {
            spec: self.model.spec().clone(),
            normalizer: self.normalizer.clone(),
            draws: self.states()?,
            log_joint: self.samples.log_joint.clone(),
            chains: self.samples.chains.clone(),
        })
    }
}

/// Serializable posterior: spec echo, normalizer, and one latent state per draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub spec: ModelSpec,
    pub normalizer: Normalizer,
    pub draws: Vec<LatentState>,
    pub log_joint: Vec<f64>,
    pub chains: Vec<ChainDiagnostics>,
}

/// Fits `cfg.spec` to the `train` cells of `tensor`. Normalization statistics
/// come from `train` only.
pub fn fit(
    tensor: &ScoreTensor,
    train: &Mask,
    cfg: &FitConfig,
    profiles: Option<&ProfileSet>,
    exec: Execution,
) -> Result<Fit> {
    cfg.spec.validate()?;
    cfg.sampler.validate()?;
    if train.is_empty() {
        return Err(Error::arg("train", "training mask has no cells"));
    }
    if cfg.spec.variant.is_constrained() && profiles.is_none() {
        return Err(Error::arg(
            "profiles",
            "constrained variants need model and dataset profiles",
        ));
    }
    let normalizer = Normalizer::fit(tensor, train);
    let model = FactorModel::from_tensor(cfg.spec.clone(), tensor, &normalizer, train, profiles)?;
    let init = init_state(&cfg.spec, model.layout().shape(), cfg.sampler.seed)?;
    let samples = nuts_sample(&model, &init, &cfg.sampler, exec)?;
    Ok(Fit {
        model,
        normalizer,
        samples,
    })
}

/// Independent PMF fits per metric ("Sep"). Each metric gets its own noise
/// scale and normalization.
pub fn fit_per_metric(tensor: &ScoreTensor, train: &Mask, cfg: &FitConfig, exec: Execution) -> Result<Vec<Fit>> {
    if cfg.spec.variant != Variant::Pmf {
        return Err(Error::arg("variant", "per-metric fitting is defined for pmf only"));
    }
    let dims = tensor.dims();
    (0..dims.metrics)
        .map(|s| fit(&tensor.metric_slice(s), &train.metric_slice(s), cfg, None, exec))
        .collect()
}

/// Interleaves per-metric draws back into full-tensor draws. Every fit must
/// have the same number of draws.
pub fn stack_metric_draws(fits: &[Fit]) -> Result<(Vec<Vec<f64>>, Normalizer)> {
    let first = fits.first().ok_or_else(|| Error::arg("fits", "no per-metric fits"))?;
    let n_draws = first.samples.len();
    if fits.iter().any(|f| f.samples.len() != n_draws) {
        return Err(Error::arg("fits", "per-metric fits disagree on draw count"));
    }
    let sub = first.dims();
    let dims = Dims::new(sub.models, sub.datasets, fits.len());
    let per_fit: Vec<Vec<Vec<f64>>> = fits.iter().map(Fit::draw_predictions).collect();
    let mut draws = vec![vec![0.0; dims.len()]; n_draws];
    for (s, preds) in per_fit.iter().enumerate() {
        for (draw, pred) in draws.iter_mut().zip(preds) {
            for m in 0..dims.models {
                for n in 0..dims.datasets {
                    draw[dims.index(m, n, s)] = pred[sub.index(m, n, 0)];
                }
            }
        }
    }
    let normalizer = Normalizer {
        mean: fits.iter().map(|f| f.normalizer.mean[0]).collect(),
        sd: fits.iter().map(|f| f.normalizer.sd[0]).collect(),
    };
    Ok((draws, normalizer))
}
