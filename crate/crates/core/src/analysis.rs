//! Post-hoc analyses: singular spectrum, latent-dimension sweep, profile-feature
//! effects, and model/dataset informativeness.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit, Fit, FitConfig};
use crate::io::write_csv;
use crate::linalg::{dot, singular_values, Matrix};
use crate::model::Block;
use crate::par::{self, Execution};
use crate::predict::{evaluate, predict, rmse};
use crate::profiles::ProfileSet;
use crate::tensor::{Mask, ScoreTensor};

/// Singular values of a complete matrix, descending.
pub fn singular_spectrum(a: &Matrix) -> Result<Vec<f64>> {
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("matrix", "spectrum needs finite entries"));
    }
    Ok(singular_values(a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub sigma: f64,
}

pub fn write_spectrum_csv(path: &Path, sigma: &[f64]) -> Result<()> {
    let rows: Vec<SpectrumRow> = sigma
        .iter()
        .enumerate()
        .map(|(index, &sigma)| SpectrumRow { index, sigma })
        .collect();
    write_csv(path, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub latent_dim: usize,
    pub seed: u64,
    pub train_rmse: f64,
    pub test_rmse: f64,
}

/// Fits every latent dimension in `dims` for every sampler seed on one split.
/// Rows are ordered by dimension then seed.
pub fn dimension_sweep(
    tensor: &ScoreTensor,
    train: &Mask,
    test: &Mask,
    dims: &[usize],
    base: &FitConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    if dims.contains(&0) {
        return Err(Error::arg("dims", "latent dimensions must be at least 1"));
    }
    let jobs: Vec<(usize, u64)> = dims.iter().flat_map(|&d| seeds.iter().map(move |&s| (d, s))).collect();
    par::try_map_range(exec, jobs.len(), |j| {
        let (d, seed) = jobs[j];
        let mut cfg = base.clone();
        cfg.spec.latent_dim = d;
        cfg.sampler.seed = seed;
        let f = fit(tensor, train, &cfg, None, Execution::Sequential)?;
        let p = predict(&f)?;
        Ok(SweepRow {
            latent_dim: d,
            seed,
            train_rmse: evaluate(tensor, &p.mean, train)?.overall.rmse,
            test_rmse: evaluate(tensor, &p.mean, test)?.overall.rmse,
        })
    })
}

/// Seed-averaged `(D, train RMSE, test RMSE)` in first-appearance order of D.
pub fn sweep_means(rows: &[SweepRow]) -> Vec<(usize, f64, f64)> {
    let mut order: Vec<usize> = Vec::new();
    for r in rows {
        if !order.contains(&r.latent_dim) {
            order.push(r.latent_dim);
        }
    }
    order
        .into_iter()
        .map(|d| {
            let rs: Vec<&SweepRow> = rows.iter().filter(|r| r.latent_dim == d).collect();
            let k = rs.len() as f64;
            (
                d,
                rs.iter().map(|r| r.train_rmse).sum::<f64>() / k,
                rs.iter().map(|r| r.test_rmse).sum::<f64>() / k,
            )
        })
        .collect()
}

/// Posterior mean over draws of `Y_k · V'_n` for every dataset `n`, where `k`
/// is the model-profile column named `feature`.
///
/// In latent units. The sign and scale of latents trade off against the metric
/// weight `w_s`, so compare across fits with [`profile_score_effect`].
pub fn profile_effect(fit: &Fit, profiles: &ProfileSet, feature: &str) -> Result<Vec<f64>> {
    effect_mean(fit, profiles, feature, |_| 1.0)
}

/// Posterior mean of `w_s · Y_k · V'_n` mapped to the raw units of metric `s`
/// (times the metric's normalization scale). Invariant to the latent
/// sign/scale symmetry that [`profile_effect`] is exposed to.
pub fn profile_score_effect(fit: &Fit, profiles: &ProfileSet, feature: &str, metric: usize) -> Result<Vec<f64>> {
    let layout = fit.model.layout();
    if metric >= layout.shape().metrics {
        return Err(Error::arg("metric", format!("index {metric} outside the tensor")));
    }
    let sd = fit.normalizer.sd[metric];
    effect_mean(fit, profiles, feature, |v| {
        sd * layout.slice(Block::W, v).map_or(1.0, |w| w[metric])
    })
}

fn effect_mean(fit: &Fit, profiles: &ProfileSet, feature: &str, weight: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let layout = fit.model.layout();
    if !fit.model.spec().variant.is_constrained() {
        return Err(Error::arg("variant", "profile effects need a constrained variant"));
    }
    let k = profiles.model_feature_index(feature).ok_or_else(|| Error::UnknownId {
        kind: "model feature",
        ids: feature.to_string(),
    })?;
    let shape = layout.shape();
    let d = shape.latent_dim;
    let mut effect = vec![0.0; shape.datasets];
    for v in &fit.samples.draws {
        let y = layout.slice(Block::Y, v).expect("constrained layout has Y");
        let (_, ev) = fit.model.effective_latents(v);
        let yk = &y[k * d..(k + 1) * d];
        let c = weight(v);
        for (n, e) in effect.iter_mut().enumerate() {
            *e += c * dot(yk, &ev[n * d..(n + 1) * d]);
        }
    }
    let draws = fit.samples.len() as f64;
    effect.iter_mut().for_each(|e| *e /= draws);
    Ok(effect)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub dataset_id: String,
    pub effect: f64,
    pub score_effect: f64,
}

pub fn write_effect_csv(path: &Path, dataset_ids: &[String], effect: &[f64], score_effect: &[f64]) -> Result<()> {
    let rows: Vec<EffectRow> = dataset_ids
        .iter()
        .zip(effect.iter().zip(score_effect))
        .map(|(id, (&effect, &score_effect))| EffectRow {
            dataset_id: id.clone(),
            effect,
            score_effect,
        })
        .collect();
    write_csv(path, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub entity_id: String,
    pub delta_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Informativeness {
    /// Ranked by descending improvement; ties by entity order.
    pub models: Vec<DeltaRow>,
    pub datasets: Vec<DeltaRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Model,
    Dataset,
}

/// RMSE improvement on the remaining hidden cells from revealing one whole
/// row (model) or column (dataset). The revealed cells never enter the
/// scoring set. Candidates whose reveal adds nothing score exactly 0.
pub fn informativeness(
    tensor: &ScoreTensor,
    train: &Mask,
    cfg: &FitConfig,
    profiles: Option<&ProfileSet>,
    exec: Execution,
) -> Result<Informativeness> {
    let dims = tensor.dims();
    let base = fit(tensor, train, cfg, profiles, exec)?;
    let base_mean = predict(&base)?.mean;
    let valid = tensor.valid_mask();
    let observed = tensor.observed();

    let candidates: Vec<(Axis, usize)> = (0..dims.models)
        .map(|m| (Axis::Model, m))
        .chain((0..dims.datasets).map(|n| (Axis::Dataset, n)))
        .collect();
    let deltas = par::try_map_range(exec, candidates.len(), |c| {
        let (axis, i) = candidates[c];
        let line = match axis {
            Axis::Model => Mask::model_row(dims, i),
            Axis::Dataset => Mask::dataset_column(dims, i),
        };
        let grown = train.or(&line.and(observed));
        let hidden = observed.minus(&grown).and(&valid);
        debug_assert!(hidden.and(&line).is_empty());
        if grown == *train || hidden.is_empty() {
            return Ok(0.0);
        }
        let refit = fit(tensor, &grown, cfg, profiles, Execution::Sequential)?;
        let new_mean = predict(&refit)?.mean;
        Ok::<f64, Error>(rmse(&base_mean, tensor.values(), &hidden)? - rmse(&new_mean, tensor.values(), &hidden)?)
    })?;

    let ranked = |axis: Axis, ids: &[String]| {
        let mut rows: Vec<(usize, f64)> = candidates
            .iter()
            .zip(&deltas)
            .filter(|((a, _), _)| *a == axis)
            .map(|((_, i), &d)| (*i, d))
            .collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        rows.into_iter()
            .map(|(i, delta_rmse)| DeltaRow {
                entity_id: ids[i].clone(),
                delta_rmse,
            })
            .collect()
    };
    Ok(Informativeness {
        models: ranked(Axis::Model, tensor.model_ids()),
        datasets: ranked(Axis::Dataset, tensor.dataset_ids()),
    })
}

pub fn write_delta_csv(path: &Path, rows: &[DeltaRow]) -> Result<()> {
    write_csv(path, rows)
}
