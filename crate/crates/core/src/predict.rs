//! Posterior predictive summaries, error metrics, and the mean baselines.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::Fit;
use crate::io::write_csv;
use crate::tensor::{Dims, Mask, Normalizer, ScoreTensor};

/// Per-cell posterior mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub dims: Dims,
    /// Original score scale.
    pub mean: Vec<f64>,
    /// Original score scale: normalized std times the metric's sd.
    pub std: Vec<f64>,
    pub std_normalized: Vec<f64>,
}

/// Mean and population std over draws of normalized prediction tensors,
/// mapped back to the score scale.
pub fn summarize_draws(draws: &[Vec<f64>], normalizer: &Normalizer, dims: Dims) -> Result<Prediction> {
    if draws.is_empty() {
        return Err(Error::arg("draws", "at least one posterior draw is required"));
    }
    if let Some(bad) = draws.iter().find(|d| d.len() != dims.len()) {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            got: bad.len(),
        });
    }
    let k = draws.len() as f64;
    let mut mean = vec![0.0; dims.len()];
    let mut std = vec![0.0; dims.len()];
    let mut std_normalized = vec![0.0; dims.len()];
    for i in 0..dims.len() {
        let mu = draws.iter().map(|d| d[i]).sum::<f64>() / k;
        let var = draws.iter().map(|d| (d[i] - mu).powi(2)).sum::<f64>() / k;
        let s = dims.coords(i).2;
        mean[i] = normalizer.denormalize(s, mu);
        std_normalized[i] = var.sqrt();
        std[i] = std_normalized[i] * normalizer.sd[s];
    }
    Ok(Prediction {
        dims,
        mean,
        std,
        std_normalized,
    })
}

pub fn predict(fit: &Fit) -> Result<Prediction> {
    summarize_draws(&fit.draw_predictions(), &fit.normalizer, fit.dims())
}

fn masked_pairs<'a>(pred: &'a [f64], truth: &'a [f64], mask: &'a Mask) -> Result<Vec<(f64, f64)>> {
    if pred.len() != mask.dims().len() || truth.len() != mask.dims().len() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims().len(),
            got: pred.len().min(truth.len()),
        });
    }
    if mask.is_empty() {
        return Err(Error::arg("mask", "metrics need at least one cell"));
    }
    Ok(mask.indices().map(|i| (pred[i], truth[i])).collect())
}

pub fn rmse(pred: &[f64], truth: &[f64], mask: &Mask) -> Result<f64> {
    let pairs = masked_pairs(pred, truth, mask)?;
    Ok((pairs.iter().map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64], mask: &Mask) -> Result<f64> {
    let pairs = masked_pairs(pred, truth, mask)?;
    Ok(pairs.iter().map(|(p, t)| (p - t).abs()).sum::<f64>() / pairs.len() as f64)
}

/// `1 - SS_res / SS_tot` with `SS_tot` about the masked truth mean. NaN when
/// the masked truth is constant.
pub fn r2(pred: &[f64], truth: &[f64], mask: &Mask) -> Result<f64> {
    let pairs = masked_pairs(pred, truth, mask)?;
    let mu = pairs.iter().map(|(_, t)| t).sum::<f64>() / pairs.len() as f64;
    let ss_tot: f64 = pairs.iter().map(|(_, t)| (t - mu).powi(2)).sum();
    let ss_res: f64 = pairs.iter().map(|(p, t)| (p - t).powi(2)).sum();
    Ok(if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN })
}

/// Pearson correlation; NaN when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub count: usize,
}

impl Metrics {
    pub fn compute(pred: &[f64], truth: &[f64], mask: &Mask) -> Result<Metrics> {
        Ok(Metrics {
            rmse: rmse(pred, truth, mask)?,
            mae: mae(pred, truth, mask)?,
            r2: r2(pred, truth, mask)?,
            count: mask.count(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric_id: String,
    /// None when the metric has no evaluated cells.
    pub metrics: Option<Metrics>,
}

/// Scores of a prediction on `test ∧ valid` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub overall: Metrics,
    pub per_metric: Vec<MetricReport>,
}

/// Cells that count for evaluation: held out, observed, and valid.
pub fn evaluation_mask(tensor: &ScoreTensor, test: &Mask) -> Mask {
    test.and(tensor.observed()).and(&tensor.valid_mask())
}

/// Clamps every prediction into `[lo, hi]`.
pub fn clip(pred: &mut [f64], lo: f64, hi: f64) {
    for p in pred {
        *p = p.clamp(lo, hi);
    }
}

pub fn evaluate(tensor: &ScoreTensor, pred: &[f64], test: &Mask) -> Result<PredictionReport> {
    let dims = tensor.dims();
    let eval = evaluation_mask(tensor, test);
    let overall = Metrics::compute(pred, tensor.values(), &eval)?;
    let per_metric = (0..dims.metrics)
        .map(|s| {
            let only_s = Mask::from_indices(dims, eval.indices().filter(|&i| dims.coords(i).2 == s));
            let metrics = if only_s.is_empty() {
                None
            } else {
                Some(Metrics::compute(pred, tensor.values(), &only_s)?)
            };
            Ok(MetricReport {
                metric_id: tensor.metric_ids()[s].clone(),
                metrics,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PredictionReport { overall, per_metric })
}

fn metric_train_means(t: &ScoreTensor, train: &Mask) -> Result<Vec<f64>> {
    let dims = t.dims();
    if train.is_empty() {
        return Err(Error::arg("train", "baselines need at least one training cell"));
    }
    let mut sum = vec![0.0; dims.metrics];
    let mut cnt = vec![0usize; dims.metrics];
    for i in train.and(t.observed()).indices() {
        let s = dims.coords(i).2;
        sum[s] += t.values()[i];
        cnt[s] += 1;
    }
    (0..dims.metrics)
        .map(|s| {
            if cnt[s] == 0 {
                Err(Error::arg(
                    "train",
                    format!("metric {} has no training cells", t.metric_ids()[s]),
                ))
            } else {
                Ok(sum[s] / cnt[s] as f64)
            }
        })
        .collect()
}

/// Every cell predicted by its metric's training mean.
pub fn global_mean_baseline(t: &ScoreTensor, train: &Mask) -> Result<Vec<f64>> {
    let dims = t.dims();
    let means = metric_train_means(t, train)?;
    Ok((0..dims.len()).map(|i| means[dims.coords(i).2]).collect())
}

/// Every cell predicted by `(row mean + column mean + global mean) / 3` within
/// its metric; a row or column without training cells uses the global mean.
pub fn mean_of_means_baseline(t: &ScoreTensor, train: &Mask) -> Result<Vec<f64>> {
    let dims = t.dims();
    let global = metric_train_means(t, train)?;
    let mut row = vec![(0.0, 0usize); dims.models * dims.metrics];
    let mut col = vec![(0.0, 0usize); dims.datasets * dims.metrics];
    for i in train.and(t.observed()).indices() {
        let (m, n, s) = dims.coords(i);
        let x = t.values()[i];
        row[m * dims.metrics + s].0 += x;
        row[m * dims.metrics + s].1 += 1;
        col[n * dims.metrics + s].0 += x;
        col[n * dims.metrics + s].1 += 1;
    }
    let mean_or = |(sum, cnt): (f64, usize), fallback: f64| if cnt > 0 { sum / cnt as f64 } else { fallback };
    Ok((0..dims.len())
        .map(|i| {
            let (m, n, s) = dims.coords(i);
            let r = mean_or(row[m * dims.metrics + s], global[s]);
            let c = mean_or(col[n * dims.metrics + s], global[s]);
            (r + c + global[s]) / 3.0
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub model_id: String,
    pub dataset_id: String,
    pub metric_id: String,
    pub mean: f64,
    pub std: f64,
    pub observed: u8,
    pub in_test: u8,
    pub truth: Option<f64>,
}

/// One row per cell. `observed` marks training cells, `truth` is empty for
/// cells absent from the data.
pub fn prediction_rows(
    tensor: &ScoreTensor,
    mean: &[f64],
    std: &[f64],
    train: &Mask,
    test: &Mask,
) -> Vec<PredictionRow> {
    let dims = tensor.dims();
    (0..dims.len())
        .map(|i| {
            let (m, n, s) = dims.coords(i);
            PredictionRow {
                model_id: tensor.model_ids()[m].clone(),
                dataset_id: tensor.dataset_ids()[n].clone(),
                metric_id: tensor.metric_ids()[s].clone(),
                mean: mean[i],
                std: std[i],
                observed: u8::from(train.get(i)),
                in_test: u8::from(test.get(i)),
                truth: tensor.observed().get(i).then(|| tensor.values()[i]),
            }
        })
        .collect()
}

pub fn write_predictions_csv(
    path: &Path,
    tensor: &ScoreTensor,
    mean: &[f64],
    std: &[f64],
    train: &Mask,
    test: &Mask,
) -> Result<()> {
    write_csv(path, &prediction_rows(tensor, mean, std, train, test))
}
