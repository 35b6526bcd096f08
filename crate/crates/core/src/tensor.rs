//! Score tensor, observation masks, train/test splitting and per-metric normalization.
//!
//! Axis order is always (model, dataset, metric). Flat indices are row-major:
//! `(m * N + n) * S + s`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub models: usize,
    pub datasets: usize,
    pub metrics: usize,
}

impl Dims {
    pub fn new(models: usize, datasets: usize, metrics: usize) -> Self {
        Dims {
            models,
            datasets,
            metrics,
        }
    }

    pub fn len(&self) -> usize {
        self.models * self.datasets * self.metrics
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, m: usize, n: usize, s: usize) -> usize {
        (m * self.datasets + n) * self.metrics + s
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let s = idx % self.metrics;
        let mn = idx / self.metrics;
        (mn / self.datasets, mn % self.datasets, s)
    }
}

/// Boolean mask over every cell of an `M×N×S` tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(dims: Dims) -> Self {
        Mask {
            dims,
            bits: vec![false; dims.len()],
        }
    }

    pub fn full(dims: Dims) -> Self {
        Mask {
            dims,
            bits: vec![true; dims.len()],
        }
    }

    pub fn from_bits(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: bits.len(),
            });
        }
        Ok(Mask { dims, bits })
    }

    pub fn from_indices(dims: Dims, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = Mask::empty(dims);
        for i in indices {
            mask.bits[i] = true;
        }
        mask
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub fn at(&self, m: usize, n: usize, s: usize) -> bool {
        self.bits[self.dims.index(m, n, s)]
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.bits[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Flat indices of set cells in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, b)| b.then_some(i))
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Mask {
        assert_eq!(self.dims, other.dims, "mask dimensions differ");
        Mask {
            dims: self.dims,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn and(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a || b)
    }

    /// Cells set in `self` but not in `other`.
    pub fn minus(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// All cells of model row `m`.
    pub fn model_row(dims: Dims, m: usize) -> Mask {
        let mut mask = Mask::empty(dims);
        for n in 0..dims.datasets {
            for s in 0..dims.metrics {
                mask.bits[dims.index(m, n, s)] = true;
            }
        }
        mask
    }

    /// All cells of dataset column `n`.
    pub fn dataset_column(dims: Dims, n: usize) -> Mask {
        let mut mask = Mask::empty(dims);
        for m in 0..dims.models {
            for s in 0..dims.metrics {
                mask.bits[dims.index(m, n, s)] = true;
            }
        }
        mask
    }

    /// The `M×N×1` mask of metric `s`, matching [`ScoreTensor::metric_slice`].
    pub fn metric_slice(&self, s: usize) -> Mask {
        let dims = self.dims;
        let sub = Dims::new(dims.models, dims.datasets, 1);
        let bits = (0..dims.models)
            .flat_map(|m| (0..dims.datasets).map(move |n| (m, n)))
            .map(|(m, n)| self.at(m, n, s))
            .collect();
        Mask { dims: sub, bits }
    }
}

/// Sparse `M×N×S` tensor of scores.
#[derive(Debug, Clone)]
pub struct ScoreTensor {
    model_ids: Vec<String>,
    dataset_ids: Vec<String>,
    metric_ids: Vec<String>,
    values: Vec<f64>,
    observed: Mask,
    /// `N×S`, true where a metric is meaningful for a dataset.
    valid: Vec<bool>,
}

fn check_unique(kind: &'static str, ids: &[String]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::InvalidTensor(format!("no {kind} ids")));
    }
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidTensor(format!("duplicate {kind} id {id}")));
        }
    }
    Ok(())
}

impl ScoreTensor {
    /// Builds a tensor and checks every invariant. Unobserved cells of `values`
    /// are ignored and stored as NaN.
    pub fn new(
        model_ids: Vec<String>,
        dataset_ids: Vec<String>,
        metric_ids: Vec<String>,
        mut values: Vec<f64>,
        observed: Mask,
        valid: Vec<bool>,
    ) -> Result<Self> {
        check_unique("model", &model_ids)?;
        check_unique("dataset", &dataset_ids)?;
        check_unique("metric", &metric_ids)?;
        let dims = Dims::new(model_ids.len(), dataset_ids.len(), metric_ids.len());
        if values.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: values.len(),
            });
        }
        if observed.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: observed.dims().len(),
            });
        }
        if valid.len() != dims.datasets * dims.metrics {
            return Err(Error::DimensionMismatch {
                expected: dims.datasets * dims.metrics,
                got: valid.len(),
            });
        }
        for (idx, value) in values.iter_mut().enumerate() {
            let (m, n, s) = dims.coords(idx);
            if observed.get(idx) {
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        model: model_ids[m].clone(),
                        dataset: dataset_ids[n].clone(),
                        metric: metric_ids[s].clone(),
                    });
                }
                if !valid[n * dims.metrics + s] {
                    return Err(Error::InvalidTensor(format!(
                        "observation on invalid metric ({}, {}, {})",
                        model_ids[m], dataset_ids[n], metric_ids[s]
                    )));
                }
            } else {
                *value = f64::NAN;
            }
        }
        Ok(ScoreTensor {
            model_ids,
            dataset_ids,
            metric_ids,
            values,
            observed,
            valid,
        })
    }

    /// Fully observed tensor where every metric is valid everywhere.
    pub fn complete(
        model_ids: Vec<String>,
        dataset_ids: Vec<String>,
        metric_ids: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let dims = Dims::new(model_ids.len(), dataset_ids.len(), metric_ids.len());
        let valid = vec![true; dims.datasets * dims.metrics];
        Self::new(model_ids, dataset_ids, metric_ids, values, Mask::full(dims), valid)
    }

    pub fn dims(&self) -> Dims {
        self.observed.dims()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn dataset_ids(&self) -> &[String] {
        &self.dataset_ids
    }

    pub fn metric_ids(&self) -> &[String] {
        &self.metric_ids
    }

    /// Raw values; NaN where unobserved.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn observed(&self) -> &Mask {
        &self.observed
    }

    pub fn is_valid(&self, n: usize, s: usize) -> bool {
        self.valid[n * self.dims().metrics + s]
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    /// Cells whose metric is meaningful for their dataset.
    pub fn valid_mask(&self) -> Mask {
        let dims = self.dims();
        let bits = (0..dims.len())
            .map(|i| {
                let (_, n, s) = dims.coords(i);
                self.is_valid(n, s)
            })
            .collect();
        Mask { dims, bits }
    }

    pub fn metric_index(&self, id: &str) -> Option<usize> {
        self.metric_ids.iter().position(|m| m == id)
    }

    /// Single-metric `M×N` view; errors unless the slice is fully observed.
    pub fn metric_matrix(&self, s: usize) -> Result<Matrix> {
        let dims = self.dims();
        let mut data = Vec::with_capacity(dims.models * dims.datasets);
        for m in 0..dims.models {
            for n in 0..dims.datasets {
                let idx = dims.index(m, n, s);
                if !self.observed.get(idx) {
                    return Err(Error::InvalidTensor(format!(
                        "metric {} is missing ({}, {})",
                        self.metric_ids[s], self.model_ids[m], self.dataset_ids[n]
                    )));
                }
                data.push(self.values[idx]);
            }
        }
        Ok(Matrix::from_vec(dims.models, dims.datasets, data))
    }

    /// Copy of the tensor restricted to one metric.
    pub fn metric_slice(&self, s: usize) -> ScoreTensor {
        let dims = self.dims();
        let sub = Dims::new(dims.models, dims.datasets, 1);
        let mut values = Vec::with_capacity(sub.len());
        let mut bits = Vec::with_capacity(sub.len());
        for m in 0..dims.models {
            for n in 0..dims.datasets {
                let idx = dims.index(m, n, s);
                values.push(self.values[idx]);
                bits.push(self.observed.get(idx));
            }
        }
        ScoreTensor {
            model_ids: self.model_ids.clone(),
            dataset_ids: self.dataset_ids.clone(),
            metric_ids: vec![self.metric_ids[s].clone()],
            values,
            observed: Mask { dims: sub, bits },
            valid: (0..dims.datasets).map(|n| self.is_valid(n, s)).collect(),
        }
    }

    /// Collapses each group of metrics into a single metric named after the
    /// group. A cell may be observed for at most one metric of its group.
    /// Metrics not named in any group are dropped.
    pub fn merge_metrics(&self, groups: &[(String, Vec<String>)]) -> Result<ScoreTensor> {
        let dims = self.dims();
        let mut members = Vec::with_capacity(groups.len());
        for (_, ids) in groups {
            let idx = ids
                .iter()
                .map(|id| {
                    self.metric_index(id).ok_or_else(|| Error::UnknownId {
                        kind: "metric",
                        ids: id.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            members.push(idx);
        }
        let sub = Dims::new(dims.models, dims.datasets, groups.len());
        let mut values = vec![f64::NAN; sub.len()];
        let mut observed = Mask::empty(sub);
        let mut valid = vec![false; dims.datasets * groups.len()];
        for m in 0..dims.models {
            for n in 0..dims.datasets {
                for (g, group) in members.iter().enumerate() {
                    for &s in group {
                        if self.is_valid(n, s) {
                            valid[n * groups.len() + g] = true;
                        }
                        let idx = dims.index(m, n, s);
                        if !self.observed.get(idx) {
                            continue;
                        }
                        let out = sub.index(m, n, g);
                        if observed.get(out) {
                            return Err(Error::DuplicateCell {
                                model: self.model_ids[m].clone(),
                                dataset: self.dataset_ids[n].clone(),
                                metric: groups[g].0.clone(),
                            });
                        }
                        observed.set(out, true);
                        values[out] = self.values[idx];
                    }
                }
            }
        }
        ScoreTensor::new(
            self.model_ids.clone(),
            self.dataset_ids.clone(),
            groups.iter().map(|(name, _)| name.clone()).collect(),
            values,
            observed,
            valid,
        )
    }
}

/// Disjoint train/test partition of the observed cells.
#[derive(Debug, Clone)]
pub struct MaskSplit {
    pub train: Mask,
    pub test: Mask,
    pub test_ratio: f64,
    pub seed: u64,
}

/// Randomly holds out `round(test_ratio * |observed|)` observed cells.
pub fn split_mask(tensor: &ScoreTensor, test_ratio: f64, seed: u64) -> Result<MaskSplit> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::arg("test_ratio", format!("{test_ratio} is outside (0, 1)")));
    }
    let observed: Vec<usize> = tensor.observed().indices().collect();
    if observed.len() < 2 {
        return Err(Error::InvalidTensor(
            "at least 2 observed entries are needed to split".into(),
        ));
    }
    let n_test = ((test_ratio * observed.len() as f64).round() as usize).clamp(1, observed.len() - 1);
    let mut order = observed.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let dims = tensor.dims();
    let test = Mask::from_indices(dims, order[..n_test].iter().copied());
    let train = tensor.observed().minus(&test);
    Ok(MaskSplit {
        train,
        test,
        test_ratio,
        seed,
    })
}

/// Per-metric z-score transform fitted on training cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Normalizer {
    /// Population mean and sd per metric over `mask` cells only. Metrics with
    /// fewer than two distinct values get `sd = 1`; metrics with none get
    /// `mean = 0`.
    pub fn fit(tensor: &ScoreTensor, mask: &Mask) -> Normalizer {
        let dims = tensor.dims();
        let mut per_metric: Vec<Vec<f64>> = vec![Vec::new(); dims.metrics];
        for idx in mask.indices() {
            let (_, _, s) = dims.coords(idx);
            per_metric[s].push(tensor.values()[idx]);
        }
        let mut mean = Vec::with_capacity(dims.metrics);
        let mut sd = Vec::with_capacity(dims.metrics);
        for xs in per_metric {
            if xs.is_empty() {
                mean.push(0.0);
                sd.push(1.0);
                continue;
            }
            let mu = xs.iter().sum::<f64>() / xs.len() as f64;
            let distinct = xs.iter().any(|x| *x != xs[0]);
            let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64;
            mean.push(mu);
            sd.push(if distinct && var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Normalizer { mean, sd }
    }

    pub fn identity(metrics: usize) -> Normalizer {
        Normalizer {
            mean: vec![0.0; metrics],
            sd: vec![1.0; metrics],
        }
    }

    #[inline]
    pub fn normalize(&self, s: usize, x: f64) -> f64 {
        (x - self.mean[s]) / self.sd[s]
    }

    #[inline]
    pub fn denormalize(&self, s: usize, z: f64) -> f64 {
        z * self.sd[s] + self.mean[s]
    }

    /// Normalized copy of every value in the tensor (NaN stays NaN).
    pub fn normalize_all(&self, tensor: &ScoreTensor) -> Vec<f64> {
        let dims = tensor.dims();
        tensor
            .values()
            .iter()
            .enumerate()
            .map(|(i, x)| self.normalize(dims.coords(i).2, *x))
            .collect()
    }
}
