//! Reading and writing long-format score files.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Dims, Mask, ScoreTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreFormat {
    #[default]
    LongCsv,
    Json,
}

impl ScoreFormat {
    /// `.json` files are read as JSON, everything else as long CSV.
    pub fn from_path(path: &Path) -> ScoreFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ScoreFormat::Json,
            _ => ScoreFormat::LongCsv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub model_id: String,
    pub dataset_id: String,
    pub metric_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityRecord {
    pub dataset_id: String,
    pub metric_id: String,
    pub valid: u8,
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn parse_err(path: &Path, message: impl ToString) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// csv's own io failures (missing file, permissions) stay io errors.
pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(source) = e.into_kind() {
            return io_err(path, source);
        }
        unreachable!("is_io_error implies an io kind");
    }
    parse_err(path, e)
}

pub(crate) fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| parse_err(path, e)))
        .collect()
}

pub fn read_score_records(path: &Path, format: ScoreFormat) -> Result<Vec<ScoreRecord>> {
    match format {
        ScoreFormat::LongCsv => read_csv(path),
        ScoreFormat::Json => {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| parse_err(path, e))
        }
    }
}

fn intern(ids: &mut Vec<String>, lookup: &mut HashMap<String, usize>, id: &str) -> usize {
    if let Some(&i) = lookup.get(id) {
        return i;
    }
    ids.push(id.to_string());
    lookup.insert(id.to_string(), ids.len() - 1);
    ids.len() - 1
}

/// Assembles a tensor from records, with axes in first-appearance order.
///
/// Without an explicit validity list a metric counts as valid for a dataset
/// when any model has a score for it. Explicit entries override the inferred
/// value for the cells they name.
pub fn tensor_from_records(records: &[ScoreRecord], validity: Option<&[ValidityRecord]>) -> Result<ScoreTensor> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let (mut models, mut datasets, mut metrics) = (Vec::new(), Vec::new(), Vec::new());
    let (mut mlook, mut dlook, mut slook) = (HashMap::new(), HashMap::new(), HashMap::new());
    let mut cells = Vec::with_capacity(records.len());
    for r in records {
        if !r.value.is_finite() {
            return Err(Error::NonFinite {
                model: r.model_id.clone(),
                dataset: r.dataset_id.clone(),
                metric: r.metric_id.clone(),
            });
        }
        let m = intern(&mut models, &mut mlook, &r.model_id);
        let n = intern(&mut datasets, &mut dlook, &r.dataset_id);
        let s = intern(&mut metrics, &mut slook, &r.metric_id);
        cells.push((m, n, s, r.value));
    }
    let dims = Dims::new(models.len(), datasets.len(), metrics.len());
    let mut values = vec![f64::NAN; dims.len()];
    let mut observed = Mask::empty(dims);
    let mut valid = vec![false; dims.datasets * dims.metrics];
    for (m, n, s, v) in cells {
        let idx = dims.index(m, n, s);
        if observed.get(idx) {
            return Err(Error::DuplicateCell {
                model: models[m].clone(),
                dataset: datasets[n].clone(),
                metric: metrics[s].clone(),
            });
        }
        observed.set(idx, true);
        values[idx] = v;
        valid[n * dims.metrics + s] = true;
    }
    if let Some(list) = validity {
        let mut unknown = Vec::new();
        for v in list {
            match (dlook.get(&v.dataset_id), slook.get(&v.metric_id)) {
                (Some(&n), Some(&s)) => valid[n * dims.metrics + s] = v.valid != 0,
                _ => unknown.push(format!("{}/{}", v.dataset_id, v.metric_id)),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::UnknownId {
                kind: "dataset/metric",
                ids: unknown.join(","),
            });
        }
    }
    ScoreTensor::new(models, datasets, metrics, values, observed, valid)
}

pub fn load_scores(path: &Path, format: ScoreFormat, validity: Option<&Path>) -> Result<ScoreTensor> {
    let records = read_score_records(path, format)?;
    let validity = validity.map(read_csv::<ValidityRecord>).transpose()?;
    tensor_from_records(&records, validity.as_deref())
}

/// Observed cells of a tensor in axis order.
pub fn tensor_records(tensor: &ScoreTensor) -> Vec<ScoreRecord> {
    let dims = tensor.dims();
    tensor
        .observed()
        .indices()
        .map(|idx| {
            let (m, n, s) = dims.coords(idx);
            ScoreRecord {
                model_id: tensor.model_ids()[m].clone(),
                dataset_id: tensor.dataset_ids()[n].clone(),
                metric_id: tensor.metric_ids()[s].clone(),
                value: tensor.values()[idx],
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| parse_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

pub fn write_scores_csv(path: &Path, tensor: &ScoreTensor) -> Result<()> {
    write_csv(path, &tensor_records(tensor))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| parse_err(path, e))
}

/// Per-dataset validity as a list, for export.
pub fn validity_records(tensor: &ScoreTensor) -> Vec<ValidityRecord> {
    let dims = tensor.dims();
    let mut out = BTreeMap::new();
    for n in 0..dims.datasets {
        for s in 0..dims.metrics {
            out.insert((n, s), tensor.is_valid(n, s));
        }
    }
    out.into_iter()
        .map(|((n, s), v)| ValidityRecord {
            dataset_id: tensor.dataset_ids()[n].clone(),
            metric_id: tensor.metric_ids()[s].clone(),
            valid: u8::from(v),
        })
        .collect()
}
