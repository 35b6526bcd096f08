//! Model and dataset profile matrices `H` (M×K) and `G` (N×J).
//!
//! Oracle profiles cluster full score rows/columns with k-means and one-hot
//! encode the assignments. Custom profiles encode model feature files and
//! cluster precomputed dataset embedding vectors.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_err, io_err, parse_err};
use crate::linalg::Matrix;
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub h: Matrix,
    pub g: Matrix,
    pub model_features: Vec<String>,
    pub dataset_features: Vec<String>,
}

impl ProfileSet {
    pub fn new(h: Matrix, g: Matrix, model_features: Vec<String>, dataset_features: Vec<String>) -> Result<Self> {
        if h.cols == 0 || g.cols == 0 {
            return Err(Error::arg("profiles", "profiles need at least one column"));
        }
        if h.cols != model_features.len() || g.cols != dataset_features.len() {
            return Err(Error::arg("profiles", "feature names do not match columns"));
        }
        Ok(ProfileSet {
            h,
            g,
            model_features,
            dataset_features,
        })
    }

    pub fn model_feature_index(&self, name: &str) -> Option<usize> {
        self.model_features.iter().position(|f| f == name)
    }

    /// Loads profiles from a directory holding, per axis, either a raw matrix
    /// (`model_profile.csv`, `dataset_profile.csv`), a typed feature file
    /// (`model_features.csv`, `dataset_features.csv`) or, for datasets only,
    /// embedding vectors (`dataset_embeddings.csv`).
    pub fn load_dir(
        dir: &Path,
        model_ids: &[String],
        dataset_ids: &[String],
        cluster_k: Option<usize>,
        seed: u64,
    ) -> Result<ProfileSet> {
        let (h, model_features) = if dir.join("model_profile.csv").exists() {
            read_profile_matrix(&dir.join("model_profile.csv"), model_ids, "model")?
        } else if dir.join("model_features.csv").exists() {
            encode_features(&dir.join("model_features.csv"), model_ids, "model")?
        } else {
            return Err(Error::arg(
                "profiles",
                format!("{} has no model_profile.csv or model_features.csv", dir.display()),
            ));
        };
        let (g, dataset_features) = if dir.join("dataset_profile.csv").exists() {
            read_profile_matrix(&dir.join("dataset_profile.csv"), dataset_ids, "dataset")?
        } else if dir.join("dataset_features.csv").exists() {
            encode_features(&dir.join("dataset_features.csv"), dataset_ids, "dataset")?
        } else if dir.join("dataset_embeddings.csv").exists() {
            let points = read_embeddings(&dir.join("dataset_embeddings.csv"), dataset_ids)?;
            cluster_one_hot(&points, cluster_k, seed)?
        } else {
            return Err(Error::arg(
                "profiles",
                format!(
                    "{} has no dataset_profile.csv, dataset_features.csv or dataset_embeddings.csv",
                    dir.display()
                ),
            ));
        };
        ProfileSet::new(h, g, model_features, dataset_features)
    }

    /// Writes `model_profile.csv` and `dataset_profile.csv`.
    pub fn write_dir(&self, dir: &Path, model_ids: &[String], dataset_ids: &[String]) -> Result<()> {
        write_profile_matrix(&dir.join("model_profile.csv"), &self.h, &self.model_features, model_ids)?;
        write_profile_matrix(
            &dir.join("dataset_profile.csv"),
            &self.g,
            &self.dataset_features,
            dataset_ids,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distinct_count(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted.dedup();
    sorted.len()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let first = points.first().ok_or_else(|| Error::arg("points", "empty input"))?;
    let dim = first.len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::arg("points", "points have different dimensions"));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::arg("points", "non-finite coordinate"));
    }
    Ok(dim)
}

/// Lloyd's algorithm from k-means++ seeding. Stops when assignments no longer
/// change or after `max_iter` assignment steps.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    check_points(points)?;
    let distinct = distinct_count(points);
    if k == 0 || k > distinct {
        return Err(Error::arg(
            "k",
            format!("{k} is not in 1..={distinct} (distinct points)"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, w) in d2.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            pick = Some(i);
            if target < *w {
                break;
            }
            target -= w;
        }
        let next = points[pick.expect("fewer distinct points than k")].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &next));
        }
        centroids.push(next);
    }

    let mut assignments = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (best, dist) = centroids
                .iter()
                .enumerate()
                .map(|(c, cent)| (c, sq_dist(p, cent)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            inertia += dist;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        // empty clusters keep their previous centroid
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    Ok(KMeans {
        assignments,
        centroids,
        inertia,
        inertia_trace: trace,
    })
}

/// Best of `restarts` k-means runs (lowest inertia, earliest on ties).
pub fn kmeans_restarts(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize, exec: Execution) -> Result<KMeans> {
    let runs = par::try_map_range(exec, restarts.max(1), |r| {
        kmeans(points, k, seed.wrapping_mul(1_000_003).wrapping_add(r as u64), 300)
    })?;
    Ok(runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one run"))
}

/// Picks the k of maximal discrete curvature
/// `(I[k-1] - I[k]) - (I[k] - I[k+1])` over interior points of the sequence.
/// Ties go to the smaller k.
pub fn elbow_from_inertia(ks: &[usize], inertia: &[f64]) -> Result<usize> {
    if ks.len() != inertia.len() || ks.len() < 3 {
        return Err(Error::arg("k_range", "fewer than 3 candidate k values"));
    }
    let scale = inertia
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let mut best = (ks[1], f64::NEG_INFINITY);
    for i in 1..ks.len() - 1 {
        let curv = (inertia[i - 1] - inertia[i]) - (inertia[i] - inertia[i + 1]);
        if curv > best.1 + 1e-12 * scale {
            best = (ks[i], curv);
        }
    }
    Ok(best.0)
}

pub const DEFAULT_K_RANGE: (usize, usize) = (2, 10);
const RESTARTS: usize = 8;

/// Elbow choice of k within `k_min..=k_max` (clipped to the number of
/// distinct points). Inertia is evaluated at `k_min - 1 ..= k_max + 1` so every
/// candidate has both neighbours.
pub fn elbow_select(points: &[Vec<f64>], k_min: usize, k_max: usize, seed: u64, exec: Execution) -> Result<usize> {
    check_points(points)?;
    let distinct = distinct_count(points);
    let lo = k_min.max(2) - 1;
    let hi = (k_max + 1).min(distinct);
    if hi < lo + 2 || k_max < k_min {
        return Err(Error::arg("k_range", "fewer than 3 candidate k values"));
    }
    let ks: Vec<usize> = (lo..=hi).collect();
    let inertia: Vec<f64> = ks
        .iter()
        .map(|&k| kmeans_restarts(points, k, seed, RESTARTS, exec).map(|r| r.inertia))
        .collect::<Result<_>>()?;
    elbow_from_inertia(&ks, &inertia)
}

pub fn one_hot(assignments: &[usize], k: usize) -> Matrix {
    let mut m = Matrix::zeros(assignments.len(), k);
    for (i, &a) in assignments.iter().enumerate() {
        m.set(i, a, 1.0);
    }
    m
}

/// Cluster labels renumbered by first appearance so equal partitions give equal
/// one-hot matrices.
fn canonical_labels(assignments: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let labels = assignments
        .iter()
        .map(|a| {
            let next = map.len();
            *map.entry(*a).or_insert(next)
        })
        .collect();
    (labels, map.len())
}

/// One-hot cluster memberships; k from the elbow rule unless given.
pub fn cluster_one_hot(points: &[Vec<f64>], k: Option<usize>, seed: u64) -> Result<(Matrix, Vec<String>)> {
    check_points(points)?;
    let distinct = distinct_count(points);
    let k = match k {
        Some(k) => k,
        None if distinct <= 2 => distinct,
        None => elbow_select(
            points,
            DEFAULT_K_RANGE.0,
            DEFAULT_K_RANGE.1,
            seed,
            Execution::Sequential,
        )?,
    };
    let run = kmeans_restarts(points, k, seed, RESTARTS, Execution::Sequential)?;
    let (labels, used) = canonical_labels(&run.assignments);
    let names = (0..used).map(|c| format!("cluster{c}")).collect();
    Ok((one_hot(&labels, used), names))
}

/// Oracle profiles from a complete `M×N` score matrix: rows cluster into `H`,
/// columns into `G`, each with its own elbow-selected k.
pub fn oracle_profiles(matrix: &Matrix, seed: u64) -> Result<ProfileSet> {
    if matrix.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidTensor("oracle profiles need a complete matrix".into()));
    }
    let (h, hn) = cluster_one_hot(&matrix.row_vecs(), None, seed)?;
    let (g, gn) = cluster_one_hot(&matrix.transpose().row_vecs(), None, seed)?;
    ProfileSet::new(h, g, hn, gn)
}

#[derive(Debug, Clone, PartialEq)]
enum FeatureKind {
    Numeric,
    Categorical,
    Infer,
}

fn split_kind(name: &str) -> (FeatureKind, &str) {
    if let Some(rest) = name.strip_prefix("num:") {
        (FeatureKind::Numeric, rest)
    } else if let Some(rest) = name.strip_prefix("cat:") {
        (FeatureKind::Categorical, rest)
    } else {
        (FeatureKind::Infer, name)
    }
}

fn read_raw_records(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect::<Vec<_>>())
                .map_err(|e| parse_err(path, e))
        })
        .filter(|r| !matches!(r, Ok(v) if v.iter().all(String::is_empty)))
        .collect()
}

fn index_rows(
    rows: Vec<(String, Vec<(String, String)>)>,
    ids: &[String],
    kind: &'static str,
) -> Result<Vec<Vec<(String, String)>>> {
    let mut by_id: HashMap<String, Vec<(String, String)>> = HashMap::new();
    let mut unknown = Vec::new();
    for (id, fields) in rows {
        if !ids.contains(&id) {
            unknown.push(id);
            continue;
        }
        if by_id.insert(id.clone(), fields).is_some() {
            return Err(Error::arg("profiles", format!("{kind} {id} listed twice")));
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownId {
            kind,
            ids: unknown.join(","),
        });
    }
    let missing: Vec<&str> = ids
        .iter()
        .filter(|id| !by_id.contains_key(*id))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingId {
            kind,
            ids: missing.join(","),
        });
    }
    Ok(ids.iter().map(|id| by_id.remove(id).unwrap()).collect())
}

/// Encodes a feature file into a profile matrix with rows in `ids` order.
///
/// Two layouts are accepted: a wide CSV whose header is
/// `<id>,num:<name>,cat:<name>,...`, or header-less lines
/// `<id>,<name>=<value>,...` where a name may carry the same `num:`/`cat:`
/// prefix (otherwise a feature is numeric when every value parses).
/// Numeric columns are standardized across entities (population sd);
/// categorical columns become one-hot blocks named `<name>=<value>`.
pub fn encode_features(path: &Path, ids: &[String], kind: &'static str) -> Result<(Matrix, Vec<String>)> {
    let records = read_raw_records(path)?;
    let first = records.first().ok_or_else(|| parse_err(path, "empty feature file"))?;
    let wide = first.len() > 1 && first[1..].iter().all(|f| !f.contains('='));
    let mut rows = Vec::new();
    if wide {
        let header = &first[1..];
        for rec in &records[1..] {
            if rec.len() != first.len() {
                return Err(parse_err(path, format!("row for {} has {} fields", rec[0], rec.len())));
            }
            let fields = header.iter().cloned().zip(rec[1..].iter().cloned()).collect();
            rows.push((rec[0].clone(), fields));
        }
    } else {
        for rec in &records {
            if rec.len() == 1 && rec[0].ends_with("_id") {
                continue;
            }
            let mut fields = Vec::new();
            for f in &rec[1..] {
                let (k, v) = f
                    .split_once('=')
                    .ok_or_else(|| parse_err(path, format!("expected name=value, got {f}")))?;
                fields.push((k.trim().to_string(), v.trim().to_string()));
            }
            rows.push((rec[0].clone(), fields));
        }
    }

    // feature names in first-appearance order
    let mut names: Vec<String> = Vec::new();
    for (_, fields) in &rows {
        for (k, _) in fields {
            if !names.contains(k) {
                names.push(k.clone());
            }
        }
    }
    let rows = index_rows(rows, ids, kind)?;
    let table: Vec<BTreeMap<&str, &str>> = rows
        .iter()
        .map(|f| f.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect())
        .collect();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut col_names = Vec::new();
    for name in &names {
        let values: Vec<&str> = table
            .iter()
            .zip(ids)
            .map(|(row, id)| {
                row.get(name.as_str())
                    .copied()
                    .ok_or_else(|| parse_err(path, format!("{kind} {id} lacks feature {name}")))
            })
            .collect::<Result<_>>()?;
        let (fk, bare) = split_kind(name);
        let parsed: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
        let numeric = match fk {
            FeatureKind::Numeric => {
                Some(parsed.ok_or_else(|| parse_err(path, format!("non-numeric value for {name}")))?)
            }
            FeatureKind::Categorical => None,
            FeatureKind::Infer => parsed,
        };
        match numeric {
            Some(xs) => {
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
                columns.push(
                    xs.iter()
                        .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
                        .collect(),
                );
                col_names.push(bare.to_string());
            }
            None => {
                let mut levels: Vec<&str> = Vec::new();
                for v in &values {
                    if !levels.contains(v) {
                        levels.push(v);
                    }
                }
                for level in levels {
                    columns.push(values.iter().map(|v| f64::from(u8::from(*v == level))).collect());
                    col_names.push(format!("{bare}={level}"));
                }
            }
        }
    }
    if columns.is_empty() {
        return Err(parse_err(path, "no features"));
    }
    let mut m = Matrix::zeros(ids.len(), columns.len());
    for (c, col) in columns.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            m.set(r, c, *x);
        }
    }
    Ok((m, col_names))
}

/// Dataset embedding vectors (`<id>,v0,v1,...`), rows in `ids` order.
pub fn read_embeddings(path: &Path, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut records = read_raw_records(path)?;
    if records
        .first()
        .is_some_and(|r| r.len() > 1 && r[1].parse::<f64>().is_err())
    {
        records.remove(0);
    }
    let mut rows = Vec::new();
    let mut dim = None;
    for rec in records {
        let values: Vec<f64> = rec[1..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| parse_err(path, format!("bad number {v}"))))
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(parse_err(path, format!("ragged embedding for {}", rec[0])));
            }
            _ => {}
        }
        rows.push((rec[0].clone(), values));
    }
    let mut by_id: HashMap<String, Vec<f64>> = HashMap::new();
    let mut unknown = Vec::new();
    for (id, v) in rows {
        if ids.contains(&id) {
            by_id.insert(id, v);
        } else {
            unknown.push(id);
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownId {
            kind: "dataset",
            ids: unknown.join(","),
        });
    }
    let missing: Vec<&str> = ids
        .iter()
        .filter(|id| !by_id.contains_key(*id))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingId {
            kind: "dataset",
            ids: missing.join(","),
        });
    }
    Ok(ids.iter().map(|id| by_id.remove(id).unwrap()).collect())
}

/// Custom profiles: encoded model features and clustered dataset embeddings.
pub fn custom_profiles(
    model_features: &Path,
    dataset_embeddings: &Path,
    model_ids: &[String],
    dataset_ids: &[String],
    cluster_k: Option<usize>,
    seed: u64,
) -> Result<ProfileSet> {
    let (h, hn) = encode_features(model_features, model_ids, "model")?;
    let points = read_embeddings(dataset_embeddings, dataset_ids)?;
    let (g, gn) = cluster_one_hot(&points, cluster_k, seed)?;
    ProfileSet::new(h, g, hn, gn)
}

/// Raw profile matrix: header `<id>,<feature>...`, numeric cells.
pub fn read_profile_matrix(path: &Path, ids: &[String], kind: &'static str) -> Result<(Matrix, Vec<String>)> {
    let records = read_raw_records(path)?;
    let header = records.first().ok_or_else(|| parse_err(path, "empty profile file"))?;
    let names: Vec<String> = header[1..].to_vec();
    let mut rows = Vec::new();
    for rec in &records[1..] {
        if rec.len() != header.len() {
            return Err(parse_err(path, format!("row for {} has {} fields", rec[0], rec.len())));
        }
        let fields = names.iter().cloned().zip(rec[1..].iter().cloned()).collect();
        rows.push((rec[0].clone(), fields));
    }
    let rows = index_rows(rows, ids, kind)?;
    let mut m = Matrix::zeros(ids.len(), names.len());
    for (r, fields) in rows.iter().enumerate() {
        for (c, (_, v)) in fields.iter().enumerate() {
            let x = v
                .parse::<f64>()
                .map_err(|_| parse_err(path, format!("bad number {v}")))?;
            m.set(r, c, x);
        }
    }
    Ok((m, names))
}

pub fn write_profile_matrix(path: &Path, m: &Matrix, names: &[String], ids: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["id".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| parse_err(path, e))?;
    for (r, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(m.row(r).iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(|e| parse_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};
    use std::io::Write;

    fn pts(raw: &[(f64, f64)]) -> Vec<Vec<f64>> {
        raw.iter().map(|(a, b)| vec![*a, *b]).collect()
    }

    fn blobs(centers: &[(f64, f64)], per: usize, sd: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sd).unwrap();
        let mut out = Vec::new();
        for (cx, cy) in centers {
            for _ in 0..per {
                out.push(vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]);
            }
        }
        out
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        canonical_labels(a).0 == canonical_labels(b).0
    }

    #[test]
    fn two_well_separated_pairs() {
        let p = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 10.0), (10.0, 11.0)]);
        let r = kmeans_restarts(&p, 2, 1, 4, Execution::Sequential).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        assert!((r.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_equal_to_points_has_zero_inertia() {
        let p = pts(&[(0.0, 0.0), (1.0, 5.0), (3.0, -2.0)]);
        assert_eq!(kmeans(&p, 3, 9, 300).unwrap().inertia, 0.0);
    }

    #[test]
    fn duplicates_collapse() {
        let p = pts(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (4.0, 4.0)]);
        let r = kmeans(&p, 2, 3, 300).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[1], r.assignments[2]);
        assert_eq!(r.inertia, 0.0);
        assert!(kmeans(&p, 3, 3, 300).is_err());
        assert!(kmeans(&[], 1, 3, 300).is_err());
    }

    #[test]
    fn lloyd_inertia_never_increases() {
        let p = blobs(
            &[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0), (3.0, 3.0), (1.5, 1.5)],
            30,
            1.0,
            4,
        );
        for seed in 0..10 {
            let r = kmeans(&p, 4, seed, 300).unwrap();
            for w in r.inertia_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }

    #[test]
    fn elbow_on_constructed_sequences() {
        assert_eq!(
            elbow_from_inertia(&[1, 2, 3, 4], &[100.0, 20.0, 18.0, 17.0]).unwrap(),
            2
        );
        assert_eq!(
            elbow_from_inertia(&[1, 2, 3, 4, 5], &[50.0, 40.0, 30.0, 20.0, 10.0]).unwrap(),
            2
        );
        assert!(elbow_from_inertia(&[1, 2], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn elbow_finds_four_blobs() {
        // centers pairwise 10 apart (regular simplex), within-cluster sd 1; a
        // square layout would nest into two pairs and put the elbow at 2
        let a = 10.0 / 2f64.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut p = Vec::new();
        for c in 0..4 {
            for _ in 0..15 {
                p.push(
                    (0..4)
                        .map(|i| if i == c { a } else { 0.0 } + noise.sample(&mut rng))
                        .collect(),
                );
            }
        }
        assert_eq!(elbow_select(&p, 2, 10, 0, Execution::Parallel).unwrap(), 4);
    }

    #[test]
    fn shuffled_input_gives_same_partition() {
        let p = blobs(&[(0.0, 0.0), (8.0, 1.0), (2.0, 9.0)], 10, 1.0, 2);
        let base = kmeans_restarts(&p, 3, 5, 8, Execution::Sequential).unwrap();
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.reverse();
        order.swap(3, 17);
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| p[i].clone()).collect();
        let other = kmeans_restarts(&shuffled, 3, 5, 8, Execution::Sequential).unwrap();
        let mut back = vec![0; p.len()];
        for (pos, &i) in order.iter().enumerate() {
            back[i] = other.assignments[pos];
        }
        assert!(same_partition(&base.assignments, &back));
        assert!((base.inertia - other.inertia).abs() < 1e-9);
    }

    #[test]
    fn oracle_profiles_separate_row_scale_groups() {
        // rank-1 rows a_m · v with two scale groups
        let v = [1.0, -2.0, 0.5, 3.0, 1.5, -1.0];
        let scales = [1.0, 1.05, 0.95, 1.02, 5.0, 5.1, 4.9, 5.05];
        let mut data = Vec::new();
        for a in scales {
            data.extend(v.iter().map(|x| a * x));
        }
        let m = Matrix::from_vec(scales.len(), v.len(), data);
        let p = oracle_profiles(&m, 3).unwrap();
        assert_eq!(p.h.cols, 2);
        for r in 0..m.rows {
            let row_sum: f64 = p.h.row(r).iter().sum();
            assert_eq!(row_sum, 1.0);
        }
        assert_eq!(p.h.row(0), p.h.row(3));
        assert_eq!(p.h.row(4), p.h.row(7));
        assert_ne!(p.h.row(0), p.h.row(4));
        for r in 0..p.g.rows {
            assert_eq!(p.g.row(r).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn identical_rows_give_single_cluster() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]);
        let p = oracle_profiles(&m, 0).unwrap();
        assert_eq!(p.h.cols, 1);
        assert!(p.h.data.iter().all(|x| *x == 1.0));
    }

    #[test]
    fn transposing_swaps_profile_roles() {
        let m = Matrix::from_rows(&[
            vec![0.0, 0.1, 5.0, 5.2],
            vec![0.1, 0.0, 5.1, 5.0],
            vec![3.0, 3.1, 9.0, 9.1],
        ]);
        let a = oracle_profiles(&m, 4).unwrap();
        let b = oracle_profiles(&m.transpose(), 4).unwrap();
        assert_eq!(a.h, b.g);
        assert_eq!(a.g, b.h);
    }

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
        path
    }

    #[test]
    fn feature_encoding_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let ids = vec!["a".to_string(), "b".to_string()];
        let wide = write(&dir, "w.csv", "model_id,num:params,cat:family\nb,13,A\na,7,A\n");
        let (h, names) = encode_features(&wide, &ids, "model").unwrap();
        assert_eq!(names, vec!["params", "family=A"]);
        assert_eq!(h.row(0), &[-1.0, 1.0]);
        assert_eq!(h.row(1), &[1.0, 1.0]);

        let kv = write(&dir, "kv.csv", "a,params=7,encoder=clip\nb,params=13,encoder=siglip\n");
        let (h, names) = encode_features(&kv, &ids, "model").unwrap();
        assert_eq!(names, vec!["params", "encoder=clip", "encoder=siglip"]);
        assert_eq!(h.row(0), &[-1.0, 1.0, 0.0]);
        assert_eq!(h.row(1), &[1.0, 0.0, 1.0]);

        let unknown = write(&dir, "u.csv", "model_id,cat:family\na,A\nb,B\nc,C\n");
        assert!(matches!(
            encode_features(&unknown, &ids, "model"),
            Err(Error::UnknownId { .. })
        ));
    }

    #[test]
    fn embeddings_cluster_into_blobs() {
        let dir = tempfile::tempdir().unwrap();
        let p = blobs(&[(0.0, 0.0), (12.0, 0.0), (0.0, 12.0)], 6, 0.8, 21);
        let ids: Vec<String> = (0..p.len()).map(|i| format!("d{i}")).collect();
        let mut text = String::from("dataset_id,v0,v1\n");
        for (id, x) in ids.iter().zip(&p) {
            text += &format!("{id},{},{}\n", x[0], x[1]);
        }
        let emb = write(&dir, "e.csv", &text);
        let feats = write(&dir, "f.csv", "model_id,num:params\nm0,1\nm1,2\n");
        let models = vec!["m0".to_string(), "m1".to_string()];
        let prof = custom_profiles(&feats, &emb, &models, &ids, None, 1).unwrap();
        assert_eq!(prof.g.cols, 3);
        for r in 0..prof.g.rows {
            assert_eq!(prof.g.row(r).iter().sum::<f64>(), 1.0);
        }

        let missing = &ids[..ids.len() - 1];
        let mut extra = ids.clone();
        extra.push("absent".into());
        let err = read_embeddings(&emb, &extra).unwrap_err();
        assert!(err.to_string().contains("absent"));
        assert!(read_embeddings(&emb, missing).is_err());

        let ragged = write(&dir, "r.csv", "x,1,2\ny,1\n");
        assert!(read_embeddings(&ragged, &["x".into(), "y".into()]).is_err());
    }
}
