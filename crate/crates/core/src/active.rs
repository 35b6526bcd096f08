//! Simulated active evaluation: reveal hidden cells from ground truth in
//! batches chosen by a strategy, refit, and track the error on what is still
//! hidden.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig};
use crate::io::write_csv;
use crate::par::{self, Execution};
use crate::predict::{evaluate, evaluation_mask, pearson, predict, Prediction};
use crate::tensor::{Mask, ScoreTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Highest posterior std first (normalized scale).
    Uncertainty,
    /// Uniform without replacement.
    Random,
    /// Highest absolute error against ground truth first (normalized scale).
    Oracle,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Uncertainty, Strategy::Random, Strategy::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uncertainty => "uncertainty",
            Strategy::Random => "random",
            Strategy::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::arg("strategy", format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    pub strategies: Vec<Strategy>,
    /// Fraction of the observed cells visible at round 0.
    pub init_fraction: f64,
    /// Fraction of the observed cells revealed per round.
    pub batch_fraction: f64,
    /// Visible fraction at which revealing stops.
    pub budget_fraction: f64,
    pub seeds: Vec<u64>,
    pub fit: FitConfig,
}

impl ActiveConfig {
    pub fn validate(&self, pool: usize) -> Result<()> {
        let unit = |name: &'static str, x: f64| {
            if x > 0.0 && x < 1.0 || (name == "budget" && x == 1.0) {
                Ok(())
            } else {
                Err(Error::arg(name, format!("must lie in (0, 1), got {x}")))
            }
        };
        unit("init", self.init_fraction)?;
        unit("batch", self.batch_fraction)?;
        unit("budget", self.budget_fraction)?;
        if self.budget_fraction < self.init_fraction {
            return Err(Error::arg("budget", "budget is below the initial observed fraction"));
        }
        let budget = (self.budget_fraction * pool as f64).round() as usize;
        if budget > pool {
            return Err(Error::arg("budget", "budget exceeds the hidden cells"));
        }
        if self.strategies.is_empty() {
            return Err(Error::arg("strategy", "at least one strategy is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::arg("seeds", "at least one seed is required"));
        }
        Ok(())
    }
}

/// One round of one seed under one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub strategy: Strategy,
    pub seed: u64,
    pub round: usize,
    /// Visible cells over the pool of observed cells.
    pub fraction: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Pearson r between posterior std and absolute error on the hidden set.
    pub std_error_r: f64,
    #[serde(skip)]
    pub revealed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strategy: Strategy,
    pub round: usize,
    pub fraction: f64,
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveResult {
    /// Seed-averaged curve, ordered by strategy (config order) then round.
    pub curve: Vec<CurvePoint>,
    /// Every (seed, strategy, round), ordered by seed, strategy, round.
    pub records: Vec<RoundRecord>,
    /// Visible cells after the last round, per (seed, strategy).
    pub final_visible: Vec<(u64, Strategy, Mask)>,
}

/// Hidden cells ordered by descending normalized std; ties by cell index
/// (model, dataset, metric order).
pub fn rank_by_uncertainty(pred: &Prediction, hidden: &Mask) -> Vec<usize> {
    rank_desc(hidden, |i| pred.std_normalized[i])
}

fn rank_desc(hidden: &Mask, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut cells: Vec<usize> = hidden.indices().collect();
    cells.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    cells
}

/// Hidden cells ordered by descending normalized absolute error against truth.
pub fn rank_by_error(pred: &Prediction, tensor: &ScoreTensor, sd: &[f64], hidden: &Mask) -> Vec<usize> {
    let dims = tensor.dims();
    rank_desc(hidden, |i| {
        (pred.mean[i] - tensor.values()[i]).abs() / sd[dims.coords(i).2]
    })
}

struct RoundFit {
    pred: Prediction,
    sd: Vec<f64>,
    rmse: f64,
    mae: f64,
    r: f64,
}

fn fit_round(tensor: &ScoreTensor, visible: &Mask, hidden: &Mask, cfg: &FitConfig, seed: u64) -> Result<RoundFit> {
    let mut cfg = cfg.clone();
    cfg.sampler.seed = seed;
    let f = fit(tensor, visible, &cfg, None, Execution::Sequential)?;
    let pred = predict(&f)?;
    let report = evaluate(tensor, &pred.mean, hidden)?;
    let eval = evaluation_mask(tensor, hidden);
    let stds: Vec<f64> = eval.indices().map(|i| pred.std_normalized[i]).collect();
    let dims = tensor.dims();
    let errs: Vec<f64> = eval
        .indices()
        .map(|i| (pred.mean[i] - tensor.values()[i]).abs() / f.normalizer.sd[dims.coords(i).2])
        .collect();
    Ok(RoundFit {
        rmse: report.overall.rmse,
        mae: report.overall.mae,
        r: pearson(&stds, &errs),
        sd: f.normalizer.sd,
        pred,
    })
}

fn select(
    strategy: Strategy,
    rf: &RoundFit,
    tensor: &ScoreTensor,
    hidden: &Mask,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut order = match strategy {
        Strategy::Uncertainty => rank_by_uncertainty(&rf.pred, hidden),
        Strategy::Oracle => rank_by_error(&rf.pred, tensor, &rf.sd, hidden),
        Strategy::Random => {
            let mut cells: Vec<usize> = hidden.indices().collect();
            cells.shuffle(rng);
            cells
        }
    };
    order.truncate(k);
    order
}

type SeedRun = (Vec<RoundRecord>, Vec<(u64, Strategy, Mask)>);

fn run_seed(tensor: &ScoreTensor, cfg: &ActiveConfig, seed: u64) -> Result<SeedRun> {
    let pool = tensor.observed();
    let n_pool = pool.count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<usize> = pool.indices().collect();
    cells.shuffle(&mut rng);
    let n_init = ((cfg.init_fraction * n_pool as f64).round() as usize).clamp(1, n_pool - 1);
    let batch = ((cfg.batch_fraction * n_pool as f64).round() as usize).max(1);
    let budget = ((cfg.budget_fraction * n_pool as f64).round() as usize).clamp(n_init, n_pool);
    let init = Mask::from_indices(tensor.dims(), cells[..n_init].iter().copied());
    let fit_seed = |round: usize| seed.wrapping_mul(1000).wrapping_add(round as u64);

    // round 0 is shared by every strategy
    let hidden0 = pool.minus(&init);
    let first = fit_round(tensor, &init, &hidden0, &cfg.fit, fit_seed(0))?;

    let mut records = Vec::new();
    let mut finals = Vec::new();
    for (si, &strategy) in cfg.strategies.iter().enumerate() {
        let mut strat_rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + si as u64));
        let mut visible = init.clone();
        let mut round = 0;
        let mut current: Option<RoundFit> = None;
        loop {
            let hidden = pool.minus(&visible);
            let rf = current.as_ref().unwrap_or(&first);
            let mut rec = RoundRecord {
                strategy,
                seed,
                round,
                fraction: visible.count() as f64 / n_pool as f64,
                rmse: rf.rmse,
                mae: rf.mae,
                std_error_r: rf.r,
                revealed: Vec::new(),
            };
            let count = visible.count();
            if count >= budget || hidden.is_empty() {
                records.push(rec);
                break;
            }
            let take = batch.min(budget - count);
            let chosen = select(strategy, rf, tensor, &hidden, take, &mut strat_rng);
            for &c in &chosen {
                visible.set(c, true);
            }
            rec.revealed = chosen;
            records.push(rec);
            round += 1;
            let hidden = pool.minus(&visible);
            if hidden.is_empty() || evaluation_mask(tensor, &hidden).is_empty() {
                break;
            }
            current = Some(fit_round(tensor, &visible, &hidden, &cfg.fit, fit_seed(round))?);
        }
        finals.push((seed, strategy, visible));
    }
    Ok((records, finals))
}

/// Runs every strategy for every seed. Seeds run concurrently under
/// `Execution::Parallel`; results are identical in both modes.
pub fn run_active(tensor: &ScoreTensor, cfg: &ActiveConfig, exec: Execution) -> Result<ActiveResult> {
    let pool = tensor.observed().count();
    if pool < 2 {
        return Err(Error::arg(
            "scores",
            "active evaluation needs at least two observed cells",
        ));
    }
    cfg.validate(pool)?;
    let per_seed = par::try_map_range(exec, cfg.seeds.len(), |i| run_seed(tensor, cfg, cfg.seeds[i]))?;
    let mut records = Vec::new();
    let mut final_visible = Vec::new();
    for (r, f) in per_seed {
        records.extend(r);
        final_visible.extend(f);
    }
    let curve = average_curve(&records, &cfg.strategies);
    Ok(ActiveResult {
        curve,
        records,
        final_visible,
    })
}

/// Seed-average per (strategy, round) over the seeds that reached the round.
pub fn average_curve(records: &[RoundRecord], strategies: &[Strategy]) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for &strategy in strategies {
        let max_round = records.iter().filter(|r| r.strategy == strategy).map(|r| r.round).max();
        let Some(max_round) = max_round else { continue };
        for round in 0..=max_round {
            let rs: Vec<&RoundRecord> = records
                .iter()
                .filter(|r| r.strategy == strategy && r.round == round)
                .collect();
            if rs.is_empty() {
                continue;
            }
            let k = rs.len() as f64;
            out.push(CurvePoint {
                strategy,
                round,
                fraction: rs.iter().map(|r| r.fraction).sum::<f64>() / k,
                rmse: rs.iter().map(|r| r.rmse).sum::<f64>() / k,
                mae: rs.iter().map(|r| r.mae).sum::<f64>() / k,
            });
        }
    }
    out
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    write_csv(path, curve)
}

pub fn write_records_csv(path: &Path, records: &[RoundRecord]) -> Result<()> {
    write_csv(path, records)
}
