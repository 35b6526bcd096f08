//! One function per subcommand. Every output is a pure function of the flags,
//! the config file and the input files.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use scorefill::active::{run_active, write_curve_csv, write_records_csv, ActiveConfig, Strategy};
use scorefill::analysis::{
    dimension_sweep, informativeness, profile_effect, profile_score_effect, singular_spectrum, write_delta_csv,
    write_effect_csv, write_spectrum_csv,
};
use scorefill::fit::{fit, fit_per_metric, stack_metric_draws, Fit, FitConfig, PosteriorRecord};
use scorefill::io::{load_scores, read_json, write_csv, write_json, write_scores_csv, ScoreFormat};
use scorefill::model::{ModelSpec, NoiseModel, Variant};
use scorefill::predict::{
    evaluate, global_mean_baseline, mean_of_means_baseline, predict, summarize_draws, write_predictions_csv,
    Prediction, PredictionReport,
};
use scorefill::profiles::{oracle_profiles, ProfileSet};
use scorefill::sampler::ChainDiagnostics;
use scorefill::synth::{generate, Plant};
use scorefill::tensor::{split_mask, Mask, ScoreTensor};
use scorefill::Execution;
use serde::{Deserialize, Serialize};

use crate::config::{resolve_fit, resolve_test_ratio, FileConfig, ModelArgs, SamplerArgs};
use crate::error::{create_dir, CliError, CliResult};

pub struct Context {
    pub file: FileConfig,
    pub exec: Execution,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Score file: long CSV (model_id,dataset_id,metric_id,value) or .json
    #[arg(long)]
    pub scores: PathBuf,
    /// Validity CSV (dataset_id,metric_id,valid)
    #[arg(long)]
    pub validity: Option<PathBuf>,
    /// Collapse metrics into one: NAME=METRIC+METRIC (repeatable)
    #[arg(long = "merge")]
    pub merge: Vec<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProfileArgs {
    /// Profile directory (model_profile.csv or model_features.csv, plus
    /// dataset_profile.csv, dataset_features.csv or dataset_embeddings.csv)
    #[arg(long, conflicts_with = "oracle_profiles")]
    pub profiles: Option<PathBuf>,
    /// Build one-hot profiles by k-means on the complete first metric
    #[arg(long)]
    pub oracle_profiles: bool,
    /// Cluster count for dataset embeddings [default: elbow]
    #[arg(long)]
    pub cluster_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantKind {
    Profiles,
    RowBlocks,
    Outliers,
    FeatureEffect,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Generating variant
    #[arg(long, default_value = "pmf")]
    pub variant: Variant,
    #[arg(long, default_value_t = 40)]
    pub m: usize,
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    /// Latent dimension
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    /// Observation noise sd
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Planted structure
    #[arg(long)]
    pub plant: Option<PlantKind>,
    /// Group count for profiles and row blocks (datasets too for profiles)
    #[arg(long, default_value_t = 3)]
    pub groups: usize,
    /// Number of outlier models
    #[arg(long, default_value_t = 1)]
    pub outliers: usize,
    /// Latent scale factor of outlier models
    #[arg(long, default_value_t = 4.0)]
    pub outlier_scale: f64,
    /// Size of the planted profile effect
    #[arg(long, default_value_t = 0.5)]
    pub effect: f64,
    /// Model-profile column carrying the effect
    #[arg(long, default_value_t = 0)]
    pub effect_column: usize,
    /// First dataset of the affected block
    #[arg(long, default_value_t = 0)]
    pub effect_first: usize,
    /// Datasets in the affected block
    #[arg(long, default_value_t = 1)]
    pub effect_count: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Held-out fraction of observed cells, in [0, 1) [default: 0.2]
    #[arg(long)]
    pub test_ratio: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub profiles: ProfileArgs,
    /// PMF only: fit every metric separately
    #[arg(long)]
    pub per_metric: bool,
    /// Run directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Run directory written by `fit`
    #[arg(long)]
    pub run: PathBuf,
    /// Prediction CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Global,
    Means,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Held-out fraction of observed cells, in [0, 1) [default: 0.2]
    #[arg(long)]
    pub test_ratio: Option<f64>,
    /// Split seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-metric global mean, or the mean of row, column and global means
    #[arg(long)]
    pub which: Baseline,
    /// Prediction CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Optional metrics JSON
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ActiveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Selection strategies, comma separated [default: uncertainty,random,oracle]
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
    /// Initially visible fraction
    #[arg(long, default_value_t = 0.2)]
    pub init: f64,
    /// Fraction revealed per round
    #[arg(long, default_value_t = 0.05)]
    pub batch: f64,
    /// Visible fraction at which revealing stops
    #[arg(long, default_value_t = 0.5)]
    pub budget: f64,
    /// Number of seeds, starting at --seed
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Subcommand)]
pub enum AnalyzeCommand {
    /// Singular values of one complete metric matrix
    Spectrum(SpectrumArgs),
    /// Train/test RMSE over latent dimensions
    Sweep(SweepArgs),
    /// Posterior effect of one model-profile feature on every dataset
    Effect(EffectArgs),
    /// RMSE gain from revealing each model row and dataset column
    Informativeness(InformativenessArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Metric id [default: first metric]
    #[arg(long)]
    pub metric: Option<String>,
    /// Spectrum CSV (index,sigma)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Held-out fraction of observed cells [default: 0.2]
    #[arg(long)]
    pub test_ratio: Option<f64>,
    /// Latent dimensions, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
    pub dims: Vec<usize>,
    /// Sampler seeds per dimension, starting at --seed
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Sweep CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EffectArgs {
    /// Run directory of a constrained fit
    #[arg(long)]
    pub run: PathBuf,
    /// Model-profile feature name, e.g. group=0
    #[arg(long)]
    pub feature: String,
    /// Metric whose weight scales score_effect [default: first metric]
    #[arg(long)]
    pub metric: Option<String>,
    /// Effect CSV (dataset_id,effect,score_effect)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InformativenessArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Held-out fraction of observed cells [default: 0.2]
    #[arg(long)]
    pub test_ratio: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub profiles: ProfileArgs,
    /// Output directory (models.csv, datasets.csv)
    #[arg(long)]
    pub out: PathBuf,
}

/// Resolved settings of a fit, stored as `config.json` in the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scores: PathBuf,
    pub validity: Option<PathBuf>,
    pub merge: Vec<String>,
    pub test_ratio: f64,
    pub split_seed: u64,
    pub per_metric: bool,
    /// Profiles used by the fit are copied to `profiles/` in the run directory.
    pub profiles: bool,
    pub fit: FitConfig,
}

/// `samples.json`: one posterior per fit (one per metric with `per_metric`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSamples {
    pub per_metric: bool,
    pub fits: Vec<PosteriorRecord>,
}

#[derive(Debug, Clone, Serialize)]
struct FitDiagnostics {
    metric: Option<String>,
    draws: usize,
    divergences: usize,
    chains: Vec<ChainDiagnostics>,
}

#[derive(Debug, Clone, Serialize)]
struct MetricsFile {
    test_ratio: f64,
    train_cells: usize,
    test_cells: usize,
    train: PredictionReport,
    test: Option<PredictionReport>,
}

#[derive(Debug, Clone, Serialize)]
struct TruthFile<'a> {
    spec: &'a ModelSpec,
    noise_sd: f64,
    seed: u64,
    plant: Option<&'a Plant>,
    state: &'a scorefill::model::LatentState,
    model_groups: Option<&'a [usize]>,
}

fn parse_merge(groups: &[String]) -> CliResult<Vec<(String, Vec<String>)>> {
    groups
        .iter()
        .map(|g| {
            let (name, members) = g
                .split_once('=')
                .ok_or_else(|| CliError::flag("--merge", format!("expected NAME=METRIC+METRIC, got {g}")))?;
            let members: Vec<String> = members.split('+').map(|m| m.trim().to_string()).collect();
            if name.trim().is_empty() || members.iter().any(String::is_empty) {
                return Err(CliError::flag("--merge", format!("empty name or metric in {g}")));
            }
            Ok((name.trim().to_string(), members))
        })
        .collect()
}

fn load_tensor(scores: &Path, validity: Option<&Path>, merge: &[String]) -> CliResult<ScoreTensor> {
    let tensor = load_scores(scores, ScoreFormat::from_path(scores), validity)?;
    if merge.is_empty() {
        return Ok(tensor);
    }
    Ok(tensor.merge_metrics(&parse_merge(merge)?)?)
}

fn data_tensor(data: &DataArgs, file: &FileConfig) -> CliResult<ScoreTensor> {
    let validity = data.validity.as_ref().or(file.validity.as_ref());
    load_tensor(&data.scores, validity.map(PathBuf::as_path), &data.merge)
}

/// `(train, test)`; a zero ratio trains on every observed cell.
fn split(tensor: &ScoreTensor, ratio: f64, seed: u64) -> CliResult<(Mask, Mask)> {
    if ratio == 0.0 {
        return Ok((tensor.observed().clone(), Mask::empty(tensor.dims())));
    }
    let s = split_mask(tensor, ratio, seed)?;
    Ok((s.train, s.test))
}

fn resolve_profiles(
    args: &ProfileArgs,
    file: &FileConfig,
    tensor: &ScoreTensor,
    variant: Variant,
    seed: u64,
) -> CliResult<Option<ProfileSet>> {
    if !variant.is_constrained() {
        return Ok(None);
    }
    if args.oracle_profiles {
        return Ok(Some(oracle_profiles(&tensor.metric_matrix(0)?, seed)?));
    }
    let dir = args
        .profiles
        .as_ref()
        .or(file.profiles.as_ref())
        .ok_or(CliError::Missing("--profiles or --oracle-profiles"))?;
    let k = args.cluster_k.or(file.cluster_k);
    Ok(Some(ProfileSet::load_dir(
        dir,
        tensor.model_ids(),
        tensor.dataset_ids(),
        k,
        seed,
    )?))
}

fn metric_index(tensor: &ScoreTensor, id: Option<&str>) -> CliResult<usize> {
    match id {
        None => Ok(0),
        Some(id) => tensor
            .metric_index(id)
            .ok_or_else(|| CliError::flag("--metric", format!("unknown metric {id}"))),
    }
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let spec = ModelSpec::new(args.variant, args.d).with_noise(NoiseModel::Learned);
    let plant = args.plant.map(|kind| match kind {
        PlantKind::Profiles => Plant::Profiles {
            model_groups: args.groups,
            dataset_groups: args.groups,
        },
        PlantKind::RowBlocks => Plant::RowBlocks { groups: args.groups },
        PlantKind::Outliers => Plant::Outliers {
            count: args.outliers,
            scale: args.outlier_scale,
        },
        PlantKind::FeatureEffect => Plant::FeatureEffect {
            column: args.effect_column,
            first: args.effect_first,
            count: args.effect_count,
            effect: args.effect,
        },
    });
    let syn = generate(&spec, args.m, args.n, args.s, args.noise, args.seed, plant.as_ref())?;
    create_dir(&args.out)?;
    write_scores_csv(&args.out.join("scores.csv"), &syn.tensor)?;
    let t = &syn.tensor;
    let means = ScoreTensor::complete(
        t.model_ids().to_vec(),
        t.dataset_ids().to_vec(),
        t.metric_ids().to_vec(),
        syn.means.clone(),
    )?;
    write_scores_csv(&args.out.join("means.csv"), &means)?;
    write_json(
        &args.out.join("truth.json"),
        &TruthFile {
            spec: &spec,
            noise_sd: args.noise,
            seed: args.seed,
            plant: plant.as_ref(),
            state: &syn.state,
            model_groups: syn.model_groups.as_deref(),
        },
    )?;
    if let Some(p) = &syn.profiles {
        let dir = args.out.join("profiles");
        create_dir(&dir)?;
        p.write_dir(&dir, t.model_ids(), t.dataset_ids())?;
    }
    println!("wrote {} cells to {}", t.observed().count(), args.out.display());
    Ok(())
}

/// Posterior predictive summary of a stored run.
fn run_prediction(
    cfg: &RunConfig,
    samples: &RunSamples,
    tensor: &ScoreTensor,
    train: &Mask,
    profiles: Option<&ProfileSet>,
) -> CliResult<Prediction> {
    if samples.per_metric {
        let fits = samples
            .fits
            .iter()
            .enumerate()
            .map(|(s, rec)| Fit::from_record(rec, &tensor.metric_slice(s), &train.metric_slice(s), None))
            .collect::<Result<Vec<_>, _>>()?;
        let (draws, normalizer) = stack_metric_draws(&fits)?;
        return Ok(summarize_draws(&draws, &normalizer, tensor.dims())?);
    }
    let record = samples
        .fits
        .first()
        .ok_or_else(|| CliError::flag("--run", "samples.json holds no posterior"))?;
    debug_assert_eq!(record.spec, cfg.fit.spec);
    Ok(predict(&Fit::from_record(record, tensor, train, profiles)?)?)
}

struct LoadedRun {
    cfg: RunConfig,
    samples: RunSamples,
    tensor: ScoreTensor,
    train: Mask,
    test: Mask,
    profiles: Option<ProfileSet>,
}

fn load_run(dir: &Path) -> CliResult<LoadedRun> {
    let cfg: RunConfig = read_json(&dir.join("config.json"))?;
    let samples: RunSamples = read_json(&dir.join("samples.json"))?;
    let tensor = load_tensor(&cfg.scores, cfg.validity.as_deref(), &cfg.merge)?;
    let (train, test) = split(&tensor, cfg.test_ratio, cfg.split_seed)?;
    let profiles = if cfg.profiles {
        Some(ProfileSet::load_dir(
            &dir.join("profiles"),
            tensor.model_ids(),
            tensor.dataset_ids(),
            None,
            cfg.split_seed,
        )?)
    } else {
        None
    };
    Ok(LoadedRun {
        cfg,
        samples,
        tensor,
        train,
        test,
        profiles,
    })
}

pub fn fit_cmd(args: &FitArgs, ctx: &Context) -> CliResult<()> {
    let file = &ctx.file;
    let tensor = data_tensor(&args.data, file)?;
    let test_ratio = resolve_test_ratio(args.test_ratio, file, 0.2)?;
    let fit_cfg = resolve_fit(&args.model, &args.sampler, file)?;
    let seed = fit_cfg.sampler.seed;
    if args.per_metric && fit_cfg.spec.variant != Variant::Pmf {
        return Err(CliError::flag(
            "--per-metric",
            "only the pmf variant fits metrics separately",
        ));
    }
    let (train, test) = split(&tensor, test_ratio, seed)?;
    let profiles = resolve_profiles(&args.profiles, file, &tensor, fit_cfg.spec.variant, seed)?;

    let fits = if args.per_metric {
        fit_per_metric(&tensor, &train, &fit_cfg, ctx.exec)?
    } else {
        vec![fit(&tensor, &train, &fit_cfg, profiles.as_ref(), ctx.exec)?]
    };
    let samples = RunSamples {
        per_metric: args.per_metric,
        fits: fits.iter().map(Fit::record).collect::<Result<_, _>>()?,
    };
    let run_cfg = RunConfig {
        scores: args.data.scores.clone(),
        validity: args.data.validity.clone().or_else(|| file.validity.clone()),
        merge: args.data.merge.clone(),
        test_ratio,
        split_seed: seed,
        per_metric: args.per_metric,
        profiles: profiles.is_some(),
        fit: fit_cfg,
    };

    let out = &args.out;
    create_dir(out)?;
    if let Some(p) = &profiles {
        let dir = out.join("profiles");
        create_dir(&dir)?;
        p.write_dir(&dir, tensor.model_ids(), tensor.dataset_ids())?;
    }
    write_json(&out.join("config.json"), &run_cfg)?;
    write_json(&out.join("samples.json"), &samples)?;

    let pred = run_prediction(&run_cfg, &samples, &tensor, &train, profiles.as_ref())?;
    write_predictions_csv(
        &out.join("predictions.csv"),
        &tensor,
        &pred.mean,
        &pred.std,
        &train,
        &test,
    )?;
    let test_report = if test.is_empty() {
        None
    } else {
        Some(evaluate(&tensor, &pred.mean, &test)?)
    };
    let metrics = MetricsFile {
        test_ratio,
        train_cells: train.count(),
        test_cells: test.count(),
        train: evaluate(&tensor, &pred.mean, &train)?,
        test: test_report.clone(),
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    let diagnostics: Vec<FitDiagnostics> = fits
        .iter()
        .enumerate()
        .map(|(s, f)| FitDiagnostics {
            metric: args.per_metric.then(|| tensor.metric_ids()[s].clone()),
            draws: f.samples.len(),
            divergences: f.samples.divergences(),
            chains: f.samples.chains.clone(),
        })
        .collect();
    write_json(&out.join("diagnostics.json"), &diagnostics)?;

    match test_report {
        Some(r) => println!(
            "test rmse {:.6} mae {:.6} over {} cells",
            r.overall.rmse, r.overall.mae, r.overall.count
        ),
        None => println!("fitted on all {} observed cells", train.count()),
    }
    Ok(())
}

pub fn predict_cmd(args: &PredictArgs) -> CliResult<()> {
    let run = load_run(&args.run)?;
    let pred = run_prediction(&run.cfg, &run.samples, &run.tensor, &run.train, run.profiles.as_ref())?;
    write_predictions_csv(&args.out, &run.tensor, &pred.mean, &pred.std, &run.train, &run.test)?;
    Ok(())
}

pub fn baseline(args: &BaselineArgs, ctx: &Context) -> CliResult<()> {
    let tensor = data_tensor(&args.data, &ctx.file)?;
    let ratio = resolve_test_ratio(args.test_ratio, &ctx.file, 0.2)?;
    let seed = args.seed.or(ctx.file.seed).unwrap_or(0);
    let (train, test) = split(&tensor, ratio, seed)?;
    let mean = match args.which {
        Baseline::Global => global_mean_baseline(&tensor, &train)?,
        Baseline::Means => mean_of_means_baseline(&tensor, &train)?,
    };
    let std = vec![0.0; mean.len()];
    write_predictions_csv(&args.out, &tensor, &mean, &std, &train, &test)?;
    if let Some(path) = &args.metrics {
        let report = (!test.is_empty())
            .then(|| evaluate(&tensor, &mean, &test))
            .transpose()?;
        write_json(path, &report)?;
    }
    Ok(())
}

pub fn active(args: &ActiveArgs, ctx: &Context) -> CliResult<()> {
    let tensor = data_tensor(&args.data, &ctx.file)?;
    let fit_cfg = resolve_fit(&args.model, &args.sampler, &ctx.file)?;
    let first = fit_cfg.sampler.seed;
    let strategies = if args.strategy.is_empty() {
        vec![Strategy::Uncertainty, Strategy::Random, Strategy::Oracle]
    } else {
        args.strategy.clone()
    };
    if args.seeds == 0 {
        return Err(CliError::flag("--seeds", "at least one seed is required"));
    }
    let cfg = ActiveConfig {
        strategies,
        init_fraction: args.init,
        batch_fraction: args.batch,
        budget_fraction: args.budget,
        seeds: (first..first + args.seeds).collect(),
        fit: fit_cfg,
    };
    let result = run_active(&tensor, &cfg, ctx.exec)?;
    create_dir(&args.out)?;
    write_json(&args.out.join("config.json"), &cfg)?;
    write_curve_csv(&args.out.join("curve.csv"), &result.curve)?;
    write_records_csv(&args.out.join("records.csv"), &result.records)?;
    for p in &result.curve {
        println!(
            "{} round {} fraction {:.3} rmse {:.6}",
            p.strategy.name(),
            p.round,
            p.fraction,
            p.rmse
        );
    }
    Ok(())
}

pub fn analyze(cmd: &AnalyzeCommand, ctx: &Context) -> CliResult<()> {
    match cmd {
        AnalyzeCommand::Spectrum(a) => {
            let tensor = data_tensor(&a.data, &ctx.file)?;
            let s = metric_index(&tensor, a.metric.as_deref())?;
            let sigma = singular_spectrum(&tensor.metric_matrix(s)?)?;
            write_spectrum_csv(&a.out, &sigma)?;
        }
        AnalyzeCommand::Sweep(a) => {
            let tensor = data_tensor(&a.data, &ctx.file)?;
            let ratio = resolve_test_ratio(a.test_ratio, &ctx.file, 0.2)?;
            let base = resolve_fit(&a.model, &a.sampler, &ctx.file)?;
            let first = base.sampler.seed;
            let (train, test) = split(&tensor, ratio, first)?;
            if test.is_empty() {
                return Err(CliError::flag("--test-ratio", "the sweep needs held-out cells"));
            }
            let seeds: Vec<u64> = (first..first + a.seeds.max(1)).collect();
            let rows = dimension_sweep(&tensor, &train, &test, &a.dims, &base, &seeds, ctx.exec)?;
            write_csv(&a.out, &rows)?;
        }
        AnalyzeCommand::Effect(a) => {
            let run = load_run(&a.run)?;
            if run.samples.per_metric {
                return Err(CliError::flag("--run", "profile effects need a single constrained fit"));
            }
            let profiles = run
                .profiles
                .as_ref()
                .ok_or_else(|| CliError::flag("--run", "the run has no profiles"))?;
            let f = Fit::from_record(&run.samples.fits[0], &run.tensor, &run.train, Some(profiles))?;
            let s = metric_index(&run.tensor, a.metric.as_deref())?;
            let effect = profile_effect(&f, profiles, &a.feature)?;
            let scored = profile_score_effect(&f, profiles, &a.feature, s)?;
            write_effect_csv(&a.out, run.tensor.dataset_ids(), &effect, &scored)?;
        }
        AnalyzeCommand::Informativeness(a) => {
            let tensor = data_tensor(&a.data, &ctx.file)?;
            let ratio = resolve_test_ratio(a.test_ratio, &ctx.file, 0.2)?;
            let cfg = resolve_fit(&a.model, &a.sampler, &ctx.file)?;
            let seed = cfg.sampler.seed;
            let (train, _) = split(&tensor, ratio, seed)?;
            let profiles = resolve_profiles(&a.profiles, &ctx.file, &tensor, cfg.spec.variant, seed)?;
            let info = informativeness(&tensor, &train, &cfg, profiles.as_ref(), ctx.exec)?;
            create_dir(&a.out)?;
            write_delta_csv(&a.out.join("models.csv"), &info.models)?;
            write_delta_csv(&a.out.join("datasets.csv"), &info.datasets)?;
        }
    }
    Ok(())
}
