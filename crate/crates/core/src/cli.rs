//! Command-line front end. Every subcommand writes a `<output>.meta.json`
//! record holding its full argument list, so `rerun` can reproduce it.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::eodds::{prepare_bin_probs, train_eodds, EoddsConstraintSpec, EoddsOptions, InputTransform, DEFAULT_BINS};
use crate::eopp::{train_eopp, EoppOptions, Rescale};
use crate::error::{Error, Result};
use crate::eval::{evaluate_log, riemann_auc, tradeoff_sweep};
use crate::figures::{reproduce_figures, FigureConfig};
use crate::io::{has_column, read_column, read_log, read_text, read_truth, write_json, write_log, write_log_with_column, write_table, write_text, write_truth};
use crate::partition::ScorePartition;
use crate::position_bias::{
    estimate_weights_observational, estimate_weights_randomized, Binning, ObservationalSettings, PositionWeights,
    DEFAULT_DENSITY_BINS, DEFAULT_RATIO_CAP, DEFAULT_SMOOTHING, DEFAULT_TRUNCATION,
};
use crate::records::{validate_dataset, Schema};
use crate::reranker::FairModel;
use crate::rng::RNG_ID;
use crate::simulate::{generate_population, generate_queries, rerank_by_scores, SimConfig, SimLog, Truth};

pub const META_FORMAT: &str = "fairrank.meta/1";
pub const THREADS_ENV: &str = "FAIRRANK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fairrank", version, about = "Fair reranking of recommender scores under position bias")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Generate a synthetic impression log and its ground truth.
    Simulate(SimulateArgs),
    /// Estimate position-bias decay factors from a log.
    EstimateBias(EstimateBiasArgs),
    /// Train the equality-of-opportunity reranker.
    TrainEopp(TrainEoppArgs),
    /// Train the equalized-odds reranker.
    TrainEodds(TrainEoddsArgs),
    /// Append a fair_score column to a log using a trained model.
    Score(ScoreArgs),
    /// Fairness and click-through metrics of a (scored) log.
    Evaluate(EvaluateArgs),
    /// Fairness/performance tradeoff over blend weights.
    Sweep(SweepArgs),
    /// Run the full simulated pipeline and write plot-ready tables.
    ReproduceFigures(FiguresArgs),
    /// Re-execute the command recorded in a metadata file.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100_000)]
    queries: usize,
    #[arg(long, default_value_t = 50)]
    slots: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 50_000)]
    population: usize,
    /// Independent query stream (e.g. 0 for training, 1 for validation).
    #[arg(long, default_value_t = 0)]
    split: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum BiasMode {
    Randomized,
    Observational,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum BinningArg {
    EqualMass,
    EqualWidth,
}

#[derive(Debug, Clone, Args, Serialize)]
struct EstimateBiasArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = BiasMode::Observational)]
    mode: BiasMode,
    /// Truncation threshold.
    #[arg(long = "T", default_value_t = DEFAULT_TRUNCATION)]
    truncation: u32,
    /// Histogram bins per density.
    #[arg(long, default_value_t = DEFAULT_DENSITY_BINS)]
    bins: usize,
    #[arg(long, value_enum, default_value_t = BinningArg::EqualMass)]
    binning: BinningArg,
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    smoothing: f64,
    #[arg(long, default_value_t = DEFAULT_RATIO_CAP)]
    ratio_cap: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RescaleArg {
    Auto,
    Always,
    Never,
}

impl From<RescaleArg> for Rescale {
    fn from(r: RescaleArg) -> Self {
        match r {
            RescaleArg::Auto => Rescale::Auto,
            RescaleArg::Always => Rescale::Always,
            RescaleArg::Never => Rescale::Never,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct TrainEoppArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = RescaleArg::Auto)]
    rescale: RescaleArg,
    /// Store CDFs at this cumulative-mass resolution.
    #[arg(long)]
    discretize: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Strict,
    Multi,
    Diff,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TrainEoddsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
    mode: ModeArg,
    /// Highest label value in multi-outcome mode.
    #[arg(long, default_value_t = 1)]
    outcomes: u32,
    /// Negative-label tolerance in diff mode; `inf` leaves it free.
    #[arg(long, default_value_t = 0.0)]
    eps0: f64,
    /// Positive-label tolerance in diff mode; `inf` leaves it free.
    #[arg(long, default_value_t = 0.0)]
    eps1: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = RescaleArg::Auto)]
    rescale: RescaleArg,
    /// Seed of the per-record scoring draws.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Scores already lie in [0, 1) and skip the logistic map.
    #[arg(long)]
    unit_scores: bool,
    /// Also write the linear program as a plain-text listing.
    #[arg(long)]
    lp_listing: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Column to evaluate; defaults to fair_score when present, else score.
    #[arg(long)]
    score_column: Option<String>,
    /// Re-rank each query by the score column and redraw labels from truth.
    #[arg(long)]
    rerank: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    round: u64,
    /// Intervals of the Riemann AUC.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    auc_bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RerankerArg {
    Eopp,
    Eodds,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_enum)]
    reranker: RerankerArg,
    /// `start:end:step` or a comma-separated list.
    #[arg(long, default_value = "0:1:0.1")]
    alphas: String,
    /// Trained model; otherwise one is trained from --input and --weights.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    validation: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FiguresArgs {
    #[arg(long)]
    outdir: PathBuf,
    /// 100k training and 50k validation queries instead of 20k and 10k.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    train_queries: Option<usize>,
    #[arg(long)]
    validation_queries: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct RerunArgs {
    #[arg(long)]
    metadata: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub format: String,
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub report: serde_json::Value,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit status: 0 on success, 1 on a pipeline error
/// (reported as JSON on stderr), 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return 2;
    }
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(&cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            let report = ErrorReport {
                error: e.name(),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.name().to_string()));
            1
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    // A pool that already exists (e.g. repeated in-process runs) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn meta_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_metadata<C: Serialize>(
    path: &Path,
    argv: &[String],
    config: &C,
    outputs: Vec<PathBuf>,
    report: serde_json::Value,
) -> Result<()> {
    let meta = Metadata {
        format: META_FORMAT.into(),
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        rng: RNG_ID.into(),
        argv: argv.to_vec(),
        config: serde_json::to_value(config)?,
        outputs,
        report,
    };
    write_json(path, &meta)
}

fn read_weights(path: &Path) -> Result<PositionWeights<f64>> {
    let w: PositionWeights<f64> =
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    w.check()?;
    Ok(w)
}

fn dispatch(command: &Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a, argv),
        Command::EstimateBias(a) => estimate_bias(a, argv),
        Command::TrainEopp(a) => train_eopp_cmd(a, argv),
        Command::TrainEodds(a) => train_eodds_cmd(a, argv),
        Command::Score(a) => score(a, argv),
        Command::Evaluate(a) => evaluate(a, argv),
        Command::Sweep(a) => sweep(a, argv),
        Command::ReproduceFigures(a) => figures(a, argv),
        Command::Rerun(a) => rerun(a),
    }
}

fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<()> {
    let config = SimConfig {
        population_size: a.population,
        slots: a.slots,
        n_queries: a.queries,
        seed: a.seed,
        split: a.split,
        ..SimConfig::default()
    };
    let population = generate_population::<f64>(&config)?;
    let log = generate_queries(&population, &config)?;
    write_log(&a.out, &log.records)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(truth) = &a.truth {
        write_truth(truth, &log.truth)?;
        outputs.push(truth.clone());
    }
    write_metadata(&meta_path(&a.out), argv, a, outputs, serde_json::Value::Null)
}

fn estimate_bias(a: &EstimateBiasArgs, argv: &[String]) -> Result<()> {
    let records = read_log::<f64>(&a.input)?;
    let max_label = records.iter().map(|r| r.label).max().unwrap_or(1).max(1);
    let data = validate_dataset(records, &Schema { max_label, groups: None })?;
    let weights = match a.mode {
        BiasMode::Randomized => estimate_weights_randomized(&data)?,
        BiasMode::Observational => {
            let settings = ObservationalSettings {
                bins: a.bins,
                smoothing_epsilon: a.smoothing,
                ratio_cap: a.ratio_cap,
                binning: match a.binning {
                    BinningArg::EqualMass => Binning::EqualMass,
                    BinningArg::EqualWidth => Binning::EqualWidth,
                },
            };
            estimate_weights_observational(&data, a.truncation, &settings)?
        }
    };
    write_json(&a.out, &weights)?;
    write_metadata(&meta_path(&a.out), argv, a, vec![a.out.clone()], serde_json::Value::Null)
}

fn train_eopp_cmd(a: &TrainEoppArgs, argv: &[String]) -> Result<()> {
    let records = read_log::<f64>(&a.input)?;
    let max_label = records.iter().map(|r| r.label).max().unwrap_or(1).max(1);
    let data = validate_dataset(records, &Schema { max_label, groups: None })?;
    let weights = read_weights(&a.weights)?;
    let options = EoppOptions {
        alpha: a.alpha,
        rescale: a.rescale.into(),
        discretize: a.discretize,
    };
    let model = train_eopp(&data, &weights, &options)?;
    write_text(&a.out, &(model.to_json()? + "\n"))?;
    write_metadata(&meta_path(&a.out), argv, a, vec![a.out.clone()], serde_json::Value::Null)
}

fn constraint_spec(a: &TrainEoddsArgs) -> EoddsConstraintSpec {
    match a.mode {
        ModeArg::Strict => EoddsConstraintSpec::strict(),
        ModeArg::Multi => EoddsConstraintSpec::multi_outcome(a.outcomes),
        ModeArg::Diff => EoddsConstraintSpec::differential(a.eps0, a.eps1),
    }
}

fn train_eodds_cmd(a: &TrainEoddsArgs, argv: &[String]) -> Result<()> {
    let spec = constraint_spec(a);
    let max_label = spec.label_count() as u32 - 1;
    let data = validate_dataset(read_log::<f64>(&a.input)?, &Schema { max_label, groups: None })?;
    let weights = read_weights(&a.weights)?;
    let partition = ScorePartition::equal_width(a.bins)?;
    let options = EoddsOptions {
        alpha: a.alpha,
        rescale: a.rescale.into(),
        input_transform: if a.unit_scores { InputTransform::Identity } else { InputTransform::InverseLogit },
        seed: a.seed,
        ..EoddsOptions::default()
    };
    let mut outputs = vec![a.out.clone()];
    if let Some(listing) = &a.lp_listing {
        let (probs, _) = prepare_bin_probs(&data, &weights, &partition, options.input_transform)?;
        let lp = crate::eodds::build_lp(&probs, &partition, &spec)?;
        let mut buf = Vec::new();
        lp.write_listing(&mut buf)?;
        write_text(listing, &String::from_utf8_lossy(&buf))?;
        outputs.push(listing.clone());
    }
    let (model, report) = train_eodds(&data, &weights, &partition, &spec, &options)?;
    write_text(&a.out, &(model.to_json()? + "\n"))?;
    write_metadata(&meta_path(&a.out), argv, a, outputs, serde_json::to_value(&report)?)
}

fn read_model(path: &Path) -> Result<FairModel<f64>> {
    FairModel::from_json(&read_text(path)?)
}

fn score(a: &ScoreArgs, argv: &[String]) -> Result<()> {
    let model = read_model(&a.model)?;
    let records = read_log::<f64>(&a.input)?;
    let scores = records
        .iter()
        .map(|r| model.score_record(r))
        .collect::<Result<Vec<f64>>>()?;
    write_log_with_column(&a.out, &records, "fair_score", &scores)?;
    write_metadata(&meta_path(&a.out), argv, a, vec![a.out.clone()], serde_json::Value::Null)
}

#[derive(Serialize)]
struct EvaluateOutput {
    score_column: String,
    reranked: bool,
    #[serde(flatten)]
    report: crate::eval::EvalReport,
}

fn evaluate(a: &EvaluateArgs, argv: &[String]) -> Result<()> {
    let mut records = read_log::<f64>(&a.input)?;
    let column = match &a.score_column {
        Some(c) => c.clone(),
        None if has_column(&a.input, "fair_score")? => "fair_score".into(),
        None => "score".into(),
    };
    if column != "score" {
        let values = read_column::<f64>(&a.input, &column)?;
        for (r, v) in records.iter_mut().zip(values) {
            r.score = v;
        }
    }
    let truth: Truth<f64> = match &a.truth {
        Some(p) => read_truth(p)?,
        None => Truth::new(),
    };
    let mut log = SimLog { records, truth };
    if a.rerank {
        if log.truth.is_empty() {
            return Err(Error::InvalidParameter("--rerank needs --truth".into()));
        }
        let scores: Vec<f64> = log.records.iter().map(|r| r.score).collect();
        let config = SimConfig {
            seed: a.seed,
            ..SimConfig::default()
        };
        log = rerank_by_scores(&log, &scores, &config, a.round)?;
    }
    let mut report = evaluate_log(&log)?;
    let data = validate_dataset(log.records.clone(), &Schema::binary())?;
    let unit = data.records().iter().all(|r| r.score >= 0.0 && r.score < 1.0);
    let transform = if unit { InputTransform::Identity } else { InputTransform::InverseLogit };
    let partition = ScorePartition::equal_width(a.auc_bins)?;
    let weights = PositionWeights::uniform(data.max_position() as usize);
    let (probs, _) = prepare_bin_probs(&data, &weights, &partition, transform)?;
    report.auc_riemann = Some(riemann_auc(&probs, &probs.group_priors)?);
    let out = EvaluateOutput {
        score_column: column,
        reranked: a.rerank,
        report,
    };
    write_json(&a.out, &out)?;
    write_metadata(&meta_path(&a.out), argv, a, vec![a.out.clone()], serde_json::Value::Null)
}

/// Parses `start:end:step` or `a,b,c`.
fn parse_alphas(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("cannot parse alpha grid {spec:?}"));
    let alphas: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, end, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| if i == n && (start + n as f64 * step - end).abs() < 1e-9 { end } else { start + i as f64 * step }).collect()
    } else {
        spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if alphas.is_empty() || alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidParameter(format!("alphas must lie in [0, 1]: {spec:?}")));
    }
    Ok(alphas)
}

fn sweep(a: &SweepArgs, argv: &[String]) -> Result<()> {
    let alphas = parse_alphas(&a.alphas)?;
    let model = match (&a.model, &a.input, &a.weights) {
        (Some(path), _, _) => read_model(path)?,
        (None, Some(input), Some(weights)) => {
            let data = validate_dataset(read_log::<f64>(input)?, &Schema::binary())?;
            let weights = read_weights(weights)?;
            match a.reranker {
                RerankerArg::Eopp => FairModel::Eopp(train_eopp(&data, &weights, &EoppOptions::default())?),
                RerankerArg::Eodds => {
                    let partition = ScorePartition::equal_width(a.bins)?;
                    let options = EoddsOptions {
                        seed: a.seed,
                        ..EoddsOptions::default()
                    };
                    let spec = EoddsConstraintSpec::strict();
                    FairModel::Eodds(train_eodds(&data, &weights, &partition, &spec, &options)?.0)
                }
            }
        }
        _ => return Err(Error::InvalidParameter("sweep needs --model or both --input and --weights".into())),
    };
    let validation = SimLog {
        records: read_log::<f64>(&a.validation)?,
        truth: read_truth(&a.truth)?,
    };
    let config = SimConfig {
        seed: a.seed,
        ..SimConfig::default()
    };
    let rows = tradeoff_sweep(&model, &validation, &config, &alphas)?;
    write_table(
        &a.out,
        &["alpha", "ks_pos", "ks_neg", "ctr"],
        rows.iter().map(|r| [r.alpha.to_string(), r.ks_pos.to_string(), r.ks_neg.to_string(), r.ctr.to_string()]),
    )?;
    write_metadata(&meta_path(&a.out), argv, a, vec![a.out.clone()], serde_json::Value::Null)
}

fn figures(a: &FiguresArgs, argv: &[String]) -> Result<()> {
    let mut config = if a.full_scale { FigureConfig::full_scale(a.seed) } else { FigureConfig::desk(a.seed) };
    if let Some(n) = a.train_queries {
        config.train_queries = n;
    }
    if let Some(n) = a.validation_queries {
        config.validation_queries = n;
    }
    reproduce_figures(&a.outdir, &config)?;
    let outputs = ["fig1_bias.csv", "fig2_distributions.csv", "fig3_tradeoff.csv", "summary.json"]
        .iter()
        .map(|f| a.outdir.join(f))
        .collect();
    write_metadata(&a.outdir.join("metadata.json"), argv, &config, outputs, serde_json::Value::Null)
}

fn rerun(a: &RerunArgs) -> Result<()> {
    let meta: Metadata =
        serde_json::from_str(&read_text(&a.metadata)?).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    if meta.format != META_FORMAT {
        return Err(Error::SchemaMismatch(format!("expected format {META_FORMAT}, found {}", meta.format)));
    }
    let cli = Cli::try_parse_from(&meta.argv).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(Error::InvalidParameter("metadata records another rerun".into()));
    }
    dispatch(&cli.command, &meta.argv)
}
