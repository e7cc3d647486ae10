//! End-to-end pipeline on simulated data producing plot-ready tables:
//! position-bias recovery, conditional score distributions before and after
//! each reranker, and fairness/performance tradeoff curves.

use std::path::Path;

use serde::Serialize;

use crate::eodds::{train_eodds, EoddsConstraintSpec, EoddsOptions, TrainingReport, DEFAULT_BINS};
use crate::eopp::{train_eopp, EoppOptions};
use crate::error::Result;
use crate::eval::{exposure_parity, max_relative_deviation, tradeoff_sweep, unfairness_report, TradeoffRow};
use crate::io::{write_json, write_table};
use crate::partition::ScorePartition;
use crate::position_bias::{estimate_weights_observational, ObservationalSettings, PositionWeights, DEFAULT_TRUNCATION};
use crate::reranker::FairModel;
use crate::simulate::{
    generate_population, generate_queries, rerank_and_relabel, rerank_by_scores, true_position_bias, SimConfig, SimLog,
};

pub const DESK_TRAIN_QUERIES: usize = 20_000;
pub const DESK_VALIDATION_QUERIES: usize = 10_000;
pub const FULL_TRAIN_QUERIES: usize = 100_000;
pub const FULL_VALIDATION_QUERIES: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureConfig {
    pub train_queries: usize,
    pub validation_queries: usize,
    pub seed: u64,
    pub bins: usize,
    pub truncation: u32,
    pub density_bins: usize,
    pub alphas: Vec<f64>,
}

impl FigureConfig {
    pub fn desk(seed: u64) -> Self {
        FigureConfig {
            train_queries: DESK_TRAIN_QUERIES,
            validation_queries: DESK_VALIDATION_QUERIES,
            seed,
            bins: DEFAULT_BINS,
            truncation: DEFAULT_TRUNCATION,
            density_bins: ObservationalSettings::default().bins,
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }

    pub fn full_scale(seed: u64) -> Self {
        FigureConfig {
            train_queries: FULL_TRAIN_QUERIES,
            validation_queries: FULL_VALIDATION_QUERIES,
            ..Self::desk(seed)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub ks_neg: f64,
    pub ks_pos: f64,
    pub exposure_max_relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureSummary {
    pub config: FigureConfig,
    pub weight_max_abs_error: f64,
    pub weight_mean_abs_error: f64,
    pub stages: Vec<StageSummary>,
    pub eodds_training: TrainingReport,
    pub tradeoff: Vec<(String, TradeoffRow)>,
}

/// Runs the pipeline and writes `fig1_bias.csv`, `fig2_distributions.csv`,
/// `fig3_tradeoff.csv` and `summary.json` into `outdir`.
pub fn reproduce_figures(outdir: &Path, config: &FigureConfig) -> Result<FigureSummary> {
    std::fs::create_dir_all(outdir)?;
    let sim = SimConfig {
        n_queries: config.train_queries,
        seed: config.seed,
        ..SimConfig::default()
    };
    let population = generate_population::<f64>(&sim)?;
    let train = generate_queries(&population, &sim)?;
    let val_cfg = sim.with_split(1, config.validation_queries);
    let validation = generate_queries(&population, &val_cfg)?;
    let data = train.dataset()?;

    let settings = ObservationalSettings {
        bins: config.density_bins,
        ..ObservationalSettings::default()
    };
    let weights = estimate_weights_observational(&data, config.truncation, &settings)?;
    let fig1 = fig1_rows(&weights, sim.slots as u32)?;
    let errors: Vec<f64> = fig1
        .iter()
        .filter(|r| r.0 <= config.truncation)
        .map(|r| (r.1 - r.2).abs())
        .collect();
    write_table(
        &outdir.join("fig1_bias.csv"),
        &["j", "w_true", "w_hat"],
        fig1.iter().map(|(j, t, h)| [j.to_string(), t.to_string(), h.to_string()]),
    )?;

    let eopp = FairModel::Eopp(train_eopp(&data, &weights, &EoppOptions::default())?);
    let partition = ScorePartition::equal_width(config.bins)?;
    let options = EoddsOptions {
        seed: config.seed,
        ..EoddsOptions::default()
    };
    let (eodds, report) = train_eodds(&data, &weights, &partition, &EoddsConstraintSpec::strict(), &options)?;
    let eodds = FairModel::Eodds(eodds);

    let mut fig2: Vec<[String; 4]> = Vec::new();
    let mut stages = Vec::new();
    let raw: Vec<f64> = validation.records.iter().map(|r| r.score).collect();
    let stage_logs: Vec<(&str, SimLog<f64>)> = vec![
        ("original", rerank_by_scores(&validation, &raw, &val_cfg, 0)?),
        ("eopp", rerank_and_relabel(&validation, |r| eopp.score_record(r), &val_cfg, 0)?),
        ("eodds", rerank_and_relabel(&validation, |r| eodds.score_record(r), &val_cfg, 0)?),
    ];
    for (stage, log) in &stage_logs {
        let ks = unfairness_report(&log.records)?;
        stages.push(StageSummary {
            stage: stage.to_string(),
            ks_neg: ks[&0],
            ks_pos: ks[&1],
            exposure_max_relative_deviation: max_relative_deviation(&exposure_parity(log)?),
        });
        fig2.extend(log.records.iter().map(|r| {
            [stage.to_string(), r.group.to_string(), r.label.to_string(), r.score.to_string()]
        }));
    }
    write_table(&outdir.join("fig2_distributions.csv"), &["stage", "group", "label", "score"], fig2)?;

    let mut tradeoff = Vec::new();
    for model in [&eopp, &eodds] {
        for row in tradeoff_sweep(model, &validation, &val_cfg, &config.alphas)? {
            tradeoff.push((model.kind().to_string(), row));
        }
    }
    write_table(
        &outdir.join("fig3_tradeoff.csv"),
        &["reranker", "alpha", "ks_pos", "ks_neg", "ctr"],
        tradeoff.iter().map(|(k, r)| {
            [k.clone(), r.alpha.to_string(), r.ks_pos.to_string(), r.ks_neg.to_string(), r.ctr.to_string()]
        }),
    )?;

    let summary = FigureSummary {
        config: config.clone(),
        weight_max_abs_error: errors.iter().copied().fold(0.0, f64::max),
        weight_mean_abs_error: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
        stages,
        eodds_training: report,
        tradeoff,
    };
    write_json(&outdir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// `(j, 1 / log2(1 + j), w_hat_j)` for `j = 2..=slots`.
fn fig1_rows(weights: &PositionWeights<f64>, slots: u32) -> Result<Vec<(u32, f64, f64)>> {
    (2..=slots)
        .map(|j| Ok((j, true_position_bias(j), weights.weight(j)?)))
        .collect()
}
