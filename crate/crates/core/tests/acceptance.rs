//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::lp_oracle::{brute_force_optimum, random_lp};
use common::stats::{cross_group_ks, ks_uniform, logistic, unit_bin};
use common::transport::{monotone_coupling_cost, simplex_grid3};
use fairrank::cdf::empirical_cdf;
use fairrank::eodds::{
    build_lp, prepare_bin_probs, score_eodds, train_eodds, ConditionalBinProbs, EoddsConstraintSpec, EoddsModel,
    EoddsOptions, InputTransform, TrainingReport,
};
use fairrank::eopp::{train_eopp, EoppModel, EoppOptions};
use fairrank::eval::tradeoff_sweep;
use fairrank::lp::{check_solution, solve_lp, LpStatus, SolverOptions};
use fairrank::partition::ScorePartition;
use fairrank::position_bias::{estimate_weights_observational, ObservationalSettings, PositionWeights};
use fairrank::records::{GroupId, ValidatedDataset};
use fairrank::reranker::FairModel;
use fairrank::simulate::{
    generate_population, generate_queries, rerank_and_relabel, true_position_bias, SimConfig, SimLog, SimulatedItem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 7;
const TRAIN_QUERIES: usize = 100_000;
const VALIDATION_QUERIES: usize = 50_000;
const SMALL_QUERIES: usize = 10_000;
const BINS: usize = 100;
const TRUNCATION: u32 = 30;

struct Check {
    what: String,
    pass: bool,
}

fn check(what: impl Into<String>, pass: bool) -> Check {
    Check { what: what.into(), pass }
}

type Outcome = Result<Vec<Check>, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Fixture {
    population: Vec<SimulatedItem<f64>>,
    sim: SimConfig,
    val_cfg: SimConfig,
    train: SimLog<f64>,
    data: ValidatedDataset<f64>,
    validation: SimLog<f64>,
    weights: PositionWeights<f64>,
    bias_seconds: f64,
    eopp: EoppModel<f64>,
    eodds: EoddsModel<f64>,
    eodds_report: TrainingReport,
    eodds_seconds: f64,
}

fn single_threaded<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool").install(f)
}

fn build_fixture() -> Result<Fixture, String> {
    let sim = SimConfig {
        n_queries: TRAIN_QUERIES,
        seed: SEED,
        ..SimConfig::default()
    };
    let population = generate_population::<f64>(&sim).map_err(err)?;
    let train = generate_queries(&population, &sim).map_err(err)?;
    let val_cfg = sim.with_split(1, VALIDATION_QUERIES);
    let validation = generate_queries(&population, &val_cfg).map_err(err)?;
    let data = train.dataset().map_err(err)?;

    let settings = ObservationalSettings::default();
    let start = Instant::now();
    let weights = single_threaded(|| estimate_weights_observational(&data, TRUNCATION, &settings)).map_err(err)?;
    let bias_seconds = start.elapsed().as_secs_f64();

    let eopp = train_eopp(&data, &weights, &EoppOptions::default()).map_err(err)?;
    let partition = ScorePartition::equal_width(BINS).map_err(err)?;
    let options = EoddsOptions {
        seed: SEED,
        ..EoddsOptions::default()
    };
    let start = Instant::now();
    let (eodds, eodds_report) =
        train_eodds(&data, &weights, &partition, &EoddsConstraintSpec::strict(), &options).map_err(err)?;
    let eodds_seconds = start.elapsed().as_secs_f64();
    Ok(Fixture {
        population,
        sim,
        val_cfg,
        train,
        data,
        validation,
        weights,
        bias_seconds,
        eopp,
        eodds,
        eodds_report,
        eodds_seconds,
    })
}

fn criterion_1(fx: &Fixture) -> Outcome {
    let errors: Vec<f64> = (2..=TRUNCATION)
        .map(|j| Ok((fx.weights.weight(j)? - true_position_bias(j)).abs()))
        .collect::<fairrank::Result<_>>()
        .map_err(err)?;
    let max = errors.iter().copied().fold(0.0, f64::max);
    let mae = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(vec![
        check(format!("rows={}", fx.data.len()), fx.data.len() == TRAIN_QUERIES * fx.sim.slots),
        check(format!("max|w-w*|={max:.4} <= 0.1"), max <= 0.1),
        check(format!("mae={mae:.4} <= 0.04"), mae <= 0.04),
        check(format!("runtime={:.2}s <= 60s (1 thread)", fx.bias_seconds), fx.bias_seconds <= 60.0),
    ])
}

fn criterion_2(fx: &Fixture) -> Outcome {
    let model = FairModel::Eopp(fx.eopp.clone());
    let log = rerank_and_relabel(&fx.validation, |r| model.score_record(r), &fx.val_cfg, 0).map_err(err)?;
    let pos = cross_group_ks(&log.records, 1);
    let neg = cross_group_ks(&log.records, 0);
    Ok(vec![
        check(format!("alpha={}", fx.eopp.alpha), fx.eopp.alpha == 1.0),
        check(format!("ks_pos={pos:.4} <= 0.02"), pos <= 0.02),
        check(format!("ks_neg={neg:.4} > 0.05"), neg > 0.05),
    ])
}

/// Largest violation of the per-label transported-mass equalities,
/// recomputed from the stored transition rows.
fn transport_residual(model: &EoddsModel<f64>, probs: &ConditionalBinProbs<f64>) -> Result<f64, String> {
    let k_bins = model.bins();
    let mut worst = 0.0f64;
    let transported = |g: usize, y: usize, kp: usize| -> Result<f64, String> {
        let rows = model.group_rows(probs.groups[g]).map_err(err)?;
        Ok((0..k_bins).map(|k| probs.prob(g, y, k) * rows[k * k_bins + kp]).sum())
    };
    for y in 0..probs.labels {
        for kp in 0..k_bins {
            let reference = transported(0, y, kp)?;
            for g in 1..probs.groups.len() {
                worst = worst.max((transported(g, y, kp)? - reference).abs());
            }
        }
    }
    Ok(worst)
}

fn criterion_3(fx: &Fixture) -> Outcome {
    let model = FairModel::Eodds(fx.eodds.clone());
    let log = rerank_and_relabel(&fx.validation, |r| model.score_record(r), &fx.val_cfg, 0).map_err(err)?;
    let pos = cross_group_ks(&log.records, 1);
    let neg = cross_group_ks(&log.records, 0);
    let partition = ScorePartition::equal_width(BINS).map_err(err)?;
    let (probs, _) =
        prepare_bin_probs(&fx.data, &fx.weights, &partition, InputTransform::InverseLogit).map_err(err)?;
    let residual = transport_residual(&fx.eodds, &probs)?;
    let lp_residual = fx.eodds_report.residuals.max_violation();
    let k_bins = fx.eodds.bins();
    let mut row_err = 0.0f64;
    let mut negative = false;
    for t in &fx.eodds.transition {
        for row in t.rows.chunks(k_bins) {
            row_err = row_err.max((row.iter().sum::<f64>() - 1.0).abs());
            negative |= row.iter().any(|p| *p < 0.0);
        }
    }
    Ok(vec![
        check(format!("bins={k_bins}"), k_bins == BINS),
        check(format!("ks_pos={pos:.4} <= 0.03"), pos <= 0.03),
        check(format!("ks_neg={neg:.4} <= 0.03"), neg <= 0.03),
        check(format!("lp_residual={lp_residual:.2e} <= 1e-7"), lp_residual <= 1e-7),
        check(format!("transport_residual={residual:.2e} <= 1e-7"), residual <= 1e-7),
        check(format!("row_sum_err={row_err:.2e} <= 1e-9"), row_err <= 1e-9 && !negative),
        check(format!("lp_runtime={:.1}s <= 120s", fx.eodds_seconds), fx.eodds_seconds <= 120.0),
    ])
}

/// Max gap between estimated `P(s in I_k | c, Y(1) = y)` and the same
/// probability counted directly from simulator truth.
fn consistency_gap(log: &SimLog<f64>) -> Result<f64, String> {
    let data = log.dataset().map_err(err)?;
    let known = PositionWeights::known((1..=data.max_position()).map(true_position_bias).collect()).map_err(err)?;
    let partition = ScorePartition::equal_width(BINS).map_err(err)?;
    let (probs, _) = prepare_bin_probs(&data, &known, &partition, InputTransform::InverseLogit).map_err(err)?;

    let mut counts: BTreeMap<(u32, u8), Vec<f64>> = BTreeMap::new();
    for r in &log.records {
        let y1 = log.truth[&r.item_id].counterfactual_label;
        let bins = counts.entry((r.group.0, y1)).or_insert_with(|| vec![0.0; BINS]);
        bins[unit_bin(logistic(r.score), BINS)] += 1.0;
    }
    let mut gap = 0.0f64;
    for (g, group) in probs.groups.iter().enumerate() {
        for y in 0..2u8 {
            let truth = &counts[&(group.0, y)];
            let total: f64 = truth.iter().sum();
            for (k, n) in truth.iter().enumerate() {
                gap = gap.max((probs.prob(g, y as usize, k) - n / total).abs());
            }
        }
    }
    Ok(gap)
}

fn criterion_4(fx: &Fixture) -> Outcome {
    let large = consistency_gap(&fx.train)?;
    let small_log = generate_queries(&fx.population, &fx.sim.with_split(2, SMALL_QUERIES)).map_err(err)?;
    let small = consistency_gap(&small_log)?;
    Ok(vec![
        check(format!("gap@100k={large:.4} <= 0.02"), large <= 0.02),
        check(format!("gap@10k={small:.4} > gap@100k"), large < small),
    ])
}

fn criterion_5(fx: &Fixture) -> Outcome {
    let model = FairModel::Eopp(fx.eopp.clone());
    let log = rerank_and_relabel(&fx.validation, |r| model.score_record(r), &fx.val_cfg, 0).map_err(err)?;
    // (impressions, observed positives, counterfactual positives)
    let mut tallies: BTreeMap<u32, (f64, f64, f64)> = BTreeMap::new();
    for r in &log.records {
        let t = tallies.entry(r.group.0).or_default();
        t.0 += 1.0;
        t.1 += (r.label > 0) as u8 as f64;
        t.2 += log.truth[&r.item_id].counterfactual_label as f64;
    }
    let ratios: Vec<f64> = tallies.values().map(|(n, obs, cf)| (obs / n) / (cf / n)).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let dev = ratios.iter().map(|r| (r - mean).abs() / mean).fold(0.0, f64::max);
    Ok(vec![check(format!("max_rel_dev={:.2}% <= 5%", 100.0 * dev), dev <= 0.05)])
}

fn criterion_6(fx: &Fixture) -> Outcome {
    let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let eopp = tradeoff_sweep(&FairModel::Eopp(fx.eopp.clone()), &fx.validation, &fx.val_cfg, &alphas).map_err(err)?;
    let eodds =
        tradeoff_sweep(&FairModel::Eodds(fx.eodds.clone()), &fx.validation, &fx.val_cfg, &alphas).map_err(err)?;
    let slack = 0.01;
    let rises = |rows: &[fairrank::eval::TradeoffRow]| {
        rows.windows(2).map(|w| w[1].ks_pos - w[0].ks_pos).fold(f64::NEG_INFINITY, f64::max)
    };
    let eopp_rise = rises(&eopp);
    let eodds_rise = rises(&eodds);
    let excess = eopp
        .iter()
        .zip(&eodds)
        .map(|(a, b)| a.ks_pos - b.ks_pos)
        .fold(f64::NEG_INFINITY, f64::max);
    let curve = |rows: &[fairrank::eval::TradeoffRow]| {
        rows.iter().map(|r| format!("{:.3}", r.ks_pos)).collect::<Vec<_>>().join(",")
    };
    Ok(vec![
        check(format!("eopp ks_pos max rise={eopp_rise:.4} <= {slack}"), eopp_rise <= slack),
        check(format!("eodds ks_pos max rise={eodds_rise:.4} <= {slack}"), eodds_rise <= slack),
        check(format!("max(eopp-eodds)={excess:.4} <= {slack}"), excess <= slack),
        check(format!("eopp=[{}] eodds=[{}]", curve(&eopp), curve(&eodds)), true),
    ])
}

/// Two groups over three equal-width bins; label-1 histograms with masses
/// in multiples of 1/140.
fn grid_instance(rng: &mut ChaCha8Rng) -> ([f64; 2], [[f64; 3]; 2]) {
    let prior = rng.random_range(1..10) as f64 / 10.0;
    let mut hist = [[0.0; 3]; 2];
    for h in &mut hist {
        let a = rng.random_range(1..139);
        let b = rng.random_range(1..140 - a);
        *h = [a as f64 / 140.0, b as f64 / 140.0, (140 - a - b) as f64 / 140.0];
    }
    ([prior, 1.0 - prior], hist)
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    let mut feasible = 0;
    for seed in 0..100u64 {
        let p = random_lp(seed);
        let sol = solve_lp(&p, &SolverOptions::default()).map_err(err)?;
        match brute_force_optimum(&p, 1e-9) {
            Some(best) => {
                feasible += 1;
                let ok = sol.status == LpStatus::Optimal
                    && check_solution(&p, &sol.x).map_err(err)?.is_feasible(1e-9);
                if !ok {
                    mismatched += 1;
                } else {
                    worst = worst.max((sol.objective_value - best).abs());
                }
            }
            None => mismatched += (sol.status != LpStatus::Infeasible) as usize,
        }
    }

    let grid = simplex_grid3(140);
    let partition = ScorePartition::equal_width(3).map_err(err)?;
    let spec = EoddsConstraintSpec::differential(f64::INFINITY, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut grid_gap = 0.0f64;
    for _ in 0..10 {
        let (priors, hist) = grid_instance(&mut rng);
        let probs = ConditionalBinProbs::from_parts(
            vec![GroupId(0), GroupId(1)],
            hist.iter().map(|h| vec![vec![1.0 / 3.0; 3], h.to_vec()]).collect(),
            hist.iter().zip(priors).map(|(h, p)| h.iter().map(|v| p * v).collect()).collect(),
            priors.to_vec(),
        )
        .map_err(err)?;
        let lp = build_lp(&probs, &partition, &spec).map_err(err)?;
        let sol = solve_lp(&lp, &SolverOptions::default()).map_err(err)?;
        if sol.status != LpStatus::Optimal {
            return Err(format!("fairness LP ended {:?}", sol.status));
        }
        let best = grid
            .iter()
            .map(|q| (0..2).map(|c| priors[c] * monotone_coupling_cost(&hist[c], q)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        grid_gap = grid_gap.max((sol.objective_value - best).abs());
    }
    Ok(vec![
        check(format!("random LPs: {feasible} feasible, {mismatched} status mismatches"), mismatched == 0),
        check(format!("random LPs: max|obj-brute|={worst:.2e} <= 1e-8"), worst <= 1e-8),
        check(format!("fairness LPs: {} grid points, max|obj-grid|={grid_gap:.2e} <= 1e-4", grid.len()), grid.len() >= 10_000 && grid_gap <= 1e-4),
    ])
}

fn cdf_properties() -> Result<bool, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..200 {
        let n = rng.random_range(1..200);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0f64).round()).collect();
        let ws: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let cdf = empirical_cdf(&xs, &ws).map_err(err)?;
        let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bottom = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let grid: Vec<f64> = (0..=120).map(|i| -6.0 + i as f64 * 0.1).collect();
        let values: Vec<f64> = grid.iter().map(|&t| cdf.eval(t)).collect();
        let monotone = values.windows(2).all(|w| w[0] <= w[1]);
        let normalized = (cdf.eval(top) - 1.0).abs() < 1e-12 && cdf.eval(bottom - 1.0) == 0.0;
        if !(monotone && normalized) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn pit_uniformity(fx: &Fixture) -> Result<(f64, usize), String> {
    let known = PositionWeights::known((1..=fx.sim.slots as u32).map(true_position_bias).collect()).map_err(err)?;
    let model = train_eopp(&fx.data, &known, &EoppOptions::default()).map_err(err)?;
    let mut worst = 0.0f64;
    let mut smallest = usize::MAX;
    for group in [GroupId(0), GroupId(1)] {
        let cdf = model.group_cdf(group).map_err(err)?;
        let u: Vec<f64> = fx
            .validation
            .records
            .iter()
            .filter(|r| r.group == group && fx.validation.truth[&r.item_id].counterfactual_label == 1)
            .map(|r| cdf.eval(r.score))
            .collect();
        smallest = smallest.min(u.len());
        worst = worst.max(ks_uniform(&u));
    }
    Ok((worst, smallest))
}

fn monte_carlo(fx: &Fixture) -> Result<(usize, usize), String> {
    const DRAWS: usize = 1_000_000;
    let k_bins = fx.eodds.bins();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut compared, mut outside) = (0, 0);
    for group in [GroupId(0), GroupId(1)] {
        let rows = fx.eodds.group_rows(group).map_err(err)?;
        let spread = |k: usize| rows[k * k_bins..(k + 1) * k_bins].iter().filter(|p| **p > 1e-6).count();
        let source = (0..k_bins).max_by_key(|&k| (spread(k), std::cmp::Reverse(k))).unwrap_or(0);
        if spread(source) < 2 {
            return Err("no randomized transition row".into());
        }
        let row = &rows[source * k_bins..(source + 1) * k_bins];
        let score = (source as f64 + 0.5) / k_bins as f64;
        let mut counts = vec![0usize; k_bins];
        for _ in 0..DRAWS {
            let s = score_eodds(&fx.eodds, score, group, &mut rng).map_err(err)?;
            counts[unit_bin(s, k_bins)] += 1;
        }
        for (p, n) in row.iter().zip(&counts) {
            compared += 1;
            let se = (p * (1.0 - p) / DRAWS as f64).sqrt();
            let ok = if *p == 0.0 { *n == 0 } else { (*n as f64 / DRAWS as f64 - p).abs() <= 3.0 * se };
            outside += (!ok) as usize;
        }
    }
    Ok((compared, outside))
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.clone(), std::fs::read(&path).unwrap_or_default());
            }
        }
    }
    out
}

fn fairrank(args: &[String], threads: usize) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fairrank"))
        .args(args)
        .env("FAIRRANK_THREADS", threads.to_string())
        .output()
        .map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn cli_pipeline(dir: &Path) -> Vec<Vec<String>> {
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    let cmd = |s: &str| s.split_whitespace().map(|a| if a.starts_with('@') { p(&a[1..]) } else { a.to_string() }).collect();
    vec![
        cmd("simulate --queries 3000 --population 5000 --seed 11 --out @train.csv --truth @truth.csv"),
        cmd("simulate --queries 1000 --population 5000 --seed 11 --split 1 --out @val.csv --truth @vtruth.csv"),
        cmd("estimate-bias --input @train.csv --out @w.json"),
        cmd("estimate-bias --input @train.csv --mode randomized --out @w_randomized.json"),
        cmd("train-eopp --input @train.csv --weights @w.json --alpha 0.8 --out @eopp.json"),
        cmd("train-eodds --input @train.csv --weights @w.json --bins 20 --lp-listing @lp.txt --out @eodds.json"),
        cmd("train-eodds --input @train.csv --weights @w.json --bins 10 --mode diff --eps0 0.1 --eps1 0.05 --out @eodds_diff.json"),
        cmd("score --model @eopp.json --input @val.csv --out @val_eopp.csv"),
        cmd("score --model @eodds.json --input @val.csv --out @val_eodds.csv"),
        cmd("evaluate --input @val_eodds.csv --truth @vtruth.csv --rerank --out @eval.json"),
        cmd("sweep --reranker eodds --model @eodds.json --validation @val.csv --truth @vtruth.csv --alphas 0:1:0.25 --out @sweep_eodds.csv"),
        cmd("sweep --reranker eopp --input @train.csv --weights @w.json --validation @val.csv --truth @vtruth.csv --alphas 0,0.5,1 --out @sweep_eopp.csv"),
        cmd("reproduce-figures --outdir @figures --train-queries 2000 --validation-queries 500 --seed 11"),
    ]
}

fn cli_reruns() -> Result<(bool, usize), String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let commands = cli_pipeline(dir.path());
    for c in &commands {
        fairrank(c, 1)?;
    }
    let first = snapshot(dir.path());
    for path in first.keys() {
        std::fs::remove_file(path).map_err(err)?;
    }
    for c in &commands {
        fairrank(c, 2)?;
    }
    let second = snapshot(dir.path());
    let metas: Vec<&PathBuf> = first
        .keys()
        .filter(|p| p.to_string_lossy().ends_with(".meta.json") || p.ends_with("figures/metadata.json"))
        .collect();
    for meta in &metas {
        fairrank(&["rerun".into(), "--metadata".into(), meta.to_string_lossy().into_owned()], 1)?;
    }
    let third = snapshot(dir.path());
    Ok((first == second && second == third && metas.len() == commands.len(), first.len()))
}

fn criterion_8(fx: &Fixture) -> Outcome {
    let cdf_ok = cdf_properties()?;
    let (pit, n) = pit_uniformity(fx)?;
    let (compared, outside) = monte_carlo(fx)?;
    let (identical, files) = cli_reruns()?;
    Ok(vec![
        check("cdf monotone and normalized", cdf_ok),
        check(format!("pit ks={pit:.4} <= 0.02 (n>={n})"), pit <= 0.02 && n >= 10_000),
        check(format!("multinomial: {outside}/{compared} cells outside 3 SE"), outside == 0 && compared > 0),
        check(format!("cli reruns bit-identical over {files} files"), identical),
    ])
}

fn main() {
    let names = [
        "position-bias recovery",
        "eopp fairness",
        "eodds fairness",
        "bin-probability consistency",
        "exposure parity",
        "tradeoff curves",
        "lp oracle equivalence",
        "property suites",
    ];
    let started = Instant::now();
    let fixture = build_fixture();
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let id = i + 1;
        let outcome = match (&fixture, id) {
            (_, 7) => criterion_7(),
            (Err(e), _) => Err(format!("fixture: {e}")),
            (Ok(fx), 1) => criterion_1(fx),
            (Ok(fx), 2) => criterion_2(fx),
            (Ok(fx), 3) => criterion_3(fx),
            (Ok(fx), 4) => criterion_4(fx),
            (Ok(fx), 5) => criterion_5(fx),
            (Ok(fx), 6) => criterion_6(fx),
            (Ok(fx), _) => criterion_8(fx),
        };
        let (pass, detail) = match outcome {
            Ok(checks) => (
                checks.iter().all(|c| c.pass),
                checks
                    .iter()
                    .map(|c| if c.pass { c.what.clone() } else { format!("!{}", c.what) })
                    .collect::<Vec<_>>()
                    .join("; "),
            ),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += (!pass) as usize;
        println!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {}/{} passed in {:.0}s", names.len() - failed, names.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
