//! Position-bias-adjusted equalized-odds reranker.
//!
//! Scores are mapped into `[0, 1)` and cut into K intervals. A linear
//! program picks, per group, a K x K row-stochastic matrix of interval
//! transitions so that the post-transition interval masses conditional on
//! each label agree across groups, while moving as little score mass as
//! possible. Scoring draws a destination interval from the row of the
//! source interval and a uniform point inside it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::{inverse_logit, unweighted_cdf};
use crate::eopp::{blend, Rescale, Rescaler};
use crate::error::{Error, Result};
use crate::lp::{check_solution, solve_lp, FeasibilityReport, LpProblem, LpStatus, SolverOptions};
use crate::partition::ScorePartition;
use crate::position_bias::PositionWeights;
use crate::records::{GroupId, ImpressionRecord, ValidatedDataset};
use crate::rng::{substream, Stream, RNG_ID};
use crate::scalar::Scalar;

pub const EODDS_FORMAT: &str = "fairrank.eodds/1";
pub const DEFAULT_BINS: usize = 100;
/// Row-sum tolerance for stored transition matrices.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Observed counts `n[c, y, k, j]` for group, label, interval and position.
#[derive(Debug, Clone, PartialEq)]
pub struct BinCounts {
    groups: Vec<GroupId>,
    labels: usize,
    bins: usize,
    positions: usize,
    counts: Vec<u64>,
}

impl BinCounts {
    fn idx(&self, g: usize, y: usize, k: usize, j0: usize) -> usize {
        ((g * self.labels + y) * self.bins + k) * self.positions + j0
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.groups
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    /// Count for the group at index `g`; `position` is 1-based.
    pub fn get(&self, g: usize, label: usize, bin: usize, position: u32) -> u64 {
        self.counts[self.idx(g, label, bin, position as usize - 1)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn group_total(&self, g: usize) -> u64 {
        let stride = self.labels * self.bins * self.positions;
        self.counts[g * stride..(g + 1) * stride].iter().sum()
    }
}

/// Tallies records whose scores already lie in `[0, 1)`.
pub fn tally_counts<T: Scalar>(
    data: &ValidatedDataset<T>,
    partition: &ScorePartition<T>,
) -> Result<BinCounts> {
    let groups = data.groups().to_vec();
    let mut shape = BinCounts {
        labels: data.schema().max_label as usize + 1,
        bins: partition.bins(),
        positions: data.max_position() as usize,
        counts: Vec::new(),
        groups,
    };
    let len = shape.groups.len() * shape.labels * shape.bins * shape.positions;
    let shape_ref = &shape;
    let counts = data
        .records()
        .par_chunks(1 << 14)
        .map(|chunk| -> Result<Vec<u64>> {
            let mut local = vec![0u64; len];
            for r in chunk {
                let k = partition.bin_of(r.score)?;
                let g = shape_ref
                    .groups
                    .iter()
                    .position(|&g| g == r.group)
                    .ok_or(Error::MissingGroup(r.group))?;
                local[shape_ref.idx(g, r.label as usize, k, r.position as usize - 1)] += 1;
            }
            Ok(local)
        })
        .try_reduce(
            || vec![0u64; len],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    shape.counts = counts;
    Ok(shape)
}

/// Counts after inflating positive labels by `1 / w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedCounts<T> {
    groups: Vec<GroupId>,
    labels: usize,
    bins: usize,
    positions: usize,
    values: Vec<T>,
    /// Raw record counts per (group, interval), summed over labels and positions.
    bin_totals: Vec<u64>,
    /// Number of cells whose adjusted negative count went below zero.
    pub floored: usize,
}

impl<T: Scalar> AdjustedCounts<T> {
    pub fn get(&self, g: usize, label: usize, bin: usize, position: u32) -> T {
        self.values[((g * self.labels + label) * self.bins + bin) * self.positions + position as usize - 1]
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.groups
    }
}

/// `n1' = n1 / w_j`, `n0' = (n0 + n1) - n1'`, applied per cell. Labels above
/// 1 are inflated like label 1; the negative cell absorbs the difference.
pub fn adjust_counts<T: Scalar>(counts: &BinCounts, weights: &PositionWeights<T>) -> Result<AdjustedCounts<T>> {
    let (labels, bins, positions) = (counts.labels, counts.bins, counts.positions);
    let mut values = vec![T::zero(); counts.counts.len()];
    let mut bin_totals = vec![0u64; counts.groups.len() * bins];
    let mut floored = 0;
    for j in 1..=positions as u32 {
        let occupied = (0..counts.groups.len())
            .any(|g| (0..labels).any(|y| (0..bins).any(|k| counts.get(g, y, k, j) > 0)));
        if !occupied {
            continue;
        }
        let w = weights.weight(j)?;
        for g in 0..counts.groups.len() {
            for k in 0..bins {
                let mut all = 0u64;
                let mut inflated = T::zero();
                for y in 1..labels {
                    let n = counts.get(g, y, k, j);
                    all += n;
                    let v = if w == T::one() { T::of_usize(n as usize) } else { T::of_usize(n as usize) / w };
                    values[counts.idx(g, y, k, j as usize - 1)] = v;
                    inflated = inflated + v;
                }
                let n0 = counts.get(g, 0, k, j);
                all += n0;
                bin_totals[g * bins + k] += all;
                let mut v0 = T::of_usize(all as usize) - inflated;
                if v0 < T::zero() {
                    v0 = T::zero();
                    floored += 1;
                }
                values[counts.idx(g, 0, k, j as usize - 1)] = v0;
            }
        }
    }
    Ok(AdjustedCounts {
        groups: counts.groups.clone(),
        labels,
        bins,
        positions,
        values,
        bin_totals,
        floored,
    })
}

/// `P(s in I_k | C = c, Y(1) = y)` plus the joint interval masses and group
/// shares of the raw scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConditionalBinProbs<T> {
    pub groups: Vec<GroupId>,
    pub labels: usize,
    pub bins: usize,
    /// Indexed `(group * labels + label) * bins + bin`.
    pub probs: Vec<T>,
    /// Joint `P(C = c, s in I_k)`, indexed `group * bins + bin`.
    pub group_bin_mass: Vec<T>,
    pub group_priors: Vec<T>,
}

impl<T: Scalar> ConditionalBinProbs<T> {
    pub fn row(&self, g: usize, label: usize) -> &[T] {
        let start = (g * self.labels + label) * self.bins;
        &self.probs[start..start + self.bins]
    }

    pub fn prob(&self, g: usize, label: usize, bin: usize) -> T {
        self.probs[(g * self.labels + label) * self.bins + bin]
    }

    pub fn mass(&self, g: usize, bin: usize) -> T {
        self.group_bin_mass[g * self.bins + bin]
    }

    /// Builds probabilities directly from per-(group, label) vectors, e.g.
    /// for tests or externally estimated inputs. Masses are `prior * mix`.
    pub fn from_parts(
        groups: Vec<GroupId>,
        rows: Vec<Vec<Vec<T>>>,
        group_bin_mass: Vec<Vec<T>>,
        group_priors: Vec<T>,
    ) -> Result<Self> {
        let labels = rows.first().map_or(0, |r| r.len());
        let bins = rows.first().and_then(|r| r.first()).map_or(0, |v| v.len());
        let consistent = rows.len() == groups.len()
            && group_bin_mass.len() == groups.len()
            && group_priors.len() == groups.len()
            && rows.iter().all(|r| r.len() == labels && r.iter().all(|v| v.len() == bins))
            && group_bin_mass.iter().all(|m| m.len() == bins);
        if !consistent || labels == 0 || bins == 0 {
            return Err(Error::InconsistentDimensions("ragged probability inputs".into()));
        }
        Ok(ConditionalBinProbs {
            groups,
            labels,
            bins,
            probs: rows.into_iter().flatten().flatten().collect(),
            group_bin_mass: group_bin_mass.into_iter().flatten().collect(),
            group_priors,
        })
    }
}

pub fn estimate_bin_probs<T: Scalar>(adjusted: &AdjustedCounts<T>) -> Result<ConditionalBinProbs<T>> {
    let (labels, bins, positions) = (adjusted.labels, adjusted.bins, adjusted.positions);
    let g_count = adjusted.groups.len();
    let mut probs = Vec::with_capacity(g_count * labels * bins);
    for g in 0..g_count {
        for y in 0..labels {
            let start = ((g * labels + y) * bins) * positions;
            let cells = &adjusted.values[start..start + bins * positions];
            let per_bin: Vec<T> = cells.chunks(positions).map(|c| c.iter().copied().sum()).collect();
            let total: T = per_bin.iter().copied().sum();
            if !(total > T::zero()) {
                return Err(Error::EmptyStratum {
                    group: adjusted.groups[g],
                    label: y as u32,
                });
            }
            probs.extend(per_bin.into_iter().map(|v| v / total));
        }
    }
    let n: u64 = adjusted.bin_totals.iter().sum();
    let n_t = T::of_usize(n as usize);
    let group_bin_mass = adjusted.bin_totals.iter().map(|&c| T::of_usize(c as usize) / n_t).collect();
    let group_priors = (0..g_count)
        .map(|g| T::of_usize(adjusted.bin_totals[g * bins..(g + 1) * bins].iter().sum::<u64>() as usize) / n_t)
        .collect();
    Ok(ConditionalBinProbs {
        groups: adjusted.groups.clone(),
        labels,
        bins,
        probs,
        group_bin_mass,
        group_priors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    Strict,
    MultiOutcome,
    Differential,
}

/// Which labels are equalized and how tightly. `None` epsilon means
/// unconstrained (infinite).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EoddsConstraintSpec {
    pub mode: ConstraintMode,
    pub outcomes: u32,
    pub epsilon0: Option<f64>,
    pub epsilon1: Option<f64>,
}

impl Default for EoddsConstraintSpec {
    fn default() -> Self {
        Self::strict()
    }
}

fn finite_eps(e: f64) -> Option<f64> {
    e.is_finite().then_some(e)
}

impl EoddsConstraintSpec {
    pub fn strict() -> Self {
        EoddsConstraintSpec {
            mode: ConstraintMode::Strict,
            outcomes: 1,
            epsilon0: Some(0.0),
            epsilon1: Some(0.0),
        }
    }

    /// Labels `0..=outcomes`.
    pub fn multi_outcome(outcomes: u32) -> Self {
        EoddsConstraintSpec {
            mode: ConstraintMode::MultiOutcome,
            outcomes,
            ..Self::strict()
        }
    }

    /// Pass `f64::INFINITY` to leave a label unconstrained.
    pub fn differential(epsilon0: f64, epsilon1: f64) -> Self {
        EoddsConstraintSpec {
            mode: ConstraintMode::Differential,
            outcomes: 1,
            epsilon0: finite_eps(epsilon0),
            epsilon1: finite_eps(epsilon1),
        }
    }

    pub fn label_count(&self) -> usize {
        match self.mode {
            ConstraintMode::MultiOutcome => self.outcomes as usize + 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad_eps = |e: Option<f64>| e.is_some_and(|v| !(v >= 0.0));
        if bad_eps(self.epsilon0) || bad_eps(self.epsilon1) {
            return Err(Error::InvalidParameter("epsilon must be nonnegative".into()));
        }
        match self.mode {
            ConstraintMode::MultiOutcome if self.outcomes < 1 => {
                Err(Error::InvalidParameter("multi-outcome mode needs at least one positive outcome".into()))
            }
            ConstraintMode::Differential if self.epsilon0.is_none() && self.epsilon1.is_none() => {
                Err(Error::InvalidParameter("differential mode needs a finite epsilon for some label".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Column of `p[k, k', c]` in the transition LP.
pub fn lp_var(bins: usize, group: usize, from: usize, to: usize) -> usize {
    (group * bins + from) * bins + to
}

/// Assembles the transition LP.
///
/// Variables `p[k, k', c]` in `[0, 1]` with rows summing to one. In strict
/// and multi-outcome modes, post-transition masses
/// `sum_k p[k, k', c] pi[c, y, k]` equal those of the first group for every
/// destination interval and label. In differential mode, cumulative masses
/// satisfy `G_c(k') <= exp(eps_y) G_d(k')` for every ordered pair of groups.
/// The objective is the expected midpoint distance moved, weighted by the
/// joint group-interval mass.
pub fn build_lp<T: Scalar>(
    probs: &ConditionalBinProbs<T>,
    partition: &ScorePartition<T>,
    spec: &EoddsConstraintSpec,
) -> Result<LpProblem<T>> {
    spec.validate()?;
    let g_count = probs.groups.len();
    if g_count < 2 {
        return Err(Error::SingleGroup);
    }
    let k_bins = partition.bins();
    if probs.bins != k_bins
        || probs.labels != spec.label_count()
        || probs.probs.len() != g_count * probs.labels * k_bins
        || probs.group_bin_mass.len() != g_count * k_bins
    {
        return Err(Error::InconsistentDimensions(format!(
            "{} labels x {} bins given; constraints need {} labels over {} bins",
            probs.labels,
            probs.bins,
            spec.label_count(),
            k_bins
        )));
    }
    let n = g_count * k_bins * k_bins;
    let mids: Vec<T> = (0..k_bins).map(|k| partition.midpoint(k)).collect();
    let mut objective = vec![T::zero(); n];
    for g in 0..g_count {
        for k in 0..k_bins {
            let m = probs.mass(g, k);
            for kp in 0..k_bins {
                objective[lp_var(k_bins, g, k, kp)] = m * (mids[k] - mids[kp]).abs();
            }
        }
    }
    let mut lp = LpProblem::new(objective);
    lp.upper = vec![T::one(); n];

    for g in 0..g_count {
        for k in 0..k_bins {
            let mut row = vec![T::zero(); n];
            for kp in 0..k_bins {
                row[lp_var(k_bins, g, k, kp)] = T::one();
            }
            lp.add_eq(row, T::one());
        }
    }

    match spec.mode {
        ConstraintMode::Strict | ConstraintMode::MultiOutcome => {
            for y in 0..probs.labels {
                for kp in 0..k_bins {
                    for g in 1..g_count {
                        let mut row = vec![T::zero(); n];
                        for k in 0..k_bins {
                            row[lp_var(k_bins, g, k, kp)] = probs.prob(g, y, k);
                            row[lp_var(k_bins, 0, k, kp)] = -probs.prob(0, y, k);
                        }
                        lp.add_eq(row, T::zero());
                    }
                }
            }
        }
        ConstraintMode::Differential => {
            for (y, eps) in [spec.epsilon0, spec.epsilon1].into_iter().enumerate() {
                let Some(eps) = eps else { continue };
                let factor = T::of(eps.exp());
                // The last endpoint has cumulative mass one on both sides.
                for t in 0..k_bins - 1 {
                    for a in 0..g_count {
                        for b in 0..g_count {
                            if a == b {
                                continue;
                            }
                            let mut row = vec![T::zero(); n];
                            for kp in 0..=t {
                                for k in 0..k_bins {
                                    row[lp_var(k_bins, a, k, kp)] = probs.prob(a, y, k);
                                    row[lp_var(k_bins, b, k, kp)] = -factor * probs.prob(b, y, k);
                                }
                            }
                            lp.add_le(row, T::zero());
                        }
                    }
                }
            }
        }
    }
    Ok(lp)
}

/// Post-transition interval masses `sum_k p[k, k', c] pi[c, y, k]`, indexed
/// like [`ConditionalBinProbs::probs`].
pub fn transported_bin_probs<T: Scalar>(model: &EoddsModel<T>, probs: &ConditionalBinProbs<T>) -> Result<Vec<T>> {
    let k_bins = model.bins();
    if probs.bins != k_bins {
        return Err(Error::InconsistentDimensions(format!("{} bins given, model has {k_bins}", probs.bins)));
    }
    let mut out = Vec::with_capacity(probs.probs.len());
    for (g, &group) in probs.groups.iter().enumerate() {
        let rows = model.group_rows(group)?;
        for y in 0..probs.labels {
            for kp in 0..k_bins {
                let mut acc = T::zero();
                for k in 0..k_bins {
                    acc = acc + rows[k * k_bins + kp] * probs.prob(g, y, k);
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputTransform {
    /// Scores are real-valued and mapped through the logistic function.
    #[default]
    InverseLogit,
    /// Scores already lie in `[0, 1)`.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WithinBinLaw {
    #[default]
    Uniform,
}

/// Every record draws from its own generator keyed by
/// `(seed, stream, query_id, item_id)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub seed: u64,
    pub key: String,
    pub rng: String,
}

impl SeedPolicy {
    pub fn per_record(seed: u64) -> Self {
        SeedPolicy {
            seed,
            key: "eodds_score/query_id/item_id".into(),
            rng: RNG_ID.into(),
        }
    }

    pub fn rng_for(&self, query_id: u64, item_id: u64) -> rand_chacha::ChaCha8Rng {
        substream(self.seed, Stream::EoddsScore, query_id, item_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroupTransition<T> {
    pub group: GroupId,
    /// K x K, row-major; row `k` is the destination law for source interval `k`.
    pub rows: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EoddsModel<T> {
    pub format: String,
    pub groups: Vec<GroupId>,
    pub partition: ScorePartition<T>,
    pub constraints: EoddsConstraintSpec,
    pub transition: Vec<GroupTransition<T>>,
    pub within_bin_law: WithinBinLaw,
    pub input_transform: InputTransform,
    pub seed_policy: SeedPolicy,
    pub alpha: T,
    pub rescale: Rescale,
    pub rescaler: Rescaler<T>,
    pub lp_objective: T,
}

#[derive(Debug, Clone)]
pub struct EoddsOptions {
    pub alpha: f64,
    pub rescale: Rescale,
    pub input_transform: InputTransform,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for EoddsOptions {
    fn default() -> Self {
        EoddsOptions {
            alpha: 1.0,
            rescale: Rescale::Auto,
            input_transform: InputTransform::InverseLogit,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

/// Diagnostics from a training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingReport {
    pub lp_iterations: usize,
    pub lp_objective: f64,
    pub lp_variables: usize,
    pub lp_equalities: usize,
    pub lp_inequalities: usize,
    pub residuals: FeasibilityReport,
    /// Largest deviation of a raw LP row sum from one, before renormalizing.
    pub max_row_sum_error: f64,
    pub floored_counts: usize,
}

fn to_unit<T: Scalar>(score: T, transform: InputTransform) -> Result<T> {
    let u = match transform {
        InputTransform::InverseLogit => inverse_logit(score)?,
        InputTransform::Identity => score,
    };
    // The logistic function rounds to exactly 1 for large inputs.
    if transform == InputTransform::InverseLogit && u >= T::one() {
        return Ok(T::one() - T::epsilon() / T::of(2.0));
    }
    Ok(u)
}

/// Estimates adjusted interval probabilities from a raw-score log.
pub fn prepare_bin_probs<T: Scalar>(
    data: &ValidatedDataset<T>,
    weights: &PositionWeights<T>,
    partition: &ScorePartition<T>,
    transform: InputTransform,
) -> Result<(ConditionalBinProbs<T>, usize)> {
    let unit = data.map_scores(|r| to_unit(r.score, transform))?;
    let counts = tally_counts(&unit, partition)?;
    let adjusted = adjust_counts(&counts, weights)?;
    Ok((estimate_bin_probs(&adjusted)?, adjusted.floored))
}

pub fn train_eodds<T: Scalar>(
    data: &ValidatedDataset<T>,
    weights: &PositionWeights<T>,
    partition: &ScorePartition<T>,
    spec: &EoddsConstraintSpec,
    options: &EoddsOptions,
) -> Result<(EoddsModel<T>, TrainingReport)> {
    if !(0.0..=1.0).contains(&options.alpha) {
        return Err(Error::InvalidParameter(format!("alpha {} must lie in [0, 1]", options.alpha)));
    }
    let (probs, floored) = prepare_bin_probs(data, weights, partition, options.input_transform)?;
    let lp = build_lp(&probs, partition, spec)?;
    let solution = solve_lp(&lp, &options.solver)?;
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::Unbounded => return Err(Error::Unbounded),
        LpStatus::IterationLimit => return Err(Error::IterationLimit(solution.iterations)),
    }
    let residuals = check_solution(&lp, &solution.x)?;

    let k_bins = partition.bins();
    let mut max_row_sum_error = 0.0f64;
    let mut transition = Vec::with_capacity(probs.groups.len());
    for (g, &group) in probs.groups.iter().enumerate() {
        let mut rows = Vec::with_capacity(k_bins * k_bins);
        for k in 0..k_bins {
            let raw = &solution.x[lp_var(k_bins, g, k, 0)..lp_var(k_bins, g, k, 0) + k_bins];
            let sum: T = raw.iter().copied().sum();
            max_row_sum_error = max_row_sum_error.max((sum.as_f64() - 1.0).abs());
            let unused = probs.mass(g, k) == T::zero() && (0..probs.labels).all(|y| probs.prob(g, y, k) == T::zero());
            if unused {
                // Rows that no record and no constraint touches: keep scores in place.
                rows.extend((0..k_bins).map(|kp| if kp == k { T::one() } else { T::zero() }));
                continue;
            }
            let clamped: Vec<T> = raw.iter().map(|v| v.max(T::zero()).min(T::one())).collect();
            let s: T = clamped.iter().copied().sum();
            rows.extend(clamped.into_iter().map(|v| v / s));
        }
        transition.push(GroupTransition { group, rows });
    }

    let report = TrainingReport {
        lp_iterations: solution.iterations,
        lp_objective: solution.objective_value.as_f64(),
        lp_variables: lp.num_vars(),
        lp_equalities: lp.eq_rhs.len(),
        lp_inequalities: lp.ineq_rhs.len(),
        residuals,
        max_row_sum_error,
        floored_counts: floored,
    };

    let mut model = EoddsModel {
        format: EODDS_FORMAT.to_string(),
        groups: probs.groups.clone(),
        partition: partition.clone(),
        constraints: *spec,
        transition,
        within_bin_law: WithinBinLaw::Uniform,
        input_transform: options.input_transform,
        seed_policy: SeedPolicy::per_record(options.seed),
        alpha: T::of(options.alpha),
        rescale: options.rescale,
        rescaler: Rescaler {
            pooled_pre_cdf: unweighted_cdf(&[T::zero()])?,
            pooled_post_cdf: unweighted_cdf(&[T::zero()])?,
        },
        lp_objective: solution.objective_value,
    };
    model.rescaler = fit_rescaler(&model, data.records())?;
    Ok((model, report))
}

/// CDFs of raw and randomized training scores, for mapping outputs back to
/// the raw scale.
fn fit_rescaler<T: Scalar>(model: &EoddsModel<T>, records: &[ImpressionRecord<T>]) -> Result<Rescaler<T>> {
    let raw: Vec<T> = records.iter().map(|r| r.score).collect();
    let randomized = records
        .par_iter()
        .map(|r| model.randomized_unit_score(r))
        .collect::<Result<Vec<T>>>()?;
    Ok(Rescaler {
        pooled_pre_cdf: unweighted_cdf(&raw)?,
        pooled_post_cdf: unweighted_cdf(&randomized)?,
    })
}

/// Destination-interval law for source interval `bin` of `group`.
pub fn transition_distribution<T: Scalar>(model: &EoddsModel<T>, group: GroupId, bin: usize) -> Result<&[T]> {
    let k_bins = model.bins();
    if bin >= k_bins {
        return Err(Error::BinOutOfRange { bin, bins: k_bins });
    }
    let rows = model.group_rows(group)?;
    Ok(&rows[bin * k_bins..(bin + 1) * k_bins])
}

/// Randomized score for a `[0, 1)` input: destination interval drawn from
/// the transition row, then a uniform point inside it.
pub fn score_eodds<T: Scalar, R: Rng + ?Sized>(
    model: &EoddsModel<T>,
    score: T,
    group: GroupId,
    rng: &mut R,
) -> Result<T> {
    let k = model.partition.bin_of(score)?;
    let row = transition_distribution(model, group, k)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut dest = None;
    for (kp, p) in row.iter().enumerate() {
        let p = p.as_f64();
        if p <= 0.0 {
            continue;
        }
        acc += p;
        dest = Some(kp);
        if u < acc {
            break;
        }
    }
    // Rows always carry positive mass; the fallback only absorbs round-off.
    let kp = dest.unwrap_or(k);
    let (lo, hi) = model.partition.bounds(kp);
    let v: f64 = rng.random();
    let x = lo + (hi - lo) * T::of(v);
    Ok(if x < hi { x } else { lo })
}

impl<T: Scalar> EoddsModel<T> {
    pub fn bins(&self) -> usize {
        self.partition.bins()
    }

    pub fn group_rows(&self, group: GroupId) -> Result<&[T]> {
        self.transition
            .iter()
            .find(|t| t.group == group)
            .map(|t| t.rows.as_slice())
            .ok_or(Error::UnknownGroup(group))
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} must lie in [0, 1]")));
        }
        Ok(EoddsModel {
            alpha: T::of(alpha),
            ..self.clone()
        })
    }

    /// The `[0, 1)` randomized score of a record under the seed policy.
    pub fn randomized_unit_score(&self, record: &ImpressionRecord<T>) -> Result<T> {
        let unit = to_unit(record.score, self.input_transform)?;
        let mut rng = self.seed_policy.rng_for(record.query_id, record.item_id);
        score_eodds(self, unit, record.group, &mut rng)
    }

    /// Fair score of a record: randomized, optionally mapped back to the raw
    /// scale, then blended with the raw score by `alpha`.
    pub fn score_record(&self, record: &ImpressionRecord<T>) -> Result<T> {
        if !record.score.is_finite() {
            return Err(Error::NonFiniteInput(record.score.as_f64()));
        }
        self.group_rows(record.group)?;
        if self.alpha == T::zero() {
            return Ok(record.score);
        }
        let s = self.randomized_unit_score(record)?;
        let t = if self.rescale.applies(self.alpha.as_f64()) {
            self.rescaler.apply(s)?
        } else {
            s
        };
        Ok(blend(self.alpha, t, record.score))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: EoddsModel<T> = serde_json::from_str(text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    pub fn check(&self) -> Result<()> {
        let mismatch = |m: String| Err(Error::SchemaMismatch(m));
        if self.format != EODDS_FORMAT {
            return mismatch(format!("expected format {EODDS_FORMAT}, found {}", self.format));
        }
        ScorePartition::from_cut_points(self.partition.cut_points().to_vec())
            .map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        if self.transition.len() != self.groups.len()
            || self.groups.iter().zip(&self.transition).any(|(g, t)| *g != t.group)
        {
            return mismatch("transition entries do not match the group list".into());
        }
        let k_bins = self.bins();
        for t in &self.transition {
            if t.rows.len() != k_bins * k_bins {
                return mismatch(format!("group {} has {} transition entries, expected {}", t.group, t.rows.len(), k_bins * k_bins));
            }
            for row in t.rows.chunks(k_bins) {
                let sum: T = row.iter().copied().sum();
                if row.iter().any(|p| !(*p >= T::zero())) || (sum.as_f64() - 1.0).abs() > ROW_SUM_TOL {
                    return mismatch(format!("group {} has a transition row that is not a distribution", t.group));
                }
            }
        }
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return mismatch(format!("alpha {} outside [0, 1]", self.alpha));
        }
        self.rescaler.pooled_pre_cdf.check()?;
        self.rescaler.pooled_post_cdf.check()
    }
}
