//! Estimation of the positive-response decay `w_j = P(Y(j)=1 | Y(1)=1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::ValidatedDataset;
use crate::scalar::{total_cmp, Scalar};

pub const DEFAULT_TRUNCATION: u32 = 30;
pub const DEFAULT_DENSITY_BINS: usize = 50;
pub const DEFAULT_SMOOTHING: f64 = 1e-6;
pub const DEFAULT_RATIO_CAP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Randomized,
    Observational,
    Known,
}

/// How the shared histogram edges for two adjacent positions are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Equal-width bins over the pooled score range of the pair.
    EqualWidth,
    /// Bins holding equal pooled counts.
    #[default]
    EqualMass,
}

/// Settings of the observational estimator, stored with its output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationalSettings {
    pub bins: usize,
    pub smoothing_epsilon: f64,
    pub ratio_cap: f64,
    pub binning: Binning,
}

impl Default for ObservationalSettings {
    fn default() -> Self {
        ObservationalSettings {
            bins: DEFAULT_DENSITY_BINS,
            smoothing_epsilon: DEFAULT_SMOOTHING,
            ratio_cap: DEFAULT_RATIO_CAP,
            binning: Binning::default(),
        }
    }
}

/// Decay factors `w_1..w_J` with `w_1 = 1` and `w_j = w_T` beyond the
/// truncation threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PositionWeights<T> {
    weights: Vec<T>,
    #[serde(rename = "T")]
    truncation: u32,
    source: WeightSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    settings: Option<ObservationalSettings>,
}

impl<T: Scalar> PositionWeights<T> {
    pub fn new(weights: Vec<T>, truncation: u32, source: WeightSource) -> Result<Self> {
        let w = PositionWeights {
            weights,
            truncation,
            source,
            settings: None,
        };
        w.check()?;
        Ok(w)
    }

    /// Weights given externally (e.g. the generator's own decay law).
    pub fn known(weights: Vec<T>) -> Result<Self> {
        let t = weights.len() as u32;
        Self::new(weights, t, WeightSource::Known)
    }

    /// No position bias: every weight is one.
    pub fn uniform(positions: usize) -> Self {
        PositionWeights {
            weights: vec![T::one(); positions.max(1)],
            truncation: positions.max(1) as u32,
            source: WeightSource::Known,
            settings: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SchemaMismatch(format!("position weights: {m}")));
        if self.weights.is_empty() || self.truncation == 0 {
            return bad("need at least one weight and T >= 1");
        }
        if self.weights[0] != T::one() {
            return bad("w_1 must equal 1");
        }
        if self.weights.iter().any(|w| !(*w > T::zero() && *w <= T::one())) {
            return bad("weights must lie in (0, 1]");
        }
        let t = self.truncation as usize;
        if t <= self.weights.len() && self.weights[t..].iter().any(|w| *w != self.weights[t - 1]) {
            return bad("weights beyond T must equal w_T");
        }
        Ok(())
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn source(&self) -> WeightSource {
        self.source
    }

    pub fn settings(&self) -> Option<&ObservationalSettings> {
        self.settings.as_ref()
    }

    /// `w_j` for a 1-based position; positions past the table reuse `w_T`
    /// when the table reaches `T`.
    pub fn weight(&self, position: u32) -> Result<T> {
        if position == 0 {
            return Err(Error::MissingWeightForPosition(position));
        }
        let idx = position as usize - 1;
        if let Some(w) = self.weights.get(idx) {
            return Ok(*w);
        }
        let t = self.truncation as usize;
        if t <= self.weights.len() {
            Ok(self.weights[t - 1])
        } else {
            Err(Error::MissingWeightForPosition(position))
        }
    }
}

/// Per-position scores and labels, positions 1..=J.
fn by_position<T: Scalar>(data: &ValidatedDataset<T>) -> Vec<(Vec<T>, Vec<u32>)> {
    let j_max = data.max_position() as usize;
    let mut out = vec![(Vec::new(), Vec::new()); j_max];
    for r in data.records() {
        let slot = &mut out[r.position as usize - 1];
        slot.0.push(r.score);
        slot.1.push(r.label.min(1));
    }
    out
}

/// `w_j = CTR(j) / CTR(1)` from slot-randomized logs.
pub fn estimate_weights_randomized<T: Scalar>(data: &ValidatedDataset<T>) -> Result<PositionWeights<T>> {
    let slots = by_position(data);
    let ctr = |j: usize| -> Result<f64> {
        let (_, labels) = &slots[j];
        if labels.is_empty() {
            return Err(Error::NoImpressionsAtPosition(j as u32 + 1));
        }
        Ok(labels.iter().map(|&y| y as f64).sum::<f64>() / labels.len() as f64)
    };
    let base = ctr(0)?;
    if base == 0.0 {
        return Err(Error::ZeroBaseCtr);
    }
    let mut weights = vec![T::one()];
    for j in 1..slots.len() {
        let c = ctr(j)?;
        if c == 0.0 {
            return Err(Error::NoPositivesAtPosition(j as u32 + 1));
        }
        weights.push(T::of((c / base).min(1.0)));
    }
    let t = weights.len() as u32;
    PositionWeights::new(weights, t, WeightSource::Randomized)
}

/// Smoothed histogram estimate of a score density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HistogramDensity<T> {
    pub bin_edges: Vec<T>,
    pub masses: Vec<T>,
    pub smoothing_epsilon: T,
}

impl<T: Scalar> HistogramDensity<T> {
    /// Index of the bin containing `score`; values outside the edges go to
    /// the nearest end bin.
    pub fn bin_of(&self, score: T) -> usize {
        let k = self.masses.len();
        self.bin_edges.partition_point(|e| *e <= score).clamp(1, k) - 1
    }

    pub fn mass_at(&self, score: T) -> T {
        self.masses[self.bin_of(score)]
    }
}

/// Relative bin frequencies of `scores`, with `epsilon` added to every bin
/// before renormalizing.
pub fn fit_histogram_density<T: Scalar>(
    scores: &[T],
    bin_edges: &[T],
    epsilon: T,
    position: u32,
) -> Result<HistogramDensity<T>> {
    if scores.is_empty() {
        return Err(Error::EmptyPosition(position));
    }
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::DegenerateDensity(position));
    }
    if epsilon < T::zero() {
        return Err(Error::InvalidParameter("smoothing epsilon must be >= 0".into()));
    }
    let mut h = HistogramDensity {
        bin_edges: bin_edges.to_vec(),
        masses: vec![T::zero(); bin_edges.len() - 1],
        smoothing_epsilon: epsilon,
    };
    let mut counts = vec![0usize; h.masses.len()];
    for &s in scores {
        counts[h.bin_of(s)] += 1;
    }
    let n = T::of_usize(scores.len());
    let raw: Vec<T> = counts.iter().map(|&c| T::of_usize(c) / n + epsilon).collect();
    let total: T = raw.iter().copied().sum();
    h.masses = raw.into_iter().map(|m| m / total).collect();
    Ok(h)
}

fn pair_edges<T: Scalar>(a: &[T], b: &[T], settings: &ObservationalSettings, position: u32) -> Result<Vec<T>> {
    let mut pooled: Vec<T> = a.iter().chain(b).copied().collect();
    pooled.sort_by(total_cmp);
    let (lo, hi) = (pooled[0], pooled[pooled.len() - 1]);
    if !(lo < hi) {
        return Err(Error::DegenerateDensity(position));
    }
    let k = settings.bins;
    let mut edges = match settings.binning {
        Binning::EqualWidth => (0..=k)
            .map(|i| lo + (hi - lo) * T::of(i as f64 / k as f64))
            .collect::<Vec<T>>(),
        Binning::EqualMass => {
            let n = pooled.len();
            let mut e: Vec<T> = (0..=k).map(|i| pooled[((i * (n - 1)) / k).min(n - 1)]).collect();
            e.dedup();
            e
        }
    };
    // make the top edge exclusive of nothing: the last bin absorbs the maximum
    let last = edges.len() - 1;
    edges[last] = hi + (hi - lo).abs().max(T::one()) * T::epsilon();
    if edges.len() < 2 {
        return Err(Error::DegenerateDensity(position));
    }
    Ok(edges)
}

/// Adjacent-pairwise importance-sampling estimate of the decay factors.
///
/// For `2 <= j <= T`,
/// `eta_j = mean_{pos j}[Y f_{j-1}(s) / f_j(s)] / mean_{pos j-1}[Y]` with
/// histogram densities on shared edges and the ratio clipped to
/// `[1/cap, cap]`; then `w_j = min(1, prod_{r=2}^{min(j,T)} eta_r)`.
pub fn estimate_weights_observational<T: Scalar>(
    data: &ValidatedDataset<T>,
    truncation: u32,
    settings: &ObservationalSettings,
) -> Result<PositionWeights<T>> {
    if truncation == 0 {
        return Err(Error::InvalidParameter("truncation T must be >= 1".into()));
    }
    if settings.bins == 0 || !(settings.ratio_cap >= 1.0) {
        return Err(Error::InvalidParameter("bins must be >= 1 and ratio cap >= 1".into()));
    }
    let slots = by_position(data);
    let j_max = slots.len();
    for (j, (scores, _)) in slots.iter().enumerate() {
        if scores.is_empty() {
            return Err(Error::NoImpressionsAtPosition(j as u32 + 1));
        }
    }
    let last = (truncation as usize).min(j_max);
    let eps = T::of(settings.smoothing_epsilon);
    let cap = T::of(settings.ratio_cap);
    let floor = T::one() / cap;

    let etas: Vec<Result<T>> = (2..=last)
        .into_par_iter()
        .map(|j| {
            let (prev_scores, prev_labels) = &slots[j - 2];
            let (scores, labels) = &slots[j - 1];
            let pos = j as u32;
            let positives_prev = prev_labels.iter().filter(|&&y| y > 0).count();
            if positives_prev == 0 {
                return Err(Error::NoPositivesAtPosition(pos - 1));
            }
            if !labels.iter().any(|&y| y > 0) {
                return Err(Error::NoPositivesAtPosition(pos));
            }
            let edges = pair_edges(prev_scores, scores, settings, pos)?;
            let f_prev = fit_histogram_density(prev_scores, &edges, eps, pos - 1)?;
            let f_cur = fit_histogram_density(scores, &edges, eps, pos)?;
            let mut num = T::zero();
            for (&s, &y) in scores.iter().zip(labels) {
                if y > 0 {
                    let k = f_cur.bin_of(s);
                    let (a, b) = (f_prev.masses[k], f_cur.masses[k]);
                    let ratio = if b > T::zero() { (a / b).max(floor).min(cap) } else { cap };
                    num = num + ratio;
                }
            }
            let num = num / T::of_usize(scores.len());
            let den = T::of_usize(positives_prev) / T::of_usize(prev_scores.len());
            Ok(num / den)
        })
        .collect();

    let mut weights = Vec::with_capacity(j_max);
    weights.push(T::one());
    let mut running = T::one();
    for eta in etas {
        running = running * eta?;
        weights.push(running.min(T::one()));
    }
    let w_t = *weights.last().unwrap();
    weights.resize(j_max, w_t);
    Ok(PositionWeights {
        weights,
        truncation,
        source: WeightSource::Observational,
        settings: Some(*settings),
    })
}
