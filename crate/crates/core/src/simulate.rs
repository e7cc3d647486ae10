//! Synthetic recommender logs with known counterfactual labels.
//!
//! Items carry a group `C ~ Bernoulli(group_prob)`, a top-slot label
//! `Y(1) | C ~ Bernoulli(pos_rate[C])` and a relevance
//! `R ~ N(0.6 Y(1) + 2 C, relevance_noise_var) + (1 - C) U[0, 1 + Y(1)]`.
//! Each query samples `slots` distinct items, scores them with
//! `s = R + N(0, score_noise_var)`, ranks by descending score and reveals
//! `Y(j) = Y(1) * Bernoulli(w_j)` with `w_j = 1 / log2(1 + j)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{validate_dataset, GroupId, ImpressionRecord, Schema, ValidatedDataset};
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;

/// Positive-response decay used by the generator.
pub fn true_position_bias(position: u32) -> f64 {
    1.0 / (1.0 + position as f64).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub population_size: usize,
    /// P(C = 1).
    pub group_prob: f64,
    /// P(Y(1) = 1 | C = c), indexed by c.
    pub pos_rate_by_group: [f64; 2],
    /// Variance of the relevance noise.
    pub relevance_noise_var: f64,
    /// Variance of the per-impression score noise.
    pub score_noise_var: f64,
    pub slots: usize,
    pub n_queries: usize,
    pub seed: u64,
    /// Distinguishes independent logs drawn from one population (0 = training).
    #[serde(default)]
    pub split: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            population_size: 50_000,
            group_prob: 0.6,
            pos_rate_by_group: [0.4, 0.5],
            relevance_noise_var: 0.5,
            score_noise_var: 0.1,
            slots: 50,
            n_queries: 100_000,
            seed: 7,
            split: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.group_prob) || !self.pos_rate_by_group.iter().all(|p| prob(*p)) {
            return Err(Error::InvalidParameter("probabilities must lie in [0, 1]".into()));
        }
        if !(self.relevance_noise_var > 0.0 && self.score_noise_var > 0.0) {
            return Err(Error::InvalidParameter("noise variances must be positive".into()));
        }
        if self.population_size == 0 || self.slots == 0 {
            return Err(Error::InvalidParameter("population and slots must be positive".into()));
        }
        if self.slots > self.population_size {
            return Err(Error::SlotsExceedPopulation {
                slots: self.slots,
                population: self.population_size,
            });
        }
        Ok(())
    }

    /// Same population and seed, independent query draws.
    pub fn with_split(&self, split: u64, n_queries: usize) -> SimConfig {
        SimConfig {
            split,
            n_queries,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimulatedItem<T> {
    pub item_id: u64,
    pub group: GroupId,
    /// Y(1), the response the item would get in the top slot.
    pub counterfactual_label: u8,
    pub relevance: T,
}

/// Item ground truth keyed by item id.
pub type Truth<T> = BTreeMap<u64, SimulatedItem<T>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog<T> {
    /// Contiguous by query, ordered by position within a query.
    pub records: Vec<ImpressionRecord<T>>,
    pub truth: Truth<T>,
}

pub fn generate_population<T: Scalar>(config: &SimConfig) -> Result<Vec<SimulatedItem<T>>> {
    config.validate()?;
    let mut rng = substream(config.seed, Stream::Population, 0, 0);
    let noise = Normal::new(0.0, config.relevance_noise_var.sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let items = (0..config.population_size as u64)
        .map(|item_id| {
            let c = rng.random_bool(config.group_prob) as u32;
            let y = rng.random_bool(config.pos_rate_by_group[c as usize]) as u8;
            let mut r = 0.6 * y as f64 + 2.0 * c as f64 + noise.sample(&mut rng);
            if c == 0 {
                r += rng.random_range(0.0..(1.0 + y as f64));
            }
            SimulatedItem {
                item_id,
                group: GroupId(c),
                counterfactual_label: y,
                relevance: T::of(r),
            }
        })
        .collect();
    Ok(items)
}

/// Ranks `(item, score)` pairs by descending score, ties by ascending item id.
fn rank_desc<T: Scalar>(pairs: &mut [(u64, T)]) {
    pairs.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
}

fn realize_label(y1: u8, position: u32, u: f64) -> u32 {
    (y1 == 1 && u < true_position_bias(position)) as u32
}

pub fn generate_queries<T: Scalar>(
    population: &[SimulatedItem<T>],
    config: &SimConfig,
) -> Result<SimLog<T>> {
    config.validate()?;
    if config.slots > population.len() {
        return Err(Error::SlotsExceedPopulation {
            slots: config.slots,
            population: population.len(),
        });
    }
    let noise = Normal::new(0.0, config.score_noise_var.sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let per_query: Vec<Vec<ImpressionRecord<T>>> = (0..config.n_queries as u64)
        .into_par_iter()
        .map(|q| {
            let mut rng = substream(config.seed, Stream::QueryCandidates, q, config.split);
            let picks = rand::seq::index::sample(&mut rng, population.len(), config.slots);
            let mut scored: Vec<(u64, T)> = picks
                .iter()
                .map(|i| {
                    let item = &population[i];
                    let s = item.relevance.as_f64() + noise.sample(&mut rng);
                    (i as u64, T::of(s))
                })
                .collect();
            rank_desc(&mut scored);
            let mut labels = substream(config.seed, Stream::Labels, q, config.split);
            scored
                .iter()
                .enumerate()
                .map(|(rank, &(idx, score))| {
                    let item = &population[idx as usize];
                    let position = rank as u32 + 1;
                    let u: f64 = labels.random();
                    ImpressionRecord {
                        query_id: q,
                        item_id: item.item_id,
                        group: item.group,
                        score,
                        position,
                        label: realize_label(item.counterfactual_label, position, u),
                    }
                })
                .collect()
        })
        .collect();
    Ok(SimLog {
        records: per_query.into_iter().flatten().collect(),
        truth: population.iter().map(|it| (it.item_id, *it)).collect(),
    })
}

/// Splits records that are contiguous by query into per-query slices.
pub fn query_slices<T>(records: &[ImpressionRecord<T>]) -> Vec<&[ImpressionRecord<T>]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].query_id != records[start].query_id {
            out.push(&records[start..i]);
            start = i;
        }
    }
    out
}

/// Re-ranks every query by `scorer` and redraws the observed labels from the
/// stored `Y(1)` under the new positions.
///
/// `round` selects an independent label substream; the same round always
/// reproduces the same draws.
pub fn rerank_and_relabel<T, F>(
    log: &SimLog<T>,
    scorer: F,
    config: &SimConfig,
    round: u64,
) -> Result<SimLog<T>>
where
    T: Scalar,
    F: Fn(&ImpressionRecord<T>) -> Result<T> + Sync,
{
    let scores = log
        .records
        .par_iter()
        .map(|r| {
            scorer(r).map_err(|e| Error::ScorerFailure {
                query_id: r.query_id,
                item_id: r.item_id,
                message: format!("{}: {e}", e.name()),
            })
        })
        .collect::<Result<Vec<T>>>()?;
    rerank_by_scores(log, &scores, config, round)
}

/// As [`rerank_and_relabel`], with `scores[i]` the new score of
/// `log.records[i]`.
pub fn rerank_by_scores<T: Scalar>(
    log: &SimLog<T>,
    scores: &[T],
    config: &SimConfig,
    round: u64,
) -> Result<SimLog<T>> {
    if scores.len() != log.records.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} records",
            scores.len(),
            log.records.len()
        )));
    }
    let queries = query_slices(&log.records);
    let mut offsets = Vec::with_capacity(queries.len());
    let mut start = 0;
    for q in &queries {
        offsets.push(start);
        start += q.len();
    }
    let per_query: Result<Vec<Vec<ImpressionRecord<T>>>> = queries
        .par_iter()
        .zip(offsets.par_iter())
        .map(|(rows, &offset)| {
            let mut rescored: Vec<(ImpressionRecord<T>, T)> = rows
                .iter()
                .zip(&scores[offset..offset + rows.len()])
                .map(|(r, s)| (*r, *s))
                .collect();
            rescored.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.item_id.cmp(&b.0.item_id))
            });
            let qid = rows[0].query_id;
            let mut rng = substream(config.seed, Stream::Relabel, qid, round);
            rescored
                .into_iter()
                .enumerate()
                .map(|(rank, (r, s))| {
                    let y1 = log
                        .truth
                        .get(&r.item_id)
                        .ok_or(Error::MissingTruth(r.item_id))?
                        .counterfactual_label;
                    let position = rank as u32 + 1;
                    let u: f64 = rng.random();
                    Ok(ImpressionRecord {
                        score: s,
                        position,
                        label: realize_label(y1, position, u),
                        ..r
                    })
                })
                .collect()
        })
        .collect();
    Ok(SimLog {
        records: per_query?.into_iter().flatten().collect(),
        truth: log.truth.clone(),
    })
}

impl<T: Scalar> SimLog<T> {
    /// Validates the log against the binary two-group schema.
    pub fn dataset(&self) -> Result<ValidatedDataset<T>> {
        validate_dataset(
            self.records.clone(),
            &Schema::with_groups(1, vec![GroupId(0), GroupId(1)]),
        )
    }

    pub fn y1(&self, item_id: u64) -> Result<u8> {
        self.truth
            .get(&item_id)
            .map(|t| t.counterfactual_label)
            .ok_or(Error::MissingTruth(item_id))
    }
}
