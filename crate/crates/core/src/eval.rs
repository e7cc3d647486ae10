//! Fairness and performance metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eodds::ConditionalBinProbs;
use crate::error::{Error, Result};
use crate::records::{GroupId, ImpressionRecord};
use crate::reranker::FairModel;
use crate::scalar::{total_cmp, Scalar};
use crate::simulate::{rerank_by_scores, SimConfig, SimLog};

/// Two-sample Kolmogorov-Smirnov distance: `sup |F_a - F_b|` over the pooled
/// sample points, with right-continuous empirical CDFs.
pub fn ks_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| total_cmp(x, y));
    b.sort_by(|x, y| total_cmp(x, y));
    Ok(ks_sorted(&a, &b))
}

fn ks_sorted<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => if x <= y { x } else { y },
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Per label, the largest pairwise KS distance between groups' score
/// samples.
pub fn unfairness_report<T: Scalar>(records: &[ImpressionRecord<T>]) -> Result<BTreeMap<u32, f64>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut samples: BTreeMap<(u32, GroupId), Vec<T>> = BTreeMap::new();
    let mut groups: Vec<GroupId> = records.iter().map(|r| r.group).collect();
    groups.sort();
    groups.dedup();
    if groups.len() < 2 {
        return Err(Error::SingleGroup);
    }
    let max_label = records.iter().map(|r| r.label).max().unwrap_or(0).max(1);
    for r in records {
        samples.entry((r.label, r.group)).or_default().push(r.score);
    }
    let mut out = BTreeMap::new();
    for y in 0..=max_label {
        let mut sorted = Vec::with_capacity(groups.len());
        for &g in &groups {
            let mut s = samples.remove(&(y, g)).ok_or(Error::EmptyStratum { group: g, label: y })?;
            s.par_sort_unstable_by(|a, b| total_cmp(a, b));
            sorted.push(s);
        }
        let mut worst = 0.0f64;
        for i in 0..sorted.len() {
            for j in i + 1..sorted.len() {
                worst = worst.max(ks_sorted(&sorted[i], &sorted[j]));
            }
        }
        out.insert(y, worst);
    }
    Ok(out)
}

/// Share of records with a positive label.
pub fn ctr<T>(records: &[ImpressionRecord<T>]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(records.iter().filter(|r| r.label > 0).count() as f64 / records.len() as f64)
}

/// Interval approximation of the AUC:
/// `sum_c P(c) sum_k P(k | c, Y=0) sum_{k' >= k} P(k' | c, Y=1)`.
pub fn riemann_auc<T: Scalar>(probs: &ConditionalBinProbs<T>, group_priors: &[T]) -> Result<f64> {
    if probs.labels != 2 {
        return Err(Error::NonBinaryLabels);
    }
    if group_priors.len() != probs.groups.len() {
        return Err(Error::InconsistentDimensions(format!(
            "{} priors for {} groups",
            group_priors.len(),
            probs.groups.len()
        )));
    }
    let mut auc = 0.0;
    for (g, prior) in group_priors.iter().enumerate() {
        let pos = probs.row(g, 1);
        let mut tail = 0.0;
        let mut acc = 0.0;
        for k in (0..probs.bins).rev() {
            tail += pos[k].as_f64();
            acc += probs.prob(g, 0, k).as_f64() * tail;
        }
        auc += prior.as_f64() * acc;
    }
    Ok(auc)
}

/// Per group, observed positive rate divided by the counterfactual
/// top-slot positive rate `P(Y(1) = 1 | C = c)`.
pub fn exposure_parity<T: Scalar>(log: &SimLog<T>) -> Result<BTreeMap<GroupId, f64>> {
    if log.records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut tallies: BTreeMap<GroupId, (u64, u64, u64)> = BTreeMap::new();
    for r in &log.records {
        let y1 = log.y1(r.item_id)?;
        let t = tallies.entry(r.group).or_default();
        t.0 += 1;
        t.1 += (r.label > 0) as u64;
        t.2 += y1 as u64;
    }
    Ok(tallies
        .into_iter()
        .map(|(g, (n, obs, cf))| {
            let v_obs = obs as f64 / n as f64;
            let m_c = cf as f64 / n as f64;
            (g, v_obs / m_c)
        })
        .collect())
}

/// Largest `|r_c - mean| / mean` over the ratios.
pub fn max_relative_deviation(ratios: &BTreeMap<GroupId, f64>) -> f64 {
    let mean = ratios.values().sum::<f64>() / ratios.len() as f64;
    ratios.values().map(|r| (r - mean).abs() / mean).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ks_by_label: BTreeMap<u32, f64>,
    pub ctr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_riemann: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exposure_ratios: Option<BTreeMap<GroupId, f64>>,
}

/// KS and CTR of a log, plus exposure ratios when truth is attached.
pub fn evaluate_log<T: Scalar>(log: &SimLog<T>) -> Result<EvalReport> {
    Ok(EvalReport {
        ks_by_label: unfairness_report(&log.records)?,
        ctr: ctr(&log.records)?,
        auc_riemann: None,
        exposure_ratios: if log.truth.is_empty() { None } else { Some(exposure_parity(log)?) },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub alpha: f64,
    pub ks_pos: f64,
    pub ks_neg: f64,
    pub ctr: f64,
}

/// Re-ranks `validation` under the model blended at each alpha and reports
/// the resulting fairness and click-through. The i-th alpha relabels with
/// label round `i`.
pub fn tradeoff_sweep<T: Scalar>(
    model: &FairModel<T>,
    validation: &SimLog<T>,
    config: &SimConfig,
    alphas: &[f64],
) -> Result<Vec<TradeoffRow>> {
    let transformed = validation
        .records
        .par_iter()
        .map(|r| model.transform_record(r))
        .collect::<Result<Vec<T>>>()?;
    alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let blended = model.with_alpha(alpha)?;
            let scores = validation
                .records
                .par_iter()
                .zip(transformed.par_iter())
                .map(|(r, &t)| blended.finish_score(r.score, t))
                .collect::<Result<Vec<T>>>()?;
            let relabeled = rerank_by_scores(validation, &scores, config, i as u64)?;
            let ks = unfairness_report(&relabeled.records)?;
            Ok(TradeoffRow {
                alpha,
                ks_pos: ks[&1],
                ks_neg: ks[&0],
                ctr: ctr(&relabeled.records)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!((ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ks_distance::<f64>(&[], &[1.0]).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn ctr_counts() {
        let recs: Vec<ImpressionRecord<f64>> = (0..10)
            .map(|i| ImpressionRecord { query_id: 0, item_id: i, group: GroupId(0), score: 0.0, position: i as u32 + 1, label: (i < 3) as u32 })
            .collect();
        assert!((ctr(&recs).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn riemann_auc_examples() {
        let g = vec![GroupId(0)];
        let sep = ConditionalBinProbs::from_parts(g.clone(), vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]], vec![vec![0.5, 0.5]], vec![1.0]).unwrap();
        assert_eq!(riemann_auc(&sep, &[1.0]).unwrap(), 1.0);
        let one = ConditionalBinProbs::from_parts(g.clone(), vec![vec![vec![1.0], vec![1.0]]], vec![vec![1.0]], vec![1.0]).unwrap();
        assert_eq!(riemann_auc(&one, &[1.0]).unwrap(), 1.0);
        let k = 100;
        let u = vec![1.0 / k as f64; k];
        let uni = ConditionalBinProbs::from_parts(g.clone(), vec![vec![u.clone(), u.clone()]], vec![u], vec![1.0]).unwrap();
        assert!((riemann_auc(&uni, &[1.0]).unwrap() - 101.0 / 200.0).abs() < 1e-12);
        let three = ConditionalBinProbs::from_parts(g, vec![vec![vec![1.0], vec![1.0], vec![1.0]]], vec![vec![1.0]], vec![1.0]).unwrap();
        assert_eq!(riemann_auc(&three, &[1.0]).unwrap_err(), Error::NonBinaryLabels);
    }
}
