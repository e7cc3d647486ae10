//! Position-bias-adjusted equality-of-opportunity reranker.
//!
//! Training builds, per group, the CDF of positive-label scores with each
//! sample weighted by `1 / w_position`. Scoring maps a score through its
//! group's CDF, optionally back onto the original score scale via
//! `F^-1(F~(.))`, and blends with the raw score by `alpha`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::{empirical_cdf, unweighted_cdf, WeightedEmpiricalCdf};
use crate::error::{Error, Result};
use crate::position_bias::PositionWeights;
use crate::records::{GroupId, ValidatedDataset};
use crate::scalar::Scalar;

pub const EOPP_FORMAT: &str = "fairrank.eopp/1";

/// When to map transformed scores back to the original scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Rescale {
    /// Rescale only when blending (`alpha < 1`).
    #[default]
    Auto,
    Always,
    Never,
}

impl Rescale {
    pub fn applies(self, alpha: f64) -> bool {
        match self {
            Rescale::Auto => alpha < 1.0,
            Rescale::Always => true,
            Rescale::Never => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EoppOptions {
    pub alpha: f64,
    pub rescale: Rescale,
    /// Store CDFs at this cumulative-mass resolution instead of exactly.
    pub discretize: Option<f64>,
}

impl Default for EoppOptions {
    fn default() -> Self {
        EoppOptions {
            alpha: 1.0,
            rescale: Rescale::Auto,
            discretize: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroupCdf<T> {
    pub group: GroupId,
    pub cdf: WeightedEmpiricalCdf<T>,
}

/// Maps `[0, 1]` transformed scores back to the raw score scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Rescaler<T> {
    /// CDF of raw training scores (F).
    pub pooled_pre_cdf: WeightedEmpiricalCdf<T>,
    /// CDF of transformed training scores (F~).
    pub pooled_post_cdf: WeightedEmpiricalCdf<T>,
}

impl<T: Scalar> Rescaler<T> {
    pub fn apply(&self, transformed: T) -> Result<T> {
        self.pooled_pre_cdf.quantile(self.pooled_post_cdf.eval(transformed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EoppModel<T> {
    pub format: String,
    pub groups: Vec<GroupId>,
    pub per_group_cdf: Vec<GroupCdf<T>>,
    pub rescaler: Rescaler<T>,
    pub alpha: T,
    pub rescale: Rescale,
    pub position_weights: PositionWeights<T>,
}

/// Trains the weighted-CDF transform on a logged dataset.
pub fn train_eopp<T: Scalar>(
    data: &ValidatedDataset<T>,
    weights: &PositionWeights<T>,
    options: &EoppOptions,
) -> Result<EoppModel<T>> {
    check_alpha(options.alpha)?;
    weights.check()?;
    let groups = data.groups().to_vec();
    let records = data.records();

    let per_group: Vec<Result<GroupCdf<T>>> = groups
        .par_iter()
        .map(|&g| {
            let mut scores = Vec::new();
            let mut inv_w = Vec::new();
            for r in records.iter().filter(|r| r.group == g && r.label > 0) {
                scores.push(r.score);
                inv_w.push(T::one() / weights.weight(r.position)?);
            }
            if scores.is_empty() {
                return Err(Error::NoPositivesInGroup(g));
            }
            Ok(GroupCdf {
                group: g,
                cdf: empirical_cdf(&scores, &inv_w)?,
            })
        })
        .collect();
    let per_group_cdf = per_group.into_iter().collect::<Result<Vec<_>>>()?;

    let raw: Vec<T> = records.iter().map(|r| r.score).collect();
    let pooled_pre_cdf = unweighted_cdf(&raw)?;
    let transformed: Vec<T> = records
        .iter()
        .map(|r| {
            let gc = per_group_cdf.iter().find(|gc| gc.group == r.group).expect("trained group");
            gc.cdf.eval(r.score)
        })
        .collect();
    let pooled_post_cdf = unweighted_cdf(&transformed)?;

    let mut model = EoppModel {
        format: EOPP_FORMAT.to_string(),
        groups,
        per_group_cdf,
        rescaler: Rescaler {
            pooled_pre_cdf,
            pooled_post_cdf,
        },
        alpha: T::of(options.alpha),
        rescale: options.rescale,
        position_weights: weights.clone(),
    };
    if let Some(step) = options.discretize {
        for gc in model.per_group_cdf.iter_mut() {
            gc.cdf = gc.cdf.discretize(step)?;
        }
        model.rescaler.pooled_pre_cdf = model.rescaler.pooled_pre_cdf.discretize(step)?;
        model.rescaler.pooled_post_cdf = model.rescaler.pooled_post_cdf.discretize(step)?;
    }
    Ok(model)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} must lie in [0, 1]")));
    }
    Ok(())
}

/// Mixes a transformed score with the raw one.
pub fn blend<T: Scalar>(alpha: T, transformed: T, raw: T) -> T {
    alpha * transformed + (T::one() - alpha) * raw
}

impl<T: Scalar> EoppModel<T> {
    pub fn group_cdf(&self, group: GroupId) -> Result<&WeightedEmpiricalCdf<T>> {
        self.per_group_cdf
            .iter()
            .find(|gc| gc.group == group)
            .map(|gc| &gc.cdf)
            .ok_or(Error::UnknownGroup(group))
    }

    /// Same model with a different blend weight.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(EoppModel {
            alpha: T::of(alpha),
            ..self.clone()
        })
    }

    /// `F*_c(score)` without rescaling or blending.
    pub fn transform(&self, score: T, group: GroupId) -> Result<T> {
        if !score.is_finite() {
            return Err(Error::NonFiniteInput(score.as_f64()));
        }
        Ok(self.group_cdf(group)?.eval(score))
    }

    pub fn score(&self, score: T, group: GroupId) -> Result<T> {
        score_eopp(self, score, group)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: EoppModel<T> =
            serde_json::from_str(text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    pub fn check(&self) -> Result<()> {
        if self.format != EOPP_FORMAT {
            return Err(Error::SchemaMismatch(format!(
                "expected format {EOPP_FORMAT}, found {}",
                self.format
            )));
        }
        for g in &self.groups {
            if !self.per_group_cdf.iter().any(|gc| gc.group == *g) {
                return Err(Error::SchemaMismatch(format!("no CDF for group {g}")));
            }
        }
        if self.per_group_cdf.len() != self.groups.len() {
            return Err(Error::SchemaMismatch("CDF entries do not match the group list".into()));
        }
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::SchemaMismatch(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        for gc in &self.per_group_cdf {
            gc.cdf.check()?;
        }
        self.rescaler.pooled_pre_cdf.check()?;
        self.rescaler.pooled_post_cdf.check()?;
        self.position_weights.check()
    }
}

/// Fair score for one item:
/// `alpha * R(F*_c(score)) + (1 - alpha) * score`, where `R` is the
/// back-rescaling map when enabled and the identity otherwise.
pub fn score_eopp<T: Scalar>(model: &EoppModel<T>, score: T, group: GroupId) -> Result<T> {
    let u = model.transform(score, group)?;
    let alpha = model.alpha;
    if alpha == T::zero() {
        return Ok(score);
    }
    let t = if model.rescale.applies(alpha.as_f64()) {
        model.rescaler.apply(u)?
    } else {
        u
    };
    Ok(blend(alpha, t, score))
}

pub fn export_model<T: Scalar>(model: &EoppModel<T>) -> Result<String> {
    model.to_json()
}

pub fn import_model<T: Scalar>(text: &str) -> Result<EoppModel<T>> {
    EoppModel::from_json(text)
}
