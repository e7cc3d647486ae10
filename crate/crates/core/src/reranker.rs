//! Either trained reranker behind one scoring interface.

use serde::Serialize;

use crate::eodds::{EoddsModel, EODDS_FORMAT};
use crate::eopp::{blend, EoppModel, EOPP_FORMAT};
use crate::error::{Error, Result};
use crate::records::ImpressionRecord;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum FairModel<T> {
    Eopp(EoppModel<T>),
    Eodds(EoddsModel<T>),
}

#[derive(Serialize, serde::Deserialize)]
struct FormatProbe {
    format: String,
}

impl<T: Scalar> FairModel<T> {
    pub fn score_record(&self, record: &ImpressionRecord<T>) -> Result<T> {
        match self {
            FairModel::Eopp(m) => m.score(record.score, record.group),
            FairModel::Eodds(m) => m.score_record(record),
        }
    }

    /// The alpha-independent part of the fair score: the group-CDF value
    /// (EOpp) or the randomized `[0, 1)` score (EOdds).
    pub fn transform_record(&self, record: &ImpressionRecord<T>) -> Result<T> {
        match self {
            FairModel::Eopp(m) => m.transform(record.score, record.group),
            FairModel::Eodds(m) => {
                if !record.score.is_finite() {
                    return Err(Error::NonFiniteInput(record.score.as_f64()));
                }
                m.randomized_unit_score(record)
            }
        }
    }

    /// Fair score from a precomputed [`Self::transform_record`] value,
    /// identical to [`Self::score_record`] for the same record.
    pub fn finish_score(&self, raw: T, transformed: T) -> Result<T> {
        let (alpha, rescale, rescaler) = match self {
            FairModel::Eopp(m) => (m.alpha, m.rescale, &m.rescaler),
            FairModel::Eodds(m) => (m.alpha, m.rescale, &m.rescaler),
        };
        if alpha == T::zero() {
            return Ok(raw);
        }
        let t = if rescale.applies(alpha.as_f64()) {
            rescaler.apply(transformed)?
        } else {
            transformed
        };
        Ok(blend(alpha, t, raw))
    }

    pub fn alpha(&self) -> T {
        match self {
            FairModel::Eopp(m) => m.alpha,
            FairModel::Eodds(m) => m.alpha,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Ok(match self {
            FairModel::Eopp(m) => FairModel::Eopp(m.with_alpha(alpha)?),
            FairModel::Eodds(m) => FairModel::Eodds(m.with_alpha(alpha)?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FairModel::Eopp(_) => "eopp",
            FairModel::Eodds(_) => "eodds",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            FairModel::Eopp(m) => m.to_json(),
            FairModel::Eodds(m) => m.to_json(),
        }
    }

    /// Loads either model, dispatching on its `format` field.
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: FormatProbe = serde_json::from_str(text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        match probe.format.as_str() {
            EOPP_FORMAT => Ok(FairModel::Eopp(EoppModel::from_json(text)?)),
            EODDS_FORMAT => Ok(FairModel::Eodds(EoddsModel::from_json(text)?)),
            other => Err(Error::SchemaMismatch(format!("unknown model format {other}"))),
        }
    }
}
