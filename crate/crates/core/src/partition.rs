use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Intervals `[c_k, c_{k+1})` covering `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScorePartition<T> {
    cut_points: Vec<T>,
}

impl<T: Scalar> ScorePartition<T> {
    pub fn equal_width(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameter("partition needs at least one bin".into()));
        }
        let mut cut_points: Vec<T> = (0..=bins)
            .map(|i| T::of(i as f64 / bins as f64))
            .collect();
        cut_points[0] = T::zero();
        cut_points[bins] = T::one();
        Ok(ScorePartition { cut_points })
    }

    pub fn from_cut_points(cut_points: Vec<T>) -> Result<Self> {
        let ok = cut_points.len() >= 2
            && cut_points[0] == T::zero()
            && *cut_points.last().unwrap() == T::one()
            && cut_points.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidParameter(
                "cut points must increase strictly from 0 to 1".into(),
            ));
        }
        Ok(ScorePartition { cut_points })
    }

    pub fn cut_points(&self) -> &[T] {
        &self.cut_points
    }

    /// Number of intervals K.
    pub fn bins(&self) -> usize {
        self.cut_points.len() - 1
    }

    pub fn bin_of(&self, score: T) -> Result<usize> {
        if !(score >= T::zero() && score < T::one()) {
            return Err(Error::ScoreOutOfUnitInterval(score.as_f64()));
        }
        Ok(self.cut_points.partition_point(|c| *c <= score) - 1)
    }

    pub fn bounds(&self, bin: usize) -> (T, T) {
        (self.cut_points[bin], self.cut_points[bin + 1])
    }

    pub fn midpoint(&self, bin: usize) -> T {
        let (lo, hi) = self.bounds(bin);
        (lo + hi) / T::of(2.0)
    }
}
