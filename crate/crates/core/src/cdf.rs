//! Weighted empirical CDFs, their generalized inverse, and the logit map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Scalar};

/// Maps a real score into (0, 1) without changing its rank.
pub fn inverse_logit<T: Scalar>(score: T) -> Result<T> {
    if !score.is_finite() {
        return Err(Error::NonFiniteInput(score.as_f64()));
    }
    // the two branches avoid exp overflow for large |score|
    let one = T::one();
    Ok(if score >= T::zero() {
        one / (one + (-score).exp())
    } else {
        let e = score.exp();
        e / (one + e)
    })
}

/// Inverse of [`inverse_logit`] on (0, 1).
pub fn logit<T: Scalar>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::NonFiniteInput(p.as_f64()));
    }
    Ok((p / (T::one() - p)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Exact right-continuous step function.
    #[default]
    Step,
    /// Piecewise-linear between stored knots (discretized storage).
    Linear,
}

/// Step-function estimate of a distribution from weighted samples.
///
/// `F(t)` is the cumulative mass at the largest knot `<= t` and zero below
/// the first knot. Tied samples share a single knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WeightedEmpiricalCdf<T> {
    knots: Vec<T>,
    cum_mass: Vec<T>,
    total_weight: T,
    #[serde(default)]
    interpolation: Interpolation,
}

/// Builds the weighted empirical CDF of `samples`.
pub fn empirical_cdf<T: Scalar>(samples: &[T], weights: &[T]) -> Result<WeightedEmpiricalCdf<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if samples.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples vs {} weights",
            samples.len(),
            weights.len()
        )));
    }
    let mut pairs = Vec::with_capacity(samples.len());
    for (index, (&s, &w)) in samples.iter().zip(weights).enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFiniteInput(s.as_f64()));
        }
        if !(w > T::zero()) || !w.is_finite() {
            return Err(Error::NonPositiveWeight {
                index,
                value: w.as_f64(),
            });
        }
        pairs.push((s, w));
    }
    pairs.sort_by(|a, b| total_cmp(&a.0, &b.0));
    Ok(from_sorted_pairs(&pairs))
}

/// Unit-weight convenience wrapper around [`empirical_cdf`].
pub fn unweighted_cdf<T: Scalar>(samples: &[T]) -> Result<WeightedEmpiricalCdf<T>> {
    empirical_cdf(samples, &vec![T::one(); samples.len()])
}

fn from_sorted_pairs<T: Scalar>(pairs: &[(T, T)]) -> WeightedEmpiricalCdf<T> {
    let mut knots: Vec<T> = Vec::new();
    let mut mass: Vec<T> = Vec::new();
    for &(s, w) in pairs {
        match knots.last() {
            Some(&k) if k == s => *mass.last_mut().unwrap() = *mass.last().unwrap() + w,
            _ => {
                knots.push(s);
                mass.push(w);
            }
        }
    }
    let mut running = T::zero();
    for m in mass.iter_mut() {
        running = running + *m;
        *m = running;
    }
    let total = running;
    for m in mass.iter_mut() {
        *m = *m / total;
    }
    *mass.last_mut().unwrap() = T::one();
    WeightedEmpiricalCdf {
        knots,
        cum_mass: mass,
        total_weight: total,
        interpolation: Interpolation::Step,
    }
}

impl<T: Scalar> WeightedEmpiricalCdf<T> {
    /// Rebuilds a CDF from stored parts, checking the invariants.
    pub fn from_parts(
        knots: Vec<T>,
        cum_mass: Vec<T>,
        total_weight: T,
        interpolation: Interpolation,
    ) -> Result<Self> {
        let cdf = WeightedEmpiricalCdf {
            knots,
            cum_mass,
            total_weight,
            interpolation,
        };
        cdf.check()?;
        Ok(cdf)
    }

    /// Verifies ordering, normalization and finiteness.
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SchemaMismatch(format!("cdf: {m}")));
        if self.knots.is_empty() || self.knots.len() != self.cum_mass.len() {
            return bad("knots and masses must be nonempty and of equal length");
        }
        if !(self.total_weight > T::zero()) {
            return bad("total weight must be positive");
        }
        if self.knots.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("knots must be strictly increasing");
        }
        if self.cum_mass.windows(2).any(|w| w[0] > w[1])
            || self.cum_mass.iter().any(|m| !(*m >= T::zero() && *m <= T::one()))
        {
            return bad("cumulative mass must be nondecreasing in [0, 1]");
        }
        let last = self.cum_mass.last().unwrap().as_f64();
        if (last - 1.0).abs() > 1e-12 {
            return bad("cumulative mass must end at 1");
        }
        Ok(())
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn cum_mass(&self) -> &[T] {
        &self.cum_mass
    }

    pub fn total_weight(&self) -> T {
        self.total_weight
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// F(t). Scores outside the support clamp to 0 or 1.
    pub fn eval(&self, t: T) -> T {
        let n = self.knots.len();
        let idx = self.knots.partition_point(|k| *k <= t);
        if idx == 0 {
            return T::zero();
        }
        match self.interpolation {
            Interpolation::Step => self.cum_mass[idx - 1],
            Interpolation::Linear => {
                if idx == n {
                    return T::one();
                }
                let (k0, k1) = (self.knots[idx - 1], self.knots[idx]);
                let (m0, m1) = (self.cum_mass[idx - 1], self.cum_mass[idx]);
                m0 + (t - k0) / (k1 - k0) * (m1 - m0)
            }
        }
    }

    /// Generalized inverse `inf { t : F(t) >= u }`; `u = 0` gives the first knot.
    pub fn quantile(&self, u: T) -> Result<T> {
        if !(u >= T::zero() && u <= T::one()) {
            return Err(Error::OutOfRangeU(u.as_f64()));
        }
        let idx = self.cum_mass.partition_point(|m| *m < u);
        let idx = idx.min(self.knots.len() - 1);
        Ok(match self.interpolation {
            Interpolation::Step => self.knots[idx],
            Interpolation::Linear => {
                if idx == 0 {
                    self.knots[0]
                } else {
                    let (k0, k1) = (self.knots[idx - 1], self.knots[idx]);
                    let (m0, m1) = (self.cum_mass[idx - 1], self.cum_mass[idx]);
                    if m1 > m0 {
                        k0 + (u - m0) / (m1 - m0) * (k1 - k0)
                    } else {
                        k1
                    }
                }
            }
        })
    }

    /// Compact copy keeping one knot per `step` of cumulative mass, evaluated
    /// by monotone linear interpolation between the kept knots.
    pub fn discretize(&self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "discretization step {step} must lie in (0, 1)"
            )));
        }
        let n = self.knots.len();
        let mut knots = Vec::new();
        let mut mass = Vec::new();
        let mut last_cell = -1i64;
        for i in 0..n {
            let cell = (self.cum_mass[i].as_f64() / step).floor() as i64;
            if i == 0 || i + 1 == n || cell > last_cell {
                knots.push(self.knots[i]);
                mass.push(self.cum_mass[i]);
                last_cell = cell;
            }
        }
        Self::from_parts(knots, mass, self.total_weight, Interpolation::Linear)
    }
}
