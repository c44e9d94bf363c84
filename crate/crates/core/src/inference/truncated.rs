//! Normal distribution truncated to a finite union of intervals.

use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};

use super::normal::{log_mass, log_sum};

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedNormal<'s> {
    pub mean: f64,
    pub sd: f64,
    pub support: &'s IntervalSet,
}

impl<'s> TruncatedNormal<'s> {
    pub fn new(mean: f64, sd: f64, support: &'s IntervalSet) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "standard deviation must be positive, got {sd}"
            )));
        }
        if !mean.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mean must be finite, got {mean}"
            )));
        }
        Ok(Self { mean, sd, support })
    }

    /// `ln` of the untruncated probability of `set`.
    pub fn log_prob(&self, set: &IntervalSet) -> f64 {
        log_sum(
            set.pieces()
                .iter()
                .map(|iv| log_mass((iv.lo - self.mean) / self.sd, (iv.hi - self.mean) / self.sd)),
        )
    }

    /// `ln P(support)`, an error when the support carries no mass.
    pub fn log_total(&self) -> Result<f64> {
        let lt = self.log_prob(self.support);
        if lt == f64::NEG_INFINITY {
            return Err(Error::DegenerateTruncation);
        }
        Ok(lt)
    }

    /// `ln P(S and <= x)` and `ln P(S and > x)`.
    pub fn log_split(&self, x: f64) -> (f64, f64) {
        let below = self
            .support
            .intersect(&IntervalSet::from_interval(Interval::below(x, true)));
        let above = self
            .support
            .intersect(&IntervalSet::from_interval(Interval::above(x, false)));
        (self.log_prob(&below), self.log_prob(&above))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let (lb, la) = self.log_split(x);
        if lb == f64::NEG_INFINITY && la == f64::NEG_INFINITY {
            return Err(Error::DegenerateTruncation);
        }
        Ok(if lb >= la {
            1.0 / (1.0 + (la - lb).exp())
        } else {
            let r = (lb - la).exp();
            r / (1.0 + r)
        })
    }

    /// Probability of the part of the support at distance at least `r` from `center`.
    pub fn outer_prob(&self, center: f64, r: f64) -> Result<f64> {
        let total = self.log_total()?;
        let tails = IntervalSet::from_intervals(vec![
            Interval::below(center - r, true),
            Interval::above(center + r, true),
        ]);
        let lp = self.log_prob(&self.support.intersect(&tails));
        Ok((lp - total).exp().clamp(0.0, 1.0))
    }
}

/// CDF of the normal with `mean` and `sd` truncated to `support`, at `x`.
pub fn tn_cdf(x: f64, mean: f64, sd: f64, support: &IntervalSet) -> Result<f64> {
    TruncatedNormal::new(mean, sd, support)?.cdf(x)
}
