//! Service and switch-over time distributions.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{PollingError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Exponential,
    Deterministic,
    Erlang { shape: u32 },
    /// Value `low` with probability `1 - p_high`, `high` with probability `p_high`.
    TwoPoint { low: f64, high: f64, p_high: f64 },
    /// Only the first two moments are known.
    MomentsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dist {
    family: Family,
    mean: f64,
    second_moment: f64,
}

fn check_mean(mean: f64) -> Result<()> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(PollingError::InvalidDistribution(format!(
            "mean must be positive and finite, got {mean}"
        )));
    }
    Ok(())
}

impl Dist {
    pub fn exponential(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        Ok(Dist { family: Family::Exponential, mean, second_moment: 2.0 * mean * mean })
    }

    /// A constant. Zero is allowed here and only here.
    pub fn deterministic(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(PollingError::InvalidDistribution(format!(
                "deterministic value must be nonnegative and finite, got {value}"
            )));
        }
        Ok(Dist { family: Family::Deterministic, mean: value, second_moment: value * value })
    }

    pub fn erlang(shape: u32, mean: f64) -> Result<Self> {
        check_mean(mean)?;
        if shape == 0 {
            return Err(PollingError::InvalidDistribution("erlang shape must be at least 1".into()));
        }
        let k = shape as f64;
        Ok(Dist { family: Family::Erlang { shape }, mean, second_moment: mean * mean * (k + 1.0) / k })
    }

    pub fn two_point(low: f64, high: f64, p_high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low >= 0.0 && high >= low) {
            return Err(PollingError::InvalidDistribution(format!(
                "two-point support must satisfy 0 <= low <= high, got ({low}, {high})"
            )));
        }
        if !(0.0..=1.0).contains(&p_high) {
            return Err(PollingError::InvalidDistribution(format!("p_high {p_high} outside [0, 1]")));
        }
        let mean = (1.0 - p_high) * low + p_high * high;
        check_mean(mean)?;
        let second_moment = (1.0 - p_high) * low * low + p_high * high * high;
        Ok(Dist { family: Family::TwoPoint { low, high, p_high }, mean, second_moment })
    }

    /// Two-point law with the given first two moments.
    ///
    /// Uses the symmetric pair `mean ± sd` when it stays nonnegative, and
    /// otherwise the pair `{0, m2/mean}`.
    pub fn fit_two_point(mean: f64, second_moment: f64) -> Result<Self> {
        check_mean(mean)?;
        check_second_moment(mean, second_moment)?;
        let sd = (second_moment - mean * mean).max(0.0).sqrt();
        if mean - sd >= 0.0 {
            Self::two_point(mean - sd, mean + sd, 0.5).map(|d| d.with_moments(mean, second_moment))
        } else {
            let high = second_moment / mean;
            Self::two_point(0.0, high, mean / high).map(|d| d.with_moments(mean, second_moment))
        }
    }

    pub fn moments_only(mean: f64, second_moment: f64) -> Result<Self> {
        check_mean(mean)?;
        check_second_moment(mean, second_moment)?;
        Ok(Dist { family: Family::MomentsOnly, mean, second_moment })
    }

    // Keeps the requested moments exactly instead of the rounded values
    // recomputed from the fitted support.
    fn with_moments(mut self, mean: f64, second_moment: f64) -> Self {
        self.mean = mean;
        self.second_moment = second_moment;
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Mean residual time E(X²)/2E(X); zero for a zero constant.
    pub fn residual_mean(&self) -> f64 {
        if self.mean == 0.0 {
            0.0
        } else {
            self.second_moment / (2.0 * self.mean)
        }
    }

    pub fn has_transform(&self) -> bool {
        !matches!(self.family, Family::MomentsOnly)
    }

    /// Laplace-Stieltjes transform E[exp(-w X)] at real `w`.
    pub fn lst(&self, w: f64) -> f64 {
        match self.family {
            Family::Exponential => 1.0 / (1.0 + self.mean * w),
            Family::Deterministic => (-self.mean * w).exp(),
            Family::Erlang { shape } => {
                let k = shape as f64;
                (1.0 + self.mean * w / k).powi(-(shape as i32))
            }
            Family::TwoPoint { low, high, p_high } => {
                (1.0 - p_high) * (-low * w).exp() + p_high * (-high * w).exp()
            }
            Family::MomentsOnly => f64::NAN,
        }
    }

    /// Derivative of the transform with respect to `w`.
    pub fn lst_derivative(&self, w: f64) -> f64 {
        match self.family {
            Family::Exponential => -self.mean / (1.0 + self.mean * w).powi(2),
            Family::Deterministic => -self.mean * (-self.mean * w).exp(),
            Family::Erlang { shape } => {
                let k = shape as f64;
                -self.mean * (1.0 + self.mean * w / k).powi(-(shape as i32) - 1)
            }
            Family::TwoPoint { low, high, p_high } => {
                -(1.0 - p_high) * low * (-low * w).exp() - p_high * high * (-high * w).exp()
            }
            Family::MomentsOnly => f64::NAN,
        }
    }

    /// Joint transform E[exp(-wp P - wr R)] of the past and residual parts of a
    /// length-biased draw, (X̃(wp) - X̃(wr)) / (E(X)(wr - wp)).
    pub fn past_residual_lst(&self, wp: f64, wr: f64) -> f64 {
        if self.mean == 0.0 {
            return 1.0;
        }
        let d = wr - wp;
        if d.abs() <= 1e-5 {
            let mid = 0.5 * (wp + wr);
            -self.lst_derivative(mid) / self.mean
        } else {
            (self.lst(wp) - self.lst(wr)) / (self.mean * d)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Exponential => Exp::new(1.0 / self.mean).expect("positive rate").sample(rng),
            Family::Deterministic => self.mean,
            Family::Erlang { shape } => {
                let k = shape as f64;
                Gamma::new(k, self.mean / k).expect("valid gamma").sample(rng)
            }
            Family::TwoPoint { low, high, p_high } => {
                if rng.random::<f64>() < p_high {
                    high
                } else {
                    low
                }
            }
            Family::MomentsOnly => f64::NAN,
        }
    }
}

fn check_second_moment(mean: f64, second_moment: f64) -> Result<()> {
    if !second_moment.is_finite() || second_moment < mean * mean * (1.0 - 1e-12) {
        return Err(PollingError::InvalidDistribution(format!(
            "second moment {second_moment} is below the squared mean {}",
            mean * mean
        )));
    }
    Ok(())
}
