//! Moment and coefficient-of-variation arithmetic for discrete-time arrival
//! and service processes.
//!
//! Time is measured in clock cycles and rates in flits/cycle. A service
//! process is represented by its first two moments only; an arrival process
//! by its rate and the squared coefficient of variation (CV²) of the
//! inter-arrival time. Bernoulli injection at rate λ gives geometric
//! inter-arrival times on {1, 2, ...} with CV² = 1 − λ, which is the baseline
//! arrival model throughout the crate.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// First and second moments of a class's service time, in cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceMoments<F> {
    mean: F,
    second_moment: F,
    cv2: F,
}

impl<F: Scalar> ServiceMoments<F> {
    /// Deterministic service of `t` cycles: zero variance, `t` must be a
    /// positive integer (a discrete-time server holds a flit for whole
    /// cycles).
    pub fn deterministic(t: F) -> Result<Self> {
        if !(t >= F::one()) || t.fract() != F::zero() {
            return Err(Error::Domain(format!(
                "deterministic service time must be an integer >= 1 cycle, got {t}"
            )));
        }
        Ok(Self {
            mean: t,
            second_moment: t * t,
            cv2: F::zero(),
        })
    }

    /// General service process given mean and second moment.
    pub fn general(mean: F, second_moment: F) -> Result<Self> {
        if !(mean >= F::one()) {
            return Err(Error::Domain(format!(
                "mean service time must be >= 1 cycle, got {mean}"
            )));
        }
        if !(second_moment >= mean * mean) {
            return Err(Error::Domain(format!(
                "second moment {second_moment} below squared mean {} (negative variance)",
                mean * mean
            )));
        }
        let cv2 = (second_moment - mean * mean) / (mean * mean);
        Ok(Self {
            mean,
            second_moment,
            cv2,
        })
    }

    /// Mean service time T̄, cycles.
    pub fn mean(&self) -> F {
        self.mean
    }

    /// Second moment of the service time, cycles².
    pub fn second_moment(&self) -> F {
        self.second_moment
    }

    /// Squared coefficient of variation of the service time (C_B²).
    pub fn cv2(&self) -> F {
        self.cv2
    }

    /// Service rate μ = 1/T̄.
    pub fn rate(&self) -> F {
        F::one() / self.mean
    }

    /// Variance of the service time.
    pub fn variance(&self) -> F {
        self.second_moment - self.mean * self.mean
    }
}

/// Rate and inter-arrival CV² of one class's flow at one queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalFlow<F> {
    rate: F,
    cv2: F,
}

impl<F: Scalar> ArrivalFlow<F> {
    /// Flow with explicit rate and inter-arrival CV².
    ///
    /// A zero rate stands for an absent flow and is accepted so that
    /// degenerate limits (a transformation input with one class switched
    /// off) can be expressed directly.
    pub fn new(rate: F, cv2: F) -> Result<Self> {
        if !(rate >= F::zero() && rate < F::one()) {
            return Err(Error::Domain(format!(
                "arrival rate must lie in [0, 1) flits/cycle, got {rate}"
            )));
        }
        if !(cv2 >= F::zero()) {
            return Err(Error::Domain(format!(
                "inter-arrival CV^2 must be >= 0, got {cv2}"
            )));
        }
        Ok(Self { rate, cv2 })
    }

    /// Geometric inter-arrival flow produced by Bernoulli injection at `rate`:
    /// CV² = 1 − rate.
    pub fn geometric(rate: F) -> Result<Self> {
        if !(rate > F::zero() && rate < F::one()) {
            return Err(Error::Domain(format!(
                "geometric arrival rate must lie in (0, 1) flits/cycle, got {rate}"
            )));
        }
        Ok(Self {
            rate,
            cv2: F::one() - rate,
        })
    }

    /// Arrival rate λ, flits/cycle.
    pub fn rate(&self) -> F {
        self.rate
    }

    /// Squared coefficient of variation of the inter-arrival time (C_A²).
    pub fn cv2(&self) -> F {
        self.cv2
    }
}

/// Residual time of a class in a discrete-time Geo/G/1 queue:
/// R = ½ λ (T̄² − T̄).
pub fn residual_geo_g1<F: Scalar>(flow: &ArrivalFlow<F>, svc: &ServiceMoments<F>) -> F {
    F::half() * flow.rate() * (svc.second_moment() - svc.mean())
}

/// Server utilization ρ = λ T̄.
pub fn utilization<F: Scalar>(flow: &ArrivalFlow<F>, svc: &ServiceMoments<F>) -> F {
    flow.rate() * svc.mean()
}
