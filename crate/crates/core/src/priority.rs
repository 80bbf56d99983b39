//! Closed-form waiting times for N strict-priority classes sharing one
//! discrete-time server.
//!
//! Each class has its own queue; the server always takes the head flit of the
//! highest-priority nonempty queue and never preempts a flit in service. The
//! waiting time of a class therefore has two ingredients: the residual time
//! of whatever is in service when it arrives (every class contributes,
//! including lower-priority ones) and the backlog of equal-or-higher
//! priority work, which feeds back through the higher classes' own waiting
//! times.

use crate::error::{Error, Result};
use crate::moments::{residual_geo_g1, utilization, ArrivalFlow, ServiceMoments};
use crate::scalar::Scalar;
use crate::STABILITY_MARGIN;

/// Opaque class identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

/// Arrival and service parameters of one priority class.
#[derive(Debug, Clone, Copy)]
pub struct PriorityClassParams<F> {
    pub class_id: ClassId,
    pub flow: ArrivalFlow<F>,
    pub svc: ServiceMoments<F>,
    /// 1 = highest priority.
    pub priority_rank: usize,
}

impl<F: Scalar> PriorityClassParams<F> {
    /// Residual time R = ½ λ (T̄² − T̄) of this class.
    pub fn residual(&self) -> F {
        residual_geo_g1(&self.flow, &self.svc)
    }

    /// Server utilization ρ = λ T̄ of this class.
    pub fn utilization(&self) -> F {
        utilization(&self.flow, &self.svc)
    }
}

/// An ordered set of priority classes sharing one server.
#[derive(Debug, Clone)]
pub struct PriorityQueueSystem<F> {
    classes: Vec<PriorityClassParams<F>>,
}

impl<F: Scalar> PriorityQueueSystem<F> {
    /// Build a system from per-class parameters. Ranks must be distinct and
    /// contiguous starting at 1; stability is checked at analysis time, not
    /// here.
    pub fn new(mut classes: Vec<PriorityClassParams<F>>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Domain("priority system needs at least one class".into()));
        }
        classes.sort_by_key(|c| c.priority_rank);
        for (i, c) in classes.iter().enumerate() {
            if c.priority_rank != i + 1 {
                return Err(Error::Domain(format!(
                    "priority ranks must be contiguous from 1; expected rank {}, found {}",
                    i + 1,
                    c.priority_rank
                )));
            }
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[PriorityClassParams<F>] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Sum of all class residuals.
    pub fn total_residual(&self) -> F {
        self.classes.iter().map(|c| c.residual()).sum()
    }

    /// Effective residual time seen by the class of rank `i`:
    /// all class residuals, plus one extra utilization term per strictly
    /// higher-priority class (their service may start in the same cycle the
    /// tagged flit arrives, stretching the decay by one cycle).
    pub fn effective_residual(&self, i: usize) -> Result<F> {
        if i < 1 || i > self.classes.len() {
            return Err(Error::Domain(format!(
                "rank {i} out of range 1..={}",
                self.classes.len()
            )));
        }
        let base: F = self.total_residual();
        let higher: F = self.classes[..i - 1].iter().map(|c| c.utilization()).sum();
        Ok(base + higher)
    }

    /// Waiting time of every class, in rank order.
    ///
    /// W₁ = ΣR_k / (1 − ρ₁);
    /// W_i = (ΣR_k + Σ_{k<i}(ρ_k + ρ_k W_k)) / (1 − Σ_{k≤i} ρ_k).
    ///
    /// Fails with a stability error naming the first rank whose cumulative
    /// utilization reaches saturation.
    pub fn waiting_times_basic(&self) -> Result<Vec<F>> {
        let margin = F::lit(STABILITY_MARGIN);
        let total_residual = self.total_residual();
        let mut waits = Vec::with_capacity(self.classes.len());
        let mut cum_util = F::zero();
        let mut backlog = F::zero(); // Σ_{k<i} (ρ_k + ρ_k W_k)
        for (idx, class) in self.classes.iter().enumerate() {
            let rho = class.utilization();
            cum_util = cum_util + rho;
            let denom = F::one() - cum_util;
            if denom <= margin {
                return Err(Error::Stability(format!(
                    "cumulative utilization {cum_util} at rank {} leaves no service capacity",
                    idx + 1
                )));
            }
            let w = (total_residual + backlog) / denom;
            backlog = backlog + rho + rho * w;
            waits.push(w);
        }
        Ok(waits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(id: u32, rank: usize, rate: f64, t: f64) -> PriorityClassParams<f64> {
        PriorityClassParams {
            class_id: ClassId(id),
            flow: ArrivalFlow::geometric(rate).unwrap(),
            svc: ServiceMoments::deterministic(t).unwrap(),
            priority_rank: rank,
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn ranks_must_be_contiguous() {
        let err = PriorityQueueSystem::new(vec![class(0, 1, 0.1, 2.0), class(1, 3, 0.1, 2.0)])
            .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(PriorityQueueSystem::new(vec![class(0, 2, 0.1, 2.0), class(1, 1, 0.1, 2.0)]).is_ok());
    }

    #[test]
    fn effective_residual_hand_values() {
        let sys =
            PriorityQueueSystem::new(vec![class(0, 1, 0.2, 2.0), class(1, 2, 0.2, 2.0)]).unwrap();
        assert!(close(sys.effective_residual(1).unwrap(), 0.4, 1e-15));
        assert!(close(sys.effective_residual(2).unwrap(), 0.8, 1e-15));
        assert!(sys.effective_residual(0).is_err());
        assert!(sys.effective_residual(3).is_err());

        let single = PriorityQueueSystem::new(vec![class(0, 1, 0.3, 1.0)]).unwrap();
        assert_eq!(single.effective_residual(1).unwrap(), 0.0);
    }

    #[test]
    fn waiting_times_hand_values() {
        let sys = PriorityQueueSystem::new(vec![class(0, 1, 0.25, 2.0)]).unwrap();
        let w = sys.waiting_times_basic().unwrap();
        assert!(close(w[0], 0.5, 1e-12));

        let sys =
            PriorityQueueSystem::new(vec![class(0, 1, 0.2, 2.0), class(1, 2, 0.2, 2.0)]).unwrap();
        let w = sys.waiting_times_basic().unwrap();
        assert!(close(w[0], 2.0 / 3.0, 1e-12));
        assert!(close(w[1], 16.0 / 3.0, 1e-12));
    }

    #[test]
    fn waiting_vanishes_in_empty_system_limit() {
        let sys = PriorityQueueSystem::new(vec![class(0, 1, 1e-9, 2.0), class(1, 2, 1e-9, 2.0)])
            .unwrap();
        let w = sys.waiting_times_basic().unwrap();
        assert!(w[0] < 1e-7);
        assert!(w[1] < 1e-7);
    }

    #[test]
    fn instability_names_first_saturated_rank() {
        let sys = PriorityQueueSystem::new(vec![
            class(0, 1, 0.3, 2.0),
            class(1, 2, 0.3, 2.0),
        ])
        .unwrap();
        let err = sys.waiting_times_basic().unwrap_err();
        match err {
            Error::Stability(msg) => assert!(msg.contains("rank 2"), "{msg}"),
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn effective_residual_equals_w1_numerator() {
        for rates in [[0.1, 0.2, 0.05], [0.05, 0.05, 0.3]] {
            let sys = PriorityQueueSystem::new(
                rates
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| class(i as u32, i + 1, r, 2.0))
                    .collect(),
            )
            .unwrap();
            let w = sys.waiting_times_basic().unwrap();
            let rho1 = sys.classes()[0].utilization();
            assert!(close(
                sys.effective_residual(1).unwrap(),
                w[0] * (1.0 - rho1),
                1e-12
            ));
        }
    }

    #[test]
    fn priority_ordering_with_identical_classes() {
        // Identical rates and service: waiting must be nondecreasing in rank.
        for n in 1..=4usize {
            for &rate in &[0.02, 0.06, 0.1] {
                let classes: Vec<_> =
                    (0..n).map(|i| class(i as u32, i + 1, rate, 2.0)).collect();
                let sys = PriorityQueueSystem::new(classes).unwrap();
                if let Ok(w) = sys.waiting_times_basic() {
                    for pair in w.windows(2) {
                        assert!(pair[0] <= pair[1] + 1e-12, "{w:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn waiting_monotone_in_each_rate() {
        // Finite-difference probe over a stable grid: bumping any λ_k with
        // k <= i must not decrease W_i.
        let base = [0.08, 0.1, 0.06];
        let t = 2.0;
        let eps = 1e-4;
        let eval = |rates: &[f64]| {
            let sys = PriorityQueueSystem::new(
                rates
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| class(i as u32, i + 1, r, t))
                    .collect(),
            )
            .unwrap();
            sys.waiting_times_basic().unwrap()
        };
        let w0 = eval(&base);
        for k in 0..3 {
            let mut bumped = base;
            bumped[k] += eps;
            let w1 = eval(&bumped);
            for i in k..3 {
                assert!(
                    w1[i] >= w0[i] - 1e-12,
                    "W_{} decreased when lambda_{} grew",
                    i + 1,
                    k + 1
                );
            }
        }
    }
}
