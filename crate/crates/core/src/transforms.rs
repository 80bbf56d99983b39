//! The two canonical queue transformations for traffic splits.
//!
//! Both operate on a three-class structure around one priority arbitration
//! point.
//!
//! * **Structural transformation** (split at the high-priority queue): the
//!   high-priority queue carries one flow that contends downstream and one
//!   that departs elsewhere. The contending flow is re-characterized as the
//!   class-wise departure process of the shared queue (merge → departure →
//!   split), which feeds a derived residual-time expression; the remaining
//!   waiting times follow from the basic priority formulas.
//!
//! * **Service-rate transformation** (split at the low-priority queue): the
//!   low-priority queue carries one flow that contends with the high class
//!   and one that leaves through a separate output. High-priority
//!   interference is absorbed into an inflated service time T* for the
//!   contending flow; a corrected residual R* is then backed out of the
//!   reference waiting time so the whole low queue can be analyzed as a
//!   plain shared queue, with the busy-period extension ΔT added back for
//!   the contending class.

use crate::decomposition::{departure_cv2, merge_flows, split_flow, FlowSet};
use crate::error::{Error, Result};
use crate::moments::{residual_geo_g1, utilization, ArrivalFlow, ServiceMoments};
use crate::scalar::Scalar;
use crate::STABILITY_MARGIN;

/// Arrival flow plus service moments of one class at one queue.
#[derive(Debug, Clone, Copy)]
pub struct ClassLoad<F> {
    pub flow: ArrivalFlow<F>,
    pub svc: ServiceMoments<F>,
}

impl<F: Scalar> ClassLoad<F> {
    pub fn new(flow: ArrivalFlow<F>, svc: ServiceMoments<F>) -> Self {
        Self { flow, svc }
    }

    pub fn residual(&self) -> F {
        residual_geo_g1(&self.flow, &self.svc)
    }

    pub fn utilization(&self) -> F {
        utilization(&self.flow, &self.svc)
    }
}

/// Inputs for the structural transformation (split at the high queue).
///
/// `contending` and `bystander` share the high-priority queue; the former
/// continues to the contested output, the latter departs elsewhere.
/// `injected` waits in the low-priority queue for the same contested output.
#[derive(Debug, Clone, Copy)]
pub struct SplitHighInput<F> {
    pub contending: ClassLoad<F>,
    pub bystander: ClassLoad<F>,
    pub injected: ClassLoad<F>,
}

/// Inputs for the service-rate transformation (split at the low queue).
///
/// `high` occupies the high-priority queue and the contested output.
/// `diverted` and `contending` share the low-priority queue; the former
/// leaves through a separate output, the latter competes with `high`.
#[derive(Debug, Clone, Copy)]
pub struct SplitLowInput<F> {
    pub high: ClassLoad<F>,
    pub diverted: ClassLoad<F>,
    pub contending: ClassLoad<F>,
}

/// The three classes of a canonical structure, in the figure's numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalClass {
    Class1,
    Class2,
    Class3,
}

/// Intermediate quantities of a transformation, exposed for inspection and
/// for the cross-checks in the analysis engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diagnostics<F> {
    SplitHigh {
        /// CV² of the shared queue's total departure stream.
        queue_departure_cv2: F,
        /// CV² of the contending class's departure stream after the split.
        contender_departure_cv2: F,
        /// Residual time of the contending class at the contested output.
        contender_residual: F,
        /// Waiting time of the contending class at the contested output.
        contender_waiting: F,
    },
    SplitLow {
        /// Waiting time of the high-priority class.
        high_waiting: F,
        /// Reference waiting time of the contending class with the diverted
        /// flow switched off.
        reference_waiting: F,
        /// Probability that a contending flit is delayed by the high class.
        blocking_probability: F,
        /// Busy-period extension ΔT of the contending class's service.
        busy_extension: F,
        /// Modified utilization ρ* of the contending class.
        modified_utilization: F,
        /// Modified residual R* of the contending class.
        modified_residual: F,
    },
}

/// Waiting times and diagnostics produced by a transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformResult<F> {
    waiting: [F; 3],
    /// Inflated service moments of the contending low-priority class
    /// (service-rate transformation only).
    pub modified_service: Option<ServiceMoments<F>>,
    pub diagnostics: Diagnostics<F>,
}

impl<F: Scalar> TransformResult<F> {
    pub fn waiting(&self, class: CanonicalClass) -> F {
        match class {
            CanonicalClass::Class1 => self.waiting[0],
            CanonicalClass::Class2 => self.waiting[1],
            CanonicalClass::Class3 => self.waiting[2],
        }
    }

    pub fn waiting_times(&self) -> [F; 3] {
        self.waiting
    }
}

/// Residual time of a contending stream characterized by its departure CV²
/// rather than by raw arrival moments:
/// R = ½ (ρ/μ) ((C_D² + C_B²)/2) − ρμ/2.
///
/// Slightly negative values are possible when the departure stream is very
/// regular; callers clamp final waiting times, not this intermediate.
pub fn contention_residual<F: Scalar>(rho: F, svc: &ServiceMoments<F>, stream_cv2: F) -> F {
    let two = F::lit(2.0);
    F::half() * (rho * svc.mean()) * ((stream_cv2 + svc.cv2()) / two)
        - rho * svc.rate() * F::half()
}

fn guard_denominator<F: Scalar>(value: F, what: &str) -> Result<F> {
    if value <= F::lit(STABILITY_MARGIN) {
        Err(Error::Stability(format!(
            "denominator {what} = {value} is at or beyond saturation"
        )))
    } else {
        Ok(value)
    }
}

fn clamp_wait<F: Scalar>(w: F) -> F {
    if w < F::lit(1e-12) {
        F::zero()
    } else {
        w
    }
}

/// Split at the high-priority queue.
pub fn structural_transform<F: Scalar>(input: &SplitHighInput<F>) -> Result<TransformResult<F>> {
    let (c1, c2, c3) = (&input.contending, &input.bystander, &input.injected);
    let (rho1, rho2, rho3) = (c1.utilization(), c2.utilization(), c3.utilization());
    let (r1, r2, r3) = (c1.residual(), c2.residual(), c3.residual());

    let lambda1 = c1.flow.rate();
    let lambda2 = c2.flow.rate();

    let (queue_cv2, contender_cv2, contender_residual) = if lambda2 == F::zero() {
        // No elsewhere-bound traffic: the structure degenerates to a basic
        // two-class priority pair and the raw arrival process applies.
        (c1.flow.cv2(), c1.flow.cv2(), r1)
    } else {
        guard_denominator(F::one() - rho1 - rho2, "1 - rho1 - rho2 (high queue)")?;
        let merged = merge_flows(&FlowSet::new(vec![c1.flow, c2.flow])?);
        // Service of the shared queue: rate-weighted mixture of the two
        // classes' moments.
        let total = lambda1 + lambda2;
        let mix_mean = (lambda1 * c1.svc.mean() + lambda2 * c2.svc.mean()) / total;
        let mix_m2 =
            (lambda1 * c1.svc.second_moment() + lambda2 * c2.svc.second_moment()) / total;
        let mix = ServiceMoments::general(mix_mean, mix_m2)?;
        let queue_cv2 = departure_cv2(&merged, &mix, rho1 + rho2)?;
        let contender_cv2 = split_flow(queue_cv2, lambda1 / total)?;
        let residual = contention_residual(rho1, &c1.svc, contender_cv2);
        (queue_cv2, contender_cv2, residual)
    };

    let den1 = guard_denominator(F::one() - rho1, "1 - rho1")?;
    let contender_waiting = (contender_residual + r3) / den1;

    // The residual of whatever occupies the contested output is set by the
    // contender's utilization alone (renewal reward), no matter how regular
    // its stream is; the regularized residual above only shapes the
    // contender's own backlog term through its waiting time.
    let den3 = guard_denominator(F::one() - rho1 - rho3, "1 - rho1 - rho3")?;
    let w3 = (r1 + r3 + rho1 + rho1 * contender_waiting) / den3;

    let den2 = guard_denominator(F::one() - rho2, "1 - rho2")?;
    let w2 = (r2 + r1) / den2;

    Ok(TransformResult {
        waiting: [
            clamp_wait(contender_waiting),
            clamp_wait(w2),
            clamp_wait(w3),
        ],
        modified_service: None,
        diagnostics: Diagnostics::SplitHigh {
            queue_departure_cv2: queue_cv2,
            contender_departure_cv2: contender_cv2,
            contender_residual,
            contender_waiting,
        },
    })
}

/// Split at the low-priority queue.
pub fn service_rate_transform<F: Scalar>(input: &SplitLowInput<F>) -> Result<TransformResult<F>> {
    let (c1, c2, c3) = (&input.high, &input.diverted, &input.contending);
    let (rho1, rho2, rho3) = (c1.utilization(), c2.utilization(), c3.utilization());
    let (r1, r2, r3) = (c1.residual(), c2.residual(), c3.residual());
    let lambda1 = c1.flow.rate();
    let lambda3 = c3.flow.rate();

    let den1 = guard_denominator(F::one() - rho1, "1 - rho1")?;
    let w1 = (r1 + r3) / den1;

    let den_ref = guard_denominator(F::one() - rho1 - rho3, "1 - rho1 - rho3")?;
    let w_ref = (r1 + r3 + rho1 + rho1 * w1) / den_ref;

    let p = rho1 + lambda1 * r3;
    if p >= F::one() {
        return Err(Error::Stability(format!(
            "blocking probability p = {p} reaches 1; busy-period extension diverges"
        )));
    }
    let busy_extension = c1.svc.mean() * p / (F::one() - p);

    let t3_star = c3.svc.mean() + busy_extension;
    // Variance of the contending class's service is carried over unchanged.
    let svc3_star = ServiceMoments::general(t3_star, t3_star * t3_star + c3.svc.variance())?;
    let rho3_star = lambda3 * t3_star;
    let r3_star = (F::one() - rho3_star) * (w_ref - busy_extension);

    let den_low = guard_denominator(F::one() - rho3_star - rho2, "1 - rho3* - rho2")?;
    let w2 = (r3_star + r2) / den_low;
    let w3 = w2 + busy_extension;

    Ok(TransformResult {
        waiting: [clamp_wait(w1), clamp_wait(w2), clamp_wait(w3)],
        modified_service: Some(svc3_star),
        diagnostics: Diagnostics::SplitLow {
            high_waiting: w1,
            reference_waiting: w_ref,
            blocking_probability: p,
            busy_extension,
            modified_utilization: rho3_star,
            modified_residual: r3_star,
        },
    })
}
