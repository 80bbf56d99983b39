//! Flow decomposition: merge, service, and split.
//!
//! Characterizes the departure process of each class leaving a shared queue
//! in three phases. Phase 1 merges the per-class arrival flows into one flow
//! whose CV² is the rate-weighted sum of the class CV²s. Phase 2 pushes the
//! merged flow through the server: C_D² = (1 − ρ²) C_A² + ρ² C_B². Phase 3
//! thins the departure stream per class: C_{D_i}² = 1 + p_i (C_D² − 1) with
//! p_i the class's share of the total rate.
//!
//! Phases 2 and 3 are renewal approximations; they are kept behind these two
//! functions so alternates can be swapped in and A/B-tested against the
//! simulator without touching callers.

use crate::error::{Error, Result};
use crate::moments::{ArrivalFlow, ServiceMoments};
use crate::scalar::Scalar;

/// The per-class flows entering one queue.
#[derive(Debug, Clone)]
pub struct FlowSet<F> {
    flows: Vec<ArrivalFlow<F>>,
}

impl<F: Scalar> FlowSet<F> {
    /// At least one flow; total rate below one flit/cycle.
    pub fn new(flows: Vec<ArrivalFlow<F>>) -> Result<Self> {
        if flows.is_empty() {
            return Err(Error::Domain("flow set must contain at least one flow".into()));
        }
        let total: F = flows.iter().map(|f| f.rate()).sum();
        if !(total < F::one()) {
            return Err(Error::Domain(format!(
                "total rate {total} of a flow set must stay below 1 flit/cycle"
            )));
        }
        Ok(Self { flows })
    }

    pub fn flows(&self) -> &[ArrivalFlow<F>] {
        &self.flows
    }
}

/// Phase 1: merge flows into a single flow. Rates add; the merged CV² is the
/// rate-weighted sum of the member CV²s.
pub fn merge_flows<F: Scalar>(set: &FlowSet<F>) -> ArrivalFlow<F> {
    let total: F = set.flows.iter().map(|f| f.rate()).sum();
    if total == F::zero() {
        // All members are null flows; report a memoryless placeholder.
        return ArrivalFlow::new(F::zero(), F::one()).expect("valid null flow");
    }
    let cv2: F = set
        .flows
        .iter()
        .map(|f| (f.rate() / total) * f.cv2())
        .sum();
    ArrivalFlow::new(total, cv2).expect("merged flow within domain")
}

/// Phase 2: CV² of the inter-departure time of a queue with merged arrival
/// `merged`, service `svc`, and utilization `rho`.
pub fn departure_cv2<F: Scalar>(
    merged: &ArrivalFlow<F>,
    svc: &ServiceMoments<F>,
    rho: F,
) -> Result<F> {
    if !(rho >= F::zero() && rho < F::one()) {
        return Err(Error::Stability(format!(
            "departure process undefined at utilization {rho} (requires 0 <= rho < 1)"
        )));
    }
    let rho2 = rho * rho;
    Ok((F::one() - rho2) * merged.cv2() + rho2 * svc.cv2())
}

/// Phase 3: CV² of one class's departure stream after a probabilistic split,
/// where `fraction` is the class's share of the total departure rate.
pub fn split_flow<F: Scalar>(cv2_departure: F, fraction: F) -> Result<F> {
    if !(fraction > F::zero() && fraction <= F::one()) {
        return Err(Error::Domain(format!(
            "split fraction must lie in (0, 1], got {fraction}"
        )));
    }
    Ok(F::one() + fraction * (cv2_departure - F::one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn geo(rate: f64) -> ArrivalFlow<f64> {
        ArrivalFlow::geometric(rate).unwrap()
    }

    #[test]
    fn merge_hand_values() {
        let merged = merge_flows(&FlowSet::new(vec![geo(0.2), geo(0.2)]).unwrap());
        assert!(close(merged.rate(), 0.4, 1e-15));
        assert!(close(merged.cv2(), 0.8, 1e-15));

        let single = merge_flows(&FlowSet::new(vec![geo(0.37)]).unwrap());
        assert_eq!(single, geo(0.37));

        let merged = merge_flows(&FlowSet::new(vec![geo(0.1), geo(0.3)]).unwrap());
        assert!(close(merged.rate(), 0.4, 1e-15));
        assert!(close(merged.cv2(), 0.25 * 0.9 + 0.75 * 0.7, 1e-15));
    }

    #[test]
    fn merge_preserves_total_rate_exactly() {
        let rates = [0.01, 0.07, 0.02, 0.11, 0.033];
        let set = FlowSet::new(rates.iter().map(|&r| geo(r)).collect()).unwrap();
        let total: f64 = rates.iter().sum();
        assert_eq!(merge_flows(&set).rate(), total);
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(FlowSet::<f64>::new(vec![]), Err(Error::Domain(_))));
    }

    #[test]
    fn departure_hand_values() {
        let det2 = ServiceMoments::deterministic(2.0).unwrap();
        let merged = ArrivalFlow::new(0.4, 0.8).unwrap();
        let cd2 = departure_cv2(&merged, &det2, 0.8).unwrap();
        assert!(close(cd2, 0.288, 1e-15));

        // Empty server passes the arrival process through.
        let cd2 = departure_cv2(&merged, &det2, 0.0).unwrap();
        assert!(close(cd2, 0.8, 1e-15));

        // Saturated deterministic server emits back-to-back departures.
        let cd2 = departure_cv2(&merged, &det2, 0.999999).unwrap();
        assert!(cd2 < 1e-5);

        assert!(matches!(
            departure_cv2(&merged, &det2, 1.0),
            Err(Error::Stability(_))
        ));
    }

    #[test]
    fn departure_bounded_by_input_cvs() {
        let svc = ServiceMoments::general(2.0, 6.0).unwrap(); // C_B^2 = 0.5
        for &ca2 in &[0.1f64, 0.5, 0.9, 1.5] {
            let merged = ArrivalFlow::new(0.3, ca2).unwrap();
            let lo = ca2.min(svc.cv2());
            let hi = ca2.max(svc.cv2());
            let mut rho = 0.0;
            while rho < 1.0 {
                let cd2 = departure_cv2(&merged, &svc, rho).unwrap();
                assert!(cd2 >= lo - 1e-12 && cd2 <= hi + 1e-12);
                rho += 0.05;
            }
        }
    }

    #[test]
    fn split_hand_values() {
        assert!(close(split_flow(0.288, 1.0).unwrap(), 0.288, 1e-15));
        assert!(close(split_flow(0.288, 0.5).unwrap(), 0.644, 1e-15));
        assert!(close(split_flow(0.288, 1e-9).unwrap(), 1.0, 1e-6));
        assert!(split_flow(0.5, 0.0).is_err());
        assert!(split_flow(0.5, 1.1).is_err());
    }

    #[test]
    fn split_monotone_in_fraction() {
        // Decreasing toward the departure CV when C_D^2 < 1, increasing when
        // C_D^2 > 1.
        for &cd2 in &[0.3, 1.7] {
            let mut prev = split_flow(cd2, 0.01).unwrap();
            let mut f = 0.05;
            while f <= 1.0 {
                let cur = split_flow(cd2, f).unwrap();
                if cd2 < 1.0 {
                    assert!(cur <= prev + 1e-12);
                } else {
                    assert!(cur >= prev - 1e-12);
                }
                prev = cur;
                f += 0.05;
            }
        }
    }
}
