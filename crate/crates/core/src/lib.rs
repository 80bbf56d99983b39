//! Analytical performance models for priority-arbitrated networks-on-chip,
//! plus the cycle-accurate discrete-time simulator used to validate them.
//!
//! The analytical side treats the NoC as a network of discrete-time Geo/G/1
//! queues under strict, non-preemptive priority (in-network flits beat newly
//! injected ones). End-to-end per-class latency is assembled from closed-form
//! waiting times; the two traffic-split structures that defeat the basic
//! priority model (a split at the high-priority queue, a split at the
//! low-priority queue) are handled by dedicated transformations built on a
//! merge/departure/split decomposition of flow coefficients of variation.
//!
//! The simulator replays the same queue network cycle by cycle with Bernoulli
//! injection and priority arbitration, and is the accuracy oracle for every
//! closed-form result in this crate.
//!
//! The moment and waiting-time arithmetic is generic over the scalar type
//! (`f32` or `f64`) through the [`scalar::Scalar`] trait; the network,
//! engine, and simulator layers work in `f64`, and the crate root exports
//! `f64` aliases for the core math types.

pub mod decomposition;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod moments;
pub mod network;
pub mod priority;
pub mod report;
pub mod scalar;
pub mod sim;
pub mod transforms;

pub use error::{Error, Result};

/// Service-time moments with `f64` scalars.
pub type ServiceMoments = moments::ServiceMoments<f64>;
/// Arrival flow with `f64` scalars.
pub type ArrivalFlow = moments::ArrivalFlow<f64>;
/// Flow set with `f64` scalars.
pub type FlowSet = decomposition::FlowSet<f64>;
/// Priority class parameters with `f64` scalars.
pub type PriorityClassParams = priority::PriorityClassParams<f64>;
/// Priority queue system with `f64` scalars.
pub type PriorityQueueSystem = priority::PriorityQueueSystem<f64>;
/// Transform result with `f64` scalars.
pub type TransformResult = transforms::TransformResult<f64>;

/// Cumulative-utilization guard applied by every closed-form denominator.
///
/// Denominators of the waiting-time formulas must stay above this margin;
/// anything closer to saturation is reported as a stability error instead of
/// an astronomically large latency.
pub const STABILITY_MARGIN: f64 = 1e-3;
