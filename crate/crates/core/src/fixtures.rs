//! Standalone queueing structures used for validation: single queues,
//! strict-priority chains, and the two canonical three-class split
//! structures. All of them produce the same [`QueueNetwork`] representation
//! as the topology builders, so the analysis engine and the simulator can be
//! cross-checked on them directly.

use crate::error::Result;
use crate::moments::ServiceMoments;
use crate::network::{ClassInstance, Hop, LaneMode, QueueNetwork, QueueRole, QueueSpec, ServerSpec};

fn queue(name: &str, role: QueueRole, service: ServiceMoments<f64>, level: u8) -> QueueSpec {
    QueueSpec {
        name: name.to_string(),
        router: None,
        role,
        service,
        level,
        lanes: LaneMode::Single,
    }
}

/// A single Geo/G/1 queue fed by one class. Class 0 travels 0 → 1.
pub fn geo_g1(rate: f64, service: ServiceMoments<f64>) -> Result<QueueNetwork> {
    let net = QueueNetwork {
        queues: vec![queue("q", QueueRole::Through, service, 0)],
        servers: vec![ServerSpec { name: "out".into() }],
        classes: vec![ClassInstance {
            source: 0,
            dest: 1,
            rate,
            hops: vec![Hop { queue: 0, server: 0, latency_after: 0.0 }],
        }],
    };
    net.validate()?;
    Ok(net)
}

/// N dedicated queues sharing one server under strict priority; class `i`
/// has rank `i + 1` and travels `i` → `100 + i`.
pub fn priority_chain(rates: &[f64], service: ServiceMoments<f64>) -> Result<QueueNetwork> {
    let queues = (0..rates.len())
        .map(|i| queue(&format!("q{}", i + 1), QueueRole::Through, service, i as u8))
        .collect();
    let classes = rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| ClassInstance {
            source: i,
            dest: 100 + i,
            rate,
            hops: vec![Hop { queue: i, server: 0, latency_after: 0.0 }],
        })
        .collect();
    let net = QueueNetwork {
        queues,
        servers: vec![ServerSpec { name: "shared".into() }],
        classes,
    };
    net.validate()?;
    Ok(net)
}

/// Split at the high-priority queue: classes 1 (contending) and 2
/// (departing elsewhere) share the high queue; class 3 is injected into the
/// low queue and competes with class 1 for the shared output.
///
/// Class order: index 0 = class 1, then class 2 (omitted when `rate2` is
/// zero), then class 3.
pub fn canonical_split_high(
    rate1: f64,
    rate2: f64,
    rate3: f64,
    service: ServiceMoments<f64>,
) -> Result<QueueNetwork> {
    let queues = vec![
        queue("q_high", QueueRole::Through, service, 0),
        queue("q_low", QueueRole::Injection, service, 1),
    ];
    let servers = vec![
        ServerSpec { name: "shared".into() },
        ServerSpec { name: "eject".into() },
    ];
    let mut classes = vec![ClassInstance {
        source: 0,
        dest: 10,
        rate: rate1,
        hops: vec![Hop { queue: 0, server: 0, latency_after: 0.0 }],
    }];
    if rate2 > 0.0 {
        classes.push(ClassInstance {
            source: 1,
            dest: 11,
            rate: rate2,
            hops: vec![Hop { queue: 0, server: 1, latency_after: 0.0 }],
        });
    }
    classes.push(ClassInstance {
        source: 2,
        dest: 12,
        rate: rate3,
        hops: vec![Hop { queue: 1, server: 0, latency_after: 0.0 }],
    });
    let net = QueueNetwork { queues, servers, classes };
    net.validate()?;
    Ok(net)
}

/// Split at the low-priority queue: class 1 occupies the high queue; classes
/// 2 (separate output) and 3 (contending with class 1) share the low queue.
///
/// Class order: index 0 = class 1 (omitted when `rate1` is zero), then
/// class 2 (omitted when `rate2` is zero), then class 3.
pub fn canonical_split_low(
    rate1: f64,
    rate2: f64,
    rate3: f64,
    service: ServiceMoments<f64>,
) -> Result<QueueNetwork> {
    let queues = vec![
        queue("q_high", QueueRole::Through, service, 0),
        queue("q_low", QueueRole::Injection, service, 1),
    ];
    let servers = vec![
        ServerSpec { name: "shared".into() },
        ServerSpec { name: "separate".into() },
    ];
    let mut classes = Vec::new();
    if rate1 > 0.0 {
        classes.push(ClassInstance {
            source: 0,
            dest: 10,
            rate: rate1,
            hops: vec![Hop { queue: 0, server: 0, latency_after: 0.0 }],
        });
    }
    if rate2 > 0.0 {
        classes.push(ClassInstance {
            source: 1,
            dest: 11,
            rate: rate2,
            hops: vec![Hop { queue: 1, server: 1, latency_after: 0.0 }],
        });
    }
    classes.push(ClassInstance {
        source: 2,
        dest: 12,
        rate: rate3,
        hops: vec![Hop { queue: 1, server: 0, latency_after: 0.0 }],
    });
    let net = QueueNetwork { queues, servers, classes };
    net.validate()?;
    Ok(net)
}
