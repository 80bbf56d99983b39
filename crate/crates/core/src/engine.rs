//! Network-wide queueing-time computation and end-to-end latency assembly.
//!
//! Every queue is analyzed at its arbitration points. The classes of one
//! queue that head for the same output form a *group*; groups meeting at a
//! server are stacked by priority level and evaluated with the basic
//! priority recursion. Two refinements hook into that stack:
//!
//! * when a higher-priority queue splits (only part of it contends), the
//!   contending group enters the stack with the residual of its departure
//!   stream (merge → departure CV² → split → residual) instead of its raw
//!   arrival residual;
//! * when a strict-FIFO queue splits across outputs, high-priority
//!   interference on each class is absorbed into an inflated service time
//!   T* = T + ΔT and a corrected residual R*, and the queue is then closed
//!   as one shared queue: W = ΣR*/(1 − Σρ*) + ΔT_i.
//!
//! Per-output lanes (injection queues) are aggregated per lane: the lane's
//! classes share one waiting time from the stack, with no ΔT term since the
//! interference is already inside the stack.

use std::collections::BTreeMap;

use crate::decomposition::{departure_cv2, split_flow};
use crate::error::{Error, Result};
use crate::moments::ArrivalFlow;
use crate::network::{LaneMode, QueueNetwork};
use crate::report::{LatencyReport, PairRecord};
use crate::transforms::contention_residual;
use crate::STABILITY_MARGIN;

/// Queueing time of one class at one queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitEntry {
    pub waiting: f64,
    /// Busy-period extension ΔT applied at this queue; zero when the
    /// service-rate correction was not needed.
    pub delta_t: f64,
}

/// Map (queue, class) → waiting produced by [`analyze`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassQueueingTimes {
    entries: BTreeMap<(usize, usize), WaitEntry>,
}

impl ClassQueueingTimes {
    pub fn get(&self, queue: usize, class: usize) -> Option<WaitEntry> {
        self.entries.get(&(queue, class)).copied()
    }

    pub fn waiting(&self, queue: usize, class: usize) -> f64 {
        self.entries[&(queue, class)].waiting
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &WaitEntry)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone)]
struct Group {
    queue: usize,
    level: u8,
    classes: Vec<usize>,
    rate: f64,
    rho: f64,
    residual_plain: f64,
    svc_mean: f64,
    /// Departure-stream residual, present when the group's queue splits.
    residual_split: Option<f64>,
}

impl Group {
    /// Residual this group contributes when it contends from above.
    fn contention_residual(&self) -> f64 {
        self.residual_split.unwrap_or(self.residual_plain)
    }
}

struct QueueInfo {
    classes: Vec<usize>,
    rate: f64,
    rho: f64,
    total_residual: f64,
}

fn clamp_wait(w: f64) -> f64 {
    if w < 1e-12 {
        0.0
    } else {
        w
    }
}

fn residual_of(rate: f64, svc: &crate::moments::ServiceMoments<f64>) -> f64 {
    0.5 * rate * (svc.second_moment() - svc.mean())
}

struct StackOutcome {
    w_ref: f64,
    /// Blocking probability accumulated over the higher-priority groups.
    p: f64,
    /// Rate-weighted mean service time of the higher-priority groups.
    t_delay: f64,
}

/// Mean extra wait from same-cycle co-arrivals of independent flows sharing
/// one FIFO lane: a flit co-arriving with another loses the slot half the
/// time and then waits out the winner's full service. Zero for single-flow
/// lanes, which keeps the closed-form limits exact.
fn lane_tie_residual(rates: &[f64], svc_mean: f64) -> f64 {
    let total: f64 = rates.iter().sum();
    if total == 0.0 || rates.len() < 2 {
        return 0.0;
    }
    let sq: f64 = rates.iter().map(|r| r * r).sum();
    (total - sq / total) * svc_mean / 2.0
}

/// Basic priority recursion over [higher-priority groups..., subject], with
/// the residuals of lower-priority classes at the same server included in
/// the shared residual sum.
///
/// In-service residuals are utilization-based and insensitive to how
/// regular an arrival stream is, so the shared sum always uses the plain
/// residuals; a split group's regularized residual only enters its own
/// waiting time, where it damps the backlog feedback.
fn stack_waiting(
    hp: &[&Group],
    subject_residual: f64,
    subject_rho: f64,
    lower_residual: f64,
    subject_tie: f64,
    label: &str,
) -> Result<StackOutcome> {
    let sum_r: f64 = hp.iter().map(|g| g.residual_plain).sum::<f64>()
        + subject_residual
        + lower_residual;
    let mut cum_rho = 0.0;
    let mut backlog = 0.0;
    let mut p = 0.0;
    let mut t_weighted = 0.0;
    let mut hp_rate = 0.0;
    for g in hp {
        cum_rho += g.rho;
        let den = 1.0 - cum_rho;
        if den <= STABILITY_MARGIN {
            return Err(Error::Stability(format!(
                "{label}: higher-priority utilization {cum_rho} saturates the server"
            )));
        }
        let w = (sum_r - g.residual_plain + g.contention_residual() + backlog) / den;
        backlog += g.rho + g.rho * w;
        p += g.rho + g.rate * subject_residual;
        t_weighted += g.rate * g.svc_mean;
        hp_rate += g.rate;
    }
    cum_rho += subject_rho;
    let den = 1.0 - cum_rho;
    if den <= STABILITY_MARGIN {
        return Err(Error::Stability(format!(
            "{label}: cumulative utilization {cum_rho} saturates the server"
        )));
    }
    Ok(StackOutcome {
        w_ref: (sum_r + subject_tie + backlog) / den,
        p,
        t_delay: if hp_rate > 0.0 { t_weighted / hp_rate } else { 0.0 },
    })
}

/// Queueing time for every (queue, class) visit in the network.
pub fn analyze(net: &QueueNetwork) -> Result<ClassQueueingTimes> {
    let nq = net.queues.len();

    // Membership and per-queue aggregates.
    let mut infos: Vec<QueueInfo> = (0..nq)
        .map(|_| QueueInfo {
            classes: Vec::new(),
            rate: 0.0,
            rho: 0.0,
            total_residual: 0.0,
        })
        .collect();
    // (queue, server) -> group position in `groups`.
    let mut group_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for (ci, class) in net.classes.iter().enumerate() {
        for hop in &class.hops {
            let q = hop.queue;
            let svc = &net.queues[q].service;
            infos[q].classes.push(ci);
            infos[q].rate += class.rate;
            infos[q].rho += class.rate * svc.mean();
            infos[q].total_residual += residual_of(class.rate, svc);
            let gid = *group_of.entry((q, hop.server)).or_insert_with(|| {
                groups.push(Group {
                    queue: q,
                    level: net.queues[q].level,
                    classes: Vec::new(),
                    rate: 0.0,
                    rho: 0.0,
                    residual_plain: 0.0,
                    svc_mean: svc.mean(),
                    residual_split: None,
                });
                groups.len() - 1
            });
            groups[gid].classes.push(ci);
            groups[gid].rate += class.rate;
            groups[gid].rho += class.rate * svc.mean();
            groups[gid].residual_plain += residual_of(class.rate, svc);
        }
    }

    // Stability of every queue as a whole.
    for (q, info) in infos.iter().enumerate() {
        if info.rho >= 1.0 - STABILITY_MARGIN && !info.classes.is_empty() {
            return Err(Error::Stability(format!(
                "queue {} carries utilization {}",
                net.queues[q].name, info.rho
            )));
        }
    }

    // Departure-stream residuals for groups whose queue splits. The queue's
    // merged arrival CV² takes each class at its injection statistics.
    for g in groups.iter_mut() {
        let info = &infos[g.queue];
        if g.classes.len() == info.classes.len() {
            continue;
        }
        let svc = &net.queues[g.queue].service;
        let merged_cv2: f64 = info
            .classes
            .iter()
            .map(|&ci| {
                let r = net.classes[ci].rate;
                (r / info.rate) * (1.0 - r)
            })
            .sum();
        let merged = ArrivalFlow::new(info.rate.min(1.0 - 1e-9), merged_cv2)?;
        let cd2 = departure_cv2(&merged, svc, info.rho)?;
        let cdg2 = split_flow(cd2, g.rate / info.rate)?;
        g.residual_split = Some(contention_residual(g.rho, svc, cdg2));
    }

    // Arbitration structure: groups per server, by priority level.
    let mut server_groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut server_of_group = vec![0usize; groups.len()];
    for (&(_, s), &gid) in &group_of {
        server_of_group[gid] = s;
        server_groups.entry(s).or_default().push(gid);
    }
    for list in server_groups.values_mut() {
        list.sort_by_key(|&gid| groups[gid].level);
    }

    let hp_of = |server: usize, level: u8| -> Vec<&Group> {
        server_groups
            .get(&server)
            .map(|gids| {
                gids.iter()
                    .map(|&gid| &groups[gid])
                    .filter(|g| g.level < level)
                    .collect()
            })
            .unwrap_or_default()
    };
    let lower_residual_at = |server: usize, level: u8| -> f64 {
        server_groups
            .get(&server)
            .map(|gids| {
                gids.iter()
                    .map(|&gid| &groups[gid])
                    .filter(|g| g.level > level)
                    .map(|g| g.residual_plain)
                    .sum()
            })
            .unwrap_or(0.0)
    };

    let mut times = ClassQueueingTimes::default();

    for (q, info) in infos.iter().enumerate() {
        if info.classes.is_empty() {
            continue;
        }
        let spec = &net.queues[q];
        let qgroups: Vec<usize> = (0..groups.len())
            .filter(|&gid| groups[gid].queue == q)
            .collect();
        let all_top = qgroups
            .iter()
            .all(|&gid| hp_of(server_of_group[gid], spec.level).is_empty());

        if all_top {
            for &gid in &qgroups {
                let g = &groups[gid];
                let server = server_of_group[gid];
                let lower = lower_residual_at(server, spec.level);
                let contended = lower > 0.0
                    || server_groups[&server]
                        .iter()
                        .any(|&o| groups[o].level > spec.level);
                let splits = g.classes.len() < info.classes.len();
                let numerator = if splits && contended {
                    g.contention_residual() + lower
                } else {
                    info.total_residual + lower
                };
                let den = 1.0 - g.rho;
                if den <= STABILITY_MARGIN {
                    return Err(Error::Stability(format!(
                        "queue {} group at {} saturates",
                        spec.name, net.servers[server].name
                    )));
                }
                let w = clamp_wait(numerator / den);
                for &ci in &g.classes {
                    times.entries.insert((q, ci), WaitEntry { waiting: w, delta_t: 0.0 });
                }
            }
        } else if spec.lanes == LaneMode::PerServer || qgroups.len() == 1 {
            // Independent lanes (and strict queues with a single output):
            // each lane is one aggregated subject, and the stack already
            // carries all the interference, so no service inflation applies.
            for &gid in &qgroups {
                let g = &groups[gid];
                let server = server_of_group[gid];
                let hp = hp_of(server, spec.level);
                let lower = lower_residual_at(server, spec.level);
                let rates: Vec<f64> = g.classes.iter().map(|&ci| net.classes[ci].rate).collect();
                let tie = lane_tie_residual(&rates, spec.service.mean());
                let label = format!("queue {} at {}", spec.name, net.servers[server].name);
                let w = if hp.is_empty() {
                    let den = 1.0 - g.rho;
                    if den <= STABILITY_MARGIN {
                        return Err(Error::Stability(format!("{label} saturates")));
                    }
                    (g.residual_plain + tie + lower) / den
                } else {
                    stack_waiting(&hp, g.residual_plain, g.rho, lower, tie, &label)?.w_ref
                };
                let w = clamp_wait(w);
                for &ci in &g.classes {
                    times.entries.insert((q, ci), WaitEntry { waiting: w, delta_t: 0.0 });
                }
            }
        } else {
            // Strict FIFO across outputs: inflate each class's service by
            // its blocking busy period, then close the queue as one shared
            // queue.
            let mut num1 = 0.0;
            let mut den1 = 1.0;
            let mut per_class: Vec<(usize, f64)> = Vec::new();
            for &gid in &qgroups {
                let g = &groups[gid];
                let server = server_of_group[gid];
                let hp = hp_of(server, spec.level);
                let lower = lower_residual_at(server, spec.level);
                let label = format!("queue {} at {}", spec.name, net.servers[server].name);
                for &ci in &g.classes {
                    let rate = net.classes[ci].rate;
                    let r_i = residual_of(rate, &spec.service);
                    let rho_i = rate * spec.service.mean();
                    let (w_ref, delta_t) = if hp.is_empty() {
                        let den = 1.0 - rho_i;
                        if den <= STABILITY_MARGIN {
                            return Err(Error::Stability(format!("{label} saturates")));
                        }
                        ((r_i + lower) / den, 0.0)
                    } else {
                        let out = stack_waiting(&hp, r_i, rho_i, lower, 0.0, &label)?;
                        if out.p >= 1.0 {
                            return Err(Error::Stability(format!(
                                "{label}: blocking probability {} reaches 1",
                                out.p
                            )));
                        }
                        let dt = out.t_delay * out.p / (1.0 - out.p);
                        (out.w_ref, dt)
                    };
                    let t_star = spec.service.mean() + delta_t;
                    let rho_star = rate * t_star;
                    let r_star = (1.0 - rho_star) * (w_ref - delta_t);
                    num1 += r_star;
                    den1 -= rho_star;
                    per_class.push((ci, delta_t));
                }
            }
            if den1 <= STABILITY_MARGIN {
                return Err(Error::Stability(format!(
                    "queue {}: modified utilization {} saturates",
                    spec.name,
                    1.0 - den1
                )));
            }
            for (ci, delta_t) in per_class {
                times.entries.insert(
                    (q, ci),
                    WaitEntry {
                        waiting: clamp_wait(num1 / den1 + delta_t),
                        delta_t,
                    },
                );
            }
        }
    }

    Ok(times)
}

/// Per-pair end-to-end latency: waiting + service at every queue on the
/// route, plus the link and switch terms between them.
pub fn end_to_end(net: &QueueNetwork, times: &ClassQueueingTimes) -> Result<LatencyReport> {
    let mut rows = Vec::with_capacity(net.classes.len());
    for (ci, class) in net.classes.iter().enumerate() {
        let mut latency = 0.0;
        for hop in &class.hops {
            let entry = times.get(hop.queue, ci).ok_or_else(|| {
                Error::Inconsistent(format!(
                    "no queueing time for class {ci} at queue {}",
                    net.queues[hop.queue].name
                ))
            })?;
            latency += entry.waiting + net.queues[hop.queue].service.mean() + hop.latency_after;
        }
        rows.push(PairRecord {
            source: class.source,
            dest: class.dest,
            class: ci,
            rate: class.rate,
            analytical: Some(latency),
            simulated: None,
            mape: None,
        });
    }
    rows.sort_by_key(|r| (r.source, r.dest));
    Ok(LatencyReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::moments::ServiceMoments;
    use crate::network::{build_ring, uniform_traffic};
    use crate::priority::{ClassId, PriorityClassParams, PriorityQueueSystem};
    use crate::transforms::{
        service_rate_transform, structural_transform, CanonicalClass, ClassLoad, Diagnostics,
        SplitHighInput, SplitLowInput,
    };

    fn det2() -> ServiceMoments<f64> {
        ServiceMoments::deterministic(2.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn load(rate: f64) -> ClassLoad<f64> {
        ClassLoad::new(ArrivalFlow::geometric(rate).unwrap(), det2())
    }

    #[test]
    fn single_queue_reduces_to_basic_model() {
        let net = fixtures::geo_g1(0.25, det2()).unwrap();
        let times = analyze(&net).unwrap();
        assert!(close(times.waiting(0, 0), 0.5, 1e-12));
    }

    #[test]
    fn priority_chains_match_basic_model_exactly() {
        for rates in [vec![0.2], vec![0.15, 0.1], vec![0.1, 0.08, 0.12]] {
            let net = fixtures::priority_chain(&rates, det2()).unwrap();
            let times = analyze(&net).unwrap();
            let sys = PriorityQueueSystem::new(
                rates
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| PriorityClassParams {
                        class_id: ClassId(i as u32),
                        flow: ArrivalFlow::geometric(r).unwrap(),
                        svc: det2(),
                        priority_rank: i + 1,
                    })
                    .collect(),
            )
            .unwrap();
            let expect = sys.waiting_times_basic().unwrap();
            for (i, &w) in expect.iter().enumerate() {
                assert!(
                    close(times.waiting(i, i), w, 1e-12),
                    "class {i}: engine {} vs basic {w}",
                    times.waiting(i, i)
                );
            }
        }
    }

    #[test]
    fn split_high_fixture_matches_transform() {
        let net = fixtures::canonical_split_high(0.2, 0.2, 0.1, det2()).unwrap();
        let times = analyze(&net).unwrap();
        let out = structural_transform(&SplitHighInput {
            contending: load(0.2),
            bystander: load(0.2),
            injected: load(0.1),
        })
        .unwrap();
        assert!(close(times.waiting(0, 0), out.waiting(CanonicalClass::Class1), 1e-12));
        assert!(close(times.waiting(0, 1), out.waiting(CanonicalClass::Class2), 1e-12));
        assert!(close(times.waiting(1, 2), out.waiting(CanonicalClass::Class3), 1e-12));
    }

    #[test]
    fn split_low_fixture_matches_transform() {
        let net = fixtures::canonical_split_low(0.1, 0.1, 0.1, det2()).unwrap();
        let times = analyze(&net).unwrap();
        let out = service_rate_transform(&SplitLowInput {
            high: load(0.1),
            diverted: load(0.1),
            contending: load(0.1),
        })
        .unwrap();
        assert!(close(times.waiting(0, 0), out.waiting(CanonicalClass::Class1), 1e-12));
        assert!(close(times.waiting(1, 1), out.waiting(CanonicalClass::Class2), 1e-12));
        assert!(close(times.waiting(1, 2), out.waiting(CanonicalClass::Class3), 1e-12));
        let Diagnostics::SplitLow { busy_extension, .. } = out.diagnostics else {
            unreachable!()
        };
        assert!(close(times.get(1, 2).unwrap().delta_t, busy_extension, 1e-12));
        assert_eq!(times.get(1, 1).unwrap().delta_t, 0.0);
    }

    #[test]
    fn analyze_is_deterministic() {
        let model = build_ring(8, det2(), 1.0).unwrap();
        let net = model.bind(&uniform_traffic(&model, 0.02).unwrap()).unwrap();
        let a = analyze(&net).unwrap();
        let b = analyze(&net).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn latency_nondecreasing_in_injection_scale() {
        let model = build_ring(6, det2(), 1.0).unwrap();
        let base = uniform_traffic(&model, 0.002).unwrap();
        let mut prev = 0.0;
        for step in 1..=14 {
            let matrix = base.scaled(step as f64).unwrap();
            let net = model.bind(&matrix).unwrap();
            let report = end_to_end(&net, &analyze(&net).unwrap()).unwrap();
            let mean = report.mean_analytical().unwrap();
            assert!(
                mean >= prev - 1e-12,
                "mean latency decreased at scale {step}: {mean} < {prev}"
            );
            prev = mean;
        }
    }

    #[test]
    fn stability_error_names_the_queue() {
        let model = build_ring(8, det2(), 1.0).unwrap();
        let matrix = uniform_traffic(&model, 0.06).unwrap();
        let net = model.bind(&matrix).unwrap();
        match analyze(&net) {
            Err(Error::Stability(msg)) => assert!(msg.contains("through"), "{msg}"),
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn zero_load_latency_is_pure_traversal() {
        let model = build_ring(8, det2(), 1.0).unwrap();
        let net = model.bind(&uniform_traffic(&model, 1e-9).unwrap()).unwrap();
        let report = end_to_end(&net, &analyze(&net).unwrap()).unwrap();
        for row in &report.rows {
            let class = &net.classes[row.class];
            let hops = class.hops.len() as f64;
            let links: f64 = class.hops.iter().map(|h| h.latency_after).sum();
            let expect = hops * 2.0 + links;
            assert!(
                close(row.analytical.unwrap(), expect, 1e-6),
                "pair {}->{}",
                row.source,
                row.dest
            );
        }
    }

    #[test]
    fn empty_network_yields_empty_report() {
        let model = build_ring(4, det2(), 1.0).unwrap();
        let net = model
            .bind(&crate::network::TrafficMatrix::new(Default::default()).unwrap())
            .unwrap();
        let times = analyze(&net).unwrap();
        let report = end_to_end(&net, &times).unwrap();
        assert!(report.rows.is_empty());
    }
}
