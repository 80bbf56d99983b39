//! Cycle-accurate discrete-time simulator of the priority queue network.
//!
//! Each class injects flits by an independent Bernoulli process (geometric
//! inter-arrival gaps) into the first queue of its route. Every cycle, an
//! idle server takes the head flit of the highest-priority queue lane
//! requesting it (through-traffic beats switch traffic beats injection;
//! round-robin within a level) and holds it for the queue's deterministic
//! service time; the flit then advances over its link after the configured
//! latency, or is delivered. Lane heads occupy their lane until service
//! completes, so a blocked head stalls everything behind it.
//!
//! Identical configurations and seeds produce bit-identical reports; each
//! class draws from its own seeded stream, so adding a flow never perturbs
//! the injection sequences of the others.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::cmp::Reverse;
use std::io::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{LaneMode, QueueNetwork};
use crate::report::{LatencyReport, PairRecord};

/// Simulation parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub total_cycles: u64,
    pub warmup_cycles: u64,
    pub seed: u64,
    /// Write a `cycle,event,queue,class,flit_id` log to this path.
    pub trace: Option<PathBuf>,
    /// Run the priority / work-conservation / FIFO oracles while simulating.
    pub assertions: bool,
    /// Test-only hook: inject every round(1/λ) cycles instead of randomly.
    #[doc(hidden)]
    pub deterministic_injection: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            total_cycles: 1_000_000,
            warmup_cycles: 5_000,
            seed: 1,
            trace: None,
            assertions: false,
            deterministic_injection: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EvKind {
    Inject { class: u32 },
    Arrive { class: u32, hop: u16, injected: u64, id: u64 },
    Complete { server: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Ev {
    cycle: u64,
    seq: u64,
    kind: EvKind,
}

#[derive(Debug, Clone, Copy)]
struct Flit {
    class: u32,
    hop: u16,
    injected: u64,
    entered: u64,
    id: u64,
}

struct Lane {
    flits: VecDeque<Flit>,
    in_service: bool,
    /// Fixed output for per-server lanes; `None` for strict FIFOs, whose
    /// head decides.
    fixed_server: Option<u32>,
}

struct QState {
    lanes: Vec<Lane>,
    /// server -> lane index, for per-server queues.
    lane_of_server: Vec<(u32, u32)>,
    // Waiting-room occupancy accounting (post-warmup window).
    waiting: u64,
    occ_last: u64,
    occ_integral: f64,
    /// Portion of the integral before the window midpoint, for growth
    /// detection.
    occ_integral_first_half: f64,
    arrivals: u64,
    wait_sum: f64,
    wait_count: u64,
    last_departure: Option<u64>,
    dep_gap_count: u64,
    dep_gap_sum: f64,
    dep_gap_sq_sum: f64,
}

#[derive(Debug, Clone, Copy)]
struct Feed {
    queue: u32,
    lane: u32,
    level: u8,
}

struct Srv {
    busy: bool,
    serving: Option<(u32, u32)>,
    feeds: Vec<Feed>,
    rr: usize,
}

/// Per-class injection and delivery statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassSimStats {
    pub injected: u64,
    pub delivered: u64,
    pub latency_sum: f64,
    pub gap_count: u64,
    pub gap_sum: f64,
    pub gap_sq_sum: f64,
}

/// Per-queue occupancy and waiting statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueueSimStats {
    pub arrivals: u64,
    pub wait_sum: f64,
    pub wait_count: u64,
    pub occupancy_integral: f64,
    pub final_occupancy: u64,
    pub flagged_unstable: bool,
    pub departure_gap_count: u64,
    pub departure_gap_sum: f64,
    pub departure_gap_sq_sum: f64,
}

/// Everything measured by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub total_cycles: u64,
    pub warmup_cycles: u64,
    pub seed: u64,
    pub injected_total: u64,
    pub delivered_total: u64,
    pub in_flight_end: u64,
    /// (source, dest) -> (delivered, latency sum), post-warmup flits only.
    pub pairs: BTreeMap<(usize, usize), (u64, f64)>,
    pub class_stats: Vec<ClassSimStats>,
    /// (queue, class) -> (count, waiting sum), post-warmup flits only.
    pub queue_class_waits: BTreeMap<(u32, u32), (u64, f64)>,
    pub queue_stats: Vec<QueueSimStats>,
    pub assertion_failures: Vec<String>,
}

impl SimReport {
    pub fn mean_latency(&self, source: usize, dest: usize) -> Option<f64> {
        self.pairs
            .get(&(source, dest))
            .filter(|(n, _)| *n > 0)
            .map(|(n, sum)| sum / *n as f64)
    }

    /// Flit-weighted mean latency over all delivered post-warmup flits.
    pub fn overall_mean_latency(&self) -> Option<f64> {
        let (n, sum) = self
            .pairs
            .values()
            .fold((0u64, 0.0), |(n, s), &(cn, cs)| (n + cn, s + cs));
        if n == 0 {
            None
        } else {
            Some(sum / n as f64)
        }
    }

    pub fn mean_wait(&self, queue: usize, class: usize) -> Option<f64> {
        self.queue_class_waits
            .get(&(queue as u32, class as u32))
            .filter(|(n, _)| *n > 0)
            .map(|(n, sum)| sum / *n as f64)
    }

    /// Mean waiting over every class visiting a queue.
    pub fn queue_mean_wait(&self, queue: usize) -> Option<f64> {
        let q = &self.queue_stats[queue];
        if q.wait_count == 0 {
            None
        } else {
            Some(q.wait_sum / q.wait_count as f64)
        }
    }

    /// Empirical CV² of a class's inter-injection gaps.
    pub fn measure_interarrival_cv2(&self, class: usize) -> Result<f64> {
        let st = &self.class_stats[class];
        if st.gap_count < 10_000 {
            return Err(Error::InsufficientData(format!(
                "class {class} recorded {} gaps; need at least 10000",
                st.gap_count
            )));
        }
        let n = st.gap_count as f64;
        let mean = st.gap_sum / n;
        let var = st.gap_sq_sum / n - mean * mean;
        Ok(var / (mean * mean))
    }

    /// Empirical CV² of a queue's inter-departure gaps.
    pub fn measure_departure_cv2(&self, queue: usize) -> Result<f64> {
        let st = &self.queue_stats[queue];
        if st.departure_gap_count < 10_000 {
            return Err(Error::InsufficientData(format!(
                "queue {queue} recorded {} departures; need at least 10000",
                st.departure_gap_count
            )));
        }
        let n = st.departure_gap_count as f64;
        let mean = st.departure_gap_sum / n;
        let var = st.departure_gap_sq_sum / n - mean * mean;
        Ok(var / (mean * mean))
    }

    /// |L − λW| / (λW) for one queue's waiting room, 0 for an idle queue.
    pub fn littles_law_check(&self, queue: usize) -> f64 {
        let q = &self.queue_stats[queue];
        let window = (self.total_cycles - self.warmup_cycles) as f64;
        let l = q.occupancy_integral / window;
        let lam_w = q.wait_sum / window;
        if lam_w == 0.0 {
            0.0
        } else {
            (l - lam_w).abs() / lam_w
        }
    }

    /// Per-pair simulated latencies as a latency report.
    pub fn to_latency_report(&self, net: &QueueNetwork) -> LatencyReport {
        let mut rows: Vec<PairRecord> = net
            .classes
            .iter()
            .enumerate()
            .map(|(ci, class)| PairRecord {
                source: class.source,
                dest: class.dest,
                class: ci,
                rate: class.rate,
                analytical: None,
                simulated: self.mean_latency(class.source, class.dest),
                mape: None,
            })
            .collect();
        rows.sort_by_key(|r| (r.source, r.dest));
        LatencyReport { rows }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Deterministically derive an independent seed for a numbered sub-run
/// (sweep point, repetition) from one master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(0x5EED)))
}

struct Sim<'a> {
    net: &'a QueueNetwork,
    cfg: &'a SimConfig,
    service: Vec<u64>,
    queues: Vec<QState>,
    servers: Vec<Srv>,
    heap: BinaryHeap<Reverse<Ev>>,
    seq: u64,
    hot: BTreeSet<u32>,
    rngs: Vec<ChaCha8Rng>,
    injected_total: u64,
    delivered_total: u64,
    pairs: BTreeMap<(usize, usize), (u64, f64)>,
    class_stats: Vec<ClassSimStats>,
    prev_injection: Vec<Option<u64>>,
    fifo_next: Vec<u64>,
    queue_class_waits: BTreeMap<(u32, u32), (u64, f64)>,
    trace: Option<std::io::BufWriter<std::fs::File>>,
    failures: Vec<String>,
}

/// Run one simulation. Queues must have deterministic integer service times
/// and links integer latencies; arbitrary rates are accepted, unstable
/// queues simply grow and are flagged in the report.
pub fn run(net: &QueueNetwork, cfg: &SimConfig) -> Result<SimReport> {
    net.validate()?;
    if cfg.warmup_cycles >= cfg.total_cycles {
        return Err(Error::Domain(format!(
            "warmup ({}) must be shorter than the run ({})",
            cfg.warmup_cycles, cfg.total_cycles
        )));
    }
    let mut service = Vec::with_capacity(net.queues.len());
    for q in &net.queues {
        let mean = q.service.mean();
        if q.service.cv2() != 0.0 || mean.fract() != 0.0 {
            return Err(Error::Domain(format!(
                "queue {}: the simulator requires deterministic integer service times",
                q.name
            )));
        }
        service.push(mean as u64);
    }
    for class in &net.classes {
        for hop in &class.hops {
            if hop.latency_after.fract() != 0.0 {
                return Err(Error::Domain(
                    "the simulator requires integer link latencies".into(),
                ));
            }
        }
    }

    // Lanes: strict queues get one, per-server queues one per output used.
    let mut queues: Vec<QState> = Vec::with_capacity(net.queues.len());
    for (qi, q) in net.queues.iter().enumerate() {
        let mut lanes = Vec::new();
        let mut lane_of_server = Vec::new();
        match q.lanes {
            LaneMode::Single => lanes.push(Lane {
                flits: VecDeque::new(),
                in_service: false,
                fixed_server: None,
            }),
            LaneMode::PerServer => {
                let mut outs: BTreeSet<u32> = BTreeSet::new();
                for class in &net.classes {
                    for hop in &class.hops {
                        if hop.queue == qi {
                            outs.insert(hop.server as u32);
                        }
                    }
                }
                for s in outs {
                    lane_of_server.push((s, lanes.len() as u32));
                    lanes.push(Lane {
                        flits: VecDeque::new(),
                        in_service: false,
                        fixed_server: Some(s),
                    });
                }
                if lanes.is_empty() {
                    lanes.push(Lane {
                        flits: VecDeque::new(),
                        in_service: false,
                        fixed_server: None,
                    });
                }
            }
        }
        queues.push(QState {
            lanes,
            lane_of_server,
            waiting: 0,
            occ_last: 0,
            occ_integral: 0.0,
            occ_integral_first_half: 0.0,
            arrivals: 0,
            wait_sum: 0.0,
            wait_count: 0,
            last_departure: None,
            dep_gap_count: 0,
            dep_gap_sum: 0.0,
            dep_gap_sq_sum: 0.0,
        });
    }

    // Server feed lists, ordered by priority level.
    let mut feed_sets: Vec<BTreeSet<(u8, u32, u32)>> = vec![BTreeSet::new(); net.servers.len()];
    for class in &net.classes {
        for hop in &class.hops {
            let q = hop.queue;
            let lane = match net.queues[q].lanes {
                LaneMode::Single => 0u32,
                LaneMode::PerServer => {
                    queues[q]
                        .lane_of_server
                        .iter()
                        .find(|(s, _)| *s == hop.server as u32)
                        .expect("lane exists for hop server")
                        .1
                }
            };
            feed_sets[hop.server].insert((net.queues[q].level, q as u32, lane));
        }
    }
    let servers: Vec<Srv> = feed_sets
        .into_iter()
        .map(|set| Srv {
            busy: false,
            serving: None,
            feeds: set
                .into_iter()
                .map(|(level, queue, lane)| Feed { queue, lane, level })
                .collect(),
            rr: 0,
        })
        .collect();

    let rngs = (0..net.classes.len())
        .map(|ci| ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ splitmix64(ci as u64 + 1))))
        .collect();

    let trace = match &cfg.trace {
        Some(path) => Some(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => None,
    };

    let nclasses = net.classes.len();
    let sim = Sim {
        net,
        cfg,
        service,
        queues,
        servers,
        heap: BinaryHeap::new(),
        seq: 0,
        hot: BTreeSet::new(),
        rngs,
        injected_total: 0,
        delivered_total: 0,
        pairs: BTreeMap::new(),
        class_stats: vec![ClassSimStats::default(); nclasses],
        prev_injection: vec![None; nclasses],
        fifo_next: vec![0; nclasses],
        queue_class_waits: BTreeMap::new(),
        trace,
        failures: Vec::new(),
    };
    sim.execute()
}

impl<'a> Sim<'a> {
    fn push(&mut self, cycle: u64, kind: EvKind) {
        self.seq += 1;
        self.heap.push(Reverse(Ev { cycle, seq: self.seq, kind }));
    }

    fn gap(&mut self, class: usize) -> u64 {
        let rate = self.net.classes[class].rate;
        if self.cfg.deterministic_injection {
            return (1.0 / rate).round().max(1.0) as u64;
        }
        let u: f64 = self.rngs[class].gen();
        let g = ((1.0 - u).ln() / (1.0 - rate).ln()).floor();
        (g as u64).saturating_add(1)
    }

    fn trace_line(&mut self, cycle: u64, event: &str, queue: u32, class: u32, flit: u64) {
        if let Some(w) = self.trace.as_mut() {
            let _ = writeln!(w, "{cycle},{event},{queue},{class},{flit}");
        }
    }

    fn touch_occupancy(&mut self, queue: usize, t: u64) {
        let mid = self.cfg.warmup_cycles + (self.cfg.total_cycles - self.cfg.warmup_cycles) / 2;
        let q = &mut self.queues[queue];
        let from = q.occ_last.max(self.cfg.warmup_cycles);
        if t > from {
            q.occ_integral += q.waiting as f64 * (t - from) as f64;
            let first = t.min(mid).saturating_sub(from);
            q.occ_integral_first_half += q.waiting as f64 * first as f64;
        }
        q.occ_last = q.occ_last.max(t);
    }

    fn head_server(&self, queue: usize, lane: usize) -> Option<u32> {
        let l = &self.queues[queue].lanes[lane];
        if l.in_service {
            return None;
        }
        let head = l.flits.front()?;
        Some(match l.fixed_server {
            Some(s) => s,
            None => self.net.classes[head.class as usize].hops[head.hop as usize].server as u32,
        })
    }

    fn enqueue(&mut self, flit: Flit, t: u64, label: &str) {
        let class = &self.net.classes[flit.class as usize];
        let hop = &class.hops[flit.hop as usize];
        let qi = hop.queue;
        let lane = match self.net.queues[qi].lanes {
            LaneMode::Single => 0usize,
            LaneMode::PerServer => {
                self.queues[qi]
                    .lane_of_server
                    .iter()
                    .find(|(s, _)| *s == hop.server as u32)
                    .expect("lane for server")
                    .1 as usize
            }
        };
        self.touch_occupancy(qi, t);
        let became_head = {
            let q = &mut self.queues[qi];
            q.waiting += 1;
            if t >= self.cfg.warmup_cycles {
                q.arrivals += 1;
            }
            q.lanes[lane].flits.push_back(flit);
            q.lanes[lane].flits.len() == 1
        };
        self.trace_line(t, label, qi as u32, flit.class, flit.id);
        if became_head {
            if let Some(s) = self.head_server(qi, lane) {
                self.hot.insert(s);
            }
        }
    }

    fn try_grant(&mut self, si: usize, t: u64) {
        if self.servers[si].busy {
            return;
        }
        // Gather eligible feeds at the minimal priority level.
        let feeds = self.servers[si].feeds.clone();
        let mut best_level: Option<u8> = None;
        let mut eligible: Vec<usize> = Vec::new();
        for (pos, feed) in feeds.iter().enumerate() {
            if self.head_server(feed.queue as usize, feed.lane as usize) == Some(si as u32) {
                match best_level {
                    None => {
                        best_level = Some(feed.level);
                        eligible.push(pos);
                    }
                    Some(l) if feed.level < l => {
                        best_level = Some(feed.level);
                        eligible.clear();
                        eligible.push(pos);
                    }
                    Some(l) if feed.level == l => eligible.push(pos),
                    _ => {}
                }
            }
        }
        let Some(level) = best_level else { return };
        let pick = eligible[self.servers[si].rr % eligible.len()];
        self.servers[si].rr = self.servers[si].rr.wrapping_add(1);
        let feed = feeds[pick];

        if self.cfg.assertions {
            // Priority oracle: nothing eligible strictly above the grant.
            for other in &feeds {
                if other.level < level
                    && self.head_server(other.queue as usize, other.lane as usize)
                        == Some(si as u32)
                {
                    self.failures.push(format!(
                        "cycle {t}: server {} granted level {} over waiting level {}",
                        self.net.servers[si].name, level, other.level
                    ));
                }
            }
        }

        let qi = feed.queue as usize;
        let lane = feed.lane as usize;
        let head = *self.queues[qi].lanes[lane].flits.front().expect("eligible head");
        self.touch_occupancy(qi, t);
        {
            let q = &mut self.queues[qi];
            q.waiting -= 1;
            q.lanes[lane].in_service = true;
            let wait = (t - head.entered) as f64;
            if head.entered >= self.cfg.warmup_cycles {
                q.wait_sum += wait;
                q.wait_count += 1;
            }
        }
        if head.injected >= self.cfg.warmup_cycles {
            let e = self
                .queue_class_waits
                .entry((qi as u32, head.class))
                .or_insert((0, 0.0));
            e.0 += 1;
            e.1 += (t - head.entered) as f64;
        }
        self.servers[si].busy = true;
        self.servers[si].serving = Some((feed.queue, feed.lane));
        self.trace_line(t, "grant", qi as u32, head.class, head.id);
        self.push(t + self.service[qi], EvKind::Complete { server: si as u32 });
    }

    fn complete(&mut self, si: usize, t: u64) {
        let (qi, lane) = self.servers[si].serving.take().expect("completing server serves");
        let (qi, lane) = (qi as usize, lane as usize);
        self.servers[si].busy = false;
        let flit = {
            let qs = &mut self.queues[qi];
            if t >= self.cfg.warmup_cycles {
                if let Some(prev) = qs.last_departure {
                    let gap = (t - prev) as f64;
                    qs.dep_gap_count += 1;
                    qs.dep_gap_sum += gap;
                    qs.dep_gap_sq_sum += gap * gap;
                }
            }
            qs.last_departure = Some(t);
            let l = &mut qs.lanes[lane];
            l.in_service = false;
            l.flits.pop_front().expect("served flit at head")
        };
        self.trace_line(t, "complete", qi as u32, flit.class, flit.id);
        if let Some(s) = self.head_server(qi, lane) {
            self.hot.insert(s);
        }
        self.hot.insert(si as u32);

        let class = &self.net.classes[flit.class as usize];
        let next_hop = flit.hop as usize + 1;
        if next_hop == class.hops.len() {
            self.delivered_total += 1;
            let ci = flit.class as usize;
            if flit.id != self.fifo_next[ci] && self.cfg.assertions {
                self.failures.push(format!(
                    "cycle {t}: class {ci} delivered flit {} before {}",
                    flit.id, self.fifo_next[ci]
                ));
            }
            self.fifo_next[ci] = self.fifo_next[ci].max(flit.id + 1);
            if flit.injected >= self.cfg.warmup_cycles {
                let st = &mut self.class_stats[ci];
                st.delivered += 1;
                st.latency_sum += (t - flit.injected) as f64;
                let e = self.pairs.entry((class.source, class.dest)).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += (t - flit.injected) as f64;
            }
            self.trace_line(t, "deliver", qi as u32, flit.class, flit.id);
        } else {
            let latency = class.hops[flit.hop as usize].latency_after as u64;
            let moved = Flit { hop: next_hop as u16, entered: t, ..flit };
            if latency == 0 {
                self.enqueue(moved, t, "arrive");
            } else {
                self.push(
                    t + latency,
                    EvKind::Arrive {
                        class: moved.class,
                        hop: moved.hop,
                        injected: moved.injected,
                        id: moved.id,
                    },
                );
            }
        }
    }

    fn check_work_conservation(&mut self, t: u64) {
        for si in 0..self.servers.len() {
            if self.servers[si].busy || self.servers[si].feeds.is_empty() {
                continue;
            }
            let feeds = self.servers[si].feeds.clone();
            for feed in feeds {
                if self.head_server(feed.queue as usize, feed.lane as usize) == Some(si as u32) {
                    self.failures.push(format!(
                        "cycle {t}: server {} idle while queue {} holds an eligible head",
                        self.net.servers[si].name, self.net.queues[feed.queue as usize].name
                    ));
                }
            }
        }
    }

    fn execute(mut self) -> Result<SimReport> {
        for ci in 0..self.net.classes.len() {
            let first = self.gap(ci) - 1;
            self.push(first, EvKind::Inject { class: ci as u32 });
        }

        while let Some(Reverse(head)) = self.heap.peek().copied() {
            let t = head.cycle;
            if t >= self.cfg.total_cycles {
                break;
            }
            while let Some(Reverse(ev)) = self.heap.peek().copied() {
                if ev.cycle != t {
                    break;
                }
                self.heap.pop();
                match ev.kind {
                    EvKind::Inject { class } => {
                        let ci = class as usize;
                        let id = self.class_stats[ci].injected;
                        self.class_stats[ci].injected += 1;
                        self.injected_total += 1;
                        if let Some(prev) = self.prev_injection[ci] {
                            if t >= self.cfg.warmup_cycles {
                                let st = &mut self.class_stats[ci];
                                let gap = (t - prev) as f64;
                                st.gap_count += 1;
                                st.gap_sum += gap;
                                st.gap_sq_sum += gap * gap;
                            }
                        }
                        self.prev_injection[ci] = Some(t);
                        let flit = Flit { class, hop: 0, injected: t, entered: t, id };
                        self.enqueue(flit, t, "inject");
                        let gap = self.gap(ci);
                        self.push(t.saturating_add(gap), EvKind::Inject { class });
                    }
                    EvKind::Arrive { class, hop, injected, id } => {
                        let flit = Flit { class, hop, injected, entered: t, id };
                        self.enqueue(flit, t, "arrive");
                    }
                    EvKind::Complete { server } => self.complete(server as usize, t),
                }
            }
            while let Some(s) = self.hot.pop_first() {
                self.try_grant(s as usize, t);
            }
            if self.cfg.assertions {
                self.check_work_conservation(t);
            }
        }

        let total = self.cfg.total_cycles;
        for qi in 0..self.queues.len() {
            self.touch_occupancy(qi, total);
        }
        if let Some(w) = self.trace.as_mut() {
            let _ = w.flush();
        }

        let window = (total - self.cfg.warmup_cycles) as f64;
        let queue_stats: Vec<QueueSimStats> = self
            .queues
            .iter()
            .map(|q| {
                let final_occupancy: u64 = q.lanes.iter().map(|l| l.flits.len() as u64).sum();
                // A queue in steady state has the same mean backlog in both
                // halves of the measurement window; unbounded growth does not.
                let first = q.occ_integral_first_half / (window / 2.0);
                let second = (q.occ_integral - q.occ_integral_first_half) / (window / 2.0);
                QueueSimStats {
                    arrivals: q.arrivals,
                    wait_sum: q.wait_sum,
                    wait_count: q.wait_count,
                    occupancy_integral: q.occ_integral,
                    final_occupancy,
                    flagged_unstable: second > 2.0 * first + 20.0,
                    departure_gap_count: q.dep_gap_count,
                    departure_gap_sum: q.dep_gap_sum,
                    departure_gap_sq_sum: q.dep_gap_sq_sum,
                }
            })
            .collect();
        let in_flight_queues: u64 = queue_stats.iter().map(|q| q.final_occupancy).sum();
        let in_links: u64 = self
            .heap
            .iter()
            .filter(|Reverse(ev)| matches!(ev.kind, EvKind::Arrive { .. }))
            .count() as u64;

        Ok(SimReport {
            total_cycles: total,
            warmup_cycles: self.cfg.warmup_cycles,
            seed: self.cfg.seed,
            injected_total: self.injected_total,
            delivered_total: self.delivered_total,
            in_flight_end: in_flight_queues + in_links,
            pairs: self.pairs,
            class_stats: self.class_stats,
            queue_class_waits: self.queue_class_waits,
            queue_stats,
            assertion_failures: self.failures,
        })
    }
}
