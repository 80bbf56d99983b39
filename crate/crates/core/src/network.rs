//! Topology, queue, routing, and traffic representation for priority rings
//! and meshes.
//!
//! A [`NocModel`] describes the static structure (routers, queues, servers,
//! latencies); binding a [`TrafficMatrix`] to it instantiates one traffic
//! class per (source, destination) pair with its full route and produces a
//! [`QueueNetwork`] — the flat queue/server/class graph that both the
//! analysis engine and the simulator consume. Fixtures for standalone
//! queueing structures build the same [`QueueNetwork`] directly.
//!
//! Queue roles and priority: every router owns one through-traffic queue per
//! incoming direction (in-network flits, highest priority), switch queues
//! where vertical rings feed horizontal ones (mesh), and one injection queue
//! for the local source (lowest priority). The injection queue keeps one
//! internal lane per output it feeds, so a flit waiting for a busy direction
//! does not stall flits leaving through a free one; through and switch
//! queues are strict FIFOs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::moments::ServiceMoments;

pub type NodeId = usize;

/// Ring or mesh shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NocTopology {
    Ring { nodes: usize },
    Mesh { width: usize, height: usize },
}

impl NocTopology {
    pub fn node_count(&self) -> usize {
        match *self {
            NocTopology::Ring { nodes } => nodes,
            NocTopology::Mesh { width, height } => width * height,
        }
    }
}

/// What a queue is for; also fixes its priority level at shared servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueRole {
    /// In-network flits passing through a router. Highest priority.
    Through,
    /// Flits turning from a vertical ring onto a horizontal ring.
    Switch,
    /// Newly injected flits from the local source. Lowest priority.
    Injection,
}

/// Queue discipline across the outputs a queue feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneMode {
    /// One FIFO; the head blocks everything behind it regardless of output.
    Single,
    /// One FIFO lane per output server; lanes drain independently.
    PerServer,
}

#[derive(Debug, Clone)]
pub struct QueueSpec {
    pub name: String,
    pub router: Option<NodeId>,
    pub role: QueueRole,
    pub service: ServiceMoments<f64>,
    /// Priority level at shared servers; smaller wins.
    pub level: u8,
    pub lanes: LaneMode,
}

#[derive(Debug, Clone)]
pub struct ServerSpec {
    pub name: String,
}

/// One visit of a class to a queue: the output server it requests there and
/// the constant latency to the next queue (or to delivery).
#[derive(Debug, Clone, Copy)]
pub struct Hop {
    pub queue: usize,
    pub server: usize,
    pub latency_after: f64,
}

/// A traffic class: fixed source, destination, rate, and route.
#[derive(Debug, Clone)]
pub struct ClassInstance {
    pub source: NodeId,
    pub dest: NodeId,
    pub rate: f64,
    pub hops: Vec<Hop>,
}

/// Flat queue/server/class graph consumed by analysis and simulation.
#[derive(Debug, Clone)]
pub struct QueueNetwork {
    pub queues: Vec<QueueSpec>,
    pub servers: Vec<ServerSpec>,
    pub classes: Vec<ClassInstance>,
}

impl QueueNetwork {
    /// Structural validation: hop indices in range, distinct priority levels
    /// among the queues feeding each server, positive rates.
    pub fn validate(&self) -> Result<()> {
        let mut per_server: BTreeMap<usize, BTreeMap<usize, u8>> = BTreeMap::new();
        for (ci, class) in self.classes.iter().enumerate() {
            if class.hops.is_empty() {
                return Err(Error::Inconsistent(format!("class {ci} has an empty route")));
            }
            if !(class.rate > 0.0 && class.rate < 1.0) {
                return Err(Error::Domain(format!(
                    "class {ci} rate {} must lie in (0, 1)",
                    class.rate
                )));
            }
            for hop in &class.hops {
                if hop.queue >= self.queues.len() || hop.server >= self.servers.len() {
                    return Err(Error::Inconsistent(format!(
                        "class {ci} references unknown queue or server"
                    )));
                }
                if hop.latency_after < 0.0 {
                    return Err(Error::Domain("negative link latency".into()));
                }
                per_server
                    .entry(hop.server)
                    .or_default()
                    .insert(hop.queue, self.queues[hop.queue].level);
            }
        }
        for (server, queues) in per_server {
            let mut levels: Vec<u8> = queues.values().copied().collect();
            levels.sort_unstable();
            levels.dedup();
            if levels.len() != queues.len() {
                return Err(Error::Inconsistent(format!(
                    "server {} is fed by two queues at the same priority level",
                    self.servers[server].name
                )));
            }
        }
        Ok(())
    }

    pub fn queue_index(&self, name: &str) -> Option<usize> {
        self.queues.iter().position(|q| q.name == name)
    }

    /// Utilization Σ λ_k T̄ of every queue under the bound classes.
    pub fn queue_utilizations(&self) -> Vec<f64> {
        let mut util = vec![0.0; self.queues.len()];
        for class in &self.classes {
            for hop in &class.hops {
                util[hop.queue] += class.rate * self.queues[hop.queue].service.mean();
            }
        }
        util
    }

    /// Router sequence visited by a class (for route inspection).
    pub fn router_path(&self, class: usize) -> Vec<NodeId> {
        self.classes[class]
            .hops
            .iter()
            .filter_map(|h| self.queues[h.queue].router)
            .collect()
    }
}

/// Per-pair injection rates.
#[derive(Debug, Clone, Default)]
pub struct TrafficMatrix {
    entries: BTreeMap<(NodeId, NodeId), f64>,
}

impl TrafficMatrix {
    /// Build from explicit entries. Rates must be nonnegative; the total
    /// rate leaving any source must stay below one flit/cycle.
    pub fn new(entries: BTreeMap<(NodeId, NodeId), f64>) -> Result<Self> {
        let mut per_source: BTreeMap<NodeId, f64> = BTreeMap::new();
        for (&(s, d), &rate) in &entries {
            if !(rate >= 0.0) {
                return Err(Error::Domain(format!("rate for pair ({s},{d}) is negative")));
            }
            if s == d && rate > 0.0 {
                return Err(Error::Domain(format!("self-pair ({s},{s}) cannot carry traffic")));
            }
            *per_source.entry(s).or_default() += rate;
        }
        for (s, total) in per_source {
            if total >= 1.0 {
                return Err(Error::Domain(format!(
                    "source {s} injects {total} flits/cycle in total; must stay below 1"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &BTreeMap<(NodeId, NodeId), f64> {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(|&r| r == 0.0)
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.entries
                .iter()
                .map(|(&k, &r)| (k, r * factor))
                .collect(),
        )
    }

    /// Parse the `source,destination,rate` CSV format. Duplicate pairs and
    /// malformed rows are format errors; node ids are validated against
    /// `node_count`.
    pub fn parse_csv(text: &str, node_count: usize) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break l,
                None => return Err(Error::Format("empty traffic matrix file".into())),
            }
        };
        let normalized: String = header.split_whitespace().collect();
        if normalized != "source,destination,rate" {
            return Err(Error::Format(format!(
                "expected header 'source,destination,rate', found '{}'",
                header.trim()
            )));
        }
        let mut entries = BTreeMap::new();
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Format(format!(
                    "line {}: expected 3 fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let source: NodeId = fields[0]
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad source id '{}'", lineno + 1, fields[0])))?;
            let dest: NodeId = fields[1]
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad destination id '{}'", lineno + 1, fields[1])))?;
            let rate: f64 = fields[2]
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad rate '{}'", lineno + 1, fields[2])))?;
            if source >= node_count || dest >= node_count {
                return Err(Error::Format(format!(
                    "line {}: node id out of range for a {}-node network",
                    lineno + 1,
                    node_count
                )));
            }
            if entries.insert((source, dest), rate).is_some() {
                return Err(Error::Format(format!(
                    "line {}: duplicate pair ({source},{dest})",
                    lineno + 1
                )));
            }
        }
        Self::new(entries)
    }
}

/// Static NoC structure plus default latencies and service.
#[derive(Debug, Clone)]
pub struct NocModel {
    pub topology: NocTopology,
    pub service: ServiceMoments<f64>,
    pub link_latency: f64,
    pub switch_latency: f64,
}

pub const DEFAULT_LINK_LATENCY: f64 = 1.0;
pub const DEFAULT_SERVICE_CYCLES: f64 = 2.0;

/// Ring of `n` routers with bidirectional links, shortest-direction routing,
/// and a clockwise tie-break on equal distances.
pub fn build_ring(n: usize, service: ServiceMoments<f64>, link_latency: f64) -> Result<NocModel> {
    if n < 2 {
        return Err(Error::Domain(format!("ring needs at least 2 nodes, got {n}")));
    }
    if link_latency < 0.0 {
        return Err(Error::Domain("link latency must be >= 0".into()));
    }
    Ok(NocModel {
        topology: NocTopology::Ring { nodes: n },
        service,
        link_latency,
        switch_latency: link_latency,
    })
}

/// Mesh of `width × height` routers built from one bidirectional horizontal
/// ring per row and one vertical ring per column, joined by switch queues.
/// Routing is Y-X: vertical ring first, then the switch, then horizontal.
pub fn build_mesh(
    width: usize,
    height: usize,
    service: ServiceMoments<f64>,
    link_latency: f64,
    switch_latency: f64,
) -> Result<NocModel> {
    if width < 2 || height < 2 {
        return Err(Error::Domain(format!(
            "mesh needs width and height >= 2, got {width}x{height}"
        )));
    }
    if link_latency < 0.0 || switch_latency < 0.0 {
        return Err(Error::Domain("latencies must be >= 0".into()));
    }
    Ok(NocModel {
        topology: NocTopology::Mesh { width, height },
        service,
        link_latency,
        switch_latency,
    })
}

/// Uniform all-to-all traffic at `rate_per_pair`.
pub fn uniform_traffic(model: &NocModel, rate_per_pair: f64) -> Result<TrafficMatrix> {
    let n = model.topology.node_count();
    let mut entries = BTreeMap::new();
    for s in 0..n {
        for d in 0..n {
            if s != d {
                entries.insert((s, d), rate_per_pair);
            }
        }
    }
    TrafficMatrix::new(entries)
}

/// Parse a traffic-matrix CSV against a model (node ids must exist).
pub fn load_traffic_matrix(model: &NocModel, text: &str) -> Result<TrafficMatrix> {
    TrafficMatrix::parse_csv(text, model.topology.node_count())
}

/// Largest uniform scale `s` keeping every queue's utilization below one
/// under `s × matrix`; `None` when the matrix carries no traffic.
pub fn lambda_max(model: &NocModel, matrix: &TrafficMatrix) -> Result<Option<f64>> {
    if matrix.is_empty() {
        return Ok(None);
    }
    let net = model.bind(matrix)?;
    let max_util = net
        .queue_utilizations()
        .into_iter()
        .fold(0.0f64, f64::max);
    if max_util == 0.0 {
        Ok(None)
    } else {
        Ok(Some(1.0 / max_util))
    }
}

struct NetBuilder {
    queues: Vec<QueueSpec>,
    servers: Vec<ServerSpec>,
    index: BTreeMap<String, usize>,
}

impl NetBuilder {
    fn new() -> Self {
        Self {
            queues: Vec::new(),
            servers: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    fn queue(
        &mut self,
        name: String,
        router: NodeId,
        role: QueueRole,
        service: ServiceMoments<f64>,
        level: u8,
        lanes: LaneMode,
    ) -> usize {
        let id = self.queues.len();
        self.index.insert(format!("q:{name}"), id);
        self.queues.push(QueueSpec {
            name,
            router: Some(router),
            role,
            service,
            level,
            lanes,
        });
        id
    }

    fn server(&mut self, name: String) -> usize {
        let id = self.servers.len();
        self.index.insert(format!("s:{name}"), id);
        self.servers.push(ServerSpec { name });
        id
    }

    fn q(&self, name: &str) -> usize {
        self.index[&format!("q:{name}")]
    }

    fn s(&self, name: &str) -> usize {
        self.index[&format!("s:{name}")]
    }
}

impl NocModel {
    /// Instantiate traffic classes with routes and produce the flat network.
    /// Pairs with zero rate are dropped.
    pub fn bind(&self, matrix: &TrafficMatrix) -> Result<QueueNetwork> {
        let n = self.topology.node_count();
        for (&(s, d), _) in matrix.entries() {
            if s >= n || d >= n {
                return Err(Error::Format(format!(
                    "pair ({s},{d}) references a node outside the {n}-node network"
                )));
            }
        }
        let net = match self.topology {
            NocTopology::Ring { nodes } => self.bind_ring(nodes, matrix),
            NocTopology::Mesh { width, height } => self.bind_mesh(width, height, matrix),
        };
        net.validate()?;
        Ok(net)
    }

    fn bind_ring(&self, n: usize, matrix: &TrafficMatrix) -> QueueNetwork {
        let mut b = NetBuilder::new();
        for x in 0..n {
            for dir in ["cw", "ccw"] {
                b.queue(
                    format!("r{x}.through.{dir}"),
                    x,
                    QueueRole::Through,
                    self.service,
                    0,
                    LaneMode::Single,
                );
                b.server(format!("r{x}.out.{dir}"));
                b.server(format!("r{x}.exit.{dir}"));
            }
            b.queue(
                format!("r{x}.inject"),
                x,
                QueueRole::Injection,
                self.service,
                1,
                LaneMode::PerServer,
            );
        }
        let mut classes = Vec::new();
        for (&(s, d), &rate) in matrix.entries() {
            if rate == 0.0 {
                continue;
            }
            let dist_cw = (d + n - s) % n;
            let dist_ccw = (s + n - d) % n;
            // Clockwise on ties.
            let (dir, step, dist): (&str, isize, usize) = if dist_cw <= dist_ccw {
                ("cw", 1, dist_cw)
            } else {
                ("ccw", -1, dist_ccw)
            };
            let mut hops = Vec::with_capacity(dist + 1);
            hops.push(Hop {
                queue: b.q(&format!("r{s}.inject")),
                server: b.s(&format!("r{s}.out.{dir}")),
                latency_after: self.link_latency,
            });
            for k in 1..=dist {
                let x = ((s as isize + step * k as isize).rem_euclid(n as isize)) as usize;
                if k < dist {
                    hops.push(Hop {
                        queue: b.q(&format!("r{x}.through.{dir}")),
                        server: b.s(&format!("r{x}.out.{dir}")),
                        latency_after: self.link_latency,
                    });
                } else {
                    hops.push(Hop {
                        queue: b.q(&format!("r{x}.through.{dir}")),
                        server: b.s(&format!("r{x}.exit.{dir}")),
                        latency_after: 0.0,
                    });
                }
            }
            classes.push(ClassInstance { source: s, dest: d, rate, hops });
        }
        QueueNetwork {
            queues: b.queues,
            servers: b.servers,
            classes,
        }
    }

    fn bind_mesh(&self, width: usize, height: usize, matrix: &TrafficMatrix) -> QueueNetwork {
        let id = |r: usize, c: usize| r * width + c;
        let mut b = NetBuilder::new();
        for r in 0..height {
            for c in 0..width {
                let x = id(r, c);
                // Vertical rings run north/south, horizontal east/west.
                for dir in ["n", "s", "e", "w"] {
                    b.queue(
                        format!("r{x}.through.{dir}"),
                        x,
                        QueueRole::Through,
                        self.service,
                        0,
                        LaneMode::Single,
                    );
                    b.server(format!("r{x}.out.{dir}"));
                    b.server(format!("r{x}.exit.{dir}"));
                }
                for dir in ["e", "w"] {
                    b.queue(
                        format!("r{x}.switch.{dir}"),
                        x,
                        QueueRole::Switch,
                        self.service,
                        1,
                        LaneMode::Single,
                    );
                }
                b.queue(
                    format!("r{x}.inject"),
                    x,
                    QueueRole::Injection,
                    self.service,
                    2,
                    LaneMode::PerServer,
                );
            }
        }
        let mut classes = Vec::new();
        for (&(s, d), &rate) in matrix.entries() {
            if rate == 0.0 {
                continue;
            }
            let (r0, c0) = (s / width, s % width);
            let (r1, c1) = (d / width, d % width);
            let vdir = if r1 > r0 { "s" } else { "n" };
            let hdir = if c1 > c0 { "e" } else { "w" };
            let vstep: isize = if r1 > r0 { 1 } else { -1 };
            let hstep: isize = if c1 > c0 { 1 } else { -1 };
            let a = r0.abs_diff(r1);
            let bdist = c0.abs_diff(c1);
            let mut hops = Vec::with_capacity(a + bdist + 2);

            if a > 0 {
                hops.push(Hop {
                    queue: b.q(&format!("r{s}.inject")),
                    server: b.s(&format!("r{s}.out.{vdir}")),
                    latency_after: self.link_latency,
                });
                for k in 1..=a {
                    let r = (r0 as isize + vstep * k as isize) as usize;
                    let x = id(r, c0);
                    if k < a {
                        hops.push(Hop {
                            queue: b.q(&format!("r{x}.through.{vdir}")),
                            server: b.s(&format!("r{x}.out.{vdir}")),
                            latency_after: self.link_latency,
                        });
                    } else if bdist == 0 {
                        hops.push(Hop {
                            queue: b.q(&format!("r{x}.through.{vdir}")),
                            server: b.s(&format!("r{x}.exit.{vdir}")),
                            latency_after: 0.0,
                        });
                    } else {
                        // Leave the vertical ring into the switch queue.
                        hops.push(Hop {
                            queue: b.q(&format!("r{x}.through.{vdir}")),
                            server: b.s(&format!("r{x}.exit.{vdir}")),
                            latency_after: self.switch_latency,
                        });
                        hops.push(Hop {
                            queue: b.q(&format!("r{x}.switch.{hdir}")),
                            server: b.s(&format!("r{x}.out.{hdir}")),
                            latency_after: self.link_latency,
                        });
                    }
                }
            } else {
                hops.push(Hop {
                    queue: b.q(&format!("r{s}.inject")),
                    server: b.s(&format!("r{s}.out.{hdir}")),
                    latency_after: self.link_latency,
                });
            }
            for k in 1..=bdist {
                let c = (c0 as isize + hstep * k as isize) as usize;
                let x = id(r1, c);
                if k < bdist {
                    hops.push(Hop {
                        queue: b.q(&format!("r{x}.through.{hdir}")),
                        server: b.s(&format!("r{x}.out.{hdir}")),
                        latency_after: self.link_latency,
                    });
                } else {
                    hops.push(Hop {
                        queue: b.q(&format!("r{x}.through.{hdir}")),
                        server: b.s(&format!("r{x}.exit.{hdir}")),
                        latency_after: 0.0,
                    });
                }
            }
            classes.push(ClassInstance { source: s, dest: d, rate, hops });
        }
        QueueNetwork {
            queues: b.queues,
            servers: b.servers,
            classes,
        }
    }
}
