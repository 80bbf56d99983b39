//! Run configuration: a TOML file with nested sections, overridable by
//! command-line flags. `--dump-config` prints the effective merged form.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use nocperf_core::error::{Error, Result};
use nocperf_core::moments::ServiceMoments;
use nocperf_core::network::{
    build_mesh, build_ring, load_traffic_matrix, uniform_traffic, NocModel, TrafficMatrix,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologyConfig,
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    /// "ring" or "mesh".
    pub kind: String,
    /// Ring node count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    /// Mesh dimensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default = "default_service_time")]
    pub service_time: f64,
    #[serde(default = "default_link_latency")]
    pub link_latency: f64,
    /// Defaults to the link latency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_latency: Option<f64>,
}

fn default_service_time() -> f64 {
    2.0
}

fn default_link_latency() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    /// Uniform all-to-all rate per (source, destination) pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_rate: Option<f64>,
    /// CSV file `source,destination,rate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Fractions of the saturation scale λ_max to evaluate.
    #[serde(default)]
    pub fractions: Vec<f64>,
    /// Also simulate each point (otherwise the sim column stays empty).
    #[serde(default = "default_true")]
    pub simulate: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { fractions: Vec::new(), simulate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_cycles")]
    pub cycles: u64,
    #[serde(default = "default_warmup")]
    pub warmup: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_cycles() -> u64 {
    1_000_000
}

fn default_warmup() -> u64 {
    5_000
}

fn default_seed() -> u64 {
    1
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            cycles: default_cycles(),
            warmup: default_warmup(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out_dir() }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn dump(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match self.topology.kind.as_str() {
            "ring" => {
                if self.topology.nodes.is_none() {
                    return Err(Error::Format("ring topology needs 'nodes'".into()));
                }
            }
            "mesh" => {
                if self.topology.width.is_none() || self.topology.height.is_none() {
                    return Err(Error::Format("mesh topology needs 'width' and 'height'".into()));
                }
            }
            other => {
                return Err(Error::Format(format!(
                    "unknown topology kind '{other}' (expected 'ring' or 'mesh')"
                )))
            }
        }
        match (&self.traffic.uniform_rate, &self.traffic.matrix_file) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::Format(
                    "traffic needs exactly one of 'uniform_rate' or 'matrix_file'".into(),
                ))
            }
        }
        for &f in &self.sweep.fractions {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Format(format!(
                    "sweep fraction {f} must lie in (0, 1)"
                )));
            }
        }
        if self.simulation.warmup >= self.simulation.cycles {
            return Err(Error::Format(
                "simulation warmup must be shorter than the run".into(),
            ));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<NocModel> {
        let service = ServiceMoments::deterministic(self.topology.service_time)?;
        match self.topology.kind.as_str() {
            "ring" => build_ring(
                self.topology.nodes.unwrap(),
                service,
                self.topology.link_latency,
            ),
            "mesh" => build_mesh(
                self.topology.width.unwrap(),
                self.topology.height.unwrap(),
                service,
                self.topology.link_latency,
                self.topology
                    .switch_latency
                    .unwrap_or(self.topology.link_latency),
            ),
            _ => unreachable!("validated"),
        }
    }

    pub fn build_matrix(&self, model: &NocModel) -> Result<TrafficMatrix> {
        if let Some(rate) = self.traffic.uniform_rate {
            uniform_traffic(model, rate)
        } else {
            let path = self.traffic.matrix_file.as_ref().unwrap();
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            load_traffic_matrix(model, &text)
        }
    }
}
