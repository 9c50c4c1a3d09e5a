use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dsgm::communication::{BackboneGraph, CommModel, CommParams, Topology};
use dsgm::geometry::Point;
use dsgm::iteration::StepSchedule;
use dsgm::problems::{builtin, ProblemInstance, ProblemParams};

/// One experiment, as read from a JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub backbone: BackboneConfig,
    pub comm: CommConfig,
    pub schedule: ScheduleConfig,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default)]
    pub record_matrices: bool,
    #[serde(default = "default_true")]
    pub check_invariants: bool,
    /// Anchors `s` for the exported `ρ(k, s)` series.
    #[serde(default)]
    pub rho_anchors: Vec<usize>,
    /// Random spans checked against the contraction bound.
    #[serde(default = "default_spans")]
    pub contraction_spans: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_points: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
}

/// Either a named topology or an explicit undirected edge list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommConfig {
    pub gamma: f64,
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant { alpha: f64 },
    HarmonicLog,
    Power { c: f64, p: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub s: usize,
    pub k_list: Vec<usize>,
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

fn default_spans() -> usize {
    20
}

fn default_trials() -> usize {
    100
}

/// Objects built from a validated config.
pub struct Experiment {
    pub problem: ProblemInstance<f64>,
    pub model: CommModel<f64>,
    pub schedule: StepSchedule<f64>,
}

impl RunConfig {
    /// Parse errors carry the offending line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow::anyhow!("config parse error at line {}, column {}: {e}", e.line(), e.column()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// SHA-256 of the canonical serialization after command-line
    /// overrides. The output directory is not part of the hash.
    pub fn config_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("outputs");
        }
        hex::encode(Sha256::digest(value.to_string()))
    }

    pub fn build(&self) -> Result<Experiment> {
        if self.horizon == 0 {
            bail!("invalid config: horizon must be >= 1");
        }
        let params = ProblemParams {
            m: self.problem.params.m,
            n: self.problem.params.n,
            half_width: self.problem.params.half_width,
            centers: self.problem.params.centers.clone(),
        };
        let mut problem = builtin::<f64>(&self.problem.name, &params).context("invalid problem")?;
        if let Some(points) = &self.problem.initial_points {
            let points = points
                .iter()
                .map(|p| Point::from_f64(p))
                .collect::<dsgm::Result<Vec<_>>>()
                .context("invalid initial_points")?;
            problem = problem.with_initial_points(points).context("invalid initial_points")?;
        }
        let graph = self.backbone_graph(problem.num_agents())?;
        let c = self.comm;
        let params = CommParams::new(c.gamma, c.delta, c.k, c.c).context("invalid comm")?;
        let model = CommModel::new(graph, params).context("invalid comm")?;
        let schedule = match self.schedule {
            ScheduleConfig::Constant { alpha } => StepSchedule::constant(alpha),
            ScheduleConfig::HarmonicLog => Ok(StepSchedule::HarmonicLog),
            ScheduleConfig::Power { c, p } => StepSchedule::power(c, p),
        }
        .context("invalid schedule")?;
        Ok(Experiment { problem, model, schedule })
    }

    fn backbone_graph(&self, m: usize) -> Result<BackboneGraph> {
        let graph = match (&self.backbone.topology, &self.backbone.edges) {
            (Some(name), None) => {
                let kind: Topology = name.parse().context("invalid backbone")?;
                BackboneGraph::topology(kind, m)
            }
            (None, Some(edges)) => {
                let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                BackboneGraph::new(m, &pairs)
            }
            _ => bail!("invalid backbone: give exactly one of `topology` or `edges`"),
        };
        graph.context("invalid backbone")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "problem": {"name": "distinct_boxes_abs"},
        "backbone": {"topology": "ring"},
        "comm": {"gamma": 0.25, "delta": 0.5, "K": 1.0, "C": 1.0},
        "schedule": {"type": "power", "c": 1.0, "p": 0.75},
        "horizon": 10,
        "seed": 3
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.outputs, PathBuf::from("out"));
        assert!(cfg.check_invariants && !cfg.record_matrices);
        assert_eq!(cfg.contraction_spans, 20);
        let exp = cfg.build().unwrap();
        assert_eq!(exp.model.graph().edges().len(), 3);
    }

    #[test]
    fn parse_errors_report_position() {
        let broken = BASE.replace("\"horizon\": 10", "\"horizon\": ten");
        let msg = RunConfig::from_json(&broken).unwrap_err().to_string();
        assert!(msg.contains("line 6"), "{msg}");
        let unknown = BASE.replace("\"seed\": 3", "\"seed\": 3, \"sede\": 4");
        assert!(RunConfig::from_json(&unknown).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_json(BASE).unwrap();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.outputs = PathBuf::from("elsewhere");
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 4;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn validation_names_the_invariant() {
        let star = BASE
            .replace("distinct_boxes_abs\"", "common_box_quadratic\", \"params\": {\"m\": 4}")
            .replace("ring", "star")
            .replace("\"gamma\": 0.25", "\"gamma\": 0.9");
        let msg = format!("{:#}", RunConfig::from_json(&star).unwrap().build().err().unwrap());
        assert!(msg.contains("gamma <= 1/(max_degree + 1)"), "{msg}");

        let zero = BASE.replace("\"horizon\": 10", "\"horizon\": 0");
        assert!(RunConfig::from_json(&zero).unwrap().build().is_err());

        let both = BASE.replace("{\"topology\": \"ring\"}", "{\"topology\": \"ring\", \"edges\": [[0, 1]]}");
        assert!(RunConfig::from_json(&both).unwrap().build().is_err());

        let disconnected = BASE.replace("{\"topology\": \"ring\"}", "{\"edges\": [[0, 1]]}");
        assert!(RunConfig::from_json(&disconnected).unwrap().build().is_err());
    }
}
