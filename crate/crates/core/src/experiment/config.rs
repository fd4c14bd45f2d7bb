use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data;
use crate::federation::{Dropout, GainMode, PartitionScheme, TrainingConfig};
use crate::graph::GraphModel;
use crate::neural::{Activation, MlpSpec};

/// A graph family together with its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    #[serde(flatten)]
    pub model: GraphModel,
    pub n: usize,
}

fn default_layers() -> Vec<usize> {
    vec![784, 128, 64, 10]
}
fn default_activation() -> Activation {
    Activation::Relu
}
fn default_items() -> usize {
    128
}
fn default_partition() -> PartitionScheme {
    PartitionScheme::Iid
}

/// Dataset, model and training schedule of a federated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlSetup {
    /// Directory with `train-*`/`t10k-*` IDX files; the bundled MNIST
    /// subset when absent.
    #[serde(default)]
    pub dataset_dir: Option<PathBuf>,
    #[serde(default = "default_layers")]
    pub layers: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_items")]
    pub items_per_node: usize,
    #[serde(default = "default_partition")]
    pub partition: PartitionScheme,
    pub rounds: usize,
    /// Stop a trajectory once the mean test loss reaches this value.
    #[serde(default)]
    pub stop_below: Option<f64>,
    #[serde(default)]
    pub gain: GainMode,
    #[serde(default)]
    pub training: TrainingConfig,
    /// Evaluate on the first `test_items` test images only.
    #[serde(default)]
    pub test_items: Option<usize>,
}

impl FlSetup {
    pub fn spec(&self) -> Result<MlpSpec, crate::neural::NeuralError> {
        MlpSpec::uniform(&self.layers, self.activation)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset_dir.clone().unwrap_or_else(data::bundled_mnist_dir)
    }
}

fn default_params() -> usize {
    1000
}
fn one() -> f64 {
    1.0
}
fn default_mixing_params() -> usize {
    200
}
fn default_mixing_noise() -> f64 {
    0.01
}
fn default_eps() -> f64 {
    0.05
}
fn default_window() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsteadyScaling {
    pub families: Vec<GraphModel>,
    pub sizes: Vec<usize>,
    /// Also measure empirical mixing rounds to this total-variation distance.
    #[serde(default)]
    pub empirical_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionTrace {
    pub graph: GraphSpec,
    #[serde(default = "default_params")]
    pub params: usize,
    #[serde(default = "one")]
    pub sigma_init: f64,
    #[serde(default)]
    pub sigma_noise: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingScan {
    pub families: Vec<GraphModel>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_mixing_params")]
    pub params: usize,
    #[serde(default = "one")]
    pub sigma_init: f64,
    #[serde(default = "default_mixing_noise")]
    pub sigma_noise: f64,
    pub rounds: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_window")]
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlRun {
    pub graph: GraphSpec,
    pub fl: FlSetup,
}

fn default_gains() -> Vec<GainMode> {
    vec![GainMode::None]
}
fn default_dropouts() -> Vec<Dropout> {
    vec![Dropout::None]
}

/// Every combination of graph, gain mode and dropout mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlSweep {
    pub graphs: Vec<GraphSpec>,
    #[serde(default = "default_gains")]
    pub gains: Vec<GainMode>,
    #[serde(default = "default_dropouts")]
    pub dropouts: Vec<Dropout>,
    pub fl: FlSetup,
    /// Loss thresholds reported in the summary as rounds-to-threshold.
    #[serde(default)]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineCentral {
    /// The model trains on the union of the data these nodes would hold.
    pub nodes: usize,
    pub fl: FlSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    VsteadyScaling(VsteadyScaling),
    DiffusionTrace(DiffusionTrace),
    FlRun(FlRun),
    FlSweep(FlSweep),
    MixingScan(MixingScan),
    BaselineCentral(BaselineCentral),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::VsteadyScaling(_) => "vsteady_scaling",
            ExperimentKind::DiffusionTrace(_) => "diffusion_trace",
            ExperimentKind::FlRun(_) => "fl_run",
            ExperimentKind::FlSweep(_) => "fl_sweep",
            ExperimentKind::MixingScan(_) => "mixing_scan",
            ExperimentKind::BaselineCentral(_) => "baseline_central",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Output directory; the command line may override it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, super::ExperimentError> {
        toml::from_str(text).map_err(|e| super::ExperimentError::Parse(e.to_string()))
    }
}

/// One violated precondition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Diagnostics(Vec<Diagnostic>);

impl Diagnostics {
    fn push(&mut self, field: impl Into<String>, message: impl fmt::Display) {
        self.0.push(Diagnostic {
            field: field.into(),
            message: message.to_string(),
        });
    }

    fn graph(&mut self, field: &str, model: &GraphModel, n: usize) {
        if n == 0 {
            self.push(format!("{field}.n"), "must be at least 1");
        } else if let Err(e) = model.check(n) {
            self.push(field, e);
        }
    }

    fn sizes(&mut self, field: &str, families: &[GraphModel], sizes: &[usize]) {
        if families.is_empty() {
            self.push("families", "must not be empty");
        }
        if sizes.is_empty() {
            self.push(field, "must not be empty");
        }
        for (i, f) in families.iter().enumerate() {
            for &n in sizes {
                self.graph(&format!("families[{i}]"), f, n);
            }
        }
    }

    fn fl(&mut self, fl: &FlSetup) {
        let dir = fl.dataset_path();
        for stem in [
            "train-images-idx3-ubyte",
            "train-labels-idx1-ubyte",
            "t10k-images-idx3-ubyte",
            "t10k-labels-idx1-ubyte",
        ] {
            if !idx_exists(&dir, stem) {
                self.push("fl.dataset_dir", format!("{} has no {stem}[.gz]", dir.display()));
            }
        }
        if let Err(e) = fl.spec() {
            self.push("fl.layers", e);
        }
        if fl.items_per_node == 0 {
            self.push("fl.items_per_node", "must be at least 1");
        }
        if let PartitionScheme::Zipf { alpha } = fl.partition {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                self.push("fl.partition.alpha", format!("must be ≥ 0, got {alpha}"));
            }
        }
        if fl.rounds == 0 {
            self.push("fl.rounds", "must be at least 1");
        }
        if fl.test_items == Some(0) {
            self.push("fl.test_items", "must be at least 1");
        }
        if let Err(e) = fl.training.validate() {
            self.push("fl.training", e);
        }
        if let Err(e) = fl.gain.validate() {
            self.push("fl.gain", e);
        }
    }
}

fn idx_exists(dir: &Path, stem: &str) -> bool {
    dir.join(stem).is_file() || dir.join(format!("{stem}.gz")).is_file()
}

/// Every violated precondition of a configuration; nothing is executed.
pub fn validate(config: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut d = Diagnostics(Vec::new());
    if config.seeds.is_empty() {
        d.push("seeds", "must not be empty");
    }
    if config.name.is_empty() || config.name.contains(['/', '\\']) {
        d.push("name", "must be a non-empty file-name-safe string");
    }
    match &config.kind {
        ExperimentKind::VsteadyScaling(c) => {
            d.sizes("sizes", &c.families, &c.sizes);
            if let Some(tol) = c.empirical_tol {
                if !(tol > 0.0 && tol < 1.0) {
                    d.push("empirical_tol", format!("must be in (0, 1), got {tol}"));
                }
            }
        }
        ExperimentKind::DiffusionTrace(c) => {
            d.graph("graph", &c.graph.model, c.graph.n);
            if c.params == 0 {
                d.push("params", "must be at least 1");
            }
            for (field, s) in [("sigma_init", c.sigma_init), ("sigma_noise", c.sigma_noise)] {
                if !(s >= 0.0 && s.is_finite()) {
                    d.push(field, format!("must be finite and non-negative, got {s}"));
                }
            }
        }
        ExperimentKind::MixingScan(c) => {
            d.sizes("sizes", &c.families, &c.sizes);
            if c.params == 0 || c.rounds == 0 || c.window == 0 {
                d.push("params", "params, rounds and window must be positive");
            }
            if !(c.eps > 0.0) {
                d.push("eps", format!("must be positive, got {}", c.eps));
            }
            if !(c.sigma_noise > 0.0 && c.sigma_init >= 0.0) {
                d.push("sigma_noise", "noise must be positive for a noise floor to exist");
            }
        }
        ExperimentKind::FlRun(c) => {
            d.graph("graph", &c.graph.model, c.graph.n);
            d.fl(&c.fl);
        }
        ExperimentKind::FlSweep(c) => {
            if c.graphs.is_empty() {
                d.push("graphs", "must not be empty");
            }
            for (i, g) in c.graphs.iter().enumerate() {
                d.graph(&format!("graphs[{i}]"), &g.model, g.n);
            }
            if c.gains.is_empty() || c.dropouts.is_empty() {
                d.push("gains", "gains and dropouts must not be empty");
            }
            for (i, g) in c.gains.iter().enumerate() {
                if let Err(e) = g.validate() {
                    d.push(format!("gains[{i}]"), e);
                }
            }
            for (i, p) in c.dropouts.iter().enumerate() {
                if let Err(e) = p.validate() {
                    d.push(format!("dropouts[{i}]"), e);
                }
            }
            d.fl(&c.fl);
        }
        ExperimentKind::BaselineCentral(c) => {
            if c.nodes == 0 {
                d.push("nodes", "must be at least 1");
            }
            d.fl(&c.fl);
        }
    }
    d.0
}
