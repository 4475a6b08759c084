use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use spdhg_core::solvers::Regime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Train,
    Compare,
    ValidateHp,
    MakeGraph,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Compare => "compare",
            Command::ValidateHp => "validate-hp",
            Command::MakeGraph => "make-graph",
        }
    }
}

/// Graph-guided logistic regression, without (`gglr`) or with (`ggrlr`) ridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Gglr,
    Ggrlr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Spdhg,
    Lpdhg,
    Gadmm,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Spdhg => "spdhg",
            Solver::Lpdhg => "lpdhg",
            Solver::Gadmm => "gadmm",
        }
    }
}

/// Primal step for the batch baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BatchStep {
    /// `1/(L + sqrt(lambda_max))` for LPDHG, `1/(L + rho lambda_max)` for ADMM.
    Constant,
    /// The regime's decaying schedule.
    Schedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Measured wall time.
    Wall,
    /// Report 0 so that traces are byte-reproducible.
    None,
}

/// Where the training data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Libsvm {
        path: PathBuf,
        test_path: Option<PathBuf>,
        /// Fraction held out for the test loss when no test file is given (0 = none).
        test_fraction: f64,
    },
    /// The built-in chain-graph toy instance.
    Toy {
        n: usize,
        d: usize,
        label_noise: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSource {
    /// Edge list file, one `i j [corr]` per line.
    File { path: PathBuf },
    /// Absolute-correlation thresholding of the training features.
    Correlation { threshold: f64, max_edges: usize },
    /// Consecutive features.
    Chain,
}

/// Complete, resolved configuration of one invocation. Every run writes one
/// next to its output and `--manifest` replays it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub data: DataSource,
    pub model: Model,
    pub solvers: Vec<Solver>,
    pub regimes: Vec<Regime>,
    pub lambda: f64,
    pub gamma: f64,
    pub s: f64,
    pub rho: f64,
    pub radius_x: f64,
    pub graph: GraphSource,
    pub iterations: usize,
    pub checkpoint_every: usize,
    pub epochs: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub jobs: usize,
    pub omegas: Vec<f64>,
    pub trials: usize,
    pub batch_step: BatchStep,
    pub with_gap: bool,
    pub reference_tol: f64,
    pub reference_max_iters: usize,
    pub clock: Clock,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, self.to_json()).with_context(|| format!("cannot write {}", path.display()))
    }

    /// `trace.csv` -> `trace.manifest.json`; a directory output gets `manifest.json` inside.
    pub fn manifest_path(&self) -> PathBuf {
        match self.command {
            Command::ValidateHp => self.out.join("manifest.json"),
            _ => self.out.with_extension("manifest.json"),
        }
    }
}
