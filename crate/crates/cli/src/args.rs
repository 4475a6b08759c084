use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use spdhg_core::solvers::Regime;
use spdhg_core::synthetic::ToyConfig;

use crate::manifest::{BatchStep, Clock, Command, DataSource, GraphSource, Model, RunManifest, Solver};

#[derive(Debug, Parser)]
#[command(name = "spdhg", version, about = "Stochastic primal-dual hybrid gradient experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Run one solver and write its trace.
    Train(RunArgs),
    /// Seed-averaged traces of several solvers/regimes on a shared epoch grid.
    Compare(RunArgs),
    /// Monte-Carlo check of the high-probability gap bounds.
    ValidateHp(RunArgs),
    /// Build a feature graph by correlation thresholding.
    MakeGraph(RunArgs),
}

impl Sub {
    pub fn split(self) -> (Command, RunArgs) {
        match self {
            Sub::Train(a) => (Command::Train, a),
            Sub::Compare(a) => (Command::Compare, a),
            Sub::ValidateHp(a) => (Command::ValidateHp, a),
            Sub::MakeGraph(a) => (Command::MakeGraph, a),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Replay a manifest written by an earlier run; other flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Training data in libsvm format (optionally gzipped).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Held-out data for the test-loss column.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Hold out this fraction of --data for the test loss (0 disables).
    #[arg(long, default_value_t = 0.0)]
    pub test_fraction: f64,
    /// Use the built-in chain-graph toy instance instead of --data.
    #[arg(long, conflicts_with = "data")]
    pub toy: bool,
    #[arg(long, default_value_t = 200)]
    pub toy_n: usize,
    #[arg(long, default_value_t = 20)]
    pub toy_d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub toy_noise: f64,

    #[arg(long, value_enum, default_value = "gglr")]
    pub model: Model,
    /// Solver(s); compare takes a comma-separated list.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub solver: Vec<Solver>,
    /// Regime(s): gc, sc-uniform, sc-nonuniform; comma-separated for compare and validate-hp.
    #[arg(long, value_delimiter = ',')]
    pub regime: Vec<Regime>,

    #[arg(long, default_value_t = 1e-5)]
    pub lambda: f64,
    /// Ridge coefficient (ggrlr only).
    #[arg(long, default_value_t = 1e-2)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 10.0)]
    pub radius_x: f64,

    /// Edge list file, or `chain`; by default the graph is built by correlation.
    #[arg(long)]
    pub graph: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub graph_threshold: f64,
    #[arg(long, default_value_t = 200)]
    pub max_edges: usize,

    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 100)]
    pub checkpoint_every: usize,
    /// Epoch budget of compare.
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0])]
    pub omega: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,

    /// Primal step of lpdhg and gadmm.
    #[arg(long, value_enum, default_value = "constant")]
    pub batch_step: BatchStep,
    /// Compute a reference saddle point and fill the gap column.
    #[arg(long)]
    pub with_gap: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub ref_tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub ref_max_iters: usize,
    #[arg(long, value_enum, default_value = "wall")]
    pub clock: Clock,

    /// Output file (train, compare, make-graph) or directory (validate-hp).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_out(command: Command) -> PathBuf {
    PathBuf::from(match command {
        Command::Train => "trace.csv",
        Command::Compare => "compare.csv",
        Command::ValidateHp => "tail_reports",
        Command::MakeGraph => "graph.txt",
    })
}

impl RunArgs {
    /// Resolves defaults and checks flag combinations; errors are usage errors.
    pub fn into_manifest(self, command: Command) -> anyhow::Result<RunManifest> {
        let data = if self.toy {
            anyhow::ensure!(self.toy_n >= 1 && self.toy_d >= 2, "--toy-n must be >= 1 and --toy-d >= 2");
            DataSource::Toy {
                n: self.toy_n,
                d: self.toy_d,
                label_noise: self.toy_noise,
                seed: ToyConfig::default().seed,
            }
        } else {
            let path = self.data.ok_or_else(|| anyhow::anyhow!("--data PATH or --toy is required"))?;
            anyhow::ensure!(
                (0.0..1.0).contains(&self.test_fraction),
                "--test-fraction must lie in [0, 1)"
            );
            DataSource::Libsvm {
                path,
                test_path: self.test_data,
                test_fraction: self.test_fraction,
            }
        };

        let graph = match self.graph.as_deref() {
            Some("chain") => GraphSource::Chain,
            Some(path) => GraphSource::File { path: path.into() },
            None if self.toy => GraphSource::Chain,
            None => GraphSource::Correlation {
                threshold: self.graph_threshold,
                max_edges: self.max_edges,
            },
        };
        anyhow::ensure!(
            self.graph_threshold > 0.0 && self.graph_threshold < 1.0,
            "--graph-threshold must lie in (0, 1)"
        );

        let solvers = match (command, self.solver.is_empty()) {
            (_, false) => self.solver,
            (Command::Compare, true) => vec![Solver::Spdhg, Solver::Lpdhg],
            (_, true) => vec![Solver::Spdhg],
        };
        let regimes = match (command, self.regime.is_empty()) {
            (_, false) => self.regime,
            (Command::ValidateHp, true) if self.model == Model::Ggrlr => Regime::ALL.to_vec(),
            (_, true) => vec![Regime::GeneralConvex],
        };
        if self.model == Model::Gglr {
            if let Some(r) = regimes.iter().find(|r| r.is_strongly_convex()) {
                anyhow::bail!("regime {r} needs a strongly convex model (--model ggrlr)");
            }
        }

        match command {
            Command::Train => anyhow::ensure!(
                solvers.len() == 1 && regimes.len() == 1,
                "train runs exactly one solver and one regime"
            ),
            Command::Compare => anyhow::ensure!(
                solvers.len() * regimes.len() >= 2,
                "compare needs at least two solver/regime combinations"
            ),
            Command::ValidateHp => {
                anyhow::ensure!(self.trials >= 1, "--trials must be at least 1");
                anyhow::ensure!(!self.omega.is_empty(), "--omega needs at least one value");
                anyhow::ensure!(self.omega.iter().all(|&w| w > 0.0 && w.is_finite()), "--omega values must be positive");
            }
            Command::MakeGraph => {}
        }
        anyhow::ensure!(self.iters >= 1, "--iters must be at least 1");
        anyhow::ensure!(self.checkpoint_every >= 1, "--checkpoint-every must be at least 1");
        anyhow::ensure!(self.epochs >= 1, "--epochs must be at least 1");
        anyhow::ensure!(self.repetitions >= 1, "--repetitions must be at least 1");
        anyhow::ensure!(self.lambda > 0.0, "--lambda must be positive");
        anyhow::ensure!(self.gamma >= 0.0, "--gamma must be non-negative");
        anyhow::ensure!(self.s > 0.0, "--s must be positive");
        anyhow::ensure!(self.rho > 0.0, "--rho must be positive");
        anyhow::ensure!(self.radius_x > 0.0, "--radius-x must be positive");
        anyhow::ensure!(self.ref_tol > 0.0, "--ref-tol must be positive");

        Ok(RunManifest {
            command,
            data,
            model: self.model,
            solvers,
            regimes,
            lambda: self.lambda,
            gamma: self.gamma,
            s: self.s,
            rho: self.rho,
            radius_x: self.radius_x,
            graph,
            iterations: self.iters,
            checkpoint_every: self.checkpoint_every,
            epochs: self.epochs,
            seed: self.seed,
            repetitions: self.repetitions,
            jobs: self.jobs,
            omegas: self.omega,
            trials: self.trials,
            batch_step: self.batch_step,
            with_gap: self.with_gap,
            reference_tol: self.ref_tol,
            reference_max_iters: self.ref_max_iters,
            clock: self.clock,
            out: self.out.unwrap_or_else(|| default_out(command)),
        })
    }
}
