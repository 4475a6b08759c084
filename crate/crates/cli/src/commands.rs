use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use rayon::prelude::*;

use spdhg_core::analysis::{
    compute_reference, penalty_spectral_norm_sq, smoothness_constant, tail_report, trial_gaps, trial_seed,
    BoundParams, ReferencePoint,
};
use spdhg_core::data_io::{load_libsvm, split, Dataset};
use spdhg_core::problem::{
    build_fusion_matrix, build_graph_by_correlation, chain_edges, DualSet, LossKind, PrimalSet, ProblemSpec,
};
use spdhg_core::solvers::{
    gadmm_run, lpdhg_run, spdhg_run, Checkpoints, PrimalStep, Regime, RunOptions, RunTrace, SolverConfig,
    TraceRecord,
};
use spdhg_core::synthetic::{toy_dataset, ToyConfig};
use spdhg_core::Error as CoreError;

use crate::manifest::{BatchStep, Clock, Command, DataSource, GraphSource, Model, RunManifest, Solver};
use crate::output;

/// Why a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or unusable input files (exit 2).
    Usage(anyhow::Error),
    /// Solver, reference or validation failure (exit 1).
    Run(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Run(e) => write!(f, "{e:#}"),
        }
    }
}

fn run_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Run(e.into())
}

pub type CmdResult = Result<(), Failure>;

pub fn execute(m: &RunManifest) -> CmdResult {
    match m.command {
        Command::Train => train(m),
        Command::Compare => compare(m),
        Command::ValidateHp => validate_hp(m),
        Command::MakeGraph => make_graph(m),
    }
}

fn load_input(path: &Path, dim: Option<usize>) -> Result<Dataset, Failure> {
    if !path.exists() {
        return Err(Failure::Usage(anyhow!("data file not found: {}", path.display())));
    }
    load_libsvm(path, dim).map_err(|e| Failure::Usage(anyhow!(e)))
}

/// Training rows and, when configured, a held-out set.
fn load_data(m: &RunManifest) -> Result<(Dataset, Option<Dataset>), Failure> {
    match &m.data {
        DataSource::Toy {
            n,
            d,
            label_noise,
            seed,
        } => {
            let cfg = ToyConfig {
                n: *n,
                d: *d,
                label_noise: *label_noise,
                seed: *seed,
                ..ToyConfig::default()
            };
            Ok((toy_dataset(&cfg).map_err(run_err)?, None))
        }
        DataSource::Libsvm {
            path,
            test_path,
            test_fraction,
        } => {
            let train = load_input(path, None)?;
            if let Some(tp) = test_path {
                let test = load_input(tp, None)?;
                // widen whichever side has fewer columns
                return Ok(match train.dim().cmp(&test.dim()) {
                    std::cmp::Ordering::Less => (load_input(path, Some(test.dim()))?, Some(test)),
                    std::cmp::Ordering::Greater => {
                        let d = train.dim();
                        (train, Some(load_input(tp, Some(d))?))
                    }
                    std::cmp::Ordering::Equal => (train, Some(test)),
                });
            }
            if *test_fraction > 0.0 {
                let parts = split(&train, 1.0 - test_fraction, m.seed).map_err(|e| Failure::Usage(anyhow!(e)))?;
                return Ok((parts.train, Some(parts.test)));
            }
            Ok((train, None))
        }
    }
}

/// The instance a manifest describes, plus the constants the solvers need.
pub struct Instance {
    pub spec: ProblemSpec,
    pub test: Option<Dataset>,
    pub lipschitz: f64,
    pub lambda_max: f64,
}

pub fn build_instance(m: &RunManifest) -> Result<Instance, Failure> {
    let (train, test) = load_data(m)?;
    let d = train.dim();
    let edges: Vec<(usize, usize)> = match &m.graph {
        GraphSource::Chain => chain_edges(d),
        GraphSource::File { path } => {
            if !path.exists() {
                return Err(Failure::Usage(anyhow!("graph file not found: {}", path.display())));
            }
            output::read_edges(path).map_err(Failure::Usage)?
        }
        GraphSource::Correlation { threshold, max_edges } => build_graph_by_correlation(&train, *threshold, *max_edges)
            .map_err(run_err)?
            .into_iter()
            .map(|e| (e.i, e.j))
            .collect(),
    };
    let penalty = build_fusion_matrix(&edges, d).map_err(|e| Failure::Usage(anyhow!(e)))?;
    let loss = match m.model {
        Model::Gglr => LossKind::logistic(0.0),
        Model::Ggrlr => LossKind::logistic(m.gamma),
    };
    let spec = ProblemSpec::new(
        train,
        loss,
        penalty,
        PrimalSet::L2Ball { radius: m.radius_x },
        DualSet::LinfBall { radius: m.lambda },
    )
    .map_err(|e| Failure::Usage(anyhow!(e)))?;
    let lipschitz = smoothness_constant(&spec);
    let lambda_max = penalty_spectral_norm_sq(&spec).map_err(run_err)?;
    Ok(Instance {
        spec,
        test,
        lipschitz,
        lambda_max,
    })
}

fn solver_config(
    inst: &Instance,
    m: &RunManifest,
    solver: Solver,
    regime: Regime,
    iterations: usize,
    seed: u64,
    checkpoints: Checkpoints,
) -> SolverConfig {
    let batch_constant = match solver {
        Solver::Spdhg => None,
        Solver::Lpdhg => Some(1.0 / (inst.lipschitz + inst.lambda_max.sqrt())),
        Solver::Gadmm => Some(1.0 / (inst.lipschitz + m.rho * inst.lambda_max)),
    };
    let primal_step = match (batch_constant, m.batch_step) {
        (Some(b), BatchStep::Constant) => PrimalStep::Constant(b),
        _ => PrimalStep::Schedule,
    };
    SolverConfig::new(regime, inst.lipschitz, inst.spec.mu(), iterations, seed)
        .with_s(m.s)
        .with_checkpoints(checkpoints)
        .with_primal_step(primal_step)
}

fn run_solver(
    inst: &Instance,
    m: &RunManifest,
    solver: Solver,
    cfg: &SolverConfig,
    reference: Option<&ReferencePoint>,
) -> spdhg_core::Result<RunTrace> {
    let opts = RunOptions {
        test: inst.test.as_ref(),
        reference,
    };
    match solver {
        Solver::Spdhg => spdhg_run(&inst.spec, cfg, opts),
        Solver::Lpdhg => lpdhg_run(&inst.spec, cfg, opts),
        Solver::Gadmm => gadmm_run(&inst.spec, cfg, m.rho, opts),
    }
}

fn reference_for(inst: &Instance, m: &RunManifest) -> Result<ReferencePoint, Failure> {
    compute_reference(&inst.spec, m.reference_max_iters, m.reference_tol)
        .map_err(|e| Failure::Run(anyhow!(e).context("cannot compute the reference saddle point")))
}

fn apply_clock(records: &mut [TraceRecord], clock: Clock) {
    if clock == Clock::None {
        records.iter_mut().for_each(|r| r.elapsed_ms = 0.0);
    }
}

fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Run(anyhow!("cannot start worker pool: {e}")))
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(Failure::Usage)?;
    }
    Ok(())
}

fn train(m: &RunManifest) -> CmdResult {
    let inst = build_instance(m)?;
    let reference = if m.with_gap { Some(reference_for(&inst, m)?) } else { None };
    let cfg = solver_config(
        &inst,
        m,
        m.solvers[0],
        m.regimes[0],
        m.iterations,
        m.seed,
        Checkpoints::Every(m.checkpoint_every),
    );
    ensure_parent(&m.out)?;
    m.save(&m.manifest_path()).map_err(run_err)?;
    match run_solver(&inst, m, m.solvers[0], &cfg, reference.as_ref()) {
        Ok(mut trace) => {
            apply_clock(&mut trace.records, m.clock);
            output::write_trace(&m.out, &trace.records).map_err(run_err)?;
            let last = trace.records.last().expect("a trace has its initial record");
            eprintln!(
                "{} {}: {} iterations, objective {:.6e}, wrote {}",
                m.solvers[0].name(),
                m.regimes[0],
                m.iterations,
                last.objective,
                m.out.display()
            );
            Ok(())
        }
        Err(CoreError::NonFinite { iteration, mut trace }) => {
            apply_clock(&mut trace.records, m.clock);
            output::write_trace(&m.out, &trace.records).map_err(run_err)?;
            Err(Failure::Run(anyhow!(
                "solver aborted: non-finite iterate at iteration {iteration} (partial trace in {})",
                m.out.display()
            )))
        }
        Err(e) => Err(run_err(e)),
    }
}

/// Mean of each column over repetitions; all traces share the same grid.
fn average_traces(traces: &[Vec<TraceRecord>]) -> Vec<TraceRecord> {
    let reps = traces.len() as f64;
    let mean_opt = |vals: Vec<Option<f64>>| -> Option<f64> {
        vals.iter().copied().collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / reps)
    };
    (0..traces[0].len())
        .map(|row| {
            let at = |f: &dyn Fn(&TraceRecord) -> f64| traces.iter().map(|t| f(&t[row])).sum::<f64>() / reps;
            TraceRecord {
                iteration: traces[0][row].iteration,
                epoch: traces[0][row].epoch,
                objective: at(&|r| r.objective),
                test_loss: mean_opt(traces.iter().map(|t| t[row].test_loss).collect()),
                gap: mean_opt(traces.iter().map(|t| t[row].gap).collect()),
                elapsed_ms: at(&|r| r.elapsed_ms),
            }
        })
        .collect()
}

/// Runs every solver/regime pair for `repetitions` seeds on the epoch grid
/// `0, 1, ..., epochs`: SPDHG records every `n` iterations, the batch methods
/// every iteration.
fn compare(m: &RunManifest) -> CmdResult {
    let inst = build_instance(m)?;
    let reference = if m.with_gap { Some(reference_for(&inst, m)?) } else { None };
    let n = inst.spec.n();

    let methods: Vec<(Solver, Regime)> = m
        .solvers
        .iter()
        .flat_map(|&s| m.regimes.iter().map(move |&r| (s, r)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|mi| (0..m.repetitions).map(move |rep| (mi, rep)))
        .collect();

    ensure_parent(&m.out)?;
    m.save(&m.manifest_path()).map_err(run_err)?;

    let pool = worker_pool(m.jobs)?;
    let results: Vec<spdhg_core::Result<RunTrace>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(mi, rep)| {
                let (solver, regime) = methods[mi];
                let (iterations, every) = match solver {
                    Solver::Spdhg => (m.epochs * n, n),
                    _ => (m.epochs, 1),
                };
                let seed = trial_seed(m.seed, rep as u64);
                let cfg = solver_config(&inst, m, solver, regime, iterations, seed, Checkpoints::Every(every));
                run_solver(&inst, m, solver, &cfg, reference.as_ref())
            })
            .collect()
    });

    let mut per_method: Vec<Vec<Vec<TraceRecord>>> = vec![Vec::new(); methods.len()];
    for (&(mi, rep), result) in jobs.iter().zip(results) {
        let (solver, regime) = methods[mi];
        let mut trace = result.map_err(|e| {
            Failure::Run(anyhow!(e).context(format!("{}-{regime} repetition {rep} failed", solver.name())))
        })?;
        apply_clock(&mut trace.records, m.clock);
        per_method[mi].push(trace.records);
    }
    let averaged: Vec<(String, Vec<TraceRecord>)> = methods
        .iter()
        .zip(&per_method)
        .map(|(&(solver, regime), traces)| (format!("{}-{regime}", solver.name()), average_traces(traces)))
        .collect();
    output::write_comparison(&m.out, &averaged).map_err(run_err)?;
    for (name, recs) in &averaged {
        let last = recs.last().expect("non-empty trace");
        eprintln!("{name}: epoch {} objective {:.6e}", last.epoch, last.objective);
    }
    eprintln!("wrote {}", m.out.display());
    Ok(())
}

fn omega_tag(omega: f64) -> String {
    format!("{omega}").replace('.', "p")
}

fn validate_hp(m: &RunManifest) -> CmdResult {
    let inst = build_instance(m)?;
    let reference = reference_for(&inst, m)?;
    let params = BoundParams::from_spec(&inst.spec, m.s, m.seed).map_err(run_err)?;
    fs::create_dir_all(&m.out)
        .with_context(|| format!("cannot create {}", m.out.display()))
        .map_err(Failure::Usage)?;
    m.save(&m.manifest_path()).map_err(run_err)?;

    let jobs = if m.jobs == 0 { rayon::current_num_threads() } else { m.jobs };
    let mut over_cap = Vec::new();
    for &regime in &m.regimes {
        let cfg = solver_config(
            &inst,
            m,
            Solver::Spdhg,
            regime,
            m.iterations,
            m.seed,
            Checkpoints::Every(m.iterations),
        );
        let gaps = trial_gaps(&inst.spec, &cfg, &reference, m.trials, m.seed, jobs).map_err(run_err)?;
        for &omega in &m.omegas {
            let report = tail_report(regime, &params, m.iterations - 1, omega, &gaps, &reference).map_err(run_err)?;
            let path = m.out.join(format!("tail-{regime}-omega{}.json", omega_tag(omega)));
            let mut json = serde_json::to_string_pretty(&report).map_err(run_err)?;
            json.push('\n');
            fs::write(&path, json)
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(Failure::Run)?;
            println!(
                "{regime} omega={omega}: {}/{} above bound {:.4e} (rate {:.4}, cap {:.4}, max gap {:.4e})",
                report.exceed_count,
                report.trials,
                report.bound_value,
                report.empirical_rate,
                report.theoretical_cap,
                report.max_gap
            );
            if !report.within_cap() {
                over_cap.push(format!("{regime} at omega {omega}"));
            }
        }
    }
    if over_cap.is_empty() {
        Ok(())
    } else {
        Err(Failure::Run(anyhow!("empirical rate above the cap for {}", over_cap.join(", "))))
    }
}

fn make_graph(m: &RunManifest) -> CmdResult {
    let (train, _) = load_data(m)?;
    let (threshold, max_edges) = match m.graph {
        GraphSource::Correlation { threshold, max_edges } => (threshold, max_edges),
        _ => return Err(Failure::Usage(anyhow!("make-graph builds a correlation graph; drop --graph"))),
    };
    let edges = build_graph_by_correlation(&train, threshold, max_edges).map_err(run_err)?;
    ensure_parent(&m.out)?;
    output::write_edges(&m.out, &edges).map_err(run_err)?;
    m.save(&m.manifest_path()).map_err(run_err)?;
    eprintln!("{} edges written to {}", edges.len(), m.out.display());
    Ok(())
}
