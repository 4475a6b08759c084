//! SPDHG in its three step-size/averaging regimes, plus two baselines:
//! linearized PDHG (exact gradient) and gradient-based ADMM.
//!
//! One PDHG iteration is
//!
//! ```text
//! y+ = Proj_Y(y + s F x)
//! x+ = Proj_X(x - beta (g(x) + F^T y+))
//! ```
//!
//! where `g` is a one-sample gradient (SPDHG) or the full gradient (LPDHG).
//! Iterates are averaged online with the regime's weights and every metric
//! in the trace is evaluated at the running average.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{duality_gap, ReferencePoint};
use crate::data_io::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{empirical_loss, DualSet, ProblemSpec};
use crate::projections::dual_update_in_place;
use crate::{stream_rng, SolverRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `beta = 1/(sqrt(k+1) + L)`, uniform averaging.
    #[serde(rename = "gc")]
    GeneralConvex,
    /// `beta = 1/(mu (k+1) + L)`, uniform averaging.
    #[serde(rename = "sc-uniform")]
    StronglyConvexUniform,
    /// `beta = 2/(mu (k+2) + 2L)`, weights proportional to `k+1`.
    #[serde(rename = "sc-nonuniform")]
    StronglyConvexNonUniform,
}

impl Regime {
    pub const ALL: [Regime; 3] = [
        Regime::GeneralConvex,
        Regime::StronglyConvexUniform,
        Regime::StronglyConvexNonUniform,
    ];

    pub fn is_strongly_convex(self) -> bool {
        !matches!(self, Regime::GeneralConvex)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::GeneralConvex => "gc",
            Regime::StronglyConvexUniform => "sc-uniform",
            Regime::StronglyConvexNonUniform => "sc-nonuniform",
        }
    }

    /// Unnormalized averaging weight of iterate `k+1`.
    fn raw_weight(self, k: usize) -> f64 {
        match self {
            Regime::StronglyConvexNonUniform => (k + 1) as f64,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gc" => Ok(Regime::GeneralConvex),
            "sc-uniform" => Ok(Regime::StronglyConvexUniform),
            "sc-nonuniform" => Ok(Regime::StronglyConvexNonUniform),
            other => Err(Error::InvalidArgument(format!(
                "unknown regime '{other}' (expected gc, sc-uniform or sc-nonuniform)"
            ))),
        }
    }
}

/// Primal step `beta^{k+1}` of the regime at iteration `k`.
pub fn step_size(regime: Regime, k: usize, lipschitz: f64, mu: f64) -> Result<f64> {
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz constant must be finite and >= 0, got {lipschitz}"
        )));
    }
    if regime.is_strongly_convex() && !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regime {regime} needs a positive strong convexity constant, got {mu}"
        )));
    }
    let k = k as f64;
    Ok(match regime {
        Regime::GeneralConvex => 1.0 / ((k + 1.0).sqrt() + lipschitz),
        Regime::StronglyConvexUniform => 1.0 / (mu * (k + 1.0) + lipschitz),
        Regime::StronglyConvexNonUniform => 2.0 / (mu * (k + 2.0) + 2.0 * lipschitz),
    })
}

/// Normalized weight `alpha^{k+1}` of iterate `x^{k+1}` in the average over `k = 0..=t`.
pub fn averaging_weight(regime: Regime, k: usize, t: usize) -> Result<f64> {
    if k > t {
        return Err(Error::InvalidArgument(format!("weight index {k} exceeds horizon {t}")));
    }
    let (k, t) = (k as f64, t as f64);
    Ok(match regime {
        Regime::StronglyConvexNonUniform => 2.0 * (k + 1.0) / ((t + 1.0) * (t + 2.0)),
        _ => 1.0 / (t + 1.0),
    })
}

/// How the primal step length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimalStep {
    /// The regime's decaying schedule.
    Schedule,
    /// A fixed step.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    /// Every `n` iterations, plus the last one.
    Every(usize),
    /// At the listed iteration counts, plus the last one.
    At(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub regime: Regime,
    /// Dual proximal parameter `s > 0`.
    pub s: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub iterations: usize,
    pub seed: u64,
    pub checkpoints: Checkpoints,
    pub primal_step: PrimalStep,
}

impl SolverConfig {
    /// Schedule steps, `s = 1`, checkpoints only at the start and the end.
    pub fn new(regime: Regime, lipschitz: f64, mu: f64, iterations: usize, seed: u64) -> Self {
        Self {
            regime,
            s: 1.0,
            lipschitz,
            mu,
            iterations,
            seed,
            checkpoints: Checkpoints::Every(iterations.max(1)),
            primal_step: PrimalStep::Schedule,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Checkpoints) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_primal_step(mut self, step: PrimalStep) -> Self {
        self.primal_step = step;
        self
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidArgument(format!("s must be positive, got {}", self.s)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("at least one iteration is required".into()));
        }
        if let Checkpoints::Every(0) = self.checkpoints {
            return Err(Error::InvalidArgument("checkpoint interval must be positive".into()));
        }
        if let PrimalStep::Constant(b) = self.primal_step {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!("constant step must be positive, got {b}")));
            }
        }
        // surfaces the mu / L checks of the schedule
        step_size(self.regime, 0, self.lipschitz, self.mu)?;
        Ok(())
    }

    fn primal_step_at(&self, k: usize) -> Result<f64> {
        match self.primal_step {
            PrimalStep::Schedule => step_size(self.regime, k, self.lipschitz, self.mu),
            PrimalStep::Constant(b) => Ok(b),
        }
    }

    fn is_checkpoint(&self, iteration: usize) -> bool {
        iteration == self.iterations
            || match &self.checkpoints {
                Checkpoints::Every(c) => iteration % c == 0,
                Checkpoints::At(list) => list.contains(&iteration),
            }
    }
}

/// Current iterates plus the weighted running sums used for averaging.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_accum: Vec<f64>,
    pub y_accum: Vec<f64>,
    pub weight_accum: f64,
    pub k: usize,
}

impl IterateState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            x_accum: vec![0.0; x.len()],
            y_accum: vec![0.0; y.len()],
            x,
            y,
            weight_accum: 0.0,
            k: 0,
        }
    }

    /// Adds the current `(x, y)` to the running sums with weight `w` and advances `k`.
    pub fn accumulate(&mut self, w: f64) {
        for (a, v) in self.x_accum.iter_mut().zip(&self.x) {
            *a += w * v;
        }
        for (a, v) in self.y_accum.iter_mut().zip(&self.y) {
            *a += w * v;
        }
        self.weight_accum += w;
        self.k += 1;
    }

    fn accumulate_dual(&mut self, w: f64, y: &[f64]) {
        for (a, v) in self.x_accum.iter_mut().zip(&self.x) {
            *a += w * v;
        }
        for (a, v) in self.y_accum.iter_mut().zip(y) {
            *a += w * v;
        }
        self.weight_accum += w;
        self.k += 1;
    }

    fn average(&self) -> (Vec<f64>, Vec<f64>) {
        let w = self.weight_accum;
        (
            self.x_accum.iter().map(|a| a / w).collect(),
            self.y_accum.iter().map(|a| a / w).collect(),
        )
    }
}

/// Weighted averages `(x_bar, y_bar)` of every iterate accumulated so far.
pub fn finalize_average(state: &IterateState) -> Result<(Vec<f64>, Vec<f64>)> {
    if state.k == 0 || !(state.weight_accum > 0.0) {
        return Err(Error::InvalidArgument("no iterations have been averaged yet".into()));
    }
    Ok(state.average())
}

/// One row of a run trace, evaluated at the averaged iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Samples consumed divided by the training-set size.
    pub epoch: f64,
    /// Training objective `l(x) + r(Fx)`.
    pub objective: f64,
    /// Mean loss on the held-out set, when one was supplied.
    pub test_loss: Option<f64>,
    /// Duality gap against the reference point, when one was supplied.
    pub gap: Option<f64>,
    /// Cumulative solver time, excluding metric evaluation.
    pub elapsed_ms: f64,
}

/// Arithmetic work and vector updates charged by a solver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub flops: u64,
    pub vector_updates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub x_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    pub x_last: Vec<f64>,
    /// Last dual iterate (the multiplier for ADMM).
    pub y_last: Vec<f64>,
    /// Last splitting variable `z`, ADMM only.
    pub z_last: Option<Vec<f64>>,
    pub ops: OpCounts,
    pub iterations: usize,
}

impl RunTrace {
    /// Charged operations per iteration.
    pub fn flops_per_iteration(&self) -> f64 {
        self.ops.flops as f64 / self.iterations.max(1) as f64
    }
}

/// Optional evaluation inputs for a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub test: Option<&'a Dataset>,
    pub reference: Option<&'a ReferencePoint>,
}

enum GradientOracle {
    Stochastic(SolverRng),
    Full,
}

/// Flop model shared by the solvers: a multiply-add is 2, a compare/clamp 1.
struct Costs {
    d: u64,
    l: u64,
    f_nnz: u64,
    a_nnz: u64,
    n: u64,
    ridge: bool,
    l2_primal: bool,
}

impl Costs {
    fn new(spec: &ProblemSpec) -> Self {
        Self {
            d: spec.dim() as u64,
            l: spec.dual_dim() as u64,
            f_nnz: spec.penalty().nnz() as u64,
            a_nnz: spec.data().features().nnz() as u64,
            n: spec.n() as u64,
            ridge: spec.loss().ridge > 0.0,
            l2_primal: matches!(spec.primal_set(), crate::problem::PrimalSet::L2Ball { .. }),
        }
    }

    fn f_product(&self) -> u64 {
        2 * self.f_nnz
    }

    fn sample_gradient(&self, row_nnz: u64) -> u64 {
        // zero fill, prediction, scatter, ridge
        self.d + 4 * row_nnz + if self.ridge { 2 * self.d } else { 0 }
    }

    fn full_gradient(&self) -> u64 {
        self.d + 4 * self.a_nnz + self.d + if self.ridge { 2 * self.d } else { 0 }
    }

    fn primal_projection(&self) -> u64 {
        if self.l2_primal {
            3 * self.d
        } else {
            2 * self.d
        }
    }

    fn averaging(&self) -> u64 {
        2 * (self.d + self.l)
    }
}

fn check_start(spec: &ProblemSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let x0 = vec![0.0; spec.dim()];
    let violation = spec.primal_set().violation(&x0);
    if violation > 0.0 {
        return Err(Error::Infeasible {
            what: "starting point x0 = 0",
            violation,
        });
    }
    Ok((x0, vec![0.0; spec.dual_dim()]))
}

struct Recorder<'a> {
    spec: &'a ProblemSpec,
    opts: RunOptions<'a>,
    records: Vec<TraceRecord>,
}

impl<'a> Recorder<'a> {
    fn record(&mut self, iteration: usize, samples: u64, x: &[f64], y: &[f64], elapsed_ms: f64) -> Result<()> {
        let spec = self.spec;
        let objective = spec.objective(x)?;
        let test_loss = match self.opts.test {
            Some(test) => Some(empirical_loss(spec.loss().loss, test, x)?),
            None => None,
        };
        let gap = match self.opts.reference {
            Some(r) => Some(duality_gap(spec, r, x, y)?),
            None => None,
        };
        self.records.push(TraceRecord {
            iteration,
            epoch: samples as f64 / spec.n() as f64,
            objective,
            test_loss,
            gap,
            elapsed_ms,
        });
        Ok(())
    }
}

fn pdhg_loop(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    opts: RunOptions<'_>,
    mut oracle: GradientOracle,
) -> Result<RunTrace> {
    cfg.validate()?;
    let (x0, y0) = check_start(spec)?;
    let d = spec.dim();
    let l = spec.dual_dim();
    let costs = Costs::new(spec);
    let penalty = spec.penalty();
    let dual = spec.dual_set();

    let mut state = IterateState::new(x0, y0);
    let mut fx = vec![0.0; l];
    let mut fty = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut ops = OpCounts::default();
    let mut samples: u64 = 0;
    let mut elapsed_ms = 0.0;

    let mut rec = Recorder {
        spec,
        opts,
        records: Vec::new(),
    };
    rec.record(0, 0, &state.x, &state.y, 0.0)?;

    for k in 0..cfg.iterations {
        let started = Instant::now();

        penalty.matvec_into(&state.x, &mut fx)?;
        dual_update_in_place(&mut state.y, &fx, cfg.s, dual)?;

        match &mut oracle {
            GradientOracle::Stochastic(rng) => {
                let i = spec.stochastic_gradient_into(&state.x, rng, &mut grad)?;
                samples += 1;
                ops.flops += costs.sample_gradient(spec.data().features().row_nnz(i) as u64);
            }
            GradientOracle::Full => {
                spec.full_gradient_into(&state.x, &mut grad)?;
                samples += costs.n;
                ops.flops += costs.full_gradient();
            }
        }
        penalty.matvec_transpose_into(&state.y, &mut fty)?;

        let beta = cfg.primal_step_at(k)?;
        for ((xi, gi), ti) in state.x.iter_mut().zip(&grad).zip(&fty) {
            *xi -= beta * (gi + ti);
        }
        spec.primal_set().project_in_place(&mut state.x)?;

        ops.flops += 2 * costs.f_product() + 3 * costs.l + 3 * costs.d + costs.primal_projection();
        ops.vector_updates += 2;

        if !linalg::all_finite(&state.x) || !linalg::all_finite(&state.y) {
            return Err(non_finite(k + 1, rec.records, &state, ops));
        }

        state.accumulate(cfg.regime.raw_weight(k));
        ops.flops += costs.averaging();
        elapsed_ms += started.elapsed().as_secs_f64() * 1e3;

        if cfg.is_checkpoint(k + 1) {
            let (xb, yb) = state.average();
            rec.record(k + 1, samples, &xb, &yb, elapsed_ms)?;
        }
    }

    let (x_bar, y_bar) = finalize_average(&state)?;
    Ok(RunTrace {
        records: rec.records,
        x_bar,
        y_bar,
        x_last: state.x,
        y_last: state.y,
        z_last: None,
        ops,
        iterations: cfg.iterations,
    })
}

fn non_finite(iteration: usize, records: Vec<TraceRecord>, state: &IterateState, ops: OpCounts) -> Error {
    Error::NonFinite {
        iteration,
        trace: Box::new(RunTrace {
            records,
            x_bar: Vec::new(),
            y_bar: Vec::new(),
            x_last: state.x.clone(),
            y_last: state.y.clone(),
            z_last: None,
            ops,
            iterations: iteration,
        }),
    }
}

/// Stochastic PDHG: each iteration draws one training sample (with
/// replacement) from the generator seeded by `cfg.seed`.
pub fn spdhg_run(spec: &ProblemSpec, cfg: &SolverConfig, opts: RunOptions<'_>) -> Result<RunTrace> {
    pdhg_loop(spec, cfg, opts, GradientOracle::Stochastic(stream_rng(cfg.seed, 0)))
}

/// Linearized PDHG: the same iteration with the exact gradient.
pub fn lpdhg_run(spec: &ProblemSpec, cfg: &SolverConfig, opts: RunOptions<'_>) -> Result<RunTrace> {
    pdhg_loop(spec, cfg, opts, GradientOracle::Full)
}

/// `sign(w) * max(|w| - tau, 0)`.
pub fn soft_threshold(w: f64, tau: f64) -> f64 {
    if w > tau {
        w - tau
    } else if w < -tau {
        w + tau
    } else {
        0.0
    }
}

/// `argmin_z r(z) + (rho/2) ||z - w||^2` for `r` the support function of `dual`.
pub fn regularizer_prox_in_place(w: &mut [f64], rho: f64, dual: &DualSet) {
    match *dual {
        DualSet::LinfBall { radius } => {
            let tau = radius / rho;
            w.iter_mut().for_each(|v| *v = soft_threshold(*v, tau));
        }
        DualSet::L2Ball { radius } => {
            let tau = radius / rho;
            let n = linalg::norm(w);
            let scale = if n > tau { 1.0 - tau / n } else { 0.0 };
            w.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Gradient-based ADMM on the split problem `min l(x) + r(z)` s.t. `z = Fx`:
///
/// ```text
/// z+   = argmin_z r(z) - <lam, z - Fx> + (rho/2)||z - Fx||^2
/// x+   = Proj_X(x - eta (grad l(x) + F^T lam - rho F^T (z+ - Fx)))
/// lam+ = lam - rho (z+ - F x+)
/// ```
///
/// The primal step `eta` comes from `cfg.primal_step`. The reported dual
/// average is built from `Proj_Y(lam)` so that it can be scored against the
/// saddle function.
pub fn gadmm_run(spec: &ProblemSpec, cfg: &SolverConfig, rho: f64, opts: RunOptions<'_>) -> Result<RunTrace> {
    cfg.validate()?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let (x0, lam0) = check_start(spec)?;
    let d = spec.dim();
    let l = spec.dual_dim();
    let costs = Costs::new(spec);
    let penalty = spec.penalty();
    let dual = spec.dual_set();

    let mut state = IterateState::new(x0, lam0);
    let mut z = vec![0.0; l];
    let mut fx = vec![0.0; l];
    let mut v = vec![0.0; l];
    let mut ftv = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut lam_feasible = vec![0.0; l];
    let mut ops = OpCounts::default();
    let mut samples: u64 = 0;
    let mut elapsed_ms = 0.0;

    let mut rec = Recorder {
        spec,
        opts,
        records: Vec::new(),
    };
    rec.record(0, 0, &state.x, &state.y, 0.0)?;
    penalty.matvec_into(&state.x, &mut fx)?;

    for k in 0..cfg.iterations {
        let started = Instant::now();
        let lam = &mut state.y;

        // z-update: prox of r at Fx + lam / rho
        for ((zi, &f), &li) in z.iter_mut().zip(&fx).zip(lam.iter()) {
            *zi = f + li / rho;
        }
        regularizer_prox_in_place(&mut z, rho, dual);

        // x-update: F^T lam - rho F^T (z - Fx) = F^T (lam - rho (z - Fx))
        spec.full_gradient_into(&state.x, &mut grad)?;
        samples += costs.n;
        for (((vi, &li), &zi), &f) in v.iter_mut().zip(lam.iter()).zip(&z).zip(&fx) {
            *vi = li - rho * (zi - f);
        }
        penalty.matvec_transpose_into(&v, &mut ftv)?;
        let eta = cfg.primal_step_at(k)?;
        for ((xi, gi), ti) in state.x.iter_mut().zip(&grad).zip(&ftv) {
            *xi -= eta * (gi + ti);
        }
        spec.primal_set().project_in_place(&mut state.x)?;

        // multiplier update at the new x
        penalty.matvec_into(&state.x, &mut fx)?;
        for ((li, &zi), &f) in lam.iter_mut().zip(&z).zip(&fx) {
            *li -= rho * (zi - f);
        }

        ops.flops += costs.full_gradient()
            + 3 * costs.f_product()
            + 4 * costs.l // z: shift and threshold
            + 3 * costs.l // v
            + 3 * costs.d
            + costs.primal_projection()
            + 3 * costs.l; // multiplier
        ops.vector_updates += 3;

        if !linalg::all_finite(&state.x) || !linalg::all_finite(&state.y) || !linalg::all_finite(&z) {
            return Err(non_finite(k + 1, rec.records, &state, ops));
        }

        lam_feasible.copy_from_slice(&state.y);
        dual.project_in_place(&mut lam_feasible);
        state.accumulate_dual(cfg.regime.raw_weight(k), &lam_feasible);
        ops.flops += costs.averaging() + costs.l;
        elapsed_ms += started.elapsed().as_secs_f64() * 1e3;

        if cfg.is_checkpoint(k + 1) {
            let (xb, yb) = state.average();
            rec.record(k + 1, samples, &xb, &yb, elapsed_ms)?;
        }
    }

    let (x_bar, y_bar) = finalize_average(&state)?;
    Ok(RunTrace {
        records: rec.records,
        x_bar,
        y_bar,
        x_last: state.x,
        y_last: state.y,
        z_last: Some(z),
        ops,
        iterations: cfg.iterations,
    })
}
