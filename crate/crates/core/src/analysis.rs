//! Convergence diagnostics: reference saddle points, duality gaps, the
//! high-probability bounds of the three regimes, Monte-Carlo tail checks and
//! log-log rate fits.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::problem::{Loss, PrimalSet, ProblemSpec};
use crate::projections::project_l2_ball_in_place;
use crate::solvers::{spdhg_run, Checkpoints, Regime, RunOptions, SolverConfig};
use crate::stream_rng;

/// Approximate saddle point `(x*, y*)` and the fixed-point residual at which
/// the solve stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Lipschitz constant of the gradient of the smooth part, ridge included:
/// `0.25 max ||a_i||^2` for logistic, `max ||a_i||^2` for least squares.
pub fn smoothness_constant(spec: &ProblemSpec) -> f64 {
    let feats = spec.data().features();
    let max_sq = (0..feats.rows()).map(|r| feats.row_norm_sq(r)).fold(0.0, f64::max);
    let per_sample = match spec.loss().loss {
        Loss::Logistic => 0.25 * max_sq,
        Loss::LeastSquares => max_sq,
    };
    per_sample + spec.loss().ridge
}

/// `lambda_max(F^T F)` by seeded power iteration (0 for an empty graph).
pub fn penalty_spectral_norm_sq(spec: &ProblemSpec) -> Result<f64> {
    spec.penalty().spectral_norm_sq(1e-12, 100_000, 0)
}

/// Solves the saddle problem to high accuracy with the full gradient.
///
/// The iteration is the linearized primal-dual scheme with an extrapolated
/// dual step,
///
/// ```text
/// x+ = Proj_X(x - tau (grad l(x) + F^T y))
/// y+ = Proj_Y(y + sigma F (2 x+ - x))
/// ```
///
/// with `sigma = 1/||F||` and `tau = 1/(L + ||F||)`, which converges for any
/// convex smooth `l` (the plain alternating scheme needs strong convexity).
/// Stops once `||x+ - x|| + ||y+ - y|| < tol`.
pub fn compute_reference(spec: &ProblemSpec, max_iters: usize, tol: f64) -> Result<ReferencePoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let lip = smoothness_constant(spec);
    let f_norm = penalty_spectral_norm_sq(spec)?.sqrt();
    let tau = 1.0 / (lip + f_norm).max(f64::MIN_POSITIVE);
    let sigma = if f_norm > 0.0 { 1.0 / f_norm } else { 1.0 };

    let d = spec.dim();
    let l = spec.dual_dim();
    let penalty = spec.penalty();
    let mut x = vec![0.0; d];
    spec.primal_set().project_in_place(&mut x)?;
    let mut y = vec![0.0; l];
    let mut x_new = vec![0.0; d];
    let mut y_new = vec![0.0; l];
    let mut grad = vec![0.0; d];
    let mut fty = vec![0.0; d];
    let mut bar = vec![0.0; d];
    let mut fbar = vec![0.0; l];
    let mut residual = f64::INFINITY;

    for it in 1..=max_iters {
        spec.full_gradient_into(&x, &mut grad)?;
        penalty.matvec_transpose_into(&y, &mut fty)?;
        for i in 0..d {
            x_new[i] = x[i] - tau * (grad[i] + fty[i]);
        }
        spec.primal_set().project_in_place(&mut x_new)?;
        for i in 0..d {
            bar[i] = 2.0 * x_new[i] - x[i];
        }
        penalty.matvec_into(&bar, &mut fbar)?;
        for j in 0..l {
            y_new[j] = y[j] + sigma * fbar[j];
        }
        spec.dual_set().project_in_place(&mut y_new);

        residual = linalg::distance(&x_new, &x) + linalg::distance(&y_new, &y);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut y, &mut y_new);
        if !residual.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "reference solve diverged at iteration {it}"
            )));
        }
        if residual < tol {
            return Ok(ReferencePoint {
                x_star: x,
                y_star: y,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::ReferenceNotConverged(Box::new(ReferencePoint {
        x_star: x,
        y_star: y,
        residual,
        iterations: max_iters,
    })))
}

/// `P(y*, x_bar) - P(y_bar, x*)`.
pub fn duality_gap(spec: &ProblemSpec, reference: &ReferencePoint, x_bar: &[f64], y_bar: &[f64]) -> Result<f64> {
    check_len("duality_gap primal point", spec.dim(), x_bar.len())?;
    let violation = spec.primal_set().violation(x_bar);
    if violation > crate::problem::FEASIBILITY_TOL {
        return Err(Error::Infeasible {
            what: "averaged primal point",
            violation,
        });
    }
    Ok(spec.saddle_value(&reference.y_star, x_bar)? - spec.saddle_value(y_bar, &reference.x_star)?)
}

/// A gap more negative than `-10 * residual` cannot be explained by reference error.
pub fn gap_is_consistent(gap: f64, reference: &ReferencePoint) -> bool {
    gap >= -10.0 * reference.residual
}

/// Problem constants entering the high-probability bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub d_x: f64,
    pub d_y: f64,
    pub sigma: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub lambda_max: f64,
    pub s: f64,
}

impl BoundParams {
    /// Diameters from the configured sets, `L` and `mu` from the loss,
    /// `lambda_max(F^T F)` by power iteration and `sigma` from [`sigma_bound`].
    pub fn from_spec(spec: &ProblemSpec, s: f64, sigma_seed: u64) -> Result<Self> {
        Ok(Self {
            d_x: spec.primal_set().diameter(),
            d_y: spec.dual_set().diameter(spec.dual_dim()),
            sigma: sigma_bound(spec, 10, sigma_seed)?,
            lipschitz: smoothness_constant(spec),
            mu: spec.mu(),
            lambda_max: penalty_spectral_norm_sq(spec)?,
            s,
        })
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("d_x", self.d_x),
            ("d_y", self.d_y),
            ("sigma", self.sigma),
            ("lipschitz", self.lipschitz),
            ("mu", self.mu),
            ("lambda_max", self.lambda_max),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("bound parameter {name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidArgument(format!("s must be positive, got {}", self.s)));
        }
        Ok(())
    }
}

/// Uniform noise bound: the largest [`ProblemSpec::estimate_sigma`] over the
/// origin (projected into `X`) and `extra_points` random feasible points.
pub fn sigma_bound(spec: &ProblemSpec, extra_points: usize, seed: u64) -> Result<f64> {
    let d = spec.dim();
    let mut x = vec![0.0; d];
    spec.primal_set().project_in_place(&mut x)?;
    let mut best = spec.estimate_sigma(&x)?;
    let mut rng = stream_rng(seed, 1);
    for _ in 0..extra_points {
        match spec.primal_set() {
            PrimalSet::L2Ball { radius } => {
                x.iter_mut().for_each(|v| *v = rng.gen_range(-*radius..=*radius));
                project_l2_ball_in_place(&mut x, *radius);
            }
            PrimalSet::Box { lo, hi } => {
                for ((v, &a), &b) in x.iter_mut().zip(lo).zip(hi) {
                    *v = rng.gen_range(a..=b);
                }
            }
        }
        best = best.max(spec.estimate_sigma(&x)?);
    }
    Ok(best)
}

/// Right-hand side of the high-probability bound for `regime` after the
/// average over iterates `0..=t`, at confidence parameter `omega`.
///
/// * general convex:
///   `Dy^2/(2s(t+1)) + L Dx^2/(2(t+1)) + (Dx^2 + 2 lmax Dy^2)/sqrt(t+1)
///    + 2 sqrt(omega) Dx sigma/sqrt(t+1) + (1+omega) sigma^2/sqrt(t+1)`
/// * strongly convex, uniform:
///   `Dy^2/(2s(t+1)) + L Dx^2/(2(t+1)) + lmax Dy^2 log(t+1)/(mu(t+1))
///    + 2 sqrt(omega) Dx sigma/sqrt(t+1) + (1+omega) sigma^2 log(t+1)/(2 mu (t+1))`
/// * strongly convex, non-uniform:
///   `Dy^2/(s(t+2)) + L Dx^2/(t+2) + 4 lmax Dy^2/(mu(t+2))
///    + 2 sqrt(2 omega) Dx sigma/sqrt(t+2) + 4(1+omega) sigma^2/(mu(t+2))`
pub fn theorem_bound(regime: Regime, p: &BoundParams, t: usize, omega: f64) -> Result<f64> {
    p.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    if regime.is_strongly_convex() && !(p.mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regime {regime} needs mu > 0 in the bound parameters"
        )));
    }
    let t1 = t as f64 + 1.0;
    let t2 = t as f64 + 2.0;
    let (dx2, dy2) = (p.d_x * p.d_x, p.d_y * p.d_y);
    let sig2 = p.sigma * p.sigma;
    Ok(match regime {
        Regime::GeneralConvex => {
            dy2 / (2.0 * p.s * t1)
                + p.lipschitz * dx2 / (2.0 * t1)
                + (dx2 + 2.0 * p.lambda_max * dy2) / t1.sqrt()
                + 2.0 * omega.sqrt() * p.d_x * p.sigma / t1.sqrt()
                + (1.0 + omega) * sig2 / t1.sqrt()
        }
        Regime::StronglyConvexUniform => {
            dy2 / (2.0 * p.s * t1)
                + p.lipschitz * dx2 / (2.0 * t1)
                + p.lambda_max * dy2 * t1.ln() / (p.mu * t1)
                + 2.0 * omega.sqrt() * p.d_x * p.sigma / t1.sqrt()
                + (1.0 + omega) * sig2 * t1.ln() / (2.0 * p.mu * t1)
        }
        Regime::StronglyConvexNonUniform => {
            dy2 / (p.s * t2)
                + p.lipschitz * dx2 / t2
                + 4.0 * p.lambda_max * dy2 / (p.mu * t2)
                + 2.0 * (2.0 * omega).sqrt() * p.d_x * p.sigma / t2.sqrt()
                + 4.0 * (1.0 + omega) * sig2 / (p.mu * t2)
        }
    })
}

/// Outcome of a Monte-Carlo check of `Prob(gap > bound) <= 2 exp(-omega)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub regime: Regime,
    pub omega: f64,
    pub trials: usize,
    /// Averaging horizon: iterates `0..=t`, i.e. runs of `t + 1` iterations.
    pub t: usize,
    pub bound_value: f64,
    pub exceed_count: usize,
    pub empirical_rate: f64,
    pub theoretical_cap: f64,
    pub max_gap: f64,
    pub mean_gap: f64,
    pub min_gap: f64,
    pub reference_residual: f64,
}

impl TailReport {
    pub fn within_cap(&self) -> bool {
        self.empirical_rate <= self.theoretical_cap
    }
}

/// Seed of trial `trial` under `master_seed`.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    stream_rng(master_seed, trial).next_u64()
}

/// Final duality gaps of `trials` independent SPDHG runs, in trial order.
///
/// Runs fan out over a pool of `jobs` threads; each trial owns its solver
/// state and its generator, so the result does not depend on `jobs`.
pub fn trial_gaps(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    reference: &ReferencePoint,
    trials: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let base = SolverConfig {
        checkpoints: Checkpoints::Every(cfg.iterations.max(1)),
        ..cfg.clone()
    };
    pool.install(|| {
        (0..trials as u64)
            .into_par_iter()
            .map(|trial| {
                let cfg = SolverConfig {
                    seed: trial_seed(master_seed, trial),
                    ..base.clone()
                };
                let trace = spdhg_run(spec, &cfg, RunOptions::default())?;
                duality_gap(spec, reference, &trace.x_bar, &trace.y_bar)
            })
            .collect()
    })
}

/// Scores precomputed trial gaps against the bound at `omega`.
pub fn tail_report(
    regime: Regime,
    params: &BoundParams,
    t: usize,
    omega: f64,
    gaps: &[f64],
    reference: &ReferencePoint,
) -> Result<TailReport> {
    if gaps.is_empty() {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let bound_value = theorem_bound(regime, params, t, omega)?;
    if reference.residual > 0.01 * bound_value {
        return Err(Error::ReferenceTooCoarse {
            residual: reference.residual,
            bound: bound_value,
        });
    }
    let exceed_count = gaps.iter().filter(|&&g| g > bound_value).count();
    let trials = gaps.len();
    Ok(TailReport {
        regime,
        omega,
        trials,
        t,
        bound_value,
        exceed_count,
        empirical_rate: exceed_count as f64 / trials as f64,
        theoretical_cap: 2.0 * (-omega).exp(),
        max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        mean_gap: gaps.iter().sum::<f64>() / trials as f64,
        reference_residual: reference.residual,
    })
}

/// Runs `trials` SPDHG instances of `cfg.iterations` iterations and counts
/// how often the final gap exceeds the bound with `t = cfg.iterations - 1`.
#[allow(clippy::too_many_arguments)]
pub fn tail_experiment(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    reference: &ReferencePoint,
    params: &BoundParams,
    omega: f64,
    trials: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<TailReport> {
    cfg.validate()?;
    // fail fast on a coarse reference before spending time on trials
    let t = cfg.iterations - 1;
    let bound = theorem_bound(cfg.regime, params, t, omega)?;
    if reference.residual > 0.01 * bound {
        return Err(Error::ReferenceTooCoarse {
            residual: reference.residual,
            bound,
        });
    }
    let gaps = trial_gaps(spec, cfg, reference, trials, master_seed, jobs)?;
    tail_report(cfg.regime, params, t, omega, &gaps, reference)
}

/// Least-squares fit of `log(gap) = intercept + slope * log(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fits the log-log slope of `(t_i, gap_i)`. Needs at least five points with
/// positive gaps and `t` spanning two decades.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    if let Some(&(t, g)) = points.iter().find(|&&(t, g)| !(t > 0.0) || !(g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-positive value at t = {t} (gap {g}); the reference is probably too coarse"
        )));
    }
    let t_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if t_max / t_min < 100.0 {
        return Err(Error::InvalidArgument(format!(
            "checkpoints span [{t_min}, {t_max}], less than two decades"
        )));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(t, g)| (t.ln(), g.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        points: points.len(),
    })
}

/// `count` checkpoints spread evenly in `log t` over `[lo, hi]`, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count <= 1 || hi <= lo {
        return vec![hi.max(lo)];
    }
    let (a, b) = ((lo.max(1) as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}
