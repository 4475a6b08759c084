//! Small reproducible instances for experiments and tests.
//!
//! The toy problem is graph-guided logistic regression on a chain graph: the
//! true coefficient vector is piecewise constant along the chain, features are
//! Gaussian, and a fraction of labels is flipped so the data is not separable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::Dataset;
use crate::error::Result;
use crate::linalg::SparseMatrix;
use crate::problem::{build_fusion_matrix, chain_edges, DualSet, LossKind, PrimalSet, ProblemSpec};
use crate::{stream_rng, SolverRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub n: usize,
    pub d: usize,
    /// Weight of the fused-lasso penalty `lambda ||Fx||_1`.
    pub lambda: f64,
    /// Ridge coefficient (0 gives the plain graph-guided model).
    pub gamma: f64,
    /// Radius of the primal ball `X`.
    pub radius: f64,
    /// Probability of flipping each label.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 20,
            lambda: 0.05,
            gamma: 0.0,
            radius: 10.0,
            label_noise: 0.1,
            seed: 2024,
        }
    }
}

fn standard_normal(rng: &mut SolverRng) -> f64 {
    // Box-Muller; 1 - u keeps the logarithm finite
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    (-2.0 * (1.0 - u).ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Piecewise-constant coefficients along the chain: four blocks with levels
/// `1, -1, 0.5, 0`.
pub fn toy_coefficients(d: usize) -> Vec<f64> {
    const LEVELS: [f64; 4] = [1.0, -1.0, 0.5, 0.0];
    (0..d).map(|j| LEVELS[(4 * j / d.max(1)).min(3)]).collect()
}

/// Features `N(0, 1/d)`, labels `sign(a^T w)` with a fraction flipped.
pub fn toy_dataset(cfg: &ToyConfig) -> Result<Dataset> {
    let mut rng = stream_rng(cfg.seed, 0);
    let w = toy_coefficients(cfg.d);
    let scale = 1.0 / (cfg.d as f64).sqrt();
    let mut rows = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let a: Vec<f64> = (0..cfg.d).map(|_| scale * standard_normal(&mut rng)).collect();
        let margin: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
        let mut b = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.gen::<f64>() < cfg.label_noise {
            b = -b;
        }
        rows.push(a);
        labels.push(b);
    }
    Dataset::new(SparseMatrix::from_dense(&rows, cfg.d)?, labels)
}

/// The full toy problem: logistic loss with ridge `gamma`, chain fusion
/// matrix, `Y = LinfBall(lambda)`, `X = L2Ball(radius)`.
pub fn toy_problem(cfg: &ToyConfig) -> Result<ProblemSpec> {
    let data = toy_dataset(cfg)?;
    ProblemSpec::new(
        data,
        LossKind::logistic(cfg.gamma),
        build_fusion_matrix(&chain_edges(cfg.d), cfg.d)?,
        PrimalSet::L2Ball { radius: cfg.radius },
        DualSet::LinfBall { radius: cfg.lambda },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_instance_is_deterministic() {
        let cfg = ToyConfig::default();
        let a = toy_dataset(&cfg).unwrap();
        let b = toy_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.dim()), (200, 20));
        assert!(a.is_binary());
        let pos = a.labels().iter().filter(|&&b| b > 0.0).count();
        assert!(pos > 50 && pos < 150);
    }

    #[test]
    fn coefficients_are_piecewise_constant() {
        let w = toy_coefficients(8);
        assert_eq!(w, vec![1.0, 1.0, -1.0, -1.0, 0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn toy_problem_shapes() {
        let spec = toy_problem(&ToyConfig { gamma: 0.1, ..ToyConfig::default() }).unwrap();
        assert_eq!(spec.dual_dim(), 19);
        assert_eq!(spec.mu(), 0.1);
    }
}
