//! Stochastic primal-dual hybrid gradient (SPDHG) for compositely regularized
//! empirical risk minimization
//!
//! ```text
//! min_{x in X}  l(x) + r(Fx),     r(z) = max_{y in Y} <y, z>
//! ```
//!
//! solved through the saddle problem `min_x max_y l(x) + <y, Fx>`. The crate
//! provides the stochastic solver in its three step-size/averaging regimes,
//! a full-gradient linearized PDHG baseline, a gradient-based ADMM baseline,
//! and the tooling needed to check the convergence guarantees empirically.

pub mod analysis;
pub mod data_io;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod projections;
pub mod solvers;
pub mod synthetic;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere randomness is needed.
pub type SolverRng = ChaCha8Rng;

/// Deterministic generator for `(seed, stream)`. Distinct streams under the
/// same seed are independent, which is how trials derive their own RNGs from
/// a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> SolverRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
