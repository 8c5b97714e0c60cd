//! Design, certification, and Monte-Carlo simulation of non-trivial
//! consensus protocols on directed signed matrix-weighted networks with
//! additive and multiplicative measurement noises.
//!
//! Module map:
//! - [`linalg`]: dense symmetric eigensolver, Cholesky, LU, Lyapunov solver,
//!   definiteness classification — the numeric kernels everything else uses.
//! - [`graph`]: signed matrix-weighted directed graphs, the matrix sign
//!   calculus, block Laplacians, and data validation.
//! - [`structure`]: the structural hypotheses — in-degree domination,
//!   positive-negative reachability, vertex decompositions, weight bounds,
//!   Lipschitz checks for noise intensities.
//! - [`synthesis`]: protocol synthesis (informed agents, coupling bound C,
//!   coefficient δ, gain k₁, signal x₀, grounded Laplacian) and its
//!   certificates.
//! - [`gain`]: control-gain families c(t) and the integral conditions for
//!   mean-square and almost-sure consensus.
//! - [`schedule`]: piecewise-constant topology schedules and per-schedule
//!   certification.
//! - [`rng`]: counter-based Gaussian draws keyed by (seed, path, step, edge,
//!   channel) so ensembles are reproducible under any parallel split.
//! - [`sim`]: Euler–Maruyama integration of one noisy path.
//! - [`ensemble`]: parallel Monte-Carlo runs, mean-square error statistics,
//!   convergence verdicts.
//! - [`fileio`]: TOML graph/design/schedule files, CSV output, run manifests.

pub mod ensemble;
pub mod fileio;
pub mod gain;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod schedule;
pub mod sim;
pub mod structure;
pub mod synthesis;

#[cfg(test)]
pub(crate) mod testutil;
