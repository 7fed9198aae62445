//! Exact solver for the generalized fused lasso
//!
//! ```text
//! minimize  sum_i rho(y_i - theta_i) + lambda * sum_i |theta_{i+1} - theta_i|
//! ```
//!
//! together with evaluators for explicit nonasymptotic elementwise and
//! sum-of-squares error bounds, a finite-sample law-of-iterated-logarithm
//! envelope, and a seeded Monte Carlo harness that checks them.

pub mod bounds;
pub mod error;
pub mod lil;
pub mod loss;
pub mod noise;
pub mod oracle;
pub mod signal;
pub mod simulation;
pub mod solver;

pub use error::{Condition, Diagnosis, Error, Result};
pub use loss::{ConvexLoss, LossModel, PiecewiseLoss};
pub use noise::{NoiseKind, NoiseModel, NoiseSpec};
pub use signal::{PiecewiseConstantSignal, SignalGeometry};
pub use solver::{solve, solve_augmented, FusedLassoProblem, FusedLassoSolution};
