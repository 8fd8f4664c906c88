//! Semidiscrete Volterra systems `M α̈ + S α − S ∫₀ᵗ K(t−s) α(s) ds = F(t)`.
//!
//! The system is solved two ways: as a second-kind Volterra integral
//! equation by Picard iteration (with the factorial increment bounds), and
//! by implicit time stepping with product-integrated memory.

mod bounds;
mod integral;
mod picard;
mod stepping;
mod system;

use thiserror::Error;

use crate::galerkin::SpaceError;
use crate::linalg::LinalgError;

pub use bounds::{bound_z, bound_z0, bound_z0_spectral, load_l1_norms, sampled_kernel_sup, trace_constant, LoadNorms};
pub use integral::{to_integral_equation, VolterraIE};
pub use picard::{picard_iterate, picard_solve, picard_solve_from, IterationRecord, PicardCertificate, PicardOptions, PicardSolution};
pub use stepping::{product_weights, time_step_solve, Scheme, Trajectory};
pub use system::{initial_coefficients, to_first_order, FirstOrderSystem, LoadFn, Projection, SemidiscreteSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("kernel not admissible on (0, {horizon}): {reason}")]
    InadmissibleKernel { horizon: f64, reason: String },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("Picard iteration did not converge in {iterations} iterations (last increment {last_increment:.3e})")]
    PicardNotConverged { iterations: usize, last_increment: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}
