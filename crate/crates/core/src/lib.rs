//! Galerkin discretization and Volterra solvers for the hyperbolic
//! integro-differential equation
//!
//! ```text
//! ü + Au − ∫₀ᵗ K(t−s) Au(s) ds = f,   u(0) = u⁰,  u̇(0) = u¹
//! ```
//!
//! with a nonnegative, nonincreasing memory kernel `K` of L1 norm `κ < 1`.
//!
//! * [`kernels`]: exponential and weakly singular power-law kernels, the
//!   admissibility check, and the positive-type function `ξ`.
//! * [`galerkin`]: P1/P2 finite elements in 1D and 2D and the sine spectral
//!   basis; mass/stiffness assembly, loads, and the L2, Ritz and Fourier
//!   projections.
//! * [`volterra`]: the semidiscrete matrix system, its first-order and
//!   integral-equation forms, Picard iteration with a priori increment
//!   bounds, and implicit time stepping with product-integrated memory.
//! * [`convergence`]: manufactured solutions and spatial refinement studies.

// Negated comparisons are how the input checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod galerkin;
pub mod kernels;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod special;
pub mod volterra;

pub use kernels::{KernelVariant, MemoryKernel, XiFunction};
pub use mesh::Point;
