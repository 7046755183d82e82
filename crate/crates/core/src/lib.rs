//! Symmetrized coordinate descent for convex quadratics.
//!
//! Solvers for cyclic, symmetric Gauss-Seidel, Gaussian back substitution,
//! randomized and random-permutation coordinate descent plus gradient descent,
//! the matching multi-block ADMM schemes, and an analysis layer that computes
//! exact (expected) update-matrix spectral radii and convergence-rate bounds
//! on the worst-case equicorrelated family.

pub mod admm;
pub mod bench;
pub mod cd;
pub mod error;
pub mod instances;
pub mod matcore;
pub mod rng;
pub mod spectral;
pub mod tol;

pub use error::{Error, Result};
