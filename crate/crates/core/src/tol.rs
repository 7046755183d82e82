//! Numerical tolerances shared by the kernels, the solvers and the tests.

/// Eigen-reconstruction and residual tolerance, relative to the Frobenius norm.
pub const RECONSTRUCTION: f64 = 1e-9;

/// Orthonormality of computed eigenvectors.
pub const ORTHONORMALITY: f64 = 1e-10;

/// Relative asymmetry accepted by the symmetric routines.
pub const SYMMETRY: f64 = 1e-12;

/// Relative stopping tolerance for power iteration.
pub const POWER_ITERATION: f64 = 1e-10;

/// Iterations without Rayleigh-quotient progress before the start vector is perturbed.
pub const POWER_STAGNATION_WINDOW: usize = 50;

/// Diagonal entries below this magnitude count as zero.
pub const ZERO_PIVOT: f64 = 1e-12;

/// Trace value above which a run is declared divergent.
pub const DIVERGENCE: f64 = 1e12;

/// Default epoch cap for experiment runs.
pub const DEFAULT_MAX_EPOCHS: usize = 10_000_000;
