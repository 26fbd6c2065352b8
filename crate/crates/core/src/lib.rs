//! Solvers for one-dimensional parabolic problems closed by conservation
//! laws: Sturm-Liouville spectra under coupled boundary rows, boundary
//! degenerate Kolmogorov equations by elliptic regularization, and a
//! Monte-Carlo oracle for cross-checks.

pub mod coefficients;
pub mod conservative;
pub mod degenerate;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod mc_oracle;
pub mod quadrature;
pub mod sturm_liouville;

pub use coefficients::{CoefficientField, Interpolation, SisCoefficients, Source};
pub use degenerate::{BoundaryMeasure, DegenerateModel, ModelKind, RegularizationLadder};
pub use error::{Error, Result};
pub use grid::Grid;
pub use mc_oracle::{compare, simulate, EmpiricalMeasure, SdeSpec};
pub use sturm_liouville::{
    BoundaryCoupling, CouplingKind, DiscreteOperator, EigenSystem, SLProblem, Trajectory,
};
