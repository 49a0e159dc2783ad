//! Numerical laboratory for boundary regularity of solutions to
//! non-divergence elliptic equations on convex domains.
//!
//! The crate solves `-b_ij d2w/dx_i dx_j = g` with zero Dirichlet data on
//! convex domains by finite differences, certifies explicit super/subsolution
//! barriers, runs an oscillation-decay iteration that extracts a boundary
//! derivative together with a certified modulus of continuity, and audits
//! the Lorentz-space conditions that separate differentiable boundary
//! behaviour from the Log-Lipschitz borderline.
//!
//! Layout:
//! - [`grid`]: uniform grids, grid functions, interpolation.
//! - [`geometry`]: convex domains, boundary cuts, scale schedules.
//! - [`quadrature`]: 1-d integration rules on geometric partitions.
//! - [`lorentz`]: decreasing rearrangements, Lorentz norms, potentials.
//! - [`operator`]: elliptic coefficient fields.
//! - [`rhs`]: right-hand-side presets and their norms.
//! - [`linalg`]: CSR matrices, ILU(0), BiCGSTAB.
//! - [`solver`]: Dirichlet problem assembly and solves.
//! - [`barrier`]: explicit barriers and their certificates.
//! - [`calibration`]: frozen empirical constants.
//! - [`engine`]: multiscale solves, oscillation decay, boundary derivatives.

pub mod barrier;
pub mod calibration;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod lorentz;
pub mod operator;
pub mod quadrature;
pub mod rhs;
pub mod solver;

pub use barrier::{certify, BarrierCertificate, BarrierKind, BarrierParams};
pub use calibration::{frozen_constants, Frozen};
pub use engine::{
    boundary_derivative, log_lip_induction, run_oscillation_cascade, DecayReport,
    DerivativeConfig, LogLipConfig, LogLipReport, MultiscaleConfig, MultiscaleSolution,
    OscillationTrace,
};
pub use error::{Error, Result};
pub use geometry::{ConvexDomain, CubeSpec, GraphFn, NodeClass, Region, ScaleSchedule};
pub use grid::{Grid, GridFunction, SampleField};
pub use lorentz::{LorentzIndex, RearrangementProfile};
pub use operator::{EllipticOperatorField, SymMat};
pub use rhs::RhsPreset;
pub use solver::{solve, DirichletProblem, SolveReport};
