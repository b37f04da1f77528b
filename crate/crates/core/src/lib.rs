//! Numerical toolkit for viscous compressible flow past a single small
//! obstacle in two dimensions.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: uniform Cartesian meshes with a staircase hole mask, fields,
//!   midpoint quadrature and finite differences.
//! * [`quadrature`]: adaptive Gauss-Kronrod integration used as the
//!   high-accuracy oracle for radial integrands.
//! * [`cutoff`]: logarithmic capacity cutoffs, their smoothed versions and
//!   norm reports.
//! * [`testfn`]: rotation-corrected test functions `Phi_eps[phi]` and the
//!   divergence-free corrector.
//! * [`bogovskii`]: right inverses of the divergence with zero trace on the
//!   square, on the reference annulus and on the perforated square.
//! * [`solver`]: staggered finite-volume solver for the barotropic
//!   compressible Navier-Stokes system with monitors.
//! * [`experiment`]: epsilon sweeps, convergence metrics and weak residuals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bogovskii;
pub mod cutoff;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod jet;
pub mod quadrature;
pub mod solver;
pub mod testfn;

pub use error::{Error, Result};
pub use grid::{CellKind, DomainSpec, FaceField, Grid2D, Region, ScalarField, VectorField};
pub use cutoff::{AlphaPolicy, Complement, CutoffSpec, NormKind, NormReport, ScalingCutoff};
pub use solver::{InitialCondition, PhysParams, SolverState};
