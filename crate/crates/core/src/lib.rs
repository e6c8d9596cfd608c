//! Numerical study of viscous contact waves for the one-dimensional
//! compressible Navier-Stokes equations in Lagrangian coordinates.
//!
//! The crate builds the self-similar contact profile, the contact wave and
//! its diffusion-wave ansatz, evolves perturbed data with an IMEX finite
//! difference solver, and evaluates the anti-derivative / characteristic
//! energy diagnostics used to measure decay rates.

// `!(a <= b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod gas;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod massdecomp;
pub mod profile;
pub mod solver;
pub mod waves;

pub use error::{Error, Result, StageExt};
pub use gas::{EndStates, GasModel};
pub use grid::{Field, Grid1D};
