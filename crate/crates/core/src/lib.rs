//! Minimising-movement simulation of the one-dimensional power-law
//! thin-film equation with potential,
//!
//! ```text
//! u_t + (m(u) Psi(u_xxx - G''(u) u_x))_x = 0,   Psi(s) = |s|^{alpha-1} s,
//! ```
//!
//! on a staggered grid, together with the audits and experiments built on
//! top of the scheme.

pub mod banded;
pub mod driver;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod models;
pub mod step;

pub use driver::{run, RunConfig, TimeSeries};
pub use error::{Error, Result};
pub use grid::{CellField, FaceField, Grid};
pub use models::{
    build_modified_potential, Energy, EnergyBreakdown, MobilitySpec, ModelParams,
    ModifiedPotential, PotentialSpec,
};
pub use step::{solve_step, StepParams, StepResult};
