//! Solver library for the variable-exponent forward-backward Perona-Malik
//! equation
//!
//! `du/dt = div( (1/(1+|grad u|^2) + delta*|grad u|^{p(x)-2}) grad u )`
//!
//! with zero-flux boundary conditions, discretized by variational time
//! stepping: each step minimizes a convexified functional, a Sobolev term
//! `eps * laplace(du/dt)` regularizes the backward regime, and sweeps over
//! decreasing `eps` expose the limiting gradient statistics (empirical
//! Young measures).
//!
//! Modules:
//! - [`grid`]: staggered 1D/2D meshes with an exact summation-by-parts pair
//! - [`exponent`]: variable exponent fields `p(x)` with `2 <= p- <= p+`
//! - [`flux`]: the heat flux, its potential, and structure constants
//! - [`rothe`]: per-step minimization and the time interpolants
//! - [`viscosity`]: `eps -> 0+` sweeps and gradient histograms
//! - [`diagnostics`]: energy traces, weak residuals, staircasing metrics
//! - [`io`]: seeded signals, PGM images, CSV tables

pub mod diagnostics;
pub mod exponent;
pub mod flux;
pub mod grid;
pub mod io;
pub mod rothe;
pub mod viscosity;

pub use exponent::ExponentField;
pub use flux::{FluxModel, StructureConstants, MONOTONICITY_DEFECT};
pub use grid::{EdgeField, Grid, ScalarField};
pub use rothe::{
    evolve, min_steps, solve_step, step_functional, step_gradient, RotheConfig, StepResult,
    Trajectory,
};
pub use viscosity::{
    barycenter_check, pairwise_distance, sweep, young_measure, GradientHistogram, SweepPlan,
    Window,
};
