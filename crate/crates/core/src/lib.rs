//! Numerical laboratory for the generalized 0-Holm-Staley equation
//!
//! ```text
//! u_t - u_txx + u^k u_x - u^k u_xxx = 0,   m = u - u_xx,   m_t + u^k m_x = 0.
//! ```
//!
//! * [`grid`], [`helmholtz`]: discretization and the Helmholtz pair.
//! * [`evolution`]: method-of-lines RK4 solver for integer `k >= 1`.
//! * [`conserved`]: conserved functionals, sign and slope monitors.
//! * [`characteristics`]: the flow `y_t = u(t, y)^k` and Lagrangian momentum.
//! * [`peakons`], [`kinks`]: ODE reductions and their closed-form solutions.
//! * [`decay`]: exponential tail fits and support growth.
//! * [`initial`], [`cli`]: built-in initial data and the command-line runner.

pub mod characteristics;
pub mod cli;
pub mod conserved;
pub mod decay;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod helmholtz;
pub mod initial;
pub mod kinks;
mod ode;
pub mod output;
pub mod peakons;

pub use error::{Error, Result};
pub use evolution::{simulate, Scheme, SolverConfig, Trajectory};
pub use grid::{Boundary, Field, Grid};
pub use helmholtz::HelmholtzSolver;
