//! Built-in initial data.

use crate::error::{Error, Result};
use crate::grid::{mollify, Field, Grid};
use crate::helmholtz::HelmholtzSolver;

/// Width of the crest mollifier, in grid spacings.
pub const MOLLIFY_CELLS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialDatum {
    /// `a·e^{−((x−x0)/w)²}`.
    Gaussian { a: f64, w: f64, x0: f64 },
    /// `a·e^{−θ|x−x0|}`, mollified at the crest.
    ExpDecay { a: f64, theta: f64, x0: f64 },
    /// `u₀ = Λ⁻² m₀` with `m₀ = a·e^{−1/(1−x²)}` on `|x| < 1`.
    BumpMomentum { a: f64 },
    /// `c^{1/k}·e^{−|x−q0|}`, optionally mollified.
    Peakon { c: f64, k: i32, q0: f64, mollified: bool },
}

impl InitialDatum {
    pub fn name(&self) -> &'static str {
        match self {
            InitialDatum::Gaussian { .. } => "gaussian",
            InitialDatum::ExpDecay { .. } => "exp_decay",
            InitialDatum::BumpMomentum { .. } => "bump_momentum",
            InitialDatum::Peakon { .. } => "peakon",
        }
    }

    pub fn sample(&self, g: Grid) -> Result<Field> {
        match *self {
            InitialDatum::Gaussian { a, w, x0 } => {
                if !(w > 0.0) {
                    return Err(Error::Domain(format!("gaussian width must be positive, got {w}")));
                }
                Field::from_fn(g, |x| a * (-((x - x0) / w).powi(2)).exp())
            }
            InitialDatum::ExpDecay { a, theta, x0 } => {
                if !(theta > 0.0) {
                    return Err(Error::Domain(format!("theta must be positive, got {theta}")));
                }
                let raw = Field::from_fn(g, |x| a * (-theta * (x - x0).abs()).exp())?;
                Ok(mollify(&raw, MOLLIFY_CELLS * g.dx()))
            }
            InitialDatum::BumpMomentum { a } => {
                let m0 = bump_momentum(g, a)?;
                HelmholtzSolver::new(g).inv_helmholtz(&m0)
            }
            InitialDatum::Peakon { c, k, q0, mollified } => {
                if !(c > 0.0) || k == 0 {
                    return Err(Error::Domain(format!(
                        "peakon needs c > 0 and k != 0 (got c = {c}, k = {k})"
                    )));
                }
                let amp = c.powf(1.0 / k as f64);
                let raw = Field::from_fn(g, |x| amp * (-(x - q0).abs()).exp())?;
                Ok(if mollified {
                    mollify(&raw, MOLLIFY_CELLS * g.dx())
                } else {
                    raw
                })
            }
        }
    }
}

/// `a·e^{−1/(1−x²)}` inside `(−1, 1)`, zero outside.
pub fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

pub fn bump_momentum(g: Grid, a: f64) -> Result<Field> {
    Field::from_fn(g, |x| a * bump(x))
}
