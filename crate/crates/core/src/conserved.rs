//! Conserved and controlled functionals, sign checks and slope bounds,
//! evaluated on single fields and on whole trajectories.

use std::io::{self, Write};

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::evolution::{Observer, Trajectory};
use crate::grid::{dx1, dx2, quadrature, Field};
use crate::helmholtz::HelmholtzSolver;
use crate::output::{header, write_csv};

/// Slack applied to the exponential bound in [`groenwall_check`].
pub const GROENWALL_SLACK: f64 = 1e-3;

/// Fraction of `u_xxx` energy in the top octave above which [`i3`] warns.
pub const TOP_OCTAVE_LIMIT: f64 = 0.1;

/// `∫u dx`.
pub fn h0(u: &Field) -> f64 {
    quadrature(u)
}

/// `½∫(u² + u_x²) dx`.
pub fn h1(u: &Field) -> f64 {
    let ux = dx1(u);
    let density = u.zip_with(&ux, |a, b| a * a + b * b).expect("same grid");
    0.5 * quadrature(&density)
}

/// `¼∫(u² + 3u_x² + 4u_xx² + 2u_xxx²) dx`. Logs a warning when `u_xxx` carries
/// more than [`TOP_OCTAVE_LIMIT`] of its energy in the top octave.
pub fn i3(u: &Field) -> f64 {
    let ux = dx1(u);
    let uxx = dx2(u);
    let uxxx = dx1(&uxx);
    let frac = top_octave_fraction(uxxx.values());
    if frac > TOP_OCTAVE_LIMIT {
        log::warn!("u_xxx under-resolved: {:.1}% of its energy in the top octave", 100.0 * frac);
    }
    let density: Vec<f64> = (0..u.len())
        .map(|i| {
            let (a, b, c, d) = (
                u.values()[i],
                ux.values()[i],
                uxx.values()[i],
                uxxx.values()[i],
            );
            a * a + 3.0 * b * b + 4.0 * c * c + 2.0 * d * d
        })
        .collect();
    0.25 * quadrature(&Field::new(*u.grid(), density).expect("finite density"))
}

/// Share of spectral energy at wavenumbers above half the Nyquist limit.
pub fn top_octave_fraction(values: &[f64]) -> f64 {
    let n = values.len();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut total = 0.0;
    let mut top = 0.0;
    for (j, c) in buf.iter().enumerate() {
        let freq = j.min(n - j);
        let e = c.norm_sqr();
        total += e;
        if 4 * freq > n {
            top += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        top / total
    }
}

/// `∫|u| dx`.
pub fn l1(u: &Field) -> f64 {
    quadrature(&u.map(f64::abs))
}

/// Minimum of the solver-consistent discrete `u + u_x`
/// ([`HelmholtzSolver::u_plus_ux`]).
pub fn u_plus_ux_min(s: &HelmholtzSolver, u: &Field) -> Result<f64> {
    Ok(s.u_plus_ux(u)?.min())
}

/// Minimum of `u + dx1(u)` with the fourth-order central stencil. Accurate
/// for smooth profiles, but the stencil straddles steep momentum fronts and
/// can dip below zero there even when the discrete momentum is nonnegative.
pub fn u_plus_ux_min_central(u: &Field) -> f64 {
    let ux = dx1(u);
    u.zip_with(&ux, |a, b| a + b).expect("same grid").min()
}

/// Time series of every monitored quantity for one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConservationReport {
    pub times: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub i3: Vec<f64>,
    pub l1_u: Vec<f64>,
    pub l1_m: Vec<f64>,
    pub min_m: Vec<f64>,
    pub min_u_plus_ux: Vec<f64>,
    pub min_ux: Vec<f64>,
    pub sup_abs_u: Vec<f64>,
}

/// One row of a [`ConservationReport`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monitors {
    pub t: f64,
    pub h0: f64,
    pub h1: f64,
    pub i3: f64,
    pub l1_u: f64,
    pub l1_m: f64,
    pub min_m: f64,
    pub min_u_plus_ux: f64,
    pub min_ux: f64,
    pub sup_abs_u: f64,
}

impl Monitors {
    pub fn evaluate(s: &HelmholtzSolver, t: f64, u: &Field) -> Result<Self> {
        let m = s.momentum(u)?;
        Ok(Self {
            t,
            h0: h0(u),
            h1: h1(u),
            i3: i3(u),
            l1_u: l1(u),
            l1_m: l1(&m),
            min_m: m.min(),
            min_u_plus_ux: u_plus_ux_min(s, u)?,
            min_ux: dx1(u).min(),
            sup_abs_u: u.max_abs(),
        })
    }
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "t",
    "h0",
    "h1",
    "i3",
    "l1_u",
    "l1_m",
    "min_m",
    "min_u_plus_ux",
    "min_ux",
    "sup_abs_u",
];

impl ConservationReport {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, row: Monitors) {
        self.times.push(row.t);
        self.h0.push(row.h0);
        self.h1.push(row.h1);
        self.i3.push(row.i3);
        self.l1_u.push(row.l1_u);
        self.l1_m.push(row.l1_m);
        self.min_m.push(row.min_m);
        self.min_u_plus_ux.push(row.min_u_plus_ux);
        self.min_ux.push(row.min_ux);
        self.sup_abs_u.push(row.sup_abs_u);
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                vec![
                    self.times[i],
                    self.h0[i],
                    self.h1[i],
                    self.i3[i],
                    self.l1_u[i],
                    self.l1_m[i],
                    self.min_m[i],
                    self.min_u_plus_ux[i],
                    self.min_ux[i],
                    self.sup_abs_u[i],
                ]
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_csv(w, &header(&REPORT_COLUMNS), &self.rows())
    }

    /// Largest `|q(t) - q(0)| / (1 + |q(0)|)` over the series.
    pub fn drift(series: &[f64]) -> f64 {
        let Some(&first) = series.first() else {
            return 0.0;
        };
        series
            .iter()
            .map(|v| (v - first).abs() / (1.0 + first.abs()))
            .fold(0.0, f64::max)
    }

    /// Lowest recorded slope, clamped at zero from above: the smallest
    /// admissible `κ` for [`groenwall_check`].
    pub fn slope_floor(&self) -> f64 {
        self.min_ux
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(-v))
    }
}

/// Evaluates every monitor at each snapshot of `traj`.
pub fn report(s: &HelmholtzSolver, traj: &Trajectory) -> Result<ConservationReport> {
    let rows: Result<Vec<Monitors>> = traj
        .times
        .par_iter()
        .zip(&traj.snapshots)
        .map(|(&t, u)| Monitors::evaluate(s, t, u))
        .collect();
    let mut rep = ConservationReport::default();
    for row in rows? {
        rep.push(row);
    }
    Ok(rep)
}

/// Builds a [`ConservationReport`] at the monitor cadence during a run.
pub struct ReportObserver<'a> {
    solver: &'a HelmholtzSolver,
    pub report: ConservationReport,
}

impl<'a> ReportObserver<'a> {
    pub fn new(solver: &'a HelmholtzSolver) -> Self {
        Self {
            solver,
            report: ConservationReport::default(),
        }
    }
}

impl Observer for ReportObserver<'_> {
    fn monitor(&mut self, t: f64, u: &Field) -> Result<()> {
        self.report.push(Monitors::evaluate(self.solver, t, u)?);
        Ok(())
    }
}

/// True iff `i3(t) ≤ i3(0)·e^{3κt}·(1 + 1e-3)` at every recorded time.
pub fn groenwall_check(rep: &ConservationReport, kappa: f64) -> Result<bool> {
    let floor = rep.slope_floor();
    if kappa < floor {
        return Err(Error::InvalidArgument(format!(
            "kappa {kappa} is below the empirical slope floor {floor}"
        )));
    }
    let Some(&i0) = rep.i3.first() else {
        return Ok(true);
    };
    let t0 = rep.times[0];
    Ok(rep
        .times
        .iter()
        .zip(&rep.i3)
        .all(|(&t, &i)| i <= i0 * (3.0 * kappa * (t - t0)).exp() * (1.0 + GROENWALL_SLACK)))
}
