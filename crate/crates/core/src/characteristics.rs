//! Characteristic flow `y_t = u(t, y)^k`, `y(0, x) = x`, and the Lagrangian
//! invariance `m(t, y(t, x)) = m₀(x)`.
//!
//! Between stored snapshots `u` is interpolated in time by cubic Hermite
//! polynomials whose end slopes are the solver right-hand side evaluated at
//! each snapshot, and in space by [`sample`].

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::evolution::{rhs_with, Trajectory};
use crate::grid::{sample, Field};
use crate::helmholtz::HelmholtzSolver;
use crate::output::{fmt_num, header};

/// Allowed backward slack between neighbouring characteristics.
pub const CROSSING_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    pub seeds: Vec<f64>,
    pub times: Vec<f64>,
    /// `positions[i][j]` is `y(times[i], seeds[j])`.
    pub positions: Vec<Vec<f64>>,
}

impl FlowMap {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", header(&["t", "seed_index", "x0", "y"]).join(","))?;
        for (t, row) in self.times.iter().zip(&self.positions) {
            for (j, (x0, y)) in self.seeds.iter().zip(row).enumerate() {
                writeln!(w, "{},{j},{},{}", fmt_num(*t), fmt_num(*x0), fmt_num(*y))?;
            }
        }
        Ok(())
    }

    /// Smallest gap between neighbouring characteristics over all times.
    pub fn min_gap(&self) -> f64 {
        self.positions
            .iter()
            .flat_map(|row| row.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_monotone(&self) -> bool {
        self.positions
            .iter()
            .all(|row| row.windows(2).all(|w| w[1] > w[0]))
    }
}

struct Segment<'a> {
    t0: f64,
    span: f64,
    a: &'a Field,
    da: &'a Field,
    b: &'a Field,
    db: &'a Field,
    k: i32,
}

impl Segment<'_> {
    fn velocity(&self, t: f64, y: f64) -> f64 {
        let s = ((t - self.t0) / self.span).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let u = h00 * sample(self.a, y)
            + h10 * self.span * sample(self.da, y)
            + h01 * sample(self.b, y)
            + h11 * self.span * sample(self.db, y);
        u.powi(self.k)
    }
}

fn check_seeds(traj: &Trajectory, seeds: &[f64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds given".into()));
    }
    if !seeds.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(
            "seeds must be strictly increasing".into(),
        ));
    }
    let g = traj.grid();
    if seeds.iter().any(|&x| x < g.x_min() || x > g.x_max()) {
        return Err(Error::InvalidArgument(format!(
            "seeds must lie inside [{}, {}]",
            g.x_min(),
            g.x_max()
        )));
    }
    Ok(())
}

/// Flows `seeds` from the first to the last snapshot of `traj`.
pub fn flow(traj: &Trajectory, seeds: &[f64]) -> Result<FlowMap> {
    flow_between(traj, seeds, 0, traj.len() - 1)
}

/// Flows `seeds`, placed at snapshot `from`, forward to snapshot `to`.
pub fn flow_between(traj: &Trajectory, seeds: &[f64], from: usize, to: usize) -> Result<FlowMap> {
    check_seeds(traj, seeds)?;
    if from > to || to >= traj.len() {
        return Err(Error::InvalidArgument(format!(
            "snapshot range {from}..={to} outside 0..{}",
            traj.len()
        )));
    }
    let k = traj.config.k;
    let solver = HelmholtzSolver::new(*traj.grid());
    let slopes: Vec<Field> = traj.snapshots[from..=to]
        .iter()
        .map(|u| rhs_with(&solver, u, k, traj.config.scheme))
        .collect::<Result<_>>()?;
    let dx = traj.grid().dx();

    let mut y = seeds.to_vec();
    let mut fm = FlowMap {
        seeds: seeds.to_vec(),
        times: vec![traj.times[from]],
        positions: vec![y.clone()],
    };

    for i in from..to {
        let seg = Segment {
            t0: traj.times[i],
            span: traj.times[i + 1] - traj.times[i],
            a: &traj.snapshots[i],
            da: &slopes[i - from],
            b: &traj.snapshots[i + 1],
            db: &slopes[i + 1 - from],
            k,
        };
        let vmax = seg.a.max_abs().powi(k).max(seg.b.max_abs().powi(k));
        if seg.span * vmax > dx {
            log::warn!(
                "snapshot spacing {} exceeds dx / max|u|^k = {}; temporal interpolation error may dominate",
                seg.span,
                dx / vmax
            );
        }
        let substeps = ((seg.span * vmax / (0.25 * dx)).ceil() as usize).max(1);
        let h = seg.span / substeps as f64;
        for step in 0..substeps {
            let t = seg.t0 + step as f64 * h;
            for yj in y.iter_mut() {
                let k1 = seg.velocity(t, *yj);
                let k2 = seg.velocity(t + 0.5 * h, *yj + 0.5 * h * k1);
                let k3 = seg.velocity(t + 0.5 * h, *yj + 0.5 * h * k2);
                let k4 = seg.velocity(t + h, *yj + h * k3);
                *yj += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            if let Some(j) = y.windows(2).position(|w| w[1] <= w[0] - CROSSING_SLACK) {
                return Err(Error::CharacteristicCrossing {
                    time: t + h,
                    left: j,
                    right: j + 1,
                });
            }
        }
        fm.times.push(traj.times[i + 1]);
        fm.positions.push(y.clone());
    }
    Ok(fm)
}

/// `max |m(t, y(t, x)) - m(t₀, x)|` over the recorded times and seeds, with
/// `m` from the solver-consistent momentum operator.
pub fn lagrangian_momentum_error(traj: &Trajectory, fm: &FlowMap) -> Result<f64> {
    let solver = HelmholtzSolver::new(*traj.grid());
    let index_of = |t: f64| {
        traj.times
            .iter()
            .position(|&s| s == t)
            .ok_or_else(|| Error::InvalidArgument(format!("flow time {t} is not a snapshot time")))
    };
    let start = solver.momentum(&traj.snapshots[index_of(fm.times[0])?])?;
    let reference: Vec<f64> = fm.seeds.iter().map(|&x| sample(&start, x)).collect();
    let mut worst = 0.0_f64;
    for (&t, row) in fm.times.iter().zip(&fm.positions) {
        let m = solver.momentum(&traj.snapshots[index_of(t)?])?;
        for (y, m0) in row.iter().zip(&reference) {
            worst = worst.max((sample(&m, *y) - m0).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::SolverConfig;
    use crate::grid::Grid;

    fn seeds(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_flow_is_identity() {
        let g = Grid::decaying(-10.0, 10.0, 128).unwrap();
        let times = vec![0.0, 0.5, 1.0];
        let traj = Trajectory::constant(g, 0.0, times.clone(), SolverConfig::new(1, 1.0));
        let s = seeds(9, -2.0, 2.0);
        let fm = flow(&traj, &s).unwrap();
        assert_eq!(fm.times, times);
        assert!(fm.positions.iter().all(|row| *row == s));
        assert_eq!(lagrangian_momentum_error(&traj, &fm).unwrap(), 0.0);
    }

    #[test]
    fn constant_flow_is_uniform_transport() {
        let g = Grid::periodic(-10.0, 10.0, 256).unwrap();
        let c = 0.7;
        let times: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
        let traj = Trajectory::constant(g, c, times.clone(), SolverConfig::new(1, 1.0));
        let s = seeds(16, -5.0, 5.0);
        let fm = flow(&traj, &s).unwrap();
        for (t, row) in fm.times.iter().zip(&fm.positions) {
            for (x, y) in s.iter().zip(row) {
                assert!((y - (x + c * t)).abs() < 1e-8);
            }
        }
        assert!(lagrangian_momentum_error(&traj, &fm).unwrap() < 1e-8);
    }

    #[test]
    fn rejects_bad_seeds() {
        let g = Grid::decaying(-1.0, 1.0, 64).unwrap();
        let traj = Trajectory::constant(g, 0.0, vec![0.0, 1.0], SolverConfig::new(1, 1.0));
        assert!(flow(&traj, &[0.5, 0.1]).is_err());
        assert!(flow(&traj, &[0.0, 2.0]).is_err());
        assert!(flow(&traj, &[]).is_err());
    }

    #[test]
    fn csv_rows() {
        let fm = FlowMap {
            seeds: vec![0.0, 1.0],
            times: vec![0.0],
            positions: vec![vec![0.0, 1.0]],
        };
        let mut buf = Vec::new();
        fm.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,seed_index,x0,y");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].contains(",1,"));
    }
}
