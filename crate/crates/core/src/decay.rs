//! Exponential tail fits and support growth.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::grid::{Boundary, Field};
use crate::output::fmt_num;

/// Values at or below this magnitude are left out of tail fits.
pub const FIT_FLOOR: f64 = 1e-14;
/// Fewest usable points per tail window.
pub const MIN_TAIL_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayEstimate {
    pub theta_left: f64,
    pub theta_right: f64,
    pub window_left: (f64, f64),
    pub window_right: (f64, f64),
    /// Largest deviation of `log|u|` from either fitted line.
    pub residual: f64,
}

struct LineFit {
    slope: f64,
    window: (f64, f64),
    residual: f64,
}

fn fit_line(u: &Field, range: std::ops::Range<usize>, side: &'static str) -> Result<LineFit> {
    let g = u.grid();
    let pts: Vec<(f64, f64)> = range
        .filter_map(|i| {
            let v = u.values()[i].abs();
            (v > FIT_FLOOR).then(|| (g.x(i), v.ln()))
        })
        .collect();
    if pts.len() < MIN_TAIL_POINTS {
        return Err(Error::InsufficientTail {
            side,
            usable: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).abs())
        .fold(0.0, f64::max);
    Ok(LineFit {
        slope,
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual,
    })
}

/// Least-squares fit of `log|u|` against `x` over the outer `tail_fraction`
/// of the grid on each side.
pub fn fit_decay(u: &Field, tail_fraction: f64) -> Result<DecayEstimate> {
    if u.grid().boundary() != Boundary::Decaying {
        return Err(Error::InvalidArgument(
            "tail fits need a decaying grid".into(),
        ));
    }
    if !(tail_fraction > 0.0 && tail_fraction < 0.4) {
        return Err(Error::InvalidArgument(format!(
            "tail_fraction must lie in (0, 0.4), got {tail_fraction}"
        )));
    }
    let n = u.grid().len();
    let m = (tail_fraction * n as f64).floor() as usize;
    let left = fit_line(u, 0..m, "left")?;
    let right = fit_line(u, n - m..n, "right")?;
    Ok(DecayEstimate {
        theta_left: left.slope,
        theta_right: -right.slope,
        window_left: left.window,
        window_right: right.window,
        residual: left.residual.max(right.residual),
    })
}

/// Tail fit at every snapshot; snapshots without a usable tail keep their error.
pub fn decay_persistence(traj: &Trajectory, tail_fraction: f64) -> Vec<(f64, Result<DecayEstimate>)> {
    traj.snapshots
        .par_iter()
        .map(|u| fit_decay(u, tail_fraction))
        .collect::<Vec<_>>()
        .into_iter()
        .zip(traj.times.iter().copied())
        .map(|(r, t)| (t, r))
        .collect()
}

/// Whether each fitted exponent stays within 10% of its initial value. Only
/// tails with `θ(0) < 1` are judged; missing fits count as failures.
pub fn persistence_holds(rows: &[(f64, Result<DecayEstimate>)]) -> bool {
    let Some((_, Ok(first))) = rows.first() else {
        return false;
    };
    let judged = |t0: f64, pick: fn(&DecayEstimate) -> f64| {
        t0 >= 1.0
            || rows
                .iter()
                .all(|(_, r)| r.as_ref().map_or(false, |e| pick(e) >= 0.9 * t0))
    };
    judged(first.theta_left, |e| e.theta_left) && judged(first.theta_right, |e| e.theta_right)
}

pub fn write_persistence_csv<W: Write>(
    mut w: W,
    rows: &[(f64, Result<DecayEstimate>)],
) -> io::Result<()> {
    writeln!(w, "t,theta_left,theta_right,residual")?;
    for (t, r) in rows {
        let (a, b, c) = match r {
            Ok(e) => (e.theta_left, e.theta_right, e.residual),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        writeln!(w, "{},{},{},{}", fmt_num(*t), fmt_num(a), fmt_num(b), fmt_num(c))?;
    }
    Ok(())
}

/// Crossing of `threshold` between nodes `i` and `j`, interpolating `log|u|`
/// linearly when both values are nonzero.
fn crossing(u: &Field, i: usize, j: usize, threshold: f64) -> f64 {
    let g = u.grid();
    let (a, b) = (u.values()[i].abs(), u.values()[j].abs());
    let frac = if b > 0.0 {
        (a.ln() - threshold.ln()) / (a.ln() - b.ln())
    } else {
        (a - threshold) / a
    };
    g.x(i) + (g.x(j) - g.x(i)) * frac.clamp(0.0, 1.0)
}

/// Half-width of the smallest interval centred at the grid midpoint outside
/// which `|u| < eps·max|u|`; `+∞` when the threshold is reached at an end node.
pub fn support_radius(u: &Field, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let max = u.max_abs();
    if max == 0.0 {
        return Ok(0.0);
    }
    let threshold = eps * max;
    let v = u.values();
    let n = v.len();
    let above = |i: usize| v[i].abs() >= threshold;
    let lo = (0..n).find(|&i| above(i)).expect("max node is above");
    let hi = (0..n).rev().find(|&i| above(i)).expect("max node is above");
    if lo == 0 || hi == n - 1 {
        return Ok(f64::INFINITY);
    }
    let c = u.grid().center();
    let right = crossing(u, hi, hi + 1, threshold);
    let left = crossing(u, lo, lo - 1, threshold);
    Ok((right - c).max(c - left))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn line() -> Grid {
        Grid::decaying(-40.0, 40.0, 4096).unwrap()
    }

    #[test]
    fn pure_exponentials() {
        for theta in [1.0, 0.5] {
            let u = Field::from_fn(line(), |x| (-theta * x.abs()).exp()).unwrap();
            let e = fit_decay(&u, 0.15).unwrap();
            assert!((e.theta_left - theta).abs() < 1e-3);
            assert!((e.theta_right - theta).abs() < 1e-3);
            assert!(e.residual < 1e-9);
            assert!(e.window_right.0 > 27.0 && e.window_left.1 < -27.0);
        }
    }

    #[test]
    fn sech_tail() {
        let u = Field::from_fn(line(), |x| 1.0 / x.cosh()).unwrap();
        let e = fit_decay(&u, 0.15).unwrap();
        assert!((e.theta_left - 1.0).abs() < 2e-2);
        assert!((e.theta_right - 1.0).abs() < 2e-2);
    }

    #[test]
    fn asymmetric_tails() {
        let u = Field::from_fn(line(), |x| {
            if x < 0.0 {
                (0.3 * x).exp()
            } else {
                (-0.8 * x).exp()
            }
        })
        .unwrap();
        let e = fit_decay(&u, 0.2).unwrap();
        assert!((e.theta_left - 0.3).abs() < 1e-9);
        assert!((e.theta_right - 0.8).abs() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let g = line();
        assert!(matches!(
            fit_decay(&Field::zeros(g), 0.15),
            Err(Error::InsufficientTail { usable: 0, .. })
        ));
        let u = Field::from_fn(g, |x| (-x.abs()).exp()).unwrap();
        assert!(fit_decay(&u, 0.0).is_err());
        assert!(fit_decay(&u, 0.4).is_err());
        let p = Grid::periodic(-40.0, 40.0, 4096).unwrap();
        assert!(fit_decay(&Field::constant(p, 1.0), 0.1).is_err());
    }

    #[test]
    fn zero_trajectory_has_no_tails() {
        use crate::evolution::SolverConfig;
        let times = vec![0.0, 0.5, 1.0];
        let traj = Trajectory::constant(line(), 0.0, times, SolverConfig::new(1, 1.0));
        let rows = decay_persistence(&traj, 0.15);
        assert_eq!(rows.len(), 3);
        assert!(rows
            .iter()
            .all(|(_, r)| matches!(r, Err(Error::InsufficientTail { .. }))));
        assert!(!persistence_holds(&rows));
        let mut buf = Vec::new();
        write_persistence_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,theta_left,theta_right,residual\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn persistence_rule() {
        let est = |th: f64| DecayEstimate {
            theta_left: th,
            theta_right: th,
            window_left: (0.0, 0.0),
            window_right: (0.0, 0.0),
            residual: 0.0,
        };
        let ok = vec![(0.0, Ok(est(0.5))), (1.0, Ok(est(0.46)))];
        assert!(persistence_holds(&ok));
        let bad = vec![(0.0, Ok(est(0.5))), (1.0, Ok(est(0.44)))];
        assert!(!persistence_holds(&bad));
        let fast = vec![(0.0, Ok(est(1.2))), (1.0, Ok(est(0.5)))];
        assert!(persistence_holds(&fast));
    }

    #[test]
    fn radius_of_bump_and_exponential() {
        let g = line();
        let bump = Field::from_fn(g, |x| {
            if x.abs() < 1.0 {
                (-1.0 / (1.0 - x * x)).exp()
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(support_radius(&bump, 1e-8).unwrap() <= 1.0 + 2.0 * g.dx());
        let e = Field::from_fn(g, |x| (-x.abs()).exp()).unwrap();
        let r = support_radius(&e, (-10.0f64).exp()).unwrap();
        assert!((r - 10.0).abs() < 2.0 * g.dx());
        assert_eq!(support_radius(&Field::zeros(g), 1e-3).unwrap(), 0.0);
        let flat = Field::from_fn(g, |x| (-(x / 30.0).powi(2)).exp()).unwrap();
        assert_eq!(support_radius(&flat, 1e-3).unwrap(), f64::INFINITY);
        assert!(support_radius(&e, 0.0).is_err());
    }
}
