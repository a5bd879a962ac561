//! N-peakon solutions `u = Σ pᵢ e^{−|x−qᵢ|}` and their ODE dynamics.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::ode::{rk4_step, step_count};
use crate::output::fmt_num;

/// Pulses closer than this are treated as colliding.
pub const COLLISION_GAP: f64 = 1e-6;
/// Smallest `|u(qᵢ)|` accepted when `k ≤ 0`.
pub const SINGULAR_U: f64 = 1e-10;

/// `sgn` with `sgn(0) = 0`.
pub(crate) fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakonEnsemble {
    pub k: i32,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl PeakonEnsemble {
    pub fn new(k: i32, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be nonzero".into()));
        }
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::InvalidArgument(format!(
                "need equally many amplitudes and positions (got {} and {})",
                p.len(),
                q.len()
            )));
        }
        if p.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite peakon data".into()));
        }
        Ok(Self { k, p, q })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// The ansatz evaluated at `x`.
    pub fn u_at(&self, x: f64) -> f64 {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(p, q)| p * (-(x - q).abs()).exp())
            .sum()
    }

    /// `u_x` at `x` with the `sgn(0) = 0` convention at crests.
    pub fn ux_at(&self, x: f64) -> f64 {
        -self
            .p
            .iter()
            .zip(&self.q)
            .map(|(p, q)| sgn(x - q) * p * (-(x - q).abs()).exp())
            .sum::<f64>()
    }

    /// `∫u dx = 2 Σ pᵢ`.
    pub fn mass(&self) -> f64 {
        2.0 * self.p.iter().sum::<f64>()
    }

    /// `½∫(u² + u_x²) dx = Σᵢⱼ pᵢ pⱼ e^{−|qᵢ−qⱼ|}`.
    pub fn energy(&self) -> f64 {
        let mut h = 0.0;
        for (pi, qi) in self.p.iter().zip(&self.q) {
            for (pj, qj) in self.p.iter().zip(&self.q) {
                h += pi * pj * (-(qi - qj).abs()).exp();
            }
        }
        h
    }

    /// Closest pair of pulses and their separation.
    pub fn closest_pair(&self) -> Option<((usize, usize), f64)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = (self.q[i] - self.q[j]).abs();
                if best.map_or(true, |(_, b)| d < b) {
                    best = Some(((i, j), d));
                }
            }
        }
        best
    }

    fn state(&self) -> Vec<f64> {
        self.p.iter().chain(&self.q).copied().collect()
    }

    fn from_state(k: i32, y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self {
            k,
            p: y[..n].to_vec(),
            q: y[n..].to_vec(),
        }
    }
}

pub fn peakon_field(e: &PeakonEnsemble, g: Grid) -> Field {
    Field::from_vec(g, (0..g.len()).map(|i| e.u_at(g.x(i))).collect())
}

/// `pᵢ' = k pᵢ u(qᵢ)^{k−1} u_x(qᵢ)`, `qᵢ' = u(qᵢ)^k`.
pub fn peakon_rhs(e: &PeakonEnsemble) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = e.k;
    let mut dp = Vec::with_capacity(e.len());
    let mut dq = Vec::with_capacity(e.len());
    for (i, (&p, &q)) in e.p.iter().zip(&e.q).enumerate() {
        let u = e.u_at(q);
        if k <= 0 && u.abs() < SINGULAR_U {
            return Err(Error::Singularity(format!(
                "u(q_{}) = {u:e} vanishes with k = {k}",
                i + 1
            )));
        }
        let ux = e.ux_at(q);
        dp.push(k as f64 * p * u.powi(k - 1) * ux);
        dq.push(u.powi(k));
    }
    if let Some(i) = dp.iter().chain(&dq).position(|v| !v.is_finite()) {
        return Err(Error::Singularity(format!(
            "non-finite derivative for pulse {}",
            i % e.len() + 1
        )));
    }
    Ok((dp, dq))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakonTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PeakonEnsemble>,
}

impl PeakonTrajectory {
    pub fn last(&self) -> &PeakonEnsemble {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, PeakonEnsemble::len);
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("p_{i}")));
        cols.extend((1..=n).map(|i| format!("q_{i}")));
        writeln!(w, "{}", cols.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = std::iter::once(*t)
                .chain(s.p.iter().copied())
                .chain(s.q.iter().copied())
                .map(fmt_num)
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn check_collision(traj: &PeakonTrajectory) -> Result<()> {
    let t = *traj.times.last().expect("nonempty");
    if let Some((pair, gap)) = traj.last().closest_pair() {
        if gap < COLLISION_GAP {
            return Err(Error::Collision {
                time: t,
                pair,
                partial: Box::new(traj.clone()),
            });
        }
    }
    Ok(())
}

/// RK4 with the largest uniform step not exceeding `dt` that lands on
/// `t_end`. Every step is recorded.
pub fn integrate_peakons(e0: &PeakonEnsemble, t_end: f64, dt: f64) -> Result<PeakonTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= 0 (got dt = {dt}, t_end = {t_end})"
        )));
    }
    let e0 = PeakonEnsemble::new(e0.k, e0.p.clone(), e0.q.clone())?;
    let k = e0.k;
    let mut traj = PeakonTrajectory {
        times: vec![0.0],
        states: vec![e0],
    };
    check_collision(&traj)?;
    if t_end == 0.0 {
        return Ok(traj);
    }
    let n = step_count(t_end, dt);
    let h = t_end / n as f64;
    let mut y = traj.states[0].state();
    for step in 1..=n {
        y = rk4_step(&y, h, |y| {
            let (dp, dq) = peakon_rhs(&PeakonEnsemble::from_state(k, y))?;
            Ok(dp.into_iter().chain(dq).collect())
        })?;
        traj.times.push(if step == n { t_end } else { step as f64 * h });
        traj.states.push(PeakonEnsemble::from_state(k, &y));
        check_collision(&traj)?;
    }
    Ok(traj)
}

/// `J = p²(1 − e^{−2q})^{−k}`, conserved by the antisymmetric pair
/// `p = (p, −p)`, `q = (q, −q)` for odd `k`.
pub fn two_peakon_invariant(p: f64, q: f64, k: i32) -> Result<f64> {
    if k % 2 == 0 {
        return Err(Error::InvalidArgument(format!("k must be odd, got {k}")));
    }
    if !(q > 0.0) || !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need p > 0 and q > 0 (got p = {p}, q = {q})"
        )));
    }
    Ok(p * p * (-(-2.0 * q).exp_m1()).powi(-k))
}

/// `c^{1/k} e^{−|x − ct − q₀|}`.
pub fn exact_single_peakon(c: f64, k: i32, q0: f64, t: f64, x: f64) -> Result<f64> {
    if !(c > 0.0) || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "need c > 0 and k != 0 (got c = {c}, k = {k})"
        )));
    }
    Ok(c.powf(1.0 / k as f64) * (-(x - c * t - q0).abs()).exp())
}

/// The two-pulse system for `k = −1`, reduced with the conserved
/// `H = p₁² + 2p₁p₂e^{−|q₁−q₂|} + p₂²` fixed at its initial value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NegKTwoPeakon {
    pub h0: f64,
}

impl NegKTwoPeakon {
    pub fn from_initial(p1: f64, p2: f64, q1: f64, q2: f64) -> Self {
        Self {
            h0: two_pulse_energy(p1, p2, q1, q2),
        }
    }

    /// `(H₀ − p₁² − p₂²)/(2p₁p₂)`, which equals `e^{−|q₁−q₂|}` on the flow.
    pub fn bracket(&self, p1: f64, p2: f64) -> f64 {
        (self.h0 - p1 * p1 - p2 * p2) / (2.0 * p1 * p2)
    }

    /// Derivatives `(p₁', p₂', q₁', q₂')`.
    pub fn rhs(&self, p1: f64, p2: f64, q1: f64, q2: f64) -> Result<[f64; 4]> {
        if p1.abs() < SINGULAR_U || p2.abs() < SINGULAR_U {
            return Err(Error::Singularity(format!(
                "vanishing amplitude (p1 = {p1:e}, p2 = {p2:e})"
            )));
        }
        let b = self.bracket(p1, p2);
        if !(-1e-10..=1.0 + 1e-10).contains(&b) {
            return Err(Error::Constraint(format!(
                "(H0 - p1^2 - p2^2)/(2 p1 p2) = {b} outside [0, 1]"
            )));
        }
        let a1 = (self.h0 + p1 * p1 - p2 * p2) / (2.0 * p1);
        let a2 = (self.h0 - p1 * p1 + p2 * p2) / (2.0 * p2);
        if a1.abs() < SINGULAR_U || a2.abs() < SINGULAR_U {
            return Err(Error::Singularity(format!(
                "u vanishes at a crest (A1 = {a1:e}, A2 = {a2:e})"
            )));
        }
        let cross = self.h0 - p1 * p1 - p2 * p2;
        let s = sgn(q1 - q2);
        Ok([
            s * cross / (2.0 * a1 * a1),
            -s * cross / (2.0 * a2 * a2),
            1.0 / a1,
            1.0 / a2,
        ])
    }

    pub fn integrate(
        &self,
        p: [f64; 2],
        q: [f64; 2],
        t_end: f64,
        dt: f64,
    ) -> Result<PeakonTrajectory> {
        if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need dt > 0 and t_end >= 0 (got dt = {dt}, t_end = {t_end})"
            )));
        }
        let e0 = PeakonEnsemble::new(-1, p.to_vec(), q.to_vec())?;
        let mut traj = PeakonTrajectory {
            times: vec![0.0],
            states: vec![e0],
        };
        check_collision(&traj)?;
        let n = step_count(t_end, dt);
        let h = t_end / n as f64;
        let mut y = vec![p[0], p[1], q[0], q[1]];
        for step in 1..=n {
            y = rk4_step(&y, h, |y| Ok(self.rhs(y[0], y[1], y[2], y[3])?.to_vec()))?;
            traj.times.push(if step == n { t_end } else { step as f64 * h });
            traj.states.push(PeakonEnsemble::from_state(-1, &y));
            check_collision(&traj)?;
        }
        Ok(traj)
    }
}

/// `p₁² + 2p₁p₂e^{−|q₁−q₂|} + p₂²`.
pub fn two_pulse_energy(p1: f64, p2: f64, q1: f64, q2: f64) -> f64 {
    p1 * p1 + 2.0 * p1 * p2 * (-(q1 - q2).abs()).exp() + p2 * p2
}
