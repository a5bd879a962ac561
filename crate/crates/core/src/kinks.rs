//! Kink ensembles `u = Σ cⱼ + bⱼ sgn(x−pⱼ)(1 − e^{−|x−pⱼ|})`.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::ode::{rk4_step, step_count};
use crate::output::fmt_num;
use crate::peakons::sgn;

#[derive(Clone, Debug, PartialEq)]
pub struct KinkEnsemble {
    pub k: i32,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub p: Vec<f64>,
}

fn kink_shape(s: f64) -> f64 {
    sgn(s) * -(-s.abs()).exp_m1()
}

impl KinkEnsemble {
    pub fn new(k: i32, c: Vec<f64>, b: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument(format!(
                "kinks need a positive exponent, got k = {k}"
            )));
        }
        if c.is_empty() || c.len() != b.len() || c.len() != p.len() {
            return Err(Error::InvalidArgument(format!(
                "c, b, p must share a nonzero length (got {}, {}, {})",
                c.len(),
                b.len(),
                p.len()
            )));
        }
        if c.iter().chain(&b).chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite kink data".into()));
        }
        if let Some(j) = b.iter().zip(&p).position(|(b, p)| *b == 0.0 && *p != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kink {} has b = 0 but p = {}; a flat kink must sit at p = 0",
                j + 1,
                p[j]
            )));
        }
        Ok(Self { k, c, b, p })
    }

    /// Antisymmetric pair `b = (1, 1)`, `p = (p₀, −p₀)`, `c = 0` for odd `k`.
    /// Even `k` would need `b₂^k = −b₁^k`, which has no real solution.
    pub fn symmetric_pair(k: i32, p0: f64) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::Constraint(format!(
                "b2^k = -b1^k has no real nonzero solution for even k = {k}"
            )));
        }
        if !(p0 > 0.0) {
            return Err(Error::InvalidArgument(format!("need p0 > 0, got {p0}")));
        }
        Self::new(k, vec![0.0, 0.0], vec![1.0, 1.0], vec![p0, -p0])
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn u_at(&self, x: f64) -> f64 {
        (0..self.len())
            .map(|j| self.c[j] + self.b[j] * kink_shape(x - self.p[j]))
            .sum()
    }

    fn state(&self) -> Vec<f64> {
        self.c.iter().chain(&self.b).chain(&self.p).copied().collect()
    }

    fn from_state(k: i32, y: &[f64]) -> Self {
        let n = y.len() / 3;
        Self {
            k,
            c: y[..n].to_vec(),
            b: y[n..2 * n].to_vec(),
            p: y[2 * n..].to_vec(),
        }
    }
}

pub fn kink_field(e: &KinkEnsemble, g: Grid) -> Field {
    Field::from_vec(g, (0..g.len()).map(|i| e.u_at(g.x(i))).collect())
}

/// `(dc, db, dp)` with `dc = db = 0` and `pᵢ' = u(pᵢ)^k`.
pub fn kink_rhs(e: &KinkEnsemble) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = e.len();
    let dp = e.p.iter().map(|&p| e.u_at(p).powi(e.k)).collect();
    (vec![0.0; n], vec![0.0; n], dp)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinkTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<KinkEnsemble>,
}

impl KinkTrajectory {
    pub fn last(&self) -> &KinkEnsemble {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, KinkEnsemble::len);
        let mut cols = vec!["t".to_string()];
        for name in ["c", "b", "p"] {
            cols.extend((1..=n).map(|i| format!("{name}_{i}")));
        }
        writeln!(w, "{}", cols.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = std::iter::once(*t)
                .chain(s.state())
                .map(fmt_num)
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn integrate_kinks(e0: &KinkEnsemble, t_end: f64, dt: f64) -> Result<KinkTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= 0 (got dt = {dt}, t_end = {t_end})"
        )));
    }
    let e0 = KinkEnsemble::new(e0.k, e0.c.clone(), e0.b.clone(), e0.p.clone())?;
    let k = e0.k;
    let n = e0.len();
    let mut traj = KinkTrajectory {
        times: vec![0.0],
        states: vec![e0],
    };
    if t_end == 0.0 {
        return Ok(traj);
    }
    let steps = step_count(t_end, dt);
    let h = t_end / steps as f64;
    let mut y = traj.states[0].state();
    for step in 1..=steps {
        let next = rk4_step(&y, h, |y| {
            let (dc, db, dp) = kink_rhs(&KinkEnsemble::from_state(k, y));
            Ok(dc.into_iter().chain(db).chain(dp).collect())
        })?;
        assert_eq!(next[..2 * n], y[..2 * n], "c and b must stay constant");
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        y = next;
        traj.times.push(if step == steps { t_end } else { step as f64 * h });
        traj.states.push(KinkEnsemble::from_state(k, &y));
    }
    Ok(traj)
}

/// Position of the symmetric pair under `p' = (1 − e^{−2p})^k`, recorded at
/// every step. For odd `k` this is the motion of [`KinkEnsemble::symmetric_pair`];
/// for even `k` no two-kink ensemble moves this way.
pub fn integrate_symmetric_pair(k: i32, p0: f64, t_end: f64, dt: f64) -> Result<Vec<(f64, f64)>> {
    if k < 1 || !(p0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need k >= 1 and p0 > 0 (got k = {k}, p0 = {p0})"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= 0 (got dt = {dt}, t_end = {t_end})"
        )));
    }
    let mut out = vec![(0.0, p0)];
    if t_end == 0.0 {
        return Ok(out);
    }
    let steps = step_count(t_end, dt);
    let h = t_end / steps as f64;
    let mut y = vec![p0];
    for step in 1..=steps {
        y = rk4_step(&y, h, |y| Ok(vec![(-(-2.0 * y[0]).exp_m1()).powi(k)]))?;
        out.push((if step == steps { t_end } else { step as f64 * h }, y[0]));
    }
    Ok(out)
}

/// `c^{1/k} + b sgn(x − ct − p₀)(1 − e^{−|x − ct − p₀|})`.
pub fn travelling_kink(c: f64, k: i32, b: f64, p0: f64, t: f64, x: f64) -> f64 {
    c.powf(1.0 / k as f64) + b * kink_shape(x - c * t - p0)
}

/// `½ ln(1 + (e^{2p₀} − 1) e^{2t})`, the `k = 1` symmetric-pair position.
pub fn exact_symmetric_kink_position(p0: f64, t: f64) -> Result<f64> {
    if !(p0 > 0.0) {
        return Err(Error::InvalidArgument(format!("need p0 > 0, got {p0}")));
    }
    Ok(0.5 * ((2.0 * p0).exp_m1() * (2.0 * t).exp()).ln_1p())
}

pub fn exact_two_kink_field(p0: f64, t: f64, g: Grid) -> Result<Field> {
    let p = exact_symmetric_kink_position(p0, t)?;
    Ok(Field::from_vec(
        g,
        (0..g.len())
            .map(|i| {
                let x = g.x(i);
                kink_shape(x - p) + kink_shape(x + p)
            })
            .collect(),
    ))
}
