//! Method-of-lines time integration of `u_t = -u^k u_x + F` with classical
//! RK4 and a CFL step recomputed every step.
//!
//! Two semi-discretizations of the right-hand side are available:
//!
//! * [`Scheme::MomentumTransport`] (default) evaluates the equation in its
//!   momentum form `m_t = -(u^k m)_x + (u^k)_x m`, with a Koren-limited
//!   upwind flux for the divergence and a centred source, and maps the result
//!   back through the discrete Helmholtz inverse. The flux telescopes and the
//!   source sums to zero for `k = 1`, so `∫u` is conserved to round-off, and
//!   the limited upwind update keeps the discrete momentum single-signed.
//! * [`Scheme::NonlocalFlux`] evaluates `-u^k·dx1(u) + F` literally, with `F`
//!   from [`HelmholtzSolver::flux`].

use crate::error::{Error, Result};
use crate::grid::{dx1, Field, Grid};
use crate::helmholtz::HelmholtzSolver;

/// Floor on the transport speed used by [`stable_dt`].
pub const SPEED_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    MomentumTransport,
    NonlocalFlux,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::MomentumTransport => "momentum",
            Scheme::NonlocalFlux => "nonlocal",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "momentum" => Ok(Scheme::MomentumTransport),
            "nonlocal" => Ok(Scheme::NonlocalFlux),
            other => Err(Error::Domain(format!(
                "scheme must be `momentum` or `nonlocal`, got `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub k: i32,
    pub t_end: f64,
    pub cfl: f64,
    pub snapshot_every: f64,
    pub monitor_every: f64,
    pub scheme: Scheme,
}

impl SolverConfig {
    pub fn new(k: i32, t_end: f64) -> Self {
        Self {
            k,
            t_end,
            cfl: 0.3,
            snapshot_every: 0.1,
            monitor_every: 0.05,
            scheme: Scheme::default(),
        }
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn with_snapshot_every(mut self, every: f64) -> Self {
        self.snapshot_every = every;
        self
    }

    pub fn with_monitor_every(mut self, every: f64) -> Self {
        self.monitor_every = every;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Domain(format!(
                "PDE evolution needs integer k >= 1, got {}",
                self.k
            )));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("t_end", self.t_end)?;
        positive("snapshot_every", self.snapshot_every)?;
        positive("monitor_every", self.monitor_every)?;
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Domain(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        Ok(())
    }
}

/// Snapshots of `u(t, ·)` at increasing times starting from `t = 0`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub config: SolverConfig,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Field)> {
        self.times.iter().copied().zip(&self.snapshots)
    }

    /// A trajectory holding `u ≡ c` at the given times. Useful as an exact
    /// reference for monitors and characteristics.
    pub fn constant(grid: Grid, c: f64, times: Vec<f64>, config: SolverConfig) -> Self {
        let snapshots = times.iter().map(|_| Field::constant(grid, c)).collect();
        Self {
            times,
            snapshots,
            config,
        }
    }
}

/// Hooks invoked by [`simulate_observed`]. `snapshot` fires at the snapshot
/// cadence, `monitor` at the monitor cadence; both fire at `t = 0` and at the
/// final time.
pub trait Observer {
    fn snapshot(&mut self, _t: f64, _u: &Field) -> Result<()> {
        Ok(())
    }

    fn monitor(&mut self, _t: f64, _u: &Field) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Right-hand side with the default scheme.
pub fn rhs(s: &HelmholtzSolver, u: &Field, k: i32) -> Result<Field> {
    rhs_with(s, u, k, Scheme::default())
}

pub fn rhs_with(s: &HelmholtzSolver, u: &Field, k: i32, scheme: Scheme) -> Result<Field> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!(
            "PDE right-hand side needs k >= 1, got {k}"
        )));
    }
    if *u.grid() != *s.grid() {
        return Err(Error::GridMismatch);
    }
    if let Some(index) = u.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(match scheme {
        Scheme::MomentumTransport => momentum_transport(s, u, k),
        Scheme::NonlocalFlux => {
            let ux = dx1(u);
            let flux = s.flux(u, k)?;
            let out = u
                .values()
                .iter()
                .zip(ux.values())
                .zip(flux.values())
                .map(|((&a, &d), &f)| -a.powi(k) * d + f)
                .collect();
            Field::from_vec(*s.grid(), out)
        }
    })
}

/// Koren limiter in slope form: `up` is the upwind difference, `down` the
/// downwind one. Unlimited, the face value is third-order upwind-biased.
#[inline]
fn koren(up: f64, down: f64) -> f64 {
    if up * down <= 0.0 {
        return 0.0;
    }
    let mag = (2.0 * up.abs())
        .min(2.0 * down.abs())
        .min((up.abs() + 2.0 * down.abs()) / 3.0);
    mag.copysign(up)
}

fn momentum_transport(s: &HelmholtzSolver, u: &Field, k: i32) -> Field {
    let g = *s.grid();
    let n = g.len();
    let m = s.apply(u.values());
    let speed = u.map(|v| v.powi(k));

    // Padded copies: index p corresponds to grid index p - 2.
    let pad = |v: &[f64]| -> Vec<f64> { (-2..n as isize + 2).map(|i| g.at(v, i)).collect() };
    let mp = pad(m.values());
    let ap = pad(speed.values());

    // Face j sits between grid cells j - 1 and j, for j = 0..=n.
    let faces: Vec<f64> = (0..=n)
        .map(|j| {
            let left = j + 1; // padded index of cell j - 1
            let right = j + 2; // padded index of cell j
            let a_face = 0.5 * (ap[left] + ap[right]);
            if a_face > 0.0 {
                let s = koren(mp[left] - mp[left - 1], mp[right] - mp[left]);
                a_face * (mp[left] + 0.5 * s)
            } else if a_face < 0.0 {
                let s = koren(mp[right + 1] - mp[right], mp[right] - mp[left]);
                a_face * (mp[right] - 0.5 * s)
            } else {
                0.0
            }
        })
        .collect();

    let da = dx1(&speed);
    let inv_dx = 1.0 / g.dx();
    let m_t: Vec<f64> = (0..n)
        .map(|i| -(faces[i + 1] - faces[i]) * inv_dx + da.values()[i] * m.values()[i])
        .collect();
    s.solve(&m_t)
}

/// `cfl·dx / max(ε, max|u|^k)`.
pub fn stable_dt(u: &Field, k: i32, cfl: f64) -> f64 {
    let speed = u.max_abs().powi(k).max(SPEED_FLOOR);
    cfl * u.grid().dx() / speed
}

/// One classical RK4 step with the default scheme.
pub fn step_rk4(s: &HelmholtzSolver, u: &Field, dt: f64, k: i32) -> Result<Field> {
    step_rk4_with(s, u, dt, k, Scheme::default())
}

pub fn step_rk4_with(
    s: &HelmholtzSolver,
    u: &Field,
    dt: f64,
    k: i32,
    scheme: Scheme,
) -> Result<Field> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive and finite, got {dt}"
        )));
    }
    let k1 = rhs_with(s, u, k, scheme)?;
    let u2 = u.axpy(0.5 * dt, &k1)?;
    let k2 = rhs_with(s, &u2, k, scheme)?;
    let u3 = u.axpy(0.5 * dt, &k2)?;
    let k3 = rhs_with(s, &u3, k, scheme)?;
    let u4 = u.axpy(dt, &k3)?;
    let k4 = rhs_with(s, &u4, k, scheme)?;
    let w = dt / 6.0;
    let out: Vec<f64> = (0..u.len())
        .map(|i| {
            u.values()[i]
                + w * (k1.values()[i]
                    + 2.0 * k2.values()[i]
                    + 2.0 * k3.values()[i]
                    + k4.values()[i])
        })
        .collect();
    if let Some(index) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(Field::from_vec(*u.grid(), out))
}

/// Integrates from `u0` to `config.t_end`, storing snapshots.
pub fn simulate(u0: &Field, config: &SolverConfig) -> Result<Trajectory> {
    simulate_observed(u0, config, &mut ())
}

/// Checks `u0` against the solver preconditions.
pub fn check_initial(u0: &Field) -> Result<()> {
    if let Some(value) = u0.boundary_excess() {
        return Err(Error::BoundaryNotNegligible {
            value,
            max: u0.max_abs(),
        });
    }
    Ok(())
}

/// Event time `j·every`, snapped to `t_end` when within round-off of it.
fn event_time(j: usize, every: f64, t_end: f64) -> f64 {
    let t = j as f64 * every;
    if t >= t_end * (1.0 - 1e-12) {
        t_end
    } else {
        t
    }
}

pub fn simulate_observed(
    u0: &Field,
    config: &SolverConfig,
    observer: &mut dyn Observer,
) -> Result<Trajectory> {
    config.validate()?;
    check_initial(u0)?;
    let solver = HelmholtzSolver::new(*u0.grid());

    let mut traj = Trajectory {
        times: vec![0.0],
        snapshots: vec![u0.clone()],
        config: config.clone(),
    };
    observer.snapshot(0.0, u0)?;
    observer.monitor(0.0, u0)?;

    let t_end = config.t_end;
    let mut t = 0.0;
    let mut u = u0.clone();
    let mut next_snap = 1usize;
    let mut next_mon = 1usize;

    while t < t_end {
        let ts = event_time(next_snap, config.snapshot_every, t_end);
        let tm = event_time(next_mon, config.monitor_every, t_end);
        let target = ts.min(tm);
        let mut dt = stable_dt(&u, config.k, config.cfl);
        let hit = t + dt >= target - 1e-12 * target.max(1.0);
        if hit {
            dt = target - t;
        }
        u = match step_rk4_with(&solver, &u, dt, config.k, config.scheme) {
            Ok(next) => next,
            Err(Error::NonFinite { .. }) => {
                return Err(Error::BlowUp {
                    time: t,
                    partial: Box::new(traj),
                })
            }
            Err(e) => return Err(e),
        };
        t = if hit { target } else { t + dt };

        if hit {
            if t == ts {
                traj.times.push(t);
                traj.snapshots.push(u.clone());
                observer.snapshot(t, &u)?;
                next_snap += 1;
            }
            if t == tm {
                observer.monitor(t, &u)?;
                next_mon += 1;
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{quadrature, Grid};

    #[test]
    fn zero_and_constant_states_are_steady() {
        let g = Grid::periodic(-10.0, 10.0, 128).unwrap();
        let s = HelmholtzSolver::new(g);
        for scheme in [Scheme::MomentumTransport, Scheme::NonlocalFlux] {
            assert_eq!(rhs_with(&s, &Field::zeros(g), 1, scheme).unwrap().max_abs(), 0.0);
            let c = Field::constant(g, 0.8);
            assert!(rhs_with(&s, &c, 1, scheme).unwrap().max_abs() < 1e-13);
            let stepped = step_rk4_with(&s, &c, 0.01, 1, scheme).unwrap();
            assert!(stepped.max_diff(&c).unwrap() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = Grid::periodic(-10.0, 10.0, 64).unwrap();
        let s = HelmholtzSolver::new(g);
        let u = Field::zeros(g);
        assert!(rhs(&s, &u, 0).is_err());
        assert!(step_rk4(&s, &u, 0.0, 1).is_err());
        assert!(step_rk4(&s, &u, f64::NAN, 1).is_err());
        assert!(SolverConfig::new(0, 1.0).validate().is_err());
        assert!(SolverConfig::new(1, 1.0).with_cfl(1.5).validate().is_err());
        assert!(SolverConfig::new(1, -1.0).validate().is_err());
    }

    #[test]
    fn stable_dt_formula() {
        let g = Grid::new(0.0, 0.1, 16, crate::grid::Boundary::Periodic).unwrap();
        let mut v = vec![0.0; 16];
        v[3] = -2.0;
        let u = Field::new(g, v).unwrap();
        assert!((stable_dt(&u, 2, 0.5) - 0.0125).abs() < 1e-15);
        assert!((stable_dt(&u, 2, 1.0) - 2.0 * stable_dt(&u, 2, 0.5)).abs() < 1e-15);
        let z = Field::zeros(g);
        assert_eq!(stable_dt(&z, 1, 0.3), 0.3 * 0.1 / SPEED_FLOOR);
    }

    #[test]
    fn rhs_of_peakon_is_travelling_wave_off_crest() {
        let g = Grid::periodic(-20.0, 20.0, 4096).unwrap();
        let s = HelmholtzSolver::new(g);
        let u = Field::from_fn(g, |x| (-x.abs()).exp()).unwrap();
        let ux = dx1(&u);
        for scheme in [Scheme::NonlocalFlux, Scheme::MomentumTransport] {
            let r = rhs_with(&s, &u, 1, scheme).unwrap();
            let worst = (0..g.len())
                .filter(|&i| g.x(i).abs() > 0.5)
                .map(|i| (r.values()[i] + ux.values()[i]).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-2, "{scheme:?}: {worst}");
        }
    }

    #[test]
    fn zero_datum_stays_zero() {
        let g = Grid::decaying(-10.0, 10.0, 256).unwrap();
        let traj = simulate(&Field::zeros(g), &SolverConfig::new(1, 0.5)).unwrap();
        assert_eq!(traj.times.len(), 6);
        assert!(traj.snapshots.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn snapshot_times_are_hit_exactly() {
        let g = Grid::decaying(-20.0, 20.0, 512).unwrap();
        let u0 = Field::from_fn(g, |x| 0.5 * (-x * x).exp()).unwrap();
        let cfg = SolverConfig::new(1, 0.35).with_snapshot_every(0.1);
        let traj = simulate(&u0, &cfg).unwrap();
        assert_eq!(traj.times, vec![0.0, 0.1, 0.2, 0.30000000000000004, 0.35]);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn boundary_violation_is_rejected() {
        let g = Grid::decaying(-5.0, 5.0, 128).unwrap();
        let u0 = Field::from_fn(g, |x| (-0.2 * x.abs()).exp()).unwrap();
        assert!(matches!(
            simulate(&u0, &SolverConfig::new(1, 1.0)),
            Err(Error::BoundaryNotNegligible { .. })
        ));
    }

    #[test]
    fn momentum_scheme_conserves_mass_for_k1() {
        let g = Grid::decaying(-30.0, 30.0, 1024).unwrap();
        let u0 = Field::from_fn(g, |x| (-x * x).exp() + 0.5 * (-(x - 2.0).powi(2)).exp()).unwrap();
        let traj = simulate(&u0, &SolverConfig::new(1, 2.0)).unwrap();
        let h0 = quadrature(traj.initial());
        for f in &traj.snapshots {
            assert!((quadrature(f) - h0).abs() < 1e-12 * (1.0 + h0.abs()));
        }
    }

    #[test]
    fn observer_receives_both_cadences() {
        struct Count(usize, usize);
        impl Observer for Count {
            fn snapshot(&mut self, _: f64, _: &Field) -> Result<()> {
                self.0 += 1;
                Ok(())
            }
            fn monitor(&mut self, _: f64, _: &Field) -> Result<()> {
                self.1 += 1;
                Ok(())
            }
        }
        let g = Grid::decaying(-20.0, 20.0, 256).unwrap();
        let u0 = Field::from_fn(g, |x| 0.3 * (-x * x).exp()).unwrap();
        let mut count = Count(0, 0);
        let cfg = SolverConfig::new(2, 0.5)
            .with_snapshot_every(0.25)
            .with_monitor_every(0.1);
        simulate_observed(&u0, &cfg, &mut count).unwrap();
        assert_eq!(count.0, 3);
        assert_eq!(count.1, 6);
    }
}
