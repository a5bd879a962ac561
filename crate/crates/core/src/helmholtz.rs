//! The Helmholtz pair `m = (1 - ∂²)u`, `u = (1 - ∂²)⁻¹ m` and the nonlocal
//! flux of the equation written as `u_t + u^k u_x = F`.
//!
//! Both directions use the same three-point Laplacian, so [`HelmholtzSolver::momentum`]
//! and [`HelmholtzSolver::inv_helmholtz`] are exact discrete inverses. The
//! decaying boundary is a Dirichlet-zero tridiagonal system; the periodic one
//! is cyclic and handled with a Sherman–Morrison correction.

use crate::error::{Error, Result};
use crate::grid::{dx1, Boundary, Field, Grid};

/// Precomputed factorization of the discrete `1 - ∂²` operator on one grid.
#[derive(Clone, Debug)]
pub struct HelmholtzSolver {
    grid: Grid,
    diag: f64,
    off: f64,
    // Thomas sweep for the (possibly modified) tridiagonal part.
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
    // Periodic only: Sherman–Morrison data.
    cyclic: Option<Cyclic>,
    tail_ratio: f64,
}

#[derive(Clone, Debug)]
struct Cyclic {
    gamma: f64,
    z: Vec<f64>,
    factor: f64,
}

impl HelmholtzSolver {
    pub fn new(grid: Grid) -> Self {
        let h2 = grid.dx() * grid.dx();
        let diag = 1.0 + 2.0 / h2;
        let off = -1.0 / h2;
        let n = grid.len();

        // For the cyclic system A = T + γ·v·vᵀ-style correction with
        // u = (γ, 0, …, 0, off), v = (1, 0, …, 0, off/γ).
        let gamma = -diag;
        let mut d = vec![diag; n];
        if grid.boundary() == Boundary::Periodic {
            d[0] = diag - gamma;
            d[n - 1] = diag - off * off / gamma;
        }

        let mut c_prime = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut pivot = d[0];
        assert!(pivot != 0.0, "singular Helmholtz system");
        inv_pivot[0] = 1.0 / pivot;
        c_prime[0] = off * inv_pivot[0];
        for i in 1..n {
            pivot = d[i] - off * c_prime[i - 1];
            assert!(pivot != 0.0, "singular Helmholtz system");
            inv_pivot[i] = 1.0 / pivot;
            c_prime[i] = off * inv_pivot[i];
        }

        let tail_ratio = {
            // r + 1/r = 2 + h², r < 1: decay factor of the discrete kernel.
            let b = 1.0 + 0.5 * h2;
            b - (b * b - 1.0).sqrt()
        };

        let mut solver = Self {
            grid,
            diag,
            off,
            c_prime,
            inv_pivot,
            cyclic: None,
            tail_ratio,
        };

        if grid.boundary() == Boundary::Periodic {
            let mut u = vec![0.0; n];
            u[0] = gamma;
            u[n - 1] = off;
            solver.thomas(&mut u);
            let v_last = off / gamma;
            let factor = 1.0 / (1.0 + u[0] + v_last * u[n - 1]);
            solver.cyclic = Some(Cyclic {
                gamma,
                z: u,
                factor,
            });
        }
        solver
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Ratio `r` of consecutive values of the discrete Green's function away
    /// from its source: the grid analogue of `e^{-dx}`.
    pub fn tail_ratio(&self) -> f64 {
        self.tail_ratio
    }

    fn thomas(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }

    fn check(&self, f: &Field) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Solves `(1 - ∂²) w = f` with the three-point Laplacian.
    pub fn inv_helmholtz(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        Ok(self.solve(f.values()))
    }

    pub(crate) fn solve(&self, f: &[f64]) -> Field {
        let n = f.len();
        let mut y = f.to_vec();
        self.thomas(&mut y);
        if let Some(c) = &self.cyclic {
            let v_last = self.off / c.gamma;
            let dot = y[0] + v_last * y[n - 1];
            let s = dot * c.factor;
            for (yi, zi) in y.iter_mut().zip(&c.z) {
                *yi -= s * zi;
            }
        }
        Field::from_vec(self.grid, y)
    }

    /// `m = u - u_xx` with the same three-point stencil as the solver.
    pub fn momentum(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(self.apply(u.values()))
    }

    pub(crate) fn apply(&self, u: &[f64]) -> Field {
        let g = self.grid;
        let out = (0..g.len() as isize)
            .map(|i| self.diag * u[i as usize] + self.off * (g.at(u, i - 1) + g.at(u, i + 1)))
            .collect();
        Field::from_vec(g, out)
    }

    /// Discrete `u + u_x` built from the factorization of the Helmholtz
    /// operator: `(u_j - r·u_{j-1}) / (dx·r)`.
    ///
    /// For `u = (1 - ∂²)⁻¹ m` this equals `dx·Σ_{l≥0} r^l m_{j+l}`, so it is
    /// nonnegative whenever `m` is, mirroring `u + u_x = e^x ∫_x^∞ e^{-s} m ds`.
    pub fn u_plus_ux(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let g = self.grid;
        let r = self.tail_ratio;
        let scale = 1.0 / (g.dx() * r);
        let v = u.values();
        let out = (0..g.len() as isize)
            .map(|j| (v[j as usize] - r * g.at(v, j - 1)) * scale)
            .collect();
        Ok(Field::from_vec(g, out))
    }

    /// The nonlocal flux
    /// `F = k(k-1)/2 · Λ⁻²(u^{k-2} u_x³) - 3k/2 · ∂_x Λ⁻²(u^{k-1} u_x²)`.
    pub fn flux(&self, u: &Field, k: i32) -> Result<Field> {
        self.check(u)?;
        if k < 1 {
            return Err(Error::InvalidArgument(format!(
                "flux requires k >= 1, got {k}"
            )));
        }
        let ux = dx1(u);
        let kf = f64::from(k);

        let quad: Vec<f64> = u
            .values()
            .iter()
            .zip(ux.values())
            .map(|(&a, &d)| a.powi(k - 1) * d * d)
            .collect();
        let transport = dx1(&self.solve(&quad));

        let mut out: Vec<f64> = transport
            .values()
            .iter()
            .map(|t| -1.5 * kf * t)
            .collect();

        // k = 1: the cubic term has coefficient zero and u^{-1} is never formed.
        if k >= 2 {
            let coeff = 0.5 * kf * (kf - 1.0);
            let cubic: Vec<f64> = u
                .values()
                .iter()
                .zip(ux.values())
                .map(|(&a, &d)| a.powi(k - 2) * d * d * d)
                .collect();
            let smooth = self.solve(&cubic);
            for (o, s) in out.iter_mut().zip(smooth.values()) {
                *o += coeff * s;
            }
        }
        Ok(Field::from_vec(self.grid, out))
    }

    /// `∂_x F`.
    pub fn flux_dx(&self, u: &Field, k: i32) -> Result<Field> {
        Ok(dx1(&self.flux(u, k)?))
    }
}
