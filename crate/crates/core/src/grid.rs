//! Uniform one-dimensional grids, sampled fields and finite-difference
//! derivative stencils.
//!
//! Two boundary treatments are supported. On a periodic grid the domain is
//! `[x_min, x_min + n·dx)` and indices wrap modulo `n`. On a decaying grid the
//! nodes are `x_min, x_min + dx, …, x_min + (n-1)·dx` and every value beyond
//! the last node on either side is taken to be exactly zero.

use crate::error::{Error, Result};

/// Relative size above which a boundary value on a decaying grid is flagged.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Decaying,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Decaying => "decaying",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(Boundary::Periodic),
            "decaying" => Ok(Boundary::Decaying),
            other => Err(Error::Domain(format!(
                "boundary must be `periodic` or `decaying`, got `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x_min: f64,
    dx: f64,
    n: usize,
    boundary: Boundary,
}

impl Grid {
    pub fn new(x_min: f64, dx: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !x_min.is_finite() {
            return Err(Error::InvalidGrid("x_min must be finite".into()));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("need at least 8 points, got {n}")));
        }
        Ok(Self {
            x_min,
            dx,
            n,
            boundary,
        })
    }

    /// Periodic grid covering `[a, b)` with `n` points.
    pub fn periodic(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(a, (b - a) / n as f64, n, Boundary::Periodic)
    }

    /// Decaying grid on `[a, b)` with spacing `(b - a) / n`, so that a
    /// symmetric interval puts a node at its midpoint when `n` is even.
    pub fn decaying(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(a, (b - a) / n as f64, n, Boundary::Decaying)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Coordinate of node `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Last node for decaying grids, the excluded right end for periodic ones.
    pub fn x_max(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.x_min + self.n as f64 * self.dx,
            Boundary::Decaying => self.x(self.n - 1),
        }
    }

    /// Domain length (the period for periodic grids).
    pub fn length(&self) -> f64 {
        self.x_max() - self.x_min
    }

    /// Midpoint of `[x_min, x_min + n·dx)`.
    pub fn center(&self) -> f64 {
        self.x_min + 0.5 * self.n as f64 * self.dx
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Value at signed index `i` with the grid's boundary rule applied.
    #[inline]
    pub(crate) fn at(&self, values: &[f64], i: isize) -> f64 {
        let n = self.n as isize;
        match self.boundary {
            Boundary::Periodic => values[i.rem_euclid(n) as usize],
            Boundary::Decaying => {
                if i < 0 || i >= n {
                    0.0
                } else {
                    values[i as usize]
                }
            }
        }
    }
}

/// Real samples on a [`Grid`]. All entries are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values produced by finite arithmetic on
    /// finite inputs. Non-finite entries are caught by the callers that can
    /// produce them (time stepping, peakon evaluation).
    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_vec(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_vec(grid, vec![c; grid.len()])
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(|i| f(grid.x(i))).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_vec(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// `self + scale·other`.
    pub fn axpy(&self, scale: f64, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + scale * b)
    }

    /// Max-norm distance between two fields on the same grid.
    pub fn max_diff(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// For decaying grids: the larger end value when it is not negligible
    /// relative to the field maximum.
    pub fn boundary_excess(&self) -> Option<f64> {
        if self.grid.boundary != Boundary::Decaying {
            return None;
        }
        let max = self.max_abs();
        let edge = self.values[0].abs().max(self.values[self.len() - 1].abs());
        (edge > BOUNDARY_TOLERANCE * max).then_some(edge)
    }

    /// Logs a warning when [`Field::boundary_excess`] fires.
    pub fn warn_if_boundary_large(&self, context: &str) {
        if let Some(edge) = self.boundary_excess() {
            log::warn!(
                "{context}: boundary value {edge:.3e} exceeds {BOUNDARY_TOLERANCE:e} of max {:.3e}",
                self.max_abs()
            );
        }
    }
}

/// Fourth-order central first derivative. Values beyond a decaying grid are
/// zero, so the stencil stays skew-symmetric up to the ends.
pub fn dx1(f: &Field) -> Field {
    let g = f.grid;
    let v = &f.values;
    let scale = 1.0 / (12.0 * g.dx);
    let out = (0..g.n as isize)
        .map(|i| {
            (g.at(v, i - 2) - 8.0 * g.at(v, i - 1) + 8.0 * g.at(v, i + 1) - g.at(v, i + 2)) * scale
        })
        .collect();
    Field::from_vec(g, out)
}

/// Fourth-order central second derivative with the same boundary rule as
/// [`dx1`].
pub fn dx2(f: &Field) -> Field {
    let g = f.grid;
    let v = &f.values;
    let scale = 1.0 / (12.0 * g.dx * g.dx);
    let out = (0..g.n as isize)
        .map(|i| {
            (-g.at(v, i - 2) + 16.0 * g.at(v, i - 1) - 30.0 * g.at(v, i) + 16.0 * g.at(v, i + 1)
                - g.at(v, i + 2))
                * scale
        })
        .collect();
    Field::from_vec(g, out)
}

/// Integral over the domain: rectangle rule on periodic grids, trapezoid on
/// decaying grids.
pub fn quadrature(f: &Field) -> f64 {
    let g = f.grid;
    let sum: f64 = f.values.iter().sum();
    match g.boundary {
        Boundary::Periodic => g.dx * sum,
        Boundary::Decaying => g.dx * (sum - 0.5 * (f.values[0] + f.values[g.n - 1])),
    }
}

/// Cubic Lagrange interpolation from the four nodes surrounding `x`.
///
/// Periodic grids wrap `x` into the domain. On decaying grids points outside
/// `[x_min, x_max]` give zero and missing neighbours count as zero.
pub fn sample(f: &Field, x: f64) -> f64 {
    let g = f.grid;
    let mut s = (x - g.x_min) / g.dx;
    match g.boundary {
        Boundary::Periodic => s = s.rem_euclid(g.n as f64),
        Boundary::Decaying => {
            if !(0.0..=(g.n - 1) as f64).contains(&s) {
                return 0.0;
            }
        }
    }
    let base = s.floor();
    let t = s - base;
    let i = base as isize;
    if t == 0.0 {
        return g.at(&f.values, i);
    }
    let w_m1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w_0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w_1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w_2 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w_m1 * g.at(&f.values, i - 1)
        + w_0 * g.at(&f.values, i)
        + w_1 * g.at(&f.values, i + 1)
        + w_2 * g.at(&f.values, i + 2)
}

/// Derivative of the cubic interpolant used by [`sample`], at `x`.
pub fn sample_slope(f: &Field, x: f64) -> f64 {
    let g = f.grid;
    let mut s = (x - g.x_min) / g.dx;
    match g.boundary {
        Boundary::Periodic => s = s.rem_euclid(g.n as f64),
        Boundary::Decaying => {
            if !(0.0..=(g.n - 1) as f64).contains(&s) {
                return 0.0;
            }
        }
    }
    let base = s.floor();
    let t = s - base;
    let i = base as isize;
    let d_m1 = -(3.0 * t * t - 6.0 * t + 2.0) / 6.0;
    let d_0 = (3.0 * t * t - 4.0 * t - 1.0) / 2.0;
    let d_1 = -(3.0 * t * t - 2.0 * t - 2.0) / 2.0;
    let d_2 = (3.0 * t * t - 1.0) / 6.0;
    (d_m1 * g.at(&f.values, i - 1)
        + d_0 * g.at(&f.values, i)
        + d_1 * g.at(&f.values, i + 1)
        + d_2 * g.at(&f.values, i + 2))
        / g.dx
}

/// Gaussian smoothing with standard deviation `width`, evaluated by direct
/// summation over ±6 widths.
pub fn mollify(f: &Field, width: f64) -> Field {
    let g = f.grid;
    if width <= 0.0 {
        return f.clone();
    }
    let reach = (6.0 * width / g.dx).ceil() as isize;
    let weights: Vec<f64> = (-reach..=reach)
        .map(|j| {
            let z = j as f64 * g.dx / width;
            (-0.5 * z * z).exp()
        })
        .collect();
    let norm: f64 = weights.iter().sum();
    let out = (0..g.n as isize)
        .map(|i| {
            weights
                .iter()
                .zip(-reach..=reach)
                .map(|(w, j)| w * g.at(&f.values, i - j))
                .sum::<f64>()
                / norm
        })
        .collect();
    Field::from_vec(g, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn periodic_2pi(n: usize) -> Grid {
        Grid::periodic(0.0, 2.0 * PI, n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0.0, 0.0, 16, Boundary::Periodic).is_err());
        assert!(Grid::new(0.0, 0.1, 7, Boundary::Periodic).is_err());
        assert!(Grid::new(f64::NAN, 0.1, 16, Boundary::Decaying).is_err());
    }

    #[test]
    fn field_rejects_non_finite_and_wrong_length() {
        let g = Grid::decaying(-1.0, 1.0, 9).unwrap();
        assert!(matches!(
            Field::new(g, vec![0.0; 8]),
            Err(Error::LengthMismatch { .. })
        ));
        let mut v = vec![0.0; 9];
        v[3] = f64::NAN;
        assert!(matches!(Field::new(g, v), Err(Error::NonFinite { index: 3 })));
    }

    #[test]
    fn derivatives_of_constant_vanish() {
        let g = periodic_2pi(64);
        let f = Field::constant(g, 3.7);
        assert!(dx1(&f).max_abs() < 1e-12);
        assert!(dx2(&f).max_abs() < 1e-10);
    }

    #[test]
    fn dx1_of_sine_is_cosine() {
        let g = periodic_2pi(256);
        let f = Field::from_fn(g, f64::sin).unwrap();
        let exact = Field::from_fn(g, f64::cos).unwrap();
        assert!(dx1(&f).max_diff(&exact).unwrap() < 1e-6);
    }

    #[test]
    fn dx2_of_sine_is_minus_sine() {
        let g = periodic_2pi(256);
        let f = Field::from_fn(g, f64::sin).unwrap();
        let exact = Field::from_fn(g, |x| -x.sin()).unwrap();
        assert!(dx2(&f).max_diff(&exact).unwrap() < 1e-6);
    }

    #[test]
    fn interior_derivatives_of_polynomials() {
        let g = Grid::decaying(-2.0, 2.0, 41).unwrap();
        let lin = Field::from_fn(g, |x| x).unwrap();
        let quad = Field::from_fn(g, |x| x * x).unwrap();
        let d1 = dx1(&lin);
        let d2 = dx2(&quad);
        for i in 2..g.len() - 2 {
            assert!((d1.values()[i] - 1.0).abs() < 1e-10);
            assert!((d2.values()[i] - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn quadrature_cases() {
        let g = Grid::decaying(-40.0, 40.0, 4096).unwrap();
        assert_eq!(quadrature(&Field::zeros(g)), 0.0);
        let e = Field::from_fn(g, |x| (-x.abs()).exp()).unwrap();
        // With a node on the crest the trapezoid sum is dx·coth(dx/2) = 2 + dx²/6 + O(dx⁴).
        let h = g.dx();
        let exact_sum = h / (0.5 * h).tanh();
        assert!((quadrature(&e) - exact_sum).abs() < 1e-12);
        assert!((quadrature(&e) - 2.0).abs() < 1e-4);
        let p = periodic_2pi(128);
        let s = Field::from_fn(p, f64::sin).unwrap();
        assert!(quadrature(&s).abs() < 1e-12);
    }

    #[test]
    fn sample_cases() {
        let g = Grid::decaying(-3.0, 3.0, 61).unwrap();
        let lin = Field::from_fn(g, |x| x).unwrap();
        assert_eq!(sample(&lin, g.x(17)), lin.values()[17]);
        let mid = 0.5 * (g.x(20) + g.x(21));
        assert!((sample(&lin, mid) - mid).abs() < 1e-10);
        assert_eq!(sample(&lin, 10.0), 0.0);

        let p = periodic_2pi(512);
        let s = Field::from_fn(p, f64::sin).unwrap();
        assert!((sample(&s, PI / 7.0) - (PI / 7.0).sin()).abs() < 1e-8);
        // wraps
        assert!((sample(&s, PI / 7.0 + 2.0 * PI) - (PI / 7.0).sin()).abs() < 1e-8);
    }

    #[test]
    fn sample_slope_tracks_derivative() {
        let p = periodic_2pi(512);
        let s = Field::from_fn(p, f64::sin).unwrap();
        let x = 1.234;
        assert!((sample_slope(&s, x) - x.cos()).abs() < 1e-5);
    }

    #[test]
    fn boundary_excess_detects_large_ends() {
        let g = Grid::decaying(-5.0, 5.0, 101).unwrap();
        let wide = Field::from_fn(g, |x| (-x.abs() * 0.1).exp()).unwrap();
        assert!(wide.boundary_excess().is_some());
        let narrow = Field::from_fn(g, |x| (-x * x).exp()).unwrap();
        assert!(narrow.boundary_excess().is_none());
    }

    #[test]
    fn mollify_preserves_mass_and_smooths() {
        let g = Grid::periodic(-20.0, 20.0, 1024).unwrap();
        let peak = Field::from_fn(g, |x| (-x.abs()).exp()).unwrap();
        let smooth = mollify(&peak, 3.0 * g.dx());
        assert!((quadrature(&smooth) - quadrature(&peak)).abs() < 1e-10);
        assert!(smooth.max() < peak.max());
    }
}
