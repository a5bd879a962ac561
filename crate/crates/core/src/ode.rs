//! Classical RK4 for the small ODE systems of the peakon and kink modules.

use crate::error::Result;

/// Number of equal steps covering `t_end` with step at most `dt`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> usize {
    ((t_end / dt - 1e-9).ceil() as usize).max(1)
}

pub(crate) fn rk4_step<F>(y: &[f64], h: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let shifted = |base: &[f64], k: &[f64], a: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(y, k)| y + a * k).collect()
    };
    let k1 = f(y)?;
    let k2 = f(&shifted(y, &k1, 0.5 * h))?;
    let k3 = f(&shifted(y, &k2, 0.5 * h))?;
    let k4 = f(&shifted(y, &k3, h))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let n = step_count(1.0, 0.01);
        assert_eq!(n, 100);
        let h = 1.0 / n as f64;
        let mut y = vec![1.0];
        for _ in 0..n {
            y = rk4_step(&y, h, |y| Ok(vec![y[0]])).unwrap();
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn step_count_rounds_up() {
        assert_eq!(step_count(1.0, 0.3), 4);
        assert_eq!(step_count(0.3, 0.1), 3);
        assert_eq!(step_count(0.05, 0.1), 1);
    }
}
