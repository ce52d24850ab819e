//! Central finite differences on ambient coordinates.

use nalgebra::Matrix4;

use super::domain::Point;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdOrder {
    Second,
    Fourth,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    pub step: f64,
    pub order: FdOrder,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            order: FdOrder::Second,
        }
    }
}

impl FdConfig {
    pub fn fourth(step: f64) -> Self {
        Self {
            step,
            order: FdOrder::Fourth,
        }
    }
}

/// Derivative of a vector-valued function of one variable. `diff(a, b)` computes `a - b`
/// in the target (so periodic components can be unwrapped).
pub fn derivative_vec<F, D>(f: F, x: f64, cfg: &FdConfig, diff: D) -> Result<Point>
where
    F: Fn(f64) -> Result<Point>,
    D: Fn(&Point, &Point) -> Point,
{
    let h = cfg.step;
    match cfg.order {
        FdOrder::Second => {
            let fp = f(x + h)?;
            let fm = f(x - h)?;
            Ok(diff(&fp, &fm) / (2.0 * h))
        }
        FdOrder::Fourth => {
            let f1 = f(x + h)?;
            let fm1 = f(x - h)?;
            let f2 = f(x + 2.0 * h)?;
            let fm2 = f(x - 2.0 * h)?;
            Ok((diff(&f1, &fm1) * 8.0 - diff(&f2, &fm2)) / (12.0 * h))
        }
    }
}

pub fn derivative<F>(f: F, x: f64, cfg: &FdConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = cfg.step;
    match cfg.order {
        FdOrder::Second => Ok((f(x + h)? - f(x - h)?) / (2.0 * h)),
        FdOrder::Fourth => {
            Ok((8.0 * (f(x + h)? - f(x - h)?) - (f(x + 2.0 * h)? - f(x - 2.0 * h)?)) / (12.0 * h))
        }
    }
}

/// Ambient gradient of a scalar function over the first `dim` coordinates.
pub fn gradient<F>(f: F, p: &Point, dim: usize, cfg: &FdConfig) -> Result<Point>
where
    F: Fn(&Point) -> Result<f64>,
{
    let mut g = Point::zeros();
    for (i, gi) in g.iter_mut().enumerate().take(dim) {
        *gi = derivative(
            |s| {
                let mut q = *p;
                q[i] += s;
                f(&q)
            },
            0.0,
            cfg,
        )?;
    }
    Ok(g)
}

/// Ambient Jacobian; column `j` is the derivative along source coordinate `j`.
pub fn jacobian<F, D>(f: F, p: &Point, dim: usize, cfg: &FdConfig, diff: D) -> Result<Matrix4<f64>>
where
    F: Fn(&Point) -> Result<Point>,
    D: Fn(&Point, &Point) -> Point,
{
    let mut jac = Matrix4::zeros();
    for j in 0..dim {
        let col = derivative_vec(
            |s| {
                let mut q = *p;
                q[j] += s;
                f(&q)
            },
            0.0,
            cfg,
            &diff,
        )?;
        jac.set_column(j, &col);
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_beats_second_order() {
        let f = |x: f64| Ok(x.sin() * x.exp());
        let exact = 1.0f64.cos() * 1.0f64.exp() + 1.0f64.sin() * 1.0f64.exp();
        let c2 = FdConfig {
            step: 1e-3,
            order: FdOrder::Second,
        };
        let c4 = FdConfig::fourth(1e-3);
        let e2 = (derivative(f, 1.0, &c2).unwrap() - exact).abs();
        let e4 = (derivative(f, 1.0, &c4).unwrap() - exact).abs();
        assert!(e4 < e2 * 1e-3, "{e2} {e4}");
    }

    #[test]
    fn gradient_of_quadratic() {
        let p = Point::new(0.3, -0.2, 0.7, 0.0);
        let g = gradient(|q| Ok(q[0] * q[0] + 3.0 * q[1] * q[2]), &p, 3, &FdConfig::default()).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-9);
        assert!((g[1] - 2.1).abs() < 1e-9);
        assert!((g[2] + 0.6).abs() < 1e-9);
        assert_eq!(g[3], 0.0);
    }
}
