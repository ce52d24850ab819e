//! Fixed-step and step-doubling RK4 for time-dependent vector fields.

use std::f64::consts::TAU;

use super::domain::{Domain, Point};
use super::fields::VectorField;
use crate::error::{Error, Result};

pub const DEFAULT_STEPS_PER_PERIOD: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub tolerance: f64,
    pub min_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    /// Fixed step is `2pi / steps_per_period`; a final partial step lands exactly on `t1`.
    pub steps_per_period: usize,
    pub adaptive: Option<AdaptiveConfig>,
    /// Re-project onto the level set after every step.
    pub project: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            adaptive: None,
            project: true,
        }
    }
}

impl FlowConfig {
    pub fn with_steps(steps_per_period: usize) -> Self {
        Self {
            steps_per_period,
            ..Self::default()
        }
    }

    pub fn adaptive(tolerance: f64, min_step: f64) -> Self {
        Self {
            adaptive: Some(AdaptiveConfig { tolerance, min_step }),
            ..Self::default()
        }
    }
}

/// Right-hand side of an augmented system `x' = X(x, t)`, `y' = rate(x, t)`.
pub trait FlowRhs: Sync {
    fn domain(&self) -> &Domain;
    fn velocity(&self, p: &Point, t: f64) -> Result<Point>;
    fn rate(&self, _p: &Point, _t: f64) -> Result<f64> {
        Ok(0.0)
    }
}

struct Plain<'a>(&'a VectorField);

impl FlowRhs for Plain<'_> {
    fn domain(&self) -> &Domain {
        self.0.domain()
    }
    fn velocity(&self, p: &Point, t: f64) -> Result<Point> {
        self.0.eval_raw(p, t)
    }
}

/// Vector field with an extra scalar channel, e.g. a conformal factor rate.
pub struct Augmented<'a, R>
where
    R: Fn(&Point, f64) -> Result<f64> + Sync,
{
    pub field: &'a VectorField,
    pub rate: R,
}

impl<R> FlowRhs for Augmented<'_, R>
where
    R: Fn(&Point, f64) -> Result<f64> + Sync,
{
    fn domain(&self) -> &Domain {
        self.field.domain()
    }
    fn velocity(&self, p: &Point, t: f64) -> Result<Point> {
        self.field.eval_raw(p, t)
    }
    fn rate(&self, p: &Point, t: f64) -> Result<f64> {
        (self.rate)(p, t)
    }
}

/// Flow of `X` from time `t0` to `t1` starting at `p`.
pub fn integrate_flow(x: &VectorField, p: &Point, t0: f64, t1: f64, cfg: &FlowConfig) -> Result<Point> {
    Ok(integrate(&Plain(x), p, t0, t1, cfg)?.0)
}

/// Flow together with the integral of the augmented channel along the trajectory.
pub fn integrate(rhs: &dyn FlowRhs, p: &Point, t0: f64, t1: f64, cfg: &FlowConfig) -> Result<(Point, f64)> {
    let dom = rhs.domain();
    let start = dom.check(p)?;
    match cfg.adaptive {
        None => fixed(rhs, start, t0, t1, cfg),
        Some(a) => adaptive(rhs, start, t0, t1, cfg.project, &a),
    }
}

fn rk4(rhs: &dyn FlowRhs, x: &Point, t: f64, h: f64) -> Result<(Point, f64)> {
    let k1 = rhs.velocity(x, t)?;
    let r1 = rhs.rate(x, t)?;
    let x2 = x + k1 * (h / 2.0);
    let k2 = rhs.velocity(&x2, t + h / 2.0)?;
    let r2 = rhs.rate(&x2, t + h / 2.0)?;
    let x3 = x + k2 * (h / 2.0);
    let k3 = rhs.velocity(&x3, t + h / 2.0)?;
    let r3 = rhs.rate(&x3, t + h / 2.0)?;
    let x4 = x + k3 * h;
    let k4 = rhs.velocity(&x4, t + h)?;
    let r4 = rhs.rate(&x4, t + h)?;
    Ok((
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0),
        (r1 + 2.0 * r2 + 2.0 * r3 + r4) * (h / 6.0),
    ))
}

fn settle(dom: &Domain, x: &Point, project: bool, time: f64) -> Result<Point> {
    let y = if project { dom.project(x) } else { dom.reduce(x) };
    dom.check(&y).map_err(|_| Error::Escape { time })
}

fn fixed(rhs: &dyn FlowRhs, start: Point, t0: f64, t1: f64, cfg: &FlowConfig) -> Result<(Point, f64)> {
    let dom = rhs.domain();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((start, 0.0));
    }
    let h0 = TAU / cfg.steps_per_period.max(1) as f64;
    let full = (span.abs() / h0).floor() as usize;
    let rest = span.abs() - full as f64 * h0;
    let sign = span.signum();
    let (mut x, mut y, mut t) = (start, 0.0, t0);
    for i in 0..=full {
        let h = if i < full { h0 } else { rest };
        if h <= 0.0 {
            break;
        }
        let (nx, dy) = rk4(rhs, &x, t, sign * h)?;
        t = t0 + sign * (if i < full { (i + 1) as f64 * h0 } else { span.abs() });
        x = settle(dom, &nx, cfg.project, t)?;
        y += dy;
    }
    Ok((x, y))
}

fn adaptive(
    rhs: &dyn FlowRhs,
    start: Point,
    t0: f64,
    t1: f64,
    project: bool,
    cfg: &AdaptiveConfig,
) -> Result<(Point, f64)> {
    let dom = rhs.domain();
    let span = t1 - t0;
    let sign = span.signum();
    let (mut x, mut y, mut t) = (start, 0.0, t0);
    let mut h = (span.abs() / 64.0).max(cfg.min_step);
    while (t1 - t) * sign > 0.0 {
        h = h.min((t1 - t).abs());
        let (big, dbig) = rk4(rhs, &x, t, sign * h)?;
        let (mid, dm) = rk4(rhs, &x, t, sign * h / 2.0)?;
        let (small, ds) = rk4(rhs, &mid, t + sign * h / 2.0, sign * h / 2.0)?;
        let err = (dom.difference(&small, &big).norm() + (dm + ds - dbig).abs()) / 15.0;
        if err <= cfg.tolerance {
            t += sign * h;
            // Richardson extrapolation of the two estimates
            let corr = dom.difference(&small, &big) / 15.0;
            x = settle(dom, &(small + corr), project, t)?;
            y += dm + ds + (dm + ds - dbig) / 15.0;
            let grow = if err == 0.0 { 2.0 } else { (0.9 * (cfg.tolerance / err).powf(0.2)).min(2.0) };
            h *= grow;
        } else {
            h *= (0.9 * (cfg.tolerance / err).powf(0.2)).max(0.2);
            if h < cfg.min_step {
                return Err(Error::Stiffness { time: t, step: h });
            }
        }
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldcalc::domain::CoordKind;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn plane() -> Arc<Domain> {
        Arc::new(
            Domain::chart(
                "p",
                ["theta", "x", "y"],
                [
                    CoordKind::Periodic,
                    CoordKind::Interval { lo: -2.0, hi: 2.0 },
                    CoordKind::Interval { lo: -2.0, hi: 2.0 },
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn theta_flow_closes() {
        let d = plane();
        let x = VectorField::coordinate(d.clone(), 0);
        let p = Point::new(0.4, 0.1, 0.2, 0.0);
        let q = integrate_flow(&x, &p, 0.0, TAU, &FlowConfig::default()).unwrap();
        assert!(d.distance(&p, &q) < 1e-9);
    }

    #[test]
    fn rotation_by_pi() {
        let d = plane();
        let x = VectorField::autonomous(d, |p| Point::new(0.0, -p[2], p[1], 0.0));
        let p = Point::new(0.0, 0.6, -0.3, 0.0);
        let q = integrate_flow(&x, &p, 0.0, PI, &FlowConfig::default()).unwrap();
        assert!((q - Point::new(0.0, -0.6, 0.3, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn escape_reports_time() {
        let d = plane();
        let x = VectorField::coordinate(d, 1);
        let err = integrate_flow(&x, &Point::new(0.0, 0.0, 0.0, 0.0), 0.0, 5.0, &FlowConfig::default()).unwrap_err();
        match err {
            Error::Escape { time } => assert!((time - 2.0).abs() < 0.01),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn backward_flow_inverts_forward() {
        let d = plane();
        let x = VectorField::time_dependent(d, |p, t| Point::new(1.0, -p[2] * t.cos(), p[1] * t.cos(), 0.0));
        let p = Point::new(1.0, 0.5, 0.2, 0.0);
        let cfg = FlowConfig::default();
        let q = integrate_flow(&x, &p, 0.3, 2.1, &cfg).unwrap();
        let back = integrate_flow(&x, &q, 2.1, 0.3, &cfg).unwrap();
        assert!((back - p).norm() < 1e-10);
    }

    #[test]
    fn adaptive_matches_fixed_and_detects_stiffness() {
        let d = plane();
        let x = VectorField::autonomous(d.clone(), |p| Point::new(1.0, -p[2], p[1], 0.0));
        let p = Point::new(0.0, 0.5, 0.0, 0.0);
        let a = integrate_flow(&x, &p, 0.0, 1.0, &FlowConfig::adaptive(1e-12, 1e-8)).unwrap();
        let f = integrate_flow(&x, &p, 0.0, 1.0, &FlowConfig::default()).unwrap();
        assert!((a - f).norm() < 1e-9);
        let blow = VectorField::autonomous(d, |p| Point::new(0.0, 1.0 / (1.0 - p[1]).powi(6), 0.0, 0.0));
        let err = integrate_flow(&blow, &Point::zeros(), 0.0, 1.0, &FlowConfig::adaptive(1e-10, 1e-9));
        assert!(matches!(err, Err(Error::Stiffness { .. }) | Err(Error::Escape { .. })));
    }
}
