use std::f64::consts::{SQRT_2, TAU};
use std::sync::Arc;

use nalgebra::Matrix4;
use serde::Serialize;

use super::cutoff::CutoffProfile;
use crate::contact::{verify_contact_field, verify_labeled, ContactForm};
use crate::error::{Error, Result};
use crate::fieldcalc::sweep::par_map;
use crate::fieldcalc::{
    integrate_flow, proportionality, CoordKind, DiffMap, Domain, FlowConfig, Grid, GridSpec, OneForm, Point,
    VectorField,
};
use crate::loopalg::map_log_factor;

/// RK4 steps used for the time-`tau` flow.
pub const PSI_STEPS: usize = 64;

/// Default chart radius.
pub const DEFAULT_EPS: f64 = 0.4;

/// Explicit chart `(s, a, b)` around `gamma` near the south pole of `S^1 x S^2` in which
/// `alpha_st = h (ds + a db)` with `h = -z`.
#[derive(Clone, Copy, Debug)]
pub struct SouthChart {
    /// Points with chart radius at or beyond this value are not mapped.
    pub reach: f64,
}

impl SouthChart {
    /// Chart coordinates of `p`, or `None` outside `{|(a, b)| < reach}`.
    pub fn to_chart(&self, p: &Point) -> Option<Point> {
        let u = p[1] * p[1] + p[2] * p[2];
        if p[3] >= 0.0 || u >= 0.5 {
            return None;
        }
        let k = (1.0 - u).powf(-0.25) * SQRT_2;
        let (a, b) = (k * p[1], k * p[2]);
        if a * a + b * b >= self.reach * self.reach {
            return None;
        }
        let s = (-p[0] - 0.5 * a * b).rem_euclid(TAU);
        Some(Point::new(s, a, b, 0.0))
    }

    /// Point of the unit sphere bundle with chart coordinates `q`.
    pub fn from_chart(&self, q: &Point) -> Point {
        let (a, b) = (q[1], q[2]);
        let (x, y) = (a / SQRT_2, b / SQRT_2);
        let r2 = x * x + y * y;
        let u = r2 * ((r2 * r2 + 4.0).sqrt() - r2) / 2.0;
        let f = (1.0 - u).powf(0.25);
        let theta = (-(q[0] + 0.5 * a * b)).rem_euclid(TAU);
        Point::new(theta, f * x, f * y, -(1.0 - u).sqrt())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DisplacementReport {
    pub eps: f64,
    pub tau: f64,
    pub profile: CutoffProfile,
    /// Kernel-pullback residual of the explicit chart.
    pub chart_residual: f64,
    /// Residual of `L_X (ds + a db) ∝ ds + a db` for the generating field.
    pub field_residual: f64,
    /// Relative proportionality residual of `psi^* alpha_st` against `alpha_st`.
    pub conformal_residual: f64,
    /// Largest gap between the analytic and numerically recovered conformal factors.
    pub factor_mismatch: f64,
    /// `min dist(gamma, psi(gamma))` over sampled parameter pairs.
    pub min_displacement: f64,
    /// `b`-coordinate of `psi(gamma(0))` in the chart.
    pub core_offset: f64,
}

/// `psi` together with the checks performed on it.
#[derive(Clone, Debug)]
pub struct Displacement {
    pub map: DiffMap,
    pub report: DisplacementReport,
    pub chart: SouthChart,
}

fn model_form(eps: f64) -> Result<ContactForm> {
    let d = Arc::new(Domain::chart(
        "psi-chart",
        ["s", "a", "b"],
        [
            CoordKind::Periodic,
            CoordKind::Interval { lo: -eps, hi: eps },
            CoordKind::Interval { lo: -eps, hi: eps },
        ],
    )?);
    let w = OneForm::new(d.clone(), |p| Point::new(1.0, 0.0, p[1], 0.0)).with_partials(|_| {
        let mut m = Matrix4::zeros();
        m[(2, 1)] = 1.0;
        m
    });
    verify_labeled("ds+a db", &w, &Grid::from_spec(&d, &GridSpec::uniform(8)))
}

/// Contact field of `profile(|(a,b)|) a` for `ds + a db`.
fn cutoff_field(dom: Arc<Domain>, c: CutoffProfile) -> VectorField {
    VectorField::autonomous(dom, move |p| {
        let (a, b) = (p[1], p[2]);
        let r = (a * a + b * b).sqrt();
        let (chi, d) = c.value_and_derivative(r);
        let dq = if r > 0.0 { d / r } else { 0.0 };
        Point::new(-dq * a * a * a, -dq * a * b, chi + dq * a * a, 0.0)
    })
}

fn flow_map(
    chart: SouthChart,
    field: &VectorField,
    cfg: &FlowConfig,
    eps: f64,
    p: &Point,
    time: f64,
) -> Result<Point> {
    let Some(q) = chart.to_chart(p) else {
        return Ok(*p);
    };
    let end = integrate_flow(field, &q, 0.0, time, cfg).map_err(|e| match e {
        Error::Escape { time } => Error::TimeTooLarge { reached: time.abs() },
        other => other,
    })?;
    if end[1].hypot(end[2]) >= eps {
        return Err(Error::TimeTooLarge { reached: time.abs() });
    }
    let mut out = chart.from_chart(&end);
    let z0 = -(1.0 - p[1] * p[1] - p[2] * p[2]).sqrt();
    out[3] += p[3] - z0;
    Ok(out)
}

/// Time-`tau` flow of the cutoff translation `profile(r) a` in the chart around `gamma`,
/// extended by the identity. The conformal factor is `ln(z(psi p) / z(p))`.
pub fn displacement_psi(alpha: &ContactForm, eps: f64, tau: f64, profile: CutoffProfile) -> Result<Displacement> {
    if !(eps > 0.0 && eps < 0.6) {
        return Err(Error::Usage(format!("chart radius {eps} must lie in (0, 0.6)")));
    }
    if !(tau > 0.0) {
        return Err(Error::Usage(format!("displacement time {tau} must be positive")));
    }
    if profile.outer >= eps {
        return Err(Error::Usage(format!(
            "cutoff support {} must lie inside the chart radius {eps}",
            profile.outer
        )));
    }
    let dom = alpha.domain().clone();
    let chart = SouthChart { reach: profile.outer };
    let beta0 = model_form(eps)?;
    let field = cutoff_field(beta0.domain().clone(), profile);
    let steps = ((PSI_STEPS as f64) * TAU / tau).ceil() as usize;
    let cfg = FlowConfig {
        steps_per_period: steps,
        project: false,
        ..FlowConfig::default()
    };

    // every point of the support must stay inside the chart up to time tau
    let probe = Grid::from_spec(&dom, &GridSpec::new([8, 24, 24], crate::fieldcalc::ParamBox::new([0.0, 0.8, 0.0], [1.0; 3])));
    par_map(probe.points(), |p| flow_map(chart, &field, &cfg, eps, p, tau).map(|_| ()))?;

    let (f1, f2) = (field.clone(), field.clone());
    let mut focus: Vec<Point> = (0..4).map(|j| chart.from_chart(&Point::new(j as f64 * 1.3, 0.0, 0.0, 0.0))).collect();
    focus.extend((0..4).map(|j| chart.from_chart(&Point::new(0.4 + j as f64, 0.3 * profile.outer, 0.5 * profile.outer, 0.0))));
    let map = DiffMap::new("psi", dom.clone(), dom.clone(), move |p| flow_map(chart, &f1, &cfg, eps, p, tau))
        .with_inverse(move |q| flow_map(chart, &f2, &cfg, eps, q, -tau))
        .with_focus(focus.clone());
    let map = map.with_image_log_factor(move |p, q| {
        if chart.to_chart(p).is_none() {
            return Ok(0.0);
        }
        let u0 = p[1] * p[1] + p[2] * p[2];
        let u1 = q[1] * q[1] + q[2] * q[2];
        Ok(0.5 * ((1.0 - u1) / (1.0 - u0)).ln())
    });

    // chart check: g^* alpha_st = h (ds + a db)
    let chart_dom = beta0.domain().clone();
    let g = DiffMap::new("south-chart", chart_dom.clone(), dom.clone(), move |q| Ok(chart.from_chart(q)));
    let cgrid = Grid::from_spec(&chart_dom, &GridSpec::uniform(10));
    let cpts: Vec<Point> = cgrid
        .points()
        .iter()
        .filter(|q| q[1].hypot(q[2]) < 0.95 * profile.outer)
        .copied()
        .collect();
    let chart_res = par_map(&cpts, |q| {
        let x = g.apply_raw(q)?;
        let pb = g.jacobian_raw(q)?.transpose() * alpha.form().eval_raw(&x, 0.0)?;
        let b = beta0.form().eval_raw(q, 0.0)?;
        let (h, r) = proportionality(&b, &pb, &chart_dom.tangent_frame(q));
        Ok(r / h.abs().max(f64::MIN_POSITIVE) + (h + x[3]).abs())
    })?
    .into_iter()
    .fold(0.0, f64::max);

    let fcheck = verify_contact_field(&beta0, &field, &Grid::from_spec(beta0.domain(), &GridSpec::uniform(12)), 0.0)?;

    let mut probes: Vec<Point> = focus.clone();
    probes.extend(
        Grid::from_spec(&dom, &GridSpec::new([6, 8, 8], crate::fieldcalc::ParamBox::new([0.0, 0.85, 0.0], [1.0; 3])))
            .points()
            .iter()
            .copied(),
    );
    let lf = map.analytic_log_factor().unwrap().clone();
    let conf = par_map(&probes, |p| {
        let (g, r) = map_log_factor(alpha, &map, p)?;
        Ok((r, (g - lf(p)?).abs()))
    })?;
    let conformal_residual = conf.iter().map(|c| c.0).fold(0.0, f64::max);
    let factor_mismatch = conf.iter().map(|c| c.1).fold(0.0, f64::max);

    let n = 256;
    let knot: Vec<Point> = (0..n).map(|j| Point::new(-(TAU * j as f64 / n as f64), 0.0, 0.0, -1.0)).collect();
    let moved = par_map(&knot, |p| map.apply(p))?;
    let mut min_d = f64::INFINITY;
    for a in &knot {
        for b in &moved {
            min_d = min_d.min(dom.distance(a, b));
        }
    }
    let core_offset = chart.to_chart(&moved[0]).map(|q| q[2]).unwrap_or(f64::NAN);
    if !(min_d > 0.0) {
        return Err(Error::Usage(format!("psi does not displace gamma (min distance {min_d:.3e})")));
    }

    Ok(Displacement {
        map,
        report: DisplacementReport {
            eps,
            tau,
            profile,
            chart_residual: chart_res,
            field_residual: fcheck.report.max_residual,
            conformal_residual,
            factor_mismatch,
            min_displacement: min_d,
            core_offset,
        },
        chart,
    })
}

/// `displacement_psi` with `tau = eps / 4` and the default cutoff radii.
pub fn default_displacement(alpha: &ContactForm) -> Result<Displacement> {
    displacement_psi(alpha, DEFAULT_EPS, DEFAULT_EPS / 4.0, CutoffProfile::for_radius(DEFAULT_EPS)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::manifolds::model_s1s2;

    #[test]
    fn chart_round_trip() {
        let c = SouthChart { reach: 0.3 };
        for q in [Point::new(0.3, 0.1, -0.2, 0.0), Point::new(5.9, -0.25, 0.01, 0.0)] {
            let p = c.from_chart(&q);
            assert!((p.norm_squared() - p[0] * p[0] - 1.0).abs() < 1e-14);
            let back = c.to_chart(&p).unwrap();
            assert!((back - q).norm() < 1e-12, "{back:?}");
        }
    }

    #[test]
    fn psi_displaces_gamma() {
        let m = model_s1s2().unwrap();
        let d = default_displacement(m.alpha()).unwrap();
        let r = &d.report;
        assert!(r.chart_residual < 1e-6, "{r:?}");
        assert!(r.conformal_residual < 1e-6, "{r:?}");
        assert!(r.factor_mismatch < 1e-6, "{r:?}");
        assert!(r.min_displacement > r.tau / 2.0, "{r:?}");
        assert!((r.core_offset - r.tau).abs() < 1e-9, "{r:?}");
        assert!(r.field_residual < 1e-6, "{r:?}");
        let far = Point::new(1.0, 0.6, 0.0, -0.8);
        assert_eq!(d.map.apply(&far).unwrap(), far);
        let p = Point::new(0.7, 0.05, -0.02, -(1.0f64 - 0.0029).sqrt());
        let back = d.map.apply_inverse(&d.map.apply(&p).unwrap()).unwrap();
        assert!(m.domain().distance(&back, &p) < 1e-10);
    }

    #[test]
    fn support_must_fit_chart() {
        let m = model_s1s2().unwrap();
        let c = CutoffProfile::new(0.1, 0.5).unwrap();
        assert!(displacement_psi(m.alpha(), 0.4, 0.1, c).is_err());
    }
}
