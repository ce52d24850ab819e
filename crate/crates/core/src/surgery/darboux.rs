use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::Serialize;

use crate::contact::{reeb_field, rescale_form, ContactForm};
use crate::error::{coords, Error, Result};
use crate::fieldcalc::flow::{integrate_flow, FlowConfig};
use crate::fieldcalc::sweep::par_map;
use crate::fieldcalc::{time_nodes, CoordKind, DiffMap, Domain, FdConfig, Grid, GridSpec, Point, VectorField};
use crate::loopalg::{check_local_autonomy, AutonomyConfig, AutonomyReport, ContactLoop};
use crate::models::model_solid_torus;

use super::slice::SliceChart;

pub const DEFAULT_STRICT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_FIELD_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DarbouxConfig {
    pub tolerance: f64,
    pub grid: usize,
    /// Half-width of the time interval of the chart.
    pub eps: f64,
    /// Slice reach used when the chart radius is left to the routine.
    pub reach: f64,
    pub steps_per_period: usize,
}

impl Default for DarbouxConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_STRICT_TOLERANCE,
            grid: 8,
            eps: 0.1,
            reach: 0.1,
            steps_per_period: 4096,
        }
    }
}

/// `max |f^* eta - alpha_0|` over a grid of the source.
#[derive(Clone, Debug, Serialize)]
pub struct StrictnessReport {
    pub grid: String,
    pub nodes: usize,
    pub max_residual: f64,
    pub worst: Vec<f64>,
}

/// `f: ((-eps, eps) x D^2(rho_out), alpha_0) -> (M, alpha)` with `f^* alpha = alpha_0`.
#[derive(Clone, Debug)]
pub struct StrictChart {
    pub map: DiffMap,
    pub rho_out: f64,
    pub eps: f64,
    pub reach: f64,
    pub report: StrictnessReport,
}

fn alpha0(p: &Point) -> Point {
    Point::new(1.0, -p[2], p[1], 0.0)
}

/// Strictness residual of `map` against `alpha_0` on the source grid.
pub fn strictness_residual(map: &DiffMap, eta: &ContactForm, grid: &Grid) -> Result<StrictnessReport> {
    let rows = par_map(grid.points(), |p| {
        let y = map.apply_raw(p)?;
        let pb = map.jacobian_raw(p)?.transpose() * eta.form().eval_raw(&y, 0.0)?;
        Ok((0..3).map(|i| (pb[i] - alpha0(p)[i]).abs()).fold(0.0, f64::max))
    })?;
    let (i, m) = crate::fieldcalc::sweep::argmax(&rows).unwrap_or((0, 0.0));
    Ok(StrictnessReport {
        grid: grid.label().to_string(),
        nodes: grid.len(),
        max_residual: m,
        worst: grid.points().get(i).map(coords).unwrap_or_default(),
    })
}

fn disk_chart(name: &str, t: CoordKind, rho: f64) -> Result<Arc<Domain>> {
    let r2 = rho * rho;
    Ok(Arc::new(
        Domain::chart(
            name,
            ["theta", "x", "y"],
            [t, CoordKind::Interval { lo: -rho, hi: rho }, CoordKind::Interval { lo: -rho, hi: rho }],
        )?
        .with_region(move |p| p[1] * p[1] + p[2] * p[2] - r2),
    ))
}

/// Strict Darboux chart around `p`: `f(theta, X) = Reeb_{theta - S(X)}(sigma(X))` with
/// `sigma` the area-normalized slice through `p`. With `rho_out = None` the radius is half
/// the largest radius the slice reaches.
pub fn strict_darboux_chart(alpha: &ContactForm, p: &Point, rho_out: Option<f64>) -> Result<StrictChart> {
    strict_darboux_chart_with(alpha, p, rho_out, &DarbouxConfig::default())
}

pub fn strict_darboux_chart_with(
    alpha: &ContactForm,
    p: &Point,
    rho_out: Option<f64>,
    cfg: &DarbouxConfig,
) -> Result<StrictChart> {
    let mut reach = match rho_out {
        Some(r) if r > 0.0 => 2.0 * r,
        Some(r) => return Err(Error::Usage(format!("chart radius must be positive, got {r}"))),
        None => cfg.reach,
    };
    let mut slice = SliceChart::build(alpha, p, reach)?;
    let rho = match rho_out {
        None => 0.5 * slice.area_radius(),
        Some(r) => {
            let mut tries = 0;
            while slice.area_radius() < 1.25 * r {
                tries += 1;
                if tries > 8 {
                    return Err(Error::NoChart {
                        best_residual: f64::INFINITY,
                    });
                }
                reach *= 2.0;
                slice = SliceChart::build(alpha, p, reach)?;
            }
            r
        }
    };
    let src = disk_chart("darboux", CoordKind::Interval { lo: -cfg.eps, hi: cfg.eps }, rho)?;
    let reeb = reeb_field(alpha);
    let flow = FlowConfig::with_steps(cfg.steps_per_period);
    let s2 = slice.clone();
    let map = DiffMap::new("darboux", src.clone(), alpha.domain().clone(), move |q| {
        let (sig, s) = s2.sigma(q[1], q[2])?;
        integrate_flow(&reeb, &sig, 0.0, q[0] - s, &flow)
    })
    .with_fd(FdConfig::fourth(1e-4 * rho.min(cfg.eps)));
    let report = strictness_residual(&map, alpha, &Grid::from_spec(&src, &GridSpec::uniform(cfg.grid)))?;
    if !(report.max_residual < cfg.tolerance) {
        return Err(Error::NoChart {
            best_residual: report.max_residual,
        });
    }
    Ok(StrictChart {
        map,
        rho_out: rho,
        eps: cfg.eps,
        reach,
        report,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TubeConfig {
    /// Radius of the slice disk; also the autonomy test radius.
    pub slice_reach: f64,
    pub grid: usize,
    pub times: usize,
    pub strict_tolerance: f64,
    pub field_tolerance: f64,
    pub core_samples: usize,
    pub autonomy: AutonomyConfig,
}

impl Default for TubeConfig {
    fn default() -> Self {
        Self {
            slice_reach: 0.1,
            grid: 12,
            times: 3,
            strict_tolerance: DEFAULT_STRICT_TOLERANCE,
            field_tolerance: DEFAULT_FIELD_TOLERANCE,
            core_samples: 256,
            autonomy: AutonomyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TubeReport {
    pub loop_label: String,
    pub center: Vec<f64>,
    pub radius: f64,
    pub slice_reach: f64,
    /// `F_0` at the center.
    pub f0_center: f64,
    pub strictness: StrictnessReport,
    pub field_nodes: usize,
    pub field_times: usize,
    /// `max |alpha_0(psi^* X_t) - 1|`.
    pub max_ham_deviation: f64,
    /// `max |psi^* X_t - d_theta|`.
    pub max_field_mismatch: f64,
    pub worst: Vec<f64>,
    pub field_tolerance: f64,
    pub autonomy: AutonomyReport,
    pub passes: bool,
}

/// `psi: S^1 x D^2(rho) -> M` with `psi^* (alpha / F_0) = alpha_0` and `psi^* X_t = d_theta`.
#[derive(Clone, Debug)]
pub struct NormalFormTube {
    pub map: DiffMap,
    pub eta: ContactForm,
    pub report: TubeReport,
}

impl NormalFormTube {
    pub fn radius(&self) -> f64 {
        self.report.radius
    }
}

/// Components of `v` in the basis `J e_0, J e_1, J e_2` (least squares on the tangent frame).
pub(crate) fn pull_vector(dom: &Domain, y: &Point, j: &Matrix4<f64>, v: &Point) -> Option<Vector3<f64>> {
    let frame = dom.tangent_frame(y);
    let mut m = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for i in 0..3 {
        b[i] = frame[i].dot(v);
        for k in 0..3 {
            m[(i, k)] = frame[i].dot(&j.column(k).into_owned());
        }
    }
    m.lu().solve(&b)
}

pub fn normal_form_tube(l: &ContactLoop, p: &Point) -> Result<NormalFormTube> {
    normal_form_tube_with(l, p, &TubeConfig::default())
}

/// `psi(theta, X) = phi_{theta - S(X)}(sigma(X))` for the area-normalized slice of `eta = alpha / F_0`,
/// i.e. `phi_theta(f(Psi_{-theta}(theta, X)))` with `f` the strict chart at time 0.
pub fn normal_form_tube_with(l: &ContactLoop, p: &Point, cfg: &TubeConfig) -> Result<NormalFormTube> {
    let dom = l.domain().clone();
    let center = dom.check(p)?;
    let autonomy = check_local_autonomy(l, &center, cfg.slice_reach, &cfg.autonomy)?;
    if !autonomy.locally_autonomous {
        return Err(Error::Usage(format!(
            "loop `{}` is not locally autonomous at {:?} (variation {:.3e}, orbit separation {:.3e})",
            l.label(),
            coords(&center),
            autonomy.max_variation,
            autonomy.orbit_self_distance
        )));
    }
    let f0 = l.hamiltonian().at_time(0.0);
    let local = Grid::ball(&dom, &center, 2.0 * cfg.slice_reach, 64, 5);
    let eta = rescale_form(l.alpha(), &f0, &local)?;
    let slice = Arc::new(SliceChart::build(&eta, &center, cfg.slice_reach)?);
    let radius = 0.5 * slice.area_radius();
    let torus = model_solid_torus(radius)?;
    let src = torus.domain().clone();

    let (lf, sf) = (l.clone(), slice.clone());
    let forward = move |q: &Point| -> Result<Point> {
        let (sig, s) = sf.sigma(q[1], q[2])?;
        lf.flow(&sig, q[0] - s)
    };
    let n = cfg.core_samples.max(8);
    let core = (0..n)
        .map(|j| forward(&Point::new(TAU * j as f64 / n as f64, 0.0, 0.0, 0.0)))
        .collect::<Result<Vec<Point>>>()?;
    let (lf, sf, d2) = (l.clone(), slice.clone(), dom.clone());
    let seed = move |w: &Point| -> Result<Point> {
        let j = (0..core.len())
            .min_by(|&a, &b| d2.distance(w, &core[a]).partial_cmp(&d2.distance(w, &core[b])).unwrap())
            .unwrap();
        // flow time at which the orbit of w crosses the slice
        let off = |t: f64| -> Result<f64> { Ok(sf.normal_offset(&lf.inverse(w, t)?)) };
        let (mut t0, mut t1) = (TAU * j as f64 / core.len() as f64, TAU * (j as f64 + 0.5) / core.len() as f64);
        let (mut g0, mut g1) = (off(t0)?, off(t1)?);
        for _ in 0..30 {
            if g1 == g0 || g1.abs() < 1e-15 {
                break;
            }
            let t2 = t1 - g1 * (t1 - t0) / (g1 - g0);
            (t0, g0) = (t1, g1);
            t1 = t2;
            g1 = off(t1)?;
        }
        let y = lf.inverse(w, t1)?;
        let (x1, x2) = sf.chart_of(&y);
        let s = sf.radial(x1.hypot(x2), x2.atan2(x1))?.1;
        Ok(Point::new(t1 + s, x1, x2, 0.0))
    };
    let map = DiffMap::new(&format!("tube[{}]", l.label()), src.clone(), dom.clone(), forward)
        .with_inverse_seed(seed)
        .with_fd(FdConfig::fourth(1e-3 * radius.min(1.0)));

    let grid = Grid::from_spec(&src, &GridSpec::uniform(cfg.grid));
    let strictness = strictness_residual(&map, &eta, &grid)?;
    if !(strictness.max_residual < cfg.strict_tolerance) {
        return Err(Error::NoChart {
            best_residual: strictness.max_residual,
        });
    }
    let field: VectorField = l.field()?;
    let times: Vec<f64> = time_nodes(cfg.times.max(1)).iter().map(|t| t + 0.1).collect();
    let rows = par_map(grid.points(), |q| {
        let y = map.apply_raw(q)?;
        let j = map.jacobian_raw(q)?;
        let mut worst: (f64, f64) = (0.0, 0.0);
        for &t in &times {
            let x = field.eval_raw(&y, t)?;
            let c = pull_vector(&dom, &y, &j, &x).ok_or_else(|| Error::Conditioning {
                condition: f64::INFINITY,
                point: coords(q),
            })?;
            let h = c[0] - q[2] * c[1] + q[1] * c[2];
            worst.0 = worst.0.max((h - 1.0).abs());
            worst.1 = worst.1.max((c - Vector3::x()).norm());
        }
        Ok(worst)
    })?;
    let devs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (i, dev) = crate::fieldcalc::sweep::argmax(&devs).unwrap_or((0, 0.0));
    let mismatch = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let report = TubeReport {
        loop_label: l.label().to_string(),
        center: coords(&center),
        radius,
        slice_reach: cfg.slice_reach,
        f0_center: f0.eval(&center, 0.0)?,
        passes: dev < cfg.field_tolerance,
        strictness,
        field_nodes: grid.len(),
        field_times: times.len(),
        max_ham_deviation: dev,
        max_field_mismatch: mismatch,
        worst: grid.points().get(i).map(coords).unwrap_or_default(),
        field_tolerance: cfg.field_tolerance,
        autonomy,
    };
    Ok(NormalFormTube { map, eta, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldcalc::{OneForm, ScalarField};
    use crate::models::{loop_hopf, model_s3};

    #[test]
    fn alpha0_gives_identity_chart() {
        let m = model_solid_torus(1.0).unwrap();
        let c = strict_darboux_chart(m.alpha(), &Point::zeros(), Some(0.2)).unwrap();
        assert!(c.report.max_residual < 1e-9, "{:?}", c.report);
        let q = Point::new(0.05, 0.1, -0.07, 0.0);
        assert!((c.map.apply(&q).unwrap() - q).norm() < 1e-9);
    }

    #[test]
    fn conformal_radial_form() {
        let m = model_solid_torus(1.0).unwrap();
        let g = |p: &Point| 0.3 * (p[1] * p[1] + p[2] * p[2]);
        let d = m.domain().clone();
        let w = OneForm::new(d.clone(), move |p| alpha0(p) * g(p).exp());
        let f = ScalarField::autonomous(d.clone(), move |p| (-g(p)).exp());
        let a = rescale_form(m.alpha(), &f, &m.grid(8)).unwrap();
        let direct = crate::contact::verify_contact(&w, &m.grid(8)).unwrap();
        let p = Point::new(0.3, 0.05, 0.0, 0.0);
        assert!((a.form().eval(&p, 0.0).unwrap() - direct.form().eval(&p, 0.0).unwrap()).norm() < 1e-12);
        let c = strict_darboux_chart(&a, &Point::zeros(), Some(0.1)).unwrap();
        assert!(c.report.max_residual < 1e-5, "{:?}", c.report);
    }

    #[test]
    fn hopf_tube_pushes_field_to_dtheta() {
        let m = model_s3().unwrap();
        let h = loop_hopf(m.alpha()).unwrap();
        let cfg = TubeConfig {
            grid: 8,
            ..TubeConfig::default()
        };
        let t = normal_form_tube_with(&h, &Point::new(1.0, 0.0, 0.0, 0.0), &cfg).unwrap();
        assert!(t.report.passes, "{:?}", t.report);
        assert!((t.report.f0_center - 1.0).abs() < 1e-12);
        let q = Point::new(2.0, 0.3 * t.radius(), -0.2 * t.radius(), 0.0);
        let back = t.map.apply_inverse(&t.map.apply(&q).unwrap()).unwrap();
        assert!((back - q).norm() < 1e-9, "{back:?}");
    }
}
