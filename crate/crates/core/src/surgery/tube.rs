use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{coords, Error, Result};
use crate::fieldcalc::sweep::par_map;
use crate::fieldcalc::{proportionality, DiffMap, Grid, GridSpec, Point};
use crate::models::{model_solid_torus, ModelManifold};

use super::knot::FramedTransverseKnot;

type AnsatzFn = dyn Fn(f64, f64, f64) -> Point + Send + Sync;
type AnsatzInvFn = dyn Fn(&Point) -> (f64, f64, f64) + Send + Sync;

/// Rotationally symmetric embedding `(theta, rho, phi) -> M` around a model knot.
#[derive(Clone)]
struct Ansatz {
    map: Arc<AnsatzFn>,
    inverse: Arc<AnsatzInvFn>,
    /// Largest admissible profile value.
    limit: f64,
}

impl Ansatz {
    fn for_knot(m: &ModelManifold, knot: &FramedTransverseKnot) -> Result<Self> {
        if !m.knots().iter().any(|k| k.name() == knot.name()) {
            return Err(Error::Usage(format!(
                "knot `{}` is not a marked knot of `{}`; general knots are not supported",
                knot.name(),
                m.name()
            )));
        }
        let polar = |p: &Point| (p[1].hypot(p[2]), p[2].atan2(p[1]));
        let (map, inverse, limit): (Arc<AnsatzFn>, Arc<AnsatzInvFn>, f64) = match (m.name(), knot.name()) {
            ("s1xd2", "core") => {
                let lim = match m.domain().kinds()[1] {
                    crate::fieldcalc::CoordKind::Interval { hi, .. } => hi,
                    _ => 1.0,
                };
                (
                    Arc::new(|t, r, f| Point::new(t, r * f.cos(), r * f.sin(), 0.0)),
                    Arc::new(move |p| {
                        let (r, f) = polar(p);
                        (p[0], r, f)
                    }),
                    lim,
                )
            }
            ("s1xs2", "Gamma") => (
                Arc::new(|t, r, f| Point::new(t, r * f.cos(), r * f.sin(), (1.0 - r * r).sqrt())),
                Arc::new(move |p| {
                    let (r, f) = polar(p);
                    (p[0], r, f)
                }),
                0.5,
            ),
            ("s1xs2", "gamma") => (
                Arc::new(|t, r, f| Point::new(-t, r * f.cos(), r * f.sin(), -(1.0 - r * r).sqrt())),
                Arc::new(move |p| {
                    let (r, f) = polar(p);
                    (-p[0], r, f)
                }),
                0.5,
            ),
            ("s3", "hopf") => (
                Arc::new(|t, r, f| {
                    let c = (1.0 - r * r).sqrt();
                    Point::new(c * t.cos(), c * t.sin(), r * f.cos(), r * f.sin())
                }),
                Arc::new(|p| (p[1].atan2(p[0]), p[2].hypot(p[3]), p[3].atan2(p[2]))),
                0.5,
            ),
            (model, name) => {
                return Err(Error::Usage(format!("no tube ansatz for knot `{name}` of `{model}`")));
            }
        };
        Ok(Self { map, inverse, limit })
    }
}

/// `alpha(d_phi) / alpha(d_theta)` of the ansatz at profile value `r`.
fn ratio(m: &ModelManifold, a: &Ansatz, r: f64) -> Result<f64> {
    let h = 1e-6;
    let p = (a.map)(0.0, r, 0.0);
    let dt = ((a.map)(h, r, 0.0) - (a.map)(-h, r, 0.0)) / (2.0 * h);
    let df = ((a.map)(0.0, r, h) - (a.map)(0.0, r, -h)) / (2.0 * h);
    let w = m.alpha().form().eval_raw(&p, 0.0)?;
    Ok(w.dot(&df) / w.dot(&dt))
}

/// Root of `ratio(rho) = target` on `[0, limit]` by safeguarded regula falsi.
fn profile(m: &ModelManifold, a: &Ansatz, target: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, a.limit);
    let (mut flo, mut fhi) = (-target, ratio(m, a, hi)? - target);
    if fhi < 0.0 {
        return Err(Error::ShrinkRadius { radius: target.sqrt() });
    }
    let mut side = 0;
    for _ in 0..200 {
        let mid = (lo * fhi - hi * flo) / (fhi - flo);
        let fm = ratio(m, a, mid)? - target;
        if fm.abs() <= 1e-15 * target || hi - lo <= 1e-15 {
            return Ok(mid);
        }
        if fm > 0.0 {
            (hi, fhi) = (mid, fm);
            if side == -1 {
                flo /= 2.0;
            }
            side = -1;
        } else {
            (lo, flo) = (mid, fm);
            if side == 1 {
                fhi /= 2.0;
            }
            side = 1;
        }
    }
    Err(Error::ShrinkRadius { radius: target.sqrt() })
}

#[derive(Clone, Debug, Serialize)]
pub struct TubeEmbeddingReport {
    pub model: String,
    pub knot: String,
    pub radius: f64,
    pub grid: String,
    pub nodes: usize,
    /// Largest relative residual of `phi^* alpha` against a multiple of `alpha_0`.
    pub kernel_residual: f64,
    pub worst: Vec<f64>,
    pub min_factor: f64,
    pub core_distance: f64,
    /// `max |factor(theta, 0) - alpha(knot')|` along the core.
    pub core_factor_mismatch: f64,
    /// Largest angle between the image of `d_x` and the knot frame along the core.
    pub frame_angle: f64,
    /// Winding of the image of `d_x` relative to the knot frame.
    pub frame_winding: i64,
}

/// Contact embedding of `S^1 x D^2(R)` onto a tube around a model knot.
#[derive(Clone, Debug)]
pub struct TubeEmbedding {
    pub map: DiffMap,
    pub report: TubeEmbeddingReport,
}

/// Tube with the default radius: half the largest radius the profile solve reaches.
pub fn tube_embedding(m: &ModelManifold, knot: &FramedTransverseKnot) -> Result<TubeEmbedding> {
    tube_embedding_with(m, knot, None, 32)
}

pub fn default_tube_radius(m: &ModelManifold, knot: &FramedTransverseKnot) -> Result<f64> {
    let a = Ansatz::for_knot(m, knot)?;
    Ok(0.5 * ratio(m, &a, a.limit)?.sqrt())
}

pub fn tube_embedding_with(
    m: &ModelManifold,
    knot: &FramedTransverseKnot,
    radius: Option<f64>,
    grid_n: usize,
) -> Result<TubeEmbedding> {
    let a = Ansatz::for_knot(m, knot)?;
    let radius = match radius {
        Some(r) => r,
        None => default_tube_radius(m, knot)?,
    };
    profile(m, &a, radius * radius)?;
    let torus = model_solid_torus(radius)?;
    let src = torus.domain().clone();
    let (m2, a2) = (m.clone(), a.clone());
    let map = DiffMap::new(&format!("tube[{}]", knot.name()), src.clone(), m.domain().clone(), move |q| {
        let r2 = q[1] * q[1] + q[2] * q[2];
        let rho = profile(&m2, &a2, r2)?;
        Ok((a2.map)(q[0], rho, q[2].atan2(q[1])))
    });
    let (m3, a3) = (m.clone(), a.clone());
    let map = map.with_inverse(move |y| {
        let (t, rho, f) = (a3.inverse)(y);
        let r = if rho == 0.0 { 0.0 } else { ratio(&m3, &a3, rho)?.max(0.0).sqrt() };
        Ok(Point::new(t, r * f.cos(), r * f.sin(), 0.0))
    });

    let grid = Grid::from_spec(&src, &GridSpec::uniform(grid_n));
    let alpha = m.alpha();
    let rows = par_map(grid.points(), |q| {
        let y = map.apply_raw(q)?;
        let pb = map.jacobian_raw(q)?.transpose() * alpha.form().eval_raw(&y, 0.0)?;
        let a0 = Point::new(1.0, -q[2], q[1], 0.0);
        let (f, r) = proportionality(&a0, &pb, &src.tangent_frame(q));
        Ok((r / (f.abs() * a0.norm()), f))
    })?;
    let res: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (i, kernel_residual) = crate::fieldcalc::sweep::argmax(&res).unwrap_or((0, 0.0));
    let min_factor = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);

    let n = 256;
    let mut core_distance: f64 = 0.0;
    let mut core_factor: f64 = 0.0;
    let mut angles = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let s = TAU * j as f64 / n as f64;
        let q = Point::new(s, 0.0, 0.0, 0.0);
        let y = map.apply_raw(&q)?;
        let k = m.domain().check(&knot.at(s))?;
        core_distance = core_distance.max(m.domain().distance(&y, &k));
        let jac = map.jacobian_raw(&q)?;
        let w = alpha.form().eval_raw(&y, 0.0)?;
        core_factor = core_factor.max((w.dot(&jac.column(0).into_owned()) - alpha.value(&k, &knot.tangent(s))?).abs());
        let frame = m.domain().tangent_frame(&k);
        let comp = |v: &Point| Vector3::new(v.dot(&frame[0]), v.dot(&frame[1]), v.dot(&frame[2]));
        let nrm = comp(&w).normalize();
        let f = comp(&knot.frame(s)).normalize();
        let g = nrm.cross(&f);
        let v = comp(&jac.column(1).into_owned());
        angles.push(v.dot(&g).atan2(v.dot(&f)));
    }
    let frame_angle = angles.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let mut turn = 0.0;
    for w in angles.windows(2) {
        turn += crate::fieldcalc::wrap_angle(w[1] - w[0]);
    }
    Ok(TubeEmbedding {
        map,
        report: TubeEmbeddingReport {
            model: m.name().to_string(),
            knot: knot.name().to_string(),
            radius,
            grid: grid.label().to_string(),
            nodes: grid.len(),
            kernel_residual,
            worst: grid.points().get(i).map(coords).unwrap_or_default(),
            min_factor,
            core_distance,
            core_factor_mismatch: core_factor,
            frame_angle,
            frame_winding: (turn / TAU).round() as i64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{model_s1s2, model_s3};

    #[test]
    fn gamma_profile_matches_closed_form() {
        let m = model_s1s2().unwrap();
        let a = Ansatz::for_knot(&m, m.knot("Gamma").unwrap()).unwrap();
        for r in [0.05f64, 0.2, 0.4] {
            let r4 = r.powi(4);
            let w = (-r4 + (r4 * r4 + 4.0 * r4).sqrt()) / 2.0;
            assert!((profile(&m, &a, r * r).unwrap() - w.sqrt()).abs() < 1e-9, "{r}");
        }
        assert!(matches!(profile(&m, &a, 10.0), Err(Error::ShrinkRadius { .. })));
    }

    #[test]
    fn model_tubes_are_contact() {
        let s = model_s1s2().unwrap();
        let h = model_s3().unwrap();
        for (m, k) in [(&s, "Gamma"), (&s, "gamma"), (&h, "hopf")] {
            let t = tube_embedding_with(m, m.knot(k).unwrap(), None, 10).unwrap();
            let r = &t.report;
            assert!(r.kernel_residual < 1e-6, "{r:?}");
            assert!(r.core_distance < 1e-10 && r.core_factor_mismatch < 1e-6, "{r:?}");
            assert!(r.min_factor > 0.0 && r.frame_winding == 0, "{r:?}");
            let q = Point::new(1.0, 0.3 * r.radius, -0.4 * r.radius, 0.0);
            let back = t.map.apply_inverse_raw(&t.map.apply_raw(&q).unwrap()).unwrap();
            assert!(t.map.source().distance(&back, &q) < 1e-9, "{back:?}");
        }
    }
}
