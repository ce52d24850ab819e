use nalgebra::Matrix4;
use serde::Serialize;

use crate::contact::ContactForm;
use crate::error::{Error, Result};
use crate::fieldcalc::sweep::par_map;
use crate::fieldcalc::{DiffMap, Grid, GridSpec, Point};
use crate::models::{model_annulus, model_solid_torus, ModelManifold};

/// `g1(theta, r, phi) = (theta, r^2, phi)` and `g2(theta, r, phi) = (theta, -r^2, -phi)`
/// from the punctured solid torus into the neck, with analytic Jacobians and inverses.
#[derive(Clone, Debug)]
pub struct GluingMaps {
    pub radius: f64,
    pub solid_torus: ModelManifold,
    pub neck: ModelManifold,
    pub g1: DiffMap,
    pub g2: DiffMap,
}

fn jac(p: &Point, sign: f64) -> Matrix4<f64> {
    let (x, y) = (p[1], p[2]);
    let r2 = x * x + y * y;
    let mut m = Matrix4::zeros();
    m[(0, 0)] = 1.0;
    m[(1, 1)] = sign * 2.0 * x;
    m[(1, 2)] = sign * 2.0 * y;
    m[(2, 1)] = -sign * y / r2;
    m[(2, 2)] = sign * x / r2;
    m
}

fn puncture(p: &Point) -> Result<()> {
    if p[1] == 0.0 && p[2] == 0.0 {
        Err(Error::Usage("gluing maps are undefined on the core circle".into()))
    } else {
        Ok(())
    }
}

pub fn gluing_maps(radius: f64) -> Result<GluingMaps> {
    let solid_torus = model_solid_torus(radius)?;
    let neck = model_annulus(radius)?;
    let (s, n) = (solid_torus.domain().clone(), neck.domain().clone());
    let g1 = DiffMap::new("g1", s.clone(), n.clone(), |p| {
        puncture(p)?;
        Ok(Point::new(p[0], p[1] * p[1] + p[2] * p[2], p[2].atan2(p[1]), 0.0))
    })
    .with_inverse(|q| {
        let r = q[1].max(0.0).sqrt();
        Ok(Point::new(q[0], r * q[2].cos(), r * q[2].sin(), 0.0))
    })
    .with_jacobian(|p| {
        puncture(p)?;
        Ok(jac(p, 1.0))
    })
    .with_log_factor(|_| Ok(0.0));
    let g2 = DiffMap::new("g2", s, n, |p| {
        puncture(p)?;
        Ok(Point::new(p[0], -(p[1] * p[1] + p[2] * p[2]), -p[2].atan2(p[1]), 0.0))
    })
    .with_inverse(|q| {
        let r = (-q[1]).max(0.0).sqrt();
        Ok(Point::new(q[0], r * q[2].cos(), -r * q[2].sin(), 0.0))
    })
    .with_jacobian(|p| {
        puncture(p)?;
        Ok(jac(p, -1.0))
    })
    .with_log_factor(|_| Ok(0.0));
    Ok(GluingMaps {
        radius,
        solid_torus,
        neck,
        g1,
        g2,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PullbackCheck {
    pub map: String,
    pub grid: String,
    pub nodes: usize,
    pub max_residual: f64,
    /// Sign of `det Dg` (0 if mixed).
    pub jacobian_sign: f64,
    /// Sign of `d(phi o g)(d_phi)` (0 if mixed).
    pub phi_orientation: f64,
    /// Sign of `v` on the image (0 if mixed).
    pub image_sign: f64,
}

/// `max |g^* eta - alpha_0|` over a grid of the punctured solid torus, with orientation signs.
pub fn check_pullback(maps: &GluingMaps, which: usize, n: usize) -> Result<PullbackCheck> {
    let g = if which == 1 { &maps.g1 } else { &maps.g2 };
    let eta: &ContactForm = maps.neck.alpha();
    let alpha0 = maps.solid_torus.alpha();
    let grid = Grid::from_spec(maps.solid_torus.domain(), &GridSpec::uniform(n));
    let pts: Vec<Point> = grid
        .points()
        .iter()
        .filter(|p| p[1].hypot(p[2]) > 1e-9 * maps.radius)
        .copied()
        .collect();
    let rows = par_map(&pts, |p| {
        let q = g.apply(p)?;
        let j = g.jacobian(p)?;
        let pb = j.transpose() * eta.form().eval(&q, 0.0)?;
        let a = alpha0.form().eval(p, 0.0)?;
        let det = j.fixed_view::<3, 3>(0, 0).determinant();
        let dphi = (j * Point::new(0.0, -p[2], p[1], 0.0))[2];
        Ok(((pb - a).amax(), det.signum(), q[1].signum(), dphi.signum()))
    })?;
    let same = |v: &[f64]| if v.iter().all(|&s| s == v[0]) { v[0] } else { 0.0 };
    let dets: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let signs: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let phis: Vec<f64> = rows.iter().map(|r| r.3).collect();
    Ok(PullbackCheck {
        map: g.label().to_string(),
        grid: grid.label().to_string(),
        nodes: pts.len(),
        max_residual: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        jacobian_sign: same(&dets),
        phi_orientation: same(&phis),
        image_sign: same(&signs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pullbacks_are_alpha0() {
        let m = gluing_maps(1.0).unwrap();
        let c1 = check_pullback(&m, 1, 16).unwrap();
        let c2 = check_pullback(&m, 2, 16).unwrap();
        assert!(c1.max_residual < 1e-12 && c2.max_residual < 1e-12);
        assert_eq!((c1.image_sign, c2.image_sign), (1.0, -1.0));
        assert_eq!((c1.phi_orientation, c2.phi_orientation), (1.0, -1.0));
        assert_eq!((c1.jacobian_sign, c2.jacobian_sign), (1.0, 1.0));
    }

    #[test]
    fn inverses_round_trip() {
        let m = gluing_maps(0.5).unwrap();
        let p = Point::new(1.0, 0.2, -0.1, 0.0);
        for g in [&m.g1, &m.g2] {
            let back = g.apply_inverse(&g.apply(&p).unwrap()).unwrap();
            assert!((back - p).norm() < 1e-14);
        }
        assert!(m.g1.apply(&Point::new(0.0, 0.0, 0.0, 0.0)).is_err());
    }
}
