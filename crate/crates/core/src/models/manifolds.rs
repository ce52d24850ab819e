use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use nalgebra::Matrix4;

use crate::contact::{verify_labeled, ContactForm};
use crate::error::{Error, Result};
use crate::fieldcalc::{
    CoordKind, Domain, Grid, GridSpec, LevelSet, OneForm, Orientation, ParamBox, Parametrization, Point,
    DEFAULT_CONSTRAINT_TOL,
};
use crate::surgery::knot::FramedTransverseKnot;

/// Grid resolution used when certifying a model form at construction.
pub const MODEL_GRID: usize = 24;

#[derive(Clone, Debug)]
pub struct NamedRegion {
    pub name: String,
    pub param: ParamBox,
}

/// A model contact manifold with named regions and marked knots.
#[derive(Clone, Debug)]
pub struct ModelManifold {
    name: String,
    alpha: ContactForm,
    regions: Vec<NamedRegion>,
    knots: Vec<FramedTransverseKnot>,
}

impl ModelManifold {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> &ContactForm {
        &self.alpha
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.alpha.domain()
    }

    pub fn regions(&self) -> &[NamedRegion] {
        &self.regions
    }

    pub fn region(&self, name: &str) -> Result<&NamedRegion> {
        self.regions
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::Usage(format!("model `{}` has no region `{name}`", self.name)))
    }

    /// Grid over a named region, with extra nodes near its boundary.
    pub fn region_grid(&self, name: &str, n: usize, time_refine: bool) -> Result<Grid> {
        let r = self.region(name)?;
        let spec = GridSpec::new([n; 3], r.param);
        Ok(Grid::from_spec(self.domain(), &if time_refine { spec.refined() } else { spec }))
    }

    /// Union of the refined grids of several regions.
    pub fn union_grid(&self, names: &[&str], n: usize) -> Result<Grid> {
        let mut pts = Vec::new();
        for name in names {
            pts.extend_from_slice(self.region_grid(name, n, true)?.points());
        }
        Ok(Grid::from_points(format!("{}:{}@{n}+refined", self.name, names.join("+")), pts))
    }

    pub fn grid(&self, n: usize) -> Grid {
        Grid::from_spec(self.domain(), &GridSpec::uniform(n))
    }

    pub fn knots(&self) -> &[FramedTransverseKnot] {
        &self.knots
    }

    pub fn knot(&self, name: &str) -> Result<&FramedTransverseKnot> {
        self.knots
            .iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Usage(format!("model `{}` has no knot `{name}`", self.name)))
    }
}

fn positive_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Usage(format!("radius must be positive, got {r}")))
    }
}

/// `S^1 x D^2(R)` with `alpha_0 = d theta + x dy - y dx`.
pub fn model_solid_torus(radius: f64) -> Result<ModelManifold> {
    positive_radius(radius)?;
    let r2 = radius * radius;
    let d = Arc::new(
        Domain::chart(
            "s1xd2",
            ["theta", "x", "y"],
            [
                CoordKind::Periodic,
                CoordKind::Interval { lo: -radius, hi: radius },
                CoordKind::Interval { lo: -radius, hi: radius },
            ],
        )?
        .with_region(move |p| p[1] * p[1] + p[2] * p[2] - r2),
    );
    let w = OneForm::new(d.clone(), |p| Point::new(1.0, -p[2], p[1], 0.0)).with_partials(|_| {
        let mut m = Matrix4::zeros();
        m[(1, 2)] = -1.0;
        m[(2, 1)] = 1.0;
        m
    });
    let alpha = verify_labeled("alpha0", &w, &Grid::from_spec(&d, &GridSpec::uniform(MODEL_GRID)))?;
    let core = FramedTransverseKnot::new(
        "core",
        &alpha,
        |s| Point::new(s, 0.0, 0.0, 0.0),
        |_| Point::new(1.0, 0.0, 0.0, 0.0),
        |_| Point::new(0.0, 1.0, 0.0, 0.0),
    )?;
    Ok(ModelManifold {
        name: "s1xd2".into(),
        alpha,
        regions: vec![NamedRegion {
            name: "all".into(),
            param: ParamBox::UNIT,
        }],
        knots: vec![core],
    })
}

/// Unit sphere bundle presentation of `S^1 x S^2` in `(theta, x, y, z)`.
pub fn s1s2_domain() -> Domain {
    let ls = LevelSet::new(
        |p| p[1] * p[1] + p[2] * p[2] + p[3] * p[3] - 1.0,
        |p| Point::new(0.0, 2.0 * p[1], 2.0 * p[2], 2.0 * p[3]),
        DEFAULT_CONSTRAINT_TOL,
        Orientation::NormalLast,
    );
    let param = Parametrization::new(
        |u| {
            let (th, ph) = (PI * u[1], TAU * u[2]);
            Point::new(TAU * u[0], th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos())
        },
        [true, false, true],
    );
    Domain::level_set(
        "s1xs2",
        ["theta", "x", "y", "z"],
        [CoordKind::Periodic, CoordKind::Ambient, CoordKind::Ambient, CoordKind::Ambient],
        ls,
        param,
    )
}

/// `(S^1 x S^2, z d theta + x dy - y dx)` with `T1 = {z >= 0}`, `T2 = {z <= 0}`,
/// the knots `Gamma(theta) = (theta; 0,0,1)` and `gamma(theta) = (-theta; 0,0,-1)`.
pub fn model_s1s2() -> Result<ModelManifold> {
    let d = Arc::new(s1s2_domain());
    let w = OneForm::new(d.clone(), |p| Point::new(p[3], -p[2], p[1], 0.0)).with_partials(|_| {
        let mut m = Matrix4::zeros();
        m[(0, 3)] = 1.0;
        m[(1, 2)] = -1.0;
        m[(2, 1)] = 1.0;
        m
    });
    let alpha = verify_labeled("alpha_st", &w, &Grid::from_spec(&d, &GridSpec::uniform(MODEL_GRID)))?;
    let big = FramedTransverseKnot::new(
        "Gamma",
        &alpha,
        |s| Point::new(s, 0.0, 0.0, 1.0),
        |_| Point::new(1.0, 0.0, 0.0, 0.0),
        |_| Point::new(0.0, 1.0, 0.0, 0.0),
    )?;
    let small = FramedTransverseKnot::new(
        "gamma",
        &alpha,
        |s| Point::new(-s, 0.0, 0.0, -1.0),
        |_| Point::new(-1.0, 0.0, 0.0, 0.0),
        |_| Point::new(0.0, 1.0, 0.0, 0.0),
    )?;
    Ok(ModelManifold {
        name: "s1xs2".into(),
        alpha,
        regions: vec![
            NamedRegion {
                name: "T1".into(),
                param: ParamBox::new([0.0; 3], [1.0, 0.5, 1.0]),
            },
            NamedRegion {
                name: "T2".into(),
                param: ParamBox::new([0.0, 0.5, 0.0], [1.0; 3]),
            },
            NamedRegion {
                name: "all".into(),
                param: ParamBox::UNIT,
            },
        ],
        knots: vec![big, small],
    })
}

/// Neck `A_R = S^1 x (-R^2, R^2) x S^1` with `eta = d theta + v d phi`.
pub fn model_annulus(radius: f64) -> Result<ModelManifold> {
    positive_radius(radius)?;
    let r2 = radius * radius;
    let d = Arc::new(Domain::chart(
        "annulus",
        ["theta", "v", "phi"],
        [CoordKind::Periodic, CoordKind::Interval { lo: -r2, hi: r2 }, CoordKind::Periodic],
    )?);
    let w = OneForm::new(d.clone(), |p| Point::new(1.0, 0.0, p[1], 0.0)).with_partials(|_| {
        let mut m = Matrix4::zeros();
        m[(2, 1)] = 1.0;
        m
    });
    let alpha = verify_labeled("eta", &w, &Grid::from_spec(&d, &GridSpec::uniform(MODEL_GRID)))?;
    Ok(ModelManifold {
        name: "annulus".into(),
        alpha,
        regions: vec![
            NamedRegion {
                name: "positive".into(),
                param: ParamBox::new([0.0, 0.5, 0.0], [1.0; 3]),
            },
            NamedRegion {
                name: "negative".into(),
                param: ParamBox::new([0.0; 3], [1.0, 0.5, 1.0]),
            },
            NamedRegion {
                name: "all".into(),
                param: ParamBox::UNIT,
            },
        ],
        knots: Vec::new(),
    })
}

pub fn s3_domain() -> Domain {
    let ls = LevelSet::new(
        |p| p.norm_squared() - 1.0,
        |p| 2.0 * p,
        DEFAULT_CONSTRAINT_TOL,
        Orientation::NormalFirst,
    );
    let param = Parametrization::new(
        |u| {
            let (e, a, b) = (FRAC_PI_2 * u[1], TAU * u[0], TAU * u[2]);
            Point::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin() * b.cos(), e.sin() * b.sin())
        },
        [true, false, true],
    );
    Domain::level_set(
        "s3",
        ["x1", "y1", "x2", "y2"],
        [CoordKind::Ambient; 4],
        ls,
        param,
    )
}

/// `(S^3, x1 dy1 - y1 dx1 + x2 dy2 - y2 dx2)` with the Hopf fiber through `(1,0,0,0)` marked.
pub fn model_s3() -> Result<ModelManifold> {
    let d = Arc::new(s3_domain());
    let w = OneForm::new(d.clone(), |p| Point::new(-p[1], p[0], -p[3], p[2])).with_partials(|_| {
        let mut m = Matrix4::zeros();
        m[(0, 1)] = -1.0;
        m[(1, 0)] = 1.0;
        m[(2, 3)] = -1.0;
        m[(3, 2)] = 1.0;
        m
    });
    let alpha = verify_labeled("alpha_s3", &w, &Grid::from_spec(&d, &GridSpec::uniform(MODEL_GRID)))?;
    let fiber = FramedTransverseKnot::new(
        "hopf",
        &alpha,
        |s| Point::new(s.cos(), s.sin(), 0.0, 0.0),
        |s| Point::new(-s.sin(), s.cos(), 0.0, 0.0),
        |_| Point::new(0.0, 0.0, 1.0, 0.0),
    )?;
    Ok(ModelManifold {
        name: "s3".into(),
        alpha,
        regions: vec![NamedRegion {
            name: "all".into(),
            param: ParamBox::UNIT,
        }],
        knots: vec![fiber],
    })
}

/// Looks a model up by its command-line name.
pub fn model_by_name(name: &str) -> Result<ModelManifold> {
    match name {
        "s1xd2" => model_solid_torus(1.0),
        "s1xs2" => model_s1s2(),
        "annulus" => model_annulus(1.0),
        "s3" => model_s3(),
        other => Err(Error::Usage(format!(
            "unknown model `{other}` (expected s1xd2, s1xs2, annulus or s3)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::verify_reeb;

    #[test]
    fn solid_torus_margin_is_two() {
        let m = model_solid_torus(1.0).unwrap();
        let c = m.alpha().certificate();
        assert!((c.min_margin - 2.0).abs() < 1e-9 && (c.max_margin - 2.0).abs() < 1e-9);
        let r = m.alpha().reeb_at(&Point::new(0.3, 0.2, -0.4, 0.0)).unwrap();
        assert!((r - Point::new(1.0, 0.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn s1s2_knots_are_transverse() {
        let m = model_s1s2().unwrap();
        for k in ["Gamma", "gamma"] {
            assert!((m.knot(k).unwrap().certificate().transversality - 1.0).abs() < 1e-12);
        }
        assert!(m.alpha().certificate().min_margin > 0.0);
        let rep = verify_reeb(m.alpha(), &m.grid(12)).unwrap();
        assert!(rep.max_residual < 1e-7, "{rep:?}");
    }

    #[test]
    fn annulus_margin_is_one() {
        let m = model_annulus(1.0).unwrap();
        let c = m.alpha().certificate();
        assert!((c.min_margin - 1.0).abs() < 1e-12 && (c.max_margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn s3_is_contact() {
        let m = model_s3().unwrap();
        assert!(m.alpha().certificate().min_margin > 0.0);
        assert!(m.knot("hopf").is_ok());
    }

    #[test]
    fn bad_radius() {
        assert!(model_solid_torus(0.0).is_err());
        assert!(model_annulus(-1.0).is_err());
        assert!(model_by_name("torus").is_err());
    }
}
