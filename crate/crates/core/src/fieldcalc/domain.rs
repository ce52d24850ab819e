use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Ambient coordinates of a point. Three-dimensional charts leave the last slot at zero.
pub type Point = Vector4<f64>;

pub type ConstraintFn = dyn Fn(&Point) -> f64 + Send + Sync;
pub type ConstraintGradFn = dyn Fn(&Point) -> Point + Send + Sync;
pub type ParamFn = dyn Fn(&[f64; 3]) -> Point + Send + Sync;
pub type RegionFn = dyn Fn(&Point) -> f64 + Send + Sync;

/// Kind of a single ambient coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoordKind {
    /// Angle in R/2piZ.
    Periodic,
    Interval { lo: f64, hi: f64 },
    /// Unbounded ambient coordinate, constrained only through the level set.
    Ambient,
}

/// Which side the outward normal goes on when orienting a level-set tangent frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// Frame `(e1, e2, e3)` is positive when `det[e1, e2, e3, n] > 0`.
    NormalLast,
    /// Frame `(e1, e2, e3)` is positive when `det[n, e1, e2, e3] > 0`.
    NormalFirst,
}

#[derive(Clone)]
pub struct LevelSet {
    constraint: Arc<ConstraintFn>,
    gradient: Arc<ConstraintGradFn>,
    tolerance: f64,
    orientation: Orientation,
}

impl LevelSet {
    pub fn new(
        constraint: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> Point + Send + Sync + 'static,
        tolerance: f64,
        orientation: Orientation,
    ) -> Self {
        Self {
            constraint: Arc::new(constraint),
            gradient: Arc::new(gradient),
            tolerance,
            orientation,
        }
    }

    pub fn value(&self, p: &Point) -> f64 {
        (self.constraint)(p)
    }

    pub fn gradient(&self, p: &Point) -> Point {
        (self.gradient)(p)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }
}

/// Map from the unit parameter cube onto the domain, used to lay out grids.
#[derive(Clone)]
pub struct Parametrization {
    map: Arc<ParamFn>,
    periodic: [bool; 3],
}

impl Parametrization {
    pub fn new(map: impl Fn(&[f64; 3]) -> Point + Send + Sync + 'static, periodic: [bool; 3]) -> Self {
        Self {
            map: Arc::new(map),
            periodic,
        }
    }

    pub fn at(&self, u: &[f64; 3]) -> Point {
        (self.map)(u)
    }

    pub fn periodic(&self) -> [bool; 3] {
        self.periodic
    }
}

/// A three-dimensional coordinate presentation: either a chart in R^3 or a level set in R^4.
#[derive(Clone)]
pub struct Domain {
    name: String,
    coord_names: Vec<String>,
    kinds: Vec<CoordKind>,
    level_set: Option<LevelSet>,
    region: Option<Arc<RegionFn>>,
    slack: f64,
    param: Parametrization,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("name", &self.name)
            .field("coords", &self.coord_names)
            .field("kinds", &self.kinds)
            .field("level_set", &self.level_set.is_some())
            .finish()
    }
}

pub const DEFAULT_SLACK: f64 = 1e-9;
pub const DEFAULT_CONSTRAINT_TOL: f64 = 1e-8;

impl Domain {
    /// Chart domain in R^3. The grid parametrization is the affine box map.
    pub fn chart(name: &str, coord_names: [&str; 3], kinds: [CoordKind; 3]) -> Result<Self> {
        for k in kinds {
            if matches!(k, CoordKind::Ambient) {
                return Err(Error::Usage("chart coordinates must be periodic or intervals".into()));
            }
            if let CoordKind::Interval { lo, hi } = k {
                if !(lo < hi) {
                    return Err(Error::Usage(format!("empty interval [{lo}, {hi}]")));
                }
            }
        }
        let periodic = kinds.map(|k| matches!(k, CoordKind::Periodic));
        let param = Parametrization::new(
            move |u| {
                let mut p = Point::zeros();
                for i in 0..3 {
                    p[i] = match kinds[i] {
                        CoordKind::Periodic => TAU * u[i],
                        CoordKind::Interval { lo, hi } => lo + (hi - lo) * u[i],
                        CoordKind::Ambient => unreachable!(),
                    };
                }
                p
            },
            periodic,
        );
        Ok(Self {
            name: name.to_string(),
            coord_names: coord_names.iter().map(|s| s.to_string()).collect(),
            kinds: kinds.to_vec(),
            level_set: None,
            region: None,
            slack: DEFAULT_SLACK,
            param,
        })
    }

    /// Level set `{c = 0}` in R^4 with a grid parametrization supplied by the caller.
    pub fn level_set(
        name: &str,
        coord_names: [&str; 4],
        kinds: [CoordKind; 4],
        level_set: LevelSet,
        param: Parametrization,
    ) -> Self {
        Self {
            name: name.to_string(),
            coord_names: coord_names.iter().map(|s| s.to_string()).collect(),
            kinds: kinds.to_vec(),
            level_set: Some(level_set),
            region: None,
            slack: DEFAULT_SLACK,
            param,
        }
    }

    /// Restricts the domain to `{g <= 0}` (e.g. a disk inside a coordinate box).
    pub fn with_region(mut self, g: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.region = Some(Arc::new(g));
        self
    }

    pub fn with_slack(mut self, slack: f64) -> Self {
        self.slack = slack;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn kinds(&self) -> &[CoordKind] {
        &self.kinds
    }

    /// Number of ambient coordinates (3 for charts, 4 for level sets).
    pub fn ambient_dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn level(&self) -> Option<&LevelSet> {
        self.level_set.as_ref()
    }

    pub fn is_level_set(&self) -> bool {
        self.level_set.is_some()
    }

    pub fn parametrization(&self) -> &Parametrization {
        &self.param
    }

    pub fn same_as(&self, other: &Domain) -> bool {
        self.name == other.name
    }

    /// Reduces periodic coordinates into [0, 2pi).
    pub fn reduce(&self, p: &Point) -> Point {
        let mut q = *p;
        for (i, k) in self.kinds.iter().enumerate() {
            if matches!(k, CoordKind::Periodic) {
                q[i] = q[i].rem_euclid(TAU);
                if q[i] >= TAU {
                    q[i] = 0.0;
                }
            }
        }
        for v in q.iter_mut().skip(self.kinds.len()) {
            *v = 0.0;
        }
        q
    }

    /// Reduces and validates a point.
    pub fn check(&self, p: &Point) -> Result<Point> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(&self.name, p, "non-finite coordinate"));
        }
        let q = self.reduce(p);
        for (i, k) in self.kinds.iter().enumerate() {
            if let CoordKind::Interval { lo, hi } = *k {
                if q[i] < lo - self.slack || q[i] > hi + self.slack {
                    return Err(Error::domain(
                        &self.name,
                        p,
                        format!("coordinate {} = {} outside [{lo}, {hi}]", self.coord_names[i], q[i]),
                    ));
                }
            }
        }
        if let Some(g) = &self.region {
            let v = g(&q);
            if !(v <= self.slack) {
                return Err(Error::domain(&self.name, p, format!("region constraint {v:.3e} > 0")));
            }
        }
        if let Some(ls) = &self.level_set {
            let c = ls.value(&q);
            if c.abs() > ls.tolerance {
                return Err(Error::domain(&self.name, p, format!("constraint residual {c:.3e}")));
            }
        }
        Ok(q)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.check(p).is_ok()
    }

    /// `a - b` with periodic components wrapped into (-pi, pi].
    pub fn difference(&self, a: &Point, b: &Point) -> Point {
        let mut d = a - b;
        for (i, k) in self.kinds.iter().enumerate() {
            if matches!(k, CoordKind::Periodic) {
                d[i] = wrap_angle(d[i]);
            }
        }
        d
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.difference(a, b).norm()
    }

    /// Newton projection onto the level set along the constraint gradient.
    pub fn project(&self, p: &Point) -> Point {
        let Some(ls) = &self.level_set else {
            return self.reduce(p);
        };
        let mut q = *p;
        for _ in 0..30 {
            let c = ls.value(&q);
            if c.abs() < 1e-15 {
                break;
            }
            let g = ls.gradient(&q);
            let gg = g.norm_squared();
            if gg == 0.0 {
                break;
            }
            q -= g * (c / gg);
        }
        self.reduce(&q)
    }

    /// Unit normal of the level set, `None` for charts.
    pub fn normal(&self, p: &Point) -> Option<Point> {
        self.level_set.as_ref().map(|ls| ls.gradient(p).normalize())
    }

    /// Projection of an ambient vector onto the tangent space at `p`.
    pub fn tangent_part(&self, p: &Point, v: &Point) -> Point {
        match self.normal(p) {
            Some(n) => v - n * n.dot(v),
            None => *v,
        }
    }

    /// Oriented orthonormal tangent frame at `p`.
    ///
    /// Charts use the coordinate basis. Level sets project the ambient basis onto the
    /// tangent space and run Gram-Schmidt with column pivoting, then fix the orientation.
    pub fn tangent_frame(&self, p: &Point) -> [Point; 3] {
        let Some(ls) = &self.level_set else {
            return [Point::x(), Point::y(), Point::z()];
        };
        let n = ls.gradient(p).normalize();
        let mut cands: Vec<Point> = (0..4)
            .map(|i| {
                let e = Point::ith(i, 1.0);
                e - n * n[i]
            })
            .collect();
        let mut frame = [Point::zeros(); 3];
        for slot in frame.iter_mut() {
            let (best, _) = cands
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.norm()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let e = cands.swap_remove(best).normalize();
            for c in cands.iter_mut() {
                *c -= e * e.dot(c);
            }
            *slot = e;
        }
        let det = match ls.orientation {
            Orientation::NormalLast => Matrix4::from_columns(&[frame[0], frame[1], frame[2], n]).determinant(),
            Orientation::NormalFirst => Matrix4::from_columns(&[n, frame[0], frame[1], frame[2]]).determinant(),
        };
        if det < 0.0 {
            frame[2] = -frame[2];
        }
        frame
    }

    /// Deterministic pseudo-random sample of `n` points.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let u = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let p = self.project(&self.param.at(&u));
            if self.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Deterministic sample of `n` points within tangent distance `radius` of `center`.
    pub fn sample_ball(&self, center: &Point, radius: f64, n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = self.tangent_frame(center);
        let mut out = Vec::with_capacity(n);
        out.push(self.reduce(center));
        while out.len() < n {
            let c = [
                rng.random_range(-1.0..1.0f64),
                rng.random_range(-1.0..1.0f64),
                rng.random_range(-1.0..1.0f64),
            ];
            if c.iter().map(|v| v * v).sum::<f64>() > 1.0 {
                continue;
            }
            let q = self.project(&(center + (frame[0] * c[0] + frame[1] * c[1] + frame[2] * c[2]) * radius));
            if self.contains(&q) {
                out.push(q);
            }
        }
        out
    }
}

/// Wraps an angle difference into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Sub-box of the unit parameter cube.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl ParamBox {
    pub const UNIT: ParamBox = ParamBox {
        lo: [0.0; 3],
        hi: [1.0; 3],
    };

    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        Self { lo, hi }
    }
}

/// Regular grid over a region of a domain's parameter cube.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub counts: [usize; 3],
    pub region: ParamBox,
    pub refine_boundary: bool,
}

impl GridSpec {
    pub fn uniform(n: usize) -> Self {
        Self {
            counts: [n; 3],
            region: ParamBox::UNIT,
            refine_boundary: false,
        }
    }

    pub fn new(counts: [usize; 3], region: ParamBox) -> Self {
        Self {
            counts,
            region,
            refine_boundary: false,
        }
    }

    pub fn refined(mut self) -> Self {
        self.refine_boundary = true;
        self
    }
}

/// Materialized set of evaluation nodes with a short description for reports.
#[derive(Clone, Debug)]
pub struct Grid {
    label: String,
    points: Vec<Point>,
}

impl Grid {
    pub fn from_spec(domain: &Domain, spec: &GridSpec) -> Self {
        let periodic = domain.param.periodic();
        let axes: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let (lo, hi) = (spec.region.lo[i], spec.region.hi[i]);
                let full_period = periodic[i] && lo == 0.0 && hi == 1.0;
                axis_nodes(lo, hi, spec.counts[i], full_period, spec.refine_boundary && !full_period)
            })
            .collect();
        let mut points = Vec::with_capacity(axes[0].len() * axes[1].len() * axes[2].len());
        for &u0 in &axes[0] {
            for &u1 in &axes[1] {
                for &u2 in &axes[2] {
                    let p = domain.project(&domain.param.at(&[u0, u1, u2]));
                    if domain.region.is_none() || domain.contains(&p) {
                        points.push(p);
                    }
                }
            }
        }
        let label = format!(
            "{}:{}x{}x{}{}",
            domain.name(),
            spec.counts[0],
            spec.counts[1],
            spec.counts[2],
            if spec.refine_boundary { "+refined" } else { "" }
        );
        Self { label, points }
    }

    pub fn from_points(label: impl Into<String>, points: Vec<Point>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }

    pub fn ball(domain: &Domain, center: &Point, radius: f64, n: usize, seed: u64) -> Self {
        Self {
            label: format!("{}:ball(r={radius},n={n})", domain.name()),
            points: domain.sample_ball(center, radius, n, seed),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn axis_nodes(lo: f64, hi: f64, n: usize, full_period: bool, refine: bool) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    let mut nodes: Vec<f64> = if full_period {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    } else {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    if refine {
        let h = (hi - lo) / (n - 1) as f64;
        let band = ((n - 1) / 8).max(1);
        for i in 0..band {
            nodes.push(lo + h * (i as f64 + 0.5));
            nodes.push(hi - h * (i as f64 + 0.5));
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    nodes
}

/// Uniform time nodes on [0, 2pi).
pub fn time_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_domain() -> Domain {
        let ls = LevelSet::new(
            |p| p[1] * p[1] + p[2] * p[2] + p[3] * p[3] - 1.0,
            |p| Point::new(0.0, 2.0 * p[1], 2.0 * p[2], 2.0 * p[3]),
            1e-8,
            Orientation::NormalLast,
        );
        let param = Parametrization::new(
            |u| {
                let (th, pol, ph) = (TAU * u[0], PI * u[1], TAU * u[2]);
                Point::new(th, pol.sin() * ph.cos(), pol.sin() * ph.sin(), pol.cos())
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

    #[test]
    fn periodic_coordinates_are_reduced() {
        let d = Domain::chart(
            "t",
            ["theta", "x", "y"],
            [
                CoordKind::Periodic,
                CoordKind::Interval { lo: -1.0, hi: 1.0 },
                CoordKind::Interval { lo: -1.0, hi: 1.0 },
            ],
        )
        .unwrap();
        let q = d.check(&Point::new(TAU + 0.5, 0.1, 0.2, 0.0)).unwrap();
        assert!((q[0] - 0.5).abs() < 1e-12);
        let q = d.check(&Point::new(-0.5, 0.1, 0.2, 0.0)).unwrap();
        assert!((q[0] - (TAU - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn interval_rejects_outside_slack() {
        let d = Domain::chart(
            "t",
            ["theta", "x", "y"],
            [
                CoordKind::Periodic,
                CoordKind::Interval { lo: -1.0, hi: 1.0 },
                CoordKind::Interval { lo: -1.0, hi: 1.0 },
            ],
        )
        .unwrap();
        assert!(d.check(&Point::new(0.0, 1.0 + 1e-12, 0.0, 0.0)).is_ok());
        assert!(matches!(
            d.check(&Point::new(0.0, 1.1, 0.0, 0.0)),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn level_set_rejects_off_constraint() {
        let d = sphere_domain();
        assert!(d.check(&Point::new(0.0, 0.0, 0.0, 1.0)).is_ok());
        assert!(d.check(&Point::new(0.0, 0.0, 0.0, 1.01)).is_err());
        let q = d.project(&Point::new(1.0, 0.3, 0.4, 1.5));
        assert!(d.check(&q).is_ok());
    }

    #[test]
    fn tangent_frame_is_orthonormal_and_tangent() {
        let d = sphere_domain();
        for p in d.sample(50, 3) {
            let f = d.tangent_frame(&p);
            let n = d.normal(&p).unwrap();
            for i in 0..3 {
                assert!((f[i].norm() - 1.0).abs() < 1e-12);
                assert!(f[i].dot(&n).abs() < 1e-12);
                for j in 0..i {
                    assert!(f[i].dot(&f[j]).abs() < 1e-12);
                }
            }
            let det = Matrix4::from_columns(&[f[0], f[1], f[2], n]).determinant();
            assert!(det > 0.0);
        }
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-7.0, -PI, 0.0, PI, 3.5, 13.0] {
            let w = wrap_angle(a);
            assert!(w > -PI - 1e-15 && w <= PI + 1e-15);
            assert!(((a - w) / TAU - ((a - w) / TAU).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn refined_grid_adds_boundary_nodes() {
        let d = sphere_domain();
        let plain = Grid::from_spec(&d, &GridSpec::uniform(16));
        let refined = Grid::from_spec(&d, &GridSpec::uniform(16).refined());
        assert_eq!(plain.len(), 16 * 16 * 16);
        assert!(refined.len() > plain.len());
    }
}
