use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3};

use super::domain::{Domain, Point};
use super::fd::{self, FdConfig};
use crate::error::{Error, Result};

pub type PointFn = dyn Fn(&Point) -> Result<Point> + Send + Sync;
pub type JacobianFn = dyn Fn(&Point) -> Result<Matrix4<f64>> + Send + Sync;
pub type LogFactorFn = dyn Fn(&Point) -> Result<f64> + Send + Sync;
pub type ImageLogFactorFn = dyn Fn(&Point, &Point) -> Result<f64> + Send + Sync;

/// Smooth map between domains with optional inverse, Jacobian and conformal factor.
#[derive(Clone)]
pub struct DiffMap {
    label: String,
    source: Arc<Domain>,
    target: Arc<Domain>,
    forward: Arc<PointFn>,
    inverse: Option<Arc<PointFn>>,
    inverse_seed: Option<Arc<PointFn>>,
    jacobian: Option<Arc<JacobianFn>>,
    log_factor: Option<Arc<LogFactorFn>>,
    image_log_factor: Option<Arc<ImageLogFactorFn>>,
    focus: Vec<Point>,
    fd: FdConfig,
}

impl fmt::Debug for DiffMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffMap")
            .field("label", &self.label)
            .field("source", &self.source.name())
            .field("target", &self.target.name())
            .field("inverse", &self.inverse.is_some())
            .field("jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl DiffMap {
    pub fn new(
        label: &str,
        source: Arc<Domain>,
        target: Arc<Domain>,
        forward: impl Fn(&Point) -> Result<Point> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.to_string(),
            source,
            target,
            forward: Arc::new(forward),
            inverse: None,
            inverse_seed: None,
            jacobian: None,
            log_factor: None,
            image_log_factor: None,
            focus: Vec::new(),
            fd: FdConfig::default(),
        }
    }

    pub fn identity(domain: Arc<Domain>) -> Self {
        Self::new("id", domain.clone(), domain, |p| Ok(*p))
            .with_inverse(|q| Ok(*q))
            .with_jacobian(|_| Ok(Matrix4::identity()))
            .with_log_factor(|_| Ok(0.0))
    }

    pub fn with_inverse(mut self, inv: impl Fn(&Point) -> Result<Point> + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inv));
        self
    }

    /// Starting point for Newton inversion when no inverse evaluator is supplied.
    pub fn with_inverse_seed(mut self, seed: impl Fn(&Point) -> Result<Point> + Send + Sync + 'static) -> Self {
        self.inverse_seed = Some(Arc::new(seed));
        self
    }

    pub fn with_jacobian(mut self, j: impl Fn(&Point) -> Result<Matrix4<f64>> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    /// Known conformal factor `f` with `F* alpha = e^f alpha` for the target's contact form.
    pub fn with_log_factor(mut self, f: impl Fn(&Point) -> Result<f64> + Send + Sync + 'static) -> Self {
        self.log_factor = Some(Arc::new(f));
        self
    }

    /// Conformal factor given as a function of a point and its image, `f(p, F(p))`.
    pub fn with_image_log_factor(
        mut self,
        f: impl Fn(&Point, &Point) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        let f: Arc<ImageLogFactorFn> = Arc::new(f);
        let (fw, f2) = (self.forward.clone(), f.clone());
        self.log_factor = Some(Arc::new(move |p| f2(p, &fw(p)?)));
        self.image_log_factor = Some(f);
        self
    }

    /// Conformal factor at `p` when `F(p)` is already known.
    pub fn log_factor_with_image(&self, p: &Point, image: &Point) -> Option<Result<f64>> {
        match (&self.image_log_factor, &self.log_factor) {
            (Some(f), _) => Some(f(p, image)),
            (None, Some(f)) => Some(f(p)),
            (None, None) => None,
        }
    }

    /// Points where the map differs from the identity; used to seed cross-check samples.
    pub fn with_focus(mut self, focus: Vec<Point>) -> Self {
        self.focus = focus;
        self
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> &Arc<Domain> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Domain> {
        &self.target
    }

    pub fn focus(&self) -> &[Point] {
        &self.focus
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn analytic_log_factor(&self) -> Option<&Arc<LogFactorFn>> {
        self.log_factor.as_ref()
    }

    pub fn apply(&self, p: &Point) -> Result<Point> {
        let q = self.source.check(p)?;
        Ok(self.target.reduce(&(self.forward)(&q)?))
    }

    /// Forward evaluation without validating the input point.
    pub fn apply_raw(&self, p: &Point) -> Result<Point> {
        (self.forward)(p)
    }

    pub fn apply_inverse(&self, q: &Point) -> Result<Point> {
        let q = self.target.check(q)?;
        match &self.inverse {
            Some(inv) => Ok(self.source.reduce(&inv(&q)?)),
            None => self.newton_inverse(&q),
        }
    }

    /// Inverse without validating `q`; Newton iterations still project onto the source.
    pub fn apply_inverse_raw(&self, q: &Point) -> Result<Point> {
        match &self.inverse {
            Some(inv) => inv(q),
            None => self.newton_inverse(q),
        }
    }

    /// Ambient Jacobian at `p`; column `j` is the image of the `j`-th source axis.
    pub fn jacobian(&self, p: &Point) -> Result<Matrix4<f64>> {
        let q = self.source.check(p)?;
        match &self.jacobian {
            Some(j) => j(&q),
            None => fd::jacobian(
                |x| (self.forward)(x),
                &q,
                self.source.ambient_dim(),
                &self.fd,
                |a, b| self.target.difference(a, b),
            ),
        }
    }

    /// Jacobian without validating the input point (finite differences leave level sets).
    pub fn jacobian_raw(&self, p: &Point) -> Result<Matrix4<f64>> {
        match &self.jacobian {
            Some(j) => j(p),
            None => fd::jacobian(
                |x| (self.forward)(x),
                p,
                self.source.ambient_dim(),
                &self.fd,
                |a, b| self.target.difference(a, b),
            ),
        }
    }

    /// Differential applied to a tangent vector.
    pub fn push_vector(&self, p: &Point, v: &Point) -> Result<Point> {
        let q = self.source.check(p)?;
        if self.jacobian.is_some() {
            return Ok(self.jacobian(&q)? * v);
        }
        // directional difference is cheaper than a full Jacobian
        let scale = v.norm();
        if scale == 0.0 {
            return Ok(Point::zeros());
        }
        let dir = v / scale;
        let d = fd::derivative_vec(
            |s| (self.forward)(&(q + dir * s)),
            0.0,
            &self.fd,
            |a, b| self.target.difference(a, b),
        )?;
        Ok(d * scale)
    }

    /// Gauss-Newton inversion restricted to the source tangent space.
    fn newton_inverse(&self, q: &Point) -> Result<Point> {
        let mut p = match &self.inverse_seed {
            Some(seed) => seed(q)?,
            None => *q,
        };
        p = self.source.project(&p);
        let mut res = f64::INFINITY;
        for _ in 0..60 {
            let fp = (self.forward)(&p)?;
            let r = self.target.difference(q, &fp);
            res = r.norm();
            if res < 1e-13 {
                break;
            }
            let frame = self.source.tangent_frame(&p);
            let jac = match &self.jacobian {
                Some(j) => j(&p)?,
                None => fd::jacobian(
                    |x| (self.forward)(x),
                    &p,
                    self.source.ambient_dim(),
                    &self.fd,
                    |a, b| self.target.difference(a, b),
                )?,
            };
            let cols: Vec<Point> = frame.iter().map(|e| jac * e).collect();
            let mut ata = Matrix3::zeros();
            let mut atb = Vector3::zeros();
            for i in 0..3 {
                atb[i] = cols[i].dot(&r);
                for j in 0..3 {
                    ata[(i, j)] = cols[i].dot(&cols[j]);
                }
            }
            let Some(delta) = ata.lu().solve(&atb) else {
                return Err(Error::Inversion { residual: res });
            };
            p = self.source.project(&(p + frame[0] * delta[0] + frame[1] * delta[1] + frame[2] * delta[2]));
        }
        if res > 1e-10 {
            return Err(Error::Inversion { residual: res });
        }
        Ok(p)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &DiffMap) -> Result<DiffMap> {
        if !inner.target.same_as(&self.source) {
            return Err(Error::Usage(format!(
                "cannot compose {} after {}: domains `{}` and `{}` differ",
                self.label,
                inner.label,
                inner.target.name(),
                self.source.name()
            )));
        }
        let (outer, inn) = (self.clone(), inner.clone());
        let mut out = DiffMap::new(
            &format!("{}∘{}", self.label, inner.label),
            inner.source.clone(),
            self.target.clone(),
            move |p| outer.apply(&inn.apply_raw(p)?),
        );
        if self.inverse.is_some() && inner.inverse.is_some() {
            let (outer, inn) = (self.clone(), inner.clone());
            out = out.with_inverse(move |q| inn.apply_inverse(&outer.apply_inverse(q)?));
        }
        if self.jacobian.is_some() && inner.jacobian.is_some() {
            let (outer, inn) = (self.clone(), inner.clone());
            out = out.with_jacobian(move |p| {
                let mid = inn.apply_raw(p)?;
                Ok(outer.jacobian(&mid)? * inn.jacobian(p)?)
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldcalc::domain::CoordKind;

    fn plane() -> Arc<Domain> {
        Arc::new(
            Domain::chart(
                "plane",
                ["theta", "x", "y"],
                [
                    CoordKind::Periodic,
                    CoordKind::Interval { lo: -5.0, hi: 5.0 },
                    CoordKind::Interval { lo: -5.0, hi: 5.0 },
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn newton_inverts_smooth_map() {
        let d = plane();
        let f = DiffMap::new("shear", d.clone(), d, |p| {
            Ok(Point::new(p[0] + 0.1 * p[1], p[1] + 0.2 * p[2] * p[2], p[2] + 0.1 * p[1].sin(), 0.0))
        });
        let p = Point::new(1.0, 0.3, -0.4, 0.0);
        let q = f.apply(&p).unwrap();
        let back = f.apply_inverse(&q).unwrap();
        assert!((back - p).norm() < 1e-10);
    }

    #[test]
    fn fd_jacobian_unwraps_periodic_target() {
        let d = plane();
        let f = DiffMap::new("shift", d.clone(), d, |p| Ok(Point::new(p[0] + 3.0, p[1], p[2], 0.0)));
        // theta + 3 crosses 2pi for theta near 3.3
        let j = f.jacobian(&Point::new(3.2831853, 0.0, 0.0, 0.0)).unwrap();
        assert!((j[(0, 0)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn compose_with_identity() {
        let d = plane();
        let f = DiffMap::new("r", d.clone(), d.clone(), |p| Ok(Point::new(p[0], -p[2], p[1], 0.0)))
            .with_inverse(|q| Ok(Point::new(q[0], q[2], -q[1], 0.0)));
        let g = f.compose(&DiffMap::identity(d)).unwrap();
        let p = Point::new(0.5, 1.0, 2.0, 0.0);
        assert!((g.apply(&p).unwrap() - f.apply(&p).unwrap()).norm() < 1e-15);
        assert!((g.apply_inverse(&f.apply(&p).unwrap()).unwrap() - p).norm() < 1e-12);
    }
}
