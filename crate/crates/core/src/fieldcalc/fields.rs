use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix4;

use super::domain::{Domain, Point};
use super::fd::{self, FdConfig};
use crate::error::{Error, Result};

pub type ScalarFn = dyn Fn(&Point, f64) -> Result<f64> + Send + Sync;
pub type VectorFn = dyn Fn(&Point, f64) -> Result<Point> + Send + Sync;
pub type MatrixFn = dyn Fn(&Point, f64) -> Result<Matrix4<f64>> + Send + Sync;
pub type TwoFormFn = dyn Fn(&Point, f64) -> Result<TwoFormValue> + Send + Sync;

/// Loop time lives on R/2piZ.
#[inline]
pub fn reduce_time(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn ensure_same(a: &Domain, b: &Domain) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "domain mismatch: `{}` vs `{}`",
            a.name(),
            b.name()
        )))
    }
}

/// Real function on a domain, optionally 2pi-periodic in time.
#[derive(Clone)]
pub struct ScalarField {
    domain: Arc<Domain>,
    f: Arc<ScalarFn>,
    grad: Option<Arc<VectorFn>>,
    autonomous: bool,
    fd: FdConfig,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("domain", &self.domain.name())
            .field("autonomous", &self.autonomous)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_fn(
        domain: Arc<Domain>,
        autonomous: bool,
        f: impl Fn(&Point, f64) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            f: Arc::new(f),
            grad: None,
            autonomous,
            fd: FdConfig::default(),
        }
    }

    pub fn autonomous(domain: Arc<Domain>, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_fn(domain, true, move |p, _| Ok(f(p)))
    }

    pub fn time_dependent(
        domain: Arc<Domain>,
        f: impl Fn(&Point, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::from_fn(domain, false, move |p, t| Ok(f(p, t)))
    }

    pub fn constant(domain: Arc<Domain>, c: f64) -> Self {
        Self::autonomous(domain, move |_| c).with_gradient(|_, _| Point::zeros())
    }

    pub fn with_gradient(mut self, g: impl Fn(&Point, f64) -> Point + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(move |p, t| Ok(g(p, t))));
        self
    }

    pub fn with_gradient_fn(
        mut self,
        g: impl Fn(&Point, f64) -> Result<Point> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn fd_config(&self) -> FdConfig {
        self.fd
    }

    pub fn eval(&self, p: &Point, t: f64) -> Result<f64> {
        let q = self.domain.check(p)?;
        (self.f)(&q, reduce_time(t))
    }

    /// Evaluation without domain validation (used for off-constraint finite differences).
    pub fn eval_raw(&self, p: &Point, t: f64) -> Result<f64> {
        (self.f)(p, reduce_time(t))
    }

    /// Ambient gradient, analytic when available.
    pub fn gradient(&self, p: &Point, t: f64) -> Result<Point> {
        let q = self.domain.check(p)?;
        let t = reduce_time(t);
        match &self.grad {
            Some(g) => g(&q, t),
            None => fd::gradient(|x| (self.f)(x, t), &q, self.domain.ambient_dim(), &self.fd),
        }
    }

    /// Gradient without domain validation.
    pub fn gradient_raw(&self, p: &Point, t: f64) -> Result<Point> {
        let t = reduce_time(t);
        match &self.grad {
            Some(g) => g(p, t),
            None => fd::gradient(|x| (self.f)(x, t), p, self.domain.ambient_dim(), &self.fd),
        }
    }

    /// Same field frozen at time `t0`.
    pub fn at_time(&self, t0: f64) -> ScalarField {
        let inner = self.clone();
        let mut out = ScalarField::from_fn(self.domain.clone(), true, move |p, _| inner.eval_raw(p, t0));
        if self.grad.is_some() {
            let inner = self.clone();
            out.grad = Some(Arc::new(move |p, _| inner.gradient_raw(p, t0)));
        }
        out.fd = self.fd;
        out
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        ensure_same(&self.domain, &other.domain)?;
        let (f1, f2) = (self.clone(), other.clone());
        let mut out = ScalarField::from_fn(
            self.domain.clone(),
            self.autonomous && other.autonomous,
            move |p, t| Ok(a * f1.eval_raw(p, t)? + b * f2.eval_raw(p, t)?),
        );
        if self.grad.is_some() && other.grad.is_some() {
            let (f1, f2) = (self.clone(), other.clone());
            out.grad = Some(Arc::new(move |p, t| Ok(f1.gradient_raw(p, t)? * a + f2.gradient_raw(p, t)? * b)));
        }
        Ok(out)
    }
}

/// Tangent vector field given by ambient components.
#[derive(Clone)]
pub struct VectorField {
    domain: Arc<Domain>,
    f: Arc<VectorFn>,
    jac: Option<Arc<MatrixFn>>,
    autonomous: bool,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("domain", &self.domain.name())
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl VectorField {
    pub fn from_fn(
        domain: Arc<Domain>,
        autonomous: bool,
        f: impl Fn(&Point, f64) -> Result<Point> + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            f: Arc::new(f),
            jac: None,
            autonomous,
        }
    }

    pub fn autonomous(domain: Arc<Domain>, f: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        Self::from_fn(domain, true, move |p, _| Ok(f(p)))
    }

    pub fn time_dependent(
        domain: Arc<Domain>,
        f: impl Fn(&Point, f64) -> Point + Send + Sync + 'static,
    ) -> Self {
        Self::from_fn(domain, false, move |p, t| Ok(f(p, t)))
    }

    pub fn zero(domain: Arc<Domain>) -> Self {
        Self::autonomous(domain, |_| Point::zeros())
    }

    /// Coordinate field `d/dx_i`.
    pub fn coordinate(domain: Arc<Domain>, i: usize) -> Self {
        Self::autonomous(domain, move |_| Point::ith(i, 1.0))
    }

    pub fn with_jacobian(mut self, j: impl Fn(&Point, f64) -> Matrix4<f64> + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(move |p, t| Ok(j(p, t))));
        self
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn eval(&self, p: &Point, t: f64) -> Result<Point> {
        let q = self.domain.check(p)?;
        (self.f)(&q, reduce_time(t))
    }

    pub fn eval_raw(&self, p: &Point, t: f64) -> Result<Point> {
        (self.f)(p, reduce_time(t))
    }

    pub fn jacobian(&self, p: &Point, t: f64) -> Result<Matrix4<f64>> {
        let q = self.domain.check(p)?;
        let t = reduce_time(t);
        match &self.jac {
            Some(j) => j(&q, t),
            None => fd::jacobian(
                |x| (self.f)(x, t),
                &q,
                self.domain.ambient_dim(),
                &FdConfig::default(),
                |a, b| a - b,
            ),
        }
    }

    /// Normal component relative to the level set (zero on charts).
    pub fn tangency_defect(&self, p: &Point, t: f64) -> Result<f64> {
        let v = self.eval(p, t)?;
        Ok(match self.domain.normal(p) {
            Some(n) => n.dot(&v).abs(),
            None => 0.0,
        })
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> Result<VectorField> {
        ensure_same(&self.domain, &other.domain)?;
        let (f1, f2) = (self.clone(), other.clone());
        Ok(VectorField::from_fn(
            self.domain.clone(),
            self.autonomous && other.autonomous,
            move |p, t| Ok(f1.eval_raw(p, t)? * a + f2.eval_raw(p, t)? * b),
        ))
    }
}

/// Differential 1-form given by ambient coefficients; `partials[(i, j)] = d a_i / d x_j`.
#[derive(Clone)]
pub struct OneForm {
    domain: Arc<Domain>,
    coef: Arc<VectorFn>,
    partials: Option<Arc<MatrixFn>>,
    fd: FdConfig,
}

impl fmt::Debug for OneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OneForm")
            .field("domain", &self.domain.name())
            .field("analytic_partials", &self.partials.is_some())
            .finish()
    }
}

impl OneForm {
    pub fn from_fn(
        domain: Arc<Domain>,
        coef: impl Fn(&Point, f64) -> Result<Point> + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            coef: Arc::new(coef),
            partials: None,
            fd: FdConfig::default(),
        }
    }

    /// Time-independent form with infallible coefficients.
    pub fn new(domain: Arc<Domain>, coef: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        Self::from_fn(domain, move |p, _| Ok(coef(p)))
    }

    pub fn with_partials(mut self, d: impl Fn(&Point) -> Matrix4<f64> + Send + Sync + 'static) -> Self {
        self.partials = Some(Arc::new(move |p, _| Ok(d(p))));
        self
    }

    pub fn with_partials_fn(
        mut self,
        d: impl Fn(&Point, f64) -> Result<Matrix4<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Arc::new(d));
        self
    }

    /// Drops analytic partials so derivatives go through finite differences.
    pub fn without_partials(mut self) -> Self {
        self.partials = None;
        self
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn fd_config(&self) -> FdConfig {
        self.fd
    }

    pub fn eval(&self, p: &Point, t: f64) -> Result<Point> {
        let q = self.domain.check(p)?;
        (self.coef)(&q, reduce_time(t))
    }

    pub fn eval_raw(&self, p: &Point, t: f64) -> Result<Point> {
        (self.coef)(p, reduce_time(t))
    }

    pub fn pair(&self, p: &Point, t: f64, v: &Point) -> Result<f64> {
        Ok(self.eval(p, t)?.dot(v))
    }

    pub fn partials(&self, p: &Point, t: f64) -> Result<Matrix4<f64>> {
        let q = self.domain.check(p)?;
        self.partials_raw(&q, t)
    }

    pub fn partials_raw(&self, p: &Point, t: f64) -> Result<Matrix4<f64>> {
        let t = reduce_time(t);
        match &self.partials {
            Some(d) => d(p, t),
            None => fd::jacobian(
                |x| (self.coef)(x, t),
                p,
                self.domain.ambient_dim(),
                &self.fd,
                |a, b| a - b,
            ),
        }
    }
}

/// Independent components of an antisymmetric 2-tensor on R^4, ordered
/// `(01, 02, 03, 12, 13, 23)`. Three-dimensional domains only use `01, 02, 12`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TwoFormValue(pub [f64; 6]);

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

impl TwoFormValue {
    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let mut c = [0.0; 6];
        for (k, (i, j)) in PAIRS.iter().enumerate() {
            c[k] = m[(*i, *j)];
        }
        Self(c)
    }

    /// Builds `d a` from the partials of a 1-form: component `ij` is `d_i a_j - d_j a_i`.
    pub fn curl(partials: &Matrix4<f64>) -> Self {
        let mut c = [0.0; 6];
        for (k, (i, j)) in PAIRS.iter().enumerate() {
            c[k] = partials[(*j, *i)] - partials[(*i, *j)];
        }
        Self(c)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b, s) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let k = PAIRS.iter().position(|&(x, y)| x == a && y == b).unwrap();
        s * self.0[k]
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for (k, (i, j)) in PAIRS.iter().enumerate() {
            m[(*i, *j)] = self.0[k];
            m[(*j, *i)] = -self.0[k];
        }
        m
    }

    pub fn apply(&self, u: &Point, v: &Point) -> f64 {
        let mut s = 0.0;
        for (k, (i, j)) in PAIRS.iter().enumerate() {
            s += self.0[k] * (u[*i] * v[*j] - u[*j] * v[*i]);
        }
        s
    }

    /// Interior product: `(i_u W)_j = sum_i u_i W_ij`.
    pub fn contract(&self, u: &Point) -> Point {
        self.to_matrix().transpose() * u
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone)]
pub struct TwoForm {
    domain: Arc<Domain>,
    comps: Arc<TwoFormFn>,
}

impl fmt::Debug for TwoForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoForm").field("domain", &self.domain.name()).finish()
    }
}

impl TwoForm {
    pub fn from_fn(
        domain: Arc<Domain>,
        comps: impl Fn(&Point, f64) -> Result<TwoFormValue> + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            comps: Arc::new(comps),
        }
    }

    pub fn new(domain: Arc<Domain>, comps: impl Fn(&Point) -> TwoFormValue + Send + Sync + 'static) -> Self {
        Self::from_fn(domain, move |p, _| Ok(comps(p)))
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn eval(&self, p: &Point, t: f64) -> Result<TwoFormValue> {
        let q = self.domain.check(p)?;
        (self.comps)(&q, reduce_time(t))
    }

    pub fn eval_raw(&self, p: &Point, t: f64) -> Result<TwoFormValue> {
        (self.comps)(p, reduce_time(t))
    }

    pub fn apply(&self, p: &Point, t: f64, u: &Point, v: &Point) -> Result<f64> {
        Ok(self.eval(p, t)?.apply(u, v))
    }
}

pub(crate) fn same_domain(a: &Domain, b: &Domain) -> Result<()> {
    ensure_same(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldcalc::domain::CoordKind;

    fn dom() -> Arc<Domain> {
        Arc::new(
            Domain::chart(
                "box",
                ["theta", "x", "y"],
                [
                    CoordKind::Periodic,
                    CoordKind::Interval { lo: -1.0, hi: 1.0 },
                    CoordKind::Interval { lo: -1.0, hi: 1.0 },
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn twoform_value_antisymmetry_is_structural() {
        let w = TwoFormValue([1.0, 2.0, 0.0, 3.0, 0.0, 0.0]);
        assert_eq!(w.get(1, 0), -1.0);
        assert_eq!(w.get(2, 1), -3.0);
        assert_eq!(w.get(2, 2), 0.0);
        let u = Point::new(0.3, -1.2, 0.5, 0.0);
        assert!(w.apply(&u, &u).abs() < 1e-15);
        assert!(w.contract(&u).dot(&u).abs() < 1e-15);
        assert_eq!(TwoFormValue::from_matrix(&w.to_matrix()), w);
    }

    #[test]
    fn time_dependent_scalar_is_periodic() {
        let h = ScalarField::time_dependent(dom(), |p, t| p[1] * t.sin() + t.cos());
        let p = Point::new(0.1, 0.4, 0.2, 0.0);
        for t in [0.0, 0.7, 3.0, 6.0] {
            let a = h.eval(&p, t).unwrap();
            let b = h.eval(&p, t + TAU).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn combine_rejects_mismatched_domains() {
        let other = Arc::new(
            Domain::chart(
                "other",
                ["a", "b", "c"],
                [CoordKind::Periodic, CoordKind::Periodic, CoordKind::Periodic],
            )
            .unwrap(),
        );
        let a = ScalarField::constant(dom(), 1.0);
        let b = ScalarField::constant(other, 1.0);
        assert!(matches!(a.combine(1.0, &b, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let h = ScalarField::autonomous(dom(), |p| p[1] * p[2] + p[0].sin());
        let ha = h.clone().with_gradient(|p, _| Point::new(p[0].cos(), p[2], p[1], 0.0));
        let p = Point::new(0.4, 0.2, -0.3, 0.0);
        let d = h.gradient(&p, 0.0).unwrap() - ha.gradient(&p, 0.0).unwrap();
        assert!(d.norm() < 1e-9);
    }
}
