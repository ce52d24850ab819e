use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::contact::{ham_to_field, ContactForm};
use crate::error::{coords, Error, Result};
use crate::fieldcalc::flow::{integrate, integrate_flow, Augmented, FlowConfig};
use crate::fieldcalc::sweep::{argmax, par_map};
use crate::fieldcalc::{reduce_time, Domain, Point, ScalarField, VectorField};

/// Flow, inverse and conformal factor of an isotopy. Times are not reduced, so
/// evaluations slightly outside `[0, 2pi]` follow the isotopy itself.
pub trait LoopFlow: Send + Sync {
    fn flow(&self, p: &Point, t: f64) -> Result<Point>;
    fn inverse(&self, q: &Point, t: f64) -> Result<Point>;
    /// `f_t(p)` with `phi_t^* alpha = e^{f_t} alpha`.
    fn log_factor(&self, p: &Point, t: f64) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Hamiltonian,
    Exact,
    Composed,
    Conjugated,
    Concatenated,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureReport {
    pub samples: usize,
    pub max_distance: f64,
    pub tolerance: f64,
    pub passes: bool,
    pub worst: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopConfig {
    pub flow: FlowConfig,
    pub closure_samples: usize,
    pub closure_tolerance: f64,
    /// Absolute tolerance of the oracle cross-check, scaled by `1 + |H|`.
    pub oracle_tolerance: f64,
    pub oracle_samples: usize,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig::default(),
            closure_samples: 16,
            closure_tolerance: 1e-6,
            oracle_tolerance: 1e-5,
            oracle_samples: 6,
            seed: 7,
        }
    }
}

/// A 2pi-periodic contact isotopy with its generating Hamiltonian.
#[derive(Clone)]
pub struct ContactLoop {
    pub(crate) label: String,
    pub(crate) alpha: ContactForm,
    pub(crate) ham: ScalarField,
    pub(crate) flow: Arc<dyn LoopFlow>,
    pub(crate) provenance: Provenance,
    pub(crate) smooth: bool,
    pub(crate) closure: Option<ClosureReport>,
    pub(crate) focus: Vec<Point>,
    pub(crate) time_scale: f64,
    pub(crate) config: LoopConfig,
}

impl fmt::Debug for ContactLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContactLoop")
            .field("label", &self.label)
            .field("provenance", &self.provenance)
            .field("smooth", &self.smooth)
            .finish()
    }
}

impl ContactLoop {
    /// Loop with a closed-form flow.
    pub fn exact(label: &str, alpha: &ContactForm, ham: ScalarField, flow: Arc<dyn LoopFlow>) -> Result<Self> {
        crate::fieldcalc::fields::same_domain(alpha.domain(), ham.domain())?;
        Ok(Self {
            label: label.to_string(),
            alpha: alpha.clone(),
            ham,
            flow,
            provenance: Provenance::Exact,
            smooth: true,
            closure: None,
            focus: Vec::new(),
            time_scale: 1.0,
            config: LoopConfig::default(),
        })
    }

    /// Constant loop at the identity.
    pub fn trivial(alpha: &ContactForm) -> Self {
        let ham = ScalarField::constant(alpha.domain().clone(), 0.0);
        Self::exact("id", alpha, ham, Arc::new(Identity)).expect("same domain")
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn with_focus(mut self, focus: Vec<Point>) -> Self {
        self.focus = focus;
        self
    }

    pub fn with_config(mut self, config: LoopConfig) -> Self {
        self.config = config;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn alpha(&self) -> &ContactForm {
        &self.alpha
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.alpha.domain()
    }

    pub fn hamiltonian(&self) -> &ScalarField {
        &self.ham
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn closure(&self) -> Option<&ClosureReport> {
        self.closure.as_ref()
    }

    /// Points near which the loop differs from its building blocks.
    pub fn focus(&self) -> &[Point] {
        &self.focus
    }

    /// Rough inverse time scale of the flow; concatenation multiplies it.
    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }


    /// `phi_t(p)` with `t` reduced to `[0, 2pi)`.
    pub fn flow(&self, p: &Point, t: f64) -> Result<Point> {
        let q = self.domain().check(p)?;
        Ok(self.domain().project(&self.flow.flow(&q, reduce_time(t))?))
    }

    /// `phi_t(p)` for unreduced `t`; used for closure and time derivatives.
    pub fn flow_unreduced(&self, p: &Point, t: f64) -> Result<Point> {
        let q = self.domain().check(p)?;
        Ok(self.domain().project(&self.flow.flow(&q, t)?))
    }

    pub fn inverse(&self, q: &Point, t: f64) -> Result<Point> {
        let q = self.domain().check(q)?;
        Ok(self.domain().project(&self.flow.inverse(&q, reduce_time(t))?))
    }

    pub fn log_factor(&self, p: &Point, t: f64) -> Result<f64> {
        let q = self.domain().check(p)?;
        self.flow.log_factor(&q, reduce_time(t))
    }

    pub fn ham_at(&self, p: &Point, t: f64) -> Result<f64> {
        self.ham.eval(p, t)
    }

    /// Generating contact vector field `X_t`.
    pub fn field(&self) -> Result<VectorField> {
        ham_to_field(&self.alpha, &self.ham)
    }
}

struct Identity;

impl LoopFlow for Identity {
    fn flow(&self, p: &Point, _t: f64) -> Result<Point> {
        Ok(*p)
    }
    fn inverse(&self, q: &Point, _t: f64) -> Result<Point> {
        Ok(*q)
    }
    fn log_factor(&self, _p: &Point, _t: f64) -> Result<f64> {
        Ok(0.0)
    }
}

pub type ExactPointFn = dyn Fn(&Point, f64) -> Result<Point> + Send + Sync;
pub type ExactScalarFn = dyn Fn(&Point, f64) -> Result<f64> + Send + Sync;

/// Flow given by closed-form evaluators.
pub struct ExactFlow {
    pub flow: Box<ExactPointFn>,
    pub inverse: Box<ExactPointFn>,
    pub log_factor: Box<ExactScalarFn>,
}

impl ExactFlow {
    /// Strict flow (`f_t = 0`).
    pub fn strict(
        flow: impl Fn(&Point, f64) -> Result<Point> + Send + Sync + 'static,
        inverse: impl Fn(&Point, f64) -> Result<Point> + Send + Sync + 'static,
    ) -> Self {
        Self {
            flow: Box::new(flow),
            inverse: Box::new(inverse),
            log_factor: Box::new(|_, _| Ok(0.0)),
        }
    }
}

impl LoopFlow for ExactFlow {
    fn flow(&self, p: &Point, t: f64) -> Result<Point> {
        (self.flow)(p, t)
    }
    fn inverse(&self, q: &Point, t: f64) -> Result<Point> {
        (self.inverse)(q, t)
    }
    fn log_factor(&self, p: &Point, t: f64) -> Result<f64> {
        (self.log_factor)(p, t)
    }
}

/// RK4 flow of `X_H`, with the conformal factor integrated from the rate `R_alpha H`.
pub struct IntegratedFlow {
    alpha: ContactForm,
    ham: ScalarField,
    field: VectorField,
    cfg: FlowConfig,
}

impl IntegratedFlow {
    pub fn new(alpha: &ContactForm, ham: &ScalarField, cfg: FlowConfig) -> Result<Self> {
        Ok(Self {
            alpha: alpha.clone(),
            ham: ham.clone(),
            field: ham_to_field(alpha, ham)?,
            cfg,
        })
    }

    fn run(&self, p: &Point, t: f64) -> Result<(Point, f64)> {
        let rhs = Augmented {
            field: &self.field,
            rate: |x: &Point, s: f64| self.alpha.reeb_derivative_raw(&self.ham, x, s),
        };
        integrate(&rhs, p, 0.0, t, &self.cfg)
    }
}

impl LoopFlow for IntegratedFlow {
    fn flow(&self, p: &Point, t: f64) -> Result<Point> {
        integrate_flow(&self.field, p, 0.0, t, &self.cfg)
    }
    fn inverse(&self, q: &Point, t: f64) -> Result<Point> {
        integrate_flow(&self.field, q, t, 0.0, &self.cfg)
    }
    fn log_factor(&self, p: &Point, t: f64) -> Result<f64> {
        Ok(self.run(p, t)?.1)
    }
}

/// Isotopy generated by `H`, closure recorded but not enforced.
pub fn path_from_ham(alpha: &ContactForm, ham: &ScalarField, config: &LoopConfig) -> Result<ContactLoop> {
    crate::fieldcalc::fields::same_domain(alpha.domain(), ham.domain())?;
    let flow = IntegratedFlow::new(alpha, ham, config.flow)?;
    let mut l = ContactLoop {
        label: "loop(H)".into(),
        alpha: alpha.clone(),
        ham: ham.clone(),
        flow: Arc::new(flow),
        provenance: Provenance::Hamiltonian,
        smooth: true,
        closure: None,
        focus: Vec::new(),
        time_scale: 1.0,
        config: *config,
    };
    let samples = alpha.domain().sample(config.closure_samples, config.seed);
    l.closure = Some(check_closure(&l, &samples, config.closure_tolerance)?);
    Ok(l)
}

pub fn loop_from_ham(alpha: &ContactForm, ham: &ScalarField) -> Result<ContactLoop> {
    loop_from_ham_with(alpha, ham, &LoopConfig::default())
}

pub fn loop_from_ham_with(alpha: &ContactForm, ham: &ScalarField, config: &LoopConfig) -> Result<ContactLoop> {
    let l = path_from_ham(alpha, ham, config)?;
    let c = l.closure.as_ref().unwrap();
    if !c.passes {
        return Err(Error::NotALoop {
            closure: c.max_distance,
        });
    }
    Ok(l)
}

/// `max dist(phi_2pi(p), p)` over the samples.
pub fn check_closure(l: &ContactLoop, samples: &[Point], tol: f64) -> Result<ClosureReport> {
    let dom = l.domain().clone();
    let d = par_map(samples, |p| {
        let q = dom.check(p)?;
        match l.flow_unreduced(&q, TAU) {
            Ok(e) => Ok(dom.distance(&e, &q)),
            Err(Error::Escape { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    })?;
    let (i, m) = argmax(&d).unwrap_or((0, 0.0));
    Ok(ClosureReport {
        samples: samples.len(),
        max_distance: m,
        tolerance: tol,
        passes: m < tol,
        worst: samples.get(i).map(coords).unwrap_or_default(),
    })
}

/// Hamiltonian recovered from the flow alone: `H_t(p) = alpha_p(d/ds phi_s(q))` at `s = t`,
/// `q = phi_t^{-1}(p)`, with a fourth-order central difference in time.
pub fn extract_hamiltonian(l: &ContactLoop) -> ScalarField {
    let lp = l.clone();
    let dom = l.domain().clone();
    ScalarField::from_fn(dom, false, move |p, t| extract_at(&lp, p, t))
}

pub(crate) fn extract_at(l: &ContactLoop, p: &Point, t: f64) -> Result<f64> {
    let dom = l.domain();
    let q = l.inverse(p, t)?;
    let h = 2e-3 / l.time_scale.max(1.0);
    let t = reduce_time(t);
    let f = |s: f64| l.flow_unreduced(&q, t + s);
    let d1 = dom.difference(&f(h)?, &f(-h)?);
    let d2 = dom.difference(&f(2.0 * h)?, &f(-2.0 * h)?);
    let v = (d1 * 8.0 - d2) / (12.0 * h);
    let at = l.flow(&q, t)?;
    l.alpha.value(&at, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::verify_contact;
    use crate::fieldcalc::{CoordKind, Grid, GridSpec, OneForm};
    use nalgebra::Matrix4;

    fn alpha0() -> ContactForm {
        let d = Arc::new(
            Domain::chart(
                "s1xd2",
                ["theta", "x", "y"],
                [
                    CoordKind::Periodic,
                    CoordKind::Interval { lo: -1.0, hi: 1.0 },
                    CoordKind::Interval { lo: -1.0, hi: 1.0 },
                ],
            )
            .unwrap()
            .with_region(|p| p[1] * p[1] + p[2] * p[2] - 1.0),
        );
        let w = OneForm::new(d.clone(), |p| Point::new(1.0, -p[2], p[1], 0.0)).with_partials(|_| {
            let mut m = Matrix4::zeros();
            m[(1, 2)] = -1.0;
            m[(2, 1)] = 1.0;
            m
        });
        verify_contact(&w, &Grid::from_spec(&d, &GridSpec::uniform(8))).unwrap()
    }

    #[test]
    fn reeb_rotation_closes() {
        let a = alpha0();
        let l = loop_from_ham(&a, &ScalarField::constant(a.domain().clone(), 1.0)).unwrap();
        assert!(l.closure().unwrap().max_distance < 1e-9);
        let p = Point::new(0.5, 0.2, 0.1, 0.0);
        assert!(l.log_factor(&p, 2.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn translation_is_not_a_loop() {
        let a = alpha0();
        let h = ScalarField::autonomous(a.domain().clone(), |p| 0.3 * p[1])
            .with_gradient(|_, _| Point::new(0.0, 0.3, 0.0, 0.0));
        match loop_from_ham(&a, &h) {
            Err(Error::NotALoop { closure }) => assert!(closure > 0.1),
            other => panic!("{other:?}"),
        }
        let path = path_from_ham(&a, &h, &LoopConfig::default()).unwrap();
        assert!(!path.closure().unwrap().passes);
    }

    #[test]
    fn extraction_recovers_rotation_hamiltonian() {
        let a = alpha0();
        let h = ScalarField::autonomous(a.domain().clone(), |p| p[1] * p[1] + p[2] * p[2])
            .with_gradient(|p, _| Point::new(0.0, 2.0 * p[1], 2.0 * p[2], 0.0));
        let l = loop_from_ham(&a, &h).unwrap();
        let e = extract_hamiltonian(&l);
        for (p, t) in [(Point::new(0.3, 0.4, -0.2, 0.0), 1.1), (Point::new(5.0, -0.1, 0.6, 0.0), 0.0)] {
            assert!((e.eval(&p, t).unwrap() - h.eval(&p, t).unwrap()).abs() < 1e-8);
        }
    }
}
