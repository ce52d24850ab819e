//! Contact condition, Reeb fields and the Hamiltonian dictionary.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{coords, Error, Result};
use crate::fieldcalc::linalg::{axial, frame_components, from_frame, solve3};
use crate::fieldcalc::sweep::{argmax, argmin, par_map};
use crate::fieldcalc::{
    contract_1, exterior_derivative, lie_derivative_oneform, proportionality, Domain, Grid, OneForm, Point,
    ScalarField, TwoForm, VectorField,
};

/// Condition numbers above this are reported as warnings.
pub const CONDITION_WARNING: f64 = 1e8;

#[derive(Clone, Debug, Serialize)]
pub struct ContactCertificate {
    pub grid: String,
    pub nodes: usize,
    /// Smallest `|alpha ^ d alpha|` against an oriented orthonormal frame.
    pub min_margin: f64,
    pub max_margin: f64,
    pub sign: i8,
    pub witness: Vec<f64>,
}

/// Maximum of a pointwise residual over a grid.
#[derive(Clone, Debug, Serialize)]
pub struct FieldReport {
    pub what: String,
    pub grid: String,
    pub nodes: usize,
    pub max_residual: f64,
    pub worst: Vec<f64>,
    pub max_condition: f64,
    pub warnings: Vec<String>,
}

impl FieldReport {
    pub(crate) fn from_values(what: &str, grid: &Grid, values: &[f64], conditions: &[f64]) -> Self {
        let (i, v) = argmax(values).unwrap_or((0, 0.0));
        let max_condition = conditions.iter().copied().fold(0.0, f64::max);
        let mut warnings = Vec::new();
        if max_condition > CONDITION_WARNING {
            warnings.push(format!("pointwise system condition {max_condition:.3e}"));
        }
        Self {
            what: what.to_string(),
            grid: grid.label().to_string(),
            nodes: grid.len(),
            max_residual: v,
            worst: grid.points().get(i).map(coords).unwrap_or_default(),
            max_condition,
            warnings,
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual < tol
    }
}

/// Pointwise solution of the contact-field equations.
#[derive(Clone, Copy, Debug)]
pub struct FieldSolve {
    pub field: Point,
    pub condition: f64,
}

/// A 1-form certified to be contact on a grid.
#[derive(Clone)]
pub struct ContactForm {
    label: String,
    alpha: OneForm,
    d_alpha: TwoForm,
    cert: ContactCertificate,
    scale: Option<ScalarField>,
}

impl fmt::Debug for ContactForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContactForm")
            .field("label", &self.label)
            .field("domain", &self.alpha.domain().name())
            .field("min_margin", &self.cert.min_margin)
            .finish()
    }
}

struct Pointwise {
    frame: [Point; 3],
    a: Vector3<f64>,
    w: Matrix3<f64>,
}

fn pointwise(alpha: &OneForm, d_alpha: &TwoForm, p: &Point) -> Result<Pointwise> {
    let frame = alpha.domain().tangent_frame(p);
    let (a, w) = frame_components(&frame, &alpha.eval_raw(p, 0.0)?, &d_alpha.eval_raw(p, 0.0)?);
    Ok(Pointwise { frame, a, w })
}

fn margin_of(pw: &Pointwise) -> f64 {
    pw.a.dot(&axial(&pw.w))
}

/// Certifies that `omega ^ d omega` has constant nonzero sign on the grid.
pub fn verify_contact(omega: &OneForm, grid: &Grid) -> Result<ContactForm> {
    verify_labeled("contact form", omega, grid)
}

pub fn verify_labeled(label: &str, omega: &OneForm, grid: &Grid) -> Result<ContactForm> {
    if grid.is_empty() {
        return Err(Error::Usage("empty certification grid".into()));
    }
    let d_alpha = exterior_derivative(omega);
    let dom = omega.domain().clone();
    let margins = par_map(grid.points(), |p| {
        let q = dom.check(p)?;
        Ok(margin_of(&pointwise(omega, &d_alpha, &q)?))
    })?;
    let (imin, vmin) = argmin(&margins).unwrap();
    let (imax, vmax) = argmax(&margins).unwrap();
    if vmin <= 0.0 && vmax >= 0.0 {
        let (i, v) = if vmax > 0.0 { (imin, vmin) } else { (imax, vmax) };
        return Err(Error::NotContact {
            margin: v,
            witness: coords(&grid.points()[i]),
        });
    }
    let sign: i8 = if vmin > 0.0 { 1 } else { -1 };
    let (wi, lo, hi) = if sign > 0 { (imin, vmin, vmax) } else { (imax, -vmax, -vmin) };
    Ok(ContactForm {
        label: label.to_string(),
        alpha: omega.clone(),
        d_alpha,
        cert: ContactCertificate {
            grid: grid.label().to_string(),
            nodes: grid.len(),
            min_margin: lo,
            max_margin: hi,
            sign,
            witness: coords(&grid.points()[wi]),
        },
        scale: None,
    })
}

impl ContactForm {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn form(&self) -> &OneForm {
        &self.alpha
    }

    pub fn d_form(&self) -> &TwoForm {
        &self.d_alpha
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.alpha.domain()
    }

    pub fn certificate(&self) -> &ContactCertificate {
        &self.cert
    }

    /// Factor `F` when this form was produced as `alpha / F`.
    pub fn scale(&self) -> Option<&ScalarField> {
        self.scale.as_ref()
    }

    /// `alpha ^ d alpha` on the oriented orthonormal tangent frame at `p`.
    pub fn margin_at(&self, p: &Point) -> Result<f64> {
        let q = self.domain().check(p)?;
        Ok(margin_of(&pointwise(&self.alpha, &self.d_alpha, &q)?))
    }

    pub fn value(&self, p: &Point, v: &Point) -> Result<f64> {
        Ok(self.alpha.eval_raw(p, 0.0)?.dot(v))
    }

    /// Reeb vector at `p`, without domain validation.
    pub fn reeb_raw(&self, p: &Point) -> Result<Point> {
        let pw = pointwise(&self.alpha, &self.d_alpha, p)?;
        let w = axial(&pw.w);
        let m = pw.a.dot(&w);
        if m == 0.0 || !m.is_finite() {
            return Err(Error::Conditioning {
                condition: f64::INFINITY,
                point: coords(p),
            });
        }
        Ok(from_frame(&pw.frame, &(w / m)))
    }

    pub fn reeb_at(&self, p: &Point) -> Result<Point> {
        let q = self.domain().check(p)?;
        self.reeb_raw(&q)
    }

    /// Contact field of `H` at `(p, t)`: solves `alpha(X) = H`, `i_X d alpha = (R H) alpha - dH`.
    pub fn solve_field_raw(&self, h: &ScalarField, p: &Point, t: f64) -> Result<FieldSolve> {
        let pw = pointwise(&self.alpha, &self.d_alpha, p)?;
        let w = axial(&pw.w);
        let m = pw.a.dot(&w);
        let hv = h.eval_raw(p, t)?;
        let grad = h.gradient_raw(p, t)?;
        let hf = Vector3::new(grad.dot(&pw.frame[0]), grad.dot(&pw.frame[1]), grad.dot(&pw.frame[2]));
        let rh = hf.dot(&w) / m;
        let b = pw.a * rh - hf;
        let n = w / w.norm();
        let mat = -pw.w + n * pw.a.transpose();
        let Some(s) = solve3(&mat, &(b + n * hv)) else {
            return Err(Error::Conditioning {
                condition: f64::INFINITY,
                point: coords(p),
            });
        };
        Ok(FieldSolve {
            field: from_frame(&pw.frame, &s.x),
            condition: s.condition,
        })
    }

    /// Reeb derivative `R H` at `(p, t)`: the rate of the conformal factor of the flow of `X_H`.
    pub fn reeb_derivative_raw(&self, h: &ScalarField, p: &Point, t: f64) -> Result<f64> {
        Ok(h.gradient_raw(p, t)?.dot(&self.reeb_raw(p)?))
    }
}

/// Reeb field as a `VectorField`.
pub fn reeb_field(alpha: &ContactForm) -> VectorField {
    let a = alpha.clone();
    VectorField::from_fn(alpha.domain().clone(), true, move |p, _| a.reeb_raw(p))
}

/// Contact vector field generated by `H`.
pub fn ham_to_field(alpha: &ContactForm, h: &ScalarField) -> Result<VectorField> {
    crate::fieldcalc::fields::same_domain(alpha.domain(), h.domain())?;
    let (a, h2) = (alpha.clone(), h.clone());
    Ok(VectorField::from_fn(alpha.domain().clone(), h.is_autonomous(), move |p, t| {
        Ok(a.solve_field_raw(&h2, p, t)?.field)
    }))
}

/// `H = alpha(X)`.
pub fn field_to_ham(alpha: &ContactForm, x: &VectorField) -> Result<ScalarField> {
    contract_1(x, alpha.form())
}

/// Residuals of the Reeb equations `alpha(R) = 1`, `i_R d alpha = 0` (tangential part).
pub fn verify_reeb(alpha: &ContactForm, grid: &Grid) -> Result<FieldReport> {
    let dom = alpha.domain().clone();
    let vals = par_map(grid.points(), |p| {
        let q = dom.check(p)?;
        let r = alpha.reeb_raw(&q)?;
        let frame = dom.tangent_frame(&q);
        let a = alpha.form().eval_raw(&q, 0.0)?;
        let c = alpha.d_form().eval_raw(&q, 0.0)?.contract(&r);
        let tang = frame.iter().map(|e| c.dot(e).abs()).fold(0.0, f64::max);
        Ok((a.dot(&r) - 1.0).abs().max(tang))
    })?;
    Ok(FieldReport::from_values("reeb", grid, &vals, &[]))
}

/// Residual of `H - alpha(X_H)` and of the contact-field equations over a grid at time `t`.
pub fn verify_ham_field(alpha: &ContactForm, h: &ScalarField, grid: &Grid, t: f64) -> Result<FieldReport> {
    let dom = alpha.domain().clone();
    let out = par_map(grid.points(), |p| {
        let q = dom.check(p)?;
        let s = alpha.solve_field_raw(h, &q, t)?;
        let a = alpha.form().eval_raw(&q, 0.0)?;
        let hv = h.eval_raw(&q, t)?;
        let rh = alpha.reeb_derivative_raw(h, &q, t)?;
        let lhs = alpha.d_form().eval_raw(&q, 0.0)?.contract(&s.field);
        let rhs = a * rh - h.gradient_raw(&q, t)?;
        let frame = dom.tangent_frame(&q);
        let eq = frame.iter().map(|e| (lhs - rhs).dot(e).abs()).fold(0.0, f64::max);
        Ok(((a.dot(&s.field) - hv).abs().max(eq), s.condition))
    })?;
    let (vals, conds): (Vec<f64>, Vec<f64>) = out.into_iter().unzip();
    Ok(FieldReport::from_values("contact field equations", grid, &vals, &conds))
}

/// Result of testing whether `L_X alpha` is proportional to `alpha`.
#[derive(Clone, Debug)]
pub struct ContactFieldCheck {
    pub report: FieldReport,
    /// Proportionality factor `f` with `L_X alpha = f alpha`, one per grid node.
    pub factors: Vec<f64>,
}

pub fn verify_contact_field(alpha: &ContactForm, x: &VectorField, grid: &Grid, t: f64) -> Result<ContactFieldCheck> {
    let lie = lie_derivative_oneform(x, alpha.form())?;
    let dom = alpha.domain().clone();
    let out = par_map(grid.points(), |p| {
        let q = dom.check(p)?;
        let frame = dom.tangent_frame(&q);
        let a = alpha.form().eval_raw(&q, t)?;
        let l = lie.eval_raw(&q, t)?;
        Ok(proportionality(&a, &l, &frame))
    })?;
    let factors: Vec<f64> = out.iter().map(|v| v.0).collect();
    let res: Vec<f64> = out.iter().map(|v| v.1).collect();
    Ok(ContactFieldCheck {
        report: FieldReport::from_values("contact field proportionality", grid, &res, &[]),
        factors,
    })
}

/// `eta = alpha / F`, re-certified on `grid`; `F` must be positive on every node.
pub fn rescale_form(alpha: &ContactForm, f: &ScalarField, grid: &Grid) -> Result<ContactForm> {
    crate::fieldcalc::fields::same_domain(alpha.domain(), f.domain())?;
    let dom = alpha.domain().clone();
    let vals = par_map(grid.points(), |p| f.eval(&dom.check(p)?, 0.0))?;
    let (i, m) = argmin(&vals).unwrap_or((0, 1.0));
    if m <= 0.0 {
        return Err(Error::Positivity {
            value: m,
            witness: coords(&grid.points()[i]),
        });
    }
    let (a1, f1) = (alpha.form().clone(), f.clone());
    let (a2, f2) = (alpha.form().clone(), f.clone());
    let eta = OneForm::from_fn(dom, move |p, t| Ok(a1.eval_raw(p, t)? / f1.eval_raw(p, 0.0)?))
        .with_partials_fn(move |p, t| {
            let fv = f2.eval_raw(p, 0.0)?;
            let g = f2.gradient_raw(p, 0.0)?;
            let a = a2.eval_raw(p, t)?;
            Ok(a2.partials_raw(p, t)? / fv - a * g.transpose() / (fv * fv))
        });
    let mut out = verify_labeled(&format!("{}/F", alpha.label()), &eta, grid)?;
    out.scale = Some(f.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldcalc::{CoordKind, GridSpec};
    use nalgebra::Matrix4;

    fn torus() -> Arc<Domain> {
        Arc::new(
            Domain::chart(
                "s1xd2",
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

    fn alpha0(d: Arc<Domain>) -> ContactForm {
        let w = OneForm::new(d.clone(), |p| Point::new(1.0, -p[2], p[1], 0.0)).with_partials(|_| {
            let mut m = Matrix4::zeros();
            m[(1, 2)] = -1.0;
            m[(2, 1)] = 1.0;
            m
        });
        verify_contact(&w, &Grid::from_spec(&d, &GridSpec::uniform(8))).unwrap()
    }

    #[test]
    fn alpha0_margin_is_two() {
        let a = alpha0(torus());
        assert!((a.certificate().min_margin - 2.0).abs() < 1e-12);
        assert!((a.certificate().max_margin - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_form_rejected() {
        let d = torus();
        let w = OneForm::new(d.clone(), |_| Point::new(1.0, 0.0, 0.0, 0.0));
        match verify_contact(&w, &Grid::from_spec(&d, &GridSpec::uniform(8))) {
            Err(Error::NotContact { margin, .. }) => assert_eq!(margin, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reeb_of_alpha0_is_dtheta() {
        let a = alpha0(torus());
        let r = a.reeb_at(&Point::new(0.4, 0.3, -0.2, 0.0)).unwrap();
        assert!((r - Point::new(1.0, 0.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn constant_hamiltonian_gives_reeb() {
        let d = torus();
        let a = alpha0(d.clone());
        let one = ScalarField::constant(d, 1.0);
        let p = Point::new(1.0, 0.5, 0.5, 0.0);
        let x = ham_to_field(&a, &one).unwrap().eval(&p, 0.0).unwrap();
        assert!((x - a.reeb_at(&p).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn rotation_hamiltonian() {
        let d = torus();
        let a = alpha0(d.clone());
        let h = ScalarField::autonomous(d, |p| p[1] * p[1] + p[2] * p[2])
            .with_gradient(|p, _| Point::new(0.0, 2.0 * p[1], 2.0 * p[2], 0.0));
        let p = Point::new(1.0, 0.3, 0.4, 0.0);
        let x = ham_to_field(&a, &h).unwrap().eval(&p, 0.0).unwrap();
        assert!((a.value(&p, &x).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn non_contact_field_has_residual() {
        let d = torus();
        let a = alpha0(d.clone());
        let grid = Grid::from_spec(&d, &GridSpec::uniform(6));
        let dx = VectorField::coordinate(d.clone(), 1);
        let bad = verify_contact_field(&a, &dx, &grid, 0.0).unwrap();
        assert!(bad.report.max_residual > 0.1);
        let good = verify_contact_field(&a, &reeb_field(&a), &grid, 0.0).unwrap();
        assert!(good.report.max_residual < 1e-8);
        assert!(good.factors.iter().all(|f| f.abs() < 1e-8));
    }

    #[test]
    fn rescale_by_one_is_identity() {
        let d = torus();
        let a = alpha0(d.clone());
        let grid = Grid::from_spec(&d, &GridSpec::uniform(6));
        let eta = rescale_form(&a, &ScalarField::constant(d.clone(), 1.0), &grid).unwrap();
        for p in grid.points() {
            let e = eta.form().eval(p, 0.0).unwrap() - a.form().eval(p, 0.0).unwrap();
            assert!(e.norm() < 1e-15);
        }
        let neg = ScalarField::autonomous(d, |p| p[1]);
        assert!(matches!(rescale_form(&a, &neg, &grid), Err(Error::Positivity { .. })));
    }
}
