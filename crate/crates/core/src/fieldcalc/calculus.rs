use super::domain::Point;
use super::fd::FdConfig;
use super::fields::{same_domain, OneForm, ScalarField, TwoForm, TwoFormValue, VectorField};
use super::maps::DiffMap;
use crate::error::Result;

/// `d omega`, built from the partials of the coefficients.
pub fn exterior_derivative(omega: &OneForm) -> TwoForm {
    let w = omega.clone();
    TwoForm::from_fn(omega.domain().clone(), move |p, t| Ok(TwoFormValue::curl(&w.partials_raw(p, t)?)))
}

/// `dH` as a 1-form. Partials of the result are finite differences of the gradient.
pub fn d_scalar(h: &ScalarField) -> OneForm {
    let g = h.clone();
    let cfg = h.fd_config();
    let form = OneForm::from_fn(h.domain().clone(), move |p, t| g.gradient_raw(p, t));
    // nested differences need a wider outer stencil
    form.with_fd(FdConfig::fourth(cfg.step.max(1e-4) * 10.0))
}

/// Pointwise pairing `omega(X)`.
pub fn contract_1(x: &VectorField, omega: &OneForm) -> Result<ScalarField> {
    same_domain(x.domain(), omega.domain())?;
    let (x, w) = (x.clone(), omega.clone());
    let auto = x.is_autonomous();
    Ok(ScalarField::from_fn(omega.domain().clone(), auto, move |p, t| {
        Ok(w.eval_raw(p, t)?.dot(&x.eval_raw(p, t)?))
    })
    .with_fd(omega.fd_config()))
}

/// Interior product `i_X Omega`.
pub fn contract_2(x: &VectorField, omega: &TwoForm) -> Result<OneForm> {
    same_domain(x.domain(), omega.domain())?;
    let (x, w) = (x.clone(), omega.clone());
    Ok(OneForm::from_fn(omega.domain().clone(), move |p, t| {
        Ok(w.eval_raw(p, t)?.contract(&x.eval_raw(p, t)?))
    }))
}

/// `(F* omega)_p(v) = omega_{F(p)}(dF_p v)`.
pub fn pullback_oneform(f: &DiffMap, omega: &OneForm) -> Result<OneForm> {
    same_domain(f.target(), omega.domain())?;
    let (map, w) = (f.clone(), omega.clone());
    let form = OneForm::from_fn(f.source().clone(), move |p, t| {
        let q = map.apply_raw(p)?;
        let q = if map.source().contains(p) {
            map.target().check(&q)?
        } else {
            map.target().reduce(&q)
        };
        let jac = map.jacobian_raw(p)?;
        Ok(jac.transpose() * w.eval_raw(&q, t)?)
    });
    Ok(form.with_fd(FdConfig::fourth(1e-4)))
}

/// `(F_* X)_q = dF_{F^-1 q} X_{F^-1 q}`.
pub fn pushforward_vector(f: &DiffMap, x: &VectorField) -> Result<VectorField> {
    same_domain(f.source(), x.domain())?;
    let (map, v) = (f.clone(), x.clone());
    Ok(VectorField::from_fn(f.target().clone(), x.is_autonomous(), move |q, t| {
        let p = map.apply_inverse(q)?;
        map.push_vector(&p, &v.eval(&p, t)?)
    }))
}

/// Cartan formula `i_X d omega + d(omega(X))`.
pub fn lie_derivative_oneform(x: &VectorField, omega: &OneForm) -> Result<OneForm> {
    let a = contract_2(x, &exterior_derivative(omega))?;
    let b = d_scalar(&contract_1(x, omega)?.with_fd(FdConfig::fourth(1e-4)));
    let dom = omega.domain().clone();
    Ok(OneForm::from_fn(dom, move |p, t| Ok(a.eval_raw(p, t)? + b.eval_raw(p, t)?)))
}

/// Best proportionality factor `f` in `beta ~ f alpha` over tangent directions, and the
/// norm of the orthogonal remainder.
pub fn proportionality(alpha: &Point, beta: &Point, frame: &[Point; 3]) -> (f64, f64) {
    let a: Vec<f64> = frame.iter().map(|e| alpha.dot(e)).collect();
    let b: Vec<f64> = frame.iter().map(|e| beta.dot(e)).collect();
    let aa: f64 = a.iter().map(|v| v * v).sum();
    if aa == 0.0 {
        return (0.0, b.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let f = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / aa;
    let r = a.iter().zip(&b).map(|(x, y)| (y - f * x).powi(2)).sum::<f64>().sqrt();
    (f, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldcalc::domain::{CoordKind, Domain};
    use nalgebra::Matrix4;
    use std::sync::Arc;

    fn solid_torus() -> Arc<Domain> {
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

    fn alpha0(d: Arc<Domain>) -> OneForm {
        OneForm::new(d, |p| Point::new(1.0, -p[2], p[1], 0.0)).with_partials(|_| {
            let mut m = Matrix4::zeros();
            m[(1, 2)] = -1.0;
            m[(2, 1)] = 1.0;
            m
        })
    }

    #[test]
    fn d_alpha0_is_twice_area() {
        let d = solid_torus();
        let dw = exterior_derivative(&alpha0(d.clone()));
        let fd = exterior_derivative(&alpha0(d).without_partials());
        let p = Point::new(0.3, 0.2, -0.5, 0.0);
        let v = dw.eval(&p, 0.0).unwrap();
        assert_eq!(v.get(1, 2), 2.0);
        assert_eq!(v.get(0, 1), 0.0);
        assert!((fd.eval(&p, 0.0).unwrap().get(1, 2) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn contract_2_sign_convention() {
        let d = solid_torus();
        let area = TwoForm::new(d.clone(), |_| TwoFormValue([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        let dy = VectorField::coordinate(d, 2);
        let r = contract_2(&dy, &area).unwrap();
        let c = r.eval(&Point::new(0.0, 0.1, 0.1, 0.0), 0.0).unwrap();
        assert_eq!(c, Point::new(0.0, -1.0, 0.0, 0.0));
    }

    #[test]
    fn lie_derivative_of_rotation_vanishes() {
        let d = solid_torus();
        let rot = VectorField::autonomous(d.clone(), |p| Point::new(0.0, -p[2], p[1], 0.0));
        let l = lie_derivative_oneform(&rot, &alpha0(d)).unwrap();
        let v = l.eval(&Point::new(1.0, 0.3, 0.4, 0.0), 0.0).unwrap();
        assert!(v.norm() < 1e-8, "{v}");
    }

    #[test]
    fn pullback_by_identity() {
        let d = solid_torus();
        let w = alpha0(d.clone());
        let pb = pullback_oneform(&DiffMap::identity(d), &w).unwrap();
        let p = Point::new(2.0, 0.3, -0.1, 0.0);
        assert!((pb.eval(&p, 0.0).unwrap() - w.eval(&p, 0.0).unwrap()).norm() < 1e-12);
    }
}
