use nalgebra::{Matrix3, Vector3};

use super::domain::{Domain, Point};

/// Solution of a 3x3 system together with its 1-norm condition number.
#[derive(Clone, Copy, Debug)]
pub struct Solve3 {
    pub x: Vector3<f64>,
    pub condition: f64,
}

fn norm1(m: &Matrix3<f64>) -> f64 {
    (0..3)
        .map(|j| (0..3).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU with partial pivoting. Returns `None` for exactly singular systems.
pub fn solve3(m: &Matrix3<f64>, b: &Vector3<f64>) -> Option<Solve3> {
    let lu = m.lu();
    let x = lu.solve(b)?;
    let inv = lu.try_inverse()?;
    Some(Solve3 {
        x,
        condition: norm1(m) * norm1(&inv),
    })
}

/// Axial vector `w` of an antisymmetric 3x3 matrix: spans its kernel, and `a . w`
/// equals `alpha ^ d alpha (e1, e2, e3)` when `a`, `W` are the frame components.
pub fn axial(w: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(w[(1, 2)], w[(2, 0)], w[(0, 1)])
}

/// Frame components of a covector and of a 2-form at a point.
pub fn frame_components(
    frame: &[Point; 3],
    covector: &Point,
    two_form: &crate::fieldcalc::TwoFormValue,
) -> (Vector3<f64>, Matrix3<f64>) {
    let a = Vector3::new(covector.dot(&frame[0]), covector.dot(&frame[1]), covector.dot(&frame[2]));
    let mut w = Matrix3::zeros();
    for i in 0..3 {
        for j in (i + 1)..3 {
            let v = two_form.apply(&frame[i], &frame[j]);
            w[(i, j)] = v;
            w[(j, i)] = -v;
        }
    }
    (a, w)
}

/// Assembles an ambient vector from frame coefficients.
pub fn from_frame(frame: &[Point; 3], c: &Vector3<f64>) -> Point {
    frame[0] * c[0] + frame[1] * c[1] + frame[2] * c[2]
}

/// Least-squares frame coefficients of an ambient vector (exact for tangent vectors).
pub fn to_frame(frame: &[Point; 3], v: &Point) -> Vector3<f64> {
    Vector3::new(v.dot(&frame[0]), v.dot(&frame[1]), v.dot(&frame[2]))
}

/// Tangent frame restricted to the intrinsic dimension of the domain.
pub fn frame_at(domain: &Domain, p: &Point) -> [Point; 3] {
    domain.tangent_frame(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axial_vector_spans_kernel() {
        let w = Matrix3::new(0.0, 1.5, -0.3, -1.5, 0.0, 2.0, 0.3, -2.0, 0.0);
        let a = axial(&w);
        assert!((w * a).norm() < 1e-14);
    }

    #[test]
    fn solve3_reports_conditioning() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1e-9, 0.0, 0.0, 0.0, 1.0);
        let s = solve3(&m, &Vector3::new(1.0, 1e-9, 2.0)).unwrap();
        assert!((s.x - Vector3::new(1.0, 1.0, 2.0)).norm() < 1e-12);
        assert!(s.condition > 1e8);
        let singular = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert!(solve3(&singular, &Vector3::new(1.0, 2.0, 3.0)).is_none());
    }
}
