use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::Vector3;

use crate::contact::ContactForm;
use crate::error::{coords, Error, Result};
use crate::fieldcalc::fd::{derivative_vec, FdConfig};
use crate::fieldcalc::{Domain, Point};

/// Chebyshev degree of the radial tables.
pub const RADIAL_DEGREE: usize = 48;
/// Number of tabulated angles.
pub const ANGLES: usize = 32;

/// Chebyshev coefficients from values at `x_k = cos(pi k / n)`, `k = 0..=n`.
fn cheb_coeffs(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    (0..=n)
        .map(|j| {
            let mut s = 0.0;
            for (k, v) in values.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += w * v * (PI * (j * k) as f64 / n as f64).cos();
            }
            let c = 2.0 * s / n as f64;
            if j == 0 || j == n {
                c / 2.0
            } else {
                c
            }
        })
        .collect()
}

/// Coefficients of the antiderivative in `x` vanishing at `x = -1`.
fn cheb_integral(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let at = |i: usize| c.get(i).copied().unwrap_or(0.0);
    let mut out = vec![0.0; n + 1];
    out[1] = at(0) - at(2) / 2.0;
    for (j, o) in out.iter_mut().enumerate().skip(2) {
        *o = (at(j - 1) - at(j + 1)) / (2.0 * j as f64);
    }
    out[0] = -out.iter().enumerate().skip(1).map(|(j, v)| if j % 2 == 0 { *v } else { -*v }).sum::<f64>();
    out
}

fn clenshaw(c: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b;
    }
    x * b1 - b2 + c[0]
}

/// Trigonometric interpolation weights on `m` equispaced angles (m even).
fn angle_weights(m: usize, phi: f64) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let d = crate::fieldcalc::wrap_angle(phi - TAU * j as f64 / m as f64);
            if d.abs() < 1e-14 {
                1.0
            } else {
                (m as f64 * d / 2.0).sin() / (m as f64 * (d / 2.0).tan())
            }
        })
        .collect()
}

fn mix(table: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; table[0].len()];
    for (row, wj) in table.iter().zip(w) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += wj * v;
        }
    }
    out
}

/// Area-normalized polar chart on a slice through `center` spanned by `ker eta`.
///
/// With `q(u, v) = project(center + u e1 + v e2)` and `A = d eta(q_u, q_v)`, the radius
/// `rho(R, phi)` solves `int_0^rho A(s e_phi) s ds = R^2`, so the slice map
/// `sigma(R e_phi) = q(rho e_phi)` satisfies `sigma^* d eta = 2 dx ^ dy`. The primitive
/// `S(X) = int_0^rho eta(d q / ds) ds` satisfies `dS = sigma^* eta - (x dy - y dx)`.
#[derive(Clone)]
pub struct SliceChart {
    domain: Arc<Domain>,
    center: Point,
    e1: Point,
    e2: Point,
    normal: Point,
    reach: f64,
    a0: f64,
    rate: Vec<Vec<f64>>,
    area: Vec<Vec<f64>>,
    shift: Vec<Vec<f64>>,
}

impl SliceChart {
    pub fn build(eta: &ContactForm, center: &Point, reach: f64) -> Result<Self> {
        if !(reach > 0.0) {
            return Err(Error::Usage(format!("slice reach must be positive, got {reach}")));
        }
        let domain = eta.domain().clone();
        let p = domain.check(center)?;
        let frame = domain.tangent_frame(&p);
        let a = eta.form().eval_raw(&p, 0.0)?;
        let n = Vector3::new(a.dot(&frame[0]), a.dot(&frame[1]), a.dot(&frame[2])).normalize();
        let k = (0..3).min_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).unwrap()).unwrap();
        let t = Vector3::ith(k, 1.0);
        let u1 = (t - n * n.dot(&t)).normalize();
        let u2 = n.cross(&u1);
        let lift = |u: &Vector3<f64>| frame[0] * u[0] + frame[1] * u[1] + frame[2] * u[2];
        let (e1, mut e2) = (lift(&u1), lift(&u2));
        let d = eta.d_form().eval_raw(&p, 0.0)?;
        let mut a0 = d.apply(&e1, &e2);
        if a0 < 0.0 {
            e2 = -e2;
            a0 = -a0;
        }
        if a0 <= 0.0 {
            return Err(Error::Conditioning {
                condition: f64::INFINITY,
                point: coords(&p),
            });
        }
        let normal = lift(&n);
        let mut chart = Self {
            domain,
            center: p,
            e1,
            e2,
            normal,
            reach,
            a0,
            rate: Vec::new(),
            area: Vec::new(),
            shift: Vec::new(),
        };
        let nodes: Vec<f64> = (0..=RADIAL_DEGREE)
            .map(|k| reach * (1.0 + (PI * k as f64 / RADIAL_DEGREE as f64).cos()) / 2.0)
            .collect();
        let fd = FdConfig::fourth(1e-4 * reach);
        for j in 0..ANGLES {
            let phi = TAU * j as f64 / ANGLES as f64;
            let (c, s) = (phi.cos(), phi.sin());
            let mut fa = Vec::with_capacity(nodes.len());
            let mut fb = Vec::with_capacity(nodes.len());
            for &r in &nodes {
                let (u, v) = (r * c, r * s);
                let q = chart.point(u, v);
                let diff = |x: &Point, y: &Point| chart.domain.difference(x, y);
                let qu = derivative_vec(|h| Ok(chart.point(u + h, v)), 0.0, &fd, diff)?;
                let qv = derivative_vec(|h| Ok(chart.point(u, v + h)), 0.0, &fd, diff)?;
                let av = eta.d_form().eval_raw(&q, 0.0)?.apply(&qu, &qv);
                fa.push(av * r);
                fb.push(eta.form().eval_raw(&q, 0.0)?.dot(&(qu * c + qv * s)));
            }
            let ca = cheb_coeffs(&fa);
            let scale = |v: Vec<f64>| v.into_iter().map(|x| x * reach / 2.0).collect::<Vec<f64>>();
            chart.area.push(scale(cheb_integral(&ca)));
            chart.rate.push(ca);
            chart.shift.push(scale(cheb_integral(&cheb_coeffs(&fb))));
        }
        Ok(chart)
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// `d eta(e1, e2)` at the center.
    pub fn central_density(&self) -> f64 {
        self.a0
    }

    /// Slice parametrization `q(u, v)`.
    pub fn point(&self, u: f64, v: f64) -> Point {
        self.domain.project(&(self.center + self.e1 * u + self.e2 * v))
    }

    fn x_of(&self, rho: f64) -> f64 {
        2.0 * rho / self.reach - 1.0
    }

    /// Largest `R` reachable in direction `phi` within the tabulated reach.
    pub fn max_radius(&self, phi: f64) -> f64 {
        let w = angle_weights(ANGLES, phi);
        clenshaw(&mix(&self.area, &w), 1.0).max(0.0).sqrt()
    }

    /// `min_phi max_radius(phi)` over the tabulated angles.
    pub fn area_radius(&self) -> f64 {
        self.area.iter().map(|c| clenshaw(c, 1.0).max(0.0).sqrt()).fold(f64::INFINITY, f64::min)
    }

    /// `int_0^rho A(s e_phi) s ds`, by direct table evaluation.
    pub fn enclosed(&self, rho: f64, phi: f64) -> f64 {
        clenshaw(&mix(&self.area, &angle_weights(ANGLES, phi)), self.x_of(rho))
    }

    /// `(rho, S)` for the chart point `R e_phi`.
    pub fn radial(&self, r: f64, phi: f64) -> Result<(f64, f64)> {
        if r == 0.0 {
            return Ok((0.0, 0.0));
        }
        let w = angle_weights(ANGLES, phi);
        let (area, rate) = (mix(&self.area, &w), mix(&self.rate, &w));
        let target = r * r;
        if clenshaw(&area, 1.0) < target {
            return Err(Error::ShrinkRadius { radius: r });
        }
        let (mut lo, mut hi) = (0.0, self.reach);
        let mut rho = (r * (2.0 / self.a0).sqrt()).min(self.reach);
        for _ in 0..80 {
            let g = clenshaw(&area, self.x_of(rho)) - target;
            if g > 0.0 {
                hi = rho;
            } else {
                lo = rho;
            }
            let d = clenshaw(&rate, self.x_of(rho));
            let mut next = if d > 0.0 { rho - g / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - rho).abs();
            rho = next;
            if step <= 1e-15 * self.reach {
                break;
            }
        }
        Ok((rho, clenshaw(&mix(&self.shift, &w), self.x_of(rho))))
    }

    /// Offset of `y` from the slice plane along the tangent normal at the center.
    pub fn normal_offset(&self, y: &Point) -> f64 {
        self.domain.difference(y, &self.center).dot(&self.normal)
    }

    /// Approximate chart coordinates of a point near the slice.
    pub fn chart_of(&self, y: &Point) -> (f64, f64) {
        let d = self.domain.difference(y, &self.center);
        let (u, v) = (d.dot(&self.e1), d.dot(&self.e2));
        let (rho, phi) = (u.hypot(v).min(self.reach), v.atan2(u));
        let r = self.enclosed(rho, phi).max(0.0).sqrt();
        (r * phi.cos(), r * phi.sin())
    }

    /// Slice point `sigma(x, y)` and the primitive `S(x, y)`.
    pub fn sigma(&self, x: f64, y: f64) -> Result<(Point, f64)> {
        let r = x.hypot(y);
        let phi = y.atan2(x);
        let (rho, s) = self.radial(r, phi)?;
        Ok((self.point(rho * phi.cos(), rho * phi.sin()), s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::model_solid_torus;

    #[test]
    fn chebyshev_integral_of_polynomial() {
        let n = 12;
        let vals: Vec<f64> = (0..=n).map(|k| (PI * k as f64 / n as f64).cos()).map(|x| 3.0 * x * x + 1.0).collect();
        let c = cheb_integral(&cheb_coeffs(&vals));
        for x in [-1.0, -0.3, 0.4, 1.0] {
            let exact = x * x * x + x + 2.0;
            assert!((clenshaw(&c, x) - exact).abs() < 1e-13, "{x}");
        }
    }

    #[test]
    fn weights_interpolate_trig_polynomials() {
        let vals: Vec<f64> = (0..ANGLES).map(|j| (3.0 * TAU * j as f64 / ANGLES as f64).sin()).collect();
        let phi = 0.77;
        let w = angle_weights(ANGLES, phi);
        let v: f64 = w.iter().zip(&vals).map(|(a, b)| a * b).sum();
        assert!((v - (3.0 * phi).sin()).abs() < 1e-13);
    }

    #[test]
    fn alpha0_slice_is_identity_up_to_rotation() {
        let m = model_solid_torus(1.0).unwrap();
        let s = SliceChart::build(m.alpha(), &Point::new(0.5, 0.0, 0.0, 0.0), 0.5).unwrap();
        assert!((s.central_density() - 2.0).abs() < 1e-9);
        assert!((s.area_radius() - 0.5).abs() < 1e-9);
        for (x, y) in [(0.1, 0.05), (-0.2, 0.3)] {
            let (q, sh) = s.sigma(x, y).unwrap();
            assert!((q[1].hypot(q[2]) - f64::hypot(x, y)).abs() < 1e-10);
            assert!((q[0] - 0.5).abs() < 1e-12 && sh.abs() < 1e-10);
        }
    }
}
