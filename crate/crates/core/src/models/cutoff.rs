use serde::Serialize;

use crate::error::{Error, Result};

/// Smooth non-increasing step: 1 on `[0, inner]`, 0 on `[outer, inf)`, built from `exp(-1/s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutoffProfile {
    pub inner: f64,
    pub outer: f64,
}

fn e(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

impl CutoffProfile {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(0.0 < inner && inner < outer) {
            return Err(Error::Usage(format!("cutoff radii must satisfy 0 < {inner} < {outer}")));
        }
        Ok(Self { inner, outer })
    }

    /// Default radii `eps/4` and `3 eps/4`.
    pub fn for_radius(eps: f64) -> Result<Self> {
        Self::new(eps / 4.0, 3.0 * eps / 4.0)
    }

    fn unit(&self, r: f64) -> f64 {
        (self.outer - r) / (self.outer - self.inner)
    }

    pub fn value(&self, r: f64) -> f64 {
        let u = self.unit(r);
        if u >= 1.0 {
            return 1.0;
        }
        if u <= 0.0 {
            return 0.0;
        }
        let (a, b) = (e(u), e(1.0 - u));
        a / (a + b)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.value_and_derivative(r).1
    }

    pub fn value_and_derivative(&self, r: f64) -> (f64, f64) {
        let u = self.unit(r);
        if u >= 1.0 {
            return (1.0, 0.0);
        }
        if u <= 0.0 {
            return (0.0, 0.0);
        }
        let (a, b) = (e(u), e(1.0 - u));
        let ds = a * b * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))) / ((a + b) * (a + b));
        (a / (a + b), -ds / (self.outer - self.inner))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_and_monotone() {
        let c = CutoffProfile::for_radius(0.4).unwrap();
        assert_eq!(c.value(0.0), 1.0);
        assert_eq!(c.value(0.1), 1.0);
        assert_eq!(c.value(0.3), 0.0);
        assert_eq!(c.value(0.5), 0.0);
        let mut last = 1.0;
        for i in 0..200 {
            let v = c.value(0.1 + 0.2 * i as f64 / 199.0);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn derivative_matches_difference() {
        let c = CutoffProfile::for_radius(0.4).unwrap();
        for r in [0.12, 0.17, 0.2, 0.26, 0.29] {
            let h = 1e-6;
            let fd = (c.value(r + h) - c.value(r - h)) / (2.0 * h);
            assert!((fd - c.derivative(r)).abs() < 1e-6, "{r}");
        }
    }

    #[test]
    fn rejects_bad_radii() {
        assert!(CutoffProfile::new(0.3, 0.2).is_err());
    }
}
