use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::contact::ContactForm;
use crate::error::{Error, Result};
use crate::fieldcalc::Point;

pub type CurveFn = dyn Fn(f64) -> Point + Send + Sync;

#[derive(Clone, Debug, Serialize)]
pub struct KnotCertificate {
    /// `min alpha(gamma')` over the parameter grid.
    pub transversality: f64,
    /// `max |alpha(frame)|`.
    pub frame_residual: f64,
    pub samples: usize,
}

/// Positively transverse knot with a unit frame in the contact planes.
#[derive(Clone)]
pub struct FramedTransverseKnot {
    name: String,
    curve: Arc<CurveFn>,
    tangent: Arc<CurveFn>,
    frame: Arc<CurveFn>,
    cert: KnotCertificate,
}

impl fmt::Debug for FramedTransverseKnot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FramedTransverseKnot")
            .field("name", &self.name)
            .field("cert", &self.cert)
            .finish()
    }
}

impl FramedTransverseKnot {
    pub fn new(
        name: &str,
        alpha: &ContactForm,
        curve: impl Fn(f64) -> Point + Send + Sync + 'static,
        tangent: impl Fn(f64) -> Point + Send + Sync + 'static,
        frame: impl Fn(f64) -> Point + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = 256;
        let mut tr = f64::INFINITY;
        let mut fr: f64 = 0.0;
        for j in 0..n {
            let s = TAU * j as f64 / n as f64;
            let p = alpha.domain().check(&curve(s))?;
            tr = tr.min(alpha.value(&p, &tangent(s))?);
            fr = fr.max(alpha.value(&p, &frame(s))?.abs());
        }
        if tr <= 0.0 {
            return Err(Error::Usage(format!("knot `{name}` is not positively transverse (min {tr:.3e})")));
        }
        if fr > 1e-8 {
            return Err(Error::Usage(format!("frame of knot `{name}` leaves the contact planes ({fr:.3e})")));
        }
        Ok(Self {
            name: name.to_string(),
            curve: Arc::new(curve),
            tangent: Arc::new(tangent),
            frame: Arc::new(frame),
            cert: KnotCertificate {
                transversality: tr,
                frame_residual: fr,
                samples: n,
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn at(&self, s: f64) -> Point {
        (self.curve)(s)
    }

    pub fn tangent(&self, s: f64) -> Point {
        (self.tangent)(s)
    }

    pub fn frame(&self, s: f64) -> Point {
        (self.frame)(s)
    }

    pub fn certificate(&self) -> &KnotCertificate {
        &self.cert
    }
}
