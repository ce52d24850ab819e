use thiserror::Error;

use crate::fieldcalc::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("point {point:?} outside domain `{domain}`: {reason}")]
    Domain {
        domain: String,
        point: Vec<f64>,
        reason: String,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("map inversion failed to converge (residual {residual:.3e})")]
    Inversion { residual: f64 },

    #[error("trajectory left the domain at t = {time:.6}")]
    Escape { time: f64 },

    #[error("adaptive step underflow at t = {time:.6} (step {step:.3e})")]
    Stiffness { time: f64, step: f64 },

    #[error("form is not contact: margin {margin:.3e} at {witness:?}")]
    NotContact { margin: f64, witness: Vec<f64> },

    #[error("pointwise system singular at {point:?} (condition {condition:.3e})")]
    Conditioning { condition: f64, point: Vec<f64> },

    #[error("function not positive: value {value:.3e} at {witness:?}")]
    Positivity { value: f64, witness: Vec<f64> },

    #[error("isotopy does not close: max displacement {closure:.3e} at time 2pi")]
    NotALoop { closure: f64 },

    #[error("Hamiltonian law disagrees with flow extraction: {discrepancy:.3e} at {point:?}, t = {time:.4}")]
    Convention {
        discrepancy: f64,
        point: Vec<f64>,
        time: f64,
    },

    #[error("flow left the local model before the requested time; choose a smaller time (reached {reached:.4})")]
    TimeTooLarge { reached: f64 },

    #[error("no strict chart within budget (best residual {best_residual:.3e})")]
    NoChart { best_residual: f64 },

    #[error("radial profile solve failed at radius {radius:.4e}; shrink the tube radius")]
    ShrinkRadius { radius: f64 },

    #[error("overlap inconsistency {mismatch:.3e} at {witness:?}: {what}")]
    Gluing {
        what: String,
        mismatch: f64,
        witness: Vec<f64>,
    },

    #[error("k search cap {cap} exceeded (best margin {best_margin:.3e} at k = {best_k})")]
    SearchCap {
        cap: u32,
        best_k: u32,
        best_margin: f64,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(domain: &str, p: &Point, reason: impl Into<String>) -> Self {
        Error::Domain {
            domain: domain.to_string(),
            point: p.iter().copied().collect(),
            reason: reason.into(),
        }
    }

    pub fn staged(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// Stage tag of a pipeline error, if any.
    pub fn stage(&self) -> Option<&str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) fn coords(p: &Point) -> Vec<f64> {
    p.iter().copied().collect()
}
