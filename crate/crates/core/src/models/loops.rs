use std::sync::Arc;

use serde::Serialize;

use crate::contact::ContactForm;
use crate::error::{Error, Result};
use crate::fieldcalc::{Grid, Point, ScalarField};
use crate::loopalg::{
    certify_positivity_with, compose_loops, conjugate_loop, self_concatenate, ContactLoop, ExactFlow, LoopConfig,
    PositivityCertificate, PositivityThresholds,
};

use super::displacement::Displacement;

fn rotate(p: &Point, i: usize, j: usize, t: f64) -> Point {
    let (c, s) = (t.cos(), t.sin());
    let mut q = *p;
    q[i] = c * p[i] - s * p[j];
    q[j] = s * p[i] + c * p[j];
    q
}

/// `rho_t`: rotation `phi -> phi + t` of `S^1 x S^2`, Hamiltonian `r^2`.
pub fn loop_rho(alpha: &ContactForm) -> Result<ContactLoop> {
    let h = ScalarField::autonomous(alpha.domain().clone(), |p| p[1] * p[1] + p[2] * p[2])
        .with_gradient(|p, _| Point::new(0.0, 2.0 * p[1], 2.0 * p[2], 0.0));
    let flow = ExactFlow::strict(|p, t| Ok(rotate(p, 1, 2, t)), |q, t| Ok(rotate(q, 1, 2, -t)));
    ContactLoop::exact("rho", alpha, h, Arc::new(flow))
}

/// `zeta_t`: `theta -> theta + t`, Hamiltonian `z`.
pub fn loop_zeta(alpha: &ContactForm) -> Result<ContactLoop> {
    let h = ScalarField::autonomous(alpha.domain().clone(), |p| p[3]).with_gradient(|_, _| Point::new(0.0, 0.0, 0.0, 1.0));
    let flow = ExactFlow::strict(
        |p, t| Ok(Point::new(p[0] + t, p[1], p[2], p[3])),
        |q, t| Ok(Point::new(q[0] - t, q[1], q[2], q[3])),
    );
    ContactLoop::exact("zeta", alpha, h, Arc::new(flow))
}

/// Hopf rotation `z -> e^{it} z` of `S^3`, Hamiltonian `1`.
pub fn loop_hopf(alpha: &ContactForm) -> Result<ContactLoop> {
    let h = ScalarField::constant(alpha.domain().clone(), 1.0);
    let flow = ExactFlow::strict(
        |p, t| Ok(rotate(&rotate(p, 0, 1, t), 2, 3, t)),
        |q, t| Ok(rotate(&rotate(q, 0, 1, -t), 2, 3, -t)),
    );
    ContactLoop::exact("hopf", alpha, h, Arc::new(flow))
}

/// `beta_t = rho_t o psi o rho_t o psi^{-1}`.
pub fn loop_beta(rho: &ContactLoop, psi: &Displacement) -> Result<ContactLoop> {
    let conj = conjugate_loop(rho, &psi.map)?;
    Ok(compose_loops(rho, &conj)?.with_label("beta"))
}

/// `delta_t = zeta_t o (beta ⊙ ... ⊙ beta)` with `k` copies.
pub fn loop_delta(k: usize, beta: &ContactLoop, zeta: &ContactLoop) -> Result<ContactLoop> {
    let cat = self_concatenate(beta, k)?;
    Ok(compose_loops(zeta, &cat)?.with_label(&format!("delta({k})")))
}

#[derive(Clone, Debug, Serialize)]
pub struct KSearch {
    pub k: usize,
    pub start: usize,
    pub beta_min: f64,
    pub margin: f64,
    /// `(k, min H(delta(k)))` for every `k` tried, in order.
    pub tried: Vec<(usize, f64)>,
    pub certificate: PositivityCertificate,
}

/// Smallest `k` for which `delta(k)` is certified with minimum above `margin` on `grid x times`.
///
/// The search starts at `ceil(1 / beta_min)` and walks down while the certificate still
/// holds, or up until it does.
pub fn find_min_k(
    beta: &ContactLoop,
    zeta: &ContactLoop,
    beta_min: f64,
    grid: &Grid,
    times: &[f64],
    margin: f64,
    cap: u32,
) -> Result<KSearch> {
    let start = if beta_min > 0.0 { (1.0 / beta_min).ceil() as usize } else { 1 };
    find_min_k_from(beta, zeta, beta_min, grid, times, margin, cap, start)
}

/// `find_min_k` with an explicit starting value.
#[allow(clippy::too_many_arguments)]
pub fn find_min_k_from(
    beta: &ContactLoop,
    zeta: &ContactLoop,
    beta_min: f64,
    grid: &Grid,
    times: &[f64],
    margin: f64,
    cap: u32,
    start: usize,
) -> Result<KSearch> {
    if cap == 0 {
        return Err(Error::Usage("k search cap must be positive".into()));
    }
    let quiet = LoopConfig {
        oracle_samples: 0,
        ..*beta.config()
    };
    let b = beta.clone().with_config(quiet);
    let z = zeta.clone().with_config(quiet);
    let thr = PositivityThresholds {
        margin,
        ..PositivityThresholds::default()
    };
    let start = start.clamp(1, cap as usize);
    let mut tried = Vec::new();
    let mut cert = |k: usize| -> Result<PositivityCertificate> {
        let c = certify_positivity_with(&loop_delta(k, &b, &z)?, grid, times, &thr)?;
        tried.push((k, c.min));
        Ok(c)
    };
    let first = cert(start)?;
    let (k, certificate) = if first.is_positive() {
        let (mut k, mut best) = (start, first);
        while k > 1 {
            let c = cert(k - 1)?;
            if !c.is_positive() {
                break;
            }
            k -= 1;
            best = c;
        }
        (k, best)
    } else {
        let mut k = start;
        let mut best = (start, first.min);
        loop {
            if k >= cap as usize {
                return Err(Error::SearchCap {
                    cap,
                    best_k: best.0 as u32,
                    best_margin: best.1 - margin,
                });
            }
            k += 1;
            let c = cert(k)?;
            if c.min > best.1 {
                best = (k, c.min);
            }
            if c.is_positive() {
                break (k, c);
            }
        }
    };
    Ok(KSearch {
        k,
        start,
        beta_min,
        margin,
        tried,
        certificate,
    })
}
