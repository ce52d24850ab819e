use std::f64::consts::TAU;
use std::sync::Arc;

use crate::contact::ContactForm;
use crate::error::{coords, Error, Result};
use crate::fieldcalc::sweep::par_map;
use crate::fieldcalc::{proportionality, reduce_time, DiffMap, Point, ScalarField};

use super::loops::{extract_at, ContactLoop, LoopFlow, Provenance};

/// Times at which algebraic Hamiltonians are compared with the extraction oracle.
pub const ORACLE_TIMES: [f64; 4] = [0.37, 1.9, 3.3, 5.1];

/// Conformal factor `g(p)` with `psi^* alpha = e^g alpha`, and the relative residual of
/// the proportionality at `p`.
pub fn map_log_factor(alpha: &ContactForm, psi: &DiffMap, p: &Point) -> Result<(f64, f64)> {
    let dom = alpha.domain();
    let q = psi.apply_raw(p)?;
    let pb = psi.jacobian_raw(p)?.transpose() * alpha.form().eval_raw(&q, 0.0)?;
    let a = alpha.form().eval_raw(p, 0.0)?;
    let (f, r) = proportionality(&a, &pb, &dom.tangent_frame(p));
    if f <= 0.0 {
        return Err(Error::Usage(format!(
            "map `{}` does not preserve the coorientation at {:?}",
            psi.label(),
            coords(p)
        )));
    }
    Ok((f.ln(), r / (f * a.norm())))
}

struct Composed {
    outer: Arc<dyn LoopFlow>,
    inner: Arc<dyn LoopFlow>,
}

impl LoopFlow for Composed {
    fn flow(&self, p: &Point, t: f64) -> Result<Point> {
        self.outer.flow(&self.inner.flow(p, t)?, t)
    }
    fn inverse(&self, q: &Point, t: f64) -> Result<Point> {
        self.inner.inverse(&self.outer.inverse(q, t)?, t)
    }
    fn log_factor(&self, p: &Point, t: f64) -> Result<f64> {
        Ok(self.outer.log_factor(&self.inner.flow(p, t)?, t)? + self.inner.log_factor(p, t)?)
    }
}

type LogFactor = Arc<dyn Fn(&Point) -> Result<f64> + Send + Sync>;

struct Conjugated {
    inner: Arc<dyn LoopFlow>,
    psi: DiffMap,
    g: LogFactor,
}

impl LoopFlow for Conjugated {
    fn flow(&self, p: &Point, t: f64) -> Result<Point> {
        let a = self.psi.apply_inverse_raw(p)?;
        self.psi.apply_raw(&self.inner.flow(&a, t)?)
    }
    fn inverse(&self, q: &Point, t: f64) -> Result<Point> {
        let a = self.psi.apply_inverse_raw(q)?;
        self.psi.apply_raw(&self.inner.inverse(&a, t)?)
    }
    fn log_factor(&self, p: &Point, t: f64) -> Result<f64> {
        let a = self.psi.apply_inverse_raw(p)?;
        let b = self.inner.flow(&a, t)?;
        let ga = match self.psi.log_factor_with_image(&a, p) {
            Some(v) => v?,
            None => (self.g)(&a)?,
        };
        Ok((self.g)(&b)? + self.inner.log_factor(&a, t)? - ga)
    }
}

struct Concatenated {
    pieces: Vec<Arc<dyn LoopFlow>>,
}

/// Piece index and local time of the concatenation at time `t`.
pub fn piece_time(l: usize, t: f64) -> (usize, f64) {
    let s = l as f64 * t;
    let i = ((s / TAU).floor().max(0.0) as usize).min(l - 1);
    (i, s - TAU * i as f64)
}

impl LoopFlow for Concatenated {
    fn flow(&self, p: &Point, t: f64) -> Result<Point> {
        let (i, s) = piece_time(self.pieces.len(), t);
        self.pieces[i].flow(p, s)
    }
    fn inverse(&self, q: &Point, t: f64) -> Result<Point> {
        let (i, s) = piece_time(self.pieces.len(), t);
        self.pieces[i].inverse(q, s)
    }
    fn log_factor(&self, p: &Point, t: f64) -> Result<f64> {
        let (i, s) = piece_time(self.pieces.len(), t);
        self.pieces[i].log_factor(p, s)
    }
}

fn merged_focus(a: &[Point], b: &[Point]) -> Vec<Point> {
    a.iter().chain(b).copied().collect()
}

/// Largest relative discrepancy between the loop's Hamiltonian and the extraction oracle.
pub fn oracle_discrepancy(l: &ContactLoop, points: &[Point], times: &[f64]) -> Result<(f64, Point, f64)> {
    let dom = l.domain().clone();
    let rows = par_map(points, |p| {
        let q = dom.check(p)?;
        let mut worst = (0.0, q, 0.0);
        for &t in times {
            let h = l.ham_at(&q, t)?;
            let e = extract_at(l, &q, t)?;
            let d = (h - e).abs() / (1.0 + h.abs());
            if d > worst.0 {
                worst = (d, q, t);
            }
        }
        Ok(worst)
    })?;
    Ok(rows.into_iter().fold((0.0, Point::zeros(), 0.0), |a, b| if b.0 > a.0 { b } else { a }))
}

fn cross_check(l: &ContactLoop) -> Result<()> {
    let cfg = l.config;
    if cfg.oracle_samples == 0 {
        return Ok(());
    }
    let mut pts = l.domain().sample(cfg.oracle_samples, cfg.seed ^ 0x5eed);
    pts.extend(l.focus.iter().map(|p| l.domain().project(p)));
    let (d, p, t) = oracle_discrepancy(l, &pts, &ORACLE_TIMES)?;
    if d > cfg.oracle_tolerance {
        return Err(Error::Convention {
            discrepancy: d,
            point: coords(&p),
            time: t,
        });
    }
    Ok(())
}

fn same_form(a: &ContactLoop, b: &ContactLoop) -> Result<()> {
    if a.domain().same_as(b.domain()) {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "loops `{}` and `{}` live on different domains",
            a.label, b.label
        )))
    }
}

/// `Phi_t o Psi_t` with Hamiltonian `F(p,t) + e^{f_t(Phi_t^{-1} p)} G(Phi_t^{-1} p, t)`.
pub fn compose_loops(phi: &ContactLoop, psi: &ContactLoop) -> Result<ContactLoop> {
    same_form(phi, psi)?;
    let (a, b) = (phi.clone(), psi.clone());
    let ham = ScalarField::from_fn(phi.domain().clone(), false, move |p, t| {
        let q = a.flow.inverse(p, t)?;
        Ok(a.ham.eval_raw(p, t)? + a.flow.log_factor(&q, t)?.exp() * b.ham.eval_raw(&q, t)?)
    });
    let l = ContactLoop {
        label: format!("{}∘{}", phi.label, psi.label),
        alpha: phi.alpha.clone(),
        ham,
        flow: Arc::new(Composed {
            outer: phi.flow.clone(),
            inner: psi.flow.clone(),
        }),
        provenance: Provenance::Composed,
        smooth: phi.smooth && psi.smooth,
        closure: None,
        focus: merged_focus(&phi.focus, &psi.focus),
        time_scale: phi.time_scale.max(psi.time_scale),
        config: phi.config,
    };
    cross_check(&l)?;
    Ok(l)
}

/// `psi o phi_t o psi^{-1}` with Hamiltonian `e^{g(psi^{-1} p)} F(psi^{-1} p, t)`, `psi^* alpha = e^g alpha`.
pub fn conjugate_loop(l: &ContactLoop, psi: &DiffMap) -> Result<ContactLoop> {
    if !psi.source().same_as(l.domain()) || !psi.target().same_as(l.domain()) {
        return Err(Error::Usage(format!(
            "conjugating map `{}` must act on `{}`",
            psi.label(),
            l.domain().name()
        )));
    }
    let cfg = l.config;
    let mut probe = l.domain().sample(cfg.oracle_samples.max(4), cfg.seed ^ 0xc0de);
    probe.extend(psi.focus().iter().map(|p| l.domain().project(p)));
    let alpha = l.alpha.clone();
    let checks = par_map(&probe, |p| {
        let (g, r) = map_log_factor(&alpha, psi, p)?;
        let analytic = match psi.analytic_log_factor() {
            Some(f) => f(p)?,
            None => g,
        };
        Ok((r, (analytic - g).abs(), *p))
    })?;
    for (r, dg, p) in checks {
        if r > 1e-6 || dg > 1e-6 {
            return Err(Error::Usage(format!(
                "`{}` is not a contactomorphism of `{}`: residual {:.3e}, factor mismatch {:.3e} at {:?}",
                psi.label(),
                alpha.label(),
                r,
                dg,
                coords(&p)
            )));
        }
    }
    let g: LogFactor = match psi.analytic_log_factor() {
        Some(f) => f.clone(),
        None => {
            let (a, m) = (alpha.clone(), psi.clone());
            Arc::new(move |p| Ok(map_log_factor(&a, &m, p)?.0))
        }
    };
    let (inner, m, g2) = (l.clone(), psi.clone(), g.clone());
    let ham = ScalarField::from_fn(l.domain().clone(), l.ham.is_autonomous(), move |p, t| {
        let q = m.apply_inverse_raw(p)?;
        let g = match m.log_factor_with_image(&q, p) {
            Some(v) => v?,
            None => g2(&q)?,
        };
        Ok(g.exp() * inner.ham.eval_raw(&q, t)?)
    });
    let mut focus = l.focus.clone();
    focus.extend_from_slice(psi.focus());
    let out = ContactLoop {
        label: format!("{}·{}·{}⁻¹", psi.label(), l.label, psi.label()),
        alpha: l.alpha.clone(),
        ham,
        flow: Arc::new(Conjugated {
            inner: l.flow.clone(),
            psi: psi.clone(),
            g,
        }),
        provenance: Provenance::Conjugated,
        smooth: l.smooth,
        closure: None,
        focus,
        time_scale: l.time_scale,
        config: l.config,
    };
    cross_check(&out)?;
    Ok(out)
}

/// Runs the `l` loops one after the other, each at `l`-fold speed.
pub fn concatenate_loops(loops: &[ContactLoop]) -> Result<ContactLoop> {
    let Some(first) = loops.first() else {
        return Err(Error::Usage("concatenation of an empty list".into()));
    };
    if loops.len() == 1 {
        return Ok(first.clone());
    }
    for l in loops {
        same_form(first, l)?;
        if let Some(c) = &l.closure {
            if !c.passes {
                return Err(Error::Usage(format!(
                    "loop `{}` does not close ({:.3e}); it cannot be concatenated",
                    l.label, c.max_distance
                )));
            }
        }
    }
    let n = loops.len();
    let self_concat = loops.iter().all(|l| {
        std::ptr::addr_eq(Arc::as_ptr(&l.flow), Arc::as_ptr(&first.flow)) && l.smooth
    });
    let hams: Vec<ScalarField> = loops.iter().map(|l| l.ham.clone()).collect();
    let ham = ScalarField::from_fn(first.domain().clone(), false, move |p, t| {
        if self_concat {
            return Ok(n as f64 * hams[0].eval_raw(p, n as f64 * t)?);
        }
        let (i, s) = piece_time(n, reduce_time(t));
        Ok(n as f64 * hams[i].eval_raw(p, s)?)
    });
    let l = ContactLoop {
        label: if self_concat {
            format!("{}^⊙{}", first.label, n)
        } else {
            loops.iter().map(|l| l.label.as_str()).collect::<Vec<_>>().join("⊙")
        },
        alpha: first.alpha.clone(),
        ham,
        flow: Arc::new(Concatenated {
            pieces: loops.iter().map(|l| l.flow.clone()).collect(),
        }),
        provenance: Provenance::Concatenated,
        smooth: self_concat,
        closure: None,
        focus: if self_concat {
            first.focus.clone()
        } else {
            loops.iter().flat_map(|l| l.focus.iter().copied()).collect()
        },
        time_scale: n as f64 * loops.iter().map(|l| l.time_scale).fold(1.0, f64::max),
        config: first.config,
    };
    cross_check(&l)?;
    Ok(l)
}

/// `k`-fold self-concatenation.
pub fn self_concatenate(l: &ContactLoop, k: usize) -> Result<ContactLoop> {
    if k == 0 {
        return Err(Error::Usage("self-concatenation needs k >= 1".into()));
    }
    concatenate_loops(&vec![l.clone(); k])
}
