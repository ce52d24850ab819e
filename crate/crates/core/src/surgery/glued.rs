use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Matrix4;
use serde::Serialize;

use crate::contact::ContactForm;
use crate::error::{coords, Error, Result};
use crate::fieldcalc::sweep::{argmax, par_map};
use crate::fieldcalc::{proportionality, time_nodes, DiffMap, Grid, GridSpec, Point, ScalarField, VectorField};
use crate::loopalg::{
    certify_positivity, certify_scalar, check_closure, ClosureReport, ContactLoop, ExactFlow, PositivityCertificate,
    PositivityThresholds, Verdict,
};
use crate::models::{model_s1s2, ModelManifold};

use super::darboux::NormalFormTube;
use super::gluing::{gluing_maps, GluingMaps};
use super::knot::FramedTransverseKnot;
use super::tube::{default_tube_radius, tube_embedding_with};

pub const ROUND_TRIP_TOLERANCE: f64 = 1e-9;
pub const KERNEL_TOLERANCE: f64 = 1e-6;

/// One side of a fibered sum: a contact manifold and a contact tube `S^1 x D^2(rho) -> M`
/// around the knot to be removed.
#[derive(Clone, Debug)]
pub struct TubeSide {
    pub name: String,
    pub alpha: ContactForm,
    pub tube: DiffMap,
    pub tube_radius: f64,
    /// Label of the removed core circle.
    pub core: String,
}

impl TubeSide {
    pub fn from_embedding(m: &ModelManifold, knot: &FramedTransverseKnot, radius: f64) -> Result<Self> {
        let t = tube_embedding_with(m, knot, Some(radius), 16)?;
        Ok(Self {
            name: m.name().to_string(),
            alpha: m.alpha().clone(),
            tube: t.map,
            tube_radius: radius,
            core: knot.name().to_string(),
        })
    }

    pub fn from_normal_form(name: &str, alpha: &ContactForm, t: &NormalFormTube) -> Self {
        Self {
            name: name.to_string(),
            alpha: alpha.clone(),
            tube: t.map.clone(),
            tube_radius: t.radius(),
            core: format!("orbit of {:?}", t.report.center),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Piece {
    pub name: String,
    pub domain: String,
    pub coords: Vec<String>,
    pub form: String,
    /// Core circle removed from the piece, if any.
    pub removed: Option<String>,
}

/// Chart change `neck ⊃ {sign v > 0} -> M_i`, `w -> tube_i(g_i^{-1}(w))`.
#[derive(Clone, Debug)]
pub struct Transition {
    pub label: String,
    pub piece: usize,
    pub sign: f64,
    tube: DiffMap,
    gluing: DiffMap,
}

impl Transition {
    pub fn to_piece(&self, w: &Point) -> Result<Point> {
        self.tube.apply_raw(&self.gluing.apply_inverse_raw(w)?)
    }

    pub fn to_neck(&self, y: &Point) -> Result<Point> {
        self.gluing.apply_raw(&self.tube.apply_inverse_raw(y)?)
    }

    /// Jacobian of `to_piece`: `D tube · (D g)^{-1}`, with `D g` analytic.
    pub fn jacobian(&self, w: &Point) -> Result<Matrix4<f64>> {
        let x = self.gluing.apply_inverse_raw(w)?;
        let jg = self.gluing.jacobian_raw(&x)?;
        let inv = jg
            .fixed_view::<3, 3>(0, 0)
            .into_owned()
            .try_inverse()
            .ok_or_else(|| Error::Conditioning {
                condition: f64::INFINITY,
                point: coords(w),
            })?;
        let mut ji = Matrix4::zeros();
        ji.fixed_view_mut::<3, 3>(0, 0).copy_from(&inv);
        Ok(self.tube.jacobian_raw(&x)? * ji)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapReport {
    pub transition: String,
    pub samples: usize,
    pub max_round_trip: f64,
    /// Largest relative residual of `T^* alpha_i` against a multiple of `eta`.
    pub max_kernel_residual: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    pub worst: Vec<f64>,
    pub passes: bool,
}

/// Three-chart conformal atlas `(M_1 - core) ∪ A_R ∪ (M_2 - core)`. Each chart keeps its own form.
#[derive(Clone, Debug)]
pub struct GluedManifold {
    pub tag: String,
    pub radius: f64,
    pub pieces: Vec<Piece>,
    pub forms: Vec<ContactForm>,
    pub maps: GluingMaps,
    pub transitions: Vec<Transition>,
    pub overlaps: Vec<OverlapReport>,
    pub notes: Vec<String>,
}

/// Overlap sample in the neck: `theta x v x phi` with `sign v in R^2 [0.05, 0.95]`.
pub fn overlap_samples(radius: f64, sign: f64, n: usize) -> Vec<Point> {
    let r2 = radius * radius;
    let nv = (n / 2).max(2);
    let mut pts = Vec::with_capacity(n * n * nv);
    for i in 0..n {
        for j in 0..nv {
            for k in 0..n {
                let v = r2 * (0.05 + 0.9 * j as f64 / (nv - 1) as f64);
                let th = TAU * (i as f64 + 0.25) / n as f64;
                let ph = TAU * (k as f64 + 0.5) / n as f64;
                pts.push(Point::new(th, sign * v, ph, 0.0));
            }
        }
    }
    pts
}

fn check_overlap(t: &Transition, alpha: &ContactForm, maps: &GluingMaps, n: usize) -> Result<OverlapReport> {
    let neck = maps.neck.domain().clone();
    let eta = maps.neck.alpha().clone();
    let pts = overlap_samples(maps.radius, t.sign, n);
    let rows = par_map(&pts, |w| {
        let y = t.to_piece(w)?;
        let back = t.to_neck(&y)?;
        let rt = neck.distance(&back, w);
        let pb = t.jacobian(w)?.transpose() * alpha.form().eval_raw(&y, 0.0)?;
        let e = eta.form().eval_raw(w, 0.0)?;
        let (f, r) = proportionality(&e, &pb, &neck.tangent_frame(w));
        Ok((rt, r / (f.abs() * e.norm()), f))
    })?;
    let rts: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ker: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (i, kmax) = argmax(&ker).unwrap_or((0, 0.0));
    let (j, rmax) = argmax(&rts).unwrap_or((0, 0.0));
    let min_factor = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let max_factor = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let passes = rmax < ROUND_TRIP_TOLERANCE && kmax < KERNEL_TOLERANCE && min_factor > 0.0;
    let worst = if rmax >= ROUND_TRIP_TOLERANCE { &pts[j] } else { &pts[i] };
    Ok(OverlapReport {
        transition: t.label.clone(),
        samples: pts.len(),
        max_round_trip: rmax,
        max_kernel_residual: kmax,
        min_factor,
        max_factor,
        worst: coords(worst),
        passes,
    })
}

/// Fibered sum along two given contact tubes, with gluing radius `R <= ` both tube radii.
pub fn fibered_sum_tubes(a: &TubeSide, b: &TubeSide, radius: Option<f64>, overlap_n: usize) -> Result<GluedManifold> {
    let rmax = a.tube_radius.min(b.tube_radius);
    let radius = radius.unwrap_or(rmax);
    if radius > rmax {
        return Err(Error::ShrinkRadius { radius });
    }
    let maps = gluing_maps(radius)?;
    let piece = |i: usize, s: &TubeSide| Piece {
        name: format!("M{i}:{}", s.name),
        domain: s.alpha.domain().name().to_string(),
        coords: s.alpha.domain().coord_names().to_vec(),
        form: s.alpha.label().to_string(),
        removed: Some(s.core.clone()),
    };
    let neck = Piece {
        name: "neck".into(),
        domain: maps.neck.domain().name().to_string(),
        coords: maps.neck.domain().coord_names().to_vec(),
        form: maps.neck.alpha().label().to_string(),
        removed: None,
    };
    let transitions = vec![
        Transition {
            label: format!("g1∘{}", a.tube.label()),
            piece: 0,
            sign: 1.0,
            tube: a.tube.clone(),
            gluing: maps.g1.clone(),
        },
        Transition {
            label: format!("g2∘{}", b.tube.label()),
            piece: 2,
            sign: -1.0,
            tube: b.tube.clone(),
            gluing: maps.g2.clone(),
        },
    ];
    let forms = vec![a.alpha.clone(), maps.neck.alpha().clone(), b.alpha.clone()];
    let mut overlaps = Vec::new();
    for t in &transitions {
        let r = check_overlap(t, &forms[t.piece], &maps, overlap_n)?;
        if !r.passes {
            let mismatch = if r.max_round_trip >= ROUND_TRIP_TOLERANCE { r.max_round_trip } else { r.max_kernel_residual };
            return Err(Error::Gluing {
                what: format!("overlap of `{}` (min factor {:.3e})", r.transition, r.min_factor),
                mismatch,
                witness: r.worst,
            });
        }
        overlaps.push(r);
    }
    Ok(GluedManifold {
        tag: format!("{}#{}", a.name, b.name),
        radius,
        pieces: vec![piece(1, a), neck, piece(2, b)],
        forms,
        maps,
        transitions,
        overlaps,
        notes: Vec::new(),
    })
}

/// `(M_1, xi_1) # (M_2, xi_2)` along two marked knots, through ansatz tubes of radius `R`.
pub fn fibered_sum(
    m1: &ModelManifold,
    knot1: &FramedTransverseKnot,
    m2: &ModelManifold,
    knot2: &FramedTransverseKnot,
    radius: Option<f64>,
) -> Result<GluedManifold> {
    let radius = match radius {
        Some(r) => r,
        None => default_tube_radius(m1, knot1)?.min(default_tube_radius(m2, knot2)?),
    };
    let a = TubeSide::from_embedding(m1, knot1, radius)?;
    let b = TubeSide::from_embedding(m2, knot2, radius)?;
    fibered_sum_tubes(&a, &b, Some(radius), 8)
}

pub const SMOOTH_TYPE_NOTE: &str = "smooth type unchanged: not checked";

/// Fibered sum with `(S^1 x S^2, xi_st)` along `Gamma`.
pub fn half_lutz(m: &ModelManifold, knot: &FramedTransverseKnot) -> Result<GluedManifold> {
    let s = model_s1s2()?;
    let g = s.knot("Gamma")?.clone();
    let mut out = fibered_sum(m, knot, &s, &g, None)?;
    tag_half_lutz(&mut out, m.name(), knot.name());
    Ok(out)
}

pub(crate) fn tag_half_lutz(g: &mut GluedManifold, model: &str, knot: &str) {
    g.tag = format!("half-lutz({model}, {knot})");
    g.notes.push(SMOOTH_TYPE_NOTE.to_string());
}

impl GluedManifold {
    pub fn neck(&self) -> &ModelManifold {
        &self.maps.neck
    }

    /// Conformal factor `c` with `T^* alpha_i = c eta` at a neck point of the overlap.
    pub fn overlap_factor(&self, transition: usize, w: &Point) -> Result<f64> {
        let t = &self.transitions[transition];
        let y = t.to_piece(w)?;
        let pb = t.jacobian(w)?.transpose() * self.forms[t.piece].form().eval_raw(&y, 0.0)?;
        let e = self.maps.neck.alpha().form().eval_raw(w, 0.0)?;
        Ok(proportionality(&e, &pb, &self.maps.neck.domain().tangent_frame(w)).0)
    }

    /// Plain-text chart table: one `piece`, `transition` and `note` record per line.
    pub fn chart_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# chart-table v1");
        let _ = writeln!(s, "tag {}", self.tag);
        let _ = writeln!(s, "radius {:.17e}", self.radius);
        for (i, p) in self.pieces.iter().enumerate() {
            let _ = writeln!(
                s,
                "piece {i} name={} domain={} coords={} form={} removed={}",
                p.name,
                p.domain,
                p.coords.join(","),
                p.form,
                p.removed.as_deref().unwrap_or("-").replace(' ', "_")
            );
        }
        for (t, o) in self.transitions.iter().zip(&self.overlaps) {
            let _ = writeln!(
                s,
                "transition {} from=1 to={} side={} samples={} round_trip={:.17e} kernel={:.17e} factor_min={:.17e} factor_max={:.17e}",
                t.label,
                t.piece,
                if t.sign > 0.0 { "+" } else { "-" },
                o.samples,
                o.max_round_trip,
                o.max_kernel_residual,
                o.min_factor,
                o.max_factor
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note {n}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlueConfig {
    /// Neck samples per periodic axis (half as many along `v`).
    pub overlap: usize,
    pub times: usize,
    pub field_tolerance: f64,
    pub closure_tolerance: f64,
    pub closure_samples: usize,
    /// Grid and time resolution of piece certificates not supplied by the caller.
    pub cert_grid: usize,
    pub cert_times: usize,
    pub seed: u64,
}

impl Default for GlueConfig {
    fn default() -> Self {
        Self {
            overlap: 10,
            times: 4,
            field_tolerance: 1e-5,
            closure_tolerance: 1e-5,
            closure_samples: 16,
            cert_grid: 16,
            cert_times: 8,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldOverlapReport {
    pub transition: String,
    pub samples: usize,
    pub times: usize,
    /// `max |D T e_theta - X_i(T w, t)|`.
    pub max_field_mismatch: f64,
    /// `max |H_i(T w, t) / c(w) - 1|` with `c` the overlap conformal factor.
    pub max_ham_ratio_deviation: f64,
    pub worst: Vec<f64>,
    pub worst_time: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartCertificate {
    pub chart: String,
    pub positivity: PositivityCertificate,
    pub closure: ClosureReport,
}

/// Chartwise loop on a glued manifold: `L_1` on piece 0, `d_theta` on the neck, `L_2` on piece 2.
#[derive(Clone)]
pub struct GluedLoop {
    pub manifold: GluedManifold,
    pub loops: Vec<ContactLoop>,
    pub overlaps: Vec<FieldOverlapReport>,
    pub charts: Vec<ChartCertificate>,
    pub verdict: Verdict,
}

impl std::fmt::Debug for GluedLoop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GluedLoop")
            .field("tag", &self.manifold.tag)
            .field("overlaps", &self.overlaps)
            .field("verdict", &self.verdict)
            .finish()
    }
}

impl GluedLoop {
    /// Field of chart `i` at time `t`.
    pub fn field(&self, chart: usize) -> Result<VectorField> {
        self.loops[chart].field()
    }

    pub fn max_field_mismatch(&self) -> f64 {
        self.overlaps.iter().map(|o| o.max_field_mismatch).fold(0.0, f64::max)
    }

    pub fn max_closure(&self) -> f64 {
        self.charts.iter().map(|c| c.closure.max_distance).fold(0.0, f64::max)
    }

    pub fn min_hamiltonian(&self) -> f64 {
        self.charts.iter().map(|c| c.positivity.min).fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self) -> bool {
        self.verdict == Verdict::Positive
    }
}

/// Neck loop `(theta, v, phi) -> (theta + t, v, phi)` with Hamiltonian `eta(d_theta) = 1`.
pub fn neck_loop(neck: &ModelManifold) -> Result<ContactLoop> {
    let dom = neck.domain().clone();
    let flow = ExactFlow::strict(
        |p, t| Ok(Point::new(p[0] + t, p[1], p[2], 0.0)),
        |q, t| Ok(Point::new(q[0] - t, q[1], q[2], 0.0)),
    );
    ContactLoop::exact("neck", neck.alpha(), ScalarField::constant(dom, 1.0), Arc::new(flow))
}

fn field_overlap(
    t: &Transition,
    l: &ContactLoop,
    g: &GluedManifold,
    cfg: &GlueConfig,
) -> Result<FieldOverlapReport> {
    let field = l.field()?;
    let pts = overlap_samples(g.radius, t.sign, cfg.overlap);
    let times: Vec<f64> = time_nodes(cfg.times.max(1)).iter().map(|s| s + 0.1).collect();
    let eta = g.maps.neck.alpha().clone();
    let neck = g.maps.neck.domain().clone();
    let alpha = &g.forms[t.piece];
    let rows = par_map(&pts, |w| {
        let y = t.to_piece(w)?;
        let j = t.jacobian(w)?;
        let e_theta = j.column(0).into_owned();
        let pb = j.transpose() * alpha.form().eval_raw(&y, 0.0)?;
        let e = eta.form().eval_raw(w, 0.0)?;
        let c = proportionality(&e, &pb, &neck.tangent_frame(w)).0;
        let mut worst = (0.0f64, 0.0f64, 0.0f64);
        for &s in &times {
            let x = field.eval_raw(&y, s)?;
            let d = (e_theta - x).norm();
            let h = l.hamiltonian().eval_raw(&y, s)?;
            if d > worst.0 {
                worst.2 = s;
            }
            worst.0 = worst.0.max(d);
            worst.1 = worst.1.max((h / c - 1.0).abs());
        }
        Ok(worst)
    })?;
    let mis: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (i, m) = argmax(&mis).unwrap_or((0, 0.0));
    let ratio = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(FieldOverlapReport {
        transition: t.label.clone(),
        samples: pts.len(),
        times: times.len(),
        max_field_mismatch: m,
        max_ham_ratio_deviation: ratio,
        worst: pts.get(i).map(coords).unwrap_or_default(),
        worst_time: rows.get(i).map(|r| r.2).unwrap_or(0.0),
        passes: m < cfg.field_tolerance && ratio < cfg.field_tolerance,
    })
}

pub fn glue_loops(
    l1: &ContactLoop,
    p1: &Point,
    l2: &ContactLoop,
    p2: &Point,
    g: &GluedManifold,
) -> Result<GluedLoop> {
    glue_loops_with(l1, p1, l2, p2, g, &GlueConfig::default(), [None, None])
}

/// Assembles and certifies the chartwise loop. `known` may supply positivity certificates of
/// `L_1`, `L_2` computed elsewhere; missing ones are computed on a `cert_grid` grid.
pub fn glue_loops_with(
    l1: &ContactLoop,
    p1: &Point,
    l2: &ContactLoop,
    p2: &Point,
    g: &GluedManifold,
    cfg: &GlueConfig,
    known: [Option<PositivityCertificate>; 2],
) -> Result<GluedLoop> {
    for (l, p, t) in [(l1, p1, &g.transitions[0]), (l2, p2, &g.transitions[1])] {
        if !l.domain().same_as(g.forms[t.piece].domain()) {
            return Err(Error::Usage(format!(
                "loop `{}` lives on `{}`, not on piece `{}`",
                l.label(),
                l.domain().name(),
                g.pieces[t.piece].name
            )));
        }
        let core = t.tube.apply_raw(&Point::zeros())?;
        let d = l.domain().distance(&core, &l.domain().check(p)?);
        if d > 1e-8 {
            return Err(Error::Usage(format!(
                "tube `{}` is not centered on the orbit of {:?} (distance {d:.3e})",
                t.tube.label(),
                coords(p)
            )));
        }
    }
    let neck = neck_loop(&g.maps.neck)?;
    let loops = vec![l1.clone(), neck, l2.clone()];

    let mut overlaps = Vec::new();
    for t in &g.transitions {
        let r = field_overlap(t, &loops[t.piece], g, cfg)?;
        if !r.passes {
            return Err(Error::Gluing {
                what: format!("loop fields on `{}` (H ratio {:.3e})", r.transition, r.max_ham_ratio_deviation),
                mismatch: r.max_field_mismatch,
                witness: r.worst,
            });
        }
        overlaps.push(r);
    }

    let [k1, k2] = known;
    let mut charts = Vec::new();
    for (i, l) in loops.iter().enumerate() {
        let dom = l.domain().clone();
        let mut samples = dom.sample(cfg.closure_samples, cfg.seed + i as u64);
        if let Some(t) = g.transitions.iter().find(|t| t.piece == i) {
            for w in overlap_samples(g.radius, t.sign, 2).iter().take(cfg.closure_samples.max(1)) {
                samples.push(t.to_piece(w)?);
            }
        }
        let closure = check_closure(l, &samples, cfg.closure_tolerance)?;
        if !closure.passes {
            return Err(Error::NotALoop {
                closure: closure.max_distance,
            });
        }
        let supplied = match i {
            0 => k1.clone(),
            2 => k2.clone(),
            _ => None,
        };
        let positivity = match supplied {
            Some(c) => c,
            None if i == 1 => {
                let grid = Grid::from_spec(&dom, &GridSpec::uniform(cfg.cert_grid));
                certify_scalar(&grid, &time_nodes(cfg.cert_times), &PositivityThresholds::default(), |p, t| {
                    l.hamiltonian().eval(p, t)
                })?
            }
            None => certify_positivity(l, &Grid::from_spec(&dom, &GridSpec::uniform(cfg.cert_grid)), cfg.cert_times)?,
        };
        charts.push(ChartCertificate {
            chart: g.pieces[i].name.clone(),
            positivity,
            closure,
        });
    }
    let first = charts[0].positivity.verdict;
    let verdict = if charts.iter().all(|c| c.positivity.verdict == first) {
        first
    } else {
        Verdict::Indefinite
    };
    Ok(GluedLoop {
        manifold: g.clone(),
        loops,
        overlaps,
        charts,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{loop_hopf, model_s3};
    use crate::surgery::darboux::normal_form_tube;

    #[test]
    fn half_lutz_of_s1s2_along_gamma_copy() {
        let s = model_s1s2().unwrap();
        let g = half_lutz(&s, s.knot("Gamma").unwrap()).unwrap();
        assert_eq!(g.pieces.len(), 3);
        for o in &g.overlaps {
            assert!(o.max_round_trip < 1e-9 && o.max_kernel_residual < 1e-6 && o.min_factor > 0.0, "{o:?}");
        }
        assert!(g.notes.iter().any(|n| n == SMOOTH_TYPE_NOTE));
        let table = g.chart_table();
        assert_eq!(table.lines().filter(|l| l.starts_with("piece ")).count(), 3);
        assert_eq!(table.lines().filter(|l| l.starts_with("transition ")).count(), 2);
    }

    #[test]
    fn radius_larger_than_tube_is_rejected() {
        let h = model_s3().unwrap();
        let k = h.knot("hopf").unwrap();
        let a = TubeSide::from_embedding(&h, k, 0.1).unwrap();
        assert!(matches!(fibered_sum_tubes(&a, &a, Some(0.2), 4), Err(Error::ShrinkRadius { .. })));
    }

    #[test]
    fn hopf_loops_glue_to_a_positive_loop() {
        let h = model_s3().unwrap();
        let l = loop_hopf(h.alpha()).unwrap();
        let p = Point::new(1.0, 0.0, 0.0, 0.0);
        let t = normal_form_tube(&l, &p).unwrap();
        let side = TubeSide::from_normal_form("s3", h.alpha(), &t);
        let g = fibered_sum_tubes(&side, &side, None, 6).unwrap();
        let cfg = GlueConfig {
            overlap: 6,
            cert_grid: 8,
            cert_times: 4,
            ..GlueConfig::default()
        };
        let gl = glue_loops_with(&l, &p, &l, &p, &g, &cfg, [None, None]).unwrap();
        assert!(gl.is_positive(), "{gl:?}");
        assert!(gl.max_field_mismatch() < 1e-5 && gl.max_closure() < 1e-5);
        let wrong = Point::new(0.0, 0.0, 1.0, 0.0);
        assert!(matches!(glue_loops(&l, &wrong, &l, &p, &g), Err(Error::Usage(_))));
    }
}
