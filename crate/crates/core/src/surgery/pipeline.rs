use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fieldcalc::{time_nodes, Point};
use crate::loopalg::{certify_positivity, check_local_autonomy, ContactLoop, PositivityCertificate};
use crate::models::{default_displacement, find_min_k_from, loop_beta, loop_delta, loop_rho, loop_zeta, model_s1s2, KSearch, ModelManifold};

use super::darboux::{normal_form_tube_with, TubeConfig, TubeReport};
use super::glued::{
    fibered_sum_tubes, glue_loops_with, tag_half_lutz, ChartCertificate, FieldOverlapReport, GlueConfig, GluedLoop,
    OverlapReport, TubeSide,
};

/// North pole orbit `(0; 0, 0, 1)` of `S^1 x S^2`, along which `delta(k)` is glued.
pub fn north_pole() -> Point {
    Point::new(0.0, 0.0, 0.0, 1.0)
}

/// Loop on the source manifold: given, or the `delta(k)` the pipeline constructs.
#[derive(Clone, Debug)]
pub enum SourceLoop {
    Given(ContactLoop),
    Delta,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineConfig {
    /// Spatial resolution of the `beta` and `delta(k)` certificates.
    pub grid: usize,
    pub times: usize,
    pub k_cap: u32,
    /// Required `min H(delta(k))`.
    pub k_margin: f64,
    /// Starting value of the `k` search; defaults to `ceil(1 / min beta)`.
    pub k_start: Option<usize>,
    /// Gluing radius; defaults to the smaller tube radius.
    pub radius: Option<f64>,
    pub overlap: usize,
    pub tube: TubeConfig,
    pub glue: GlueConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            grid: 48,
            times: 64,
            k_cap: 2000,
            k_margin: 0.0,
            k_start: None,
            radius: None,
            overlap: 10,
            tube: TubeConfig::default(),
            glue: GlueConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Reduced resolution for quick end-to-end runs.
    pub fn smoke() -> Self {
        Self {
            grid: 24,
            times: 8,
            overlap: 6,
            tube: TubeConfig {
                grid: 8,
                times: 2,
                ..TubeConfig::default()
            },
            glue: GlueConfig {
                overlap: 6,
                times: 2,
                closure_samples: 8,
                cert_grid: 12,
                cert_times: 4,
                ..GlueConfig::default()
            },
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything the pipeline certified, in machine-readable form.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateBundle {
    pub source: String,
    pub point: Vec<f64>,
    pub tag: String,
    pub radius: f64,
    pub beta_t2: PositivityCertificate,
    pub k_search: KSearch,
    pub tubes: Vec<TubeReport>,
    pub overlaps: Vec<OverlapReport>,
    pub field_overlaps: Vec<FieldOverlapReport>,
    pub charts: Vec<ChartCertificate>,
    pub notes: Vec<String>,
    pub chart_table: String,
    pub positive: bool,
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

struct Stages {
    clock: Instant,
    timings: Vec<StageTiming>,
}

impl Stages {
    fn run<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        self.clock = Instant::now();
        let out = f().map_err(|e| e.staged(stage));
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: self.clock.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Half Lutz twist of `M` along the orbit of `p` under `L`, carrying the glued positive loop
/// `L # delta(k)`.
pub fn theorem1_pipeline(
    m: &ModelManifold,
    source: &SourceLoop,
    p: &Point,
    cfg: &PipelineConfig,
) -> Result<(GluedLoop, CertificateBundle)> {
    let mut st = Stages {
        clock: Instant::now(),
        timings: Vec::new(),
    };
    if let SourceLoop::Given(l) = source {
        st.run("precondition", || {
            if !l.domain().same_as(m.domain()) {
                return Err(Error::Usage(format!("loop `{}` does not live on `{}`", l.label(), m.name())));
            }
            autonomous(l, p, &cfg.tube)
        })?;
    }
    let s = st.run("model", model_s1s2)?;
    let (rho, zeta, psi) = st.run("displacement", || {
        Ok((loop_rho(s.alpha())?, loop_zeta(s.alpha())?, default_displacement(s.alpha())?))
    })?;
    let beta = st.run("beta", || loop_beta(&rho, &psi))?;
    let times = time_nodes(cfg.times);
    let beta_t2 = st.run("beta-positivity", || {
        let c = certify_positivity(&beta, &s.region_grid("T2", cfg.grid, true)?, cfg.times)?;
        if c.min <= 0.0 {
            return Err(Error::Positivity {
                value: c.min,
                witness: c.argmin.clone(),
            });
        }
        Ok(c)
    })?;
    let search = st.run("k-search", || {
        let start = cfg.k_start.unwrap_or((1.0 / beta_t2.min).ceil() as usize);
        let grid = s.union_grid(&["T1", "T2"], cfg.grid)?;
        find_min_k_from(&beta, &zeta, beta_t2.min, &grid, &times, cfg.k_margin, cfg.k_cap, start)
    })?;
    let delta = st.run("delta", || loop_delta(search.k, &beta, &zeta))?;
    let q = north_pole();
    let l1 = match source {
        SourceLoop::Given(l) => l.clone(),
        SourceLoop::Delta => {
            st.run("precondition", || {
                if m.name() != s.name() {
                    return Err(Error::Usage(format!("delta(k) lives on s1xs2, not on `{}`", m.name())));
                }
                autonomous(&delta, p, &cfg.tube)
            })?;
            delta.clone()
        }
    };
    let t1 = st.run("tube-source", || normal_form_tube_with(&l1, p, &cfg.tube))?;
    let t2 = st.run("tube-s1xs2", || normal_form_tube_with(&delta, &q, &cfg.tube))?;
    for t in [&t1, &t2] {
        if !t.report.passes {
            return Err(Error::Gluing {
                what: format!("normal form of `{}`", t.report.loop_label),
                mismatch: t.report.max_ham_deviation,
                witness: t.report.worst.clone(),
            }
            .staged("tube"));
        }
    }
    let mut g = st.run("fibered-sum", || {
        let a = TubeSide::from_normal_form(m.name(), m.alpha(), &t1);
        let b = TubeSide::from_normal_form(s.name(), s.alpha(), &t2);
        fibered_sum_tubes(&a, &b, cfg.radius, cfg.overlap)
    })?;
    tag_half_lutz(&mut g, m.name(), &format!("orbit of {}", l1.label()));
    let known1 = match source {
        SourceLoop::Delta => Some(search.certificate.clone()),
        SourceLoop::Given(_) => None,
    };
    let glued = st.run("glue", || {
        glue_loops_with(&l1, p, &delta, &q, &g, &cfg.glue, [known1, Some(search.certificate.clone())])
    })?;
    let bundle = CertificateBundle {
        source: l1.label().to_string(),
        point: p.iter().copied().collect(),
        tag: g.tag.clone(),
        radius: g.radius,
        beta_t2,
        k_search: search,
        tubes: vec![t1.report, t2.report],
        overlaps: g.overlaps.clone(),
        field_overlaps: glued.overlaps.clone(),
        charts: glued.charts.clone(),
        notes: g.notes.clone(),
        chart_table: g.chart_table(),
        positive: glued.is_positive(),
        timings: st.timings,
    };
    Ok((glued, bundle))
}

fn autonomous(l: &ContactLoop, p: &Point, cfg: &TubeConfig) -> Result<()> {
    let r = check_local_autonomy(l, p, cfg.slice_reach, &cfg.autonomy)?;
    if r.locally_autonomous {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "loop `{}` is not locally autonomous at {:?} (variation {:.3e})",
            l.label(),
            r.point,
            r.max_variation
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{loop_hopf, model_s3};

    #[test]
    fn non_autonomous_loop_aborts_at_precondition() {
        let s = model_s1s2().unwrap();
        let psi = default_displacement(s.alpha()).unwrap();
        let beta = loop_beta(&loop_rho(s.alpha()).unwrap(), &psi).unwrap();
        let delta = loop_delta(2, &beta, &loop_zeta(s.alpha()).unwrap()).unwrap();
        let p = psi.chart.from_chart(&Point::new(0.0, 0.1, 0.0, 0.0));
        let err = theorem1_pipeline(&s, &SourceLoop::Given(delta), &p, &PipelineConfig::smoke()).unwrap_err();
        assert_eq!(err.stage(), Some("precondition"), "{err}");
    }

    #[test]
    fn wrong_model_is_rejected() {
        let h = model_s3().unwrap();
        let l = loop_hopf(h.alpha()).unwrap();
        let s = model_s1s2().unwrap();
        let err = theorem1_pipeline(&s, &SourceLoop::Given(l), &north_pole(), &PipelineConfig::smoke()).unwrap_err();
        assert_eq!(err.stage(), Some("precondition"));
    }
}
