use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use contact_kinetics::contact::{reeb_field, verify_labeled, verify_reeb};
use contact_kinetics::fieldcalc::{integrate_flow, time_nodes, FlowConfig, Point};
use contact_kinetics::loopalg::{
    certify_positivity, check_local_autonomy, compose_loops, flow_distance, formula_residual, AutonomyConfig,
};
use contact_kinetics::models::{
    default_displacement, find_min_k_from, loop_beta, loop_delta, loop_hopf, loop_rho, loop_zeta, model_by_name,
    model_s1s2, model_s3,
};
use contact_kinetics::surgery::{
    check_pullback, gluing_maps, north_pole, theorem1_pipeline, tube_embedding_with, GlueConfig, PipelineConfig,
    SourceLoop, TubeConfig,
};
use contact_kinetics::Error as CoreError;

use crate::config::{ConfigError, RunConfig};
use crate::report::{write_minima_csv, Certificate, ReportBundle};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Loops,
    Lutz,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Loops => "loops",
            Command::Lutz => "lutz",
        }
    }
}

/// A finished command: the report and the files written for it.
#[derive(Debug)]
pub struct RunOutput {
    pub report: ReportBundle,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            0
        } else {
            1
        }
    }
}

/// Runs `f` as one certificate; a core error becomes a failed certificate.
fn timed(name: &str, f: impl FnOnce() -> contact_kinetics::Result<Certificate>) -> Certificate {
    let clock = Instant::now();
    let mut c = match f() {
        Ok(c) => c,
        Err(e) => Certificate::failed(name, e.to_string(), e.stage()),
    };
    c.seconds = clock.elapsed().as_secs_f64();
    c
}

fn usage(e: CoreError) -> CliError {
    CliError::Usage(e.to_string())
}

fn coords(p: &Point) -> Vec<f64> {
    p.iter().copied().collect()
}

/// Contact certification, Reeb residuals and pullback identities of a model.
pub fn cmd_verify(model: &str, cfg: &RunConfig) -> Result<ReportBundle, CliError> {
    let m = model_by_name(model).map_err(usage)?;
    let mut r = ReportBundle::new("verify", model, cfg.echo());
    let grid = m.grid(cfg.verify_grid);
    let alpha = m.alpha().clone();

    r.push(timed("contact-margin", || {
        let c = verify_labeled(alpha.label(), alpha.form(), &grid)?;
        let cert = c.certificate().clone();
        Ok(Certificate::above("contact-margin", cert.min_margin, 0.0, cert.witness.clone()).with_details(cert))
    }));
    r.push(timed("reeb-residual", || {
        let f = verify_reeb(&alpha, &grid)?;
        Ok(Certificate::below("reeb-residual", f.max_residual, cfg.tol_reeb, f.worst.clone()).with_details(f))
    }));
    if matches!(model, "s1xd2" | "annulus" | "s3") {
        r.push(timed("reeb-period", || {
            let field = reeb_field(&alpha);
            let flow = FlowConfig::with_steps(cfg.flow_steps);
            let pts = m.domain().sample(cfg.sample_count, cfg.seed);
            let mut worst = (0.0, Vec::new());
            for p in &pts {
                let e = integrate_flow(&field, p, 0.0, TAU, &flow)?;
                let d = m.domain().distance(&e, p);
                if d > worst.0 {
                    worst = (d, coords(p));
                }
            }
            Ok(Certificate::below("reeb-period", worst.0, cfg.tol_closure, worst.1))
        }));
    }
    for k in m.knots() {
        let name = format!("knot-{}-transverse", k.name());
        r.push(timed(&name, || {
            let c = k.certificate();
            Ok(Certificate::above(&name, c.transversality, 0.0, Vec::new())
                .require(c.frame_residual < cfg.tol_kernel)
                .with_details(c))
        }));
        let name = format!("tube-{}-kernel", k.name());
        r.push(timed(&name, || {
            let t = tube_embedding_with(&m, k, None, cfg.verify_grid)?;
            let rep = t.report;
            Ok(Certificate::below(&name, rep.kernel_residual, cfg.tol_kernel, rep.worst.clone())
                .require(rep.core_distance < 1e-10 && rep.min_factor > 0.0 && rep.core_factor_mismatch < cfg.tol_kernel)
                .with_details(rep))
        }));
    }
    match model {
        "annulus" => {
            for which in [1, 2] {
                let name = format!("pullback-g{which}");
                r.push(timed(&name, || {
                    let maps = gluing_maps(1.0)?;
                    let c = check_pullback(&maps, which, cfg.verify_grid)?;
                    let sign = if which == 1 { 1.0 } else { -1.0 };
                    Ok(Certificate::below(&name, c.max_residual, cfg.tol_pullback, Vec::new())
                        .require(c.image_sign == sign && c.phi_orientation == sign && c.jacobian_sign == 1.0)
                        .with_details(c))
                }));
            }
        }
        "s1xs2" => {
            let pts = m.domain().sample(cfg.sample_count, cfg.seed);
            let times = time_nodes(4);
            r.push(timed("rho-hamiltonian", || {
                let d = formula_residual(&loop_rho(&alpha)?, |p| p[1] * p[1] + p[2] * p[2], &pts, &times, true)?;
                Ok(Certificate::below("rho-hamiltonian", d.max, cfg.tol_formula, d.worst.clone()).with_details(d))
            }));
            r.push(timed("zeta-hamiltonian", || {
                let d = formula_residual(&loop_zeta(&alpha)?, |p| p[3], &pts, &times, true)?;
                Ok(Certificate::below("zeta-hamiltonian", d.max, cfg.tol_formula, d.worst.clone()).with_details(d))
            }));
        }
        "s3" => {
            let pts = m.domain().sample(cfg.sample_count, cfg.seed);
            r.push(timed("hopf-hamiltonian", || {
                let d = formula_residual(&loop_hopf(&alpha)?, |_| 1.0, &pts, &time_nodes(4), true)?;
                Ok(Certificate::below("hopf-hamiltonian", d.max, cfg.tol_formula, d.worst.clone()).with_details(d))
            }));
        }
        _ => {}
    }
    Ok(r)
}

/// `psi`, `beta`, `delta(k)` and their certificates on `S^1 x S^2`.
pub fn cmd_loops(cfg: &RunConfig) -> Result<ReportBundle, CliError> {
    let mut r = ReportBundle::new("loops", "s1xs2", cfg.echo());
    let s = model_s1s2().map_err(usage)?;
    let alpha = s.alpha().clone();
    let built = (|| -> contact_kinetics::Result<_> {
        let rho = loop_rho(&alpha)?;
        let zeta = loop_zeta(&alpha)?;
        let psi = default_displacement(&alpha)?;
        let beta = loop_beta(&rho, &psi)?;
        Ok((rho, zeta, psi, beta))
    })();
    let (rho, zeta, psi, beta) = match built {
        Ok(b) => b,
        Err(e) => {
            r.push(Certificate::failed("construction", e.to_string(), e.stage()));
            return Ok(r);
        }
    };
    r.push(timed("psi-displaces-gamma", || {
        let rep = &psi.report;
        Ok(Certificate::above("psi-displaces-gamma", rep.min_displacement, 0.0, Vec::new())
            .require(rep.conformal_residual < cfg.tol_formula)
            .with_details(rep))
    }));
    let t1 = s
        .region_grid("T1", cfg.sample_count, false)
        .map_err(usage)?;
    let t1_pts = t1.points();
    let few: Vec<Point> = t1_pts.iter().step_by((t1_pts.len() / 64).max(1)).copied().collect();
    let times = time_nodes(cfg.times);
    let sparse_times = time_nodes(8);

    r.push(timed("beta-equals-rho-rho-on-T1", || {
        let rr = compose_loops(&rho, &rho)?;
        let d = flow_distance(&beta, &rr, t1_pts, &sparse_times)?;
        Ok(Certificate::below("beta-equals-rho-rho-on-T1", d.max, cfg.tol_formula, d.worst.clone()).with_details(d))
    }));
    let two_r2 = |p: &Point| 2.0 * (p[1] * p[1] + p[2] * p[2]);
    r.push(timed("beta-hamiltonian-T1", || {
        let d = formula_residual(&beta, two_r2, t1_pts, &sparse_times, false)?;
        let o = formula_residual(&beta, two_r2, &few, &sparse_times, true)?;
        Ok(Certificate::below("beta-hamiltonian-T1", d.max.max(o.max), cfg.tol_formula, d.worst.clone())
            .with_details([d, o]))
    }));
    let mut beta_min = None;
    r.push(timed("beta-positive-T2", || {
        let c = certify_positivity(&beta, &s.region_grid("T2", cfg.grid, true)?, cfg.times)?;
        beta_min = Some(c.min);
        Ok(Certificate::above("beta-positive-T2", c.min, 0.0, c.argmin.clone()).with_details(c))
    }));
    let Some(beta_min) = beta_min.filter(|&b| b > 0.0) else {
        return Ok(r);
    };
    let mut found = None;
    r.push(timed("delta-positive", || {
        let grid = s.union_grid(&["T1", "T2"], cfg.grid)?;
        let start = cfg.k_start.unwrap_or((1.0 / beta_min).ceil() as usize);
        let ks = find_min_k_from(&beta, &zeta, beta_min, &grid, &times, 0.0, cfg.k_cap, start)?;
        found = Some(ks.k);
        let c = &ks.certificate;
        Ok(Certificate::above("delta-positive", c.min, 0.0, c.argmin.clone()).with_details(&ks))
    }));
    let Some(k) = found else {
        return Ok(r);
    };
    let delta = match loop_delta(k, &beta, &zeta) {
        Ok(d) => d,
        Err(e) => {
            r.push(Certificate::failed("delta", e.to_string(), e.stage()));
            return Ok(r);
        }
    };
    let kf = k as f64;
    let formula = move |p: &Point| p[3] + 2.0 * kf * (p[1] * p[1] + p[2] * p[2]);
    r.push(timed("delta-hamiltonian-T1", || {
        let d = formula_residual(&delta, formula, t1_pts, &sparse_times, false)?;
        let o = formula_residual(&delta, formula, &few, &sparse_times, true)?;
        // oracle error relative to 1 + max H, as in the construction-time cross-check
        let scale = 1.0 + 2.0 * kf;
        Ok(Certificate::below("delta-hamiltonian-T1", d.max.max(o.max / scale), cfg.tol_formula, d.worst.clone())
            .with_details([d, o]))
    }));
    let acfg = AutonomyConfig {
        seed: cfg.seed,
        ..AutonomyConfig::default()
    };
    r.push(timed("delta-autonomous-north", || {
        let a = check_local_autonomy(&delta, &north_pole(), 0.1, &acfg)?;
        Ok(Certificate::below("delta-autonomous-north", a.max_variation, a.tolerance, a.worst.clone())
            .require(a.locally_autonomous)
            .with_details(a))
    }));
    r.push(timed("delta-not-autonomous-psi-support", || {
        let p = psi.chart.from_chart(&Point::new(0.0, 0.1, 0.0, 0.0));
        let a = check_local_autonomy(&delta, &p, 0.05, &acfg)?;
        Ok(Certificate::above("delta-not-autonomous-psi-support", a.max_variation, a.tolerance, a.worst.clone())
            .require(!a.locally_autonomous)
            .with_details(a))
    }));
    Ok(r)
}

pub fn pipeline_config(cfg: &RunConfig) -> PipelineConfig {
    PipelineConfig {
        grid: cfg.grid,
        times: cfg.times,
        k_cap: cfg.k_cap,
        k_margin: 0.0,
        k_start: cfg.k_start,
        radius: None,
        overlap: cfg.overlap,
        tube: TubeConfig {
            grid: cfg.tube_grid,
            times: if cfg.smoke { 2 } else { 3 },
            strict_tolerance: cfg.tol_strict,
            field_tolerance: cfg.tol_field,
            ..TubeConfig::default()
        },
        glue: GlueConfig {
            overlap: cfg.overlap,
            times: if cfg.smoke { 2 } else { 4 },
            field_tolerance: cfg.tol_field,
            closure_tolerance: cfg.tol_closure,
            closure_samples: cfg.sample_count,
            cert_grid: cfg.cert_grid,
            cert_times: if cfg.smoke { 4 } else { 8 },
            seed: cfg.seed,
        },
    }
}

/// Lutz-twist pipeline output beyond the report: atlas table and minima.
#[derive(Debug, Default)]
pub struct LutzArtifacts {
    pub chart_table: Option<String>,
    pub minima: Vec<(String, contact_kinetics::loopalg::PositivityCertificate)>,
}

/// Glued positive loop on the half Lutz twist of `s1xs2` (along `Gamma`) or `s3` (along a Hopf fiber).
pub fn cmd_lutz(source: &str, cfg: &RunConfig) -> Result<(ReportBundle, LutzArtifacts), CliError> {
    let (m, loop_src, p) = match source {
        "s1xs2" => (model_s1s2().map_err(usage)?, SourceLoop::Delta, north_pole()),
        "s3" => {
            let h = model_s3().map_err(usage)?;
            let l = loop_hopf(h.alpha()).map_err(usage)?;
            (h, SourceLoop::Given(l), Point::new(1.0, 0.0, 0.0, 0.0))
        }
        other => return Err(CliError::Usage(format!("unknown lutz source `{other}` (expected s1xs2 or s3)"))),
    };
    let mut r = ReportBundle::new("lutz", source, cfg.echo());
    let mut art = LutzArtifacts::default();
    let clock = Instant::now();
    let (glued, bundle) = match theorem1_pipeline(&m, &loop_src, &p, &pipeline_config(cfg)) {
        Ok(x) => x,
        Err(e) => {
            let mut c = Certificate::failed("pipeline", e.to_string(), e.stage());
            c.seconds = clock.elapsed().as_secs_f64();
            r.push(c);
            return Ok((r, art));
        }
    };
    r.timing.stages = bundle.timings.iter().map(|s| (s.stage.clone(), s.seconds)).collect();

    let b = &bundle.beta_t2;
    r.push(Certificate::above("beta-positive-T2", b.min, 0.0, b.argmin.clone()).with_details(b));
    let ks = &bundle.k_search;
    r.push(
        Certificate::above("delta-positive", ks.certificate.min, 0.0, ks.certificate.argmin.clone()).with_details(ks),
    );
    for (i, t) in bundle.tubes.iter().enumerate() {
        let name = format!("tube{}-hamiltonian", i + 1);
        r.push(
            Certificate::below(&name, t.max_ham_deviation, cfg.tol_field, t.worst.clone())
                .require(t.strictness.max_residual < cfg.tol_strict && t.autonomy.locally_autonomous)
                .with_details(t),
        );
    }
    for o in &bundle.overlaps {
        r.push(
            Certificate::below(&format!("overlap-round-trip[{}]", o.transition), o.max_round_trip, cfg.tol_roundtrip, o.worst.clone())
                .with_details(o),
        );
        r.push(
            Certificate::below(&format!("overlap-kernel[{}]", o.transition), o.max_kernel_residual, cfg.tol_kernel, o.worst.clone())
                .require(o.min_factor > 0.0),
        );
    }
    for o in &bundle.field_overlaps {
        r.push(
            Certificate::below(&format!("field-overlap[{}]", o.transition), o.max_field_mismatch, cfg.tol_field, o.worst.clone())
                .require(o.max_ham_ratio_deviation < cfg.tol_field)
                .with_details(o),
        );
    }
    for c in &bundle.charts {
        r.push(
            Certificate::below(&format!("closure[{}]", c.chart), c.closure.max_distance, cfg.tol_closure, c.closure.worst.clone())
                .with_details(&c.closure),
        );
        let pc = &c.positivity;
        r.push(
            Certificate::above(&format!("positivity[{}]", c.chart), pc.min, 0.0, pc.argmin.clone())
                .with_details(serde_json::json!({
                    "grid": pc.grid, "nodes": pc.nodes, "time_nodes": pc.time_nodes,
                    "argmin_time": pc.argmin_time, "verdict": pc.verdict,
                })),
        );
        art.minima.push((c.chart.clone(), pc.clone()));
    }
    r.push(
        Certificate::above("glued-loop-positive", glued.min_hamiltonian(), 0.0, Vec::new())
            .require(glued.is_positive())
            .with_details(serde_json::json!({
                "tag": bundle.tag, "radius": bundle.radius, "notes": bundle.notes, "verdict": glued.verdict,
                "max_field_mismatch": glued.max_field_mismatch(), "max_closure": glued.max_closure(),
            })),
    );
    art.chart_table = Some(bundle.chart_table.clone());
    Ok((r, art))
}

fn target(command: Command, arg: Option<&str>, cfg: &RunConfig) -> String {
    match command {
        Command::Loops => "s1xs2".into(),
        _ => arg.map_or_else(|| cfg.model.clone(), str::to_string),
    }
}

/// Runs a command and writes its report (and, for `lutz`, the CSV and chart table) into `out_dir`.
pub fn execute(command: Command, arg: Option<&str>, cfg: &RunConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    let clock = Instant::now();
    let name = target(command, arg, cfg);
    let mut files = Vec::new();
    let mut report = match command {
        Command::Verify => cmd_verify(&name, cfg)?,
        Command::Loops => cmd_loops(cfg)?,
        Command::Lutz => {
            let (r, art) = cmd_lutz(&name, cfg)?;
            if !art.minima.is_empty() {
                let path = out_dir.join(format!("lutz-{name}-minima.csv"));
                let rows: Vec<(String, &_)> = art.minima.iter().map(|(c, p)| (c.clone(), p)).collect();
                write_minima_csv(&path, &rows)?;
                files.push(path);
            }
            if let Some(t) = art.chart_table {
                let path = out_dir.join(format!("lutz-{name}-atlas.txt"));
                std::fs::create_dir_all(out_dir)?;
                std::fs::write(&path, t)?;
                files.push(path);
            }
            r
        }
    };
    report.timing.total_seconds = clock.elapsed().as_secs_f64();
    let stem = match command {
        Command::Loops => "loops".to_string(),
        c => format!("{}-{name}", c.name()),
    };
    let path = out_dir.join(format!("{stem}.json"));
    report.write(&path)?;
    files.insert(0, path);
    Ok(RunOutput { report, files })
}
