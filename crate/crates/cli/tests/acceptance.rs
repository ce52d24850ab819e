//! Acceptance run at default resolution. Prints one PASS/FAIL line per criterion.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use contact_kinetics::fieldcalc::{
    d_scalar, exterior_derivative, integrate_flow, pullback_oneform, CoordKind, Domain, FlowConfig, Point,
    ScalarField, VectorField,
};
use contact_kinetics::loopalg::{compose_loops, conjugate_loop, oracle_discrepancy, self_concatenate, ORACLE_TIMES};
use contact_kinetics::models::{default_displacement, loop_beta, loop_delta, loop_rho, loop_zeta, model_s1s2};
use contact_kinetics::surgery::{gluing_maps, normal_form_tube_with, north_pole, TubeConfig};
use contact_kinetics_cli::{cmd_loops, cmd_lutz, cmd_verify, ReportBundle, RunConfig};

type Outcome = Result<String, String>;

fn require(r: &ReportBundle, names: &[&str]) -> Outcome {
    let mut parts = Vec::new();
    for n in names {
        let c = r.certificate(n).ok_or_else(|| format!("{} {}: missing `{n}`", r.command, r.target))?;
        let line = format!("{n}={:.3e}", c.value);
        if !c.pass {
            return Err(format!("{line} (threshold {:e}) {}", c.threshold, c.details));
        }
        parts.push(line);
    }
    if !r.pass {
        let bad: Vec<_> = r.certificates.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(format!("{} {} failed: {bad:?}", r.command, r.target));
    }
    Ok(parts.join(" "))
}

fn structural(cfg: &RunConfig) -> Outcome {
    let a = require(
        &cmd_verify("annulus", cfg).map_err(|e| e.to_string())?,
        &["pullback-g1", "pullback-g2", "reeb-residual"],
    )?;
    let b = require(&cmd_verify("s1xd2", cfg).map_err(|e| e.to_string())?, &["reeb-residual"])?;
    let c = require(
        &cmd_verify("s1xs2", cfg).map_err(|e| e.to_string())?,
        &["reeb-residual", "rho-hamiltonian", "zeta-hamiltonian"],
    )?;
    Ok(format!("annulus[{a}] s1xd2[{b}] s1xs2[{c}]"))
}

fn algebra() -> Outcome {
    let e = |e: contact_kinetics::Error| e.to_string();
    let s = model_s1s2().map_err(e)?;
    let rho = loop_rho(s.alpha()).map_err(e)?;
    let zeta = loop_zeta(s.alpha()).map_err(e)?;
    let psi = default_displacement(s.alpha()).map_err(e)?;
    let beta = loop_beta(&rho, &psi).map_err(e)?;
    let mut pts = s.domain().sample(10, 3);
    pts.push(psi.chart.from_chart(&Point::new(0.0, 0.1, 0.0, 0.0)));
    pts.push(psi.chart.from_chart(&Point::new(2.0, -0.05, 0.2, 0.0)));
    pts.push(north_pole());
    let cases = [
        ("rho.rho", compose_loops(&rho, &rho).map_err(e)?),
        ("psi-conjugate of rho", conjugate_loop(&rho, &psi.map).map_err(e)?),
        ("beta^3", self_concatenate(&beta, 3).map_err(e)?),
        ("zeta.beta^2", compose_loops(&zeta, &self_concatenate(&beta, 2).map_err(e)?).map_err(e)?),
    ];
    let mut parts = Vec::new();
    for (name, l) in cases {
        let (d, p, t) = oracle_discrepancy(&l, &pts, &ORACLE_TIMES).map_err(e)?;
        if d >= 1e-5 {
            return Err(format!("{name}: {d:.3e} at {:?} t={t}", p.as_slice()));
        }
        parts.push(format!("{name}={d:.2e}"));
    }
    Ok(parts.join(" "))
}

fn loops_criteria(r: &ReportBundle) -> (Outcome, Outcome) {
    let third = require(r, &["beta-equals-rho-rho-on-T1", "beta-hamiltonian-T1", "beta-positive-T2"]);
    let fourth = require(
        r,
        &[
            "delta-positive",
            "delta-hamiltonian-T1",
            "delta-autonomous-north",
            "delta-not-autonomous-psi-support",
        ],
    )
    .map(|s| {
        let k = &r.certificate("delta-positive").unwrap().details["k"];
        format!("k={k} {s}")
    });
    (third, fourth)
}

fn normal_form(k: usize) -> Outcome {
    let e = |e: contact_kinetics::Error| e.to_string();
    let s = model_s1s2().map_err(e)?;
    let rho = loop_rho(s.alpha()).map_err(e)?;
    let zeta = loop_zeta(s.alpha()).map_err(e)?;
    let psi = default_displacement(s.alpha()).map_err(e)?;
    let beta = loop_beta(&rho, &psi).map_err(e)?;
    let delta = loop_delta(k, &beta, &zeta).map_err(e)?;
    let t = normal_form_tube_with(&delta, &north_pole(), &TubeConfig::default()).map_err(e)?;
    let r = &t.report;
    let msg = format!(
        "k={k} radius={:.4e} nodes={}x{} max|H-1|={:.3e} field={:.3e}",
        r.radius, r.field_nodes, r.field_times, r.max_ham_deviation, r.max_field_mismatch
    );
    if r.max_ham_deviation <= 1e-4 && r.autonomy.locally_autonomous {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn lutz(cfg: &RunConfig, smoke: &RunConfig) -> Outcome {
    let mut parts = Vec::new();
    for source in ["s1xs2", "s3"] {
        for (mode, c, budget) in [("smoke", smoke, 60.0), ("default", cfg, 900.0)] {
            let clock = Instant::now();
            let (r, _) = cmd_lutz(source, c).map_err(|e| e.to_string())?;
            let secs = clock.elapsed().as_secs_f64();
            let worst = |prefix: &str| {
                r.certificates
                    .iter()
                    .filter(|c| c.name.starts_with(prefix))
                    .map(|c| c.value)
                    .fold(f64::NAN, |a: f64, b| if prefix == "positivity" { a.min(b) } else { a.max(b) })
            };
            let line = format!(
                "{source}/{mode} field={:.2e} closure={:.2e} minH={:.3e} {secs:.0}s",
                worst("field-overlap"),
                worst("closure"),
                worst("positivity")
            );
            require(&r, &["glued-loop-positive"]).map_err(|m| format!("{line}: {m}"))?;
            if secs >= budget {
                return Err(format!("{line}: over the {budget} s budget"));
            }
            parts.push(line);
        }
    }
    Ok(parts.join("; "))
}

fn plane() -> Arc<Domain> {
    Arc::new(
        Domain::chart(
            "plane",
            ["theta", "x", "y"],
            [
                CoordKind::Periodic,
                CoordKind::Interval { lo: -2.0, hi: 2.0 },
                CoordKind::Interval { lo: -2.0, hi: 2.0 },
            ],
        )
        .unwrap(),
    )
}

fn hygiene() -> Outcome {
    let e = |e: contact_kinetics::Error| e.to_string();
    // rotation by sin(t): exact endpoint known in closed form
    let x = VectorField::time_dependent(plane(), |p, t| Point::new(1.0, -p[2] * t.cos(), p[1] * t.cos(), 0.0));
    let p = Point::new(0.0, 0.7, -0.2, 0.0);
    let t1: f64 = 2.5;
    let a = t1.sin();
    let exact = Point::new(t1, 0.7 * a.cos() + 0.2 * a.sin(), 0.7 * a.sin() - 0.2 * a.cos(), 0.0);
    let err = |n: usize| -> Result<f64, String> {
        let q = integrate_flow(&x, &p, 0.0, t1, &FlowConfig::with_steps(n)).map_err(e)?;
        Ok((q - exact).norm())
    };
    let errs = [err(32)?, err(64)?, err(128)?];
    let factors = [errs[0] / errs[1], errs[1] / errs[2]];
    if !factors.iter().all(|f| (12.0..=20.0).contains(f)) {
        return Err(format!("Richardson factors {factors:?}"));
    }

    let maps = gluing_maps(1.0).map_err(e)?;
    let torus = maps.solid_torus.domain().clone();
    let pts: Vec<Point> = torus
        .sample(200, 11)
        .into_iter()
        .filter(|p| (0.05..0.95).contains(&p[1].hypot(p[2])))
        .collect();
    let h = ScalarField::autonomous(torus.clone(), |q| q[0].sin() * q[1] * q[1] + (q[2] + q[0].cos()).exp());
    let dd = exterior_derivative(&d_scalar(&h));
    let eta = maps.neck.alpha().form();
    let a0 = maps.solid_torus.alpha().form();
    let (mut dd_max, mut nat_max, mut trip_max, mut flow_trip) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for q in &pts {
        dd_max = dd_max.max(dd.eval(q, 0.0).map_err(e)?.max_abs());
        for g in [&maps.g1, &maps.g2] {
            let pulled = pullback_oneform(g, eta).map_err(e)?;
            nat_max = nat_max.max((pulled.eval(q, 0.0).map_err(e)? - a0.eval(q, 0.0).map_err(e)?).amax());
            let back = g.apply_inverse(&g.apply(q).map_err(e)?).map_err(e)?;
            trip_max = trip_max.max(torus.distance(&back, q));
        }
    }
    let s = model_s1s2().map_err(e)?;
    let rho = loop_rho(s.alpha()).map_err(e)?;
    for (i, q) in s.domain().sample(64, 5).iter().enumerate() {
        let t = TAU * (i as f64 + 0.5) / 64.0;
        let back = rho.inverse(&rho.flow(q, t).map_err(e)?, t).map_err(e)?;
        flow_trip = flow_trip.max(s.domain().distance(&back, q));
    }
    let msg = format!(
        "richardson={:.2}/{:.2} d(dh)={dd_max:.2e} pullback={nat_max:.2e} round-trip={trip_max:.2e} loop-round-trip={flow_trip:.2e} ({} samples)",
        factors[0],
        factors[1],
        pts.len()
    );
    if dd_max < 1e-6 && nat_max < 1e-12 && trip_max < 1e-12 && flow_trip < 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let smoke = RunConfig::smoke();
    let mut all = true;
    let mut report = |n: usize, title: &str, clock: Instant, o: Outcome| {
        let secs = clock.elapsed().as_secs_f64();
        let (tag, msg) = match o {
            Ok(m) => ("PASS", m),
            Err(m) => {
                all = false;
                ("FAIL", m)
            }
        };
        println!("criterion {n} {tag} {title} ({secs:.1} s): {msg}");
    };

    let c = Instant::now();
    report(1, "structural identities", c, structural(&cfg));
    let c = Instant::now();
    report(2, "hamiltonian algebra", c, algebra());

    let c = Instant::now();
    let loops = cmd_loops(&cfg);
    let (third, fourth, k) = match &loops {
        Ok(r) => {
            let (a, b) = loops_criteria(r);
            let k = r
                .certificate("delta-positive")
                .and_then(|c| c.details["k"].as_u64())
                .map(|k| k as usize);
            (a, b, k)
        }
        Err(e) => (Err(e.to_string()), Err(e.to_string()), None),
    };
    report(3, "beta on T1 and T2", c, third);
    report(4, "delta(k)", c, fourth);
    let c = Instant::now();
    report(5, "normal-form tube", c, k.map_or_else(|| Err("no k from the search".into()), normal_form));
    let c = Instant::now();
    report(6, "glued positive loops", c, lutz(&cfg, &smoke));
    let c = Instant::now();
    report(7, "numerical hygiene", c, hygiene());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
