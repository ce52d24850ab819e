use std::path::{Path, PathBuf};
use std::process::Command;

use contact_kinetics_cli::{cmd_verify, execute, Command as Cmd, RunConfig, OUT_DIR_ENV};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_contact-kinetics"));
    c.env_remove(OUT_DIR_ENV);
    c
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("contact-kinetics-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn unknown_model_is_a_usage_error() {
    let out = bin().args(["verify", "nosuch", "--smoke", "--out"]).arg(scratch("usage")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuch"));
    let out = bin().args(["lutz", "s1xd2", "--smoke"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_is_rejected() {
    let dir = scratch("config");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "grid = 24\nno_such_key = 1\n").unwrap();
    let out = bin().args(["verify", "s3", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

#[test]
fn verify_writes_a_passing_report() {
    let dir = scratch("verify");
    let out = bin().args(["verify", "annulus", "--smoke", "--threads", "1", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = read_json(&dir.join("verify-annulus.json"));
    assert_eq!(v["schema"], "contact-kinetics-report/1");
    assert_eq!(v["pass"], true);
    assert_eq!(v["config"]["smoke"], "true");
    let names: Vec<_> = v["certificates"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"pullback-g1") && names.contains(&"pullback-g2"));
    assert!(v["timing"]["total_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn failing_certificate_exits_one() {
    let dir = scratch("fail");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("tight.cfg");
    std::fs::write(&cfg, "tol_pullback = 1e-300\n").unwrap();
    let out = bin().args(["verify", "annulus", "--smoke", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v = read_json(&dir.join("verify-annulus.json"));
    assert_eq!(v["pass"], false);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL pullback-g"));
}

#[test]
fn report_body_is_deterministic() {
    let cfg = RunConfig::smoke();
    let a = cmd_verify("s1xs2", &cfg).unwrap().body();
    let b = cmd_verify("s1xs2", &cfg).unwrap().body();
    assert_eq!(a, b);
    assert!(a.get("timing").is_none());
}

#[test]
fn out_dir_precedence() {
    let cfg = RunConfig::from_text("out = from-config", false).unwrap();
    assert_eq!(cfg.out_dir(Some(Path::new("flag"))), PathBuf::from("flag"));
    assert_eq!(RunConfig::default().out, None);
}

#[test]
fn smoke_lutz_writes_report_minima_and_atlas() {
    let dir = scratch("lutz");
    let out = execute(Cmd::Lutz, Some("s3"), &RunConfig::smoke(), &dir).unwrap();
    assert!(out.report.pass, "{:#?}", out.report.certificates.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    assert_eq!(out.exit_code(), 0);
    let csv = std::fs::read_to_string(dir.join("lutz-s3-minima.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("chart,t,min_H,argmin_c0,argmin_c1,argmin_c2,argmin_c3"));
    assert!(lines.all(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap() > 0.0));
    let atlas = std::fs::read_to_string(dir.join("lutz-s3-atlas.txt")).unwrap();
    assert!(atlas.starts_with("# chart-table v1"));
    assert_eq!(atlas.lines().filter(|l| l.starts_with("piece ")).count(), 3);
    assert!(atlas.contains("note smooth type unchanged: not checked"));
}
