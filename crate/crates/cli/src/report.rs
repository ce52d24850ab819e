use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use contact_kinetics::loopalg::PositivityCertificate;

pub const SCHEMA: &str = "contact-kinetics-report/1";

/// How a certificate value is compared with its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub worst: Vec<f64>,
    pub details: Value,
    #[serde(skip)]
    pub seconds: f64,
}

impl Certificate {
    pub fn below(name: &str, value: f64, threshold: f64, worst: Vec<f64>) -> Self {
        Self::new(name, value, Relation::Below, threshold, worst)
    }

    pub fn above(name: &str, value: f64, threshold: f64, worst: Vec<f64>) -> Self {
        Self::new(name, value, Relation::Above, threshold, worst)
    }

    fn new(name: &str, value: f64, relation: Relation, threshold: f64, worst: Vec<f64>) -> Self {
        let pass = match relation {
            Relation::Below => value < threshold,
            Relation::Above => value > threshold,
        };
        Self {
            name: name.to_string(),
            pass,
            value,
            relation,
            threshold,
            worst,
            details: Value::Null,
            seconds: 0.0,
        }
    }

    /// Certificate for a stage that aborted with an error.
    pub fn failed(name: &str, message: String, stage: Option<&str>) -> Self {
        let mut c = Self::new(name, f64::NAN, Relation::Below, 0.0, Vec::new());
        c.pass = false;
        c.details = serde_json::json!({ "error": message, "stage": stage });
        c
    }

    pub fn with_details(mut self, d: impl Serialize) -> Self {
        self.details = serde_json::to_value(d).unwrap_or(Value::Null);
        self
    }

    /// Extra condition on top of the threshold comparison.
    pub fn require(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub certificates: BTreeMap<String, f64>,
    pub stages: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportBundle {
    pub schema: String,
    pub toolkit_version: String,
    pub command: String,
    pub target: String,
    pub config: BTreeMap<String, String>,
    pub pass: bool,
    pub certificates: Vec<Certificate>,
    #[serde(skip)]
    pub timing: Timing,
}

impl ReportBundle {
    pub fn new(command: &str, target: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            schema: SCHEMA.into(),
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            target: target.into(),
            config,
            pass: true,
            certificates: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn push(&mut self, c: Certificate) {
        self.pass &= c.pass;
        self.timing.certificates.insert(c.name.clone(), c.seconds);
        self.certificates.push(c);
    }

    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    /// Report body without timings; identical inputs give identical bodies.
    pub fn body(&self) -> Value {
        fixed_digits(serde_json::to_value(self).unwrap_or(Value::Null))
    }

    pub fn to_json(&self) -> String {
        let mut v = self.body();
        if let Value::Object(m) = &mut v {
            m.insert("timing".into(), fixed_digits(serde_json::to_value(&self.timing).unwrap_or(Value::Null)));
        }
        let mut s = serde_json::to_string_pretty(&v).unwrap_or_default();
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json())
    }
}

/// `x` in scientific notation with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rewrites every non-integer number of a JSON tree with 17 significant digits.
pub fn fixed_digits(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                return Value::Number(n);
            }
            match n.as_f64() {
                Some(x) if x.is_finite() => {
                    Value::Number(format_f64(x).parse::<Number>().unwrap_or(n))
                }
                _ => Value::Null,
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(fixed_digits).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, fixed_digits(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// Plot-ready table of per-chart, per-time-slice Hamiltonian minima.
pub fn write_minima_csv(path: &Path, charts: &[(String, &PositivityCertificate)]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["chart", "t", "min_H", "argmin_c0", "argmin_c1", "argmin_c2", "argmin_c3"])?;
    for (chart, cert) in charts {
        for s in &cert.slices {
            let mut row = vec![chart.clone(), format_f64(s.t), format_f64(s.min)];
            row.extend((0..4).map(|i| s.argmin.get(i).map_or(String::new(), |&x| format_f64(x))));
            w.write_record(&row)?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.5e-13, -7.0, 1e300] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
        let v = fixed_digits(serde_json::json!({ "a": 0.1, "n": 3, "xs": [1.5, f64::NAN] }));
        assert_eq!(v.to_string(), r#"{"a":1.0000000000000001e-1,"n":3,"xs":[1.5000000000000000e+0,null]}"#);
    }

    #[test]
    fn verdict_is_conjunction() {
        let mut r = ReportBundle::new("verify", "x", BTreeMap::new());
        r.push(Certificate::below("a", 1e-13, 1e-12, vec![]));
        assert!(r.pass);
        r.push(Certificate::above("b", -1.0, 0.0, vec![]));
        assert!(!r.pass);
        assert!(!r.body().to_string().contains("timing"));
        assert!(r.to_json().contains("\"timing\""));
    }
}
