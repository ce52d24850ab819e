use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "CONTACT_KINETICS_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("config key `{key}`: {reason}")]
    Value { key: String, reason: String },
}

/// Run parameters. Every field has a config key of the same name.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: String,
    pub smoke: bool,
    /// Resolution of the `beta` and `delta(k)` certificates.
    pub grid: usize,
    pub times: usize,
    /// Resolution of the structural checks in `verify`.
    pub verify_grid: usize,
    pub tube_grid: usize,
    pub overlap: usize,
    pub cert_grid: usize,
    pub sample_count: usize,
    pub tol_pullback: f64,
    pub tol_reeb: f64,
    pub tol_formula: f64,
    pub tol_kernel: f64,
    pub tol_roundtrip: f64,
    pub tol_field: f64,
    pub tol_closure: f64,
    pub tol_strict: f64,
    pub flow_steps: usize,
    pub k_cap: u32,
    pub k_start: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "s1xs2".into(),
            smoke: false,
            grid: 48,
            times: 64,
            verify_grid: 32,
            tube_grid: 12,
            overlap: 10,
            cert_grid: 16,
            sample_count: 16,
            tol_pullback: 1e-12,
            tol_reeb: 1e-7,
            tol_formula: 1e-6,
            tol_kernel: 1e-6,
            tol_roundtrip: 1e-9,
            tol_field: 1e-5,
            tol_closure: 1e-5,
            tol_strict: 1e-4,
            flow_steps: 4096,
            k_cap: 2000,
            k_start: None,
            out: None,
            seed: 7,
        }
    }
}

const KEYS: &[&str] = &[
    "model",
    "grid",
    "times",
    "verify_grid",
    "tube_grid",
    "overlap",
    "cert_grid",
    "sample_count",
    "tol_pullback",
    "tol_reeb",
    "tol_formula",
    "tol_kernel",
    "tol_roundtrip",
    "tol_field",
    "tol_closure",
    "tol_strict",
    "flow_steps",
    "k_cap",
    "k_start",
    "out",
    "seed",
];

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        reason: format!("`{v}`: {e}"),
    })
}

impl RunConfig {
    /// Reduced resolutions for quick runs.
    pub fn smoke() -> Self {
        Self {
            smoke: true,
            grid: 24,
            times: 8,
            verify_grid: 16,
            tube_grid: 8,
            overlap: 8,
            cert_grid: 12,
            sample_count: 8,
            ..Self::default()
        }
    }

    pub fn from_file(path: &Path, smoke: bool) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text, smoke)
    }

    /// Parses `key = value` lines over the (smoke) defaults; `#` starts a comment.
    pub fn from_text(text: &str, smoke: bool) -> Result<Self, ConfigError> {
        let mut cfg = if smoke { Self::smoke() } else { Self::default() };
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey {
                    line: i + 1,
                    key: k.to_string(),
                });
            }
            if seen.insert(k.to_string(), i + 1).is_some() {
                return Err(ConfigError::Duplicate {
                    line: i + 1,
                    key: k.to_string(),
                });
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, k: &str, v: &str) -> Result<(), ConfigError> {
        match k {
            "model" => self.model = v.to_string(),
            "grid" => self.grid = parse(k, v)?,
            "times" => self.times = parse(k, v)?,
            "verify_grid" => self.verify_grid = parse(k, v)?,
            "tube_grid" => self.tube_grid = parse(k, v)?,
            "overlap" => self.overlap = parse(k, v)?,
            "cert_grid" => self.cert_grid = parse(k, v)?,
            "sample_count" => self.sample_count = parse(k, v)?,
            "tol_pullback" => self.tol_pullback = parse(k, v)?,
            "tol_reeb" => self.tol_reeb = parse(k, v)?,
            "tol_formula" => self.tol_formula = parse(k, v)?,
            "tol_kernel" => self.tol_kernel = parse(k, v)?,
            "tol_roundtrip" => self.tol_roundtrip = parse(k, v)?,
            "tol_field" => self.tol_field = parse(k, v)?,
            "tol_closure" => self.tol_closure = parse(k, v)?,
            "tol_strict" => self.tol_strict = parse(k, v)?,
            "flow_steps" => self.flow_steps = parse(k, v)?,
            "k_cap" => self.k_cap = parse(k, v)?,
            "k_start" => self.k_start = Some(parse(k, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "seed" => self.seed = parse(k, v)?,
            _ => unreachable!("key list and setter disagree"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: &str| {
            Err(ConfigError::Value {
                key: key.to_string(),
                reason: reason.to_string(),
            })
        };
        for (k, v) in [
            ("grid", self.grid),
            ("times", self.times),
            ("verify_grid", self.verify_grid),
            ("tube_grid", self.tube_grid),
            ("overlap", self.overlap),
            ("cert_grid", self.cert_grid),
            ("sample_count", self.sample_count),
            ("flow_steps", self.flow_steps),
        ] {
            if v < 8 {
                return bad(k, &format!("resolution {v} is below 8"));
            }
        }
        for (k, v) in self.tolerances() {
            if !(v > 0.0 && v.is_finite()) {
                return bad(k, &format!("tolerance {v} must be positive"));
            }
        }
        if self.k_cap == 0 {
            return bad("k_cap", "must be positive");
        }
        if self.k_start == Some(0) {
            return bad("k_start", "must be positive");
        }
        Ok(())
    }

    pub fn tolerances(&self) -> [(&'static str, f64); 8] {
        [
            ("tol_pullback", self.tol_pullback),
            ("tol_reeb", self.tol_reeb),
            ("tol_formula", self.tol_formula),
            ("tol_kernel", self.tol_kernel),
            ("tol_roundtrip", self.tol_roundtrip),
            ("tol_field", self.tol_field),
            ("tol_closure", self.tol_closure),
            ("tol_strict", self.tol_strict),
        ]
    }

    /// Output directory: explicit flag, then the environment, then the config, then `reports`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.out.clone().unwrap_or_else(|| PathBuf::from("reports"))
    }

    /// Every key with its effective value, for the report header.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("model".into(), self.model.clone());
        m.insert("smoke".into(), self.smoke.to_string());
        for (k, v) in [
            ("grid", self.grid),
            ("times", self.times),
            ("verify_grid", self.verify_grid),
            ("tube_grid", self.tube_grid),
            ("overlap", self.overlap),
            ("cert_grid", self.cert_grid),
            ("sample_count", self.sample_count),
            ("flow_steps", self.flow_steps),
        ] {
            m.insert(k.into(), v.to_string());
        }
        for (k, v) in self.tolerances() {
            m.insert(k.into(), format!("{v:e}"));
        }
        m.insert("k_cap".into(), self.k_cap.to_string());
        m.insert("k_start".into(), self.k_start.map_or("auto".into(), |k| k.to_string()));
        m.insert("seed".into(), self.seed.to_string());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys_and_comments() {
        let c = RunConfig::from_text("# run\ngrid = 32\ntol_field=2e-5 # looser\n\nk_start = 399\n", false).unwrap();
        assert_eq!(c.grid, 32);
        assert_eq!(c.tol_field, 2e-5);
        assert_eq!(c.k_start, Some(399));
        assert_eq!(c.times, 64);
    }

    #[test]
    fn rejects_unknown_duplicate_and_invalid() {
        assert!(matches!(RunConfig::from_text("grdi = 3", false), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(RunConfig::from_text("seed = 1\nseed = 2", false), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(RunConfig::from_text("grid = 4", false), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::from_text("tol_reeb = -1", false), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::from_text("grid 4", false), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn smoke_defaults_then_file() {
        let c = RunConfig::from_text("times = 16", true).unwrap();
        assert!(c.smoke);
        assert_eq!((c.grid, c.times), (24, 16));
    }
}
