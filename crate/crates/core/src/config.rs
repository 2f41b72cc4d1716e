//! Run configuration: a flat `key = value` file with the numerical tolerances,
//! the frozen verification thresholds and output settings.
//!
//! Lines starting with `#` and blank lines are ignored. Unknown keys are an
//! error, as is any non-positive tolerance or threshold.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "WKBZETA_OUT_DIR";

/// The thresholds as calibrated against the reference runs; kept in sync with
/// [`RunConfig::default`] by a test.
pub const CALIBRATED: &str = include_str!("../wkbzeta.conf");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format '{other}' (csv|json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Relative eigenvalue tolerance.
    pub spectrum_tol: f64,
    /// Levels computed per spectrum (at most 512).
    pub spectrum_count: usize,
    /// Absolute tolerance of regularized actions.
    pub action_tol: f64,
    /// `|Z_g(1) - prediction|` allowed at `g ≤ z1_check_g`.
    pub z1_threshold: f64,
    pub z1_check_g: f64,
    /// Relative deviation of the determinant E-slope allowed at `g ≤ slope_check_g`.
    pub slope_rel_threshold: f64,
    pub slope_check_g: f64,
    /// Product-vs-shooting discrepancy above which a measurement is flagged.
    pub route_flag: f64,
    pub format: OutputFormat,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `None` lets rayon decide.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spectrum_tol: 1e-9,
            spectrum_count: 512,
            action_tol: 1e-10,
            z1_threshold: 0.05,
            z1_check_g: 1e-4,
            slope_rel_threshold: 0.02,
            slope_check_g: 1e-3,
            route_flag: 1e-4,
            format: OutputFormat::Json,
            out_dir: None,
            jobs: None,
        }
    }
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let x: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: '{value}' is not a number")))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Config(format!("{key} must be positive (got {value})")));
    }
    Ok(x)
}

fn count(key: &str, value: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(Error::Config(format!("{key} must be a positive integer (got {value})"))),
    }
}

impl RunConfig {
    /// Parses `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "spectrum_tol" => self.spectrum_tol = positive(key, value)?,
            "spectrum_count" => {
                let n = count(key, value)?;
                if n > 512 {
                    return Err(Error::Config(format!("spectrum_count {n} exceeds 512")));
                }
                self.spectrum_count = n;
            }
            "action_tol" => self.action_tol = positive(key, value)?,
            "z1_threshold" => self.z1_threshold = positive(key, value)?,
            "z1_check_g" => self.z1_check_g = positive(key, value)?,
            "slope_rel_threshold" => self.slope_rel_threshold = positive(key, value)?,
            "slope_check_g" => self.slope_check_g = positive(key, value)?,
            "route_flag" => self.route_flag = positive(key, value)?,
            "format" => self.format = value.parse()?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "jobs" => self.jobs = Some(count(key, value)?),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Output directory: the configured one, else `$WKBZETA_OUT_DIR`, else `.`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}
