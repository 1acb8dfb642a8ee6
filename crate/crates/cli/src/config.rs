//! Run configuration: defaults, a flat `key = value` file, then command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use l2dyn::melnikov::{DEFAULT_HILL_DELTA, DEFAULT_QUAD_TOL, DEFAULT_TIP_INDEX};
use l2dyn::orbits::{ShootSettings, DEFAULT_DELTA, DEFAULT_T_MAX, RESIDUAL_TOL};
use serde::Serialize;
use thiserror::Error;

pub const OUT_DIR_ENV: &str = "L2DYN_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey { path: String, line: usize, key: String },
    #[error("{path}:{line}: expected `key = value`, got `{text}`")]
    Malformed { path: String, line: usize, text: String },
    #[error("{key}: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("{key} = {value} is outside {range}")]
    OutOfRange { key: &'static str, value: String, range: &'static str },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(()),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Integrator tolerance.
    pub tol: f64,
    pub quad_tol: f64,
    /// Required |p_x| at the symmetric crossing.
    pub residual_tol: f64,
    pub delta: f64,
    pub hill_delta: f64,
    /// Flight-time budget for branches and tip searches.
    pub horizon: f64,
    pub tip_index: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            quad_tol: DEFAULT_QUAD_TOL,
            residual_tol: RESIDUAL_TOL,
            delta: DEFAULT_DELTA,
            hill_delta: DEFAULT_HILL_DELTA,
            horizon: DEFAULT_T_MAX,
            tip_index: DEFAULT_TIP_INDEX,
            k_min: 2,
            k_max: 13,
            out: None,
            format: Format::Csv,
            workers: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

fn check(ok: bool, key: &'static str, value: impl ToString, range: &'static str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { key, value: value.to_string(), range })
    }
}

impl RunConfig {
    /// Defaults with the output directory taken from the environment when set.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.out = Some(PathBuf::from(dir));
        }
        cfg
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        match key {
            "tol" => self.tol = parse(key, value)?,
            "quad_tol" => self.quad_tol = parse(key, value)?,
            "residual_tol" => self.residual_tol = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "hill_delta" => self.hill_delta = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "tip_index" => self.tip_index = parse(key, value)?,
            "k_min" => self.k_min = parse(key, value)?,
            "k_max" => self.k_max = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Applies a flat configuration file; `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: name.clone(), source })?;
        self.apply_text(&text, &name)
    }

    pub fn apply_text(&mut self, text: &str, name: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed { path: name.into(), line: i + 1, text: line.into() });
            };
            let (key, value) = (key.trim(), value.trim());
            if !self.set(key, value)? {
                return Err(ConfigError::UnknownKey { path: name.into(), line: i + 1, key: key.into() });
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check((1e-14..=1e-6).contains(&self.tol), "tol", self.tol, "[1e-14, 1e-6]")?;
        check(self.quad_tol > 0.0 && self.quad_tol <= 1e-3, "quad_tol", self.quad_tol, "(0, 1e-3]")?;
        check(
            self.residual_tol > 0.0 && self.residual_tol <= 1e-6,
            "residual_tol",
            self.residual_tol,
            "(0, 1e-6]",
        )?;
        check((1e-10..=1e-4).contains(&self.delta), "delta", self.delta, "[1e-10, 1e-4]")?;
        check((1e-10..=1e-4).contains(&self.hill_delta), "hill_delta", self.hill_delta, "[1e-10, 1e-4]")?;
        check(self.horizon > 0.0 && self.horizon.is_finite(), "horizon", self.horizon, "(0, inf)")?;
        check(self.tip_index >= 1, "tip_index", self.tip_index, "[1, inf)")?;
        check(self.k_min >= 2, "k_min", self.k_min, "[2, inf)")?;
        check(self.k_max >= self.k_min && self.k_max <= 60, "k_max", self.k_max, "[k_min, 60]")?;
        check((1..=256).contains(&self.workers), "workers", self.workers, "[1, 256]")?;
        Ok(())
    }

    pub fn shoot_settings(&self) -> ShootSettings {
        ShootSettings { delta: self.delta, tol: self.tol, t_max: self.horizon }
    }

    pub fn hill_settings(&self) -> ShootSettings {
        ShootSettings { delta: self.hill_delta, tol: self.tol, t_max: self.horizon }
    }
}
