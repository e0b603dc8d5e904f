//! Run configuration shared by every computation, plus the `key = value`
//! file format understood by the command line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::MAX_DEPTH;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown output format `{other}`"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputFormat::Csv => f.write_str("csv"),
            OutputFormat::Json => f.write_str("json"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub depth_min: u32,
    pub depth_max: u32,
    /// Target width of a pressure bracket and stabilization tolerance across depths.
    pub bracket_tol: f64,
    /// Residual tolerance of the power iteration (log growth spread).
    pub power_iter_tol: f64,
    pub power_iter_cap: usize,
    /// Natural-log threshold above which a lower pressure bound at t < 0 counts as blow-up.
    pub blowup_threshold: f64,
    /// For t < 0: minimum per-depth growth of the lower bound, in units of |t| log 2,
    /// sustained over `growth_window` consecutive depths, that also counts as blow-up.
    pub growth_rate: f64,
    pub growth_window: usize,
    /// Riesz truncation M = depth + offset.
    pub riesz_truncation_offset: u32,
    pub workers: usize,
    pub output_format: OutputFormat,
    /// Per-symbol mean below which alpha is checked for divergence.
    pub alpha_threshold: f64,
    pub endpoint_depth: u32,
    /// Largest depth at which Karp's dynamic program is used instead of policy iteration.
    pub karp_max_depth: u32,
    pub delta_floor: f64,
    pub golden_tol: f64,
    pub mass_floor: f64,
    /// Maximum number of quadrature nodes in a single Riesz table.
    pub quadrature_budget: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            depth_min: 8,
            depth_max: 20,
            bracket_tol: 1e-3,
            power_iter_tol: 1e-10,
            power_iter_cap: 200_000,
            blowup_threshold: 20.0,
            growth_rate: 0.25,
            growth_window: 3,
            riesz_truncation_offset: 6,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            output_format: OutputFormat::Csv,
            alpha_threshold: 40.0,
            endpoint_depth: 12,
            karp_max_depth: 10,
            delta_floor: 0.05,
            golden_tol: 1e-8,
            mass_floor: 1e-12,
            quadrature_budget: 1 << 27,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value `{value}` for `{key}`")))
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.depth_min == 0 || self.depth_min > self.depth_max || self.depth_max > MAX_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= depth_min <= depth_max <= {MAX_DEPTH}, got {}..{}",
                self.depth_min, self.depth_max
            )));
        }
        let tolerances = [
            ("bracket_tol", self.bracket_tol),
            ("power_iter_tol", self.power_iter_tol),
            ("golden_tol", self.golden_tol),
            ("mass_floor", self.mass_floor),
            ("delta_floor", self.delta_floor),
        ];
        for (name, v) in tolerances {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.power_iter_cap == 0 || self.workers == 0 || self.growth_window == 0 {
            return Err(Error::InvalidArgument(
                "power_iter_cap, workers and growth_window must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key.replace('-', "_").as_str() {
            "depth_min" => self.depth_min = parse_num(key, value)?,
            "depth_max" => self.depth_max = parse_num(key, value)?,
            "bracket_tol" => self.bracket_tol = parse_num(key, value)?,
            "power_iter_tol" => self.power_iter_tol = parse_num(key, value)?,
            "power_iter_cap" => self.power_iter_cap = parse_num(key, value)?,
            "blowup_threshold" => self.blowup_threshold = parse_num(key, value)?,
            "growth_rate" => self.growth_rate = parse_num(key, value)?,
            "growth_window" => self.growth_window = parse_num(key, value)?,
            "riesz_truncation_offset" => self.riesz_truncation_offset = parse_num(key, value)?,
            "workers" => self.workers = parse_num(key, value)?,
            "output_format" | "format" => self.output_format = value.parse()?,
            "alpha_threshold" => self.alpha_threshold = parse_num(key, value)?,
            "endpoint_depth" => self.endpoint_depth = parse_num(key, value)?,
            "karp_max_depth" => self.karp_max_depth = parse_num(key, value)?,
            "delta_floor" => self.delta_floor = parse_num(key, value)?,
            "golden_tol" => self.golden_tol = parse_num(key, value)?,
            "mass_floor" => self.mass_floor = parse_num(key, value)?,
            "quadrature_budget" => self.quadrature_budget = parse_num(key, value)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("config line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        self.apply_str(&text)
    }
}
