//! Resolved run settings: built-in defaults, then a `key = value` file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ymlab::NormalizationConvention;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowBoundary {
    /// Hold the outer value at its initial level.
    Clamp,
    /// Zero-flux mirror at the outer node.
    Mirror,
    /// Time-dependent trace of the self-similar solution (needs `gastel`).
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Eigenforms,
    Bianchi,
    Gap,
    Variation,
    Scaling,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s.trim() {
            "identities" => Self::Identities,
            "eigenforms" => Self::Eigenforms,
            "bianchi" => Self::Bianchi,
            "gap" => Self::Gap,
            "variation" => Self::Variation,
            "scaling" => Self::Scaling,
            other => return Err(CliError::Config(format!("unknown suite {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSettings {
    /// Start from the self-similar Gastel profile at `t0`.
    pub gastel: bool,
    pub t0: f64,
    pub t1: f64,
    pub dr: f64,
    pub rho_max: f64,
    pub samples: usize,
    /// Initial profile is multiplied by this factor.
    pub perturb: f64,
    pub boundary: FlowBoundary,
    pub cfl: f64,
    /// Run the monotonicity harness on the sampled states.
    pub harness: bool,
    /// Include the entropy in the harness (slow).
    pub entropy: bool,
    /// Bound on the self-similar tracking error for `gastel` runs.
    pub tracking_bound: f64,
    pub blowup_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiSettings {
    pub c_max: f64,
    pub log_t0_min: f64,
    pub log_t0_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub dims: Vec<usize>,
    pub conventions: Vec<NormalizationConvention>,
    /// Relative tolerance of the adaptive radial quadrature.
    pub tol_quad: f64,
    /// Replaces every per-check tolerance when set.
    pub tol_check: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    /// Grid shape (c nodes, log t₀ nodes) for xi-scan.
    pub grid: (usize, usize),
    pub format: Format,
    pub flat: bool,
    pub suite: Option<Suite>,
    /// Sample points per dimension in pointwise verification suites.
    pub points: usize,
    /// Random paths per dimension in the variation suite.
    pub paths: usize,
    pub flow: FlowSettings,
    pub xi: XiSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dims: (5..=9).collect(),
            conventions: NormalizationConvention::ALL.to_vec(),
            tol_quad: 1e-12,
            tol_check: None,
            seed: 1,
            out: None,
            profile: None,
            grid: (41, 41),
            format: Format::Csv,
            flat: false,
            suite: None,
            points: 20,
            paths: 2,
            flow: FlowSettings {
                gastel: false,
                t0: -1.0,
                t1: -0.25,
                dr: 0.02,
                rho_max: 30.0,
                samples: 10,
                perturb: 1.0,
                boundary: FlowBoundary::Clamp,
                cfl: 0.2,
                harness: true,
                entropy: true,
                tracking_bound: 1e-3,
                blowup_threshold: 1e4,
            },
            xi: XiSettings { c_max: 2.0, log_t0_min: -2.0, log_t0_max: 2.0 },
        }
    }
}

/// Every key accepted in a configuration file.
pub const KEYS: &[&str] = &[
    "n",
    "conventions",
    "tol_quad",
    "tol_check",
    "seed",
    "out",
    "profile",
    "grid",
    "format",
    "flat",
    "suite",
    "points",
    "paths",
    "gastel",
    "t0",
    "t1",
    "dr",
    "rho_max",
    "samples",
    "perturb",
    "boundary",
    "cfl",
    "harness",
    "entropy",
    "tracking_bound",
    "blowup_threshold",
    "c_max",
    "log_t0_min",
    "log_t0_max",
];

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| bad(key, value, e))
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

/// `5..9`, `5..=9`, `5,7,9` or `6`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>, CliError> {
    let s = s.trim();
    let dims: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = num("n", a)?;
        let b: usize = num("n", b.trim_start_matches('='))?;
        if b < a {
            return Err(bad("n", s, "empty range"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|p| num("n", p)).collect::<Result<_, _>>()?
    };
    if dims.is_empty() {
        return Err(bad("n", s, "no dimensions"));
    }
    Ok(dims)
}

/// `41x41`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = s.trim().split_once(['x', 'X']).ok_or_else(|| bad("grid", s, "expected AxB"))?;
    let g = (num("grid", a)?, num("grid", b)?);
    if g.0 < 2 || g.1 < 2 {
        return Err(bad("grid", s, "each side needs at least 2 nodes"));
    }
    Ok(g)
}

pub fn parse_conventions(s: &str) -> Result<Vec<NormalizationConvention>, CliError> {
    s.split(',')
        .map(|p| NormalizationConvention::parse(p).map_err(|e| bad("conventions", s, e)))
        .collect()
}

impl Settings {
    /// Sets one key; unknown keys are rejected.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "n" => self.dims = parse_dims(v)?,
            "conventions" => self.conventions = parse_conventions(v)?,
            "tol_quad" => self.tol_quad = num(key, v)?,
            "tol_check" => self.tol_check = Some(num(key, v)?),
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "profile" => self.profile = Some(PathBuf::from(v)),
            "grid" => self.grid = parse_grid(v)?,
            "format" => {
                self.format = match v {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad(key, v, "expected csv or json")),
                }
            }
            "flat" => self.flat = boolean(key, v)?,
            "suite" => self.suite = Some(Suite::parse(v)?),
            "points" => self.points = num(key, v)?,
            "paths" => self.paths = num(key, v)?,
            "gastel" => self.flow.gastel = boolean(key, v)?,
            "t0" => self.flow.t0 = num(key, v)?,
            "t1" => self.flow.t1 = num(key, v)?,
            "dr" => self.flow.dr = num(key, v)?,
            "rho_max" => self.flow.rho_max = num(key, v)?,
            "samples" => self.flow.samples = num(key, v)?,
            "perturb" => self.flow.perturb = num(key, v)?,
            "boundary" => {
                self.flow.boundary = match v {
                    "clamp" => FlowBoundary::Clamp,
                    "mirror" => FlowBoundary::Mirror,
                    "exact" => FlowBoundary::Exact,
                    _ => return Err(bad(key, v, "expected clamp, mirror or exact")),
                }
            }
            "cfl" => self.flow.cfl = num(key, v)?,
            "harness" => self.flow.harness = boolean(key, v)?,
            "entropy" => self.flow.entropy = boolean(key, v)?,
            "tracking_bound" => self.flow.tracking_bound = num(key, v)?,
            "blowup_threshold" => self.flow.blowup_threshold = num(key, v)?,
            "c_max" => self.xi.c_max = num(key, v)?,
            "log_t0_min" => self.xi.log_t0_min = num(key, v)?,
            "log_t0_max" => self.xi.log_t0_max = num(key, v)?,
            _ => return Err(CliError::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` text (`#` starts a comment).
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {raw:?}", k + 1)))?;
            self.apply(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| Err(CliError::Config(m));
        if !(self.tol_quad > 0.0 && self.tol_quad < 1.0) {
            return cfg(format!("tol_quad must lie in (0, 1), got {}", self.tol_quad));
        }
        if let Some(t) = self.tol_check {
            if !(t > 0.0) {
                return cfg(format!("tol_check must be positive, got {t}"));
            }
        }
        if self.flat && self.profile.is_some() {
            return cfg("flat and profile are mutually exclusive".into());
        }
        if self.points == 0 {
            return cfg("points must be positive".into());
        }
        let f = &self.flow;
        if !(f.t1 > f.t0) {
            return cfg(format!("t1 = {} must be later than t0 = {}", f.t1, f.t0));
        }
        if !(f.dr > 0.0 && f.rho_max > 10.0 * f.dr) {
            return cfg(format!("need dr > 0 and rho_max > 10 dr (dr = {}, rho_max = {})", f.dr, f.rho_max));
        }
        if f.samples < 2 {
            return cfg("samples must be at least 2".into());
        }
        if !(self.xi.log_t0_max > self.xi.log_t0_min && self.xi.c_max >= 0.0) {
            return cfg("xi window is empty".into());
        }
        Ok(())
    }

    /// Tolerance for a check, honouring the global override.
    pub fn tol(&self, default: f64) -> f64 {
        self.tol_check.unwrap_or(default)
    }

    pub fn quadrature(&self) -> ymlab::QuadratureSpec {
        ymlab::QuadratureSpec { tol_rel: self.tol_quad, ..ymlab::QuadratureSpec::default() }
    }
}
