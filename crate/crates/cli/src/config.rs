//! TOML run configuration.
//!
//! ```toml
//! config_version = 1
//! t_max = 10.0
//! n_samples = 400
//! output_dir = "out"
//!
//! [model]
//! n_sites = 5
//! g = -1.05
//! h = 0.5
//! alpha = 0.01
//! gamma = 0.01
//! ```
//!
//! Every other section is optional; see `configs/` for complete files.

use std::path::{Path, PathBuf};

use krylovflow::bilanczos::BiLanczosConfig;
use krylovflow::chain::StepControl;
use krylovflow::continuum::{ContinuumCase, ContinuumSpec};
use krylovflow::filter::FilterConfig;
use krylovflow::lindblad::MAX_SITES;
use krylovflow::spin::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;
pub const ORACLE_MAX_SITES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: SeedKind,
    #[serde(default)]
    pub bilanczos: BiLanczosConfig,
    #[serde(default)]
    pub step: StepControl,
    pub t_max: f64,
    pub n_samples: usize,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub filter: FilterConfig,
    /// Coefficients CSV for `filter`; defaults to the one in the output directory.
    #[serde(default)]
    pub filter_input: Option<PathBuf>,
    #[serde(default)]
    pub continuum: Option<ContinuumConfig>,
    #[serde(default)]
    pub saturation: SaturationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedKind {
    /// Every matrix element equal to `1/d`.
    #[default]
    Uniform,
    /// A JSON file `{"re": [[...]], "im": [[...]]}` holding a `d × d` matrix;
    /// `im` may be omitted. Relative paths resolve against the config file.
    Custom { path: PathBuf },
}

/// Tolerances for the diagnostics and the internal consistency checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    pub structure_tol: f64,
    pub structure_n: Option<usize>,
    pub bound_tol: f64,
    /// Largest tolerated `max |Q†P − I|` before the run is rejected.
    pub max_biortho_residual: f64,
    /// Largest tolerated `max |Q†𝓛P − T|`.
    pub max_tridiag_residual: f64,
    /// Largest tolerated `|P − 1|` for closed runs.
    pub max_probability_drift: f64,
    pub mt_floor: f64,
    pub mt_tol: f64,
    /// Time window for the oracle comparison; the whole grid when absent.
    pub oracle_t_max: Option<f64>,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            structure_tol: 1e-6,
            structure_n: Some(50),
            bound_tol: 1e-6,
            max_biortho_residual: 1e-8,
            max_tridiag_residual: 1e-6,
            max_probability_drift: 1e-8,
            mt_floor: 1e-6,
            mt_tol: 1e-4,
            oracle_t_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumConfig {
    pub case: ContinuumCase,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "three")]
    pub t_max: f64,
    #[serde(default = "sixty_one")]
    pub n_samples: usize,
    #[serde(default = "continuum_rtol")]
    pub rtol: f64,
    /// Also evolve the discrete chain `b_n = βn + c`, `a_n = i a(n)` on this
    /// many sites and tabulate it next to the characteristics solution.
    #[serde(default)]
    pub discrete_k: Option<usize>,
}

fn one() -> f64 {
    1.0
}
fn three() -> f64 {
    3.0
}
fn sixty_one() -> usize {
    61
}
fn continuum_rtol() -> f64 {
    1e-13
}

impl ContinuumConfig {
    pub fn spec(&self) -> ContinuumSpec {
        ContinuumSpec {
            case: self.case,
            alpha: self.alpha,
            beta: self.beta,
            c: self.c,
        }
    }
}

/// Synthetic chain whose coefficients saturate the dispersion bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturationConfig {
    pub alpha0: f64,
    pub gamma0: f64,
    pub k: usize,
    pub t_max: f64,
    pub n_samples: usize,
    /// Accepted window for `lhs / rhs` on trusted samples.
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            gamma0: 1.0,
            k: 400,
            t_max: 10.0,
            n_samples: 400,
            ratio_min: 0.9999,
            ratio_max: 1.0 + 1e-12,
        }
    }
}

impl RunConfig {
    /// Parses and validates; relative seed paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let SeedKind::Custom { path } = &mut cfg.seed {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(p) = &mut cfg.filter_input {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config_version {} is not supported (expected {CONFIG_VERSION})",
                self.config_version
            )));
        }
        self.model.validate()?;
        if self.model.n_sites > MAX_SITES {
            return Err(CliError::Config(format!(
                "n_sites = {} exceeds the supported maximum of {MAX_SITES}",
                self.model.n_sites
            )));
        }
        self.bilanczos.validate()?;
        self.filter.validate()?;
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(CliError::Config(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.n_samples < 3 {
            return Err(CliError::Config(format!("n_samples must be at least 3, got {}", self.n_samples)));
        }
        if let Some(c) = &self.continuum {
            c.spec().validate()?;
            if !(c.t_max > 0.0) || c.n_samples < 2 || !(c.rtol > 0.0) {
                return Err(CliError::Config("continuum needs t_max > 0, n_samples >= 2, rtol > 0".into()));
            }
            if c.discrete_k.is_some_and(|k| k < 2) {
                return Err(CliError::Config("continuum discrete_k must be at least 2".into()));
            }
        }
        let s = &self.saturation;
        if s.k < 2 || !(s.t_max > 0.0) || s.n_samples < 3 {
            return Err(CliError::Config("saturation needs k >= 2, t_max > 0, n_samples >= 3".into()));
        }
        Ok(())
    }
}
