//! Run configuration: one JSON document with `model`, `solver`, `mc`, and
//! `output` sections plus the strategy sweep list `kappas`. Missing fields
//! take the baseline defaults below; unknown fields are rejected so typos
//! cannot silently fall back to defaults. Command-line flags override loaded
//! values field by field.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::McConfig;
use crate::params::ModelParams;
use crate::survival::SolveOptions;

/// Model section: the raw parameters, unvalidated until
/// [`FileConfig::params_for`] builds a [`ModelParams`] from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
    pub r: f64,
    pub a: f64,
    pub sigma: f64,
    pub kappa: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            lambda: 1.0,
            mu: 1.0,
            c: 0.5,
            r: 0.05,
            a: 0.15,
            sigma: 0.4,
            kappa: 0.4,
        }
    }
}

/// Probe-grid spacing: `semilog` plots want a linear capital grid, `loglog`
/// plots a logarithmic one. The grid is the only thing the scale changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Semilog,
    Loglog,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semilog" => Ok(Scale::Semilog),
            "loglog" => Ok(Scale::Loglog),
            other => Err(Error::Config(format!(
                "unknown scale `{other}` (expected `semilog` or `loglog`)"
            ))),
        }
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scale::Semilog => "semilog",
            Scale::Loglog => "loglog",
        })
    }
}

/// Output section: the probe grid for CSV emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub u_min: f64,
    pub u_max: f64,
    pub u_points: usize,
    pub scale: Scale,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            u_min: 1e-2,
            u_max: 1e2,
            u_points: 50,
            scale: Scale::Loglog,
        }
    }
}

impl OutputSection {
    /// The probe grid this section describes: endpoints always included.
    pub fn probes(&self) -> Result<Vec<f64>> {
        if self.u_points < 2 {
            return Err(Error::Config(format!(
                "output.u_points = {} must be at least 2",
                self.u_points
            )));
        }
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min < self.u_max) {
            return Err(Error::Config(format!(
                "output grid needs u_min < u_max (got {} .. {})",
                self.u_min, self.u_max
            )));
        }
        match self.scale {
            Scale::Semilog => {
                if self.u_min < 0.0 {
                    return Err(Error::Config(format!(
                        "output.u_min = {} must be nonnegative",
                        self.u_min
                    )));
                }
                crate::survival::linear_probes(self.u_min, self.u_max, self.u_points)
            }
            Scale::Loglog => {
                if self.u_min <= 0.0 {
                    return Err(Error::Config(format!(
                        "output.u_min = {} must be positive on a log grid",
                        self.u_min
                    )));
                }
                crate::survival::log_probes(self.u_min, self.u_max, self.u_points)
            }
        }
    }
}

/// The whole configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelSection,
    pub solver: SolveOptions,
    pub mc: McConfig,
    pub output: OutputSection,
    /// Strategies swept by table/plot commands; `model.kappa` serves the
    /// single-strategy commands.
    pub kappas: Vec<f64>,
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            model: ModelSection::default(),
            solver: SolveOptions::default(),
            mc: McConfig::default(),
            output: OutputSection::default(),
            kappas: vec![0.2, 0.4, 0.9],
        }
    }
}

impl FileConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Validated model parameters with the section's own kappa.
    pub fn params(&self) -> Result<ModelParams> {
        self.params_for(self.model.kappa)
    }

    /// Validated model parameters with `kappa` substituted.
    pub fn params_for(&self, kappa: f64) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(m.lambda, m.mu, m.c, m.r, m.a, m.sigma, kappa)
    }
}
