//! Run configuration files (TOML, versioned, unknown fields rejected).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::PortfolioModel;
use crate::risk::TailConstant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("unsupported schema version {found}; expected {SCHEMA_VERSION}")]
    Schema { found: u32 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub model: PortfolioModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gibbs: Option<GibbsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSection {
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    #[serde(default)]
    pub constant: TailConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub x: f64,
    pub ns: Vec<usize>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSection {
    pub x: f64,
    pub ns: Vec<usize>,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Effective sample size to reach at each `n`.
    #[serde(default = "default_ess")]
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub replicates: usize,
}

fn one() -> usize {
    1
}

fn default_bins() -> usize {
    64
}

fn default_ess() -> f64 {
    10_000.0
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(ConfigError::Schema { found: cfg.schema });
        }
        let rep = cfg.model.validate();
        if !rep.is_ok() {
            return Err(ConfigError::Invalid(rep.violations.join("; ")));
        }
        cfg.check_sections()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check_sections(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if let Some(c) = &self.compare {
            if c.replicates == 0 {
                return bad("compare.replicates must be positive".into());
            }
            if c.ns.contains(&0) {
                return bad("compare.ns entries must be positive".into());
            }
        }
        if let Some(g) = &self.gibbs {
            if let Some(n) = g.ns.iter().find(|n| **n < g.k) {
                return bad(format!("gibbs.k = {} exceeds n = {}", g.k, n));
            }
            if g.k == 0 || g.bins == 0 {
                return bad("gibbs.k and gibbs.bins must be positive".into());
            }
        }
        if let Some(r) = &self.risk {
            if let Some(a) = r.alphas.iter().find(|a| !(**a >= 0.9 && **a < 1.0)) {
                return bad(format!("risk.alphas entry {} must lie in [0.9, 1)", a));
            }
        }
        if let Some(s) = &self.simulate {
            if s.replicates == 0 || s.n == 0 {
                return bad("simulate.n and simulate.replicates must be positive".into());
            }
        }
        Ok(())
    }
}
