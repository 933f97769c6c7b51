//! JSON run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Direction, Grid};
use crate::models::{self, ModelSpec, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub z0: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "schema_one")]
    pub schema: u32,
    pub model: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eps_max")]
    pub eps_max: f64,
    /// Grid of chart parameters for critical and slow manifolds.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub direction: Option<Direction>,
    /// Scan for singularities along the first chart parameter.
    #[serde(default)]
    pub singularity_range: Option<RangeConfig>,
    #[serde(default)]
    pub fixed_point_guesses: Vec<Vec<f64>>,
    /// Step sizes for Euler models; the report classifies `S` at each.
    #[serde(default)]
    pub h_sweep: Vec<f64>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn schema_one() -> u32 {
    1
}

fn default_eps() -> f64 {
    1e-3
}

fn default_eps_max() -> f64 {
    1e-2
}

fn default_tol() -> f64 {
    crate::spectral::HYPERBOLICITY_TOL
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let msg = msg.split(" at line ").next().unwrap_or(&msg);
            Error::Config(format!("line {} column {}: {msg}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Default configuration for a built-in model.
    pub fn for_model(model: &str) -> Self {
        Config {
            schema: 1,
            model: model.to_string(),
            params: Params::new(),
            eps: default_eps(),
            eps_max: default_eps_max(),
            grid: None,
            direction: None,
            singularity_range: None,
            fixed_point_guesses: Vec::new(),
            h_sweep: Vec::new(),
            simulate: None,
            tol: default_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            return Err(Error::Config(format!("unsupported schema {}", self.schema)));
        }
        if !(self.eps >= 0.0) || self.eps > self.eps_max {
            return Err(Error::Config(format!(
                "eps = {} must lie in [0, eps_max = {}]",
                self.eps, self.eps_max
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if let Some(g) = &self.grid {
            Grid::new(g.lo.clone(), g.hi.clone(), g.n.clone())
                .map_err(|e| Error::Config(format!("grid: {e}")))?;
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        models::build(&self.model, &self.params)
    }

    /// Configured grid, or the model's sampling box with 401 nodes per axis.
    pub fn grid_for(&self, spec: &ModelSpec) -> Result<Grid> {
        match &self.grid {
            Some(g) => Grid::new(g.lo.clone(), g.hi.clone(), g.n.clone()),
            None => {
                let lo = if spec.name.ends_with("chialvo") { vec![1.1] } else { spec.sample_lo.clone() };
                let hi = if spec.name.ends_with("chialvo") { vec![2.9] } else { spec.sample_hi.clone() };
                let n = if spec.name.starts_with("poincare") { 21 } else { 401 };
                Grid::new(lo, hi, vec![n; spec.map.k()])
            }
        }
    }
}
