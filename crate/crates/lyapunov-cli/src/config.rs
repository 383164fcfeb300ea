//! JSON experiment configuration.
//!
//! The schema is strict: unknown keys are rejected so that a typo in a
//! coupling name fails loudly instead of silently running the wrong
//! experiment. Every section except `model` is optional and falls back
//! to defaults; within `model` only `beta` is mandatory.

use std::fs;
use std::path::Path;

use lyapunov_core::expr::Expression;
use lyapunov_core::solver::SolverConfig;
use lyapunov_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub tree: TreeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "J3", default)]
    pub j3: f64,
    #[serde(rename = "J", default)]
    pub j: f64,
    #[serde(rename = "J1", default)]
    pub j1: f64,
    #[serde(default)]
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "zero_expr")]
    pub xi1: String,
    #[serde(default = "zero_expr")]
    pub xi2: String,
    #[serde(default = "zero_expr")]
    pub xi3: String,
}

fn zero_expr() -> String {
    "0".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub nodes: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection { nodes: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default = "default_bounds_grid")]
    pub grid: usize,
    #[serde(default = "default_bounds_refine")]
    pub refine: usize,
}

fn default_bounds_grid() -> usize {
    64
}

fn default_bounds_refine() -> usize {
    3
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            grid: 64,
            refine: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cluster_eps")]
    pub cluster_eps: f64,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    1000
}

fn default_damping() -> f64 {
    1.0
}

fn default_starts() -> usize {
    20
}

fn default_cluster_eps() -> f64 {
    1e-8
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: 1e-12,
            max_iter: 1000,
            damping: 1.0,
            starts: 20,
            seed: 0,
            cluster_eps: 1e-8,
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
            starts: self.starts,
            seed: self.seed,
            cluster_eps: self.cluster_eps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSection {
    #[serde(default = "default_tree_k")]
    pub k: usize,
    #[serde(default = "default_tree_n")]
    pub n: usize,
    #[serde(default = "default_tree_nodes")]
    pub quadrature_nodes: usize,
}

fn default_tree_k() -> usize {
    2
}

fn default_tree_n() -> usize {
    1
}

fn default_tree_nodes() -> usize {
    16
}

impl Default for TreeSection {
    fn default() -> Self {
        TreeSection {
            k: 2,
            n: 1,
            quadrature_nodes: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "J1")]
    J1,
    #[serde(rename = "J3")]
    J3,
    #[serde(rename = "J")]
    J,
    #[serde(rename = "alpha")]
    Alpha,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSection {
    /// Evenly spaced sweep values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let h = (self.to - self.from) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.from + i as f64 * h).collect()
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Config(format!("config error at `{}`: {}", e.path(), e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(sweep) = &self.sweep {
            if sweep.steps < 2 {
                return Err(CliError::Config("sweep.steps must be at least 2".into()));
            }
            if !(sweep.from.is_finite() && sweep.to.is_finite()) {
                return Err(CliError::Config("sweep endpoints must be finite".into()));
            }
        }
        if self.quadrature.nodes == 0 {
            return Err(CliError::Config("quadrature.nodes must be positive".into()));
        }
        if self.bounds.grid < 2 {
            return Err(CliError::Config("bounds.grid must be at least 2".into()));
        }
        Ok(())
    }

    /// Builds the validated model parameters, parsing the ξ expressions.
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let xi1 = Expression::parse(&self.model.xi1, &['t', 'u', 'v'])
            .map_err(|e| CliError::Config(format!("model.xi1: {e}")))?;
        let xi2 = Expression::parse(&self.model.xi2, &['u', 'v'])
            .map_err(|e| CliError::Config(format!("model.xi2: {e}")))?;
        let xi3 = Expression::parse(&self.model.xi3, &['t', 'u'])
            .map_err(|e| CliError::Config(format!("model.xi3: {e}")))?;
        let params = ModelParams {
            j3: self.model.j3,
            j: self.model.j,
            j1: self.model.j1,
            alpha: self.model.alpha,
            beta: self.model.beta,
            xi1,
            xi2,
            xi3,
        };
        params
            .validate()
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
        Ok(params)
    }

    /// Returns a copy with one coupling replaced by a sweep value.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Self {
        let mut out = self.clone();
        match parameter {
            SweepParameter::Beta => out.model.beta = value,
            SweepParameter::J1 => out.model.j1 = value,
            SweepParameter::J3 => out.model.j3 = value,
            SweepParameter::J => out.model.j = value,
            SweepParameter::Alpha => out.model.alpha = value,
        }
        out
    }
}
