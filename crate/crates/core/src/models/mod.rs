//! Built-in models and a name-keyed registry.

pub mod chialvo;
pub mod euler;
pub mod standard;
pub mod synthetic;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::map::FastSlowMap;
use crate::poincare::{self, PoincareOptions, SectionSpec};

/// A registered model with a box of chart parameters over which `S` is a graph.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub map: FastSlowMap,
    pub sample_lo: Vec<f64>,
    pub sample_hi: Vec<f64>,
    /// Starting guess for the graph coordinates of `S`.
    pub y_seed: Vector,
}

pub const BUILTIN: &[&str] = &[
    "chialvo",
    "standard:chialvo",
    "standard:relaxed",
    "euler:linear",
    "euler:diagonal",
    "synthetic:saddle",
    "synthetic:linear",
    "poincare:hopf",
];

pub type Params = BTreeMap<String, f64>;

fn take(params: &Params, allowed: &[(&str, f64)], model: &str) -> Result<Vec<f64>> {
    for key in params.keys() {
        if !allowed.iter().any(|(k, _)| k == key) {
            return Err(Error::Config(format!(
                "unknown parameter '{key}' for model '{model}' (expected one of: {})",
                allowed.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ")
            )));
        }
    }
    Ok(allowed
        .iter()
        .map(|(k, d)| params.get(*k).copied().unwrap_or(*d))
        .collect())
}

/// Builds a registered model from its name and parameter table; absent keys take defaults.
pub fn build(name: &str, params: &Params) -> Result<ModelSpec> {
    let spec = |map: FastSlowMap, lo: Vec<f64>, hi: Vec<f64>, seed: Vec<f64>| ModelSpec {
        name: name.to_string(),
        map,
        sample_lo: lo,
        sample_hi: hi,
        y_seed: Vector::from_vec(seed),
    };
    match name {
        "chialvo" | "standard:chialvo" => {
            let v = take(params, &[("a", 1.0), ("b", 5.0), ("c", 3.5), ("k", 0.035)], name)?;
            let p = chialvo::ChialvoParams::new_allow_zero_k(v[0], v[1], v[2], v[3])?;
            let map = if name == "chialvo" {
                chialvo::chialvo(p)?
            } else {
                standard::chialvo_standard(p)?
            };
            Ok(spec(map, vec![1.1], vec![5.0], vec![1.0]))
        }
        "standard:relaxed" => {
            let v = take(params, &[("r", 0.5)], name)?;
            Ok(spec(standard::relaxed_logistic(v[0])?, vec![-1.0], vec![1.0], vec![0.0]))
        }
        "euler:linear" => {
            let v = take(params, &[("lambda", -2.0), ("h", 0.5)], name)?;
            let map = euler::euler_discretize(&euler::linear_ode(v[0]), v[1])?;
            Ok(spec(map, vec![-1.0], vec![1.0], vec![0.0]))
        }
        "euler:diagonal" => {
            let v = take(
                params,
                &[("lambda1", -1.0), ("lambda2", -2.0), ("eta1", 0.5), ("eta2", -0.25), ("h", 0.2)],
                name,
            )?;
            let p = euler::DiagonalOdeParams {
                lambda1: v[0],
                lambda2: v[1],
                eta1: v[2],
                eta2: v[3],
            };
            let map = euler::euler_discretize(&euler::diagonal_ode(p), v[4])?;
            Ok(spec(map, vec![-1.0], vec![1.0], vec![0.0, 0.0]))
        }
        "synthetic:saddle" => {
            take(params, &[], name)?;
            Ok(spec(synthetic::saddle()?, vec![-1.0], vec![1.0], vec![0.0, 0.0]))
        }
        "synthetic:linear" => {
            let v = take(params, &[("a1", 2.0), ("a2", -1.0)], name)?;
            let map = synthetic::linear(Matrix::from_column_slice(2, 1, &[v[0], v[1]]))?;
            Ok(spec(map, vec![-1.0], vec![1.0], vec![0.0, 0.0]))
        }
        "poincare:hopf" => {
            let v = take(params, &[("a_g", 0.5)], name)?;
            let section = SectionSpec::hopf_default();
            let map = poincare::build_poincare_map(&poincare::hopf(v[0]), &section, &PoincareOptions::default())?;
            Ok(spec(
                map,
                vec![section.alpha_box.0],
                vec![section.alpha_box.1],
                section.x_guess.clone(),
            ))
        }
        other => Err(Error::Config(format!(
            "unknown model '{other}' (built-in: {})",
            BUILTIN.join(", ")
        ))),
    }
}

impl ModelSpec {
    /// Point of `S` at chart parameters `x`.
    pub fn critical_point(&self, x: &Vector) -> Result<Vector> {
        crate::manifold::critical_point(&self.map, x, &self.y_seed)
    }

    /// Maps `u` in the unit cube onto the sampling box.
    pub fn sample_x(&self, u: &[f64]) -> Vector {
        Vector::from_iterator(
            self.sample_lo.len(),
            (0..self.sample_lo.len())
                .map(|a| self.sample_lo[a] + u[a] * (self.sample_hi[a] - self.sample_lo[a])),
        )
    }
}
