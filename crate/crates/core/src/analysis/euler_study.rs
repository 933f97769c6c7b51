//! Distance between the slow manifold of an Euler-discretized ODE and the ODE's own.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::Vector;
use crate::manifold::{self, Direction, Grid, TransformOptions};
use crate::models::euler::{self, DiagonalOdeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerStudyRow {
    pub eps: f64,
    pub h: f64,
    /// Sup over grid nodes of `|phi_map - phi_ode|`.
    pub distance: f64,
    /// Same against the closed-form map manifold; measures solver error.
    pub solver_error: f64,
    pub sweeps: usize,
}

/// One row per `(eps, h)`, eps-major, for the diagonal test system.
pub fn run_euler_study(
    p: DiagonalOdeParams,
    eps_list: &[f64],
    h_list: &[f64],
    grid: &Grid,
) -> Result<Vec<EulerStudyRow>> {
    if grid.dim() != 1 {
        return Err(Error::Dimension("euler study needs a 1-D grid".into()));
    }
    if let Some(&h) = h_list.iter().find(|&&h| !(h > 0.0)) {
        return Err(Error::ParamOutOfRange(format!("step h = {h} must be positive")));
    }
    let ode = euler::diagonal_ode(p);
    let tuples: Vec<(f64, f64)> = eps_list
        .iter()
        .flat_map(|&e| h_list.iter().map(move |&h| (e, h)))
        .collect();
    tuples
        .par_iter()
        .map(|&(eps, h)| {
            let map = euler::euler_discretize(&ode, h)?;
            let critical = manifold::solve_critical_graph(&map, grid, &Vector::zeros(2))?;
            let (slow, stats) = if eps == 0.0 {
                (critical, manifold::TransformStats { sweeps: 0, last_update: 0.0 })
            } else {
                manifold::slow_manifold_numeric_with(
                    &map,
                    &critical,
                    eps,
                    Direction::Forward,
                    &TransformOptions::default(),
                )?
            };
            let mut distance: f64 = 0.0;
            let mut solver_error: f64 = 0.0;
            for i in 0..slow.len() {
                let x = slow.node(i)[0];
                let y = &slow.values()[i];
                let ode_y = euler::diagonal_ode_slow_manifold(&p, x, eps);
                let map_y = euler::diagonal_map_slow_manifold(&p, x, eps, h);
                for c in 0..2 {
                    distance = distance.max((y[c] - ode_y[c]).abs());
                    solver_error = solver_error.max((y[c] - map_y[c]).abs());
                }
            }
            Ok(EulerStudyRow {
                eps,
                h,
                distance,
                solver_error,
                sweeps: stats.sweeps,
            })
        })
        .collect()
}

pub fn rows_to_csv(rows: &[EulerStudyRow]) -> String {
    let mut out = format!("# schema: {}\neps,h,distance,solver_error,sweeps\n", io::SCHEMA_VERSION);
    for r in rows {
        out.push_str(&io::csv_row(&[r.eps, r.h, r.distance, r.solver_error]));
        out.push_str(&format!(",{}\n", r.sweeps));
    }
    out
}
