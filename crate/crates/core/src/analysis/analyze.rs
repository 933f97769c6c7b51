//! One-shot analysis of a configured model.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::io::SCHEMA_VERSION;
use crate::linalg::Vector;
use crate::manifold::{self, Direction, GraphManifold, TransformOptions};
use crate::models::{self, chialvo, euler, ModelSpec, Params};
use crate::reduced::{self, FixedPointReport};
use crate::spectral::{self, ChartCurve, Classification, SingularityHit, SpectralBounds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldTable {
    pub eps: f64,
    pub axes: Vec<Vec<f64>>,
    /// Graph coordinates per node, row-major over the axes.
    pub values: Vec<Vec<f64>>,
}

impl From<&GraphManifold> for ManifoldTable {
    fn from(g: &GraphManifold) -> Self {
        ManifoldTable {
            eps: g.eps(),
            axes: g.grid().axes(),
            values: g.values().iter().map(|v| v.iter().copied().collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericManifold {
    pub direction: Direction,
    pub sweeps: usize,
    pub gap_to_first_order: f64,
    pub invariance_residual: f64,
    pub table: ManifoldTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSweepRow {
    pub h: f64,
    pub classification: Classification,
    pub multipliers: Vec<(f64, f64)>,
    /// Stability boundaries `-2 Re(l) / |l|^2` of the ODE eigenvalues.
    pub h_crit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub schema: u32,
    pub model: String,
    pub params: Params,
    pub eps: f64,
    pub critical: ManifoldTable,
    pub singularities: Vec<SingularityHit>,
    pub spectral_bounds: Option<SpectralBounds>,
    pub first_order: ManifoldTable,
    pub numeric: Option<NumericManifold>,
    pub fixed_points: Vec<FixedPointReport>,
    pub step_sweep: Vec<StepSweepRow>,
    /// Optional stages that failed, with the reason.
    pub notes: Vec<String>,
}

pub fn run_analyze(cfg: &Config) -> Result<AnalyzeReport> {
    cfg.validate()?;
    let spec = cfg.model_spec()?;
    let map = &spec.map;
    let grid = cfg.grid_for(&spec)?;
    let mut notes = Vec::new();

    let critical = manifold::solve_critical_graph(map, &grid, &spec.y_seed)?;
    let singularities = singularity_scan(cfg, &spec)?;

    let points = critical.points();
    let spectral_bounds = match spectral::spectral_bounds(map, &points, cfg.tol) {
        Ok(b) => Some(b),
        Err(e) => {
            notes.push(format!("spectral bounds: {e}"));
            None
        }
    };

    let first_order = manifold::slow_manifold_first_order(map, &critical, cfg.eps)?;
    let direction = cfg.direction.or(match &spectral_bounds {
        Some(b) if b.nu_r.is_infinite() => Some(Direction::Forward),
        Some(b) if b.nu_a == 0.0 => Some(Direction::Backward),
        _ => None,
    });
    let numeric = match direction {
        None => {
            notes.push("numeric slow manifold: grid is not on a single attracting or repelling branch".into());
            None
        }
        Some(d) => match numeric_manifold(map, &critical, &first_order, cfg.eps, d) {
            Ok(n) => Some(n),
            Err(e) => {
                notes.push(format!("numeric slow manifold: {e}"));
                None
            }
        },
    };

    let mut guesses: Vec<Vector> = cfg
        .fixed_point_guesses
        .iter()
        .map(|g| Vector::from_column_slice(g))
        .collect();
    if guesses.is_empty() && spec.name.ends_with("chialvo") {
        let p = chialvo_params(&cfg.params)?;
        guesses = chialvo::chialvo_equilibria(&p, 200.0)
            .into_iter()
            .map(|v| chialvo::critical_point(&p, v))
            .collect();
    }
    let mut fixed_points = Vec::new();
    for g in &guesses {
        if g.len() != map.n() {
            return Err(Error::Config(format!(
                "fixed point guess has {} entries, model needs {}",
                g.len(),
                map.n()
            )));
        }
        match reduced::find_fixed_point(map, g, cfg.eps) {
            Ok(f) => fixed_points.push(f),
            Err(e) => notes.push(format!("fixed point from {:?}: {e}", g.as_slice())),
        }
    }

    let step_sweep = step_sweep(cfg, &spec)?;

    Ok(AnalyzeReport {
        schema: SCHEMA_VERSION,
        model: cfg.model.clone(),
        params: cfg.params.clone(),
        eps: cfg.eps,
        critical: (&critical).into(),
        singularities,
        spectral_bounds,
        first_order: (&first_order).into(),
        numeric,
        fixed_points,
        step_sweep,
        notes,
    })
}

pub fn chialvo_params(params: &Params) -> Result<chialvo::ChialvoParams> {
    let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    chialvo::ChialvoParams::new_allow_zero_k(get("a", 1.0), get("b", 5.0), get("c", 3.5), get("k", 0.035))
}

fn numeric_manifold(
    map: &crate::map::FastSlowMap,
    critical: &GraphManifold,
    first_order: &GraphManifold,
    eps: f64,
    direction: Direction,
) -> Result<NumericManifold> {
    let (slow, stats) = if eps == 0.0 {
        (critical.clone(), manifold::TransformStats { sweeps: 0, last_update: 0.0 })
    } else {
        manifold::slow_manifold_numeric_with(map, critical, eps, direction, &TransformOptions::default())?
    };
    Ok(NumericManifold {
        direction,
        sweeps: stats.sweeps,
        gap_to_first_order: slow.sup_distance(first_order),
        invariance_residual: slow.max_invariance_residual(map, eps)?,
        table: (&slow).into(),
    })
}

pub fn singularity_scan(cfg: &Config, spec: &ModelSpec) -> Result<Vec<SingularityHit>> {
    let map = &spec.map;
    let range = match cfg.singularity_range {
        Some(r) => r,
        None if spec.name.ends_with("chialvo") => {
            let k = chialvo_params(&cfg.params)?.k;
            crate::config::RangeConfig {
                lo: k + 1e-3,
                hi: 5.0,
                n: 4000,
            }
        }
        None => crate::config::RangeConfig {
            lo: spec.sample_lo[0],
            hi: spec.sample_hi[0],
            n: if spec.name.starts_with("poincare") { 41 } else { 2000 },
        },
    };
    if range.n < 2 || !(range.hi > range.lo) {
        return Err(Error::Config("singularity_range needs lo < hi and n >= 2".into()));
    }
    let ts: Vec<f64> = (0..range.n)
        .map(|i| range.lo + (range.hi - range.lo) * i as f64 / (range.n - 1) as f64)
        .collect();
    let mid = spec.sample_x(&vec![0.5; map.k()]);
    let mut seed = map.chart().join(&mid, &spec.y_seed);
    seed[map.chart().param[0]] = ts[0];
    spectral::locate_singularities(map, &ChartCurve { map }, &ts, &seed, 1e-12)
}

fn step_sweep(cfg: &Config, spec: &ModelSpec) -> Result<Vec<StepSweepRow>> {
    if cfg.h_sweep.is_empty() {
        return Ok(Vec::new());
    }
    if !spec.name.starts_with("euler:") {
        return Err(Error::Config("h_sweep applies to euler:* models only".into()));
    }
    let x = spec.sample_x(&vec![0.5; spec.map.k()]);
    cfg.h_sweep
        .iter()
        .map(|&h| {
            let mut params = cfg.params.clone();
            params.insert("h".into(), h);
            let s = models::build(&spec.name, &params)?;
            let z = s.critical_point(&x)?;
            let mu = spectral::nontrivial_multipliers(&s.map, &z)?;
            let mut h_crit = Vec::new();
            for m in &mu {
                if let Some(hc) = euler::euler_hyperbolicity_boundary((m - 1.0) / h)? {
                    h_crit.push(hc);
                }
            }
            Ok(StepSweepRow {
                h,
                classification: spectral::classify_multipliers(&mu, cfg.tol),
                multipliers: mu.iter().map(|m| (m.re, m.im)).collect(),
                h_crit,
            })
        })
        .collect()
}
