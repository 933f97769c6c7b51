//! Chialvo regime labelling from a single long trajectory.
//!
//! The labels are heuristics. After each upward crossing of the upper fold the trajectory
//! either drops back to the lower branch at once (relaxation) or stays in a post-fold
//! segment of large jumps. Inside that segment a period-2 band shows up as alternating
//! increments whose two-step displacement is small compared with the one-step jump.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Vector;
use crate::map::Trajectory;
use crate::models::chialvo::{self, Branch, ChialvoParams, RegimeCase};
use crate::reduced::{self, Stability};

pub const DEFAULT_STEPS: usize = 100_000;
pub const DEFAULT_Z0: [f64; 2] = [0.25, 2.0];

/// Increments above this size count as part of a post-fold segment.
pub const JUMP_MIN: f64 = 0.25;
/// A segment needs this many jumps to be examined for banding.
pub const LONG_BURST: usize = 5;
/// Largest `|v[j+2] - v[j]| / |v[j+1] - v[j]|` inside a banded segment.
pub const BAND_RATIO: f64 = 0.5;
/// Share of banded segments above which the bursting is called non-chaotic.
pub const BANDED_SHARE: f64 = 0.5;
pub const CONVERGENCE_TOL: f64 = 1e-2;
pub const TAIL: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeLabel {
    Excitable,
    Relaxation,
    NonChaoticBursting,
    ChaoticBursting,
    /// Neither converged nor spanning both folds; seen only for off-sample parameters.
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub start: usize,
    pub jumps: usize,
    pub max_ratio: f64,
    pub alternating: bool,
}

impl Burst {
    pub fn is_long(&self) -> bool {
        self.jumps >= LONG_BURST
    }

    pub fn is_banded(&self) -> bool {
        self.max_ratio <= BAND_RATIO && self.alternating
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstStats {
    pub bursts: usize,
    pub long: usize,
    pub banded: usize,
    pub banded_share: Option<f64>,
}

/// Post-fold segments of `v` after each upward crossing of `v_fold`.
pub fn find_bursts(v: &[f64], v_fold: f64) -> Vec<Burst> {
    let mut out = Vec::new();
    let len = v.len();
    let mut i = 1;
    while i + 3 < len {
        if v[i - 1] <= v_fold && v[i] > v_fold {
            let s = i + 2;
            let mut j = s;
            let mut b = Burst {
                start: s,
                jumps: 0,
                max_ratio: 0.0,
                alternating: true,
            };
            while j + 2 < len && (v[j + 1] - v[j]).abs() > JUMP_MIN {
                let r = (v[j + 2] - v[j]).abs() / (v[j + 1] - v[j]).abs();
                b.max_ratio = b.max_ratio.max(r);
                b.jumps += 1;
                if j > s && (v[j + 1] - v[j]) * (v[j] - v[j - 1]) >= 0.0 {
                    b.alternating = false;
                }
                j += 1;
            }
            out.push(b);
            i = j;
        }
        i += 1;
    }
    out
}

pub fn classify_bursts(v: &[f64], v_fold: f64) -> BurstStats {
    let bursts = find_bursts(v, v_fold);
    let long: Vec<_> = bursts.iter().filter(|b| b.is_long()).collect();
    let banded = long.iter().filter(|b| b.is_banded()).count();
    BurstStats {
        bursts: bursts.len(),
        long: long.len(),
        banded,
        banded_share: (!long.is_empty()).then(|| banded as f64 / long.len() as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointInfo {
    pub v0: f64,
    pub branch: Branch,
    pub location: Vec<f64>,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeDiagnostics {
    pub fixed_points: Vec<FixedPointInfo>,
    pub unique_equilibrium: bool,
    pub w_range: (f64, f64),
    pub v_range: (f64, f64),
    pub w_folds: Vec<f64>,
    pub w_flip: f64,
    pub spans_folds: bool,
    pub converged: bool,
    pub tail_distance: Option<f64>,
    pub bursts: BurstStats,
    pub steps: usize,
    pub exit_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub schema: u32,
    pub case: Option<RegimeCase>,
    pub params: ChialvoParams,
    pub eps: f64,
    pub z0: (f64, f64),
    pub label: RegimeLabel,
    pub diagnostics: RegimeDiagnostics,
}

pub fn run_regimes(case: RegimeCase, eps: f64) -> Result<(RegimeReport, Trajectory)> {
    let (mut rep, traj) = run_regimes_with(ChialvoParams::regime(case), eps, DEFAULT_Z0, DEFAULT_STEPS)?;
    rep.case = Some(case);
    Ok((rep, traj))
}

pub fn run_regimes_with(
    p: ChialvoParams,
    eps: f64,
    z0: [f64; 2],
    steps: usize,
) -> Result<(RegimeReport, Trajectory)> {
    p.validate(false)?;
    if !(0.0..=1e-2).contains(&eps) {
        return Err(crate::Error::ParamOutOfRange(format!("eps = {eps} outside [0, 1e-2]")));
    }
    let map = chialvo::chialvo(p)?;
    let traj = map.iterate(&Vector::from_column_slice(&z0), eps, steps)?;
    let w: Vec<f64> = traj.component(0);
    let v: Vec<f64> = traj.component(1);

    let fixed_points: Vec<FixedPointInfo> = chialvo::chialvo_equilibria(&p, 200.0)
        .into_iter()
        .filter_map(|v0| {
            let guess = chialvo::critical_point(&p, v0);
            let fp = reduced::find_fixed_point(&map, &guess, eps).ok()?;
            Some(FixedPointInfo {
                v0,
                branch: chialvo::branch_of(p.k, v0),
                location: fp.location,
                stability: fp.stability,
            })
        })
        .collect();

    let tail_distance = fixed_points
        .iter()
        .filter(|f| f.stability == Stability::Stable)
        .map(|f| {
            let from = w.len().saturating_sub(TAIL);
            (from..w.len())
                .map(|i| (w[i] - f.location[0]).hypot(v[i] - f.location[1]))
                .fold(0.0, f64::max)
        })
        .reduce(f64::min);
    let converged = traj.exit_index.is_none() && tail_distance.is_some_and(|d| d <= CONVERGENCE_TOL);

    let range = |x: &[f64]| {
        x.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)))
    };
    let w_range = range(&w);
    let folds = chialvo::fold_points(p.k);
    let w_folds: Vec<f64> = folds.iter().map(|&vf| chialvo::phi0(&p, vf)).collect();
    let spans_folds = w_folds.iter().all(|&wf| w_range.0 <= wf && wf <= w_range.1);
    let v_upper = *folds.last().expect("at least one fold for admissible k");
    let bursts = classify_bursts(&v, v_upper);

    let label = if converged {
        RegimeLabel::Excitable
    } else if !spans_folds {
        RegimeLabel::Unclassified
    } else {
        match bursts.banded_share {
            None => RegimeLabel::Relaxation,
            Some(s) if s >= BANDED_SHARE => RegimeLabel::NonChaoticBursting,
            Some(_) => RegimeLabel::ChaoticBursting,
        }
    };

    let report = RegimeReport {
        schema: crate::io::SCHEMA_VERSION,
        case: None,
        params: p,
        eps,
        z0: (z0[0], z0[1]),
        label,
        diagnostics: RegimeDiagnostics {
            unique_equilibrium: chialvo::check_unique_equilibrium(&p).unique,
            fixed_points,
            w_range,
            v_range: range(&v),
            w_folds,
            w_flip: chialvo::phi0(&p, chialvo::flip_point(p.k)),
            spans_folds,
            converged,
            tail_distance,
            bursts,
            steps: traj.len() - 1,
            exit_index: traj.exit_index,
        },
    };
    Ok((report, traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_segment_is_banded() {
        // Cross the fold, then alternate about 2 with a decaying amplitude.
        let mut v = vec![0.5, 1.5, 2.2];
        for i in 0..30 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            v.push(2.0 + sign * 0.8f64.powi(i));
        }
        let b = find_bursts(&v, 1.0);
        assert_eq!(b.len(), 1);
        assert!(b[0].is_long() && b[0].is_banded(), "{:?}", b[0]);
    }

    #[test]
    fn monotone_segment_is_not_banded() {
        let mut v = vec![0.5, 1.2, 1.5];
        for i in 0..10 {
            v.push(2.0 + i as f64);
        }
        v.extend([0.2, 0.2, 0.2]);
        let b = find_bursts(&v, 1.0);
        assert!(!b[0].is_banded());
    }
}
