//! The fast-slow Chialvo neuron map and its closed forms.
//!
//! Coordinates are `z = (w, v)`: recovery `w` is slow, activation `v` is fast.
//! `w -> w + eps (c - b v - a w)`, `v -> v^2 exp(w - v) + k`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::map::{Chart, FastSlowMap};

/// Upper limit `3 - 2 sqrt(2)` on `k` for the S-shaped critical manifold.
pub fn k_max() -> f64 {
    3.0 - 2.0 * 2f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChialvoParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
}

impl ChialvoParams {
    /// Requires `a, b, c > 0` and `0 < k < 3 - 2 sqrt(2)`.
    pub fn new(a: f64, b: f64, c: f64, k: f64) -> Result<Self> {
        let p = ChialvoParams { a, b, c, k };
        p.validate(false)?;
        Ok(p)
    }

    /// As `new` but also admits `k = 0`, where only one fold remains.
    pub fn new_allow_zero_k(a: f64, b: f64, c: f64, k: f64) -> Result<Self> {
        let p = ChialvoParams { a, b, c, k };
        p.validate(true)?;
        Ok(p)
    }

    pub fn validate(&self, allow_zero_k: bool) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ParamOutOfRange(format!("{name} must be positive, got {v}")));
            }
        }
        let ok_k = (self.k > 0.0 && self.k < k_max()) || (allow_zero_k && self.k == 0.0);
        if !ok_k {
            return Err(Error::ParamOutOfRange(format!(
                "k must lie in (0, {:.6}), got {}",
                k_max(),
                self.k
            )));
        }
        Ok(())
    }

    /// Parameter sets of the four regimes: `a = 1`, `b = 5`.
    pub fn regime(case: RegimeCase) -> Self {
        let (c, k) = match case {
            RegimeCase::I => (7.0, 0.07),
            RegimeCase::II => (3.5, 0.07),
            RegimeCase::III => (3.5, 0.035),
            RegimeCase::IV => (3.5, 0.02),
        };
        ChialvoParams { a: 1.0, b: 5.0, c, k }
    }
}

impl Default for ChialvoParams {
    fn default() -> Self {
        ChialvoParams {
            a: 1.0,
            b: 5.0,
            c: 3.5,
            k: 0.035,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeCase {
    I,
    II,
    III,
    IV,
}

impl RegimeCase {
    pub const ALL: [RegimeCase; 4] = [RegimeCase::I, RegimeCase::II, RegimeCase::III, RegimeCase::IV];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Some(RegimeCase::I),
            "II" | "2" => Some(RegimeCase::II),
            "III" | "3" => Some(RegimeCase::III),
            "IV" | "4" => Some(RegimeCase::IV),
            _ => None,
        }
    }
}

/// The map with analytic `Df` and full Jacobian. The slow drift carries no O(eps) tail.
pub fn chialvo(p: ChialvoParams) -> Result<FastSlowMap> {
    chialvo_with_tail(p, None)
}

pub type Tail = Arc<dyn Fn(&Vector, f64) -> f64 + Send + Sync>;

/// As `chialvo`, with `g = c - b v - a w + tail(z, eps)`.
pub fn chialvo_with_tail(p: ChialvoParams, tail: Option<Tail>) -> Result<FastSlowMap> {
    p.validate(true)?;
    let ChialvoParams { a, b, c, k } = p;
    let n_fn = Arc::new(|_: &Vector| Ok(Matrix::from_column_slice(2, 1, &[0.0, 1.0])));
    let f_fn = Arc::new(move |z: &Vector| {
        let (w, v) = (z[0], z[1]);
        Ok(Vector::from_vec(vec![-v + v * v * (w - v).exp() + k]))
    });
    let tail_g = tail.clone();
    let g_fn = Arc::new(move |z: &Vector, eps: f64| {
        let mut g = c - b * z[1] - a * z[0];
        if let Some(t) = &tail_g {
            g += t(z, eps);
        }
        Ok(Vector::from_vec(vec![g, 0.0]))
    });
    let df = Arc::new(|z: &Vector| {
        let (w, v) = (z[0], z[1]);
        let e = (w - v).exp();
        Ok(Matrix::from_row_slice(1, 2, &[v * v * e, -1.0 + (2.0 * v - v * v) * e]))
    });
    let mut map = FastSlowMap::new("chialvo", 2, 1, n_fn, f_fn, g_fn)?
        .with_df(df)
        .with_chart(Chart::new(vec![1], vec![0]))?
        .with_domain(vec![-50.0, 0.0], vec![50.0, 200.0])?;
    if tail.is_none() {
        map = map.with_jacobian(Arc::new(move |z: &Vector, eps: f64| {
            let (w, v) = (z[0], z[1]);
            let e = (w - v).exp();
            Ok(Matrix::from_row_slice(
                2,
                2,
                &[1.0 - eps * a, -eps * b, v * v * e, (2.0 * v - v * v) * e],
            ))
        }));
    }
    Ok(map)
}

/// Critical manifold `w = v + ln((v - k) / v^2)`, `v > k`.
pub fn phi0(p: &ChialvoParams, v: f64) -> f64 {
    v + ((v - p.k) / (v * v)).ln()
}

/// Point `(phi0(v), v)` of `S`.
pub fn critical_point(p: &ChialvoParams, v: f64) -> Vector {
    Vector::from_vec(vec![phi0(p, v), v])
}

/// Fast multiplier along `S`: `(v - k)(2 - v) / v`.
pub fn mu(p: &ChialvoParams, v: f64) -> f64 {
    (v - p.k) * (2.0 - v) / v
}

/// Fold points `v_-`, `v_+` inside `(k, inf)`; only `v = 1` when `k = 0`.
pub fn fold_points(k: f64) -> Vec<f64> {
    let s = (k * k - 6.0 * k + 1.0).sqrt();
    [(1.0 + k - s) / 2.0, (1.0 + k + s) / 2.0]
        .into_iter()
        .filter(|&v| v > k)
        .collect()
}

/// Flip point where the multiplier passes through -1.
pub fn flip_point(k: f64) -> f64 {
    (3.0 + k + (k * k - 2.0 * k + 9.0).sqrt()) / 2.0
}

/// Slow drift on `S`: `c - (b + a) v - a ln((v - k) / v^2)`.
pub fn slow_g(p: &ChialvoParams, v: f64) -> f64 {
    p.c - (p.b + p.a) * v - p.a * ((v - p.k) / (v * v)).ln()
}

/// First-order slow manifold `phi0(v) - eps g / (mu - 1)`.
pub fn slow_manifold_first_order(p: &ChialvoParams, v: f64, eps: f64) -> f64 {
    phi0(p, v) - eps * slow_g(p, v) / (mu(p, v) - 1.0)
}

/// Reduced one-dimensional map on `S`.
pub fn reduced_v_step(p: &ChialvoParams, v: f64, eps: f64) -> f64 {
    v - eps * ((v - p.k) / (mu(p, v) - 1.0)) * slow_g(p, v)
}

/// Branches of the critical manifold, ordered by increasing `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `S_-^a`, `k < v < v_-`.
    LowerAttracting,
    /// `S_-^r`, `v_- < v < v_+`.
    MiddleRepelling,
    /// `S_+^a`, `v_+ < v < v_flip`.
    UpperAttracting,
    /// `S_+^r`, `v > v_flip`.
    UpperRepelling,
    Fold,
    Flip,
}

pub fn branch_of(k: f64, v: f64) -> Branch {
    let folds = fold_points(k);
    let vf = flip_point(k);
    let tol = 1e-12;
    if folds.iter().any(|f| (v - f).abs() <= tol) {
        return Branch::Fold;
    }
    if (v - vf).abs() <= tol {
        return Branch::Flip;
    }
    let (vm, vp) = if folds.len() == 2 { (folds[0], folds[1]) } else { (k, folds[0]) };
    if v < vm {
        Branch::LowerAttracting
    } else if v < vp {
        Branch::MiddleRepelling
    } else if v < vf {
        Branch::UpperAttracting
    } else {
        Branch::UpperRepelling
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    pub unique: bool,
    pub discriminant: f64,
    /// Real roots of the quadratic, ascending.
    pub roots: Option<(f64, f64)>,
}

/// Sufficient condition for a unique equilibrium: the quadratic
/// `-2ka + (a + ak + bk) v - (a + b) v^2` is negative for every `v > k`.
pub fn check_unique_equilibrium(p: &ChialvoParams) -> EquilibriumCheck {
    let q2 = -(p.a + p.b);
    let q1 = p.a + p.a * p.k + p.b * p.k;
    let q0 = -2.0 * p.k * p.a;
    let disc = q1 * q1 - 4.0 * q2 * q0;
    if q2 >= 0.0 {
        return EquilibriumCheck {
            unique: false,
            discriminant: disc,
            roots: None,
        };
    }
    if disc < 0.0 {
        return EquilibriumCheck {
            unique: true,
            discriminant: disc,
            roots: None,
        };
    }
    let s = disc.sqrt();
    let r1 = (-q1 + s) / (2.0 * q2);
    let r2 = (-q1 - s) / (2.0 * q2);
    let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    EquilibriumCheck {
        unique: hi <= p.k,
        discriminant: disc,
        roots: Some((lo, hi)),
    }
}

/// The unique root `v*` of `slow_g` on `(k, inf)`, when the uniqueness check passes.
pub fn chialvo_equilibrium_v(p: &ChialvoParams) -> Result<f64> {
    let check = check_unique_equilibrium(p);
    if !check.unique {
        return Err(Error::AssumptionViolated {
            discriminant: check.discriminant,
        });
    }
    // slow_g -> +inf as v -> k+ and -> -inf as v -> inf.
    let mut lo = p.k + 1e-3 * p.k.max(1e-3);
    while slow_g(p, lo) <= 0.0 {
        lo = p.k + 0.5 * (lo - p.k);
    }
    let mut hi = 1.0;
    while slow_g(p, hi) >= 0.0 {
        hi *= 2.0;
    }
    Ok(bisect(|v| slow_g(p, v), lo, hi))
}

/// All roots of `slow_g` on `(k, v_max]` found by a dense scan, no uniqueness assumed.
pub fn chialvo_equilibria(p: &ChialvoParams, v_max: f64) -> Vec<f64> {
    let n = 20_000;
    let lo = p.k + 1e-9 * p.k.max(1e-3);
    let grid: Vec<f64> = (0..=n)
        .map(|i| lo * (v_max / lo).powf(i as f64 / n as f64))
        .collect();
    grid.windows(2)
        .filter(|w| slow_g(p, w[0]).signum() != slow_g(p, w[1]).signum())
        .map(|w| bisect(|v| slow_g(p, v), w[0], w[1]))
        .collect()
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_evaluation_of_the_layer_map() {
        let p = ChialvoParams::new(1.0, 5.0, 3.5, 0.035).unwrap();
        let m = chialvo(p).unwrap();
        let out = m.evaluate(&Vector::from_vec(vec![0.25, 2.0]), 0.0).unwrap();
        assert_eq!(out[0], 0.25);
        assert_abs_diff_eq!(out[1], 4.0 * (-1.75f64).exp() + 0.035, epsilon = 1e-15);
    }

    #[test]
    fn regime_parameters() {
        let p = ChialvoParams::regime(RegimeCase::IV);
        assert_eq!((p.a, p.b, p.c, p.k), (1.0, 5.0, 3.5, 0.02));
        assert!(ChialvoParams::new(1.0, 5.0, 3.5, 0.2).is_err());
        assert!(ChialvoParams::new(1.0, 5.0, 3.5, 0.0).is_err());
        assert!(ChialvoParams::new_allow_zero_k(1.0, 5.0, 3.5, 0.0).is_ok());
        assert!(k_max() > 0.035);
    }

    #[test]
    fn closed_form_singular_points() {
        let f = fold_points(0.035);
        assert_abs_diff_eq!(f[0], 0.072746, epsilon = 1e-6);
        assert_abs_diff_eq!(f[1], 0.962254, epsilon = 1e-6);
        assert_abs_diff_eq!(flip_point(0.035), 3.011758, epsilon = 1e-6);
        assert_eq!(fold_points(0.0), vec![1.0]);
        assert_abs_diff_eq!(flip_point(0.0), 3.0, epsilon = 1e-15);
        let p = ChialvoParams::default();
        for v in f {
            assert_abs_diff_eq!(mu(&p, v), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(mu(&p, flip_point(0.035)), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn uniqueness_check_witness() {
        let c = check_unique_equilibrium(&ChialvoParams::default());
        assert!(c.unique);
        assert_abs_diff_eq!(c.discriminant, 1.21 * 1.21 - 4.0 * 6.0 * 0.07, epsilon = 1e-12);
        assert_abs_diff_eq!(c.discriminant, -0.2159, epsilon = 1e-4);
    }
}
