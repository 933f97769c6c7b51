//! Adapter from the standard form `x -> x + eps g~(x, y, eps)`, `y -> y + f~(x, y, eps)`.

use std::sync::Arc;

use crate::error::Result;
use crate::linalg::{Matrix, Vector};
use crate::map::{EpsVecFn, FastSlowMap};

/// Builds `N = (0; I)`, `f = f~(., 0)` and `G = (g~; f~_rem)` with
/// `f~_rem = (f~(., eps) - f~(., 0)) / eps`.
///
/// At `eps = 0` the remainder is a forward difference with step `1e-6 max(1, eps_max)`.
/// `z` is ordered `(x, y)` with the `k` slow coordinates first.
pub fn from_standard_form(
    name: impl Into<String>,
    n: usize,
    k: usize,
    g_tilde: EpsVecFn,
    f_tilde: EpsVecFn,
    eps_max: f64,
) -> Result<FastSlowMap> {
    let m = n - k;
    let n_fn = Arc::new(move |_: &Vector| {
        let mut nm = Matrix::zeros(n, m);
        for j in 0..m {
            nm[(k + j, j)] = 1.0;
        }
        Ok(nm)
    });
    let f0 = f_tilde.clone();
    let f_fn = Arc::new(move |z: &Vector| f0(z, 0.0));
    let delta = 1e-6 * eps_max.max(1.0);
    let g_fn = Arc::new(move |z: &Vector, eps: f64| {
        let base = f_tilde(z, 0.0)?;
        let rem = if eps == 0.0 {
            (f_tilde(z, delta)? - &base) / delta
        } else {
            (f_tilde(z, eps)? - &base) / eps
        };
        let slow = g_tilde(z, eps)?;
        Ok(Vector::from_iterator(n, slow.iter().chain(rem.iter()).copied()))
    });
    FastSlowMap::new(name, n, k, n_fn, f_fn, g_fn)
}

/// The Chialvo map routed through the adapter, for cross-checks.
pub fn chialvo_standard(p: super::chialvo::ChialvoParams) -> Result<FastSlowMap> {
    let super::chialvo::ChialvoParams { a, b, c, k } = p;
    let g = Arc::new(move |z: &Vector, _eps: f64| Ok(Vector::from_vec(vec![c - b * z[1] - a * z[0]])));
    let f = Arc::new(move |z: &Vector, _eps: f64| {
        let (w, v) = (z[0], z[1]);
        Ok(Vector::from_vec(vec![v * v * (w - v).exp() + k - v]))
    });
    Ok(from_standard_form("standard:chialvo", 2, 1, g, f, 1e-2)?
        .with_chart(crate::map::Chart::new(vec![1], vec![0]))?
        .with_domain(vec![-50.0, 0.0], vec![50.0, 200.0])?)
}

/// A standard-form map whose fast update depends on `eps`:
/// `x -> x + eps (1 - x y)`, `y -> y + r (x - y) + eps x^2`.
pub fn relaxed_logistic(r: f64) -> Result<FastSlowMap> {
    let g = Arc::new(|z: &Vector, _eps: f64| Ok(Vector::from_vec(vec![1.0 - z[0] * z[1]])));
    let f = Arc::new(move |z: &Vector, eps: f64| {
        Ok(Vector::from_vec(vec![r * (z[0] - z[1]) + eps * z[0] * z[0]]))
    });
    from_standard_form("standard:relaxed", 2, 1, g, f, 1e-2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::chialvo::{chialvo, ChialvoParams};

    #[test]
    fn adapter_matches_direct_chialvo() {
        let p = ChialvoParams::default();
        let direct = chialvo(p).unwrap();
        let adapted = chialvo_standard(p).unwrap();
        for (w, v, eps) in [(0.25, 2.0, 1e-3), (1.3, 0.4, 0.0), (-0.2, 3.7, 1e-2)] {
            let z = Vector::from_vec(vec![w, v]);
            let d = direct.evaluate(&z, eps).unwrap() - adapted.evaluate(&z, eps).unwrap();
            assert!(d.amax() <= 1e-14, "{d}");
        }
    }

    #[test]
    fn remainder_recovers_eps_dependence() {
        let m = relaxed_logistic(-0.5).unwrap();
        let z = Vector::from_vec(vec![0.7, 0.2]);
        let g = m.g(&z, 0.0).unwrap();
        assert!((g[1] - 0.49).abs() < 1e-8);
        let step = m.evaluate(&z, 0.01).unwrap();
        assert!((step[1] - (0.2 - 0.5 * 0.5 + 0.01 * 0.49)).abs() < 1e-15);
        let layer = m.evaluate(&z, 0.0).unwrap();
        assert_eq!(layer[0], 0.7);
    }
}
