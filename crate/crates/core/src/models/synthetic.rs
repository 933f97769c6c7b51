//! Small maps with constant or linear structure.

use std::sync::Arc;

use crate::error::Result;
use crate::linalg::{Matrix, Vector};
use crate::map::FastSlowMap;

/// One slow and two fast variables with constant `DfN = diag(-0.5, 0.5)`.
///
/// `x -> x + eps`, `y1 -> y1 - 0.5 (y1 - x)`, `y2 -> y2 + 0.5 (y2 + x)`: multipliers 0.5 and 1.5.
pub fn saddle() -> Result<FastSlowMap> {
    let n_fn = Arc::new(|_: &Vector| {
        Ok(Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]))
    });
    let f_fn = Arc::new(|z: &Vector| {
        Ok(Vector::from_vec(vec![-0.5 * (z[1] - z[0]), 0.5 * (z[2] + z[0])]))
    });
    let g_fn = Arc::new(|_: &Vector, _| Ok(Vector::from_vec(vec![1.0, 0.0, 0.0])));
    let df = Arc::new(|_: &Vector| {
        Ok(Matrix::from_row_slice(2, 3, &[0.5, -0.5, 0.0, 0.5, 0.0, 0.5]))
    });
    Ok(FastSlowMap::new("synthetic:saddle", 3, 1, n_fn, f_fn, g_fn)?.with_df(df))
}

/// `f(z) = y - A x` with constant `N = (0; I)` and `G = (1, .., 1; 0)`.
///
/// `a` is the (n-k) x k matrix `A`; the layer-map multipliers are all zero.
pub fn linear(a: Matrix) -> Result<FastSlowMap> {
    let (m, k) = a.shape();
    let n = m + k;
    let a2 = a.clone();
    let n_fn = Arc::new(move |_: &Vector| {
        let mut nm = Matrix::zeros(n, m);
        for j in 0..m {
            nm[(k + j, j)] = 1.0;
        }
        Ok(nm)
    });
    let f_fn = Arc::new(move |z: &Vector| Ok(z.rows(k, m) - &a2 * z.rows(0, k)));
    let g_fn = Arc::new(move |_: &Vector, _| {
        Ok(Vector::from_iterator(n, (0..n).map(|i| if i < k { 1.0 } else { 0.0 })))
    });
    let df_a = a.clone();
    let df = Arc::new(move |_: &Vector| {
        let mut d = Matrix::zeros(m, n);
        d.view_mut((0, 0), (m, k)).copy_from(&(-&df_a));
        d.view_mut((0, k), (m, m)).fill_with_identity();
        Ok(d)
    });
    Ok(FastSlowMap::new("synthetic:linear", n, k, n_fn, f_fn, g_fn)?.with_df(df))
}
