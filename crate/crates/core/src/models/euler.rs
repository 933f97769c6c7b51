//! Fast-slow ODEs `z' = N f + eps G` and their explicit Euler discretizations.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::manifold;
use crate::map::{Chart, EpsMatFn, EpsVecFn, FastSlowMap, MatFn, VecFn};

/// Continuous-time fast-slow system `z' = N(z) f(z) + eps G(z, eps)`.
#[derive(Clone)]
pub struct SlowOde {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub n_fn: MatFn,
    pub f_fn: VecFn,
    pub g_fn: EpsVecFn,
    pub df_fn: Option<MatFn>,
    /// Jacobian of the vector field in `z`.
    pub jac_fn: Option<EpsMatFn>,
    pub chart: Chart,
}

impl std::fmt::Debug for SlowOde {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SlowOde")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("k", &self.k)
            .finish()
    }
}

impl SlowOde {
    pub fn vector_field(&self, z: &Vector, eps: f64) -> Result<Vector> {
        let mut v = (self.n_fn)(z)? * (self.f_fn)(z)?;
        if eps != 0.0 {
            v += (self.g_fn)(z, eps)? * eps;
        }
        Ok(v)
    }

    /// Projection built from the ODE's own `N` and `Df`.
    pub fn projection(&self, z: &Vector) -> Result<Matrix> {
        let df = match &self.df_fn {
            Some(d) => d(z)?,
            None => crate::linalg::fd_jacobian(|p| (self.f_fn)(p), z, self.n - self.k)?,
        };
        manifold::projection_from(&(self.n_fn)(z)?, &df, manifold::FOLD_TOL)
    }
}

/// `z -> z + h N f + eps h G`, with `N_map = h N` and `G_map = h G`; `f` is shared.
pub fn euler_discretize(ode: &SlowOde, h: f64) -> Result<FastSlowMap> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::ParamOutOfRange(format!("step size must be positive, got {h}")));
    }
    let n_ode = ode.n_fn.clone();
    let g_ode = ode.g_fn.clone();
    let n_fn: MatFn = Arc::new(move |z: &Vector| Ok(n_ode(z)? * h));
    let g_fn: EpsVecFn = Arc::new(move |z: &Vector, eps: f64| Ok(g_ode(z, eps)? * h));
    let mut map = FastSlowMap::new(
        format!("euler:{}", ode.name),
        ode.n,
        ode.k,
        n_fn,
        ode.f_fn.clone(),
        g_fn,
    )?
    .with_chart(ode.chart.clone())?;
    if let Some(df) = &ode.df_fn {
        map = map.with_df(df.clone());
    }
    if let Some(jac) = &ode.jac_fn {
        let jac = jac.clone();
        let n = ode.n;
        map = map.with_jacobian(Arc::new(move |z: &Vector, eps: f64| {
            Ok(Matrix::identity(n, n) + jac(z, eps)? * h)
        }));
    }
    Ok(map)
}

/// Step size at which an ODE eigenvalue's Euler multiplier `1 + h lambda` meets the unit circle.
///
/// `None` when `Re lambda >= 0`: no positive step restores or destroys attraction.
pub fn euler_hyperbolicity_boundary(lambda: Complex64) -> Result<Option<f64>> {
    if lambda.norm() == 0.0 {
        return Err(Error::ZeroEigenvalue);
    }
    if lambda.re < 0.0 {
        Ok(Some(-2.0 * lambda.re / lambda.norm_sqr()))
    } else {
        Ok(None)
    }
}

/// `x' = eps`, `y' = lambda (y - x)`: one slow and one fast variable.
pub fn linear_ode(lambda: f64) -> SlowOde {
    SlowOde {
        name: "linear".into(),
        n: 2,
        k: 1,
        n_fn: Arc::new(|_| Ok(Matrix::from_column_slice(2, 1, &[0.0, 1.0]))),
        f_fn: Arc::new(move |z: &Vector| Ok(Vector::from_vec(vec![lambda * (z[1] - z[0])]))),
        g_fn: Arc::new(|_, _| Ok(Vector::from_vec(vec![1.0, 0.0]))),
        df_fn: Some(Arc::new(move |_| Ok(Matrix::from_row_slice(1, 2, &[-lambda, lambda])))),
        jac_fn: Some(Arc::new(move |_, _| {
            Ok(Matrix::from_row_slice(2, 2, &[0.0, 0.0, -lambda, lambda]))
        })),
        chart: Chart::standard(2, 1),
    }
}

/// Parameters of the two-fast, one-slow test system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalOdeParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for DiagonalOdeParams {
    fn default() -> Self {
        DiagonalOdeParams {
            lambda1: -1.0,
            lambda2: -2.0,
            eta1: 0.5,
            eta2: -0.25,
        }
    }
}

/// `x' = eps`,
/// `y1' = l1 (y1 - x^2) + eps (2x - l1 e1)`,
/// `y2' = l2 (y2 - x^3/3) + eps (x^2 - l2 e2)`.
///
/// `DfN = diag(l1, l2)` is constant and the ODE slow manifold is exactly
/// `y = (x^2 + eps e1, x^3/3 + eps e2)`, which is also its first-order expansion.
pub fn diagonal_ode(p: DiagonalOdeParams) -> SlowOde {
    let DiagonalOdeParams {
        lambda1: l1,
        lambda2: l2,
        eta1: e1,
        eta2: e2,
    } = p;
    SlowOde {
        name: "diagonal".into(),
        n: 3,
        k: 1,
        n_fn: Arc::new(|_| {
            Ok(Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]))
        }),
        f_fn: Arc::new(move |z: &Vector| {
            let x = z[0];
            Ok(Vector::from_vec(vec![
                l1 * (z[1] - x * x),
                l2 * (z[2] - x * x * x / 3.0),
            ]))
        }),
        g_fn: Arc::new(move |z: &Vector, _| {
            let x = z[0];
            Ok(Vector::from_vec(vec![1.0, 2.0 * x - l1 * e1, x * x - l2 * e2]))
        }),
        df_fn: Some(Arc::new(move |z: &Vector| {
            let x = z[0];
            Ok(Matrix::from_row_slice(
                2,
                3,
                &[-2.0 * x * l1, l1, 0.0, -x * x * l2, 0.0, l2],
            ))
        })),
        jac_fn: Some(Arc::new(move |z: &Vector, eps: f64| {
            let x = z[0];
            Ok(Matrix::from_row_slice(
                3,
                3,
                &[
                    0.0,
                    0.0,
                    0.0,
                    -2.0 * x * l1 + 2.0 * eps,
                    l1,
                    0.0,
                    -x * x * l2 + 2.0 * eps * x,
                    0.0,
                    l2,
                ],
            ))
        })),
        chart: Chart::standard(3, 1),
    }
}

/// ODE slow manifold of `diagonal_ode` (exact, equal to first order).
pub fn diagonal_ode_slow_manifold(p: &DiagonalOdeParams, x: f64, eps: f64) -> [f64; 2] {
    [x * x + eps * p.eta1, x * x * x / 3.0 + eps * p.eta2]
}

/// Invariant graph of the Euler map of `diagonal_ode` with step `h`, in closed form.
pub fn diagonal_map_slow_manifold(p: &DiagonalOdeParams, x: f64, eps: f64, h: f64) -> [f64; 2] {
    let (l1, l2) = (p.lambda1, p.lambda2);
    let e2 = eps * eps;
    [
        x * x + eps * p.eta1 + e2 * h / l1,
        x * x * x / 3.0
            + eps * p.eta2
            + e2 * (h * x / l2 + eps * (h / (l2 * l2) + h * h / (3.0 * l2))),
    ]
}
