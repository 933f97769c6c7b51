//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn check_finite(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Central-difference step for coordinate `x`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.sqrt() * x.abs().max(1.0)
}

/// Central-difference Jacobian of `f` at `z`, with `m` output rows.
pub fn fd_jacobian<F>(f: F, z: &Vector, m: usize) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    fd_jacobian_with(f, z, m, fd_step)
}

pub fn fd_jacobian_with<F, S>(f: F, z: &Vector, m: usize, step: S) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
    S: Fn(f64) -> f64,
{
    let n = z.len();
    let mut jac = Matrix::zeros(m, n);
    let mut zp = z.clone();
    for j in 0..n {
        let h = step(z[j]);
        let up = z[j] + h;
        let dn = z[j] - h;
        let span = up - dn;
        if span <= 32.0 * f64::EPSILON * z[j].abs() || span == 0.0 {
            return Err(Error::StepUnderflow { coord: j });
        }
        zp[j] = up;
        let fp = f(&zp)?;
        zp[j] = dn;
        let fm = f(&zp)?;
        zp[j] = z[j];
        if fp.len() != m || fm.len() != m {
            return Err(Error::Dimension(format!(
                "expected {m} outputs, got {}",
                fp.len()
            )));
        }
        jac.set_column(j, &((fp - fm) / span));
    }
    Ok(jac)
}

/// Eigenvalues sorted by modulus descending, ties broken by argument.
pub fn sorted_eigenvalues(m: &Matrix) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = match m.nrows() {
        0 => Vec::new(),
        1 => vec![Complex64::new(m[(0, 0)], 0.0)],
        2 => eig2(m),
        _ => m.complex_eigenvalues().iter().copied().collect(),
    };
    sort_spectrum(&mut ev);
    ev
}

pub fn sort_spectrum(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then_with(|| a.arg().total_cmp(&b.arg()))
    });
}

// Closed form for 2x2 keeps exact zeros and ones where the Schur route can drift.
fn eig2(m: &Matrix) -> Vec<Complex64> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let l1 = half_tr + s.copysign(half_tr);
        let det = a * d - b * c;
        let l2 = if l1 != 0.0 { det / l1 } else { half_tr - s };
        vec![Complex64::new(l1, 0.0), Complex64::new(l2, 0.0)]
    } else {
        let s = (-disc).sqrt();
        vec![Complex64::new(half_tr, s), Complex64::new(half_tr, -s)]
    }
}

pub fn solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    a.clone().lu().solve(b)
}

pub fn sup_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Smallest singular value.
pub fn min_singular_value(m: &Matrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &s| a.min(s))
}
