//! Return maps of ODEs with a slowly drifting parameter, as fast-slow maps.
//!
//! State `u = (fast..., alpha)` with `alpha' = eps g~(u, eps)`. The section is a graph
//! `u[y_index] = Y(x, alpha)` over the remaining fast coordinates `x`; section points are
//! `p = (x, alpha)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::manifold;
use crate::map::{Chart, FastSlowMap};
use crate::ode::{self, OdeOptions};

pub type FastField = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;
pub type SlowField = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type StateJacobian = Arc<dyn Fn(&[f64], f64) -> Matrix + Send + Sync>;

/// ODE `fast' = F(u, eps)`, `alpha' = eps g~(u, eps)` on `u = (fast, alpha)`.
#[derive(Clone)]
pub struct SlowParamOde {
    pub name: String,
    /// Length of `u`, including `alpha` as the last entry.
    pub dim: usize,
    pub fast: FastField,
    pub slow: SlowField,
    /// Jacobian of the full right-hand side in `u`.
    pub jacobian: Option<StateJacobian>,
}

impl std::fmt::Debug for SlowParamOde {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SlowParamOde")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl SlowParamOde {
    pub fn rhs(&self, u: &[f64], eps: f64, out: &mut [f64]) {
        let m = self.dim;
        (self.fast)(u, eps, &mut out[..m - 1]);
        out[m - 1] = eps * (self.slow)(u, eps);
    }

    pub fn rhs_vec(&self, u: &[f64], eps: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.rhs(u, eps, &mut out);
        out
    }

    pub fn state_jacobian(&self, u: &[f64], eps: f64) -> Matrix {
        if let Some(j) = &self.jacobian {
            return j(u, eps);
        }
        let m = self.dim;
        let mut jac = Matrix::zeros(m, m);
        let mut up = u.to_vec();
        for c in 0..m {
            let h = f64::EPSILON.cbrt() * u[c].abs().max(1.0);
            up[c] = u[c] + h;
            let fp = self.rhs_vec(&up, eps);
            up[c] = u[c] - h;
            let fm = self.rhs_vec(&up, eps);
            up[c] = u[c];
            for r in 0..m {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        jac
    }

    /// `dF/d eps`; exact for right-hand sides affine in `eps`.
    fn rhs_eps_derivative(&self, u: &[f64], eps: f64) -> Vec<f64> {
        let d = 1e-5;
        let fp = self.rhs_vec(u, eps + d);
        let fm = self.rhs_vec(u, eps - d);
        fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * d)).collect()
    }
}

/// Hopf normal form with drifting `alpha`:
/// `x' = alpha x - y - x r^2`, `y' = x + alpha y - y r^2`, `alpha' = eps (a_g - r^2)`.
pub fn hopf(a_g: f64) -> SlowParamOde {
    let mut ode = hopf_with_slow(Arc::new(move |u: &[f64], _| a_g - (u[0] * u[0] + u[1] * u[1])));
    ode.jacobian = Some(Arc::new(move |u: &[f64], eps: f64| {
        let (x, y, al) = (u[0], u[1], u[2]);
        let r2 = x * x + y * y;
        Matrix::from_row_slice(
            3,
            3,
            &[
                al - r2 - 2.0 * x * x,
                -1.0 - 2.0 * x * y,
                x,
                1.0 - 2.0 * x * y,
                al - r2 - 2.0 * y * y,
                y,
                -2.0 * eps * x,
                -2.0 * eps * y,
                0.0,
            ],
        )
    }));
    ode.name = format!("hopf(a_g={a_g})");
    ode
}

/// Hopf normal form with an arbitrary slow drift `g~`.
pub fn hopf_with_slow(slow: SlowField) -> SlowParamOde {
    SlowParamOde {
        name: "hopf".into(),
        dim: 3,
        fast: Arc::new(|u: &[f64], _eps: f64, out: &mut [f64]| {
            let (x, y, al) = (u[0], u[1], u[2]);
            let r2 = x * x + y * y;
            out[0] = al * x - y - x * r2;
            out[1] = x + al * y - y * r2;
        }),
        slow,
        jacobian: None,
    }
}

pub type SectionGraph = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Section `u[y_index] = Y(x, alpha)`, crossed in `direction`.
#[derive(Clone)]
pub struct SectionSpec {
    pub y_index: usize,
    pub y_of: SectionGraph,
    /// +1: `u[y_index] - Y` increases through zero; -1: decreases.
    pub direction: f64,
    pub x_box: Vec<(f64, f64)>,
    pub alpha_box: (f64, f64),
    /// Starting guess for the fixed point of the layer return map.
    pub x_guess: Vec<f64>,
    pub period_estimate: f64,
    pub transversality_tol: f64,
}

impl std::fmt::Debug for SectionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SectionSpec")
            .field("y_index", &self.y_index)
            .field("direction", &self.direction)
            .field("alpha_box", &self.alpha_box)
            .finish()
    }
}

impl SectionSpec {
    /// `{y = 0, x > 0}` for the planar Hopf system, crossed upward.
    pub fn hopf_default() -> Self {
        SectionSpec {
            y_index: 1,
            y_of: Arc::new(|_, _| 0.0),
            direction: 1.0,
            x_box: vec![(0.05, 2.0)],
            alpha_box: (0.3, 0.7),
            x_guess: vec![0.7],
            period_estimate: 2.0 * std::f64::consts::PI,
            transversality_tol: 1e-6,
        }
    }

    /// Embeds a section point `(x, alpha)` into state space.
    pub fn lift(&self, p: &[f64]) -> Vec<f64> {
        let nx = p.len() - 1;
        let alpha = p[nx];
        let y = (self.y_of)(&p[..nx], alpha);
        let mut u = Vec::with_capacity(p.len() + 1);
        u.extend_from_slice(&p[..self.y_index]);
        u.push(y);
        u.extend_from_slice(&p[self.y_index..nx]);
        u.push(alpha);
        u
    }

    /// Drops the graph coordinate.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .filter(|(i, _)| *i != self.y_index)
            .map(|(_, v)| *v)
            .collect()
    }

    pub fn residual(&self, u: &[f64]) -> f64 {
        let p = self.project(u);
        let nx = p.len() - 1;
        u[self.y_index] - (self.y_of)(&p[..nx], p[nx])
    }

    /// Gradient of `Y` in `(x, alpha)` by central differences.
    fn y_gradient(&self, p: &[f64]) -> Vec<f64> {
        let nx = p.len() - 1;
        let mut q = p.to_vec();
        (0..p.len())
            .map(|i| {
                let h = f64::EPSILON.cbrt() * p[i].abs().max(1.0);
                q[i] = p[i] + h;
                let a = (self.y_of)(&q[..nx], q[nx]);
                q[i] = p[i] - h;
                let b = (self.y_of)(&q[..nx], q[nx]);
                q[i] = p[i];
                (a - b) / (2.0 * h)
            })
            .collect()
    }

    /// Gradient of the section residual in `u`.
    fn residual_gradient(&self, u: &[f64]) -> Vec<f64> {
        let gy = self.y_gradient(&self.project(u));
        let mut g = Vec::with_capacity(u.len());
        let mut j = 0;
        for i in 0..u.len() {
            if i == self.y_index {
                g.push(1.0);
            } else {
                g.push(-gy[j]);
                j += 1;
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareOptions {
    pub ode: OdeOptions,
}

impl Default for PoincareOptions {
    fn default() -> Self {
        PoincareOptions {
            ode: OdeOptions::with_tol(1e-10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub start: Vec<f64>,
    pub landing: Vec<f64>,
    pub time: f64,
    pub eps: f64,
    pub tol: f64,
    pub section_residual: f64,
}

fn transversality(ode: &SlowParamOde, section: &SectionSpec, u: &[f64], eps: f64) -> Result<f64> {
    let f = ode.rhs_vec(u, eps);
    let g = section.residual_gradient(u);
    let margin: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
    if margin.abs() < section.transversality_tol || margin * section.direction < 0.0 {
        return Err(Error::TangentialCrossing { margin });
    }
    Ok(margin)
}

fn check_point(ode: &SlowParamOde, p: &[f64]) -> Result<()> {
    if p.len() + 1 != ode.dim {
        return Err(Error::Dimension(format!(
            "section point has {} entries, expected {}",
            p.len(),
            ode.dim - 1
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("section point"));
    }
    Ok(())
}

/// First return of the flow from `p` to the section in its crossing direction.
pub fn return_map(
    ode: &SlowParamOde,
    section: &SectionSpec,
    p: &[f64],
    eps: f64,
    opts: &PoincareOptions,
) -> Result<ReturnRecord> {
    check_point(ode, p)?;
    let u0 = section.lift(p);
    transversality(ode, section, &u0, eps)?;
    let rhs = |_t: f64, u: &[f64], du: &mut [f64]| -> Result<()> {
        ode.rhs(u, eps, du);
        Ok(())
    };
    let t_cap = 10.0 * section.period_estimate;
    let hit = ode::integrate_to_event(
        &rhs,
        0.0,
        &u0,
        t_cap,
        &|u| section.residual(u),
        section.direction,
        0.1 * section.period_estimate,
        &opts.ode,
    )?;
    transversality(ode, section, &hit.y, eps)?;
    Ok(ReturnRecord {
        start: p.to_vec(),
        landing: section.project(&hit.y),
        time: hit.t,
        eps,
        tol: opts.ode.rtol,
        section_residual: hit.residual,
    })
}

/// Return map with its Jacobian in `p` and derivative in `eps`, from variational equations.
pub fn return_map_variational(
    ode: &SlowParamOde,
    section: &SectionSpec,
    p: &[f64],
    eps: f64,
    opts: &PoincareOptions,
) -> Result<(ReturnRecord, Matrix, Vector)> {
    check_point(ode, p)?;
    let m = ode.dim;
    let u0 = section.lift(p);
    transversality(ode, section, &u0, eps)?;
    // Augmented state: u, Phi (column-major), psi = du/d eps.
    let mut w0 = vec![0.0; m + m * m + m];
    w0[..m].copy_from_slice(&u0);
    for i in 0..m {
        w0[m + i * m + i] = 1.0;
    }
    let rhs = |_t: f64, w: &[f64], dw: &mut [f64]| -> Result<()> {
        let u = &w[..m];
        ode.rhs(u, eps, &mut dw[..m]);
        let j = ode.state_jacobian(u, eps);
        for c in 0..m {
            for r in 0..m {
                let mut acc = 0.0;
                for s in 0..m {
                    acc += j[(r, s)] * w[m + c * m + s];
                }
                dw[m + c * m + r] = acc;
            }
        }
        let fe = ode.rhs_eps_derivative(u, eps);
        let psi = &w[m + m * m..];
        for r in 0..m {
            let mut acc = fe[r];
            for s in 0..m {
                acc += j[(r, s)] * psi[s];
            }
            dw[m + m * m + r] = acc;
        }
        Ok(())
    };
    let t_cap = 10.0 * section.period_estimate;
    let hit = ode::integrate_to_event(
        &rhs,
        0.0,
        &w0,
        t_cap,
        &|w| section.residual(&w[..m]),
        section.direction,
        0.1 * section.period_estimate,
        &opts.ode,
    )?;
    let u1 = &hit.y[..m];
    transversality(ode, section, u1, eps)?;
    let phi = Matrix::from_column_slice(m, m, &hit.y[m..m + m * m]);
    let psi = Vector::from_column_slice(&hit.y[m + m * m..]);
    // Return-time correction: (I - F grad^T / (grad . F)).
    let f = Vector::from_vec(ode.rhs_vec(u1, eps));
    let grad = Vector::from_vec(section.residual_gradient(u1));
    let corr = Matrix::identity(m, m) - &f * grad.transpose() / grad.dot(&f);
    // Lift: du0/dp; select: drop the graph row.
    let gy = section.y_gradient(p);
    let mut lift = Matrix::zeros(m, m - 1);
    let mut sel = Matrix::zeros(m - 1, m);
    let mut j = 0;
    for i in 0..m {
        if i == section.y_index {
            for c in 0..m - 1 {
                lift[(i, c)] = gy[c];
            }
        } else {
            lift[(i, j)] = 1.0;
            sel[(j, i)] = 1.0;
            j += 1;
        }
    }
    let dp = &sel * &corr * &phi * &lift;
    let dpe = &sel * &corr * &psi;
    let rec = ReturnRecord {
        start: p.to_vec(),
        landing: section.project(u1),
        time: hit.t,
        eps,
        tol: opts.ode.rtol,
        section_residual: hit.residual,
    };
    Ok((rec, dp, dpe))
}

/// The return map on `(x, alpha)` as a fast-slow map with `k = 1`.
///
/// `N = (I; 0)`, `f(x, alpha) = P_x(x, alpha, 0) - x`, and `G` is the eps-derivative of
/// the return map at `eps = 0` (difference quotient for `eps > 0`). Evaluation, `Df`
/// and the full Jacobian come from the integrator and its variational equations.
pub fn build_poincare_map(
    ode: &SlowParamOde,
    section: &SectionSpec,
    opts: &PoincareOptions,
) -> Result<FastSlowMap> {
    let n = ode.dim - 1;
    if n < 2 {
        return Err(Error::Dimension("need at least one section coordinate besides alpha".into()));
    }
    let nx = n - 1;
    let o = *opts;
    let (o1, o2, o3, o4, o5) = (
        (ode.clone(), section.clone()),
        (ode.clone(), section.clone()),
        (ode.clone(), section.clone()),
        (ode.clone(), section.clone()),
        (ode.clone(), section.clone()),
    );
    let n_fn = Arc::new(move |_: &Vector| {
        let mut nm = Matrix::zeros(n, nx);
        for i in 0..nx {
            nm[(i, i)] = 1.0;
        }
        Ok(nm)
    });
    let f_fn = Arc::new(move |z: &Vector| {
        let p: Vec<f64> = z.iter().copied().collect();
        let r = return_map(&o1.0, &o1.1, &p, 0.0, &o)?;
        Ok(Vector::from_iterator(nx, (0..nx).map(|i| r.landing[i] - p[i])))
    });
    let g_fn = Arc::new(move |z: &Vector, eps: f64| {
        let p: Vec<f64> = z.iter().copied().collect();
        if eps == 0.0 {
            Ok(return_map_variational(&o2.0, &o2.1, &p, 0.0, &o)?.2)
        } else {
            let a = return_map(&o2.0, &o2.1, &p, eps, &o)?;
            let b = return_map(&o2.0, &o2.1, &p, 0.0, &o)?;
            Ok(Vector::from_iterator(n, (0..n).map(|i| (a.landing[i] - b.landing[i]) / eps)))
        }
    });
    let step = Arc::new(move |z: &Vector, eps: f64| {
        let p: Vec<f64> = z.iter().copied().collect();
        Ok(Vector::from_vec(return_map(&o3.0, &o3.1, &p, eps, &o)?.landing))
    });
    let jac = Arc::new(move |z: &Vector, eps: f64| {
        let p: Vec<f64> = z.iter().copied().collect();
        Ok(return_map_variational(&o4.0, &o4.1, &p, eps, &o)?.1)
    });
    let df = Arc::new(move |z: &Vector| {
        let p: Vec<f64> = z.iter().copied().collect();
        let dp = return_map_variational(&o5.0, &o5.1, &p, 0.0, &o)?.1;
        let mut d = dp.rows(0, nx).into_owned();
        for i in 0..nx {
            d[(i, i)] -= 1.0;
        }
        Ok(d)
    });
    let mut lo: Vec<f64> = section.x_box.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = section.x_box.iter().map(|b| b.1).collect();
    lo.push(section.alpha_box.0);
    hi.push(section.alpha_box.1);
    FastSlowMap::new(format!("poincare:{}", ode.name), n, 1, n_fn, f_fn, g_fn)?
        .with_step(step)
        .with_jacobian(jac)
        .with_df(df)
        .with_chart(Chart::new(vec![nx], (0..nx).collect()))?
        .with_domain(lo, hi)
        .map(|m| m.with_on_manifold_tol(1e-8))
}

/// Point `(x*(alpha), alpha)` of the critical curve: the layer cycle through the section.
pub fn cycle_point(map: &FastSlowMap, section: &SectionSpec, alpha: f64) -> Result<Vector> {
    manifold::critical_point(
        map,
        &Vector::from_vec(vec![alpha]),
        &Vector::from_vec(section.x_guess.clone()),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedSample {
    pub alpha: f64,
    pub cycle_point: Vec<f64>,
    pub period: f64,
    pub g: f64,
}

/// Integral of `g~` over one period of the `eps = 0` cycle at `alpha`.
pub fn averaged_g_sample(
    ode: &SlowParamOde,
    section: &SectionSpec,
    alpha: f64,
    opts: &PoincareOptions,
) -> Result<AveragedSample> {
    let map = build_poincare_map(ode, section, opts)?;
    let p = cycle_point(&map, section, alpha)?;
    let pv: Vec<f64> = p.iter().copied().collect();
    let m = ode.dim;
    let mut w0 = section.lift(&pv);
    w0.push(0.0);
    let rhs = |_t: f64, w: &[f64], dw: &mut [f64]| -> Result<()> {
        ode.rhs(&w[..m], 0.0, &mut dw[..m]);
        dw[m] = (ode.slow)(&w[..m], 0.0);
        Ok(())
    };
    let hit = ode::integrate_to_event(
        &rhs,
        0.0,
        &w0,
        10.0 * section.period_estimate,
        &|w| section.residual(&w[..m]),
        section.direction,
        0.1 * section.period_estimate,
        &opts.ode,
    )?;
    Ok(AveragedSample {
        alpha,
        cycle_point: pv,
        period: hit.t,
        g: hit.y[m],
    })
}

pub fn averaged_g(ode: &SlowParamOde, section: &SectionSpec, alpha: f64, opts: &PoincareOptions) -> Result<f64> {
    Ok(averaged_g_sample(ode, section, alpha, opts)?.g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRoot {
    pub alpha: f64,
    pub hyperbolic: bool,
    pub d_alpha_g: f64,
}

/// Roots of the averaged equation over `alpha_range` with their slopes.
pub fn limit_cycle_condition(
    ode: &SlowParamOde,
    section: &SectionSpec,
    alpha_range: (f64, f64),
    grid: usize,
    opts: &PoincareOptions,
) -> Result<Vec<CycleRoot>> {
    let (a0, a1) = alpha_range;
    let grid = grid.max(2);
    let g = |a: f64| averaged_g(ode, section, a, opts);
    let alphas: Vec<f64> = (0..grid)
        .map(|i| a0 + (a1 - a0) * i as f64 / (grid - 1) as f64)
        .collect();
    let values = alphas.iter().map(|&a| g(a)).collect::<Result<Vec<_>>>()?;
    let dh = 1e-4 * (a1 - a0).abs();
    let mut found = Vec::new();
    for i in 0..grid {
        if values[i] == 0.0 {
            found.push(alphas[i]);
            continue;
        }
        if i + 1 < grid && values[i + 1] != 0.0 && values[i].signum() != values[i + 1].signum() {
            found.push(illinois(&g, (alphas[i], values[i]), (alphas[i + 1], values[i + 1]))?);
        }
    }
    found
        .into_iter()
        .map(|root| {
            let d = (g(root + dh)? - g(root - dh)?) / (2.0 * dh);
            Ok(CycleRoot {
                alpha: root,
                hyperbolic: d.abs() > 1e-6,
                d_alpha_g: d,
            })
        })
        .collect()
}

fn illinois<F>(g: &F, (mut lo, mut glo): (f64, f64), (mut hi, mut ghi): (f64, f64)) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut root = hi;
    let mut side = 0;
    for _ in 0..60 {
        let c = (lo * ghi - hi * glo) / (ghi - glo);
        let gc = g(c)?;
        root = c;
        if gc == 0.0 || (hi - lo).abs() <= 1e-13 || gc.abs() <= 1e-14 {
            break;
        }
        if gc.signum() == ghi.signum() {
            hi = c;
            ghi = gc;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        } else {
            lo = c;
            glo = gc;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        }
    }
    Ok(root)
}

/// `x*(alpha)` and the fast multiplier along the critical curve of the built map.
pub fn critical_curve(
    map: &FastSlowMap,
    section: &SectionSpec,
    alphas: &[f64],
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    alphas
        .iter()
        .map(|&a| {
            let p = cycle_point(map, section, a)?;
            let mu = crate::spectral::nontrivial_multipliers(map, &p)?;
            Ok((a, p.rows(0, p.len() - 1).iter().copied().collect(), mu[0].re))
        })
        .collect()
}
