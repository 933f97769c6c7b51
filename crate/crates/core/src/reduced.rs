//! Reduced and m-th iterate maps on the critical manifold, fixed points, fiber rates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::manifold::{self, GraphManifold};
use crate::map::FastSlowMap;
use crate::spectral::HYPERBOLICITY_TOL;

/// `z + eps Pi(z) G(z, 0)` for `z` on `S`.
pub fn reduced_step(map: &FastSlowMap, z: &Vector, eps: f64) -> Result<Vector> {
    if eps == 0.0 {
        map.on_manifold(z)?;
        return Ok(z.clone());
    }
    let pi = manifold::projection(map, z)?;
    Ok(z + pi.apply(&map.g(z, 0.0)?) * eps)
}

/// Largest `eps * m` accepted by `mth_iterate_reduced`.
pub const EPS_M_CAP: f64 = 1.0;

/// `z + eps m Pi(z) G(z, 0)`, the leading-order m-step map.
pub fn mth_iterate_reduced(map: &FastSlowMap, z: &Vector, eps: f64, m: usize) -> Result<Vector> {
    mth_iterate_reduced_capped(map, z, eps, m, EPS_M_CAP)
}

pub fn mth_iterate_reduced_capped(
    map: &FastSlowMap,
    z: &Vector,
    eps: f64,
    m: usize,
    cap: f64,
) -> Result<Vector> {
    if m == 0 {
        return Err(Error::ParamOutOfRange("m must be positive".into()));
    }
    if eps * m as f64 > cap {
        return Err(Error::ParamOutOfRange(format!(
            "eps * m = {} exceeds the cap {cap}",
            eps * m as f64
        )));
    }
    reduced_step(map, z, eps * m as f64)
}

/// `m` reduced steps, each followed by a retraction onto `S` along the chart fiber.
pub fn compose_reduced(map: &FastSlowMap, z: &Vector, eps: f64, m: usize) -> Result<Vector> {
    let mut p = z.clone();
    for _ in 0..m {
        let q = reduced_step(map, &p, eps)?;
        p = manifold::retract_to_critical(map, &q)?;
    }
    Ok(p)
}

/// Gap between one full step on `S_eps` and the reduced step from the base point on `S`.
///
/// Compares displacements: `(H(z_eps) - z_eps) - eps Pi(z_0) G(z_0, 0)` with
/// `z_eps = (x, phi_eps(x))` and `z_0 = (x, phi_0(x))`.
pub fn reduced_defect(
    map: &FastSlowMap,
    critical: &GraphManifold,
    slow: &GraphManifold,
    x: &Vector,
    eps: f64,
) -> Result<f64> {
    let z_eps = slow.point(x);
    let z0 = manifold::critical_point(map, x, &critical.phi(x))?;
    let full = map.evaluate(&z_eps, eps)? - &z_eps;
    let red = reduced_step(map, &z0, eps)? - &z0;
    Ok((full - red).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    /// Some multiplier within the tolerance band of the unit circle.
    NonHyperbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub location: Vec<f64>,
    pub eps: f64,
    /// Eigenvalues of the full Jacobian, (re, im), sorted by modulus descending.
    pub multipliers: Vec<(f64, f64)>,
    pub stability: Stability,
    pub residual: f64,
    /// At `eps = 0` every point of `S` is fixed; the report gives the projection of the guess.
    pub degenerate: bool,
}

fn stability_of(mu: &[Complex64], tol: f64) -> Stability {
    if mu.iter().any(|m| (m.norm() - 1.0).abs() <= tol) {
        return Stability::NonHyperbolic;
    }
    let inside = mu.iter().filter(|m| m.norm() < 1.0).count();
    match inside {
        i if i == mu.len() => Stability::Stable,
        0 => Stability::Unstable,
        _ => Stability::Saddle,
    }
}

fn report(map: &FastSlowMap, z: Vector, eps: f64, degenerate: bool) -> Result<FixedPointReport> {
    let residual = (map.evaluate(&z, eps)? - &z).amax();
    let mu = linalg::sorted_eigenvalues(&map.jacobian(&z, eps)?);
    Ok(FixedPointReport {
        location: z.iter().copied().collect(),
        eps,
        stability: if degenerate {
            Stability::NonHyperbolic
        } else {
            stability_of(&mu, HYPERBOLICITY_TOL)
        },
        multipliers: mu.iter().map(|m| (m.re, m.im)).collect(),
        residual,
        degenerate,
    })
}

/// Newton on `H(z, eps) - z = 0`.
pub fn find_fixed_point(map: &FastSlowMap, guess: &Vector, eps: f64) -> Result<FixedPointReport> {
    find_fixed_point_tol(map, guess, eps, 1e-12)
}

pub fn find_fixed_point_tol(map: &FastSlowMap, guess: &Vector, eps: f64, tol: f64) -> Result<FixedPointReport> {
    if eps == 0.0 {
        let z = manifold::project_along_fiber(map, guess)?;
        return report(map, z, eps, true);
    }
    let n = map.n();
    let mut z = guess.clone();
    let mut r = map.evaluate(&z, eps)? - &z;
    let mut rn = r.amax();
    for _ in 0..100 {
        if rn <= tol {
            return report(map, z, eps, false);
        }
        let j = map.jacobian(&z, eps)? - linalg::Matrix::identity(n, n);
        let dz = linalg::solve(&j, &r).ok_or(Error::NewtonDiverged { node: 0, residual: rn })?;
        let mut lam = 1.0;
        loop {
            let cand = &z - &dz * lam;
            let rc = map.evaluate(&cand, eps).map(|h| h - &cand);
            match rc {
                Ok(rc) if rc.amax() < rn || lam <= 1.0 / 64.0 => {
                    if !(rc.amax() < rn) && rn <= 1e3 * tol {
                        // Round-off floor just above the requested tolerance.
                        return report(map, z, eps, false);
                    }
                    z = cand;
                    rn = rc.amax();
                    r = rc;
                    break;
                }
                _ if lam <= 1.0 / 64.0 => {
                    return Err(Error::NewtonDiverged { node: 0, residual: rn });
                }
                _ => lam *= 0.5,
            }
        }
    }
    Err(Error::NewtonDiverged { node: 0, residual: rn })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberRateReport {
    pub base: Vec<f64>,
    pub offset: Vec<f64>,
    /// Tangential shift applied to the probe so that it sits on the base point's fiber.
    pub alignment: Vec<f64>,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Geometric mean of the ratios after the transient.
    pub chi: Option<f64>,
    pub inverse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub transient: usize,
    /// Distances below this are round-off and end the record.
    pub noise_floor: f64,
    pub align: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            transient: 3,
            noise_floor: 1e-12,
            align: true,
        }
    }
}

/// Tracks `|H^j(xi) - H^j(z)|` for a probe `xi = z + offset` (or inverse iterates).
///
/// With alignment, the probe is first slid along the tangent of `slow` until, after
/// `steps` iterations, its separation from the base orbit has no component along `S`;
/// this places it on the base point's fiber up to the solve tolerance.
pub fn fiber_rate_probe(
    map: &FastSlowMap,
    slow: &GraphManifold,
    z_eps: &Vector,
    offset: &Vector,
    steps: usize,
    inverse: bool,
    eps: f64,
    opts: &ProbeOptions,
) -> Result<FiberRateReport> {
    let advance = |z: &Vector| -> Result<Vector> {
        if inverse {
            map.inverse_step(z, eps, z)
        } else {
            map.evaluate(z, eps)
        }
    };
    let orbit = |z0: &Vector, j: usize| -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(j + 1);
        out.push(z0.clone());
        for _ in 0..j {
            let nz = advance(out.last().expect("nonempty"))?;
            if !map.in_domain(&nz) {
                return Err(Error::DomainExit { step: out.len() });
            }
            out.push(nz);
        }
        Ok(out)
    };
    let base = orbit(z_eps, steps)?;
    let zero = offset.iter().all(|v| *v == 0.0);
    let k = map.k();
    let mut shift = Vector::zeros(k);
    if opts.align && !zero && steps > 0 {
        let x0 = map.chart().x_of(z_eps);
        let tangent = slow.tangent(&x0);
        let end = base.last().expect("nonempty");
        let anchor = manifold::retract_to_critical(map, end)?;
        let pi = manifold::projection(map, &anchor)?;
        let chart = map.chart();
        let slide = |s: &Vector| -> Result<Vector> {
            let xi = z_eps + offset + &tangent * s;
            let o = orbit(&xi, steps)?;
            let d = pi.apply(&(o.last().expect("nonempty") - end));
            Ok(chart.x_of(&d))
        };
        shift = manifold::newton_fd(slide, shift, 0)?;
    }
    let xi0 = z_eps + offset + slow.tangent(&map.chart().x_of(z_eps)) * &shift;
    let probe = orbit(&xi0, steps)?;
    let mut distances = Vec::with_capacity(steps + 1);
    let mut ratios = Vec::new();
    for (j, (a, b)) in probe.iter().zip(&base).enumerate() {
        let d = (a - b).norm();
        distances.push(d);
        if j > 0 {
            let prev = distances[j - 1];
            if prev < opts.noise_floor || d < opts.noise_floor {
                break;
            }
            ratios.push(d / prev);
        }
    }
    let kept: Vec<f64> = ratios.iter().skip(opts.transient).copied().collect();
    let chi = (!kept.is_empty())
        .then(|| (kept.iter().map(|r| r.ln()).sum::<f64>() / kept.len() as f64).exp());
    Ok(FiberRateReport {
        base: z_eps.iter().copied().collect(),
        offset: offset.iter().copied().collect(),
        alignment: shift.iter().copied().collect(),
        distances,
        ratios,
        chi,
        inverse,
    })
}
