//! Fast multipliers along the critical manifold, normal hyperbolicity and singularities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::map::FastSlowMap;

/// Default half-width of the band around the unit circle.
pub const HYPERBOLICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SingularityKind {
    Fold,
    Flip,
    NeimarkSacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Attracting,
    Repelling,
    Saddle { n_a: usize, n_r: usize },
    NonHyperbolic(SingularityKind),
}

impl Classification {
    pub fn is_hyperbolic(&self) -> bool {
        !matches!(self, Classification::NonHyperbolic(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub point: Vector,
    pub multipliers: Vec<Complex64>,
    pub eigenvalues: Vec<Complex64>,
    pub classification: Classification,
    pub tol: f64,
}

/// Eigenvalues of `I + Df N` at a point of `S`, sorted by modulus descending.
pub fn nontrivial_multipliers(map: &FastSlowMap, z: &Vector) -> Result<Vec<Complex64>> {
    map.on_manifold(z)?;
    let m = map.dfn(z)?;
    let id = linalg::Matrix::identity(m.nrows(), m.ncols());
    Ok(linalg::sorted_eigenvalues(&(id + m)))
}

pub fn spectrum(map: &FastSlowMap, z: &Vector, tol: f64) -> Result<SpectrumReport> {
    let multipliers = nontrivial_multipliers(map, z)?;
    let eigenvalues = multipliers.iter().map(|m| m - 1.0).collect();
    Ok(SpectrumReport {
        point: z.clone(),
        classification: classify_multipliers(&multipliers, tol),
        multipliers,
        eigenvalues,
        tol,
    })
}

pub fn classify_point(map: &FastSlowMap, z: &Vector, tol: f64) -> Result<Classification> {
    Ok(classify_multipliers(&nontrivial_multipliers(map, z)?, tol))
}

fn kind_of(mu: Complex64, tol: f64) -> SingularityKind {
    if mu.im.abs() > tol {
        SingularityKind::NeimarkSacker
    } else if mu.re > 0.0 {
        SingularityKind::Fold
    } else {
        SingularityKind::Flip
    }
}

fn classify_levels(mu: &[Complex64], levels: &[f64], tol: f64) -> Classification {
    // Nearest-to-circle multiplier inside the band decides the archetype.
    let in_band = mu
        .iter()
        .zip(levels)
        .filter(|(_, l)| **l == 0.0)
        .map(|(m, _)| *m)
        .min_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()));
    if let Some(m) = in_band {
        return Classification::NonHyperbolic(kind_of(m, tol));
    }
    let n_a = levels.iter().filter(|l| **l < 0.0).count();
    let n_r = levels.len() - n_a;
    match (n_a, n_r) {
        (_, 0) => Classification::Attracting,
        (0, _) => Classification::Repelling,
        (n_a, n_r) => Classification::Saddle { n_a, n_r },
    }
}

/// Classification from multipliers by `||mu| - 1| <= tol`.
pub fn classify_multipliers(mu: &[Complex64], tol: f64) -> Classification {
    let levels: Vec<f64> = mu
        .iter()
        .map(|m| {
            let d = m.norm() - 1.0;
            if d.abs() <= tol {
                0.0
            } else {
                d
            }
        })
        .collect();
    classify_levels(mu, &levels, tol)
}

/// Classification from eigenvalues `lambda` of `Df N` without forming `1 + lambda`.
///
/// Uses `q = 2 Re(lambda) + |lambda|^2 = |mu|^2 - 1`; the band `||mu| - 1| <= tol`
/// becomes `tol^2 - 2 tol <= q <= tol^2 + 2 tol`.
pub fn classify_by_eigenvalues(lambda: &[Complex64], tol: f64) -> Classification {
    let mu: Vec<Complex64> = lambda.iter().map(|l| l + 1.0).collect();
    let lo = tol * tol - 2.0 * tol;
    let hi = tol * tol + 2.0 * tol;
    let levels: Vec<f64> = lambda
        .iter()
        .map(|l| {
            let q = 2.0 * l.re + l.norm_sqr();
            if q >= lo && q <= hi {
                0.0
            } else {
                q
            }
        })
        .collect();
    classify_levels(&mu, &levels, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityHit {
    /// Curve parameter at the crossing.
    pub coord: f64,
    pub point: Vec<f64>,
    pub kind: SingularityKind,
    pub mu_re: f64,
    pub mu_im: f64,
}

/// One-parameter family of points on `S`.
pub trait CurveOnS {
    /// Point at parameter `t`, using `seed` as a nearby starting guess.
    fn point(&self, t: f64, seed: &Vector) -> Result<Vector>;
}

/// Curve traced by fixing the first chart parameter and solving `f = 0` for the graph part.
///
/// Remaining chart parameters (for `k > 1`) are taken from the seed.
pub struct ChartCurve<'a> {
    pub map: &'a FastSlowMap,
}

impl CurveOnS for ChartCurve<'_> {
    fn point(&self, t: f64, seed: &Vector) -> Result<Vector> {
        let chart = self.map.chart();
        let mut z = seed.clone();
        z[chart.param[0]] = t;
        crate::manifold::newton_on_fiber(self.map, &z, 0)
    }
}

impl<F> CurveOnS for F
where
    F: Fn(f64) -> Vector,
{
    fn point(&self, t: f64, _seed: &Vector) -> Result<Vector> {
        Ok(self(t))
    }
}

/// Scans `ts` for sign changes of `|mu_j| - 1` and bisects each to `|level| <= tol`.
///
/// The sampling must be fine enough that each segment contains at most one crossing
/// per multiplier.
pub fn locate_singularities<C: CurveOnS>(
    map: &FastSlowMap,
    curve: &C,
    ts: &[f64],
    seed: &Vector,
    tol: f64,
) -> Result<Vec<SingularityHit>> {
    let mut hits = Vec::new();
    if ts.is_empty() {
        return Ok(hits);
    }
    let mut prev_z = curve.point(ts[0], seed)?;
    let mut prev_mu = nontrivial_multipliers(map, &prev_z)?;
    for w in ts.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let z = curve.point(tb, &prev_z)?;
        let mu = nontrivial_multipliers(map, &z)?;
        for j in 0..mu.len() {
            let la = prev_mu[j].norm() - 1.0;
            let lb = mu[j].norm() - 1.0;
            if la == 0.0 || (lb != 0.0 && la.signum() != lb.signum()) {
                hits.push(bisect_crossing(map, curve, j, (ta, &prev_z, la), tb, tol)?);
            }
        }
        prev_z = z;
        prev_mu = mu;
    }
    Ok(hits)
}

fn bisect_crossing<C: CurveOnS>(
    map: &FastSlowMap,
    curve: &C,
    j: usize,
    (mut a, za, mut la): (f64, &Vector, f64),
    mut b: f64,
    tol: f64,
) -> Result<SingularityHit> {
    let mut seed = za.clone();
    let mut best = (a, za.clone(), nontrivial_multipliers(map, za)?[j]);
    if la == 0.0 {
        return Ok(hit(a, za, best.2));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let z = curve.point(mid, &seed)?;
        let mu = nontrivial_multipliers(map, &z)?[j];
        let l = mu.norm() - 1.0;
        best = (mid, z.clone(), mu);
        let width = (b - a).abs();
        if l == 0.0 || (l.abs() <= tol && width <= 1e-13 * mid.abs().max(1.0)) {
            break;
        }
        if l.signum() == la.signum() {
            a = mid;
            la = l;
        } else {
            b = mid;
        }
        seed = z;
    }
    Ok(hit(best.0, &best.1, best.2))
}

fn hit(t: f64, z: &Vector, mu: Complex64) -> SingularityHit {
    SingularityHit {
        coord: t,
        point: z.iter().copied().collect(),
        kind: kind_of(mu, HYPERBOLICITY_TOL.max(1e-12)),
        mu_re: mu.re,
        mu_im: mu.im,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    /// Largest stable modulus; 0 when no sample has a stable multiplier.
    pub nu_a: f64,
    /// Smallest unstable modulus; infinite when none.
    pub nu_r: f64,
    pub samples: usize,
}

/// `nu_A` and `nu_R` over sample points of `S`.
pub fn spectral_bounds(map: &FastSlowMap, points: &[Vector], tol: f64) -> Result<SpectralBounds> {
    let mut nu_a: f64 = 0.0;
    let mut nu_r = f64::INFINITY;
    for (index, z) in points.iter().enumerate() {
        for mu in nontrivial_multipliers(map, z)? {
            let r = mu.norm();
            if (r - 1.0).abs() <= tol {
                return Err(Error::NonHyperbolicSample { index, modulus: r });
            }
            if r < 1.0 {
                nu_a = nu_a.max(r);
            } else {
                nu_r = nu_r.min(r);
            }
        }
    }
    Ok(SpectralBounds {
        nu_a,
        nu_r,
        samples: points.len(),
    })
}
