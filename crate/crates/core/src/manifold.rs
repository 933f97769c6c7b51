//! Critical manifolds as graphs, the projection onto `TS` along `N`, and slow manifolds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::map::{Chart, FastSlowMap, Trajectory};
use crate::spline::GridSpline;

/// Guard on the smallest `|eigenvalue|` of `DfN` before inverting it.
///
/// Looser than round-off so that points a few micro-units from a fold are refused.
pub const FOLD_TOL: f64 = 1e-3;

/// Uniform rectangular grid of chart parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
            return Err(Error::Dimension("grid bounds and counts".into()));
        }
        for a in 0..lo.len() {
            if counts[a] == 0 || !(hi[a] >= lo[a]) || (counts[a] > 1 && hi[a] == lo[a]) {
                return Err(Error::ParamOutOfRange(format!("grid axis {a}")));
            }
        }
        Ok(Grid { lo, hi, counts })
    }

    pub fn line(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Grid::new(vec![lo], vec![hi], vec![count])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis(&self, a: usize) -> Vec<f64> {
        let n = self.counts[a];
        if n == 1 {
            return vec![self.lo[a]];
        }
        let h = (self.hi[a] - self.lo[a]) / (n - 1) as f64;
        (0..n)
            .map(|i| if i + 1 == n { self.hi[a] } else { self.lo[a] + h * i as f64 })
            .collect()
    }

    pub fn axes(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|a| self.axis(a)).collect()
    }

    /// Row-major multi-index of node `i`, last axis fastest.
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = i % self.counts[a];
            i /= self.counts[a];
        }
        idx
    }

    pub fn node(&self, i: usize) -> Vector {
        let idx = self.multi_index(i);
        Vector::from_iterator(
            self.dim(),
            idx.iter().enumerate().map(|(a, &j)| {
                if self.counts[a] == 1 {
                    self.lo[a]
                } else if j + 1 == self.counts[a] {
                    self.hi[a]
                } else {
                    self.lo[a] + (self.hi[a] - self.lo[a]) * j as f64 / (self.counts[a] - 1) as f64
                }
            }),
        )
    }

    /// Within `width` nodes of any face.
    pub fn is_boundary(&self, i: usize, width: usize) -> bool {
        self.multi_index(i)
            .iter()
            .zip(&self.counts)
            .any(|(&j, &n)| n > 1 && (j < width || j + width >= n))
    }

    pub fn contains(&self, x: &Vector) -> bool {
        (0..self.dim()).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }
}

/// A k-dimensional manifold `y = phi(x)` sampled on a grid, interpolated by splines.
#[derive(Debug, Clone)]
pub struct GraphManifold {
    chart: Chart,
    grid: Grid,
    values: Vec<Vector>,
    eps: f64,
    splines: Vec<GridSpline>,
}

impl GraphManifold {
    pub fn new(chart: Chart, grid: Grid, values: Vec<Vector>, eps: f64) -> Result<Self> {
        if values.len() != grid.len() || grid.dim() != chart.param.len() {
            return Err(Error::Dimension("graph values do not match the grid".into()));
        }
        let m = chart.graph.len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::Dimension("graph value length".into()));
        }
        let axes = grid.axes();
        let splines = (0..m)
            .map(|b| GridSpline::new(axes.clone(), values.iter().map(|v| v[b]).collect()))
            .collect();
        Ok(GraphManifold {
            chart,
            grid,
            values,
            eps,
            splines,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> Vector {
        self.grid.node(i)
    }

    pub fn node_point(&self, i: usize) -> Vector {
        self.chart.join(&self.grid.node(i), &self.values[i])
    }

    pub fn points(&self) -> Vec<Vector> {
        (0..self.len()).map(|i| self.node_point(i)).collect()
    }

    pub fn phi(&self, x: &Vector) -> Vector {
        let xs: Vec<f64> = x.iter().copied().collect();
        Vector::from_iterator(self.splines.len(), self.splines.iter().map(|s| s.eval(&xs)))
    }

    /// `D phi(x)`, an (n-k) x k matrix.
    pub fn dphi(&self, x: &Vector) -> Matrix {
        let xs: Vec<f64> = x.iter().copied().collect();
        Matrix::from_fn(self.splines.len(), xs.len(), |b, a| self.splines[b].partial(&xs, a))
    }

    pub fn point(&self, x: &Vector) -> Vector {
        self.chart.join(x, &self.phi(x))
    }

    /// Tangent vectors of the graph at `x` as columns (n x k).
    pub fn tangent(&self, x: &Vector) -> Matrix {
        let n = self.chart.param.len() + self.chart.graph.len();
        let k = self.chart.param.len();
        let d = self.dphi(x);
        let mut t = Matrix::zeros(n, k);
        for a in 0..k {
            t[(self.chart.param[a], a)] = 1.0;
            for (b, &gi) in self.chart.graph.iter().enumerate() {
                t[(gi, a)] = d[(b, a)];
            }
        }
        t
    }

    /// `|y - phi(x)|` for a point whose chart parameters lie in the grid box.
    pub fn distance(&self, z: &Vector) -> Option<f64> {
        let x = self.chart.x_of(z);
        self.grid
            .contains(&x)
            .then(|| (self.chart.y_of(z) - self.phi(&x)).norm())
    }

    /// Largest nodewise distance between two graphs on the same grid.
    pub fn sup_distance(&self, other: &GraphManifold) -> f64 {
        assert_eq!(self.grid, other.grid, "graphs live on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `|H^y(z) - phi(H^x(z))|` at each node `z = (x, phi(x))`.
    ///
    /// `None` for the two outermost node layers and for nodes whose image leaves the grid.
    pub fn invariance_residuals(&self, map: &FastSlowMap, eps: f64) -> Result<Vec<Option<f64>>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                if self.grid.is_boundary(i, 2) {
                    return Ok(None);
                }
                let img = map.evaluate(&self.node_point(i), eps)?;
                let xi = self.chart.x_of(&img);
                if !self.grid.contains(&xi) {
                    return Ok(None);
                }
                Ok(Some((self.chart.y_of(&img) - self.phi(&xi)).norm()))
            })
            .collect()
    }

    pub fn max_invariance_residual(&self, map: &FastSlowMap, eps: f64) -> Result<f64> {
        Ok(self
            .invariance_residuals(map, eps)?
            .into_iter()
            .flatten()
            .fold(0.0, f64::max))
    }

    fn with_values(&self, values: Vec<Vector>, eps: f64) -> Result<Self> {
        GraphManifold::new(self.chart.clone(), self.grid.clone(), values, eps)
    }
}

impl Trajectory {
    /// Fills `dist_to_slow` for points whose chart parameters lie inside the grid.
    pub fn annotate(&mut self, manifold: &GraphManifold) {
        self.dist_to_slow = self.points.iter().map(|p| manifold.distance(p)).collect();
    }
}

/// Newton on `f = 0` in the graph coordinates, chart parameters held fixed.
pub fn newton_on_fiber(map: &FastSlowMap, z0: &Vector, node: usize) -> Result<Vector> {
    let chart = map.chart();
    let tol = 1e-3 * map.on_manifold_tol();
    let mut z = z0.clone();
    let mut f = map.f(&z)?;
    let mut fn_ = linalg::sup_norm(&f);
    for _ in 0..50 {
        if fn_ <= tol {
            return Ok(z);
        }
        let dy = chart.graph_columns(&map.df(&z)?);
        if dy.determinant().abs() < 1e-12 {
            return Err(Error::SingularJacobian {
                node,
                det: dy.determinant(),
            });
        }
        let step = linalg::solve(&dy, &f).ok_or(Error::SingularJacobian { node, det: 0.0 })?;
        let mut lam = 1.0;
        loop {
            let mut cand = z.clone();
            for (b, &gi) in chart.graph.iter().enumerate() {
                cand[gi] -= lam * step[b];
            }
            let fc = map.f(&cand).ok();
            let fcn = fc.as_ref().map_or(f64::INFINITY, linalg::sup_norm);
            if fcn < fn_ || lam < 1e-3 {
                if !(fcn < fn_) {
                    // Stagnation at round-off is acceptable on the manifold scale.
                    if fn_ <= map.on_manifold_tol() && linalg::sup_norm(&step) <= 1e-14 * (1.0 + z.norm()) {
                        return Ok(z);
                    }
                    return Err(Error::NewtonDiverged { node, residual: fn_ });
                }
                z = cand;
                f = fc.expect("finite residual");
                fn_ = fcn;
                break;
            }
            lam *= 0.5;
        }
    }
    if fn_ <= map.on_manifold_tol() {
        Ok(z)
    } else {
        Err(Error::NewtonDiverged { node, residual: fn_ })
    }
}

/// Point of `S` with chart parameters `x`, starting the graph part at `y_seed`.
pub fn critical_point(map: &FastSlowMap, x: &Vector, y_seed: &Vector) -> Result<Vector> {
    newton_on_fiber(map, &map.chart().join(x, y_seed), 0)
}

/// Moves `z` onto `S` along the chart fiber (chart parameters fixed).
pub fn retract_to_critical(map: &FastSlowMap, z: &Vector) -> Result<Vector> {
    newton_on_fiber(map, z, 0)
}

/// Moves `z` onto `S` along the range of `N(z)`: solves `f(z + N(z) s) = 0`.
pub fn project_along_fiber(map: &FastSlowMap, z: &Vector) -> Result<Vector> {
    let nz = map.n_matrix(z)?;
    let mut s = Vector::zeros(map.m());
    for _ in 0..50 {
        let p = z + &nz * &s;
        let f = map.f(&p)?;
        if linalg::sup_norm(&f) <= 1e-3 * map.on_manifold_tol() {
            return Ok(p);
        }
        let j = map.df(&p)? * &nz;
        let ds = linalg::solve(&j, &f).ok_or(Error::FoldSingularity { min_eig: 0.0 })?;
        s -= ds;
    }
    let p = z + &nz * &s;
    map.on_manifold(&p)?;
    Ok(p)
}

/// Continues `f(x, y) = 0` over `grid`, each node seeded by its predecessor.
pub fn solve_critical_graph(map: &FastSlowMap, grid: &Grid, y_seed: &Vector) -> Result<GraphManifold> {
    let chart = map.chart().clone();
    if grid.dim() != map.k() || y_seed.len() != map.m() {
        return Err(Error::Dimension("grid or seed does not match the map".into()));
    }
    let mut values: Vec<Vector> = Vec::with_capacity(grid.len());
    let mut dets: Vec<f64> = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let idx = grid.multi_index(i);
        // Predecessor: the last axis with a nonzero index, stepped back once.
        let pred = (0..grid.dim()).rev().find(|&a| idx[a] > 0).map(|a| {
            let mut p = idx.clone();
            p[a] -= 1;
            p.iter().zip(&grid.counts).fold(0, |acc, (&j, &n)| acc * n + j)
        });
        let seed = pred.map_or_else(|| y_seed.clone(), |p| values[p].clone());
        let pred_det = pred.map(|p| dets[p]);
        let z0 = chart.join(&grid.node(i), &seed);
        let shrinking = pred.map_or(false, |p| {
            let pp = grid.multi_index(p);
            let before = (0..grid.dim()).rev().find(|&a| pp[a] > 0).map(|a| {
                let mut q = pp.clone();
                q[a] -= 1;
                q.iter().zip(&grid.counts).fold(0, |acc, (&j, &n)| acc * n + j)
            });
            before.map_or(false, |q| dets[p].abs() < dets[q].abs())
        });
        let z = match newton_on_fiber(map, &z0, i) {
            Ok(z) => z,
            Err(Error::NewtonDiverged { .. }) if shrinking => {
                return Err(Error::SingularJacobian {
                    node: i,
                    det: pred_det.unwrap_or(0.0),
                })
            }
            Err(e) => return Err(e),
        };
        let det = chart.graph_columns(&map.df(&z)?).determinant();
        if let Some(pd) = pred_det {
            // A sign change of det D_y f between neighbours means a fold was stepped over.
            if pd.signum() != det.signum() {
                return Err(Error::SingularJacobian { node: i, det });
            }
        }
        values.push(chart.y_of(&z));
        dets.push(det);
    }
    GraphManifold::new(chart, grid.clone(), values, 0.0)
}

/// The oblique projection `I - N (Df N)^-1 Df` at a point of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub point: Vector,
    pub matrix: Matrix,
}

impl ProjectionMatrix {
    pub fn apply(&self, v: &Vector) -> Vector {
        &self.matrix * v
    }
}

/// `I - N (Df N)^-1 Df` from explicit `N` and `Df`, refusing near-singular `DfN`.
pub fn projection_from(n_mat: &Matrix, df: &Matrix, fold_tol: f64) -> Result<Matrix> {
    let dfn = df * n_mat;
    let min_eig = linalg::sorted_eigenvalues(&dfn)
        .last()
        .map_or(0.0, |l| l.norm());
    if min_eig < fold_tol {
        return Err(Error::FoldSingularity { min_eig });
    }
    let inv = dfn.try_inverse().ok_or(Error::FoldSingularity { min_eig })?;
    let n = n_mat.nrows();
    Ok(Matrix::identity(n, n) - n_mat * inv * df)
}

pub fn projection(map: &FastSlowMap, z: &Vector) -> Result<ProjectionMatrix> {
    projection_with_tol(map, z, FOLD_TOL)
}

pub fn projection_with_tol(map: &FastSlowMap, z: &Vector, fold_tol: f64) -> Result<ProjectionMatrix> {
    map.on_manifold(z)?;
    Ok(ProjectionMatrix {
        point: z.clone(),
        matrix: projection_from(&map.n_matrix(z)?, &map.df(z)?, fold_tol)?,
    })
}

/// `(D_y f)^-1 (Df N)^-1 Df G(z, 0)` at a point of `S`; the first-order graph shift is `-eps` times this.
pub fn first_order_correction(map: &FastSlowMap, z: &Vector) -> Result<Vector> {
    let df = map.df(z)?;
    let nz = map.n_matrix(z)?;
    let dfn = &df * &nz;
    let min_eig = linalg::sorted_eigenvalues(&dfn).last().map_or(0.0, |l| l.norm());
    if min_eig < FOLD_TOL {
        return Err(Error::FoldSingularity { min_eig });
    }
    let dfg = &df * map.g(z, 0.0)?;
    let inner = linalg::solve(&dfn, &dfg).ok_or(Error::FoldSingularity { min_eig })?;
    let dy = map.chart().graph_columns(&df);
    linalg::solve(&dy, &inner).ok_or(Error::SingularJacobian {
        node: 0,
        det: dy.determinant(),
    })
}

/// `phi_eps = phi_0 - eps (D_y f)^-1 (Df N)^-1 Df G` nodewise.
pub fn slow_manifold_first_order(map: &FastSlowMap, critical: &GraphManifold, eps: f64) -> Result<GraphManifold> {
    if eps == 0.0 {
        return Ok(critical.clone());
    }
    let values = (0..critical.len())
        .into_par_iter()
        .map(|i| {
            let z = critical.node_point(i);
            Ok(&critical.values()[i] - first_order_correction(map, &z)? * eps)
        })
        .collect::<Result<Vec<_>>>()?;
    critical.with_values(values, eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOptions {
    /// Stop when the sup-norm update falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Consecutive growing updates tolerated before giving up.
    pub patience: usize,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            tol: 1e-12,
            max_sweeps: 10_000,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformStats {
    pub sweeps: usize,
    pub last_update: f64,
}

/// Invariant graph of the map near `critical`, by graph transform.
///
/// Forward: `phi(H^x(x, phi(x))) = H^y(x, phi(x))`, solved at each node for the preimage
/// parameter. Backward: `H^y(x_j, y) = phi(H^x(x_j, y))` solved for `y` at each node,
/// which contracts on repelling branches. Starts from the first-order graph.
pub fn slow_manifold_numeric(
    map: &FastSlowMap,
    critical: &GraphManifold,
    eps: f64,
    direction: Direction,
) -> Result<GraphManifold> {
    Ok(slow_manifold_numeric_with(map, critical, eps, direction, &TransformOptions::default())?.0)
}

pub fn slow_manifold_numeric_with(
    map: &FastSlowMap,
    critical: &GraphManifold,
    eps: f64,
    direction: Direction,
    opts: &TransformOptions,
) -> Result<(GraphManifold, TransformStats)> {
    let mut current = slow_manifold_first_order(map, critical, eps)?;
    let chart = critical.chart().clone();
    let mut last = f64::INFINITY;
    let mut growing = 0;
    for sweep in 1..=opts.max_sweeps {
        let values = (0..current.len())
            .into_par_iter()
            .map(|i| match direction {
                Direction::Forward => forward_node(map, &current, &chart, i, eps),
                Direction::Backward => backward_node(map, &current, &chart, i, eps),
            })
            .collect::<Result<Vec<_>>>()?;
        let update = values
            .iter()
            .zip(current.values())
            .map(|(a, b)| linalg::sup_norm(&(a - b)))
            .fold(0.0, f64::max);
        current = current.with_values(values, eps)?;
        if update < opts.tol {
            return Ok((current, TransformStats { sweeps: sweep, last_update: update }));
        }
        if update > last {
            growing += 1;
            if growing >= opts.patience {
                return Err(Error::NotContracting { sweep, update });
            }
        } else {
            growing = 0;
        }
        last = update;
    }
    Err(Error::MaxIterations(opts.max_sweeps))
}

/// Graph of the current iterate inside the grid; outside it, the first-order graph
/// shifted to meet the current one at the nearest grid point.
///
/// Preimages of edge nodes can fall well outside the grid when the slow drift is
/// fast in chart coordinates. Extrapolating the spline there is unstable, while the
/// shifted first-order graph is continuous and its offset contracts under the map.
fn graph_value(map: &FastSlowMap, g: &GraphManifold, x: &Vector, eps: f64) -> Result<Vector> {
    let grid = g.grid();
    if grid.contains(x) {
        return Ok(g.phi(x));
    }
    let edge = Vector::from_iterator(x.len(), (0..x.len()).map(|a| x[a].clamp(grid.lo[a], grid.hi[a])));
    let first = |p: &Vector| -> Result<Vector> {
        let z0 = critical_point(map, p, &g.phi(&edge))?;
        Ok(map.chart().y_of(&z0) - first_order_correction(map, &z0)? * eps)
    };
    Ok(first(x)? + g.phi(&edge) - first(&edge)?)
}

fn forward_node(map: &FastSlowMap, g: &GraphManifold, chart: &Chart, i: usize, eps: f64) -> Result<Vector> {
    let xj = g.node(i);
    let point = |x: &Vector| -> Result<Vector> { Ok(chart.join(x, &graph_value(map, g, x, eps)?)) };
    let hx = |x: &Vector| -> Result<Vector> {
        let img = map.evaluate(&point(x)?, eps)?;
        Ok(chart.x_of(&img) - &xj)
    };
    let r0 = hx(&xj)?;
    let x = newton_fd(hx, &xj - r0, i)?;
    let img = map.evaluate(&point(&x)?, eps)?;
    Ok(chart.y_of(&img))
}

fn backward_node(map: &FastSlowMap, g: &GraphManifold, chart: &Chart, i: usize, eps: f64) -> Result<Vector> {
    let xj = g.node(i);
    let res = |y: &Vector| -> Result<Vector> {
        let img = map.evaluate(&chart.join(&xj, y), eps)?;
        Ok(chart.y_of(&img) - graph_value(map, g, &chart.x_of(&img), eps)?)
    };
    newton_fd(res, g.values()[i].clone(), i)
}

/// Newton with a finite-difference Jacobian for small square systems.
pub(crate) fn newton_fd<F>(f: F, x0: Vector, node: usize) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let mut x = x0;
    let mut r = f(&x)?;
    let mut rn = linalg::sup_norm(&r);
    let scale = 1.0 + linalg::sup_norm(&x);
    for _ in 0..40 {
        if rn <= 1e-15 * scale {
            return Ok(x);
        }
        let j = linalg::fd_jacobian(&f, &x, x.len())?;
        let dx = linalg::solve(&j, &r).ok_or(Error::NewtonDiverged { node, residual: rn })?;
        // A trial point where `f` fails counts as a rejected step.
        let trial = |lam: f64| {
            let cand = &x - &dx * lam;
            let rc = f(&cand).ok();
            let rcn = rc.as_ref().map_or(f64::INFINITY, linalg::sup_norm);
            (cand, rc, rcn)
        };
        let mut lam = 1.0;
        let (mut cand, mut rc, mut rcn) = trial(lam);
        if rcn >= rn && rn <= 1e-11 * scale {
            // Round-off floor reached.
            return Ok(x);
        }
        while rcn >= rn && lam > 1e-4 {
            lam *= 0.5;
            (cand, rc, rcn) = trial(lam);
        }
        let Some(rc) = rc else {
            return Err(Error::NewtonDiverged { node, residual: rn });
        };
        let small_step = lam * linalg::sup_norm(&dx) <= 1e-15 * scale;
        x = cand;
        r = rc;
        rn = rcn;
        if small_step {
            return Ok(x);
        }
    }
    if rn <= 1e-11 * scale {
        Ok(x)
    } else {
        Err(Error::NewtonDiverged { node, residual: rn })
    }
}
