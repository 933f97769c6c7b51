//! Fast-slow maps in the general form `z -> z + N(z) f(z) + eps G(z, eps)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_num;
use crate::linalg::{self, Matrix, Vector};

pub type VecFn = Arc<dyn Fn(&Vector) -> Result<Vector> + Send + Sync>;
pub type MatFn = Arc<dyn Fn(&Vector) -> Result<Matrix> + Send + Sync>;
pub type EpsVecFn = Arc<dyn Fn(&Vector, f64) -> Result<Vector> + Send + Sync>;
pub type EpsMatFn = Arc<dyn Fn(&Vector, f64) -> Result<Matrix> + Send + Sync>;

/// Default on-manifold tolerance for `|f(z)|`.
pub const ON_MANIFOLD_TOL: f64 = 1e-10;

/// Splits phase space into graph parameters `x` (k of them) and graph values `y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chart {
    pub param: Vec<usize>,
    pub graph: Vec<usize>,
}

impl Chart {
    /// First `k` coordinates are parameters.
    pub fn standard(n: usize, k: usize) -> Self {
        Chart {
            param: (0..k).collect(),
            graph: (k..n).collect(),
        }
    }

    pub fn new(param: Vec<usize>, graph: Vec<usize>) -> Self {
        Chart { param, graph }
    }

    fn validate(&self, n: usize, k: usize) -> Result<()> {
        let mut seen = vec![false; n];
        if self.param.len() != k || self.graph.len() != n - k {
            return Err(Error::Dimension(format!(
                "chart has {} parameters and {} graph coordinates, expected {k} and {}",
                self.param.len(),
                self.graph.len(),
                n - k
            )));
        }
        for &i in self.param.iter().chain(&self.graph) {
            if i >= n || seen[i] {
                return Err(Error::Dimension(format!("chart index {i} invalid")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    pub fn x_of(&self, z: &Vector) -> Vector {
        Vector::from_iterator(self.param.len(), self.param.iter().map(|&i| z[i]))
    }

    pub fn y_of(&self, z: &Vector) -> Vector {
        Vector::from_iterator(self.graph.len(), self.graph.iter().map(|&i| z[i]))
    }

    pub fn join(&self, x: &Vector, y: &Vector) -> Vector {
        let mut z = Vector::zeros(self.param.len() + self.graph.len());
        for (a, &i) in self.param.iter().enumerate() {
            z[i] = x[a];
        }
        for (b, &i) in self.graph.iter().enumerate() {
            z[i] = y[b];
        }
        z
    }

    /// Columns of `m` belonging to the graph coordinates.
    pub fn graph_columns(&self, m: &Matrix) -> Matrix {
        m.select_columns(self.graph.iter())
    }

    pub fn param_columns(&self, m: &Matrix) -> Matrix {
        m.select_columns(self.param.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn contains(&self, z: &Vector) -> bool {
        z.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[derive(Clone)]
pub struct FastSlowMap {
    name: String,
    n: usize,
    k: usize,
    n_fn: MatFn,
    f_fn: VecFn,
    g_fn: EpsVecFn,
    df_fn: Option<MatFn>,
    jac_fn: Option<EpsMatFn>,
    step_fn: Option<EpsVecFn>,
    domain: Option<DomainBox>,
    chart: Chart,
    on_manifold_tol: f64,
}

impl fmt::Debug for FastSlowMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FastSlowMap")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("k", &self.k)
            .field("chart", &self.chart)
            .field("analytic_df", &self.df_fn.is_some())
            .field("analytic_jacobian", &self.jac_fn.is_some())
            .finish()
    }
}

impl FastSlowMap {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        k: usize,
        n_fn: MatFn,
        f_fn: VecFn,
        g_fn: EpsVecFn,
    ) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::Dimension(format!("need 0 < k < n, got n={n}, k={k}")));
        }
        Ok(FastSlowMap {
            name: name.into(),
            n,
            k,
            n_fn,
            f_fn,
            g_fn,
            df_fn: None,
            jac_fn: None,
            step_fn: None,
            domain: None,
            chart: Chart::standard(n, k),
            on_manifold_tol: ON_MANIFOLD_TOL,
        })
    }

    pub fn with_df(mut self, df: MatFn) -> Self {
        self.df_fn = Some(df);
        self
    }

    /// Analytic Jacobian of the full map in `z`.
    pub fn with_jacobian(mut self, jac: EpsMatFn) -> Self {
        self.jac_fn = Some(jac);
        self
    }

    /// Replaces `z + N f + eps G` by a direct evaluator that must agree with it.
    pub fn with_step(mut self, step: EpsVecFn) -> Self {
        self.step_fn = Some(step);
        self
    }

    pub fn with_domain(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != self.n || hi.len() != self.n {
            return Err(Error::Dimension("domain box".into()));
        }
        self.domain = Some(DomainBox { lo, hi });
        Ok(self)
    }

    pub fn with_chart(mut self, chart: Chart) -> Result<Self> {
        chart.validate(self.n, self.k)?;
        self.chart = chart;
        Ok(self)
    }

    pub fn with_on_manifold_tol(mut self, tol: f64) -> Self {
        self.on_manifold_tol = tol;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of fast directions, `n - k`.
    pub fn m(&self) -> usize {
        self.n - self.k
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn domain(&self) -> Option<&DomainBox> {
        self.domain.as_ref()
    }

    pub fn on_manifold_tol(&self) -> f64 {
        self.on_manifold_tol
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac_fn.is_some()
    }

    fn check_dim(&self, z: &Vector) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, map has n={}",
                z.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn n_matrix(&self, z: &Vector) -> Result<Matrix> {
        self.check_dim(z)?;
        let m = (self.n_fn)(z)?;
        if m.nrows() != self.n || m.ncols() != self.m() {
            return Err(Error::Dimension("N(z) shape".into()));
        }
        Ok(m)
    }

    pub fn f(&self, z: &Vector) -> Result<Vector> {
        self.check_dim(z)?;
        let v = (self.f_fn)(z)?;
        linalg::check_finite(&v, "f")?;
        Ok(v)
    }

    pub fn g(&self, z: &Vector, eps: f64) -> Result<Vector> {
        self.check_dim(z)?;
        let v = (self.g_fn)(z, eps)?;
        linalg::check_finite(&v, "G")?;
        Ok(v)
    }

    pub fn f_fn(&self) -> &VecFn {
        &self.f_fn
    }

    /// `Df(z)`, analytic when registered.
    pub fn df(&self, z: &Vector) -> Result<Matrix> {
        self.check_dim(z)?;
        match &self.df_fn {
            Some(df) => df(z),
            None => linalg::fd_jacobian(|p| (self.f_fn)(p), z, self.m()),
        }
    }

    /// `Df(z) N(z)`, the (n-k)x(n-k) matrix whose spectrum carries the fast multipliers.
    pub fn dfn(&self, z: &Vector) -> Result<Matrix> {
        Ok(self.df(z)? * self.n_matrix(z)?)
    }

    /// `I_n + N(z) Df(z)`.
    pub fn layer_matrix(&self, z: &Vector) -> Result<Matrix> {
        Ok(Matrix::identity(self.n, self.n) + self.n_matrix(z)? * self.df(z)?)
    }

    pub fn evaluate(&self, z: &Vector, eps: f64) -> Result<Vector> {
        self.check_dim(z)?;
        let out = match &self.step_fn {
            Some(step) => step(z, eps)?,
            None => {
                let mut out = z + self.n_matrix(z)? * self.f(z)?;
                if eps != 0.0 {
                    out += self.g(z, eps)? * eps;
                }
                out
            }
        };
        linalg::check_finite(&out, "evaluate")?;
        Ok(out)
    }

    pub fn jacobian(&self, z: &Vector, eps: f64) -> Result<Matrix> {
        self.check_dim(z)?;
        match &self.jac_fn {
            Some(j) => j(z, eps),
            None => self.jacobian_fd(z, eps),
        }
    }

    pub fn jacobian_fd(&self, z: &Vector, eps: f64) -> Result<Matrix> {
        linalg::fd_jacobian(|p| self.evaluate(p, eps), z, self.n)
    }

    /// `|f(z)|_inf`, or `NotOnManifold` above the map's tolerance.
    pub fn on_manifold(&self, z: &Vector) -> Result<f64> {
        let r = linalg::sup_norm(&self.f(z)?);
        if r > self.on_manifold_tol {
            return Err(Error::NotOnManifold { residual: r });
        }
        Ok(r)
    }

    /// Smallest singular values of `N(z)` and `Df(z)`.
    pub fn rank_margins(&self, z: &Vector) -> Result<(f64, f64)> {
        Ok((
            linalg::min_singular_value(&self.n_matrix(z)?),
            linalg::min_singular_value(&self.df(z)?),
        ))
    }

    pub fn in_domain(&self, z: &Vector) -> bool {
        self.domain.as_ref().map_or(true, |d| d.contains(z))
    }

    /// Iterates `steps` times, stopping at the first point outside the domain box.
    pub fn iterate(&self, z0: &Vector, eps: f64, steps: usize) -> Result<Trajectory> {
        self.check_dim(z0)?;
        let mut traj = Trajectory::new(self.name.clone(), eps, z0.clone());
        if !self.in_domain(z0) {
            traj.exit_index = Some(0);
            return Ok(traj);
        }
        let mut z = z0.clone();
        for i in 1..=steps {
            z = self.evaluate(&z, eps)?;
            traj.push(z.clone());
            if !self.in_domain(&z) {
                traj.exit_index = Some(i);
                break;
            }
        }
        Ok(traj)
    }

    /// Solves `H(z, eps) = target` by damped Newton starting at `guess`.
    pub fn inverse_step(&self, target: &Vector, eps: f64, guess: &Vector) -> Result<Vector> {
        let tol = 1e-13 * (1.0 + linalg::sup_norm(target));
        let mut z = guess.clone();
        let mut r = self.evaluate(&z, eps)? - target;
        let mut rn = r.norm();
        for _ in 0..50 {
            if linalg::sup_norm(&r) <= tol {
                return Ok(z);
            }
            let j = self.jacobian(&z, eps)?;
            let dz = linalg::solve(&j, &r).ok_or(Error::NewtonDiverged { node: 0, residual: rn })?;
            let mut lam = 1.0;
            loop {
                let cand = &z - &dz * lam;
                if let Ok(hc) = self.evaluate(&cand, eps) {
                    let rc = hc - target;
                    if rc.norm() < rn || lam < 1e-4 {
                        z = cand;
                        r = rc;
                        rn = r.norm();
                        break;
                    }
                }
                lam *= 0.5;
                if lam < 1e-4 {
                    return Err(Error::NewtonDiverged { node: 0, residual: rn });
                }
            }
        }
        if linalg::sup_norm(&r) <= tol * 100.0 {
            Ok(z)
        } else {
            Err(Error::NewtonDiverged { node: 0, residual: rn })
        }
    }
}

/// An orbit segment with per-point annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: String,
    pub eps: f64,
    pub points: Vec<Vector>,
    /// Distance to a slow manifold, filled by `annotate`.
    pub dist_to_slow: Vec<Option<f64>>,
    /// Index of the first point outside the domain box.
    pub exit_index: Option<usize>,
}

impl Trajectory {
    pub fn new(model: String, eps: f64, z0: Vector) -> Self {
        Trajectory {
            model,
            eps,
            points: vec![z0],
            dist_to_slow: vec![None],
            exit_index: None,
        }
    }

    fn push(&mut self, z: Vector) {
        self.points.push(z);
        self.dist_to_slow.push(None);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> &Vector {
        self.points.last().expect("trajectory holds at least z0")
    }

    /// Coordinate `i` along the orbit.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[i]).collect()
    }

    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.len());
        let mut out = String::new();
        out.push_str("# schema: 1\n");
        out.push_str(&format!("# model: {}\n# eps: {}\n", self.model, fmt_num(self.eps)));
        out.push_str("step");
        for i in 0..n {
            out.push_str(&format!(",z_{i}"));
        }
        out.push_str(",dist_to_S_eps,flags\n");
        for (s, p) in self.points.iter().enumerate() {
            out.push_str(&s.to_string());
            for v in p.iter() {
                out.push(',');
                out.push_str(&fmt_num(*v));
            }
            out.push(',');
            if let Some(d) = self.dist_to_slow[s] {
                out.push_str(&fmt_num(d));
            }
            out.push(',');
            if self.exit_index == Some(s) {
                out.push_str("domain_exit");
            }
            out.push('\n');
        }
        out
    }
}
