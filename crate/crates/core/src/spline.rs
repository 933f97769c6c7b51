//! Not-a-knot cubic splines and their tensor products on rectangular grids.

/// Interpolating spline through `(x_i, y_i)`, `x` strictly increasing.
///
/// Cubic with not-a-knot ends for four or more nodes, piecewise linear below that.
/// Outside the node range the end pieces are extended.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // Second derivatives at the nodes; empty for the linear fallback.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "spline node/value length mismatch");
        assert!(!x.is_empty(), "spline needs at least one node");
        let m = if x.len() >= 4 { second_derivatives(&x, &y) } else { Vec::new() };
        CubicSpline { x, y, m }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        let i = self.x.partition_point(|&xi| xi <= t);
        i.saturating_sub(1).min(n - 2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).1
    }

    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        if n == 1 {
            return (self.y[0], 0.0);
        }
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let s = t - self.x[i];
        let slope = (self.y[i + 1] - self.y[i]) / h;
        if self.m.is_empty() {
            return (self.y[i] + slope * s, slope);
        }
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let b = slope - h * (2.0 * m0 + m1) / 6.0;
        let c = 0.5 * m0;
        let d = (m1 - m0) / (6.0 * h);
        (
            self.y[i] + s * (b + s * (c + s * d)),
            b + s * (2.0 * c + 3.0 * s * d),
        )
    }
}

fn second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    // Unknowns M_1..M_{n-2}; the ends follow from third-derivative continuity.
    let sz = n - 2;
    let mut sub = vec![0.0; sz];
    let mut diag = vec![0.0; sz];
    let mut sup = vec![0.0; sz];
    let mut rhs = vec![0.0; sz];
    for r in 0..sz {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    let (h0, h1) = (h[0], h[1]);
    diag[0] = 3.0 * h0 + 2.0 * h1 + h0 * h0 / h1;
    sup[0] = h1 - h0 * h0 / h1;
    let (ha, hb) = (h[n - 3], h[n - 2]);
    sub[sz - 1] = ha - hb * hb / ha;
    diag[sz - 1] = 2.0 * ha + 3.0 * hb + hb * hb / ha;
    if sz == 2 {
        // Both rows were rewritten; solve the 2x2 system directly.
        let det = diag[0] * diag[1] - sup[0] * sub[1];
        let m1 = (rhs[0] * diag[1] - sup[0] * rhs[1]) / det;
        let m2 = (diag[0] * rhs[1] - sub[1] * rhs[0]) / det;
        return finish(vec![m1, m2], &h);
    }
    // Thomas algorithm.
    for r in 1..sz {
        let w = sub[r] / diag[r - 1];
        diag[r] -= w * sup[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    let mut inner = vec![0.0; sz];
    inner[sz - 1] = rhs[sz - 1] / diag[sz - 1];
    for r in (0..sz - 1).rev() {
        inner[r] = (rhs[r] - sup[r] * inner[r + 1]) / diag[r];
    }
    finish(inner, &h)
}

fn finish(inner: Vec<f64>, h: &[f64]) -> Vec<f64> {
    let sz = inner.len();
    let nh = h.len();
    let m0 = inner[0] * (1.0 + h[0] / h[1]) - inner[1] * h[0] / h[1];
    let ml = inner[sz - 1] * (1.0 + h[nh - 1] / h[nh - 2]) - inner[sz - 2] * h[nh - 1] / h[nh - 2];
    let mut m = Vec::with_capacity(sz + 2);
    m.push(m0);
    m.extend(inner);
    m.push(ml);
    m
}

/// Tensor-product spline of a scalar field sampled on a rectangular grid.
///
/// Values are stored row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpline {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
    line: Option<CubicSpline>,
}

impl GridSpline {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        let total: usize = axes.iter().map(|a| a.len()).product();
        assert_eq!(total, values.len(), "grid/value size mismatch");
        let line = (axes.len() == 1).then(|| CubicSpline::new(axes[0].clone(), values.clone()));
        GridSpline { axes, values, line }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.line {
            Some(s) => s.eval(x[0]),
            None => eval_rec(&self.axes, &self.values, x),
        }
    }

    /// Partial derivative along `axis`.
    pub fn partial(&self, x: &[f64], axis: usize) -> f64 {
        if let Some(s) = &self.line {
            return s.derivative(x[0]);
        }
        let h = 1e-6 * (1.0 + x[axis].abs());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[axis] += h;
        xm[axis] -= h;
        (self.eval(&xp) - self.eval(&xm)) / (2.0 * h)
    }
}

fn eval_rec(axes: &[Vec<f64>], values: &[f64], x: &[f64]) -> f64 {
    if axes.len() == 1 {
        return CubicSpline::new(axes[0].clone(), values.to_vec()).eval(x[0]);
    }
    let stride: usize = axes[1..].iter().map(|a| a.len()).product();
    let line: Vec<f64> = (0..axes[0].len())
        .map(|i| eval_rec(&axes[1..], &values[i * stride..(i + 1) * stride], &x[1..]))
        .collect();
    CubicSpline::new(axes[0].clone(), line).eval(x[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cubic(t: f64) -> f64 {
        0.3 - 1.2 * t + 0.7 * t * t - 0.25 * t * t * t
    }

    #[test]
    fn reproduces_cubics_exactly() {
        let x: Vec<f64> = (0..7).map(|i| (i as f64).powf(1.3) * 0.4).collect();
        let y: Vec<f64> = x.iter().map(|&t| cubic(t)).collect();
        let s = CubicSpline::new(x, y);
        for t in [-0.5, 0.0, 0.13, 1.1, 2.9, 3.7, 4.5] {
            assert_abs_diff_eq!(s.eval(t), cubic(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn four_nodes_are_a_single_cubic() {
        let x = vec![0.0, 1.0, 2.5, 3.0];
        let y: Vec<f64> = x.iter().map(|&t| cubic(t)).collect();
        let s = CubicSpline::new(x, y);
        assert_abs_diff_eq!(s.eval(1.7), cubic(1.7), epsilon = 1e-12);
        assert_abs_diff_eq!(s.derivative(0.4), -1.2 + 1.4 * 0.4 - 0.75 * 0.16, epsilon = 1e-12);
    }

    #[test]
    fn linear_fallback_below_four_nodes() {
        let s = CubicSpline::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]);
        assert_abs_diff_eq!(s.eval(0.5), 1.0);
        assert_abs_diff_eq!(s.eval(3.0), -2.0);
        let c = CubicSpline::new(vec![1.0], vec![4.0]);
        assert_abs_diff_eq!(c.eval(-3.0), 4.0);
    }

    #[test]
    fn tensor_product_is_exact_for_bicubics() {
        let ax: Vec<f64> = (0..6).map(|i| i as f64 * 0.2).collect();
        let ay: Vec<f64> = (0..5).map(|i| -1.0 + i as f64 * 0.5).collect();
        let f = |a: f64, b: f64| a * a * b - 2.0 * b * b * b + a;
        let mut vals = Vec::new();
        for &a in &ax {
            for &b in &ay {
                vals.push(f(a, b));
            }
        }
        let g = GridSpline::new(vec![ax, ay], vals);
        assert_abs_diff_eq!(g.eval(&[0.37, 0.21]), f(0.37, 0.21), epsilon = 1e-12);
        assert_abs_diff_eq!(g.partial(&[0.5, 0.3], 1), 0.25 - 6.0 * 0.09, epsilon = 1e-6);
    }
}
