//! Dormand-Prince 5(4) with Hairer's dense output and section events.

use crate::error::{Error, Result};

/// Right-hand side `dy = F(t, y)`, written into the output slice.
pub type Rhs<'a> = dyn Fn(f64, &[f64], &mut [f64]) -> Result<()> + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its dense-output polynomial.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    fn new(t0: f64, h: f64, y0: &[f64], y1: &[f64], k: &[Vec<f64>; 7]) -> Self {
        let n = y0.len();
        let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let dy = y1[i] - y0[i];
            let bspl = h * k[0][i] - dy;
            r[0][i] = y0[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k[6][i] - bspl;
            r[4][i] = h * (0..7).map(|s| D[s] * k[s][i]).sum::<f64>();
        }
        DenseStep { t0, h, r }
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolant at `t` (fourth-order accurate inside the step).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        (0..self.r[0].len())
            .map(|i| {
                self.r[0][i]
                    + th * (self.r[1][i]
                        + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])))
            })
            .collect()
    }
}

/// Accepted steps of one integration.
#[derive(Debug, Clone)]
pub struct Path {
    pub steps: Vec<DenseStep>,
    pub t_end: f64,
    pub y_end: Vec<f64>,
}

impl Path {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let forward = self.steps.first().map_or(true, |s| s.h > 0.0);
        let idx = self
            .steps
            .iter()
            .position(|s| if forward { t <= s.t1() } else { t >= s.t1() })
            .unwrap_or(self.steps.len().saturating_sub(1));
        match self.steps.get(idx) {
            Some(s) => s.eval(t),
            None => self.y_end.clone(),
        }
    }
}

struct Stepper<'a, 'b> {
    rhs: &'b Rhs<'a>,
    opts: OdeOptions,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y1: Vec<f64>,
}

impl<'a, 'b> Stepper<'a, 'b> {
    fn new(rhs: &'b Rhs<'a>, n: usize, opts: OdeOptions) -> Self {
        Stepper {
            rhs,
            opts,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y1: vec![0.0; n],
        }
    }

    /// Stages 2..7 from `k[0]`; fills `y1` and returns the scaled error norm.
    fn attempt(&mut self, t: f64, y: &[f64], h: f64) -> Result<f64> {
        let n = y.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            (self.rhs)(t + C[s] * h, &self.tmp, &mut self.k[s])?;
        }
        // Stage 7 was evaluated at the 5th-order solution.
        self.y1.copy_from_slice(&self.tmp);
        let mut err = 0.0;
        for i in 0..n {
            let e: f64 = h * (0..7).map(|s| E[s] * self.k[s][i]).sum::<f64>();
            let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(self.y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || self.y1.iter().any(|v| !v.is_finite()) {
            return Ok(f64::INFINITY);
        }
        Ok(err)
    }

    fn initial_step(&mut self, t: f64, y: &[f64], dir: f64) -> Result<f64> {
        let n = y.len();
        let sc: Vec<f64> = y.iter().map(|v| self.opts.atol + self.opts.rtol * v.abs()).collect();
        let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n as f64).sqrt();
        let d0 = norm(y);
        let d1 = norm(&self.k[0]);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..n {
            self.tmp[i] = y[i] + dir * h0 * self.k[0][i];
        }
        let mut f1 = vec![0.0; n];
        (self.rhs)(t + dir * h0, &self.tmp, &mut f1)?;
        let diff: Vec<f64> = f1.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(self.opts.h_max))
    }
}

/// Integrates from `t0` to `t_end` (either direction), keeping dense output.
pub fn integrate(rhs: &Rhs<'_>, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<Path> {
    let mut steps = Vec::new();
    let mut end = (t0, y0.to_vec());
    run(rhs, t0, y0, t_end, opts, |step, st| {
        steps.push(DenseStep::new(step.t0, step.h, step.y0, step.y1, &st.k));
        end = (step.t1, step.y1.to_vec());
        Ok(false)
    })?;
    Ok(Path {
        steps,
        t_end: end.0,
        y_end: end.1,
    })
}

/// Where an event function crossed zero.
#[derive(Debug, Clone)]
pub struct EventHit {
    pub t: f64,
    pub y: Vec<f64>,
    /// Event value at the refined point.
    pub residual: f64,
}

/// Integrates until `event` crosses zero in `direction` (+1 upward, -1 downward, 0 either)
/// at a time later than `t_min`, or fails with `NoReturn` at `t_cap`.
///
/// The crossing is refined by Illinois iteration on fresh partial steps from the start
/// of the bracketing step, so the landing point carries full fifth-order accuracy.
#[allow(clippy::too_many_arguments)]
pub fn integrate_to_event(
    rhs: &Rhs<'_>,
    t0: f64,
    y0: &[f64],
    t_cap: f64,
    event: &dyn Fn(&[f64]) -> f64,
    direction: f64,
    t_min: f64,
    opts: &OdeOptions,
) -> Result<EventHit> {
    let mut found = None;
    run(rhs, t0, y0, t_cap, opts, |step, st| {
        let g0 = event(step.y0);
        let g1 = event(step.y1);
        let crossed = match direction {
            d if d > 0.0 => g0 < 0.0 && g1 >= 0.0,
            d if d < 0.0 => g0 > 0.0 && g1 <= 0.0,
            _ => g0 != 0.0 && (g1 == 0.0 || g0.signum() != g1.signum()),
        };
        if !crossed || (step.t1 - t0).abs() < t_min {
            return Ok(false);
        }
        found = Some(refine(st, step, g0, g1, event)?);
        Ok(true)
    })?;
    found.ok_or(Error::NoReturn { t_cap })
}

struct StepInfo<'s> {
    t0: f64,
    h: f64,
    t1: f64,
    y0: &'s [f64],
    y1: &'s [f64],
    k1: &'s [f64],
}

fn refine(
    st: &mut Stepper<'_, '_>,
    step: &StepInfo<'_>,
    g0: f64,
    g1: f64,
    event: &dyn Fn(&[f64]) -> f64,
) -> Result<EventHit> {
    let (mut a, mut ga) = (0.0_f64, g0);
    let (mut b, mut gb) = (1.0_f64, g1);
    let mut best = (1.0, step.y1.to_vec(), g1);
    let mut side = 0i32;
    for _ in 0..100 {
        let th = (a * gb - b * ga) / (gb - ga);
        let th = if th.is_finite() && th > a && th < b { th } else { 0.5 * (a + b) };
        st.k[0].copy_from_slice(step.k1);
        st.attempt(step.t0, step.y0, th * step.h)?;
        let y = st.y1.clone();
        let g = event(&y);
        best = (th, y, g);
        if g == 0.0 || (b - a) * step.h.abs() <= 1e-15 * (1.0 + step.t0.abs()) {
            break;
        }
        if g.signum() == gb.signum() {
            b = th;
            gb = g;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = th;
            ga = g;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
        if g.abs() <= 1e-15 {
            break;
        }
    }
    Ok(EventHit {
        t: step.t0 + best.0 * step.h,
        y: best.1,
        residual: best.2,
    })
}

fn run(
    rhs: &Rhs<'_>,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut on_step: impl FnMut(&StepInfo<'_>, &mut Stepper<'_, '_>) -> Result<bool>,
) -> Result<()> {
    let n = y0.len();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut st = Stepper::new(rhs, n, *opts);
    let mut t = t0;
    let mut y = y0.to_vec();
    if t == t_end {
        return Ok(());
    }
    rhs(t, &y, &mut st.k[0])?;
    let mut h = st.initial_step(t, &y, dir)?;
    let mut k1 = st.k[0].clone();
    let mut fac_old: f64 = 1e-4;
    for _ in 0..opts.max_steps {
        let remaining = (t_end - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        if hs <= 4.0 * f64::EPSILON * t.abs().max(1.0) && !last {
            return Err(Error::StepFailure { t, h: hs });
        }
        st.k[0].copy_from_slice(&k1);
        let err = st.attempt(t, &y, dir * hs)?;
        if err <= 1.0 {
            let y1 = st.y1.clone();
            let t1 = if last { t_end } else { t + dir * hs };
            let info = StepInfo {
                t0: t,
                h: dir * hs,
                t1,
                y0: &y,
                y1: &y1,
                k1: &k1,
            };
            // FSAL: stage 7 is the derivative at the new point.
            let k7 = st.k[6].clone();
            if on_step(&info, &mut st)? {
                return Ok(());
            }
            t = t1;
            y = y1;
            k1 = k7;
            if last {
                return Ok(());
            }
            // Lund-stabilised step control.
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * fac_old.powf(0.04)).clamp(0.2, 10.0);
            fac_old = err.max(1e-4);
            h = (hs * fac).min(opts.h_max);
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h = hs * if err.is_finite() { fac } else { 0.2 };
            if h <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepFailure { t, h });
            }
        }
    }
    Err(Error::StepFailure { t, h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rot(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = -y[1];
        dy[1] = y[0];
        Ok(())
    }

    #[test]
    fn rotation_after_one_period() {
        let p = integrate(&rot, 0.0, &[1.0, 0.0], 2.0 * std::f64::consts::PI, &OdeOptions::default()).unwrap();
        assert_abs_diff_eq!(p.y_end[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y_end[1], 0.0, epsilon = 1e-9);
        let mid = p.eval(1.0);
        assert_abs_diff_eq!(mid[0], 1f64.cos(), epsilon = 1e-8);
        assert_abs_diff_eq!(mid[1], 1f64.sin(), epsilon = 1e-8);
    }

    #[test]
    fn backward_integration_returns() {
        let o = OdeOptions::default();
        let fwd = integrate(&rot, 0.0, &[0.3, -0.2], 5.0, &o).unwrap();
        let back = integrate(&rot, 5.0, &fwd.y_end, 0.0, &o).unwrap();
        assert_abs_diff_eq!(back.y_end[0], 0.3, epsilon = 1e-8);
        assert_abs_diff_eq!(back.y_end[1], -0.2, epsilon = 1e-8);
    }

    #[test]
    fn event_finds_half_period() {
        let hit = integrate_to_event(&rot, 0.0, &[1.0, 0.0], 20.0, &|y| y[1], -1.0, 0.1, &OdeOptions::default()).unwrap();
        assert_abs_diff_eq!(hit.t, std::f64::consts::PI, epsilon = 1e-10);
        assert!(hit.residual.abs() < 1e-12);
    }

    #[test]
    fn exponential_growth_accuracy() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[0];
            Ok(())
        };
        let p = integrate(&f, 0.0, &[1.0], 1.0, &OdeOptions::default()).unwrap();
        assert_abs_diff_eq!(p.y_end[0], std::f64::consts::E, epsilon = 1e-9);
    }
}
