//! Dormand–Prince 5(4) integrator for linear matrix ODEs `Y' = A(x) Y`.

use crate::error::{Error, Result};
use crate::linalg::{cr, CMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_steps: 200_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince step; returns the fifth-order value and the error estimate.
pub fn dp_step<F>(a: &F, x: f64, y: &CMat, h: f64) -> (CMat, CMat)
where
    F: Fn(f64) -> CMat,
{
    let f = |t: f64, v: &CMat| a(t) * v;
    let hc = cr(h);
    let k1 = f(x, y);
    let k2 = f(x + C[1] * h, &(y + &k1 * (hc * A2[0])));
    let k3 = f(x + C[2] * h, &(y + (&k1 * cr(A3[0]) + &k2 * cr(A3[1])) * hc));
    let k4 = f(
        x + C[3] * h,
        &(y + (&k1 * cr(A4[0]) + &k2 * cr(A4[1]) + &k3 * cr(A4[2])) * hc),
    );
    let k5 = f(
        x + C[4] * h,
        &(y + (&k1 * cr(A5[0]) + &k2 * cr(A5[1]) + &k3 * cr(A5[2]) + &k4 * cr(A5[3])) * hc),
    );
    let k6 = f(
        x + h,
        &(y + (&k1 * cr(A6[0]) + &k2 * cr(A6[1]) + &k3 * cr(A6[2]) + &k4 * cr(A6[3]) + &k5 * cr(A6[4])) * hc),
    );
    let incr = (&k1 * cr(B[0]) + &k3 * cr(B[2]) + &k4 * cr(B[3]) + &k5 * cr(B[4]) + &k6 * cr(B[5])) * hc;
    let y_new = y + incr;
    let k7 = f(x + h, &y_new);
    let err = (&k1 * cr(E[0])
        + &k3 * cr(E[2])
        + &k4 * cr(E[3])
        + &k5 * cr(E[4])
        + &k6 * cr(E[5])
        + &k7 * cr(E[6]))
        * hc;
    (y_new, err)
}

/// Accepted steps of an integration from `xs[0]` towards the last entry.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub xs: Vec<f64>,
    pub ys: Vec<CMat>,
}

impl Trajectory {
    pub fn start(&self) -> f64 {
        self.xs[0]
    }

    pub fn end(&self) -> f64 {
        *self.xs.last().expect("non-empty trajectory")
    }

    pub fn final_value(&self) -> &CMat {
        self.ys.last().expect("non-empty trajectory")
    }

    /// Value at `x` between the first and last node, by a single step
    /// from the closest preceding accepted node.
    pub fn eval<F>(&self, a: &F, x: f64) -> CMat
    where
        F: Fn(f64) -> CMat,
    {
        let forward = self.end() >= self.start();
        let k = if forward {
            self.xs.partition_point(|&t| t <= x)
        } else {
            self.xs.partition_point(|&t| t >= x)
        }
        .max(1)
            - 1;
        let k = k.min(self.xs.len() - 1);
        if self.xs[k] == x {
            return self.ys[k].clone();
        }
        dp_step(a, self.xs[k], &self.ys[k], x - self.xs[k]).0
    }
}

/// Integrates `Y' = A(x) Y` from `x_start` to `x_end` (either direction).
pub fn integrate<F>(a: &F, x_start: f64, y0: &CMat, x_end: f64, settings: &OdeSettings) -> Result<Trajectory>
where
    F: Fn(f64) -> CMat,
{
    let span = x_end - x_start;
    let mut xs = vec![x_start];
    let mut ys = vec![y0.clone()];
    if span == 0.0 {
        return Ok(Trajectory { xs, ys });
    }
    let dir = span.signum();
    let mut x = x_start;
    let mut y = y0.clone();
    let mut h = span / 16.0;
    let h_min = 1e-14 * (x_start.abs().max(x_end.abs()).max(1.0));
    let mut steps = 0usize;
    while (x_end - x) * dir > 0.0 {
        if steps >= settings.max_steps {
            return Err(Error::Integrator(format!(
                "step budget exhausted between {x_start} and {x_end}"
            )));
        }
        steps += 1;
        let last = (x + h - x_end) * dir >= 0.0;
        let h_try = if last { x_end - x } else { h };
        let (y_new, err) = dp_step(a, x, &y, h_try);
        let mut ratio: f64 = 0.0;
        for ((e, y0), y1) in err.iter().zip(y.iter()).zip(y_new.iter()) {
            let sc = settings.abs_tol + settings.rel_tol * y0.norm().max(y1.norm());
            ratio = ratio.max(e.norm() / sc);
        }
        if !ratio.is_finite() {
            return Err(Error::Integrator(format!("non-finite values near x = {x}")));
        }
        if ratio <= 1.0 {
            x = if last { x_end } else { x + h_try };
            y = y_new;
            xs.push(x);
            ys.push(y.clone());
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * factor;
        if h.abs() < h_min {
            return Err(Error::Integrator(format!("step size underflow near x = {x}")));
        }
    }
    Ok(Trajectory { xs, ys })
}
