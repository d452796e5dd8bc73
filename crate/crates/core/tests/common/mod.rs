#![allow(dead_code)]

pub mod random;
pub mod sweep;

use std::sync::Arc;

use balanced_spectral::ivp::{SpectralProblem, VectorFn};
use balanced_spectral::linalg::{real_matrix, CMat, CVec, C64};
use balanced_spectral::measures::{Atom, Density, MatrixMeasure, Piece, RealInterval};
use balanced_spectral::problems::symplectic;

/// `y(len)` for `−y″ = λy`, `y(0) = 0`, `y′(0) = 1`, by classical RK4 with a fixed step.
pub fn shoot_dirichlet(lambda: f64, len: f64, steps: usize) -> f64 {
    let h = len / steps as f64;
    let (mut y, mut z) = (0.0f64, 1.0f64);
    let f = |y: f64, z: f64| (z, -lambda * y);
    for _ in 0..steps {
        let (k1y, k1z) = f(y, z);
        let (k2y, k2z) = f(y + 0.5 * h * k1y, z + 0.5 * h * k1z);
        let (k3y, k3z) = f(y + 0.5 * h * k2y, z + 0.5 * h * k2z);
        let (k4y, k4z) = f(y + h * k3y, z + h * k3z);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    }
    y
}

/// Dirichlet eigenvalues of `−y″ = λy` on `(0, len)` inside `[lo, hi]`: sign
/// changes of the shooting function on a fine grid, then bisection.
pub fn shooting_eigenvalues(len: f64, lo: f64, hi: f64) -> Vec<f64> {
    let steps = 4000;
    let g = |l: f64| shoot_dirichlet(l, len, steps);
    let n = 2000;
    let mut out = Vec::new();
    let mut prev_x = lo;
    let mut prev = g(lo);
    for k in 1..=n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        let v = g(x);
        if prev == 0.0 {
            out.push(prev_x);
        } else if prev * v < 0.0 {
            let (mut a, mut b, mut fa) = (prev_x, x, prev);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                let fm = g(m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev_x = x;
        prev = v;
    }
    out
}

/// A 2×2 problem on `(0, 2)` with atoms in both `w` and `q` and a callable density.
pub fn problem_with_atoms(x0: f64) -> SpectralProblem {
    let iv = RealInterval::new(0.0, 2.0).unwrap();
    let w = MatrixMeasure::new(
        2,
        2,
        iv,
        vec![Piece::new(0.0, 2.0, Density::constant(real_matrix(2, 2, &[1.0, 0.2, 0.2, 0.5])))],
        vec![Atom::new(0.7, real_matrix(2, 2, &[0.8, 0.0, 0.0, 0.3]))],
    )
    .unwrap();
    let q = MatrixMeasure::new(
        2,
        2,
        iv,
        vec![Piece::new(
            0.0,
            2.0,
            Density::Callable(Arc::new(|x: f64| real_matrix(2, 2, &[x.cos(), 0.1, 0.1, -1.0]))),
        )],
        vec![Atom::new(1.3, real_matrix(2, 2, &[0.5, -0.4, -0.4, 0.2]))],
    )
    .unwrap();
    SpectralProblem::new(symplectic(), q, w, x0).unwrap()
}

pub fn vector_fn<F>(f: F) -> VectorFn
where
    F: Fn(f64) -> Vec<C64> + Send + Sync + 'static,
{
    Arc::new(move |x| CVec::from_vec(f(x)))
}

pub fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
