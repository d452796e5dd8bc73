//! Ready-made problems: the two worked examples, a Dirichlet Sturm–Liouville
//! system, a Krein string with one point mass and the free half-line.

use crate::error::Result;
use crate::ivp::SpectralProblem;
use crate::linalg::{c, cr, real_matrix, CMat, C64};
use crate::measures::{Atom, MatrixMeasure, RealInterval};

/// A problem together with a boundary matrix `Ã` acting on `(u(a); u(b))`.
#[derive(Debug, Clone)]
pub struct Configured {
    pub problem: SpectralProblem,
    pub boundary: CMat,
}

/// `J = [[0, −1], [1, 0]]`.
pub fn symplectic() -> CMat {
    real_matrix(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

fn scalar(z: C64) -> CMat {
    CMat::from_element(1, 1, z)
}

/// `J = i`, `q = 0`, `w = δ₀` on ℝ with the coupled condition `u(∞) = γ u(−∞)`.
pub fn example_one(gamma: C64, x0: f64) -> Result<Configured> {
    let line = RealInterval::real_line();
    let w = MatrixMeasure::new(1, 1, line, vec![], vec![Atom::new(0.0, scalar(cr(1.0)))])?;
    let q = MatrixMeasure::zero(1, 1, line);
    let problem = SpectralProblem::new(scalar(c(0.0, 1.0)), q, w, x0)?;
    let boundary = CMat::from_row_slice(1, 2, &[-gamma, cr(1.0)]);
    Ok(Configured { problem, boundary })
}

/// `λ₀ = 2i(γ − 1)/(γ + 1)`, the eigenvalue of [`example_one`].
pub fn example_one_eigenvalue(gamma: C64) -> C64 {
    c(0.0, 2.0) * (gamma - cr(1.0)) / (gamma + cr(1.0))
}

/// The `γ` for which [`example_one`] has eigenvalue `λ₀`.
pub fn example_one_gamma(lambda0: f64) -> C64 {
    // γ = (2i + λ₀)/(2i − λ₀)
    (c(0.0, 2.0) + cr(lambda0)) / (c(0.0, 2.0) - cr(lambda0))
}

/// `J = [[0,−1],[1,0]]`, `q = 0`, `w = diag(1, 0)·dx` on `(0, b)` with
/// `γ u₁(b) + u₂(b) − u₂(0) = 0`.
pub fn example_two(b: f64, x0: f64, gamma: f64) -> Result<Configured> {
    let iv = RealInterval::new(0.0, b)?;
    let w = MatrixMeasure::uniform(iv, 0.0, b, real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]))?;
    let q = MatrixMeasure::zero(2, 2, iv);
    let problem = SpectralProblem::new(symplectic(), q, w, x0)?;
    let boundary = real_matrix(1, 4, &[0.0, -1.0, gamma, 1.0]);
    Ok(Configured { problem, boundary })
}

/// `−y″ = λy` on `(0, len)` as the system `u = (y, y′)`, Dirichlet at both ends.
pub fn dirichlet_sturm_liouville(len: f64) -> Result<Configured> {
    let iv = RealInterval::new(0.0, len)?;
    let w = MatrixMeasure::uniform(iv, 0.0, len, real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]))?;
    let q = MatrixMeasure::uniform(iv, 0.0, len, real_matrix(2, 2, &[0.0, 0.0, 0.0, -1.0]))?;
    let problem = SpectralProblem::new(symplectic(), q, w, 0.0)?;
    let boundary = real_matrix(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    Ok(Configured { problem, boundary })
}

/// String `−y″ = λ m δ_c y` on `(0, len)` with fixed ends.
///
/// The only mass is the atom, so one combination of solutions carries no
/// weight and a single boundary row remains: `(len − c) u₁(0) + c u₁(len) = 0`.
pub fn krein_string(mass: f64, at: f64, len: f64) -> Result<Configured> {
    let iv = RealInterval::new(0.0, len)?;
    let w = MatrixMeasure::new(
        2,
        2,
        iv,
        vec![],
        vec![Atom::new(at, real_matrix(2, 2, &[mass, 0.0, 0.0, 0.0]))],
    )?;
    let q = MatrixMeasure::uniform(iv, 0.0, len, real_matrix(2, 2, &[0.0, 0.0, 0.0, -1.0]))?;
    let problem = SpectralProblem::new(symplectic(), q, w, 0.0)?;
    let boundary = real_matrix(1, 4, &[len - at, 0.0, at, 0.0]);
    Ok(Configured { problem, boundary })
}

/// `−y″ = λy` on `(0, ∞)` anchored at `0`.
pub fn free_half_line() -> Result<SpectralProblem> {
    let iv = RealInterval::new(0.0, f64::INFINITY)?;
    let w = MatrixMeasure::uniform(iv, 0.0, f64::INFINITY, real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]))?;
    let q = MatrixMeasure::uniform(iv, 0.0, f64::INFINITY, real_matrix(2, 2, &[0.0, 0.0, 0.0, -1.0]))?;
    SpectralProblem::new(symplectic(), q, w, 0.0)
}
