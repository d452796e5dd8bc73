//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Builds a complex matrix from real row-major data.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| cr(data[i * cols + j]))
}

/// Builds a complex matrix from row-major data.
pub fn complex_matrix(rows: usize, cols: usize, data: &[C64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| data[i * cols + j])
}

pub fn diag_real(d: &[f64]) -> CMat {
    let n = d.len();
    CMat::from_fn(n, n, |i, j| if i == j { cr(d[i]) } else { C64::new(0.0, 0.0) })
}

/// Entrywise ℓ¹ norm `|A|₁ = Σ|a_ij|`.
pub fn norm1(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol * (1.0 + max_abs(m))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    SVD::new(m.clone(), false, false).singular_values.iter().copied().collect()
}

/// Numerical rank: singular values above `rel_tol · σ_max` (and above `abs_floor`).
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

fn padded_square(m: &CMat) -> CMat {
    let k = m.nrows().max(m.ncols());
    let mut out = zeros(k, k);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn null_space(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    let sq = padded_square(m);
    let svd = SVD::new(sq, false, true);
    let vt = svd.v_t.expect("requested V");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cols: Vec<CVec> = (0..sv.len())
        .filter(|&k| smax == 0.0 || sv[k] <= rel_tol * smax)
        .map(|k| vt.row(k).adjoint().rows(0, n).into_owned())
        .collect();
    if cols.is_empty() {
        return zeros(n, 0);
    }
    CMat::from_columns(&cols)
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn range_basis(m: &CMat, rel_tol: f64) -> CMat {
    let r = m.nrows();
    if m.ncols() == 0 || r == 0 {
        return zeros(r, 0);
    }
    let sq = padded_square(m);
    let svd = SVD::new(sq, true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cols: Vec<CVec> = (0..sv.len())
        .filter(|&k| smax > 0.0 && sv[k] > rel_tol * smax)
        .map(|k| u.column(k).rows(0, r).into_owned())
        .collect();
    if cols.is_empty() {
        return zeros(r, 0);
    }
    CMat::from_columns(&cols)
}

/// Orthogonal projector `Q Q*` onto the span of the orthonormal columns of `q`.
pub fn projector(q: &CMat, n: usize) -> CMat {
    if q.ncols() == 0 {
        return zeros(n, n);
    }
    q * q.adjoint()
}

/// Solves `a x = b` by LU; `None` when `a` is singular.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

/// Reciprocal condition number `σ_min / σ_max` (0 for the zero matrix).
pub fn rcond(a: &CMat) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * cr(0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigenvalues of a general complex square matrix.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    match m.clone().try_schur(1e-15, 10_000) {
        Some(schur) => {
            let (_, t) = schur.unpack();
            (0..t.nrows()).map(|i| t[(i, i)]).collect()
        }
        None => Vec::new(),
    }
}

/// Roots of the polynomial `Σ coeffs[k] z^k` (trailing zero coefficients dropped).
pub fn polynomial_roots(coeffs: &[C64], zero_tol: f64) -> Vec<C64> {
    let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= zero_tol * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let mut companion = zeros(deg, deg);
    for k in 0..deg {
        companion[(0, k)] = -coeffs[deg - 1 - k] / lead;
    }
    for k in 1..deg {
        companion[(k, k - 1)] = cr(1.0);
    }
    let mut roots = eigenvalues(&companion);
    // one Newton polish per root
    for r in roots.iter_mut() {
        let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for k in (0..=deg).rev() {
            dp = dp * *r + p;
            p = p * *r + coeffs[k];
        }
        if dp.norm() > 0.0 {
            let step = p / dp;
            if step.norm() < 1e-6 * (1.0 + r.norm()) {
                *r -= step;
            }
        }
    }
    roots
}

pub fn determinant(m: &CMat) -> C64 {
    if m.nrows() == 0 {
        return cr(1.0);
    }
    m.clone().determinant()
}

/// Block diagonal `diag(a, b)`.
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (r1, c1) = a.shape();
    let (r2, c2) = b.shape();
    let mut out = zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((r1, c1), (r2, c2)).copy_from(b);
    out
}

/// Vertical concatenation.
pub fn vstack(a: &CMat, b: &CMat) -> CMat {
    if a.nrows() == 0 {
        return b.clone();
    }
    if b.nrows() == 0 {
        return a.clone();
    }
    assert_eq!(a.ncols(), b.ncols());
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Horizontal concatenation.
pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    if a.ncols() == 0 {
        return b.clone();
    }
    if b.ncols() == 0 {
        return a.clone();
    }
    assert_eq!(a.nrows(), b.nrows());
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Least-squares/minimum-norm solution of `x a = b` via the pseudo-inverse of `a`.
pub fn right_divide_pinv(b: &CMat, a: &CMat, rel_tol: f64) -> CMat {
    let smax = singular_values(a).first().copied().unwrap_or(0.0);
    let pinv = SVD::new(a.clone(), true, true)
        .pseudo_inverse(rel_tol * smax.max(f64::MIN_POSITIVE))
        .expect("U and V were computed");
    b * pinv
}
