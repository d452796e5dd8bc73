//! The kernel 𝓛₀ of the definiteness condition, deficiency indices at regular
//! endpoints, validation of boundary matrices and the Lagrange identity.

use crate::error::{BcRejection, Error, Result};
use crate::ivp::{FundamentalMatrix, ForcedSolution, SpectralProblem, VectorFn};
use crate::linalg::{
    block_diag, c, cr, hstack, max_abs, null_space, projector, rank, range_basis, right_divide_pinv, singular_values,
    vstack, zeros, CMat, CVec, C64,
};
use crate::measures::{Ends, Side};

/// Singular values below this fraction of the largest count as zero in the Gram matrix.
pub const GRAM_NULL_TOL: f64 = 1e-10;
const BC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelData {
    pub dim_l0: usize,
    /// Orthonormal basis of `N₀` as columns.
    pub n0_basis: CMat,
    /// Orthogonal projector onto `N₀^⊥`.
    pub projector: CMat,
    pub gram: CMat,
}

impl KernelData {
    pub fn n(&self) -> usize {
        self.projector.nrows()
    }

    pub fn rank(&self) -> usize {
        self.n() - self.dim_l0
    }
}

/// `∫_{(lo,hi)} U(·,λ̄)^* w U(·,λ)`; atoms contribute with balanced values.
pub fn gram_between(p: &SpectralProblem, ubar: &FundamentalMatrix, u: &FundamentalMatrix, lo: f64, hi: f64) -> Result<CMat> {
    let breaks = p.breakpoints();
    p.w().integrate_sandwich(
        |x| ubar.at(x).map(|m| m.adjoint()),
        |x| u.at(x),
        lo,
        hi,
        Ends::Open,
        &breaks,
    )
}

fn require_regular(p: &SpectralProblem) -> Result<()> {
    for right in [false, true] {
        if !p.endpoint_is_regular(right) {
            let iv = p.interval();
            return Err(Error::Unsupported(format!(
                "endpoint {} is not regular",
                if right { iv.b } else { iv.a }
            )));
        }
    }
    Ok(())
}

pub fn compute_kernel(p: &SpectralProblem) -> Result<KernelData> {
    require_regular(p)?;
    if !p.w().has_density() && p.w().atoms().iter().all(|a| max_abs(&a.jump) == 0.0) {
        return Err(Error::InvalidMeasure("w vanishes identically, so L²(w) is trivial".into()));
    }
    let u0 = p.fundamental_matrix(cr(0.0))?;
    let iv = p.interval();
    let gram = gram_between(p, &u0, &u0, iv.a, iv.b)?;
    let gram = (&gram + gram.adjoint()) * cr(0.5);
    let n0 = null_space(&gram, GRAM_NULL_TOL);
    let n = p.n();
    let proj = CMat::identity(n, n) - projector(&n0, n);
    let proj = (&proj + proj.adjoint()) * cr(0.5);
    Ok(KernelData {
        dim_l0: n0.ncols(),
        n0_basis: n0,
        projector: proj,
        gram,
    })
}

/// `(n₊, n₋)` for a problem with two regular endpoints.
pub fn deficiency_indices_regular(p: &SpectralProblem, k: &KernelData) -> Result<(usize, usize)> {
    require_regular(p)?;
    let d = k.rank();
    Ok((d, d))
}

/// `𝕁 = diag(J, −J)`.
pub fn big_j(j: &CMat) -> CMat {
    block_diag(j, &(-j))
}

/// `(U(a); U(b))` stacked.
pub fn boundary_values(p: &SpectralProblem, u: &FundamentalMatrix) -> Result<CMat> {
    let iv = p.interval();
    Ok(vstack(&u.eval(iv.a, Side::Right)?, &u.eval(iv.b, Side::Left)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Separated,
    Coupled,
    Mixed,
}

impl std::fmt::Display for BcKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BcKind::Separated => "separated",
            BcKind::Coupled => "coupled",
            BcKind::Mixed => "mixed",
        })
    }
}

/// An accepted boundary matrix `Ã` acting on `(u(a); u(b))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub matrix: CMat,
    /// The representative with the same action on boundary data whose rows
    /// satisfy `𝕁⁻¹Ã* ⊂ W`.
    pub canonical: CMat,
    pub n_plus: usize,
    pub kind: BcKind,
    /// Whether the supplied matrix itself satisfies `𝕁⁻¹Ã* ⊂ W`.
    pub strict_w_condition: bool,
    pub symmetry_residual: f64,
    pub kernel_residual: f64,
}

impl BoundaryConditions {
    pub fn left_block(&self) -> CMat {
        let n = self.canonical.ncols() / 2;
        self.canonical.columns(0, n).into_owned()
    }

    pub fn right_block(&self) -> CMat {
        let n = self.canonical.ncols() / 2;
        self.canonical.columns(n, n).into_owned()
    }
}

/// Boundary data shared by validation and the Green construction.
#[derive(Debug, Clone)]
pub struct BoundarySpaces {
    /// Orthonormal basis of `W` (boundary values of the deficiency spaces).
    pub w: CMat,
    /// Boundary values of 𝓛₀.
    pub n: CMat,
}

/// A non-real point off Λ used to span the deficiency spaces.
fn probe_point(p: &SpectralProblem) -> C64 {
    let set = p.lambda_set();
    for s in [1.0, 1.37, 0.61, 2.3, 3.7] {
        let z = c(0.0, s);
        if set.distance(z) > 1e-3 && set.distance(z.conj()) > 1e-3 {
            return z;
        }
    }
    c(0.3, 1.1)
}

pub fn boundary_spaces(p: &SpectralProblem, k: &KernelData) -> Result<BoundarySpaces> {
    let mu = probe_point(p);
    let plus = boundary_values(p, &p.fundamental_matrix(mu)?)? * &k.projector;
    let minus = boundary_values(p, &p.fundamental_matrix(mu.conj())?)? * &k.projector;
    let w = range_basis(&hstack(&plus, &minus), 1e-9);
    let n = if k.dim_l0 > 0 {
        boundary_values(p, &p.fundamental_matrix(cr(0.0))?)? * &k.n0_basis
    } else {
        zeros(2 * p.n(), 0)
    };
    Ok(BoundarySpaces { w, n })
}

fn relative(m: &CMat, scale: f64) -> f64 {
    if scale == 0.0 {
        max_abs(m)
    } else {
        max_abs(m) / scale
    }
}

pub fn validate_boundary_conditions(p: &SpectralProblem, k: &KernelData, a: &CMat) -> Result<BoundaryConditions> {
    let n = p.n();
    let (n_plus, _) = deficiency_indices_regular(p, k)?;
    if a.nrows() != n_plus || a.ncols() != 2 * n {
        return Err(BcRejection::Shape {
            expected: n_plus,
            expected_cols: 2 * n,
            rows: a.nrows(),
            cols: a.ncols(),
        }
        .into());
    }
    let r = rank(a, BC_TOL);
    if r < n_plus {
        return Err(BcRejection::Rank { rank: r, n_plus }.into());
    }
    let spaces = boundary_spaces(p, k)?;
    let scale_a = singular_values(a).first().copied().unwrap_or(0.0);
    let kernel_residual = if spaces.n.ncols() > 0 {
        relative(&(a * &spaces.n), scale_a)
    } else {
        0.0
    };
    if kernel_residual > BC_TOL {
        return Err(BcRejection::KernelNotAnnihilated {
            residual: kernel_residual,
        }
        .into());
    }
    let jj = big_j(p.j());
    let jj_inv = big_j(p.j_inv());
    let wb = &spaces.w;
    // Ã_c = C* W* 𝕁* with C* (W* 𝕁* W) = Ã W
    let form = wb.adjoint() * jj.adjoint() * wb;
    let cstar = right_divide_pinv(&(a * wb), &form, 1e-12);
    let canonical = cstar * wb.adjoint() * jj.adjoint();
    if rank(&canonical, BC_TOL) < n_plus {
        return Err(BcRejection::Rank {
            rank: rank(&canonical, BC_TOL),
            n_plus,
        }
        .into());
    }
    let scale_c = singular_values(&canonical).first().copied().unwrap_or(0.0);
    let symmetry_residual = relative(&(&canonical * &jj_inv * canonical.adjoint()), scale_c * scale_c);
    if symmetry_residual > BC_TOL {
        return Err(BcRejection::NotSymmetric {
            residual: symmetry_residual,
        }
        .into());
    }
    // strict form: 𝕁⁻¹Ã* lies in W
    let image = &jj_inv * a.adjoint();
    let outside = &image - wb * (wb.adjoint() * &image);
    let strict_w_condition = relative(&outside, scale_a) <= BC_TOL;

    let s = hstack(wb, &spaces.n);
    let s_a = s.rows(0, n).into_owned();
    let s_b = s.rows(n, n).into_owned();
    let left = canonical.columns(0, n).into_owned();
    let right = canonical.columns(n, n).into_owned();
    let rank_rel = |m: &CMat| {
        if max_abs(m) <= BC_TOL * scale_c.max(1e-300) {
            0
        } else {
            rank(m, BC_TOL)
        }
    };
    let da = n_plus - rank_rel(&(&right * &s_b)).min(n_plus);
    let db = n_plus - rank_rel(&(&left * &s_a)).min(n_plus);
    let kind = if da + db == n_plus {
        BcKind::Separated
    } else if da == 0 && db == 0 {
        BcKind::Coupled
    } else {
        BcKind::Mixed
    };
    Ok(BoundaryConditions {
        matrix: a.clone(),
        canonical,
        n_plus,
        kind,
        strict_w_condition,
        symmetry_residual,
        kernel_residual,
    })
}

/// An element `(u, λu + f)` of the maximal relation, where
/// `Ju' + qu = λwu + wf` and `u(x0) = u0`.
#[derive(Clone)]
pub struct TmaxPair {
    lambda: C64,
    f: VectorFn,
    u: ForcedSolution,
}

impl TmaxPair {
    pub fn new(p: &SpectralProblem, lambda: C64, u0: &CVec, f: VectorFn) -> Result<Self> {
        let u = ForcedSolution::new(p, lambda, u0, f.clone())?;
        Ok(Self { lambda, f, u })
    }

    /// Wraps a solution of `Ju' + qu = w(λu + f)` whose `λ` and `f` are known.
    pub fn from_solution(u: ForcedSolution, f: VectorFn) -> Self {
        Self {
            lambda: u.lambda(),
            f,
            u,
        }
    }

    pub fn u(&self, x: f64, side: Side) -> Result<CVec> {
        self.u.eval(x, side)
    }

    /// The second component `λu + f` (balanced).
    pub fn image(&self, x: f64) -> Result<CVec> {
        Ok(self.u.at(x)? * self.lambda + (self.f)(x))
    }
}

/// `⟨f, g⟩ = ∫ f* w g` with balanced values at atoms.
pub fn inner_product<F, G>(p: &SpectralProblem, f: F, g: G) -> Result<C64>
where
    F: Fn(f64) -> Result<CVec>,
    G: Fn(f64) -> Result<CVec>,
{
    let iv = p.interval();
    let n = p.n();
    let breaks = p.breakpoints();
    let m = p.w().integrate_sandwich(
        |x| f(x).map(|v| CMat::from_row_slice(1, n, v.adjoint().as_slice())),
        |x| g(x).map(|v| CMat::from_column_slice(n, 1, v.as_slice())),
        iv.a,
        iv.b,
        Ends::Open,
        &breaks,
    )?;
    Ok(m[(0, 0)])
}

/// `(v*Ju)(b) − (v*Ju)(a) − ⟨v, f⟩ + ⟨g, u⟩` for `(u, f)` and `(v, g)`.
pub fn lagrange_residual(p: &SpectralProblem, first: &TmaxPair, second: &TmaxPair) -> Result<C64> {
    let iv = p.interval();
    let j = p.j();
    let form = |x: f64, side: Side| -> Result<C64> {
        let u = first.u(x, side)?;
        let v = second.u(x, side)?;
        Ok(v.dotc(&(j * u)))
    };
    let lhs = form(iv.b, Side::Left)? - form(iv.a, Side::Right)?;
    let vf = inner_product(p, |x| second.u(x, Side::Balanced), |x| first.image(x))?;
    let gu = inner_product(p, |x| second.image(x), |x| first.u(x, Side::Balanced))?;
    Ok(lhs - (vf - gu))
}
