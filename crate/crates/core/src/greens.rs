//! Regular boundary value problems: `F(λ)`, the M-function, Green's kernel,
//! the resolvent, real eigenvalues and the spectral measure.

use crate::error::{Error, Result};
use crate::ivp::{FundamentalMatrix, ForcedSolution, SpectralProblem, VectorFn};
use crate::linalg::{c, cr, eye, inverse, max_abs, rcond, singular_values, solve, vstack, zeros, CMat, CVec, C64};
use crate::measures::Side;
use crate::par::{self, Exec};
use crate::structure::{compute_kernel, validate_boundary_conditions, BoundaryConditions, KernelData};

/// `F(λ)` with `rcond` below this is treated as singular.
pub const POLE_RCOND: f64 = 1e-13;

/// A problem with regular endpoints and accepted boundary conditions.
#[derive(Debug, Clone)]
pub struct RegularProblem {
    problem: SpectralProblem,
    kernel: KernelData,
    bc: BoundaryConditions,
}

impl RegularProblem {
    pub fn new(problem: SpectralProblem, boundary: &CMat) -> Result<Self> {
        let kernel = compute_kernel(&problem)?;
        let bc = validate_boundary_conditions(&problem, &kernel, boundary)?;
        Ok(Self { problem, kernel, bc })
    }

    pub fn from_parts(problem: SpectralProblem, kernel: KernelData, bc: BoundaryConditions) -> Self {
        Self { problem, kernel, bc }
    }

    pub fn problem(&self) -> &SpectralProblem {
        &self.problem
    }

    pub fn kernel(&self) -> &KernelData {
        &self.kernel
    }

    pub fn boundary(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn projector(&self) -> &CMat {
        &self.kernel.projector
    }

    fn ends(&self, u: &FundamentalMatrix) -> Result<(CMat, CMat)> {
        let iv = self.problem.interval();
        Ok((u.eval(iv.a, Side::Right)?, u.eval(iv.b, Side::Left)?))
    }

    fn stack(&self, rows: CMat) -> CMat {
        vstack(&rows, &self.kernel.n0_basis.adjoint())
    }

    fn f_from(&self, ua: &CMat, ub: &CMat) -> CMat {
        self.stack(self.bc.left_block() * ua + self.bc.right_block() * ub)
    }

    /// `F(λ)`: boundary rows `Ã_L U(a,λ) + Ã_R U(b,λ)` over the rows of an
    /// orthonormal basis of `N₀`.
    pub fn assemble_f(&self, lambda: C64) -> Result<CMat> {
        let u = self.problem.fundamental_matrix(lambda)?;
        let (ua, ub) = self.ends(&u)?;
        Ok(self.f_from(&ua, &ub))
    }

    fn checked_inverse(&self, f: &CMat, lambda: C64) -> Result<CMat> {
        if rcond(f) < POLE_RCOND {
            return Err(Error::Pole(lambda));
        }
        inverse(f).ok_or(Error::Pole(lambda))
    }

    /// `(M, M₊, M₋)`; the last two are the routes `PH₊P + ½PJ⁻¹P` and
    /// `PH₋P − ½PJ⁻¹P`, which agree for accepted boundary conditions.
    pub fn m_routes(&self, lambda: C64) -> Result<(CMat, CMat, CMat)> {
        let u = self.problem.fundamental_matrix(lambda)?;
        let (ua, ub) = self.ends(&u)?;
        let f = self.f_from(&ua, &ub);
        let finv = self.checked_inverse(&f, lambda)?;
        let p = &self.kernel.projector;
        let jinv = self.problem.j_inv();
        let b_plus = self.stack(-(self.bc.right_block() * &ub)) * jinv;
        let b_minus = self.stack(self.bc.left_block() * &ua) * jinv;
        let half = p * jinv * p * cr(0.5);
        let m_plus = p * &finv * b_plus * p + &half;
        let m_minus = p * &finv * b_minus * p - &half;
        let m = (&m_plus + &m_minus) * cr(0.5);
        Ok((m, m_plus, m_minus))
    }

    pub fn m_function(&self) -> MFunction<'_> {
        MFunction { rp: self }
    }

    pub fn green_kernel(&self, lambda: C64) -> Result<GreenKernel> {
        let m = self.m_function().eval(lambda)?;
        Ok(GreenKernel {
            lambda,
            u: self.problem.fundamental_matrix(lambda)?,
            ubar: self.problem.fundamental_matrix(lambda.conj())?,
            m,
            p: self.kernel.projector.clone(),
            jinv: self.problem.j_inv().clone(),
            x0: self.problem.x0(),
        })
    }

    /// `E_λ f`: the solution of `Jv' + qv = w(λv + f)` satisfying the boundary
    /// conditions with `(𝟙 − P)v(x0) = 0`.
    pub fn resolvent_apply(&self, lambda: C64, f: VectorFn) -> Result<ForcedSolution> {
        let n = self.n();
        let zero = CVec::zeros(n);
        let particular = ForcedSolution::new(&self.problem, lambda, &zero, f.clone())?;
        let iv = self.problem.interval();
        let va = particular.eval(iv.a, Side::Right)?;
        let vb = particular.eval(iv.b, Side::Left)?;
        let rows = -(self.bc.left_block() * as_col(&va) + self.bc.right_block() * as_col(&vb));
        let rhs = vstack(&rows, &zeros(self.kernel.dim_l0, 1));
        let fmat = self.assemble_f(lambda)?;
        self.checked_inverse(&fmat, lambda)?;
        let u0 = solve(&fmat, &rhs).ok_or(Error::Pole(lambda))?;
        ForcedSolution::new(&self.problem, lambda, &u0.column(0).into_owned(), f)
    }

    /// Boundary residual `Ã (v(a); v(b))`.
    pub fn boundary_residual(&self, v: &ForcedSolution) -> Result<f64> {
        let iv = self.problem.interval();
        let va = as_col(&v.eval(iv.a, Side::Right)?);
        let vb = as_col(&v.eval(iv.b, Side::Left)?);
        Ok(max_abs(&(&self.bc.matrix * vstack(&va, &vb))))
    }

    /// `F(λ)` with each boundary row divided by the norms of its two
    /// contributions `Ã_L U(a)` and `Ã_R U(b)`.
    pub fn scaled_f(&self, lambda: C64) -> Result<CMat> {
        let u = self.problem.fundamental_matrix(lambda)?;
        let (ua, ub) = self.ends(&u)?;
        let left = self.bc.left_block() * ua;
        let right = self.bc.right_block() * ub;
        let mut rows = &left + &right;
        for i in 0..rows.nrows() {
            let s = left.row(i).norm() + right.row(i).norm();
            if s > 0.0 {
                rows.row_mut(i).scale_mut(1.0 / s);
            }
        }
        Ok(self.stack(rows))
    }

    /// Singular values of [`Self::scaled_f`], largest first; the last is the
    /// eigenvalue indicator.
    fn indicator(&self, lambda: f64) -> Result<(f64, Vec<f64>)> {
        let sv = singular_values(&self.scaled_f(cr(lambda))?);
        Ok((sv[sv.len() - 1], sv))
    }

    fn refuse_lambda_touching(&self, lo: f64, hi: f64) -> Result<()> {
        let set = self.problem.lambda_set();
        if let Some(&x) = set.degenerate.first() {
            return Err(Error::LambdaForbidden { location: x, lambda: None });
        }
        for e in &set.entries {
            let l = e.lambda;
            if l.im.abs() <= 1e-9 * (1.0 + l.norm()) && l.re >= lo && l.re <= hi {
                return Err(Error::LambdaForbidden {
                    location: e.location,
                    lambda: Some(l),
                });
            }
        }
        Ok(())
    }

    /// Real eigenvalues in `[lo, hi]` with multiplicities.
    pub fn eigenvalues(&self, lo: f64, hi: f64, settings: &EigenSettings) -> Result<Vec<Eigenvalue>> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Usage(format!("invalid window [{lo}, {hi}]")));
        }
        self.refuse_lambda_touching(lo, hi)?;
        let count = settings.grid.max(8);
        let xs: Vec<f64> = (0..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect();
        let vals = par::try_map_indexed(settings.exec, xs.len(), |k| self.indicator(xs[k]).map(|r| r.0))?;
        let mut brackets = Vec::new();
        for k in 0..xs.len() {
            let left = if k == 0 { f64::INFINITY } else { vals[k - 1] };
            let right = if k + 1 == xs.len() { f64::INFINITY } else { vals[k + 1] };
            if vals[k] <= left && vals[k] < right || vals[k] < left && vals[k] <= right {
                let a = xs[k.saturating_sub(1)];
                let b = xs[(k + 1).min(xs.len() - 1)];
                brackets.push((a, b));
            }
        }
        let refined = par::try_map_indexed(settings.exec, brackets.len(), |i| {
            let (a, b) = brackets[i];
            self.refine(a, b, settings)
        })?;
        let mut out: Vec<Eigenvalue> = refined.into_iter().flatten().filter(|e| e.lambda >= lo && e.lambda <= hi).collect();
        out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        out.dedup_by(|b, a| (a.lambda - b.lambda).abs() <= 1e-9 * (1.0 + a.lambda.abs()));
        Ok(out)
    }

    fn refine(&self, a: f64, b: f64, settings: &EigenSettings) -> Result<Option<Eigenvalue>> {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (a, b);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = self.indicator(x1)?.0;
        let mut f2 = self.indicator(x2)?.0;
        // golden section to a coarse width, secant on det F, and golden
        // section to the fine width only when the secant step does not land
        let mut best = f64::NAN;
        let mut best_val = f64::INFINITY;
        for width in [1e-4, 1e-13] {
            for _ in 0..200 {
                if b - a <= width * (1.0 + a.abs().max(b.abs())) {
                    break;
                }
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - phi * (b - a);
                    f1 = self.indicator(x1)?.0;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + phi * (b - a);
                    f2 = self.indicator(x2)?.0;
                }
            }
            if f1.min(f2) < best_val {
                best = if f1 <= f2 { x1 } else { x2 };
                best_val = f1.min(f2);
            }
            if let Some(s) = self.secant(best, (b - a).max(1e-9 * (1.0 + best.abs())))? {
                if s >= a - 1e-6 && s <= b + 1e-6 {
                    let v = self.indicator(s)?.0;
                    if v < best_val {
                        best = s;
                        best_val = v;
                    }
                }
            }
            if best_val <= 1e-3 * settings.tol {
                break;
            }
        }
        if best_val > settings.tol {
            return Ok(None);
        }
        let (ratio, sv) = self.indicator(best)?;
        let multiplicity = sv.iter().filter(|s| **s < settings.multiplicity_tol).count().max(1);
        Ok(Some(Eigenvalue {
            lambda: best,
            multiplicity,
            indicator: ratio,
        }))
    }

    fn secant(&self, x: f64, h: f64) -> Result<Option<f64>> {
        let det = |l: f64| -> Result<C64> { self.assemble_f(cr(l)).map(|f| f.determinant()) };
        let (mut x0, mut x1) = (x - h, x + h);
        let (mut d0, mut d1) = (det(x0)?, det(x1)?);
        for _ in 0..40 {
            let denom = d1 - d0;
            if denom.norm() == 0.0 {
                break;
            }
            let step = d1 * (x1 - x0) / denom;
            let x2 = x1 - step.re;
            if !x2.is_finite() {
                return Ok(None);
            }
            x0 = x1;
            d0 = d1;
            x1 = x2;
            d1 = det(x1)?;
            if step.re.abs() <= 1e-15 * (1.0 + x1.abs()) || d1.norm() == 0.0 {
                break;
            }
        }
        Ok(Some(x1))
    }

    /// `Δν(λₙ) = −(1/2πi)∮M` on a circle of radius `radius` (trapezoid rule,
    /// doubling the node count until stable).
    pub fn residue_weight(&self, lambda: f64, radius: f64) -> Result<ResidueWeight> {
        residue_weights(&self.m_function(), lambda, radius, &self.kernel.projector)
    }

    /// Eigenvalues in the window together with their residue weights.
    pub fn spectral_measure(&self, lo: f64, hi: f64, settings: &EigenSettings) -> Result<SpectralMeasure> {
        let eigs = self.eigenvalues(lo, hi, settings)?;
        let set = self.problem.lambda_set();
        let radii: Vec<f64> = (0..eigs.len())
            .map(|k| {
                let mut gap = f64::INFINITY;
                if k > 0 {
                    gap = gap.min(eigs[k].lambda - eigs[k - 1].lambda);
                }
                if k + 1 < eigs.len() {
                    gap = gap.min(eigs[k + 1].lambda - eigs[k].lambda);
                }
                (gap / 4.0).min(set.distance(cr(eigs[k].lambda)) / 4.0).min(0.1)
            })
            .collect();
        let weights = par::try_map_indexed(settings.exec, eigs.len(), |k| {
            self.residue_weight(eigs[k].lambda, radii[k])
        })?;
        let entries = eigs
            .into_iter()
            .zip(weights)
            .map(|(e, w)| SpectralPoint {
                lambda: e.lambda,
                multiplicity: e.multiplicity,
                indicator: e.indicator,
                weight: w.weight,
                symmetry_deviation: w.symmetry_deviation,
                nodes: w.nodes,
            })
            .collect();
        Ok(SpectralMeasure {
            window: (lo, hi),
            points: entries,
        })
    }
}

fn as_col(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// `λ ↦ M(λ)` for a [`RegularProblem`].
#[derive(Debug, Clone, Copy)]
pub struct MFunction<'a> {
    rp: &'a RegularProblem,
}

impl MFunction<'_> {
    pub fn problem(&self) -> &RegularProblem {
        self.rp
    }

    pub fn eval(&self, lambda: C64) -> Result<CMat> {
        self.rp.m_routes(lambda).map(|r| r.0)
    }

    /// Values on a list of points, in order.
    pub fn sweep(&self, points: &[C64], exec: Exec) -> Result<Vec<CMat>> {
        par::try_map_indexed(exec, points.len(), |k| self.eval(points[k]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSettings {
    /// Number of scan intervals across the window.
    pub grid: usize,
    /// Acceptance threshold for the smallest singular value of the row-scaled `F(λ)`.
    pub tol: f64,
    pub multiplicity_tol: f64,
    pub exec: Exec,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            grid: 1000,
            tol: 1e-8,
            multiplicity_tol: 1e-6,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub lambda: f64,
    pub multiplicity: usize,
    /// Smallest singular value of the row-scaled `F` at `lambda`.
    pub indicator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidueWeight {
    pub weight: CMat,
    pub symmetry_deviation: f64,
    pub nodes: usize,
}

/// `−(1/2πi)∮M(z)dz` around `lambda`, symmetrized and compressed by `P`.
pub fn residue_weights(mf: &MFunction<'_>, lambda: f64, radius: f64, p: &CMat) -> Result<ResidueWeight> {
    if !(radius > 0.0) {
        return Err(Error::Usage(format!("contour radius {radius} must be positive")));
    }
    let circle = |nodes: usize| -> Result<CMat> {
        let mut acc: Option<CMat> = None;
        for k in 0..nodes {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / nodes as f64;
            let e = C64::from_polar(radius, theta);
            let term = mf.eval(cr(lambda) + e)? * e;
            acc = Some(match acc {
                Some(a) => a + term,
                None => term,
            });
        }
        Ok(acc.expect("at least one node") * cr(-1.0 / nodes as f64))
    };
    let mut nodes = 16;
    let mut prev = circle(nodes)?;
    loop {
        let next = circle(2 * nodes)?;
        nodes *= 2;
        let change = max_abs(&(&next - &prev));
        prev = next;
        if change <= 1e-9 * max_abs(&prev).max(1.0) {
            break;
        }
        if nodes >= 1024 {
            return Err(Error::Numeric(format!(
                "residue at {lambda} did not stabilize (change {change:e}); contour may hit a singularity"
            )));
        }
    }
    let sym = (&prev + prev.adjoint()) * cr(0.5);
    let symmetry_deviation = max_abs(&(&prev - &sym));
    Ok(ResidueWeight {
        weight: p * sym * p,
        symmetry_deviation,
        nodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPoint {
    pub lambda: f64,
    pub multiplicity: usize,
    pub indicator: f64,
    pub weight: CMat,
    pub symmetry_deviation: f64,
    pub nodes: usize,
}

/// The discrete spectral measure restricted to a window.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    pub window: (f64, f64),
    pub points: Vec<SpectralPoint>,
}

impl SpectralMeasure {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

/// `G(x, y, λ) = U(x,λ) H̃(x,y,λ) U(y,λ̄)*`.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    lambda: C64,
    u: FundamentalMatrix,
    ubar: FundamentalMatrix,
    m: CMat,
    p: CMat,
    jinv: CMat,
    x0: f64,
}

fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl GreenKernel {
    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    /// `S(x,λ) = ¼U(x)⁻¹(U⁺(x) − U⁻(x))J⁻¹`, zero away from atoms.
    pub fn s(&self, x: f64) -> Result<CMat> {
        let n = self.p.nrows();
        match self.u.knots().iter().find(|k| k.x == x) {
            None => Ok(zeros(n, n)),
            Some(k) => {
                let inv = inverse(&k.balanced).ok_or_else(|| Error::Numeric(format!("U(·,λ) singular at {x}")))?;
                Ok(inv * (&k.plus - &k.minus) * &self.jinv * cr(0.25))
            }
        }
    }

    pub fn h_tilde(&self, x: f64, y: f64) -> Result<CMat> {
        let n = self.p.nrows();
        let one = eye(n);
        let mut h = &self.m + (&one - &self.p) * &self.jinv * &self.p * cr(0.5 * sgn(y - self.x0))
            - &self.jinv * &self.p * cr(0.5 * sgn(y - x));
        if x == y {
            h += self.s(x)? * &self.p;
        }
        Ok(h)
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<CMat> {
        Ok(self.u.at(x)? * self.h_tilde(x, y)? * self.ubar.at(y)?.adjoint())
    }

    /// `∫ G(x, ·) w f` evaluated at `x`.
    pub fn apply(&self, p: &SpectralProblem, f: &VectorFn, x: f64) -> Result<CVec> {
        let iv = p.interval();
        let n = p.n();
        let mut breaks = p.breakpoints();
        breaks.push(x);
        breaks.push(self.x0);
        let m = p.w().integrate_sandwich(
            |y| self.eval(x, y),
            |y| Ok(as_col(&f(y))),
            iv.a,
            iv.b,
            crate::measures::Ends::Open,
            &breaks,
        )?;
        Ok(CVec::from_iterator(n, m.column(0).iter().copied()))
    }
}

/// Herglotz defect `(M − M*)/(2i Im λ)`; Hermitian, and ⪰ 0 for a valid M.
pub fn herglotz_matrix(m: &CMat, lambda: C64) -> CMat {
    let d = (m - m.adjoint()) / c(0.0, 2.0 * lambda.im);
    (&d + d.adjoint()) * cr(0.5)
}
