//! The spectral (Fourier) transform `f ↦ ∫U(·,λ̄)*wf`, its inverse over a
//! computed eigenvalue window, and Parseval/diagonalization checks.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::greens::{RegularProblem, SpectralMeasure};
use crate::ivp::{FundamentalMatrix, SpectralProblem, VectorFn};
use crate::linalg::{cr, max_abs, CMat, CVec, C64};
use crate::measures::{Ends, Side};
use crate::par::{self, Exec};
use crate::structure::{inner_product, TmaxPair};

fn as_col(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// `∫ U(·,λ̄)* w f` for a precomputed `U(·, λ̄)`.
fn pair_with(p: &SpectralProblem, ubar: &FundamentalMatrix, f: &VectorFn) -> Result<CVec> {
    let iv = p.interval();
    let m = p.w().integrate_sandwich(
        |x| ubar.at(x).map(|u| u.adjoint()),
        |x| Ok(as_col(&f(x))),
        iv.a,
        iv.b,
        Ends::Open,
        &p.breakpoints(),
    )?;
    Ok(m.column(0).into_owned())
}

/// `(𝓕f)(t)` at an arbitrary complex `t`.
pub fn transform_at(p: &SpectralProblem, t: C64, f: &VectorFn) -> Result<CVec> {
    let ubar = p.fundamental_matrix(t.conj())?;
    pair_with(p, &ubar, f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult {
    pub eigenvalues: Vec<f64>,
    /// `f̂ₙ`, one per eigenvalue.
    pub coefficients: Vec<CVec>,
    pub window: (f64, f64),
}

pub fn fourier(p: &SpectralProblem, sm: &SpectralMeasure, f: &VectorFn, exec: Exec) -> Result<TransformResult> {
    let coefficients = par::try_map_indexed(exec, sm.points.len(), |k| transform_at(p, cr(sm.points[k].lambda), f))?;
    Ok(TransformResult {
        eigenvalues: sm.eigenvalues(),
        coefficients,
        window: sm.window,
    })
}

/// `x ↦ Σₙ U(x,λₙ)Δν(λₙ)ĉₙ` over the window of `sm`.
#[derive(Debug, Clone)]
pub struct Expansion {
    terms: Vec<(FundamentalMatrix, CMat)>,
    n: usize,
}

impl Expansion {
    pub fn new(p: &SpectralProblem, sm: &SpectralMeasure, coefficients: &[CVec], exec: Exec) -> Result<Self> {
        if coefficients.len() != sm.points.len() {
            return Err(Error::Usage(format!(
                "{} coefficient vectors for {} eigenvalues",
                coefficients.len(),
                sm.points.len()
            )));
        }
        let terms = par::try_map_indexed(exec, sm.points.len(), |k| {
            let pt = &sm.points[k];
            let u = p.fundamental_matrix(cr(pt.lambda))?;
            Ok::<_, Error>((u, &pt.weight * as_col(&coefficients[k])))
        })?;
        Ok(Self { terms, n: p.n() })
    }

    pub fn eval(&self, x: f64, side: Side) -> Result<CVec> {
        let mut acc = CMat::zeros(self.n, 1);
        for (u, c) in &self.terms {
            acc += u.eval(x, side)? * c;
        }
        Ok(acc.column(0).into_owned())
    }

    pub fn at(&self, x: f64) -> Result<CVec> {
        self.eval(x, Side::Balanced)
    }

    /// As an evaluator for quadrature; points outside the interval evaluate to zero.
    pub fn to_fn(&self) -> VectorFn {
        let me = self.clone();
        Arc::new(move |x| me.at(x).unwrap_or_else(|_| CVec::zeros(me.n)))
    }
}

/// `𝓖ĉ` sampled on `grid`.
pub fn inverse(
    p: &SpectralProblem,
    sm: &SpectralMeasure,
    coefficients: &[CVec],
    grid: &[f64],
    exec: Exec,
) -> Result<Vec<CVec>> {
    let e = Expansion::new(p, sm, coefficients, exec)?;
    grid.iter().map(|&x| e.at(x)).collect()
}

/// `ℙf = 𝓖𝓕f` as an expansion.
pub fn projection(p: &SpectralProblem, sm: &SpectralMeasure, f: &VectorFn, exec: Exec) -> Result<Expansion> {
    let t = fourier(p, sm, f, exec)?;
    Expansion::new(p, sm, &t.coefficients, exec)
}

/// `Σₙ f̂ₙ* Δν(λₙ) ĝₙ`.
pub fn spectral_inner(sm: &SpectralMeasure, f: &TransformResult, g: &TransformResult) -> C64 {
    sm.points
        .iter()
        .zip(f.coefficients.iter().zip(&g.coefficients))
        .map(|(pt, (a, b))| a.dotc(&(&pt.weight * b)))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsevalReport {
    /// `⟨f, ℙg⟩_w`.
    pub lhs: C64,
    /// `Σ f̂ₙ* Δν ĝₙ`.
    pub rhs: C64,
    pub residual: f64,
    /// `‖f‖² − Σ f̂ₙ*Δν f̂ₙ`: energy of `f` outside the window (plus any part in `ker 𝓕`).
    pub tail_energy_f: f64,
    pub tail_energy_g: f64,
}

impl ParsevalReport {
    pub fn window_incomplete(&self, tol: f64) -> bool {
        self.tail_energy_f > tol || self.tail_energy_g > tol
    }
}

pub fn parseval_check(
    p: &SpectralProblem,
    sm: &SpectralMeasure,
    f: &VectorFn,
    g: &VectorFn,
    exec: Exec,
) -> Result<ParsevalReport> {
    let ft = fourier(p, sm, f, exec)?;
    let gt = fourier(p, sm, g, exec)?;
    let pg = Expansion::new(p, sm, &gt.coefficients, exec)?;
    let lhs = inner_product(p, |x| Ok(f(x)), |x| pg.at(x))?;
    let rhs = spectral_inner(sm, &ft, &gt);
    let tail = |h: &VectorFn, t: &TransformResult| -> Result<f64> {
        let total = inner_product(p, |x| Ok(h(x)), |x| Ok(h(x)))?.re;
        Ok(total - spectral_inner(sm, t, t).re)
    };
    let report = ParsevalReport {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
        tail_energy_f: tail(f, &ft)?,
        tail_energy_g: tail(g, &gt)?,
    };
    let scale = 1e-8 * (1.0 + lhs.norm());
    if report.window_incomplete(scale) {
        log::warn!(
            "window [{}, {}] misses energy: tails {:.3e} and {:.3e}",
            sm.window.0,
            sm.window.1,
            report.tail_energy_f,
            report.tail_energy_g
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalizationReport {
    /// `maxₙ ‖f̂ₙ − λₙ ûₙ‖` in the `Δν(λₙ)` seminorm.
    pub residual: f64,
    /// `|Ã(u(a); u(b))|`.
    pub boundary_residual: f64,
    pub member: bool,
}

/// For `(u, f) ∈ T` checks `(𝓕f)(λₙ) = λₙ(𝓕u)(λₙ)` across the window.
pub fn diagonalization_check(rp: &RegularProblem, sm: &SpectralMeasure, pair: &TmaxPair, exec: Exec) -> Result<DiagonalizationReport> {
    let p = rp.problem();
    let iv = p.interval();
    let ua = pair.u(iv.a, Side::Right)?;
    let ub = pair.u(iv.b, Side::Left)?;
    let mut stacked = CMat::zeros(2 * p.n(), 1);
    for i in 0..p.n() {
        stacked[(i, 0)] = ua[i];
        stacked[(p.n() + i, 0)] = ub[i];
    }
    let boundary_residual = max_abs(&(&rp.boundary().matrix * stacked));
    let member = boundary_residual <= 1e-8 * (1.0 + ua.norm().max(ub.norm()));
    if !member {
        log::warn!("pair violates the boundary conditions (residual {boundary_residual:.3e})");
    }
    let u_fn: VectorFn = {
        let pair = pair.clone();
        let n = p.n();
        Arc::new(move |x| pair.u(x, Side::Balanced).unwrap_or_else(|_| CVec::zeros(n)))
    };
    let f_fn: VectorFn = {
        let pair = pair.clone();
        let n = p.n();
        Arc::new(move |x| pair.image(x).unwrap_or_else(|_| CVec::zeros(n)))
    };
    let uh = fourier(p, sm, &u_fn, exec)?;
    let fh = fourier(p, sm, &f_fn, exec)?;
    let residual = uh
        .coefficients
        .iter()
        .zip(&fh.coefficients)
        .zip(&sm.points)
        .map(|((u, f), pt)| {
            let d = f - u * cr(pt.lambda);
            d.dotc(&(&pt.weight * &d)).re.max(0.0).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(DiagonalizationReport {
        residual,
        boundary_residual,
        member,
    })
}

/// Piecewise-linear interpolant of samples (constant beyond the ends).
pub fn piecewise_linear(grid: Vec<f64>, values: Vec<CVec>) -> Result<VectorFn> {
    if grid.is_empty() || grid.len() != values.len() {
        return Err(Error::Usage("grid and values must be non-empty and of equal length".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("grid must be strictly increasing".into()));
    }
    Ok(Arc::new(move |x| {
        let k = grid.partition_point(|g| *g <= x);
        if k == 0 {
            return values[0].clone();
        }
        if k == grid.len() {
            return values[k - 1].clone();
        }
        let t = (x - grid[k - 1]) / (grid[k] - grid[k - 1]);
        &values[k - 1] * cr(1.0 - t) + &values[k] * cr(t)
    }))
}
