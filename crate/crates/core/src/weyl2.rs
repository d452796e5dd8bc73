//! Real 2×2 systems: limit-point/limit-circle classification, separated
//! conditions, the Titchmarsh–Weyl m-function and limit-circle boundary vectors.

use crate::error::{Error, Result};
use crate::greens::RegularProblem;
use crate::ivp::{FundamentalMatrix, SpectralProblem};
use crate::linalg::{c, cr, hermitian_eigenvalues, inverse, max_abs, real_matrix, CMat, CVec, C64};
use crate::measures::{Ends, Side};
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    LimitPoint,
    LimitCircle,
    Undecided,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::LimitPoint => "limit-point",
            Verdict::LimitCircle => "limit-circle",
            Verdict::Undecided => "undecided",
        })
    }
}

/// Data for one truncation point `b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub point: f64,
    /// Eigenvalues of the Gram matrix `∫U*wU` between the anchor and `point`.
    pub mu_min: f64,
    pub mu_max: f64,
    pub disk_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylClassification {
    pub endpoint: Endpoint,
    pub location: f64,
    pub verdict: Verdict,
    pub probe: C64,
    pub truncations: Vec<Truncation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylSettings {
    pub probe: C64,
    /// Truncations toward an infinite endpoint: `c ± 2^k`, `k = 0..=doublings`.
    pub doublings: usize,
    /// Truncations toward a finite endpoint: distance halved `halvings` times.
    pub halvings: usize,
    pub ratio: f64,
    pub converge_tol: f64,
    pub exec: Exec,
}

impl Default for WeylSettings {
    fn default() -> Self {
        Self {
            probe: c(0.0, 1.0),
            doublings: 7,
            halvings: 40,
            ratio: 1e6,
            converge_tol: 1e-8,
            exec: Exec::default(),
        }
    }
}

/// `β` with `J = β[[0,−1],[1,0]]`, after checking that `J`, `q`, `w` are real.
pub fn real_beta(p: &SpectralProblem) -> Result<f64> {
    if p.n() != 2 {
        return Err(Error::Unsupported(format!("expected a 2×2 system, got n = {}", p.n())));
    }
    let j = p.j();
    let beta = j[(1, 0)].re;
    let expect = real_matrix(2, 2, &[0.0, -beta, beta, 0.0]);
    if beta == 0.0 || max_abs(&(j - expect)) > 1e-14 * beta.abs() {
        return Err(Error::Unsupported("J must be β[[0,−1],[1,0]] with real β ≠ 0".into()));
    }
    let imag = |m: &CMat| m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    for (name, meas) in [("q", p.q()), ("w", p.w())] {
        let bad_atom = meas.atoms().iter().any(|a| imag(&a.jump) > 0.0);
        let iv = meas.interval();
        let mut probes: Vec<f64> = meas.breakpoints();
        probes.extend([0.0, 0.5, 1.0, -1.0, 2.0].iter().filter(|x| iv.contains(**x)));
        let bad_density = probes.iter().any(|&x| iv.contains(x) && imag(&meas.density(x)) > 0.0);
        if bad_atom || bad_density {
            return Err(Error::Unsupported(format!("{name} must be real")));
        }
    }
    Ok(beta)
}

fn endpoint_location(p: &SpectralProblem, e: Endpoint) -> f64 {
    let iv = p.interval();
    match e {
        Endpoint::Left => iv.a,
        Endpoint::Right => iv.b,
    }
}

/// An interior anchor separated from `e`.
fn inner_anchor(p: &SpectralProblem, e: Endpoint) -> f64 {
    let iv = p.interval();
    let x0 = p.x0();
    if x0 != endpoint_location(p, e) {
        return x0;
    }
    match e {
        Endpoint::Left if iv.b.is_finite() => 0.5 * (iv.a + iv.b),
        Endpoint::Left => iv.a + 1.0,
        Endpoint::Right if iv.a.is_finite() => 0.5 * (iv.a + iv.b),
        Endpoint::Right => iv.b - 1.0,
    }
}

fn truncation_points(p: &SpectralProblem, e: Endpoint, anchor: f64, s: &WeylSettings) -> Vec<f64> {
    let end = endpoint_location(p, e);
    let dir = if e == Endpoint::Right { 1.0 } else { -1.0 };
    let atoms = p.atom_locations();
    let nudge = |x: f64| {
        // truncation points must avoid atoms
        let mut x = x;
        while atoms.contains(&x) {
            x += dir * 1e-9 * (1.0 + x.abs());
        }
        x
    };
    if end.is_finite() {
        (1..=s.halvings)
            .map(|k| nudge(end - (end - anchor) / 2f64.powi(k as i32)))
            .collect()
    } else {
        (0..=s.doublings).map(|k| nudge(anchor + dir * 2f64.powi(k as i32))).collect()
    }
}

fn gram(p: &SpectralProblem, u: &FundamentalMatrix, lo: f64, hi: f64) -> Result<CMat> {
    let g = p.w().integrate_sandwich(
        |x| u.at(x).map(|m| m.adjoint()),
        |x| u.at(x),
        lo,
        hi,
        Ends::Open,
        &p.breakpoints(),
    )?;
    Ok((&g + g.adjoint()) * cr(0.5))
}

/// `(center, radius)` of the Weyl disk for `θ = U e₁`, `φ = U e₂` at `x`.
fn disk(u: &FundamentalMatrix, j: &CMat, x: f64, side: Side) -> Result<(C64, f64)> {
    let m = u.eval(x, side)?;
    let theta = m.column(0).into_owned();
    let phi = m.column(1).into_owned();
    let a = phi.dotc(&(j * &phi));
    let b = theta.dotc(&(j * &phi));
    let cc = theta.dotc(&(j * &theta));
    let ratio = b / a;
    let r2 = ratio.norm_sqr() - (cc / a).re;
    Ok((-ratio.conj(), r2.max(0.0).sqrt()))
}

/// Limit-point/limit-circle verdict at `e` from the growth of solution norms.
pub fn classify_endpoint(p: &SpectralProblem, e: Endpoint, settings: &WeylSettings) -> Result<WeylClassification> {
    real_beta(p)?;
    if settings.probe.im == 0.0 {
        return Err(Error::Usage("the probe λ must be non-real".into()));
    }
    let anchor = inner_anchor(p, e);
    let points = truncation_points(p, e, anchor, settings);
    let x0 = p.x0();
    let j = p.j().clone();
    let side = if e == Endpoint::Right { Side::Left } else { Side::Right };
    let rows = par::try_map_indexed(settings.exec, points.len(), |k| {
        let bk = points[k];
        let lo = bk.min(anchor).min(x0);
        let hi = bk.max(anchor).max(x0);
        let u = p.fundamental_matrix_on(settings.probe, lo, hi)?;
        let g = gram(p, &u, bk.min(anchor), bk.max(anchor))?;
        let ev = hermitian_eigenvalues(&g);
        let (_, radius) = disk(&u, &j, bk, side)?;
        Ok::<_, Error>((
            Truncation {
                point: bk,
                mu_min: ev[0].max(0.0),
                mu_max: ev[1],
                disk_radius: radius,
            },
            g,
        ))
    })?;
    let mut verdict = Verdict::Undecided;
    let mut converged = 0;
    let mut separated = 0;
    for k in 1..rows.len() {
        let (t, g) = &rows[k];
        let (tp, gp) = &rows[k - 1];
        let change = max_abs(&(g - gp)) / max_abs(g).max(f64::MIN_POSITIVE);
        converged = if change <= settings.converge_tol { converged + 1 } else { 0 };
        let growing = t.mu_max > tp.mu_max * (1.0 + 1e-6);
        let split = t.mu_max > settings.ratio * t.mu_min;
        separated = if growing && split { separated + 1 } else { 0 };
        if converged >= 2 {
            verdict = Verdict::LimitCircle;
            break;
        }
        if separated >= 3 {
            verdict = Verdict::LimitPoint;
            break;
        }
    }
    Ok(WeylClassification {
        endpoint: e,
        location: endpoint_location(p, e),
        verdict,
        probe: settings.probe,
        truncations: rows.into_iter().map(|r| r.0).collect(),
    })
}

/// `n₊` of a 2×2 problem from its endpoint verdicts (LP+LP → 0, LP+LC → 1, LC+LC → 2).
pub fn deficiency_from_verdicts(a: Verdict, b: Verdict) -> Option<usize> {
    let d = |v: Verdict| match v {
        Verdict::LimitPoint => Some(1),
        Verdict::LimitCircle => Some(2),
        Verdict::Undecided => None,
    };
    Some(d(a)? + d(b)? - 2)
}

/// The row `cos α·u₁ − sin α·u₂ = 0` at the classified endpoint, acting on `(u(a); u(b))`.
pub fn separated_condition(class: &WeylClassification, alpha: f64) -> Result<CMat> {
    if class.verdict != Verdict::LimitCircle {
        return Err(Error::Unsupported(format!(
            "no boundary condition at a {} endpoint",
            class.verdict
        )));
    }
    let (cs, sn) = (alpha.cos(), alpha.sin());
    Ok(match class.endpoint {
        Endpoint::Left => real_matrix(1, 4, &[cs, -sn, 0.0, 0.0]),
        Endpoint::Right => real_matrix(1, 4, &[0.0, 0.0, cs, -sn]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MSample {
    pub point: f64,
    /// Through `M` of the problem truncated at `point` with `u₁(point) = 0`.
    pub contraction: C64,
    pub disk_center: C64,
    pub disk_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MReport {
    pub lambda: C64,
    pub alpha: f64,
    pub samples: Vec<MSample>,
    pub contraction: C64,
    pub disk_center: C64,
    pub agreement: f64,
}

/// Aitken's Δ² on the last three entries, or the last entry when the
/// sequence has already settled.
pub fn aitken(seq: &[C64]) -> C64 {
    let n = seq.len();
    if n < 3 {
        return *seq.last().expect("non-empty sequence");
    }
    let (x0, x1, x2) = (seq[n - 3], seq[n - 2], seq[n - 1]);
    let d1 = x2 - x1;
    let d2 = x2 - 2.0 * x1 + x0;
    if d2.norm() <= 1e-14 * x2.norm().max(1.0) || d1.norm() >= d2.norm() {
        return x2;
    }
    x2 - d1 * d1 / d2
}

/// Titchmarsh–Weyl `m(λ)` at a regular left endpoint with a limit-point right
/// endpoint, by contraction of `M` and by the Weyl disk center, both on
/// truncations and extrapolated.
pub fn m_function_2x2(p: &SpectralProblem, alpha: f64, lambda: C64, settings: &WeylSettings) -> Result<MReport> {
    real_beta(p)?;
    if lambda.im == 0.0 {
        return Err(Error::Usage("m(λ) needs non-real λ".into()));
    }
    let iv = p.interval();
    if !iv.a.is_finite() || !p.endpoint_is_regular(false) {
        return Err(Error::Unsupported("the left endpoint must be finite and regular".into()));
    }
    let anchored = if p.x0() == iv.a { p.clone() } else { p.with_anchor(iv.a)? };
    let class = classify_endpoint(&anchored, Endpoint::Right, &WeylSettings { probe: lambda, ..*settings })?;
    if class.verdict != Verdict::LimitPoint {
        return Err(Error::Unsupported(format!("the right endpoint is {}, not limit-point", class.verdict)));
    }
    let (cs, sn) = (alpha.cos(), alpha.sin());
    // rotate so θ = U(cos α, −sin α)ᵀ and φ = U(sin α, cos α)ᵀ
    let rot = real_matrix(2, 2, &[cs, sn, -sn, cs]);
    let s = CVec::from_vec(vec![cr(sn), cr(cs)]);
    let bc_row = real_matrix(2, 4, &[cs, -sn, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    // unit spacing keeps the center error close to a geometric sequence in k
    let atoms = anchored.atom_locations();
    let reach = 2f64.powi(settings.doublings as i32);
    let points: Vec<f64> = (1..=reach as usize)
        .map(|k| iv.a + k as f64)
        .filter(|x| !atoms.contains(x))
        .collect();
    let j = anchored.j().clone();
    let disk_at = |u: &FundamentalMatrix, x: f64| -> Result<(C64, f64)> {
        let m0 = u.eval(x, Side::Left)? * &rot;
        let theta = m0.column(0).into_owned();
        let phi = m0.column(1).into_owned();
        let a = phi.dotc(&(&j * &phi));
        let b = theta.dotc(&(&j * &phi));
        let cc = theta.dotc(&(&j * &theta));
        let ratio = b / a;
        Ok((-ratio.conj(), (ratio.norm_sqr() - (cc / a).re).max(0.0).sqrt()))
    };
    // one solve per batch of 16 truncations, stopping once the disk has collapsed
    let mut disks: Vec<(C64, f64)> = Vec::new();
    let mut keep = None;
    for batch in points.chunks(16) {
        let u = anchored.fundamental_matrix_on(lambda, iv.a, *batch.last().expect("non-empty batch"))?;
        for &x in batch {
            disks.push(disk_at(&u, x)?);
        }
        keep = disks
            .iter()
            .position(|(center, radius)| *radius <= 1e-10 * (1.0 + center.norm()))
            .map(|k| (k + 2).max(3));
        if keep.is_some_and(|k| k <= disks.len()) {
            break;
        }
    }
    // past a collapsed disk the solutions are too far apart for the truncated solves
    let keep = keep.unwrap_or(disks.len()).min(disks.len());
    let attempts = par::map_indexed(settings.exec, keep, |k| {
        let cut = anchored.restricted(iv.a, points[k], iv.a)?;
        let rp = RegularProblem::new(cut, &bc_row)?;
        let m = rp.m_function().eval(lambda)?;
        let contraction = s.transpose() * &m * &s;
        Ok::<_, Error>(MSample {
            point: points[k],
            contraction: contraction[(0, 0)],
            disk_center: disks[k].0,
            disk_radius: disks[k].1,
        })
    });
    let mut samples = Vec::new();
    for a in attempts {
        match a {
            Ok(sample) => samples.push(sample),
            Err(e) if samples.len() >= 3 => {
                log::debug!("truncations stop at {} samples: {e}", samples.len());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let contraction = aitken(&samples.iter().map(|s| s.contraction).collect::<Vec<_>>());
    let disk_center = aitken(&samples.iter().map(|s| s.disk_center).collect::<Vec<_>>());
    Ok(MReport {
        lambda,
        alpha,
        agreement: (contraction - disk_center).norm(),
        samples,
        contraction,
        disk_center,
    })
}

/// Real solutions `v₁, v₂` of `Ju' + qu = 0` with `v₁(a) = (0, 1/β)`,
/// `v₂(a) = (−1/β, 0)` at a regular left endpoint, as columns of `U(·,0)C`.
pub fn default_lc_basis(p: &SpectralProblem) -> Result<(FundamentalMatrix, CMat)> {
    let beta = real_beta(p)?;
    let iv = p.interval();
    let u = p.fundamental_matrix(cr(0.0))?;
    let ua = u.eval(iv.a, Side::Right)?;
    let target = real_matrix(2, 2, &[0.0, -1.0 / beta, 1.0 / beta, 0.0]);
    let coef = inverse(&ua).ok_or_else(|| Error::Numeric("U(a, 0) is singular".into()))? * target;
    Ok((u, coef))
}

/// `ū = ((v₁*Ju), (v₂*Ju))` from one-sided values at the endpoint.
pub fn lc_boundary_vector(j: &CMat, u: &CVec, v1: &CVec, v2: &CVec) -> CVec {
    let ju = j * u;
    CVec::from_vec(vec![v1.dotc(&ju), v2.dotc(&ju)])
}

/// `−(A*JB₁)(B₂*JB₃) + (A*JB₂)(B₁*JB₃) − (A*JB₃)(B₁*JB₂)`, zero when `B₁`, `B₂` are real.
pub fn plucker_residual(j: &CMat, a: &CVec, b1: &CVec, b2: &CVec, b3: &CVec) -> C64 {
    let f = |x: &CVec, y: &CVec| x.dotc(&(j * y));
    -f(a, b1) * f(b2, b3) + f(a, b2) * f(b1, b3) - f(a, b3) * f(b1, b2)
}
