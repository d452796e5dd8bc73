//! Matrix-valued measures of order zero: piecewise densities plus finitely many atoms.
//!
//! Only the absolutely continuous part and a finite atom list are represented;
//! singular-continuous parts are not supported.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{cr, hermitian_eigenvalues, max_abs, norm1, singular_values, zeros, CMat};
use crate::quadrature::{integrate, QuadSettings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealInterval {
    pub a: f64,
    pub b: f64,
}

impl RealInterval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a.is_nan() || b.is_nan() || a >= b || a == f64::INFINITY || b == f64::NEG_INFINITY {
            return Err(Error::InvalidMeasure(format!("invalid interval ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn real_line() -> Self {
        Self {
            a: f64::NEG_INFINITY,
            b: f64::INFINITY,
        }
    }

    /// Open-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }

    /// Closed membership (endpoints allowed when finite).
    pub fn contains_closed(&self, x: f64) -> bool {
        x >= self.a && x <= self.b && x.is_finite()
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.contains_closed(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                x,
                a: self.a,
                b: self.b,
            })
        }
    }
}

/// Which one-sided value of a function of bounded variation to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Balanced,
}

/// Endpoint inclusion for Stieltjes integrals over `[c, d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ends {
    Closed,
    ClosedOpen,
    OpenClosed,
    Open,
}

impl Ends {
    fn includes(self, x: f64, c: f64, d: f64) -> bool {
        let lo = match self {
            Ends::Closed | Ends::ClosedOpen => x >= c,
            _ => x > c,
        };
        let hi = match self {
            Ends::Closed | Ends::OpenClosed => x <= d,
            _ => x < d,
        };
        lo && hi
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Density of the absolutely continuous part on one piece.
#[derive(Clone)]
pub enum Density {
    /// `Σ_k C_k x^k`, coefficient matrices in increasing degree.
    Polynomial(Vec<CMat>),
    Callable(DensityFn),
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Polynomial(c) => f.debug_tuple("Polynomial").field(c).finish(),
            Density::Callable(_) => f.write_str("Callable(..)"),
        }
    }
}

impl Density {
    pub fn constant(m: CMat) -> Self {
        Density::Polynomial(vec![m])
    }

    pub fn eval(&self, x: f64) -> CMat {
        match self {
            Density::Polynomial(coeffs) => {
                let mut acc = coeffs.last().expect("non-empty polynomial").clone();
                for c in coeffs.iter().rev().skip(1) {
                    acc = acc * cr(x) + c;
                }
                acc
            }
            Density::Callable(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Density::Polynomial(c) => c.iter().all(|m| max_abs(m) == 0.0),
            Density::Callable(_) => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Piece {
    pub left: f64,
    pub right: f64,
    pub density: Density,
}

impl Piece {
    pub fn new(left: f64, right: f64, density: Density) -> Self {
        Self {
            left,
            right,
            density,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub jump: CMat,
}

impl Atom {
    pub fn new(location: f64, jump: CMat) -> Self {
        Self { location, jump }
    }
}

/// A matrix-valued measure on an interval.
///
/// Pieces are disjoint and sorted; the density vanishes outside them.
/// The antiderivative is anchored at `a` (at `-∞` when `a` is infinite).
#[derive(Debug, Clone)]
pub struct MatrixMeasure {
    rows: usize,
    cols: usize,
    interval: RealInterval,
    pieces: Vec<Piece>,
    atoms: Vec<Atom>,
    quad: QuadSettings,
}

impl MatrixMeasure {
    pub fn new(
        rows: usize,
        cols: usize,
        interval: RealInterval,
        mut pieces: Vec<Piece>,
        mut atoms: Vec<Atom>,
    ) -> Result<Self> {
        pieces.sort_by(|p, q| p.left.total_cmp(&q.left));
        atoms.sort_by(|p, q| p.location.total_cmp(&q.location));
        for p in &pieces {
            if !(p.left < p.right) || p.left < interval.a || p.right > interval.b {
                return Err(Error::InvalidMeasure(format!(
                    "piece [{}, {}] is empty or leaves the interval",
                    p.left, p.right
                )));
            }
            if let Density::Polynomial(c) = &p.density {
                if c.is_empty() || c.iter().any(|m| m.shape() != (rows, cols)) {
                    return Err(Error::InvalidMeasure("density has the wrong shape".into()));
                }
                let degree_positive = c.iter().skip(1).any(|m| max_abs(m) > 0.0);
                let infinite = !p.left.is_finite() || !p.right.is_finite();
                if infinite && degree_positive {
                    return Err(Error::InvalidMeasure(
                        "non-constant polynomial density on an unbounded piece".into(),
                    ));
                }
            }
        }
        for w in pieces.windows(2) {
            if w[1].left < w[0].right {
                return Err(Error::InvalidMeasure(format!(
                    "pieces overlap near x = {}",
                    w[1].left
                )));
            }
        }
        for at in &atoms {
            if !interval.contains(at.location) {
                return Err(Error::InvalidMeasure(format!(
                    "atom at {} is not interior to ({}, {})",
                    at.location, interval.a, interval.b
                )));
            }
            if at.jump.shape() != (rows, cols) {
                return Err(Error::InvalidMeasure("atom has the wrong shape".into()));
            }
        }
        for w in atoms.windows(2) {
            if w[1].location == w[0].location {
                return Err(Error::InvalidMeasure(format!(
                    "two atoms at x = {}",
                    w[0].location
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            interval,
            pieces,
            atoms,
            quad: QuadSettings::default(),
        })
    }

    pub fn zero(rows: usize, cols: usize, interval: RealInterval) -> Self {
        Self {
            rows,
            cols,
            interval,
            pieces: Vec::new(),
            atoms: Vec::new(),
            quad: QuadSettings::default(),
        }
    }

    /// Constant density `m·dx` on `[left, right]`.
    pub fn uniform(interval: RealInterval, left: f64, right: f64, m: CMat) -> Result<Self> {
        let (r, c) = m.shape();
        Self::new(r, c, interval, vec![Piece::new(left, right, Density::constant(m))], vec![])
    }

    pub fn with_quadrature(mut self, quad: QuadSettings) -> Self {
        self.quad = quad;
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn interval(&self) -> RealInterval {
        self.interval
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn quadrature(&self) -> QuadSettings {
        self.quad
    }

    pub fn has_density(&self) -> bool {
        self.pieces.iter().any(|p| !p.density.is_zero())
    }

    /// Density at `x` (the sum over pieces containing `x`).
    pub fn density(&self, x: f64) -> CMat {
        let mut out = zeros(self.rows, self.cols);
        for p in &self.pieces {
            if x >= p.left && x <= p.right {
                out += p.density.eval(x);
                break;
            }
        }
        out
    }

    /// Densities active on the open segment `(lo, hi)`; used so that
    /// evaluations exactly at a piece boundary use the correct side.
    pub fn segment_densities(&self, lo: f64, hi: f64) -> Vec<Density> {
        self.pieces
            .iter()
            .filter(|p| p.left < hi && p.right > lo && !p.density.is_zero())
            .map(|p| p.density.clone())
            .collect()
    }

    /// Piece endpoints and atom locations strictly inside the interval, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.left, p.right])
            .chain(self.atoms.iter().map(|a| a.location))
            .filter(|&x| self.interval.contains(x))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn atom_at(&self, x: f64) -> Option<&Atom> {
        self.atoms
            .binary_search_by(|a| a.location.total_cmp(&x))
            .ok()
            .map(|k| &self.atoms[k])
    }

    pub fn jump(&self, x: f64) -> Result<CMat> {
        self.interval.check(x)?;
        Ok(self
            .atom_at(x)
            .map(|a| a.jump.clone())
            .unwrap_or_else(|| zeros(self.rows, self.cols)))
    }

    /// `Q⁻`, `Q⁺` or `Q#` at `x`, with `Q` vanishing at the left end.
    pub fn antiderivative(&self, x: f64, side: Side) -> Result<CMat> {
        self.interval.check(x)?;
        let start = self.interval.a;
        let mut q = self.density_integral(start, x)?;
        for at in &self.atoms {
            if at.location < x {
                q += &at.jump;
            }
        }
        let j = self.jump(x)?;
        Ok(match side {
            Side::Left => q,
            Side::Right => q + j,
            Side::Balanced => q + j * cr(0.5),
        })
    }

    /// `∫_c^d ρ(x) dx` over the density part only.
    pub fn density_integral(&self, c: f64, d: f64) -> Result<CMat> {
        let one_l = CMat::identity(self.rows, self.rows);
        let one_r = CMat::identity(self.cols, self.cols);
        self.sandwich_density(&|_| Ok(one_l.clone()), &|_| Ok(one_r.clone()), c, d, &[])
    }

    /// Total variation of the antiderivative on `[c, d]` in the entrywise ℓ¹ norm.
    pub fn variation(&self, c: f64, d: f64) -> Result<f64> {
        self.interval.check(c)?;
        self.interval.check(d)?;
        let (c, d) = if c <= d { (c, d) } else { (d, c) };
        let mut total = 0.0;
        for (lo, hi, dens) in self.segments(c, d, &[]) {
            let v = integrate(
                |x| {
                    let s: f64 = dens.iter().map(|p| norm1(&p.eval(x))).sum();
                    Ok(CMat::from_element(1, 1, cr(s)))
                },
                lo,
                hi,
                &self.quad,
            )?;
            total += v[(0, 0)].re;
        }
        for at in &self.atoms {
            if at.location >= c && at.location <= d {
                total += norm1(&at.jump);
            }
        }
        Ok(total)
    }

    /// Maximal sub-segments of `[c, d]` on which no breakpoint lies, paired with the
    /// densities active there. Segments without any density are omitted.
    fn segments(&self, c: f64, d: f64, extra: &[f64]) -> Vec<(f64, f64, Vec<Density>)> {
        let mut cuts: Vec<f64> = vec![c, d];
        for &x in self.breakpoints().iter().chain(extra) {
            if x > c && x < d {
                cuts.push(x);
            }
        }
        for p in &self.pieces {
            for x in [p.left, p.right] {
                if x > c && x < d {
                    cuts.push(x);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .filter_map(|w| {
                let dens = self.segment_densities(w[0], w[1]);
                if dens.is_empty() {
                    None
                } else {
                    Some((w[0], w[1], dens))
                }
            })
            .collect()
    }

    fn sandwich_density<L, R>(&self, left: &L, right: &R, c: f64, d: f64, extra: &[f64]) -> Result<CMat>
    where
        L: Fn(f64) -> Result<CMat>,
        R: Fn(f64) -> Result<CMat>,
    {
        let (c, d, sign) = if c <= d { (c, d, 1.0) } else { (d, c, -1.0) };
        let mut acc: Option<CMat> = None;
        for (lo, hi, dens) in self.segments(c, d, extra) {
            let part = integrate(
                |x| {
                    let mut rho = dens[0].eval(x);
                    for extra in &dens[1..] {
                        rho += extra.eval(x);
                    }
                    Ok(left(x)? * rho * right(x)?)
                },
                lo,
                hi,
                &self.quad,
            )?;
            acc = Some(match acc {
                None => part,
                Some(a) => a + part,
            });
        }
        match acc {
            Some(a) => Ok(a * cr(sign)),
            None => {
                let probe_x = if c.is_finite() { c } else if d.is_finite() { d } else { 0.0 };
                let l = left(probe_x)?;
                let r = right(probe_x)?;
                Ok(zeros(l.nrows(), r.ncols()))
            }
        }
    }

    /// `∫ f dQ` over `[c, d]` with the given endpoint convention.
    pub fn integrate<F>(&self, f: F, c: f64, d: f64, ends: Ends) -> Result<CMat>
    where
        F: Fn(f64) -> Result<CMat>,
    {
        let one = CMat::identity(self.cols, self.cols);
        self.integrate_sandwich(f, |_| Ok(one.clone()), c, d, ends, &[])
    }

    /// `∫ L(x) dQ(x) R(x)` over `[c, d]` (`c ≤ d`).
    ///
    /// Atoms contribute `L(x) Δ(x) R(x)` with `L`, `R` evaluated exactly at the
    /// atom; `extra_breaks` are points where `L` or `R` jump.
    pub fn integrate_sandwich<L, R>(
        &self,
        left: L,
        right: R,
        c: f64,
        d: f64,
        ends: Ends,
        extra_breaks: &[f64],
    ) -> Result<CMat>
    where
        L: Fn(f64) -> Result<CMat>,
        R: Fn(f64) -> Result<CMat>,
    {
        if c > d {
            return Err(Error::Usage(format!("integration range [{c}, {d}] is reversed")));
        }
        let mut acc = if c < d {
            self.sandwich_density(&left, &right, c, d, extra_breaks)?
        } else {
            let l = left(c)?;
            let r = right(c)?;
            zeros(l.nrows(), r.ncols())
        };
        for at in &self.atoms {
            if ends.includes(at.location, c, d) {
                acc += left(at.location)? * &at.jump * right(at.location)?;
            }
        }
        Ok(acc)
    }

    /// Sample points used by the Hermitian / positivity checks: piece ends plus
    /// a uniform interior grid per piece (mapped for unbounded pieces).
    fn sample_points(&self) -> Vec<(f64, &Density)> {
        let mut out = Vec::new();
        for p in &self.pieces {
            for k in 0..=32 {
                let t = k as f64 / 32.0;
                let x = match (p.left.is_finite(), p.right.is_finite()) {
                    (true, true) => p.left + t * (p.right - p.left),
                    (true, false) => p.left + t / (1.0 - t + 1e-3),
                    (false, true) => p.right - t / (1.0 - t + 1e-3),
                    (false, false) => (2.0 * t - 1.0) / (1.0 - (2.0 * t - 1.0).abs() + 1e-3),
                };
                out.push((x, &p.density));
            }
        }
        out
    }

    /// Largest Hermitian defect over sampled densities and atoms.
    pub fn hermitian_defect(&self) -> f64 {
        let defect = |m: &CMat| max_abs(&(m - m.adjoint())) / (1.0 + max_abs(m));
        let d1 = self
            .sample_points()
            .iter()
            .map(|(x, d)| defect(&d.eval(*x)))
            .fold(0.0, f64::max);
        let d2 = self.atoms.iter().map(|a| defect(&a.jump)).fold(0.0, f64::max);
        d1.max(d2)
    }

    /// Smallest eigenvalue over sampled densities and atoms (relative to scale).
    pub fn eigenvalue_floor(&self) -> f64 {
        let floor = |m: &CMat| {
            let scale = 1.0 + max_abs(m);
            hermitian_eigenvalues(m).first().copied().unwrap_or(0.0) / scale
        };
        let d1 = self
            .sample_points()
            .iter()
            .map(|(x, d)| floor(&d.eval(*x)))
            .fold(f64::INFINITY, f64::min);
        let d2 = self.atoms.iter().map(|a| floor(&a.jump)).fold(f64::INFINITY, f64::min);
        d1.min(d2)
    }

    /// The measure `dQ(x) F(x)`: densities and atoms multiplied on the right by `F`.
    pub fn times_function(&self, f: Arc<dyn Fn(f64) -> CMat + Send + Sync>) -> Result<MatrixMeasure> {
        let probe = self
            .pieces
            .first()
            .map(|p| if p.left.is_finite() { p.left } else { p.right.min(0.0) })
            .or_else(|| self.atoms.first().map(|a| a.location))
            .unwrap_or(0.0);
        let cols = f(probe).ncols();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let d = p.density.clone();
                let f = f.clone();
                Piece::new(p.left, p.right, Density::Callable(Arc::new(move |x| d.eval(x) * f(x))))
            })
            .collect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.location, &a.jump * f(a.location)))
            .collect();
        Ok(MatrixMeasure::new(self.rows, cols, self.interval, pieces, atoms)?.with_quadrature(self.quad))
    }

    /// `Σ_k L_k m_k R_k` as a single measure on the common interval.
    pub fn combine(terms: &[(CMat, &MatrixMeasure, CMat)]) -> Result<MatrixMeasure> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Usage("combine needs at least one term".into()))?;
        let interval = first.1.interval;
        let rows = first.0.nrows();
        let cols = first.2.ncols();
        for (l, m, r) in terms {
            if m.interval != interval || l.ncols() != m.rows || m.cols != r.nrows() {
                return Err(Error::Usage("incompatible terms in combine".into()));
            }
            if l.nrows() != rows || r.ncols() != cols {
                return Err(Error::Usage("incompatible terms in combine".into()));
            }
        }
        let mut cuts: Vec<f64> = terms
            .iter()
            .flat_map(|(_, m, _)| m.pieces.iter().flat_map(|p| [p.left, p.right]))
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut pieces = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut active: Vec<(CMat, Density, CMat)> = Vec::new();
            for (l, m, r) in terms {
                for d in m.segment_densities(lo, hi) {
                    active.push((l.clone(), d, r.clone()));
                }
            }
            if active.is_empty() {
                continue;
            }
            let all_poly = active.iter().all(|(_, d, _)| matches!(d, Density::Polynomial(_)));
            let density = if all_poly {
                let degree = active
                    .iter()
                    .map(|(_, d, _)| match d {
                        Density::Polynomial(c) => c.len(),
                        Density::Callable(_) => 0,
                    })
                    .max()
                    .unwrap_or(1);
                let mut coeffs = vec![zeros(rows, cols); degree];
                for (l, d, r) in &active {
                    if let Density::Polynomial(c) = d {
                        for (k, ck) in c.iter().enumerate() {
                            coeffs[k] += l * ck * r;
                        }
                    }
                }
                Density::Polynomial(coeffs)
            } else {
                Density::Callable(Arc::new(move |x| {
                    let mut acc = zeros(rows, cols);
                    for (l, d, r) in &active {
                        acc += l * d.eval(x) * r;
                    }
                    acc
                }))
            };
            pieces.push(Piece::new(lo, hi, density));
        }
        let mut locs: Vec<f64> = terms
            .iter()
            .flat_map(|(_, m, _)| m.atoms.iter().map(|a| a.location))
            .collect();
        locs.sort_by(f64::total_cmp);
        locs.dedup();
        let atoms = locs
            .into_iter()
            .map(|x| {
                let mut jump = zeros(rows, cols);
                for (l, m, r) in terms {
                    if let Some(a) = m.atom_at(x) {
                        jump += l * &a.jump * r;
                    }
                }
                Atom::new(x, jump)
            })
            .collect();
        let quad = first.1.quad;
        Ok(MatrixMeasure {
            rows,
            cols,
            interval,
            pieces,
            atoms,
            quad,
        })
    }
}

/// One named check of [`validate_coefficients`].
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn is_conforming(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_conforming() {
            Ok(self)
        } else {
            Err(Error::NonConforming(self.failures()))
        }
    }
}

const HERMITIAN_TOL: f64 = 1e-10;
const EIGEN_FLOOR: f64 = -1e-12;

/// Checks the standing hypotheses on `J`, `q` and `w`.
pub fn validate_coefficients(q: &MatrixMeasure, w: &MatrixMeasure, j: &CMat) -> ValidationReport {
    let n = j.nrows();
    let mut checks = Vec::new();
    let shapes_ok = j.is_square() && q.shape() == (n, n) && w.shape() == (n, n);
    checks.push(Check {
        name: "shapes",
        passed: shapes_ok,
        detail: format!("J {:?}, q {:?}, w {:?}", j.shape(), q.shape(), w.shape()),
    });
    if !shapes_ok {
        return ValidationReport { checks };
    }
    let sv = singular_values(j);
    let invertible = sv.last().copied().unwrap_or(0.0) > 1e-12 * sv.first().copied().unwrap_or(0.0)
        && sv.first().copied().unwrap_or(0.0) > 0.0;
    checks.push(Check {
        name: "J invertible",
        passed: invertible,
        detail: format!("singular values {sv:?}"),
    });
    let skew = max_abs(&(j + j.adjoint()));
    checks.push(Check {
        name: "J skew-Hermitian",
        passed: skew <= HERMITIAN_TOL * (1.0 + max_abs(j)),
        detail: format!("|J + J*| = {skew:e}"),
    });
    let qd = q.hermitian_defect();
    checks.push(Check {
        name: "q Hermitian",
        passed: qd <= HERMITIAN_TOL,
        detail: format!("defect {qd:e}"),
    });
    let wd = w.hermitian_defect();
    let wf = w.eigenvalue_floor();
    checks.push(Check {
        name: "w non-negative",
        passed: wd <= HERMITIAN_TOL && wf >= EIGEN_FLOOR,
        detail: format!("Hermitian defect {wd:e}, eigenvalue floor {wf:e}"),
    });
    let two_j = j * cr(2.0);
    let mut bad = Vec::new();
    for at in q.atoms() {
        for sign in [1.0, -1.0] {
            let m = &two_j + &at.jump * cr(sign);
            if crate::linalg::rcond(&m) < 1e-12 {
                bad.push(at.location);
            }
        }
    }
    bad.dedup();
    checks.push(Check {
        name: "2J ± Δq invertible",
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "all atoms of q".into()
        } else {
            format!("singular at {bad:?}")
        },
    });
    ValidationReport { checks }
}
