//! Balanced initial value problems, fundamental matrices and the forbidden set Λ.

use crate::error::{Error, Result};
use crate::linalg::{cr, eye, inverse, max_abs, polynomial_roots, rcond, solve, zeros, CMat, CVec, C64};
use crate::measures::{validate_coefficients, Density, Ends, MatrixMeasure, RealInterval, Side, ValidationReport};
use crate::ode::{self, OdeSettings, Trajectory};
use crate::quadrature::QuadSettings;

/// Relative singular-value threshold below which `1 ± Δ/2` counts as singular.
pub const FORBIDDEN_RCOND: f64 = 1e-10;
const WARN_COND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tolerances {
    pub ode: OdeSettings,
    pub quad: QuadSettings,
}

/// `Ju' + qu = λwu` on an interval, anchored at `x0`.
#[derive(Debug, Clone)]
pub struct SpectralProblem {
    interval: RealInterval,
    j: CMat,
    jinv: CMat,
    q: MatrixMeasure,
    w: MatrixMeasure,
    x0: f64,
    tol: Tolerances,
    report: ValidationReport,
}

impl SpectralProblem {
    /// Validates the coefficients and the anchor. `x0` may coincide with a finite endpoint.
    pub fn new(j: CMat, q: MatrixMeasure, w: MatrixMeasure, x0: f64) -> Result<Self> {
        let interval = q.interval();
        if w.interval() != interval {
            return Err(Error::InvalidMeasure("q and w live on different intervals".into()));
        }
        let report = validate_coefficients(&q, &w, &j).into_result()?;
        if !interval.contains_closed(x0) {
            return Err(Error::Domain {
                x: x0,
                a: interval.a,
                b: interval.b,
            });
        }
        if q.atom_at(x0).is_some() || w.atom_at(x0).is_some() {
            return Err(Error::InvalidMeasure(format!("x0 = {x0} carries an atom")));
        }
        let jinv = inverse(&j).ok_or_else(|| Error::NonConforming(vec!["J is singular".into()]))?;
        Ok(Self {
            interval,
            j,
            jinv,
            q,
            w,
            x0,
            tol: Tolerances::default(),
            report,
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self.q = self.q.with_quadrature(tol.quad);
        self.w = self.w.with_quadrature(tol.quad);
        self
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }
    pub fn interval(&self) -> RealInterval {
        self.interval
    }
    pub fn j(&self) -> &CMat {
        &self.j
    }
    pub fn j_inv(&self) -> &CMat {
        &self.jinv
    }
    pub fn q(&self) -> &MatrixMeasure {
        &self.q
    }
    pub fn w(&self) -> &MatrixMeasure {
        &self.w
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }
    pub fn validation(&self) -> &ValidationReport {
        &self.report
    }

    /// Same problem with another anchor.
    pub fn with_anchor(&self, x0: f64) -> Result<Self> {
        Ok(Self::new(self.j.clone(), self.q.clone(), self.w.clone(), x0)?.with_tolerances(self.tol))
    }

    /// Same coefficients restricted to `[lo, hi]`.
    pub fn restricted(&self, lo: f64, hi: f64, x0: f64) -> Result<Self> {
        let iv = RealInterval::new(lo, hi)?;
        let cut = |m: &MatrixMeasure| -> Result<MatrixMeasure> {
            let (r, cc) = m.shape();
            let pieces = m
                .pieces()
                .iter()
                .filter(|p| p.right > lo && p.left < hi)
                .map(|p| crate::measures::Piece::new(p.left.max(lo), p.right.min(hi), p.density.clone()))
                .collect();
            let atoms = m.atoms().iter().filter(|a| iv.contains(a.location)).cloned().collect();
            MatrixMeasure::new(r, cc, iv, pieces, atoms)
        };
        Ok(Self::new(self.j.clone(), cut(&self.q)?, cut(&self.w)?, x0)?.with_tolerances(self.tol))
    }

    /// Breakpoints of `q` and `w` (piece ends and atoms), sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = self.q.breakpoints();
        v.extend(self.w.breakpoints());
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Atom locations of `q` or `w`.
    pub fn atom_locations(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .q
            .atoms()
            .iter()
            .chain(self.w.atoms())
            .map(|a| a.location)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// The measure `r = J⁻¹(λw − q)`.
    pub fn r_measure(&self, lambda: C64) -> Result<MatrixMeasure> {
        let n = self.n();
        MatrixMeasure::combine(&[
            (&self.jinv * lambda, &self.w, eye(n)),
            (-&self.jinv, &self.q, eye(n)),
        ])
        .map(|m| m.with_quadrature(self.tol.quad))
    }

    pub fn fundamental_matrix(&self, lambda: C64) -> Result<FundamentalMatrix> {
        self.fundamental_matrix_on(lambda, self.interval.a, self.interval.b)
    }

    /// Fundamental matrix built on `[lo, hi]` (which must contain `x0`).
    pub fn fundamental_matrix_on(&self, lambda: C64, lo: f64, hi: f64) -> Result<FundamentalMatrix> {
        let r = self.r_measure(lambda)?;
        let prop = Propagation::build(&r, self.x0, &eye(self.n()), lo, hi, &self.tol.ode, Some(lambda))?;
        Ok(FundamentalMatrix { lambda, prop })
    }

    pub fn lambda_set(&self) -> LambdaSet {
        lambda_set(self, None)
    }

    /// Whether the endpoint has finite boundary values: finite, or infinite with no
    /// non-decaying density reaching it.
    pub fn endpoint_is_regular(&self, right: bool) -> bool {
        let x = if right { self.interval.b } else { self.interval.a };
        if x.is_finite() {
            return true;
        }
        [&self.q, &self.w].iter().all(|m| {
            m.pieces().iter().all(|p| {
                let reaches = if right { !p.right.is_finite() } else { !p.left.is_finite() };
                !reaches || p.density.is_zero()
            })
        })
    }
}

/// Values `u⁻`, `u#`, `u⁺` at an atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Knot {
    pub x: f64,
    pub minus: CMat,
    pub balanced: CMat,
    pub plus: CMat,
}

#[derive(Debug, Clone)]
enum SegKind {
    Constant(CMat),
    Steps { traj: Trajectory, dens: Vec<Density> },
}

#[derive(Debug, Clone)]
struct Segment {
    lo: f64,
    hi: f64,
    kind: SegKind,
}

/// Sum of the densities on the open segment `(lo, hi)`: endpoint samples
/// move inward so a discontinuous density contributes its one-sided limit.
fn density_sum(dens: &[Density], lo: f64, hi: f64, x: f64) -> CMat {
    let x = if x <= lo {
        lo.next_up()
    } else if x >= hi {
        hi.next_down()
    } else {
        x
    };
    let mut acc = dens[0].eval(x);
    for d in &dens[1..] {
        acc += d.eval(x);
    }
    acc
}

impl Segment {
    fn eval(&self, x: f64) -> CMat {
        match &self.kind {
            SegKind::Constant(v) => v.clone(),
            SegKind::Steps { traj, dens } => traj.eval(&|t| density_sum(dens, self.lo, self.hi, t), x),
        }
    }
}

/// The balanced solution of `Y' = rY` through atoms, stored over a closed range.
#[derive(Debug, Clone)]
pub struct Propagation {
    x0: f64,
    lo: f64,
    hi: f64,
    y0: CMat,
    segments: Vec<Segment>,
    knots: Vec<Knot>,
    lo_value: CMat,
    hi_value: CMat,
}

fn check_atom(delta: &CMat, x: f64, lambda: Option<C64>) -> Result<()> {
    let n = delta.nrows();
    for sign in [1.0, -1.0] {
        let m = eye(n) + delta * cr(0.5 * sign);
        let rc = rcond(&m);
        if rc < FORBIDDEN_RCOND {
            return Err(Error::LambdaForbidden { location: x, lambda });
        }
        if rc < 1.0 / WARN_COND {
            log::warn!("1 ± Δ/2 is ill-conditioned at x = {x} (condition ≈ {:.3e})", 1.0 / rc);
        }
    }
    Ok(())
}

impl Propagation {
    pub fn build(
        r: &MatrixMeasure,
        x0: f64,
        y0: &CMat,
        lo: f64,
        hi: f64,
        ode: &OdeSettings,
        lambda: Option<C64>,
    ) -> Result<Self> {
        let iv = r.interval();
        if !(lo <= x0 && x0 <= hi) || lo < iv.a || hi > iv.b {
            return Err(Error::Domain { x: x0, a: lo, b: hi });
        }
        if r.atom_at(x0).is_some() {
            return Err(Error::Usage(format!("initial point {x0} carries an atom")));
        }
        let breaks = r.breakpoints();
        let mut segments = Vec::new();
        let mut knots = Vec::new();

        // rightwards
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&t| t > x0 && t < hi).collect();
        if hi.is_finite() && hi > x0 {
            cuts.push(hi);
        }
        let mut cur = y0.clone();
        let mut s = x0;
        for &t in &cuts {
            let (seg, end) = Self::run(r, s, t, &cur, ode)?;
            segments.push(seg);
            cur = end;
            if let Some(atom) = r.atom_at(t) {
                check_atom(&atom.jump, t, lambda)?;
                let n = atom.jump.nrows();
                let lhs = eye(n) - &atom.jump * cr(0.5);
                let bal = solve(&lhs, &cur).ok_or(Error::LambdaForbidden { location: t, lambda })?;
                let rhs = (eye(n) + &atom.jump * cr(0.5)) * &cur;
                let plus = solve(&lhs, &rhs).ok_or(Error::LambdaForbidden { location: t, lambda })?;
                knots.push(Knot {
                    x: t,
                    minus: cur.clone(),
                    balanced: bal,
                    plus: plus.clone(),
                });
                cur = plus;
            }
            s = t;
        }
        let hi_value = if hi.is_finite() {
            cur
        } else {
            Self::tail(r, s, cur, true, ode, &mut segments)?
        };

        // leftwards
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&t| t < x0 && t > lo).collect();
        cuts.reverse();
        if lo.is_finite() && lo < x0 {
            cuts.push(lo);
        }
        let mut cur = y0.clone();
        let mut s = x0;
        for &t in &cuts {
            let (seg, end) = Self::run(r, s, t, &cur, ode)?;
            segments.push(seg);
            cur = end;
            if let Some(atom) = r.atom_at(t) {
                check_atom(&atom.jump, t, lambda)?;
                let n = atom.jump.nrows();
                let lhs = eye(n) + &atom.jump * cr(0.5);
                let bal = solve(&lhs, &cur).ok_or(Error::LambdaForbidden { location: t, lambda })?;
                let rhs = (eye(n) - &atom.jump * cr(0.5)) * &cur;
                let minus = solve(&lhs, &rhs).ok_or(Error::LambdaForbidden { location: t, lambda })?;
                knots.push(Knot {
                    x: t,
                    minus: minus.clone(),
                    balanced: bal,
                    plus: cur.clone(),
                });
                cur = minus;
            }
            s = t;
        }
        let lo_value = if lo.is_finite() {
            cur
        } else {
            Self::tail(r, s, cur, false, ode, &mut segments)?
        };

        segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        knots.sort_by(|a, b| a.x.total_cmp(&b.x));
        Ok(Self {
            x0,
            lo,
            hi,
            y0: y0.clone(),
            segments,
            knots,
            lo_value,
            hi_value,
        })
    }

    /// Integrates from `s` (value `cur`) to `t`; returns the segment and the value at `t`.
    fn run(r: &MatrixMeasure, s: f64, t: f64, cur: &CMat, ode: &OdeSettings) -> Result<(Segment, CMat)> {
        let (lo, hi) = if s < t { (s, t) } else { (t, s) };
        let dens = r.segment_densities(lo, hi);
        if dens.is_empty() {
            return Ok((
                Segment {
                    lo,
                    hi,
                    kind: SegKind::Constant(cur.clone()),
                },
                cur.clone(),
            ));
        }
        let a = |x: f64| density_sum(&dens, lo, hi, x);
        let traj = ode::integrate(&a, s, cur, t, ode)?;
        let end = traj.final_value().clone();
        Ok((
            Segment {
                lo,
                hi,
                kind: SegKind::Steps { traj, dens },
            },
            end,
        ))
    }

    /// Continues to an infinite end. Without density reaching the end the solution
    /// is constant; a callable density is followed on doubling windows until the
    /// value settles.
    fn tail(
        r: &MatrixMeasure,
        s: f64,
        cur: CMat,
        right: bool,
        ode: &OdeSettings,
        segments: &mut Vec<Segment>,
    ) -> Result<CMat> {
        let far = if right { f64::INFINITY } else { f64::NEG_INFINITY };
        let (lo, hi) = if right { (s, far) } else { (far, s) };
        let dens = r.segment_densities(lo, hi);
        if dens.is_empty() {
            segments.push(Segment {
                lo,
                hi,
                kind: SegKind::Constant(cur.clone()),
            });
            return Ok(cur);
        }
        if dens.iter().any(|d| matches!(d, Density::Polynomial(_))) {
            return Err(Error::Unsupported(format!(
                "the density does not decay at {far}; the endpoint is not regular"
            )));
        }
        let dir = if right { 1.0 } else { -1.0 };
        let mut len = s.abs().max(1.0);
        let mut start = s;
        let mut value = cur;
        let mut settled = 0;
        for _ in 0..60 {
            let end = start + dir * len;
            let (seg, next) = Self::run(r, start, end, &value, ode)?;
            segments.push(seg);
            let change = max_abs(&(&next - &value));
            let scale = max_abs(&next).max(1.0);
            value = next;
            start = end;
            len *= 2.0;
            if change <= ode.rel_tol * scale {
                settled += 1;
                if settled >= 2 {
                    let (lo, hi) = if right { (start, far) } else { (far, start) };
                    segments.push(Segment {
                        lo,
                        hi,
                        kind: SegKind::Constant(value.clone()),
                    });
                    return Ok(value);
                }
            } else {
                settled = 0;
            }
        }
        Err(Error::Numeric(format!("no limit found towards {far}")))
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn eval(&self, x: f64, side: Side) -> Result<CMat> {
        if x.is_nan() || x < self.lo || x > self.hi {
            return Err(Error::Domain {
                x,
                a: self.lo,
                b: self.hi,
            });
        }
        if x == self.hi && (x.is_infinite() || self.hi != self.x0) {
            return Ok(self.hi_value.clone());
        }
        if x == self.lo && (x.is_infinite() || self.lo != self.x0) {
            return Ok(self.lo_value.clone());
        }
        if x == self.x0 {
            return Ok(self.y0.clone());
        }
        if let Ok(k) = self.knots.binary_search_by(|k| k.x.total_cmp(&x)) {
            let kn = &self.knots[k];
            return Ok(match side {
                Side::Left => kn.minus.clone(),
                Side::Right => kn.plus.clone(),
                Side::Balanced => kn.balanced.clone(),
            });
        }
        let k = self.segments.partition_point(|s| s.hi < x);
        let seg = self
            .segments
            .get(k)
            .filter(|s| s.lo <= x && x <= s.hi)
            .ok_or(Error::Domain {
                x,
                a: self.lo,
                b: self.hi,
            })?;
        Ok(seg.eval(x))
    }

    /// All integrator nodes, segment ends and atoms, sorted.
    pub fn nodes(&self) -> Vec<f64> {
        let mut v = vec![self.x0];
        for s in &self.segments {
            for x in [s.lo, s.hi] {
                if x.is_finite() {
                    v.push(x);
                }
            }
            if let SegKind::Steps { traj, .. } = &s.kind {
                v.extend(traj.xs.iter().copied());
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// `U(·, λ)` with `U(x0, λ) = 𝟙`, stored over its construction range.
#[derive(Debug, Clone)]
pub struct FundamentalMatrix {
    lambda: C64,
    prop: Propagation,
}

impl FundamentalMatrix {
    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn range(&self) -> (f64, f64) {
        self.prop.range()
    }

    /// `U⁻`, `U⁺` or the balanced `U` at `x` (the limit at an endpoint).
    pub fn eval(&self, x: f64, side: Side) -> Result<CMat> {
        self.prop.eval(x, side)
    }

    pub fn at(&self, x: f64) -> Result<CMat> {
        self.prop.eval(x, Side::Balanced)
    }

    pub fn knots(&self) -> &[Knot] {
        self.prop.knots()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.prop.nodes()
    }

    /// The solution `U(·, λ) u0` sampled on `grid ∪ atoms ∪ integrator nodes`.
    pub fn solution(&self, u0: &CVec, grid: &[f64]) -> Result<BalancedSolution> {
        let (lo, hi) = self.range();
        let mut pts: Vec<f64> = grid.to_vec();
        pts.extend(self.nodes());
        pts.extend(self.knots().iter().map(|k| k.x));
        pts.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let u0m = CMat::from_column_slice(u0.len(), 1, u0.as_slice());
        let values = pts
            .iter()
            .map(|&x| self.at(x).map(|m| (m * &u0m).column(0).into_owned()))
            .collect::<Result<Vec<_>>>()?;
        let atoms = self
            .knots()
            .iter()
            .map(|k| AtomValues {
                x: k.x,
                minus: (&k.minus * &u0m).column(0).into_owned(),
                balanced: (&k.balanced * &u0m).column(0).into_owned(),
                plus: (&k.plus * &u0m).column(0).into_owned(),
            })
            .collect();
        Ok(BalancedSolution {
            grid: pts,
            values,
            atoms,
            lambda: Some(self.lambda),
            tolerance: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomValues {
    pub x: f64,
    pub minus: CVec,
    pub balanced: CVec,
    pub plus: CVec,
}

/// A balanced solution sampled on a grid containing every atom in range.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedSolution {
    pub grid: Vec<f64>,
    pub values: Vec<CVec>,
    pub atoms: Vec<AtomValues>,
    pub lambda: Option<C64>,
    /// Integrator relative tolerance used.
    pub tolerance: f64,
}

impl BalancedSolution {
    /// Balanced value at a grid point.
    pub fn value_at(&self, x: f64) -> Option<&CVec> {
        self.grid
            .binary_search_by(|g| g.total_cmp(&x))
            .ok()
            .map(|k| &self.values[k])
    }

    /// One-sided values at a grid point (equal away from atoms).
    pub fn sides_at(&self, x: f64) -> Option<(CVec, CVec)> {
        if let Some(a) = self.atoms.iter().find(|a| a.x == x) {
            return Some((a.minus.clone(), a.plus.clone()));
        }
        self.value_at(x).map(|v| (v.clone(), v.clone()))
    }
}

/// Balanced solution of `u' = ru + g` with `u(x0) = u0`, from `x0` to `target`.
pub fn solve_ivp_balanced(
    r: &MatrixMeasure,
    g: &MatrixMeasure,
    x0: f64,
    u0: &CVec,
    target: f64,
    grid: &[f64],
    ode: &OdeSettings,
) -> Result<BalancedSolution> {
    let (n, m) = r.shape();
    if n != m || g.shape() != (n, 1) || u0.len() != n || g.interval() != r.interval() {
        return Err(Error::Usage("shape mismatch between r, g and u0".into()));
    }
    let embed = CMat::from_fn(n + 1, n, |i, j| if i == j { cr(1.0) } else { cr(0.0) });
    let last = CMat::from_fn(1, n + 1, |_, j| if j == n { cr(1.0) } else { cr(0.0) });
    let aug = MatrixMeasure::combine(&[(embed.clone(), r, embed.transpose()), (embed, g, last)])?;
    let mut y0 = zeros(n + 1, 1);
    for i in 0..n {
        y0[(i, 0)] = u0[i];
    }
    y0[(n, 0)] = cr(1.0);
    let (lo, hi) = if target >= x0 { (x0, target) } else { (target, x0) };
    let prop = Propagation::build(&aug, x0, &y0, lo, hi, ode, None)?;
    let head = |m: &CMat| m.rows(0, n).column(0).into_owned();
    let mut grid: Vec<f64> = prop.nodes().into_iter().chain(grid.iter().copied()).filter(|x| *x >= lo && *x <= hi).collect();
    for x in [lo, hi] {
        if x.is_finite() {
            grid.push(x);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = grid
        .iter()
        .map(|&x| prop.eval(x, Side::Balanced).map(|v| head(&v)))
        .collect::<Result<Vec<_>>>()?;
    let atoms = prop
        .knots()
        .iter()
        .map(|k| AtomValues {
            x: k.x,
            minus: head(&k.minus),
            balanced: head(&k.balanced),
            plus: head(&k.plus),
        })
        .collect();
    Ok(BalancedSolution {
        grid,
        values,
        atoms,
        lambda: None,
        tolerance: ode.rel_tol,
    })
}

pub type VectorFn = std::sync::Arc<dyn Fn(f64) -> CVec + Send + Sync>;

/// Solution of `Ju' + qu = λwu + wf` with `u(x0) = u0`, evaluable anywhere in its range.
#[derive(Debug, Clone)]
pub struct ForcedSolution {
    n: usize,
    lambda: C64,
    prop: Propagation,
}

impl ForcedSolution {
    pub fn new(p: &SpectralProblem, lambda: C64, u0: &CVec, f: VectorFn) -> Result<Self> {
        let iv = p.interval();
        Self::on(p, lambda, u0, f, iv.a, iv.b)
    }

    pub fn on(p: &SpectralProblem, lambda: C64, u0: &CVec, f: VectorFn, lo: f64, hi: f64) -> Result<Self> {
        let n = p.n();
        let r = p.r_measure(lambda)?;
        let fm: std::sync::Arc<dyn Fn(f64) -> CMat + Send + Sync> = {
            let f = f.clone();
            std::sync::Arc::new(move |x| CMat::from_column_slice(n, 1, f(x).as_slice()))
        };
        let wf = p.w().times_function(fm)?;
        let embed = CMat::from_fn(n + 1, n, |i, j| if i == j { cr(1.0) } else { cr(0.0) });
        let last = CMat::from_fn(1, n + 1, |_, j| if j == n { cr(1.0) } else { cr(0.0) });
        let aug = MatrixMeasure::combine(&[
            (embed.clone(), &r, embed.transpose()),
            (&embed * p.j_inv(), &wf, last),
        ])?;
        let mut y0 = zeros(n + 1, 1);
        for i in 0..n {
            y0[(i, 0)] = u0[i];
        }
        y0[(n, 0)] = cr(1.0);
        let prop = Propagation::build(&aug, p.x0(), &y0, lo, hi, &p.tolerances().ode, Some(lambda))?;
        Ok(Self { n, lambda, prop })
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn eval(&self, x: f64, side: Side) -> Result<CVec> {
        self.prop
            .eval(x, side)
            .map(|m| m.rows(0, self.n).column(0).into_owned())
    }

    pub fn at(&self, x: f64) -> Result<CVec> {
        self.eval(x, Side::Balanced)
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.prop.nodes()
    }

    /// Samples on `grid ∪ atoms ∪ integrator nodes` (finite points only).
    pub fn solution(&self, grid: &[f64]) -> Result<BalancedSolution> {
        let (lo, hi) = self.prop.range();
        let n = self.n;
        let head = |m: &CMat| m.rows(0, n).column(0).into_owned();
        let mut pts: Vec<f64> = grid.to_vec();
        pts.extend(self.nodes());
        pts.extend(self.prop.knots().iter().map(|k| k.x));
        pts.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let values = pts.iter().map(|&x| self.at(x)).collect::<Result<Vec<_>>>()?;
        let atoms = self
            .prop
            .knots()
            .iter()
            .map(|k| AtomValues {
                x: k.x,
                minus: head(&k.minus),
                balanced: head(&k.balanced),
                plus: head(&k.plus),
            })
            .collect();
        Ok(BalancedSolution {
            grid: pts,
            values,
            atoms,
            lambda: Some(self.lambda),
            tolerance: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WronskianReport {
    pub values: Vec<CMat>,
    pub mean: CMat,
    pub deviation: f64,
}

fn summarize(values: Vec<CMat>) -> WronskianReport {
    let k = values.len().max(1) as f64;
    let (r, cc) = values.first().map(|m| m.shape()).unwrap_or((1, 1));
    let mean = values.iter().fold(zeros(r, cc), |acc, m| acc + m) * cr(1.0 / k);
    let deviation = values.iter().map(|m| max_abs(&(m - &mean))).fold(0.0, f64::max);
    WronskianReport {
        values,
        mean,
        deviation,
    }
}

/// `u^{±*} J v^{±}` along a common grid (both sides at atoms).
pub fn wronskian(u: &BalancedSolution, v: &BalancedSolution, j: &CMat) -> Result<WronskianReport> {
    if u.grid != v.grid {
        return Err(Error::Usage("wronskian needs solutions on a common grid".into()));
    }
    let mut values = Vec::new();
    for &x in &u.grid {
        let (um, up) = u.sides_at(x).expect("grid point");
        let (vm, vp) = v.sides_at(x).expect("grid point");
        values.push(CMat::from_element(1, 1, um.dotc(&(j * &vm))));
        if up != um || vp != vm {
            values.push(CMat::from_element(1, 1, up.dotc(&(j * &vp))));
        }
    }
    Ok(summarize(values))
}

/// `U(x, λ̄)^{±*} J U(x, λ)^{±}` over `grid` plus atoms, for the matrix pair.
pub fn wronskian_matrix(ubar: &FundamentalMatrix, u: &FundamentalMatrix, j: &CMat, grid: &[f64]) -> Result<WronskianReport> {
    let mut values = Vec::new();
    let atoms: Vec<f64> = u.knots().iter().map(|k| k.x).collect();
    for &x in grid.iter().filter(|x| !atoms.contains(x)) {
        values.push(ubar.at(x)?.adjoint() * j * u.at(x)?);
    }
    for (kb, k) in ubar.knots().iter().zip(u.knots()) {
        values.push(kb.minus.adjoint() * j * &k.minus);
        values.push(kb.plus.adjoint() * j * &k.plus);
    }
    Ok(summarize(values))
}

/// Accumulated `Φ^±(x)` with `u^±(x) = U^±(x,λ) J⁻¹ Φ^±(x)` the variation-of-constants
/// solution vanishing at `x0`. `points` must lie in the range of `ubar`.
pub fn voc_accumulate<F>(p: &SpectralProblem, ubar: &FundamentalMatrix, f: &F, points: &[f64]) -> Result<Vec<(CMat, CMat)>>
where
    F: Fn(f64) -> CVec,
{
    let n = p.n();
    let x0 = p.x0();
    let w = p.w();
    let breaks = p.breakpoints();
    let left = |y: f64| ubar.at(y).map(|m| m.adjoint());
    let right = |y: f64| Ok(CMat::from_column_slice(n, 1, f(y).as_slice()));
    let atom_term = |x: f64| -> Result<CMat> {
        match w.atom_at(x) {
            Some(a) => Ok(left(x)? * &a.jump * right(x)?),
            None => Ok(zeros(n, 1)),
        }
    };
    let mut uniq = points.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let mut vals = vec![(zeros(n, 1), zeros(n, 1)); uniq.len()];

    let mut acc = zeros(n, 1);
    let mut prev = x0;
    for (k, &x) in uniq.iter().enumerate().filter(|(_, &x)| x >= x0) {
        if x > prev {
            acc += w.integrate_sandwich(left, right, prev, x, Ends::Open, &breaks)?;
            prev = x;
        }
        let minus = acc.clone();
        acc += atom_term(x)?;
        vals[k] = (minus, acc.clone());
    }
    let mut acc = zeros(n, 1);
    let mut prev = x0;
    for (k, &x) in uniq.iter().enumerate().rev().filter(|(_, &x)| x < x0) {
        acc += w.integrate_sandwich(left, right, x, prev, Ends::Open, &breaks)?;
        prev = x;
        let plus = -acc.clone();
        acc += atom_term(x)?;
        vals[k] = (-acc.clone(), plus);
    }
    Ok(points
        .iter()
        .map(|x| vals[uniq.binary_search_by(|u| u.total_cmp(x)).expect("present")].clone())
        .collect())
}

/// The solution of `Ju' + qu = λwu + wf` with `u(x0) = 0`.
pub fn variation_of_constants<F>(p: &SpectralProblem, lambda: C64, f: &F, grid: &[f64]) -> Result<BalancedSolution>
where
    F: Fn(f64) -> CVec,
{
    let iv = p.interval();
    let u = p.fundamental_matrix(lambda)?;
    let ubar = p.fundamental_matrix(lambda.conj())?;
    let mut pts: Vec<f64> = grid.to_vec();
    pts.extend(p.atom_locations());
    pts.push(p.x0());
    pts.retain(|x| iv.contains_closed(*x));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let phis = voc_accumulate(p, &ubar, f, &pts)?;
    let jinv = p.j_inv();
    let mut values = Vec::new();
    let mut atoms = Vec::new();
    for (&x, (pm, pp)) in pts.iter().zip(&phis) {
        let um = u.eval(x, Side::Left)? * jinv * pm;
        let up = u.eval(x, Side::Right)? * jinv * pp;
        let bal = (&um + &up) * cr(0.5);
        if p.w().atom_at(x).is_some() || p.q().atom_at(x).is_some() {
            atoms.push(AtomValues {
                x,
                minus: um.column(0).into_owned(),
                balanced: bal.column(0).into_owned(),
                plus: up.column(0).into_owned(),
            });
        }
        values.push(bal.column(0).into_owned());
    }
    Ok(BalancedSolution {
        grid: pts,
        values,
        atoms,
        lambda: Some(lambda),
        tolerance: p.tolerances().ode.rel_tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilSign {
    /// `det(2J + λΔw − Δq) = 0`
    Plus,
    /// `det(2J − λΔw + Δq) = 0`
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEntry {
    pub lambda: C64,
    pub location: f64,
    pub sign: PencilSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSet {
    pub entries: Vec<LambdaEntry>,
    /// Atoms whose pencil loses degree, with the number of infinite eigenvalues.
    pub infinite: Vec<(f64, usize)>,
    /// Atoms where the pencil determinant vanishes identically.
    pub degenerate: Vec<f64>,
}

impl LambdaSet {
    pub fn values(&self) -> Vec<C64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn intersects_real_axis(&self) -> bool {
        !self.degenerate.is_empty() || self.entries.iter().any(|e| e.lambda.im.abs() <= 1e-12 * (1.0 + e.lambda.norm()))
    }

    /// Distance from `z` to the nearest element.
    pub fn distance(&self, z: C64) -> f64 {
        self.entries.iter().map(|e| (e.lambda - z).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.degenerate.is_empty()
    }
}

/// Rectangle `[re_lo, re_hi] × [im_lo, im_hi]` in the λ-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Region {
    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }
}

/// The forbidden set Λ: per atom, the roots of `det(2J ± (λΔw − Δq))`.
pub fn lambda_set(p: &SpectralProblem, region: Option<Region>) -> LambdaSet {
    let n = p.n();
    let two_j = p.j() * cr(2.0);
    let mut entries = Vec::new();
    let mut infinite = Vec::new();
    let mut degenerate = Vec::new();
    for x in p.atom_locations() {
        let dq = p.q().jump(x).expect("atom inside");
        let dw = p.w().jump(x).expect("atom inside");
        let pencil = |l: C64| crate::linalg::determinant(&(&two_j + &dw * l - &dq));
        let scale = (max_abs(&two_j) + max_abs(&dq)) / max_abs(&dw).max(1e-300);
        let radius = scale.clamp(1e-3, 1e6);
        let pts = n + 1;
        let samples: Vec<(C64, C64)> = (0..pts)
            .map(|k| {
                let z = C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / pts as f64);
                (z, pencil(z))
            })
            .collect();
        // coefficients of the degree-≤n polynomial by the discrete Fourier transform
        let coeffs: Vec<C64> = (0..pts)
            .map(|jdx| {
                let sum = samples.iter().fold(cr(0.0), |acc, (z, v)| acc + v * z.powi(-(jdx as i32)));
                sum / cr(pts as f64)
            })
            .collect();
        let at_radius: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * radius.powi(k as i32))
            .collect();
        let total = at_radius.iter().copied().fold(0.0, f64::max);
        if total == 0.0 {
            degenerate.push(x);
            continue;
        }
        let mut deg = n;
        while deg > 0 && at_radius[deg] <= 1e-12 * total {
            deg -= 1;
        }
        if deg == 0 && at_radius[0] <= 1e-12 * total {
            degenerate.push(x);
            continue;
        }
        if deg < n {
            infinite.push((x, n - deg));
        }
        // rescale z = radius·t for conditioning
        let scaled: Vec<C64> = (0..=deg).map(|k| coeffs[k] * cr(radius.powi(k as i32))).collect();
        let roots = polynomial_roots(&scaled, 1e-14);
        for t in roots {
            let l = t * cr(radius);
            entries.push(LambdaEntry {
                lambda: l,
                location: x,
                sign: PencilSign::Plus,
            });
            entries.push(LambdaEntry {
                lambda: l.conj(),
                location: x,
                sign: PencilSign::Minus,
            });
        }
    }
    if let Some(reg) = region {
        entries.retain(|e| reg.contains(e.lambda));
    }
    LambdaSet {
        entries,
        infinite,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    /// Richardson-extrapolated estimate of `∂U(x,λ)/∂λ`.
    pub derivative: CMat,
    pub coarse: CMat,
    pub fine: CMat,
    /// `|D(h) − D(h/2)| / |D(h/2) − D(h/4)|`; about 4 for a smooth dependence.
    pub ratio: f64,
}

/// Central-difference estimate of `∂U(x,λ)/∂λ` at `λ0` with step `h`.
pub fn dlambda_check(p: &SpectralProblem, lambda0: C64, x: f64, h: f64) -> Result<DerivativeReport> {
    if !(h > 1e-12) {
        return Err(Error::Numeric(format!("step {h} too small")));
    }
    let d = |step: f64| -> Result<CMat> {
        let plus = p.fundamental_matrix(lambda0 + cr(step))?.at(x)?;
        let minus = p.fundamental_matrix(lambda0 - cr(step))?.at(x)?;
        Ok((plus - minus) * cr(0.5 / step))
    };
    let d1 = d(h)?;
    let d2 = d(h / 2.0)?;
    let d3 = d(h / 4.0)?;
    let den = max_abs(&(&d2 - &d3));
    let num = max_abs(&(&d1 - &d2));
    let ratio = if den == 0.0 {
        if num == 0.0 {
            4.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    };
    let derivative = &d3 + (&d3 - &d2) * cr(1.0 / 3.0);
    Ok(DerivativeReport {
        derivative,
        coarse: d1,
        fine: d3,
        ratio,
    })
}
