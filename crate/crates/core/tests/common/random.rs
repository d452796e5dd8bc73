//! Seeded random regular problems with `J = iH`, `H > 0` (so `Λ ∩ ℝ = ∅`),
//! positive definite `w` densities and at most three atoms, plus the
//! property probes run over them.

use std::sync::Arc;

use balanced_spectral::greens::{herglotz_matrix, EigenSettings, RegularProblem};
use balanced_spectral::ivp::{wronskian_matrix, SpectralProblem, VectorFn};
use balanced_spectral::linalg::{c, cr, eye, hermitian_eigenvalues, inverse, max_abs, CMat, CVec, C64};
use balanced_spectral::measures::{Atom, Density, MatrixMeasure, Piece, RealInterval};
use balanced_spectral::par::Exec;
use balanced_spectral::spectral::{parseval_check, Expansion};
use balanced_spectral::structure::{inner_product, lagrange_residual, TmaxPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Sample {
    pub seed: u64,
    pub problem: SpectralProblem,
    pub boundary: CMat,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex(r: &mut ChaCha8Rng, scale: f64) -> C64 {
    c(r.random_range(-scale..scale), r.random_range(-scale..scale))
}

pub fn matrix(r: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> CMat {
    CMat::from_fn(n, m, |_, _| complex(r, scale))
}

pub fn hermitian(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let a = matrix(r, n, n, scale);
    (&a + a.adjoint()) * cr(0.5)
}

/// `B*B + floor·𝟙`.
pub fn positive(r: &mut ChaCha8Rng, n: usize, scale: f64, floor: f64) -> CMat {
    let b = matrix(r, n, n, scale);
    b.adjoint() * &b + eye(n) * cr(floor)
}

pub fn vector(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CVec {
    CVec::from_fn(n, |_, _| complex(r, scale))
}

/// Cayley transform `(𝟙 − A/2)⁻¹(𝟙 + A/2)` of `A = J⁻¹H`: a `J`-unitary matrix.
pub fn j_unitary(j: &CMat, h: &CMat) -> CMat {
    let a = inverse(j).unwrap() * h * cr(0.5);
    let n = j.nrows();
    inverse(&(eye(n) - &a)).unwrap() * (eye(n) + a)
}

/// `Ã = [X, −XV]`, i.e. `u(a) = V u(b)`.
pub fn coupled(x: &CMat, v: &CMat) -> CMat {
    let n = x.nrows();
    let mut m = CMat::zeros(n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(x);
    m.view_mut((0, n), (n, n)).copy_from(&(-(x * v)));
    m
}

/// Random polynomial vector function of degree ≤ 2.
pub fn poly_fn(r: &mut ChaCha8Rng, n: usize) -> VectorFn {
    let cs: Vec<CVec> = (0..3).map(|_| vector(r, n, 1.0)).collect();
    Arc::new(move |x| &cs[0] + &cs[1] * cr(x) + &cs[2] * cr(x * x))
}

pub fn random_problem(seed: u64) -> Sample {
    let mut r = rng(seed);
    let n = r.random_range(1..=3usize);
    let len = r.random_range(1.0..2.0);
    let iv = RealInterval::new(0.0, len).unwrap();
    let j = positive(&mut r, n, 0.5, 1.0) * c(0.0, 1.0);
    let q0 = hermitian(&mut r, n, 1.0);
    let q1 = hermitian(&mut r, n, 0.5);
    let w0 = positive(&mut r, n, 0.4, 0.2);
    let atoms = r.random_range(0..=3usize);
    let mut spots: Vec<f64> = Vec::new();
    while spots.len() < atoms {
        let x = r.random_range(0.1 * len..0.9 * len);
        if spots.iter().all(|s| (s - x).abs() > 0.05) {
            spots.push(x);
        }
    }
    let (mut qa, mut wa) = (Vec::new(), Vec::new());
    for &x in &spots {
        if r.random_bool(0.5) {
            qa.push(Atom::new(x, hermitian(&mut r, n, 0.8)));
        } else {
            wa.push(Atom::new(x, positive(&mut r, n, 0.4, 0.0)));
        }
    }
    let q = MatrixMeasure::new(n, n, iv, vec![Piece::new(0.0, len, Density::Polynomial(vec![q0, q1]))], qa).unwrap();
    let w = MatrixMeasure::new(n, n, iv, vec![Piece::new(0.0, len, Density::constant(w0))], wa).unwrap();
    let x0 = loop {
        let x = if r.random_bool(0.2) { 0.0 } else { r.random_range(0.0..len) };
        if spots.iter().all(|s| (s - x).abs() > 0.02) {
            break x;
        }
    };
    let problem = SpectralProblem::new(j.clone(), q, w, x0).unwrap();
    let v = j_unitary(&j, &hermitian(&mut r, n, 1.5));
    let x = matrix(&mut r, n, n, 1.0) + eye(n) * cr(1.5);
    Sample {
        seed,
        problem,
        boundary: coupled(&x, &v),
    }
}

fn upper(r: &mut ChaCha8Rng) -> C64 {
    c(r.random_range(-3.0..3.0), r.random_range(0.2..2.0))
}

/// `max |U(x,λ̄)*JU(x,λ) − J|` over a grid and the one-sided values at atoms.
pub fn wronskian_deviation(p: &SpectralProblem, r: &mut ChaCha8Rng) -> f64 {
    let l = upper(r) * if r.random_bool(0.5) { cr(1.0) } else { cr(-1.0) };
    let u = p.fundamental_matrix(l).unwrap();
    let ubar = p.fundamental_matrix(l.conj()).unwrap();
    let iv = p.interval();
    let grid: Vec<f64> = (0..=16).map(|k| iv.a + (iv.b - iv.a) * k as f64 / 16.0).collect();
    let rep = wronskian_matrix(&ubar, &u, p.j(), &grid).unwrap();
    rep.values.iter().map(|m| max_abs(&(m - p.j()))).fold(0.0, f64::max)
}

/// Lagrange identity residual for two random pairs, relative to the size of its terms.
pub fn lagrange_deviation(p: &SpectralProblem, r: &mut ChaCha8Rng) -> f64 {
    let n = p.n();
    let first = TmaxPair::new(p, complex(r, 2.0), &vector(r, n, 1.0), poly_fn(r, n)).unwrap();
    let second = TmaxPair::new(p, complex(r, 2.0), &vector(r, n, 1.0), poly_fn(r, n)).unwrap();
    let res = lagrange_residual(p, &first, &second).unwrap();
    let vf = inner_product(p, |x| second.u(x, balanced_spectral::measures::Side::Balanced), |x| first.image(x)).unwrap();
    res.norm() / (1.0 + vf.norm())
}

/// Smallest eigenvalue of `Im M(λ)/Im λ` over `count` points with
/// `Im λ` log-uniform in `[1e-2, 10]`.
pub fn herglotz_floor(rp: &RegularProblem, r: &mut ChaCha8Rng, count: usize) -> f64 {
    let mf = rp.m_function();
    (0..count)
        .map(|_| {
            let l = c(r.random_range(-3.0..3.0), 10f64.powf(r.random_range(-2.0..1.0)));
            let m = mf.eval(l).unwrap();
            hermitian_eigenvalues(&herglotz_matrix(&m, l))[0]
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn adjoint_deviation(rp: &RegularProblem, r: &mut ChaCha8Rng) -> f64 {
    let mf = rp.m_function();
    (0..3)
        .map(|_| {
            let l = upper(r);
            let m = mf.eval(l).unwrap();
            let mb = mf.eval(l.conj()).unwrap();
            max_abs(&(mb - m.adjoint()))
        })
        .fold(0.0, f64::max)
}

/// `max |R(λ)f − R(μ)f − (λ − μ)R(λ)R(μ)f|` over sample points.
pub fn resolvent_deviation(rp: &RegularProblem, r: &mut ChaCha8Rng) -> f64 {
    let p = rp.problem();
    let n = p.n();
    let (l, mu) = (upper(r), upper(r).conj());
    let f = poly_fn(r, n);
    let el = rp.resolvent_apply(l, f.clone()).unwrap();
    let em = rp.resolvent_apply(mu, f).unwrap();
    let em_fn: VectorFn = {
        let em = em.clone();
        Arc::new(move |x| em.at(x).unwrap())
    };
    let elem = rp.resolvent_apply(l, em_fn).unwrap();
    let iv = p.interval();
    let mut worst: f64 = 0.0;
    let mut points: Vec<f64> = (0..=8).map(|k| iv.a + (iv.b - iv.a) * k as f64 / 8.0).collect();
    points.extend(p.atom_locations());
    for x in points {
        let a = el.at(x).unwrap();
        let d = &a - em.at(x).unwrap() - elem.at(x).unwrap() * (l - mu);
        worst = worst.max(d.norm());
    }
    worst
}

/// Parseval residual for two random eigenfunction combinations, relative to
/// `‖f‖‖g‖`, and the number of eigenvalues used.
pub fn parseval_deviation(rp: &RegularProblem, r: &mut ChaCha8Rng, exec: Exec) -> (f64, usize) {
    let settings = EigenSettings {
        grid: 300,
        exec,
        ..Default::default()
    };
    let sm = rp.spectral_measure(-12.0, 12.0, &settings).unwrap();
    let p = rp.problem();
    let k = sm.points.len();
    if k == 0 {
        return (0.0, 0);
    }
    let coeffs = |r: &mut ChaCha8Rng| -> Vec<CVec> { (0..k).map(|_| vector(r, p.n(), 1.0)).collect() };
    let cf = coeffs(r);
    let cg = coeffs(r);
    let f = Expansion::new(p, &sm, &cf, exec).unwrap().to_fn();
    let g = Expansion::new(p, &sm, &cg, exec).unwrap().to_fn();
    let rep = parseval_check(p, &sm, &f, &g, exec).unwrap();
    let norm = |h: &VectorFn| inner_product(p, |x| Ok(h(x)), |x| Ok(h(x))).unwrap().re.sqrt();
    (rep.residual / (norm(&f) * norm(&g)).max(1e-300), k)
}

pub struct BcCase {
    pub name: String,
    pub problem: SpectralProblem,
    pub boundary: CMat,
    pub accept: bool,
}

/// Boundary matrices with a known verdict: Cayley-built couplings and the
/// classical conditions are accepted; wrong shapes, rank loss, non-`J`-unitary
/// couplings and conditions that see `𝓛₀` are rejected.
pub fn bc_cases() -> Vec<BcCase> {
    use balanced_spectral::linalg::real_matrix;
    use balanced_spectral::problems::{dirichlet_sturm_liouville, example_one, example_one_gamma, example_two, krein_string};
    let mut out = Vec::new();
    let mut push = |name: String, problem: SpectralProblem, boundary: CMat, accept: bool| {
        out.push(BcCase { name, problem, boundary, accept })
    };
    let dir = dirichlet_sturm_liouville(1.0).unwrap();
    push("dirichlet".into(), dir.problem.clone(), dir.boundary.clone(), true);
    let rows = |d: &[f64]| real_matrix(2, 4, d);
    push("periodic".into(), dir.problem.clone(), rows(&[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]), true);
    push("antiperiodic".into(), dir.problem.clone(), rows(&[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]), true);
    push("robin".into(), dir.problem.clone(), rows(&[0.6, 0.8, 0.0, 0.0, 0.0, 0.0, 0.28, -0.96]), true);
    push("neumann-dirichlet".into(), dir.problem.clone(), rows(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]), true);
    push("half-periodic".into(), dir.problem.clone(), rows(&[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 1.0]), false);
    push("duplicate-row".into(), dir.problem.clone(), rows(&[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]), false);
    push("one-row".into(), dir.problem.clone(), real_matrix(1, 4, &[1.0, 0.0, 0.0, 0.0]), false);
    push("wide".into(), dir.problem.clone(), real_matrix(2, 6, &[0.0; 12]), false);
    push("same-end".into(), dir.problem.clone(), rows(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]), false);
    let one = example_one(example_one_gamma(2.0), -1.0).unwrap();
    push("example-one".into(), one.problem.clone(), one.boundary.clone(), true);
    let gamma = c(0.6, 0.8);
    push(
        "example-one-unimodular".into(),
        one.problem.clone(),
        CMat::from_row_slice(1, 2, &[-gamma, cr(1.0)]),
        true,
    );
    push(
        "example-one-not-unimodular".into(),
        one.problem.clone(),
        CMat::from_row_slice(1, 2, &[cr(-2.0), cr(1.0)]),
        false,
    );
    let two = example_two(1.0, 0.0, 1.0).unwrap();
    push("example-two".into(), two.problem.clone(), two.boundary.clone(), true);
    push("example-two-sees-kernel".into(), two.problem.clone(), real_matrix(1, 4, &[0.0, 1.0, 0.0, 0.0]), false);
    push("example-two-full-rank".into(), two.problem.clone(), rows(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]), false);
    let k = krein_string(1.0, 1.0 / 3.0, 1.0).unwrap();
    push("krein".into(), k.problem.clone(), k.boundary.clone(), true);
    push("krein-dirichlet-left-only".into(), k.problem.clone(), real_matrix(1, 4, &[1.0, 0.0, 0.0, 0.0]), false);
    for seed in 0..20 {
        let s = random_problem(1000 + seed);
        let n = s.problem.n();
        let mut r = rng(2000 + seed);
        push(format!("cayley-{seed}"), s.problem.clone(), s.boundary.clone(), true);
        // X of rank n − 1 (n = 1: zero row)
        let mut x = matrix(&mut r, n, n, 1.0);
        let row = x.row(0).into_owned() * cr(if n == 1 { 0.0 } else { 1.0 });
        x.row_mut(n - 1).copy_from(&row);
        let v = j_unitary(s.problem.j(), &hermitian(&mut r, n, 1.0));
        push(format!("rank-deficient-{seed}"), s.problem.clone(), coupled(&x, &v), false);
        let x = matrix(&mut r, n, n, 1.0) + eye(n) * cr(1.5);
        let v = eye(n) * cr(2.0) + matrix(&mut r, n, n, 0.3);
        push(format!("not-j-unitary-{seed}"), s.problem.clone(), coupled(&x, &v), false);
    }
    out
}
