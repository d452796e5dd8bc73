mod common;

use balanced_spectral::greens::{EigenSettings, RegularProblem};
use balanced_spectral::ivp::SpectralProblem;
use balanced_spectral::linalg::{c, cr, real_matrix, CVec, C64};
use balanced_spectral::measures::{MatrixMeasure, RealInterval, Side};
use balanced_spectral::problems::{
    dirichlet_sturm_liouville, example_one, example_one_gamma, free_half_line, krein_string, symplectic,
};
use balanced_spectral::structure::{compute_kernel, validate_boundary_conditions, BcKind};
use balanced_spectral::weyl2::{
    classify_endpoint, default_lc_basis, deficiency_from_verdicts, lc_boundary_vector, m_function_2x2,
    plucker_residual, separated_condition, Endpoint, Verdict, WeylSettings,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn free_line() -> SpectralProblem {
    let iv = RealInterval::new(f64::NEG_INFINITY, f64::INFINITY).unwrap();
    let (lo, hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let w = MatrixMeasure::uniform(iv, lo, hi, real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
    let q = MatrixMeasure::uniform(iv, lo, hi, real_matrix(2, 2, &[0.0, 0.0, 0.0, -1.0])).unwrap();
    SpectralProblem::new(symplectic(), q, w, 0.0).unwrap()
}

fn verdicts(p: &SpectralProblem, probe: C64) -> (Verdict, Verdict) {
    let s = WeylSettings { probe, ..Default::default() };
    (
        classify_endpoint(p, Endpoint::Left, &s).unwrap().verdict,
        classify_endpoint(p, Endpoint::Right, &s).unwrap().verdict,
    )
}

/// `m_α(λ)` of `−y″ = λy` on the half-line, from `θ + mφ ∝ (1, i√λ)`.
fn half_line_m(alpha: f64, lambda: C64) -> C64 {
    let k = lambda.sqrt();
    let k = if k.im > 0.0 { k } else { -k };
    let (cs, sn) = (cr(alpha.cos()), cr(alpha.sin()));
    let ik = c(0.0, 1.0) * k;
    (sn + ik * cs) / (cs - ik * sn)
}

#[test]
fn trichotomy_of_free_problems() {
    let line = free_line();
    let half = free_half_line().unwrap();
    let interval = dirichlet_sturm_liouville(PI).unwrap().problem;
    for probe in [c(0.0, 1.0), c(0.0, 2.0)] {
        let cases = [
            (verdicts(&line, probe), Verdict::LimitPoint, Verdict::LimitPoint, 0),
            (verdicts(&half, probe), Verdict::LimitCircle, Verdict::LimitPoint, 1),
            (verdicts(&interval, probe), Verdict::LimitCircle, Verdict::LimitCircle, 2),
        ];
        for ((a, b), wa, wb, n) in cases {
            assert_eq!((a, b), (wa, wb), "probe {probe}");
            assert_eq!(deficiency_from_verdicts(a, b), Some(n));
        }
    }
    assert_eq!(deficiency_from_verdicts(Verdict::Undecided, Verdict::LimitPoint), None);
}

#[test]
fn regular_interval_n_plus_matches_verdicts() {
    let cfg = dirichlet_sturm_liouville(2.0).unwrap();
    let k = compute_kernel(&cfg.problem).unwrap();
    let bc = validate_boundary_conditions(&cfg.problem, &k, &cfg.boundary).unwrap();
    let (a, b) = verdicts(&cfg.problem, c(0.0, 1.0));
    assert_eq!(deficiency_from_verdicts(a, b), Some(bc.n_plus));
}

#[test]
fn krein_string_limit_circle_both_ends() {
    let cfg = krein_string(1.5, 0.4, 1.0).unwrap();
    let (a, b) = verdicts(&cfg.problem, c(0.0, 1.0));
    assert_eq!((a, b), (Verdict::LimitCircle, Verdict::LimitCircle));
}

#[test]
fn limit_point_diagnostics_grow() {
    let half = free_half_line().unwrap();
    let cl = classify_endpoint(&half, Endpoint::Right, &WeylSettings::default()).unwrap();
    let last = cl.truncations.last().unwrap();
    assert!(last.mu_max > 1e6 * last.mu_min);
    assert!(last.disk_radius < cl.truncations[0].disk_radius);
    assert!(last.disk_radius < 1e-6);
}

#[test]
fn half_line_m_function_against_closed_form() {
    let half = free_half_line().unwrap();
    let s = WeylSettings::default();
    for alpha in [0.0, 0.4, PI / 2.0, -1.1] {
        for lambda in [c(0.0, 1.0), c(2.0, 1.0), c(-3.0, 0.5), c(1.0, -1.0)] {
            let rep = m_function_2x2(&half, alpha, lambda, &s).unwrap_or_else(|e| panic!("α = {alpha}, λ = {lambda}: {e}"));
            let want = half_line_m(alpha, lambda);
            assert!(rep.agreement < 1e-6, "α = {alpha}, λ = {lambda}: {rep:?}");
            assert!((rep.disk_center - want).norm() < 1e-6, "α = {alpha}, λ = {lambda}: {} vs {want}", rep.disk_center);
            assert!((rep.contraction - want).norm() < 1e-6);
            if lambda.im > 0.0 {
                assert!(rep.disk_center.im > 0.0);
            }
        }
    }
}

#[test]
fn m_function_needs_limit_point_and_real_coefficients() {
    let interval = dirichlet_sturm_liouville(1.0).unwrap().problem;
    assert!(m_function_2x2(&interval, 0.0, c(0.0, 1.0), &WeylSettings::default()).is_err());
    let half = free_half_line().unwrap();
    assert!(m_function_2x2(&half, 0.0, cr(1.0), &WeylSettings::default()).is_err());
    let one = example_one(example_one_gamma(2.0), -1.0).unwrap().problem;
    assert!(classify_endpoint(&one, Endpoint::Left, &WeylSettings::default()).is_err());
}

#[test]
fn separated_conditions() {
    let half = free_half_line().unwrap();
    let s = WeylSettings::default();
    let at_inf = classify_endpoint(&half, Endpoint::Right, &s).unwrap();
    assert!(separated_condition(&at_inf, 0.3).is_err());
    let at_zero = classify_endpoint(&half, Endpoint::Left, &s).unwrap();
    let row = separated_condition(&at_zero, PI / 2.0).unwrap();
    assert!((row[(0, 1)] - cr(-1.0)).norm() < 1e-15 && row[(0, 0)].norm() < 1e-15);

    // Dirichlet at both ends of (0, π) from separated rows reproduces k²
    let cfg = dirichlet_sturm_liouville(PI).unwrap();
    let left = classify_endpoint(&cfg.problem, Endpoint::Left, &s).unwrap();
    let right = classify_endpoint(&cfg.problem, Endpoint::Right, &s).unwrap();
    let mut bc = separated_condition(&left, 0.0).unwrap();
    bc = bc.insert_row(1, cr(0.0));
    bc.row_mut(1).copy_from(&separated_condition(&right, 0.0).unwrap().row(0));
    let rp = RegularProblem::new(cfg.problem.clone(), &bc).unwrap();
    let eig = rp.eigenvalues(0.5, 17.0, &EigenSettings::default()).unwrap();
    let got: Vec<f64> = eig.iter().map(|e| e.lambda).collect();
    assert_eq!(got.len(), 4);
    for (k, l) in got.iter().enumerate() {
        assert!((l - ((k + 1) * (k + 1)) as f64).abs() < 1e-8, "{got:?}");
    }
}

#[test]
fn limit_circle_two_by_two_never_mixed() {
    let cfg = dirichlet_sturm_liouville(1.0).unwrap();
    let k = compute_kernel(&cfg.problem).unwrap();
    let rows = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.3f64.cos(), -(0.3f64.sin()), 0.0, 0.0, 0.0, 0.0, 1.2f64.cos(), -(1.2f64.sin())],
        [1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
        [1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
    ];
    for r in rows {
        let bc = validate_boundary_conditions(&cfg.problem, &k, &real_matrix(2, 4, &r)).unwrap();
        assert_ne!(bc.kind, BcKind::Mixed, "{r:?}");
    }
}

#[test]
fn default_basis_gives_plain_values_at_regular_end() {
    let cfg = dirichlet_sturm_liouville(1.0).unwrap();
    let p = &cfg.problem;
    let (v, coef) = default_lc_basis(p).unwrap();
    let va = v.eval(0.0, Side::Right).unwrap() * &coef;
    let u = p.fundamental_matrix(c(0.7, 0.2)).unwrap();
    let ua = u.eval(0.0, Side::Right).unwrap() * CVec::from_vec(vec![c(1.0, -2.0), c(0.5, 0.3)]);
    let ubar = lc_boundary_vector(p.j(), &ua, &va.column(0).into_owned(), &va.column(1).into_owned());
    assert!((ubar - &ua).norm() < 1e-12);
}

fn cvec2(a: [f64; 4]) -> CVec {
    CVec::from_vec(vec![c(a[0], a[1]), c(a[2], a[3])])
}

proptest! {
    #[test]
    fn plucker_identity(beta in 0.2f64..3.0, a in prop::array::uniform4(-2.0f64..2.0), u in prop::array::uniform4(-2.0f64..2.0),
                        r1 in prop::array::uniform2(-2.0f64..2.0), r2 in prop::array::uniform2(-2.0f64..2.0)) {
        let j = real_matrix(2, 2, &[0.0, -beta, beta, 0.0]);
        let b1 = CVec::from_vec(vec![cr(r1[0]), cr(r1[1])]);
        let b2 = CVec::from_vec(vec![cr(r2[0]), cr(r2[1])]);
        let res = plucker_residual(&j, &cvec2(a), &b1, &b2, &cvec2(u));
        prop_assert!(res.norm() < 1e-9);
    }

    #[test]
    fn boundary_form_through_lc_vectors(beta in 0.2f64..3.0, g in prop::array::uniform4(-2.0f64..2.0), u in prop::array::uniform4(-2.0f64..2.0),
                                        r in prop::array::uniform2(-2.0f64..2.0), s in 0.3f64..2.0) {
        // any real pair normalized by v₁*Jv₂ = −1/β
        let j = real_matrix(2, 2, &[0.0, -beta, beta, 0.0]);
        let v1 = CVec::from_vec(vec![cr(r[0]), cr(r[1])]);
        let perp = CVec::from_vec(vec![cr(-r[1]), cr(r[0])]);
        let d = v1.dotc(&(&j * &perp));
        prop_assume!(d.norm() > 1e-3);
        let v2 = (&perp * cr(-1.0 / beta) / d) + &v1 * cr(s);
        let (g, u) = (cvec2(g), cvec2(u));
        let gb = lc_boundary_vector(&j, &g, &v1, &v2);
        let ub = lc_boundary_vector(&j, &u, &v1, &v2);
        let lhs = g.dotc(&(&j * &u));
        let rhs = gb.dotc(&(&j * &ub));
        prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + lhs.norm()));
    }
}
