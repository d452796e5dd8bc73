//! One line per acceptance criterion. Runs without the test harness so the
//! lines are always printed; exits with failure if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use balanced_spectral::greens::{EigenSettings, RegularProblem};
use balanced_spectral::ivp::solve_ivp_balanced;
use balanced_spectral::linalg::{c, cr, max_abs, rank, real_matrix, CMat, CVec, C64};
use balanced_spectral::measures::{Atom, MatrixMeasure, RealInterval};
use balanced_spectral::ode::OdeSettings;
use balanced_spectral::par::Exec;
use balanced_spectral::problems::{
    dirichlet_sturm_liouville, example_one, example_one_eigenvalue, example_one_gamma, example_two, free_half_line,
    krein_string,
};
use balanced_spectral::spectral::{fourier, transform_at};
use balanced_spectral::weyl2::{classify_endpoint, m_function_2x2, Endpoint, Verdict, WeylSettings};
use balanced_spectral::Error;
use common::random::rng;
use common::sweep::{bc_misclassified, Property, SEEDS};
use common::{shooting_eigenvalues, vector_fn};
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err(e: Error) -> String {
    e.to_string()
}

fn example_i() -> Outcome {
    // the stated λ₀ = 2 belongs to γ = −i; γ = i gives λ₀ = −2
    let gamma = c(0.0, -1.0);
    ensure!((example_one_gamma(2.0) - gamma).norm() < 1e-15, "γ for λ₀ = 2 is {}", example_one_gamma(2.0));
    ensure!((example_one_eigenvalue(c(0.0, 1.0)) - cr(-2.0)).norm() < 1e-15, "γ = i");
    let cfg = example_one(gamma, -1.0).map_err(err)?;
    let rp = RegularProblem::new(cfg.problem.clone(), &cfg.boundary).map_err(err)?;
    let sm = rp.spectral_measure(-10.0, 10.0, &EigenSettings::default()).map_err(err)?;
    ensure!(sm.points.len() == 1, "{} eigenvalues", sm.points.len());
    let pt = &sm.points[0];
    let dl = (pt.lambda - 2.0).abs();
    ensure!(dl < 1e-9, "λ₀ = {}", pt.lambda);
    let dw = (pt.weight[(0, 0)] - cr(2.0)).norm();
    ensure!(dw < 1e-8, "Δν = {}", pt.weight[(0, 0)]);

    let mut r = rng(11);
    let mf = rp.m_function();
    let mut dm: f64 = 0.0;
    for k in 0..20 {
        let l = c(r.random_range(-6.0..6.0), r.random_range(0.05..4.0) * if k % 2 == 0 { 1.0 } else { -1.0 });
        let m = mf.eval(l).map_err(err)?[(0, 0)];
        let want = (cr(4.0) + l * 2.0) / ((cr(2.0) - l) * 4.0);
        dm = dm.max((m - want).norm());
    }
    ensure!(dm < 1e-8, "M deviates by {dm:.2e}");

    let f0 = c(0.7, -1.2);
    let f = vector_fn(move |x| vec![f0 * (-x * x).exp()]);
    let mut dt: f64 = 0.0;
    for _ in 0..10 {
        let t = cr(r.random_range(-10.0..10.0));
        let got = transform_at(&cfg.problem, t, &f).map_err(err)?[0];
        dt = dt.max((got - c(0.0, 2.0) * f0 / (c(0.0, 2.0) + t)).norm());
    }
    ensure!(dt < 1e-10, "transform deviates by {dt:.2e}");
    Ok(format!("|λ₀−2| {dl:.1e}, |Δν−2| {dw:.1e}, M {dm:.1e}, 𝓕 {dt:.1e}"))
}

fn example_ii() -> Outcome {
    let cfg = example_two(1.0, 0.0, 1.0).map_err(err)?;
    let rp = RegularProblem::new(cfg.problem.clone(), &cfg.boundary).map_err(err)?;
    let p = real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    ensure!(rank(rp.projector(), 1e-12) == 1, "rank P = {}", rank(rp.projector(), 1e-12));
    ensure!(*rp.projector() == p, "P = {}", rp.projector());
    let sm = rp.spectral_measure(-5.0, 5.0, &EigenSettings::default()).map_err(err)?;
    ensure!(sm.points.len() == 1, "{} eigenvalues", sm.points.len());
    let dl = (sm.points[0].lambda - 1.0).abs();
    ensure!(dl < 1e-9, "λ₀ = {}", sm.points[0].lambda);
    let dw = max_abs(&(&sm.points[0].weight - &p));
    ensure!(dw < 1e-8, "Δν = {}", sm.points[0].weight);
    let mf = rp.m_function();
    let mut dm: f64 = 0.0;
    for l in [c(0.3, 1.0), c(-2.0, 0.5), c(1.7, -0.2), c(5.0, 3.0), cr(0.25), cr(-3.5), c(0.9, 0.01)] {
        let m = mf.eval(l).map_err(err)?;
        dm = dm.max(max_abs(&(m - &p / (cr(1.0) - l))));
    }
    ensure!(dm < 1e-8, "M deviates by {dm:.2e}");
    let f = vector_fn(|x| vec![cr((2.0 * PI * x).sin() + x - 0.5), c(x, 1.0)]);
    let tr = fourier(&cfg.problem, &sm, &f, Exec::default()).map_err(err)?;
    let dk = tr.coefficients.iter().map(|v| v.norm()).fold(0.0, f64::max);
    ensure!(dk < 1e-10, "𝓕f = {dk:.2e} for ∫f₁ = 0");
    Ok(format!("P = diag(1,0), |λ₀−1| {dl:.1e}, |Δν−P| {dw:.1e}, M {dm:.1e}, ker 𝓕 {dk:.1e}"))
}

fn dirichlet() -> Outcome {
    let oracle = shooting_eigenvalues(PI, 0.0, 26.0);
    ensure!(oracle.len() == 5, "oracle found {}", oracle.len());
    let cfg = dirichlet_sturm_liouville(PI).map_err(err)?;
    let rp = RegularProblem::new(cfg.problem, &cfg.boundary).map_err(err)?;
    let got = rp.spectral_measure(0.0, 26.0, &EigenSettings::default()).map_err(err)?.eigenvalues();
    ensure!(got.len() == 5, "{got:?}");
    let d = got.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(d < 1e-6, "{got:?} vs {oracle:?}");
    Ok(format!("{got:.9?}, max deviation {d:.1e}"))
}

fn krein() -> Outcome {
    let (m, pos, len) = (1.0, 1.0 / 3.0, 1.0);
    let want = len / (m * pos * (len - pos));
    let cfg = krein_string(m, pos, len).map_err(err)?;
    let rp = RegularProblem::new(cfg.problem, &cfg.boundary).map_err(err)?;
    let got = rp.spectral_measure(0.0, 50.0, &EigenSettings::default()).map_err(err)?.eigenvalues();
    ensure!(got.len() == 1, "{got:?}");
    let d = (got[0] - want).abs();
    ensure!(d < 1e-8, "{} vs {want}", got[0]);
    Ok(format!("λ = {:.12}, deviation {d:.1e}", got[0]))
}

fn atom_crossing() -> Outcome {
    let line = RealInterval::real_line();
    let solve = |alpha: f64| {
        let r = MatrixMeasure::new(1, 1, line, vec![], vec![Atom::new(0.0, CMat::from_element(1, 1, cr(alpha)))])?;
        let g = MatrixMeasure::zero(1, 1, line);
        let sol = solve_ivp_balanced(&r, &g, -1.0, &CVec::from_element(1, cr(1.0)), 1.0, &[], &OdeSettings::default())?;
        Ok::<C64, Error>(sol.values.last().unwrap()[0])
    };
    for alpha in [0.5, 1.0, 3.0] {
        let u = solve(alpha).map_err(err)?;
        ensure!(u == cr((2.0 + alpha) / (2.0 - alpha)), "α = {alpha}: {u}");
    }
    ensure!(matches!(solve(2.0), Err(Error::LambdaForbidden { .. })), "α = 2 not rejected: {:?}", solve(2.0));
    Ok("α ∈ {0.5, 1, 3} exact, α = 2 forbidden".into())
}

fn properties() -> Outcome {
    let results = std::thread::scope(|s| {
        let handles: Vec<_> = Property::ALL.iter().map(|&p| s.spawn(move || (p, p.sweep(SEEDS)))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>()
    });
    let mut parts = Vec::new();
    let mut bad = Vec::new();
    for (p, worst) in results {
        let line = format!("{} {:.1e}", p.name(), worst.value);
        if !p.holds(worst.value) {
            bad.push(format!("{line} (seed {}, want {})", worst.seed, p.threshold()));
        }
        parts.push(line);
    }
    let (total, wrong) = bc_misclassified();
    if !wrong.is_empty() {
        bad.push(format!("boundary lists misclassified {wrong:?}"));
    }
    parts.push(format!("boundary lists {}/{total}", total - wrong.len()));
    ensure!(bad.is_empty(), "{}", bad.join("; "));
    Ok(format!("{SEEDS} problems each: {}", parts.join(", ")))
}

fn weyl() -> Outcome {
    let s = WeylSettings::default();
    let verdict = |p: &balanced_spectral::ivp::SpectralProblem, e| classify_endpoint(p, e, &s).map(|c| c.verdict).map_err(err);
    let half = free_half_line().map_err(err)?;
    let v = verdict(&half, Endpoint::Right)?;
    ensure!(v == Verdict::LimitPoint, "half-line at ∞: {v}");
    let string = krein_string(1.0, 1.0 / 3.0, 1.0).map_err(err)?.problem;
    let interval = dirichlet_sturm_liouville(PI).map_err(err)?.problem;
    for (name, p) in [("Krein string", &string), ("regular interval", &interval)] {
        for e in [Endpoint::Left, Endpoint::Right] {
            let v = verdict(p, e)?;
            ensure!(v == Verdict::LimitCircle, "{name} {e:?}: {v}");
        }
    }
    let mut agree: f64 = 0.0;
    for alpha in [0.0, 0.4, PI / 2.0] {
        for l in [c(0.0, 1.0), c(2.0, 1.0), c(-3.0, 0.5)] {
            agree = agree.max(m_function_2x2(&half, alpha, l, &s).map_err(err)?.agreement);
        }
    }
    ensure!(agree < 1e-6, "m routes differ by {agree:.2e}");
    Ok(format!("LP / LC+LC / LC+LC, m routes agree to {agree:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 7] = [
        ("example I", example_i, Some(Duration::from_secs(1))),
        ("example II", example_ii, Some(Duration::from_secs(2))),
        ("Dirichlet regression", dirichlet, Some(Duration::from_secs(10))),
        ("Krein point mass", krein, Some(Duration::from_secs(2))),
        ("atom crossing", atom_crossing, None),
        ("property suites", properties, None),
        ("Weyl battery", weyl, None),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("acceptance {} [{tag}] {name}: {detail} ({elapsed:.2?})", k + 1);
        failed += outcome.is_err() as usize;
    }
    if failed > 0 {
        println!("acceptance: {failed} of 7 criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 7 criteria pass");
}
