//! The property battery over seeded random regular problems.

use balanced_spectral::greens::RegularProblem;
use balanced_spectral::par::Exec;
use balanced_spectral::structure::{compute_kernel, validate_boundary_conditions};

use super::random::*;

pub const SEEDS: u64 = 100;
/// `λ` per problem in the Herglotz check, so 200 points over the sweep.
pub const HERGLOTZ_POINTS: usize = 2;

pub const WRONSKIAN_TOL: f64 = 1e-8;
pub const LAGRANGE_TOL: f64 = 1e-8;
pub const HERGLOTZ_FLOOR: f64 = -1e-9;
pub const ADJOINT_TOL: f64 = 1e-10;
pub const RESOLVENT_TOL: f64 = 1e-7;
pub const PARSEVAL_TOL: f64 = 1e-8;

/// Worst values seen, with the seed that produced each.
#[derive(Debug, Clone, Copy, Default)]
pub struct Worst {
    pub value: f64,
    pub seed: u64,
}

impl Worst {
    fn above(&mut self, v: f64, seed: u64) {
        if v > self.value || v.is_nan() {
            *self = Worst { value: v, seed };
        }
    }

    fn below(&mut self, v: f64, seed: u64) {
        if v < self.value || v.is_nan() {
            *self = Worst { value: v, seed };
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Property {
    Wronskian,
    Lagrange,
    Herglotz,
    Adjoint,
    Resolvent,
    Parseval,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::Wronskian,
        Property::Lagrange,
        Property::Herglotz,
        Property::Adjoint,
        Property::Resolvent,
        Property::Parseval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Wronskian => "Wronskian constancy",
            Property::Lagrange => "Lagrange identity",
            Property::Herglotz => "Herglotz floor",
            Property::Adjoint => "M(conj λ) = M(λ)*",
            Property::Resolvent => "resolvent identity",
            Property::Parseval => "Parseval",
        }
    }

    /// Whether `worst` meets the threshold.
    pub fn holds(self, worst: f64) -> bool {
        match self {
            Property::Wronskian => worst < WRONSKIAN_TOL,
            Property::Lagrange => worst < LAGRANGE_TOL,
            Property::Herglotz => worst >= HERGLOTZ_FLOOR,
            Property::Adjoint => worst < ADJOINT_TOL,
            Property::Resolvent => worst < RESOLVENT_TOL,
            Property::Parseval => worst < PARSEVAL_TOL,
        }
    }

    pub fn threshold(self) -> String {
        match self {
            Property::Wronskian => format!("< {WRONSKIAN_TOL:.0e}"),
            Property::Lagrange => format!("< {LAGRANGE_TOL:.0e}"),
            Property::Herglotz => format!(">= {HERGLOTZ_FLOOR:.0e}"),
            Property::Adjoint => format!("< {ADJOINT_TOL:.0e}"),
            Property::Resolvent => format!("< {RESOLVENT_TOL:.0e}"),
            Property::Parseval => format!("< {PARSEVAL_TOL:.0e}"),
        }
    }

    /// Worst value of the property over `seeds` problems. Each property draws
    /// from its own stream so the suites run independently.
    pub fn sweep(self, seeds: u64) -> Worst {
        let mut worst = match self {
            Property::Herglotz => Worst { value: f64::INFINITY, seed: 0 },
            _ => Worst::default(),
        };
        let mut eigenvalues = 0;
        for seed in 0..seeds {
            let s = random_problem(seed);
            let p = &s.problem;
            let rp = || RegularProblem::new(p.clone(), &s.boundary).unwrap();
            let mut r = rng(seed ^ (0x5eed << (self as u64)));
            match self {
                Property::Wronskian => worst.above(wronskian_deviation(p, &mut r), seed),
                Property::Lagrange => worst.above(lagrange_deviation(p, &mut r), seed),
                Property::Herglotz => worst.below(herglotz_floor(&rp(), &mut r, HERGLOTZ_POINTS), seed),
                Property::Adjoint => worst.above(adjoint_deviation(&rp(), &mut r), seed),
                Property::Resolvent => worst.above(resolvent_deviation(&rp(), &mut r), seed),
                Property::Parseval => {
                    let (v, k) = parseval_deviation(&rp(), &mut r, Exec::Parallel);
                    eigenvalues += k;
                    worst.above(v, seed);
                }
            }
        }
        if let Property::Parseval = self {
            // the identity must have been exercised
            assert!(eigenvalues >= seeds as usize, "only {eigenvalues} eigenvalues over the sweep");
        }
        worst
    }
}

/// Names of the boundary cases whose verdict disagrees with the list.
pub fn bc_misclassified() -> (usize, Vec<String>) {
    let cases = bc_cases();
    let wrong = cases
        .iter()
        .filter(|case| {
            let got = compute_kernel(&case.problem)
                .and_then(|k| validate_boundary_conditions(&case.problem, &k, &case.boundary))
                .is_ok();
            got != case.accept
        })
        .map(|case| case.name.clone())
        .collect();
    (cases.len(), wrong)
}
