use thiserror::Error;

use num_complex::Complex64;

/// Errors produced across the crate.
///
/// Variants are grouped so the CLI can map them onto stable exit codes:
/// validation failures, numeric failures and parse failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {x} lies outside the interval ({a}, {b})")]
    Domain { x: f64, a: f64, b: f64 },

    #[error("lambda-forbidden: 1 ± Δ_r/2 is singular at the atom x = {location}{}", describe_lambda(.lambda))]
    LambdaForbidden {
        location: f64,
        lambda: Option<Complex64>,
    },

    #[error("quadrature did not reach tolerance on [{left}, {right}]: estimated error {estimate:e}")]
    Quadrature { left: f64, right: f64, estimate: f64 },

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("non-conforming problem: {}", .0.join("; "))]
    NonConforming(Vec<String>),

    #[error("boundary conditions rejected: {0}")]
    BoundaryConditions(#[from] BcRejection),

    #[error("λ = {0} is an eigenvalue (F(λ) is singular)")]
    Pole(Complex64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// The named ways a boundary matrix can fail validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BcRejection {
    #[error("expected {expected} rows and {expected_cols} columns, got {rows}×{cols}")]
    Shape {
        expected: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("rank {rank} is below the deficiency index {n_plus}")]
    Rank { rank: usize, n_plus: usize },
    #[error("Ã does not annihilate the boundary values of 𝓛₀ (residual {residual:e})")]
    KernelNotAnnihilated { residual: f64 },
    #[error("Ã𝕁⁻¹Ã* ≠ 0 (residual {residual:e})")]
    NotSymmetric { residual: f64 },
}

fn describe_lambda(lambda: &Option<Complex64>) -> String {
    match lambda {
        Some(l) => format!(" (λ = {l})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
