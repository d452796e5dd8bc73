//! Spectral theory of first-order systems `Ju' + qu = wf` whose coefficients
//! `q` and `w` are matrix-valued measures.

pub mod error;
pub mod format;
pub mod greens;
pub mod ivp;
pub mod linalg;
pub mod measures;
pub mod ode;
pub mod par;
pub mod problems;
pub mod quadrature;
pub mod spectral;
pub mod structure;
pub mod weyl2;

pub use error::{BcRejection, Error, Result};
