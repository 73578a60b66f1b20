//! Multi-scale laminate approximate solutions to `Div B = 0, B ∈ K` for three-matrix sets
//! `K ⊂ M^{3x3}`, with spectral diagnostics on the periodic unit cube and brute-force
//! oracles for the rigidity of exact solutions.

pub mod cli;
pub mod error;
pub mod fieldlab;
pub mod io;
pub mod laminator;
pub mod matkit;
pub mod rigidity;

pub use error::{Error, Result};
