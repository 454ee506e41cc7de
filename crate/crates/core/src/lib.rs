//! Numerical realizations of four Riesz-type representation theorems.
//!
//! - [`hilbert`]: Riesz representers and Bochner expectations on `L²(0,1)`.
//! - [`stieltjes`]: Lebesgue–Stieltjes integration and recovery of a
//!   distribution function from a black-box expectation functional.
//! - [`conditional`]: conditional expectation on finite probability spaces
//!   through the duality identity, with the `min(X, j)` truncation ladder.
//! - [`wiener`]: heat kernels, cylinder-set probabilities and pinned Wiener
//!   integrals by tensor quadrature and Brownian-bridge Monte Carlo.
//!
//! [`numerics`] holds the shared quadrature, and [`cli`] the batch front end.

pub mod cli;
pub mod conditional;
pub mod error;
pub mod hilbert;
pub mod numerics;
pub mod stieltjes;
pub mod wiener;

pub use error::{Error, Result};
