//! Certified upper bounds for even polynomial optimization problems on the
//! nonnegative orthant.
//!
//! The pipeline maps an orthant-constrained problem to an even one through the
//! substitution `x -> x^2`, builds a Pólya-type hierarchy of conic relaxations
//! whose multipliers are sums of `s`-nomial squares, solves it with an embedded
//! interior-point method, and verifies the resulting positivity certificate
//! independently of the program layout.
//!
//! The main application is the positive maximal singular value (PMSV) of a
//! matrix, see [`pmsv`].

pub mod certify;
pub mod cli;
pub mod conic;
pub mod error;
pub mod io;
pub mod pmsv;
pub mod poly;
pub mod relax;
pub mod report;

pub use error::{Error, Result};
pub use poly::{Monomial, ParityClass, Polynomial};
