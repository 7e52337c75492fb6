//! Sparse multivariate polynomials over `f64` and dense matrices of them.

mod matrix;
mod monomial;
mod polynomial;

pub use matrix::MatrixPolynomial;
pub use monomial::Monomial;
pub use polynomial::{Polynomial, DROP_TOL};
