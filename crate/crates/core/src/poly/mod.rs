//! Sparse multivariate polynomials over the reals.

mod monomial;
mod parse;
mod polynomial;

pub use monomial::Monomial;
pub use parse::parse_polynomial;
pub use polynomial::{PolyEvaluator, Polynomial, CANONICAL_EPS};
