//! Exact and floating-point tools for midconvex-type inequalities: dyadic
//! orbits of rationals, Takagi-type series, regularized error functions and
//! the resulting bounds on `f(λx + (1-λ)y)`.

pub mod bounds;
pub mod checker;
pub mod cli;
pub mod dyadic;
pub mod errfun;
pub mod error;
pub mod number;
pub mod numtheory;
pub mod rational;
pub mod takagi;

pub use error::{Error, Result};
pub use number::Number;
pub use rational::Rational;
