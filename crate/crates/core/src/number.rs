//! Values that are exact when they can be and binary64 otherwise.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Serialize, Serializer};

use crate::rational::Rational;

/// Relative tolerance for comparisons on the binary64 path.
pub const REL_TOL: f64 = 1e-12;
/// Absolute tolerance for comparisons on the binary64 path.
pub const ABS_TOL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(Rational),
    Float(f64),
}

impl Number {
    pub fn zero() -> Self {
        Number::Exact(Rational::zero())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Number::Exact(r) => Some(r),
            Number::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => r.to_f64(),
            Number::Float(x) => *x,
        }
    }

    pub fn abs(&self) -> Number {
        match self {
            Number::Exact(r) => Number::Exact(r.abs()),
            Number::Float(x) => Number::Float(x.abs()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Exact(r) => r.is_zero(),
            Number::Float(x) => *x == 0.0,
        }
    }

    /// Exact comparison when both sides are exact, binary64 otherwise.
    pub fn cmp_value(&self, other: &Number) -> Ordering {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => a.cmp(b),
            _ => self
                .to_f64()
                .partial_cmp(&other.to_f64())
                .unwrap_or(Ordering::Equal),
        }
    }

    /// `self <= other`, exactly on the rational path and with the float
    /// tolerances otherwise.
    pub fn le_tol(&self, other: &Number) -> bool {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => a <= b,
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                a <= b + tolerance(a, b)
            }
        }
    }

    /// Equality, exact on the rational path and with the float tolerances otherwise.
    pub fn eq_tol(&self, other: &Number) -> bool {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => a == b,
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                (a - b).abs() <= tolerance(a, b)
            }
        }
    }

    pub fn min(self, other: Number) -> Number {
        if other.cmp_value(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Number) -> Number {
        if other.cmp_value(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn scale(&self, r: &Rational) -> Number {
        match self {
            Number::Exact(a) => Number::Exact(a * r),
            Number::Float(x) => Number::Float(x * r.to_f64()),
        }
    }
}

pub fn tolerance(a: f64, b: f64) -> f64 {
    ABS_TOL.max(REL_TOL * a.abs().max(b.abs()))
}

impl From<Rational> for Number {
    fn from(r: Rational) -> Self {
        Number::Exact(r)
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::Float(x)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) => write!(f, "{r}"),
            Number::Float(x) => write!(f, "{x:e}"),
        }
    }
}

/// Exact values serialize as fraction strings, inexact ones as JSON numbers.
impl Serialize for Number {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Number::Exact(r) => r.serialize(serializer),
            Number::Float(x) => serializer.serialize_f64(*x),
        }
    }
}

macro_rules! number_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Number> for &Number {
            type Output = Number;
            fn $method(self, rhs: &Number) -> Number {
                match (self, rhs) {
                    (Number::Exact(a), Number::Exact(b)) => Number::Exact(a.$method(b)),
                    _ => Number::Float(self.to_f64().$method(rhs.to_f64())),
                }
            }
        }
        impl $trait<Number> for Number {
            type Output = Number;
            fn $method(self, rhs: Number) -> Number {
                (&self).$method(&rhs)
            }
        }
    };
}

number_binop!(Add, add);
number_binop!(Sub, sub);
number_binop!(Mul, mul);

impl Neg for Number {
    type Output = Number;
    fn neg(self) -> Number {
        match self {
            Number::Exact(a) => Number::Exact(-a),
            Number::Float(x) => Number::Float(-x),
        }
    }
}
