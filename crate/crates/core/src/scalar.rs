//! Coefficient fields for series and tensors.
//!
//! Two fields are supported: arbitrary-precision rationals for exact identity
//! checks, and `f64` for everything that touches a grid.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = BigRational;

/// Which coefficient field a value lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalarKind {
    Exact,
    Float,
}

impl ScalarKind {
    pub fn name(self) -> &'static str {
        match self {
            ScalarKind::Exact => "exact-rational",
            ScalarKind::Float => "float",
        }
    }
}

pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const KIND: ScalarKind;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_rational(q: &Rational) -> Self;

    fn as_f64(&self) -> f64;

    /// `self += a * b` without cloning the operands.
    fn add_mul(&mut self, a: &Self, b: &Self);

    fn mul_ref(&self, other: &Self) -> Self;

    fn add_ref(&self, other: &Self) -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    /// The exact value, when the field is exact.
    fn to_rational(&self) -> Option<Rational>;
}

impl Scalar for Rational {
    const KIND: ScalarKind = ScalarKind::Exact;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn as_f64(&self) -> f64 {
        // Numerator and denominator may individually overflow f64.
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                let shift = self.denom().bits().max(self.numer().bits()) as i64 - 60;
                let scale = BigInt::one() << shift.max(0) as usize;
                let n = (self.numer() / &scale).to_f64().unwrap_or(0.0);
                let d = (self.denom() / &scale).to_f64().unwrap_or(1.0);
                n / d
            }
        }
    }

    fn add_mul(&mut self, a: &Self, b: &Self) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        *self += a * b;
    }

    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }

    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Float;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_rational(q: &Rational) -> Self {
        q.as_f64()
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }

    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }

    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }

    fn to_rational(&self) -> Option<Rational> {
        None
    }
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}

/// A number of the form `q * pi^p` with rational `q`.
///
/// Torus volumes and masses of the model metrics are rational multiples of
/// powers of pi, so this keeps them exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiRational {
    pub coeff: Rational,
    pub pi_power: i32,
}

impl PiRational {
    pub fn new(coeff: Rational, pi_power: i32) -> Self {
        let mut v = Self { coeff, pi_power };
        if v.coeff.is_zero() {
            v.pi_power = 0;
        }
        v
    }

    pub fn rational(coeff: Rational) -> Self {
        Self::new(coeff, 0)
    }

    pub fn one() -> Self {
        Self::rational(Rational::one())
    }

    pub fn to_f64(&self) -> f64 {
        self.coeff.as_f64() * std::f64::consts::PI.powi(self.pi_power)
    }

    pub fn mul(&self, other: &PiRational) -> PiRational {
        PiRational::new(&self.coeff * &other.coeff, self.pi_power + other.pi_power)
    }

    pub fn scale(&self, q: &Rational) -> PiRational {
        PiRational::new(&self.coeff * q, self.pi_power)
    }

    pub fn is_positive(&self) -> bool {
        self.coeff.is_positive()
    }
}

impl fmt::Display for PiRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_power {
            0 => write!(f, "{}", self.coeff),
            1 => write!(f, "({})*pi", self.coeff),
            p => write!(f, "({})*pi^{}", self.coeff, p),
        }
    }
}
