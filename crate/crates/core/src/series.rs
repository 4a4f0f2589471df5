//! Truncated Laurent series in one variable.
//!
//! A [`LaurentSeries`] stands for
//!
//! ```text
//! c_low x^low + ... + c_N x^N + O(x^(N+1))
//! ```
//!
//! Coefficients below `low` are known to vanish; coefficients above the
//! truncation order `N` are unknown. Every operation computes the order up to
//! which its result is actually determined by its inputs and never reports a
//! coefficient past it.

use std::cmp::min;
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar, ScalarKind};

#[derive(Clone, PartialEq)]
pub struct LaurentSeries<S> {
    low: i32,
    coeffs: Vec<S>,
    order: i32,
}

impl<S: Scalar> LaurentSeries<S> {
    /// Builds `sum coeffs[i] x^(low + i) + O(x^(order + 1))`.
    ///
    /// Coefficients past `order` are dropped; missing coefficients up to
    /// `order` are taken as exact zeros.
    pub fn new(low: i32, mut coeffs: Vec<S>, order: i32) -> Self {
        let len = (order - low + 1).max(0) as usize;
        coeffs.truncate(len);
        coeffs.resize(len, S::zero());
        Self::raw(low, coeffs, order)
    }

    fn raw(low: i32, coeffs: Vec<S>, order: i32) -> Self {
        if coeffs.is_empty() || low > order {
            return Self {
                low: order + 1,
                coeffs: Vec::new(),
                order,
            };
        }
        debug_assert_eq!(coeffs.len() as i32, order - low + 1);
        Self { low, coeffs, order }
    }

    /// `0 + O(x^(order + 1))`.
    pub fn zero(order: i32) -> Self {
        Self::raw(order + 1, Vec::new(), order)
    }

    pub fn one(order: i32) -> Self {
        Self::monomial(S::one(), 0, order)
    }

    pub fn constant(c: S, order: i32) -> Self {
        Self::monomial(c, 0, order)
    }

    pub fn monomial(c: S, exponent: i32, order: i32) -> Self {
        Self::new(exponent, vec![c], order)
    }

    /// Builds a series from `(exponent, coefficient)` pairs.
    pub fn from_terms(terms: &[(i32, S)], order: i32) -> Self {
        let Some(low) = terms.iter().map(|(e, _)| *e).min() else {
            return Self::zero(order);
        };
        let len = (order - low + 1).max(0) as usize;
        let mut coeffs = vec![S::zero(); len];
        for (e, c) in terms {
            let idx = (e - low) as usize;
            if idx < len {
                coeffs[idx] = coeffs[idx].add_ref(c);
            }
        }
        Self::raw(low, coeffs, order)
    }

    pub fn low(&self) -> i32 {
        self.low
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn kind(&self) -> ScalarKind {
        S::KIND
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    /// Coefficient of `x^exponent`; an error past the truncation order.
    pub fn coeff(&self, exponent: i32) -> Result<S> {
        if exponent > self.order {
            return Err(Error::UnknownCoefficient {
                exponent,
                order: self.order,
            });
        }
        if exponent < self.low {
            return Ok(S::zero());
        }
        Ok(self.coeffs[(exponent - self.low) as usize].clone())
    }

    /// Known `(exponent, coefficient)` pairs with nonzero coefficient.
    pub fn terms(&self) -> impl Iterator<Item = (i32, &S)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.low + i as i32, c))
    }

    /// Lowest exponent with a nonzero known coefficient.
    pub fn valuation(&self) -> Option<i32> {
        self.terms().next().map(|(e, _)| e)
    }

    /// True when every known coefficient vanishes.
    pub fn is_known_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Drops leading zero coefficients.
    pub fn normalized(&self) -> Self {
        match self.valuation() {
            None => Self::zero(self.order),
            Some(v) => {
                let skip = (v - self.low) as usize;
                Self::raw(v, self.coeffs[skip..].to_vec(), self.order)
            }
        }
    }

    /// Forgets every coefficient past `order`.
    pub fn truncate(&self, order: i32) -> Self {
        if order >= self.order {
            return self.clone();
        }
        let len = (order - self.low + 1).max(0) as usize;
        Self::raw(self.low, self.coeffs[..len.min(self.coeffs.len())].to_vec(), order)
    }

    /// Multiplies by `x^k`.
    pub fn shift(&self, k: i32) -> Self {
        Self::raw(self.low + k, self.coeffs.clone(), self.order + k)
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::raw(
            self.low,
            self.coeffs.iter().map(|a| a.mul_ref(c)).collect(),
            self.order,
        )
    }

    pub fn neg(&self) -> Self {
        Self::raw(
            self.low,
            self.coeffs.iter().map(|a| -a.clone()).collect(),
            self.order,
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, false)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, true)
    }

    fn combine(&self, other: &Self, subtract: bool) -> Self {
        let order = min(self.order, other.order);
        let low = min(self.low, other.low);
        let len = (order - low + 1).max(0) as usize;
        let mut coeffs = vec![S::zero(); len];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let e = low + i as i32;
            if e >= self.low && e <= self.order {
                *c = self.coeffs[(e - self.low) as usize].clone();
            }
            if e >= other.low && e <= other.order {
                let b = &other.coeffs[(e - other.low) as usize];
                if !b.is_zero() {
                    *c = if subtract {
                        c.clone() - b.clone()
                    } else {
                        c.add_ref(b)
                    };
                }
            }
        }
        Self::raw(low, coeffs, order)
    }

    /// Order up to which a product is determined by its factors.
    pub fn product_order(&self, other: &Self) -> i32 {
        min(self.order + other.low, other.order + self.low)
    }

    /// Cauchy product.
    pub fn mul(&self, other: &Self) -> Self {
        let low = self.low + other.low;
        let order = self.product_order(other);
        let len = (order - low + 1).max(0) as usize;
        let mut coeffs = vec![S::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if i >= len {
                break;
            }
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                let k = i + j;
                if k >= len {
                    break;
                }
                coeffs[k].add_mul(a, b);
            }
        }
        Self::raw(low, coeffs, order)
    }

    /// Multiplicative inverse; the pole order negates.
    pub fn reciprocal(&self) -> Result<Self> {
        let a = self.normalized();
        let v = a.valuation().ok_or(Error::NonInvertible)?;
        let lead = a.coeffs[0].clone();
        let inv_lead = S::one() / lead;
        let len = a.coeffs.len();
        let mut b: Vec<S> = Vec::with_capacity(len);
        b.push(inv_lead.clone());
        for k in 1..len {
            let mut acc = S::zero();
            for j in 1..=k {
                acc.add_mul(&a.coeffs[j], &b[k - j]);
            }
            b.push(-(acc * inv_lead.clone()));
        }
        Ok(Self::raw(-v, b, a.order - 2 * v))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.reciprocal()?))
    }

    /// Term-by-term derivative; the truncation order drops by one.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.mul_ref(&S::from_int((self.low + i as i32) as i64)))
            .collect();
        Self::raw(self.low - 1, coeffs, self.order - 1)
    }

    /// Antiderivative with zero constant term. Fails on a nonzero `x^-1` term.
    pub fn integrate(&self) -> Result<Self> {
        if !self.coeff(-1).unwrap_or_else(|_| S::zero()).is_zero() {
            return Err(Error::InvalidParameter(
                "cannot integrate a series with a nonzero x^-1 term".into(),
            ));
        }
        let low = self.low + 1;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let e = self.low + i as i32 + 1;
                if e == 0 {
                    S::zero()
                } else {
                    c.clone() / S::from_int(e as i64)
                }
            })
            .collect();
        Ok(Self::raw(low, coeffs, self.order + 1))
    }

    /// Integer power; negative powers go through the reciprocal.
    pub fn powi(&self, k: i32) -> Result<Self> {
        if k < 0 {
            return self.reciprocal()?.powi(-k);
        }
        if k == 0 {
            // x^0 = 1 exactly; keep the input's relative precision.
            let v = self.valuation().unwrap_or(self.low);
            return Ok(Self::one(self.order - v));
        }
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut e = k as u32;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.mul(&base),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul(&base);
        }
        Ok(result.expect("k > 0"))
    }

    /// `self^p` for rational `p`, for series of the form `x^v (1 + ...)` with
    /// `v * p` an integer.
    pub fn pow_ratio(&self, p: &Rational) -> Result<Self> {
        let a = self.normalized();
        let v = a.valuation().ok_or(Error::NonInvertible)?;
        if !a.coeffs[0].is_one() {
            return Err(Error::InvalidParameter(
                "rational power needs a unit leading coefficient".into(),
            ));
        }
        let vp = Rational::from_integer(BigInt::from(v)) * p;
        if !vp.is_integer() {
            return Err(Error::InvalidParameter(format!(
                "x^{v} raised to {p} is not a Laurent monomial"
            )));
        }
        let new_low: i32 = vp.to_integer().try_into().map_err(|_| {
            Error::InvalidParameter("power exponent out of range".into())
        })?;
        let pp = S::from_rational(p);
        let len = a.coeffs.len();
        let mut b = Vec::with_capacity(len);
        b.push(S::one());
        // J. C. P. Miller recurrence for (1 + u)^p.
        for k in 1..len {
            let mut acc = S::zero();
            for j in 1..=k {
                let w = (pp.clone() + S::one()) * S::from_int(j as i64) - S::from_int(k as i64);
                acc.add_mul(&w, &a.coeffs[j].mul_ref(&b[k - j]));
            }
            b.push(acc / S::from_int(k as i64));
        }
        Ok(Self::raw(new_low, b, new_low + (a.order - v)))
    }

    /// `exp(self)` for a series with no constant or pole part.
    pub fn exp(&self) -> Result<Self> {
        if self.terms().any(|(e, _)| e <= 0) {
            return Err(Error::InvalidParameter(
                "exp needs a series vanishing at x = 0".into(),
            ));
        }
        if self.order < 0 {
            return Ok(Self::zero(self.order));
        }
        let len = (self.order + 1) as usize;
        let a: Vec<S> = (0..len as i32)
            .map(|e| self.coeff(e).unwrap_or_else(|_| S::zero()))
            .collect();
        let mut b = Vec::with_capacity(len);
        b.push(S::one());
        for k in 1..len {
            let mut acc = S::zero();
            for j in 1..=k {
                acc.add_mul(&S::from_int(j as i64), &a[j].mul_ref(&b[k - j]));
            }
            b.push(acc / S::from_int(k as i64));
        }
        Ok(Self::raw(0, b, self.order))
    }

    /// Checks the near-identity shape `x (1 + ...)` required of substitutions.
    fn check_near_identity(&self) -> Result<()> {
        let v = self.normalized();
        match v.valuation() {
            Some(1) if v.coeffs[0].is_one() && v.order >= 1 => Ok(()),
            Some(e) => Err(Error::NotNearIdentity(format!(
                "leading term at x^{e} with coefficient {:?}",
                v.coeffs[0]
            ))),
            None => Err(Error::NotNearIdentity("zero series".into())),
        }
    }

    /// Composition `self(sub(x))` for a near-identity `sub = x (1 + ...)`.
    pub fn substitute(&self, sub: &Self) -> Result<Self> {
        sub.check_near_identity()?;
        let sub = sub.normalized();
        let mut acc = Self::zero(self.order);
        let mut power: Option<Self> = None;
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = self.low + i as i32;
            let p = match power.take() {
                None => sub.powi(e)?,
                Some(prev) => prev.mul(&sub),
            };
            if !c.is_zero() {
                acc = acc.add(&p.scale(c));
            }
            power = Some(p);
        }
        Ok(acc)
    }

    /// Compositional inverse `t` of a near-identity series `s`: `s(t(x)) = x`,
    /// by the fixed-point iteration `t <- x - h(t)` with `h = s - x`.
    pub fn compositional_inverse(&self) -> Result<Self> {
        self.check_near_identity()?;
        let x = Self::monomial(S::one(), 1, self.order);
        let h = self.sub(&x);
        let mut t = Self::monomial(S::one(), 1, 1);
        loop {
            let next = x.sub(&h.substitute(&t)?);
            if next.order <= t.order {
                return Ok(next);
            }
            t = next;
        }
    }

    /// Sum of the known terms at a floating point argument.
    pub fn eval(&self, x: f64) -> f64 {
        self.terms()
            .map(|(e, c)| c.as_f64() * x.powi(e))
            .sum()
    }

    pub fn to_float(&self) -> LaurentSeries<f64> {
        LaurentSeries::raw(
            self.low,
            self.coeffs.iter().map(|c| c.as_f64()).collect(),
            self.order,
        )
    }

    /// Taylor series of `sinh(x)` through `x^order`.
    pub fn sinh(order: i32) -> Self {
        let mut terms = Vec::new();
        let mut fact = Rational::one();
        for e in 1..=order.max(1) {
            fact *= Rational::from_integer(BigInt::from(e));
            if e % 2 == 1 && e <= order {
                terms.push((e, S::from_rational(&fact.recip())));
            }
        }
        Self::from_terms(&terms, order)
    }
}

impl<S: Scalar> fmt::Debug for LaurentSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<S: Scalar> fmt::Display for LaurentSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match e {
                0 => write!(f, "({c:?})")?,
                1 => write!(f, "({c:?})x")?,
                _ => write!(f, "({c:?})x^{e}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(x^{})", self.order + 1)
    }
}

pub type ExactSeries = LaurentSeries<Rational>;
pub type FloatSeries = LaurentSeries<f64>;

/// A series whose coefficient field is chosen at runtime.
///
/// Arithmetic between an exact and a float series is refused unless one side
/// is explicitly promoted with [`AnySeries::promote`].
#[derive(Debug, Clone, PartialEq)]
pub enum AnySeries {
    Exact(ExactSeries),
    Float(FloatSeries),
}

impl AnySeries {
    pub fn kind(&self) -> ScalarKind {
        match self {
            AnySeries::Exact(_) => ScalarKind::Exact,
            AnySeries::Float(_) => ScalarKind::Float,
        }
    }

    /// Converts to the float field.
    pub fn promote(&self) -> AnySeries {
        match self {
            AnySeries::Exact(s) => AnySeries::Float(s.to_float()),
            AnySeries::Float(s) => AnySeries::Float(s.clone()),
        }
    }

    fn mixed(&self, other: &AnySeries) -> Error {
        Error::MixedScalarKinds(self.kind().name(), other.kind().name())
    }

    pub fn mul(&self, other: &AnySeries) -> Result<AnySeries> {
        match (self, other) {
            (AnySeries::Exact(a), AnySeries::Exact(b)) => Ok(AnySeries::Exact(a.mul(b))),
            (AnySeries::Float(a), AnySeries::Float(b)) => Ok(AnySeries::Float(a.mul(b))),
            _ => Err(self.mixed(other)),
        }
    }

    pub fn add(&self, other: &AnySeries) -> Result<AnySeries> {
        match (self, other) {
            (AnySeries::Exact(a), AnySeries::Exact(b)) => Ok(AnySeries::Exact(a.add(b))),
            (AnySeries::Float(a), AnySeries::Float(b)) => Ok(AnySeries::Float(a.add(b))),
            _ => Err(self.mixed(other)),
        }
    }

    pub fn substitute(&self, sub: &AnySeries) -> Result<AnySeries> {
        match (self, sub) {
            (AnySeries::Exact(a), AnySeries::Exact(b)) => Ok(AnySeries::Exact(a.substitute(b)?)),
            (AnySeries::Float(a), AnySeries::Float(b)) => Ok(AnySeries::Float(a.substitute(b)?)),
            _ => Err(self.mixed(sub)),
        }
    }

    pub fn reciprocal(&self) -> Result<AnySeries> {
        Ok(match self {
            AnySeries::Exact(a) => AnySeries::Exact(a.reciprocal()?),
            AnySeries::Float(a) => AnySeries::Float(a.reciprocal()?),
        })
    }

    pub fn derivative(&self) -> AnySeries {
        match self {
            AnySeries::Exact(a) => AnySeries::Exact(a.derivative()),
            AnySeries::Float(a) => AnySeries::Float(a.derivative()),
        }
    }
}
