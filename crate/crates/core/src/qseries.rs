//! Exact q-Pochhammer symbols and certified brackets for infinite products.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{ceil_scaled, floor_scaled, format_exact, ratio, to_f64};

/// `(a; q)_n = prod_{j<n} (1 - a q^j)`, exactly.
pub fn pochhammer(a: &BigRational, q: &BigRational, n: usize) -> BigRational {
    let mut acc = BigRational::one();
    let mut term = a.clone();
    for _ in 0..n {
        acc *= BigRational::one() - &term;
        term *= q;
    }
    acc
}

/// All prefixes `(a; q)_0, ..., (a; q)_n`.
pub fn pochhammer_table(a: &BigRational, q: &BigRational, n: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = BigRational::one();
    let mut term = a.clone();
    out.push(acc.clone());
    for _ in 0..n {
        acc *= BigRational::one() - &term;
        term *= q;
        out.push(acc.clone());
    }
    out
}

/// A closed interval `[lower, upper]` with exact rational endpoints that is
/// known to contain some real quantity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedValue {
    lower: BigRational,
    upper: BigRational,
}

impl CertifiedValue {
    pub fn new(lower: BigRational, upper: BigRational) -> Self {
        assert!(lower <= upper, "inverted bracket");
        Self { lower, upper }
    }

    pub fn exact(value: BigRational) -> Self {
        Self { lower: value.clone(), upper: value }
    }

    pub fn lower(&self) -> &BigRational {
        &self.lower
    }

    pub fn upper(&self) -> &BigRational {
        &self.upper
    }

    pub fn width(&self) -> BigRational {
        &self.upper - &self.lower
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lower <= x && x <= &self.upper
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }

    pub fn midpoint_f64(&self) -> f64 {
        to_f64(&((&self.lower + &self.upper) / BigRational::from_integer(2.into())))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { lower: &self.lower + &other.lower, upper: &self.upper + &other.upper }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { lower: &self.lower - &other.upper, upper: &self.upper - &other.lower }
    }

    /// Interval product (general signs).
    pub fn mul(&self, other: &Self) -> Self {
        let c = [
            &self.lower * &other.lower,
            &self.lower * &other.upper,
            &self.upper * &other.lower,
            &self.upper * &other.upper,
        ];
        let lower = c.iter().min().unwrap().clone();
        let upper = c.iter().max().unwrap().clone();
        Self { lower, upper }
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        if r.is_negative() {
            Self { lower: &self.upper * r, upper: &self.lower * r }
        } else {
            Self { lower: &self.lower * r, upper: &self.upper * r }
        }
    }

    /// `|x|` bracket.
    pub fn abs(&self) -> Self {
        if !self.lower.is_negative() {
            self.clone()
        } else if !self.upper.is_positive() {
            Self { lower: -&self.upper, upper: -&self.lower }
        } else {
            let upper = std::cmp::max(-&self.lower, self.upper.clone());
            Self { lower: BigRational::zero(), upper }
        }
    }

    /// Widens the endpoints outward to dyadic rationals with denominator
    /// `2^bits`, keeping their size bounded.
    pub fn outward(&self, bits: u32) -> Self {
        let den = BigInt::one() << bits;
        let lo = if self.lower.is_negative() {
            -BigRational::new(ceil_scaled(&-&self.lower, bits).into(), den.clone())
        } else {
            BigRational::new(floor_scaled(&self.lower, bits).into(), den.clone())
        };
        let hi = if self.upper.is_negative() {
            -BigRational::new(floor_scaled(&-&self.upper, bits).into(), den)
        } else {
            BigRational::new(ceil_scaled(&self.upper, bits).into(), den)
        };
        Self { lower: lo, upper: hi }
    }
}

impl fmt::Display for CertifiedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.12e}, {:.12e}]", to_f64(&self.lower), to_f64(&self.upper))
    }
}

impl Serialize for CertifiedValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("CertifiedValue", 4)?;
        st.serialize_field("lower", &format_exact(&self.lower))?;
        st.serialize_field("upper", &format_exact(&self.upper))?;
        st.serialize_field("lower_decimal", &to_f64(&self.lower))?;
        st.serialize_field("upper_decimal", &to_f64(&self.upper))?;
        st.end()
    }
}

/// A certified infinite product together with the truncation point used.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub bracket: CertifiedValue,
    pub terms: usize,
}

/// Brackets `(a; q)_inf` to width at most `eps`.
///
/// Truncates at `K` factors and bounds the tail multiplicatively: once
/// `a q^K < 1/2`, `0 <= -log prod_{j>=K} (1 - a q^j) <= 2 a q^K / (1 - q)`,
/// and `e^{-T} >= 1 - T`.
pub fn pochhammer_inf(a: &BigRational, q: &BigRational, eps: &BigRational) -> Result<Truncation> {
    if a.is_negative() || *a >= BigRational::one() {
        return Err(Error::InvalidDomain(format!("(a; q)_inf needs 0 <= a < 1, got a = {a}")));
    }
    if !q.is_positive() || *q >= BigRational::one() {
        return Err(Error::InvalidDomain(format!("(a; q)_inf needs 0 < q < 1, got q = {q}")));
    }
    if !eps.is_positive() {
        return Err(Error::InvalidDomain("eps must be positive".into()));
    }
    if a.is_zero() {
        return Ok(Truncation { bracket: CertifiedValue::exact(BigRational::one()), terms: 0 });
    }
    let half = ratio(1, 2);
    let two_over = BigRational::from_integer(2.into()) / (BigRational::one() - q);
    let mut head = BigRational::one();
    let mut term = a.clone();
    let mut k = 0usize;
    loop {
        if term < half {
            let tail = &two_over * &term;
            // The head is at most 1, so the bracket width head * tail <= tail.
            if &tail <= eps {
                let lower = &head * (BigRational::one() - &tail);
                return Ok(Truncation { bracket: CertifiedValue::new(lower, head), terms: k });
            }
        }
        head *= BigRational::one() - &term;
        term *= q;
        k += 1;
    }
}
