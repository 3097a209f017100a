//! Finite-precision arithmetic in `Q_p`.
//!
//! A [`PadicScalar`] is `p^{-shift} * residue` where the residue is known
//! modulo `p^digits`, so the element itself is known modulo
//! `p^{digits - shift}` (its absolute precision). Nonzero residues are kept
//! coprime to `p`; all powers of `p` live in the shift.
//!
//! Two kinds of zero exist. The exact zero only comes from a literal `0`.
//! Cancellation produces a *zero to working precision*, stored with
//! `digits = 0` and `shift = -A`: the element lies in `p^A Z_p` and nothing
//! more is known.

use std::cmp::{max, min};
use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported prime.
pub const MAX_PRIME: u64 = 1 << 31;

/// Working precision: digits carried, and digits held back from certification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecisionBudget {
    digits: u32,
    guard: u32,
}

impl PrecisionBudget {
    pub const DEFAULT: PrecisionBudget = PrecisionBudget { digits: 24, guard: 8 };

    pub fn new(digits: u32, guard: u32) -> Result<Self> {
        if digits <= guard {
            return Err(Error::InvalidDomain(format!(
                "precision budget needs digits > guard, got {digits} <= {guard}"
            )));
        }
        Ok(Self { digits, guard })
    }

    /// No guard digits: every valuation below the window is reported.
    pub fn exact(digits: u32) -> Result<Self> {
        Self::new(digits, 0)
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn guard(&self) -> u32 {
        self.guard
    }
}

impl Default for PrecisionBudget {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Result of [`PadicScalar::valuation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Valuation {
    Finite(i64),
    /// Zero to working precision: the valuation is at least this bound.
    BelowPrecision(i64),
    /// The exact zero.
    Infinite,
}

impl Valuation {
    /// Lower bound usable in ultrametric comparisons.
    pub fn lower_bound(&self) -> Option<i64> {
        match *self {
            Valuation::Finite(v) | Valuation::BelowPrecision(v) => Some(v),
            Valuation::Infinite => None,
        }
    }
}

pub(crate) fn check_prime(p: u64) -> Result<()> {
    if p > MAX_PRIME || !crate::rational::is_prime(p) {
        return Err(Error::InvalidDomain(format!(
            "p = {p} must be a prime not exceeding 2^31"
        )));
    }
    Ok(())
}

/// Number of times `p` divides `n` (for `n != 0`), capped at `cap`.
pub(crate) fn p_valuation(n: &BigUint, p: u64, cap: u32) -> u32 {
    if n.is_zero() {
        return cap;
    }
    if p == 2 {
        return min(n.trailing_zeros().unwrap_or(0) as u32, cap);
    }
    let pb = BigUint::from(p);
    let mut v = 0;
    let mut m = n.clone();
    while v < cap {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            break;
        }
        m = q;
        v += 1;
    }
    v
}

pub(crate) fn p_power(p: u64, e: u32) -> BigUint {
    BigUint::from(p).pow(e)
}

/// Inverse of a unit modulo `modulus`.
pub(crate) fn mod_inverse(u: &BigUint, modulus: &BigUint) -> BigUint {
    if modulus.is_one() {
        return BigUint::zero();
    }
    let a = BigInt::from(u.clone());
    let m = BigInt::from(modulus.clone());
    let eg = a.extended_gcd(&m);
    debug_assert!(eg.gcd.is_one(), "inverse of a non-unit");
    eg.x.mod_floor(&m).to_biguint().expect("non-negative after mod_floor")
}

/// An element of `Q_p` known to finite absolute precision.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    p: u64,
    shift: i64,
    residue: BigUint,
    digits: u32,
    exact_zero: bool,
}

impl PadicScalar {
    pub fn zero(p: u64) -> Self {
        Self { p, shift: 0, residue: BigUint::zero(), digits: 0, exact_zero: true }
    }

    /// Zero to working precision: an unknown element of `p^abs_precision Z_p`.
    pub fn approx_zero(p: u64, abs_precision: i64) -> Self {
        Self { p, shift: -abs_precision, residue: BigUint::zero(), digits: 0, exact_zero: false }
    }

    /// `p^{-shift} * residue` with the residue known modulo `p^digits`.
    /// Normalizes powers of `p` out of the residue; a residue that vanishes
    /// modulo `p^digits` yields a zero to working precision.
    pub fn from_parts(p: u64, shift: i64, residue: BigUint, digits: u32) -> Result<Self> {
        check_prime(p)?;
        Ok(Self::normalized(p, shift, residue, digits))
    }

    fn normalized(p: u64, shift: i64, residue: BigUint, digits: u32) -> Self {
        let residue = residue % p_power(p, digits);
        if residue.is_zero() {
            return Self::approx_zero(p, digits as i64 - shift);
        }
        let v = p_valuation(&residue, p, digits);
        let residue = residue / p_power(p, v);
        Self { p, shift: shift - v as i64, residue, digits: digits - v, exact_zero: false }
    }

    /// An integer, carried with `digits` digits of relative precision.
    pub fn from_integer(p: u64, n: &BigInt, digits: u32) -> Result<Self> {
        Self::from_rational(p, &BigRational::from_integer(n.clone()), digits)
    }

    /// A rational number `a/b`; the `p`-free part of `b` is inverted modulo
    /// `p^digits`. Literal zero becomes the exact zero.
    pub fn from_rational(p: u64, r: &BigRational, digits: u32) -> Result<Self> {
        check_prime(p)?;
        if r.is_zero() {
            return Ok(Self::zero(p));
        }
        if digits == 0 {
            return Err(Error::PrecisionExhausted("zero digits requested".into()));
        }
        let pb = BigUint::from(p);
        let mut num = r.numer().magnitude().clone();
        let mut den = r.denom().magnitude().clone();
        let mut val = 0i64;
        while (&num % &pb).is_zero() {
            num /= &pb;
            val += 1;
        }
        while (&den % &pb).is_zero() {
            den /= &pb;
            val -= 1;
        }
        let modulus = p_power(p, digits);
        let mut residue = (num % &modulus) * mod_inverse(&(den % &modulus), &modulus) % &modulus;
        if r.is_negative() {
            residue = (&modulus - residue) % &modulus;
        }
        Ok(Self { p, shift: -val, residue, digits, exact_zero: false })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    /// The element lies in `p^{-shift} Z_p`.
    pub fn shift(&self) -> i64 {
        self.shift
    }

    pub fn residue(&self) -> &BigUint {
        &self.residue
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// The element is known modulo `p^{abs_precision}`; `None` for exact zero.
    pub fn abs_precision(&self) -> Option<i64> {
        (!self.exact_zero).then(|| self.digits as i64 - self.shift)
    }

    pub fn is_exact_zero(&self) -> bool {
        self.exact_zero
    }

    /// Nonzero with a certified valuation.
    pub fn is_certified(&self) -> bool {
        !self.exact_zero && !self.residue.is_zero()
    }

    pub fn valuation(&self) -> Valuation {
        if self.exact_zero {
            Valuation::Infinite
        } else if self.residue.is_zero() {
            Valuation::BelowPrecision(-self.shift)
        } else {
            Valuation::Finite(-self.shift)
        }
    }

    /// `(valuation, unit residue)` of a certified element.
    pub fn certified(&self) -> Result<(i64, &BigUint)> {
        if self.is_certified() {
            Ok((-self.shift, &self.residue))
        } else {
            Err(Error::PrecisionExhausted(format!(
                "{self} has no certified valuation"
            )))
        }
    }

    fn same_prime(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(Error::PrimeMismatch(self.p, other.p));
        }
        Ok(())
    }

    pub fn neg(&self) -> Self {
        if self.residue.is_zero() {
            return self.clone();
        }
        let modulus = p_power(self.p, self.digits);
        Self { residue: &modulus - &self.residue, ..self.clone() }
    }

    /// Sum, known to the coarser of the two absolute precisions.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_prime(other)?;
        if self.exact_zero {
            return Ok(other.clone());
        }
        if other.exact_zero {
            return Ok(self.clone());
        }
        let abs = min(
            self.digits as i64 - self.shift,
            other.digits as i64 - other.shift,
        );
        let shift = max(self.shift, other.shift);
        let digits = abs + shift;
        if digits <= 0 {
            return Ok(Self::approx_zero(self.p, abs));
        }
        let digits = u32::try_from(digits)
            .map_err(|_| Error::PrecisionExhausted("window too wide".into()))?;
        let lift = |x: &Self| &x.residue * p_power(x.p, (shift - x.shift) as u32);
        let sum = lift(self) + lift(other);
        Ok(Self::normalized(self.p, shift, sum, digits))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Product; valuations add, relative precision is the smaller of the two.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_prime(other)?;
        if self.exact_zero || other.exact_zero {
            return Ok(Self::zero(self.p));
        }
        match (self.residue.is_zero(), other.residue.is_zero()) {
            (false, false) => {
                let digits = min(self.digits, other.digits);
                let residue = (&self.residue * &other.residue) % p_power(self.p, digits);
                Ok(Self {
                    p: self.p,
                    shift: self.shift + other.shift,
                    residue,
                    digits,
                    exact_zero: false,
                })
            }
            // The zero factor's bound moves by the other factor's valuation
            // (or bound, when both are zero to precision).
            _ => Ok(Self::approx_zero(self.p, -(self.shift + other.shift))),
        }
    }

    /// Exact rational value of the stored representative.
    pub fn to_rational(&self) -> BigRational {
        let r = BigRational::from_integer(BigInt::from(self.residue.clone()));
        r * crate::rational::p_pow(self.p, -self.shift)
    }

    /// Residue as a machine integer when it fits.
    pub fn residue_u64(&self) -> Option<u64> {
        self.residue.to_u64()
    }
}

impl fmt::Display for PadicScalar {
    /// `a*p^v` with `a` the unit residue and `v` the valuation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact_zero {
            write!(f, "0")
        } else {
            write!(f, "{}*{}^{}", self.residue, self.p, -self.shift)
        }
    }
}

/// A Haar-random element of `Z_p` truncated to `digits` digits: every digit
/// uniform and independent.
pub fn sample_haar_zp<R: Rng + ?Sized>(p: u64, digits: u32, rng: &mut R) -> Result<PadicScalar> {
    check_prime(p)?;
    if digits == 0 {
        return Err(Error::InvalidDomain("Haar sampling needs at least one digit".into()));
    }
    let residue = rng.gen_biguint_below(&p_power(p, digits));
    Ok(PadicScalar::normalized(p, 0, residue, digits))
}

/// Uniform residue modulo `p^digits` without normalization, for matrix code.
pub(crate) fn sample_residue<R: Rng + ?Sized>(modulus: &BigUint, rng: &mut R) -> BigUint {
    rng.gen_biguint_below(modulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(p: u64, r: BigRational) -> PadicScalar {
        PadicScalar::from_rational(p, &r, 24).unwrap()
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(s(2, int(12)).valuation(), Valuation::Finite(2));
        assert_eq!(PadicScalar::zero(2).valuation(), Valuation::Infinite);
        assert_eq!(s(2, ratio(1, 2)).valuation(), Valuation::Finite(-1));
        assert_eq!(s(3, ratio(9, 2)).valuation(), Valuation::Finite(2));
    }

    #[test]
    fn mul_examples() {
        let m = s(2, int(2)).mul(&s(2, int(6))).unwrap();
        assert_eq!(m.valuation(), Valuation::Finite(2));
        assert_eq!(m.residue(), &BigUint::from(3u32));
        assert_eq!(m.to_rational(), int(12));
    }

    #[test]
    fn add_examples() {
        let a = s(2, int(1)).add(&s(2, int(3))).unwrap();
        assert_eq!(a.valuation(), Valuation::Finite(2));
        assert_eq!(a.residue(), &BigUint::one());
    }

    #[test]
    fn cancellation_is_never_exact_zero() {
        let x = s(5, ratio(7, 25));
        let z = x.add(&x.neg()).unwrap();
        assert!(!z.is_exact_zero());
        assert_eq!(z.valuation(), Valuation::BelowPrecision(22));
        assert!(z.certified().is_err());
        let y = s(5, int(3));
        assert_eq!(y.sub(&y).unwrap().valuation(), Valuation::BelowPrecision(24));
    }

    #[test]
    fn negative_rationals() {
        let x = s(3, ratio(-1, 2));
        assert_eq!(x.add(&s(3, ratio(1, 2))).unwrap().valuation(), Valuation::BelowPrecision(24));
        assert_eq!(format!("{}", s(2, ratio(3, 4))), "3*2^-2");
    }

    #[test]
    fn primes_must_match() {
        assert_eq!(s(2, int(1)).add(&s(3, int(1))), Err(Error::PrimeMismatch(2, 3)));
        assert!(PadicScalar::from_rational(4, &int(1), 3).is_err());
    }

    #[test]
    fn approx_zero_times_unit_keeps_bound() {
        let z = PadicScalar::approx_zero(2, 5);
        let y = s(2, ratio(1, 4));
        assert_eq!(z.mul(&y).unwrap().valuation(), Valuation::BelowPrecision(3));
        assert_eq!(y.add(&z).unwrap().valuation(), Valuation::Finite(-2));
    }

    #[test]
    fn haar_shell_law_by_enumeration() {
        // p = 2, E = 3: residues 0..8 give valuation counts 4, 2, 1 and one zero.
        let mut counts = [0u32; 4];
        for r in 0u32..8 {
            let x = PadicScalar::from_parts(2, 0, BigUint::from(r), 3).unwrap();
            match x.valuation() {
                Valuation::Finite(v) => counts[v as usize] += 1,
                _ => counts[3] += 1,
            }
        }
        assert_eq!(counts, [4, 2, 1, 1]);
    }

    #[test]
    fn haar_sampling_is_deterministic_and_uniform_mod_p() {
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            assert_eq!(sample_haar_zp(3, 6, &mut a).unwrap(), sample_haar_zp(3, 6, &mut b).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30_000;
        let mut hits = [0u32; 3];
        for _ in 0..n {
            let x = sample_haar_zp(3, 4, &mut rng).unwrap();
            let r = if x.valuation() == Valuation::Finite(0) {
                (x.residue() % 3u32).to_u64().unwrap() as usize
            } else {
                0
            };
            hits[r] += 1;
        }
        for h in hits {
            let f = h as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 4.0 * (2.0f64 / 9.0 / n as f64).sqrt());
        }
    }

    fn arb_scalar() -> impl Strategy<Value = PadicScalar> {
        (prop::sample::select(vec![2u64, 3, 5]), -6i64..6, 1u64..10_000, 4u32..16).prop_map(
            |(p, shift, a, digits)| {
                PadicScalar::from_parts(p, shift, BigUint::from(a), digits).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn ultrametric_and_additivity(x in arb_scalar(), y in arb_scalar()) {
            let y = PadicScalar::from_parts(x.prime(), y.shift(), y.residue().clone() * 1u32, y.digits()).unwrap();
            let sum = x.add(&y).unwrap();
            if x.is_certified() && y.is_certified() {
                let (vx, _) = x.certified().unwrap();
                let (vy, _) = y.certified().unwrap();
                let vs = sum.valuation().lower_bound().unwrap();
                prop_assert!(vs >= min(vx, vy));
                if vx != vy {
                    prop_assert_eq!(sum.valuation(), Valuation::Finite(min(vx, vy)));
                }
                let prod = x.mul(&y).unwrap();
                prop_assert_eq!(prod.valuation(), Valuation::Finite(vx + vy));
            }
            for r in [&sum, &x.mul(&y).unwrap()] {
                prop_assert!(r.residue().is_zero() || !(r.residue() % x.prime()).is_zero());
            }
        }
    }
}
