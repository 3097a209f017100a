//! Helpers around [`BigRational`]: construction, powers, exact formatting and
//! parsing of the fraction strings used at the CLI boundary.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `base^exp` for any integer exponent. Panics on `0^negative`.
pub fn pow(base: &BigRational, exp: i64) -> BigRational {
    let mag = exp.unsigned_abs();
    let mag = u32::try_from(mag).expect("exponent out of range");
    let numer = base.numer().pow(mag);
    let denom = base.denom().pow(mag);
    if exp >= 0 {
        BigRational::new(numer, denom)
    } else {
        assert!(!numer.is_zero(), "zero to a negative power");
        BigRational::new(denom, numer)
    }
}

/// `p^exp` as an exact rational.
pub fn p_pow(p: u64, exp: i64) -> BigRational {
    let mag = u32::try_from(exp.unsigned_abs()).expect("exponent out of range");
    let big = BigInt::from(p).pow(mag);
    if exp >= 0 {
        BigRational::from_integer(big)
    } else {
        BigRational::new(BigInt::one(), big)
    }
}

/// `num/den` with the denominator always present.
pub fn format_exact(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Decimal rendering with `digits` digits after the point, truncated towards
/// zero.
pub fn format_decimal(r: &BigRational, digits: usize) -> String {
    let sign = if r.is_negative() { "-" } else { "" };
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = (r.abs() * BigRational::from_integer(scale.clone()))
        .floor()
        .to_integer();
    let (q, rem) = scaled.div_mod_floor(&scale);
    if digits == 0 {
        return format!("{sign}{q}");
    }
    format!("{sign}{}.{:0>width$}", q, rem.to_string(), width = digits)
}

/// Parses `a/b` or an integer `a`. Decimal notation is refused because the
/// Hua parameter must cross the boundary exactly.
pub fn parse_fraction(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.contains(['.', 'e', 'E']) {
        return Err(Error::Parse(format!(
            "'{s}' looks like a decimal; pass an exact fraction such as 1/2 (t = p^-s, so s = 1 at p = 2 is 1/2)"
        )));
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| Error::Parse(format!("bad numerator in '{s}'")))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| Error::Parse(format!("bad denominator in '{s}'")))?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in '{s}'")));
    }
    Ok(BigRational::new(num, den))
}

/// Parses a fraction, an integer, or a finite decimal such as `1e-6` or
/// `0.001`, all exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.contains('/') || !s.contains(['.', 'e', 'E']) {
        return parse_fraction(s);
    }
    let bad = || Error::Parse(format!("bad number '{s}'"));
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (ip, fp) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    let digits = format!("{ip}{fp}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let mut value = BigRational::from_integer(digits.parse::<BigInt>().map_err(|_| bad())?);
    value *= pow(&int(10), exp - fp.len() as i64);
    Ok(if neg { -value } else { value })
}

/// `floor(r * 2^bits)` for `0 <= r`, as a big unsigned integer.
pub fn floor_scaled(r: &BigRational, bits: u32) -> BigUint {
    let scaled = r * BigRational::from_integer(BigInt::one() << bits);
    let fl = scaled.floor().to_integer();
    match fl.sign() {
        Sign::Minus => BigUint::zero(),
        _ => fl.magnitude().clone(),
    }
}

/// `ceil(r * 2^bits)` for `0 <= r`.
pub fn ceil_scaled(r: &BigRational, bits: u32) -> BigUint {
    let scaled = r * BigRational::from_integer(BigInt::one() << bits);
    let cl = scaled.ceil().to_integer();
    match cl.sign() {
        Sign::Minus => BigUint::zero(),
        _ => cl.magnitude().clone(),
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        assert_eq!(format_exact(&parse_fraction("2/6").unwrap()), "1/3");
        assert_eq!(format_exact(&parse_fraction("5").unwrap()), "5/1");
        assert!(parse_fraction("0.5").is_err());
        assert!(parse_fraction("1/0").is_err());
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_decimal("1e-6").unwrap(), ratio(1, 1_000_000));
        assert_eq!(parse_decimal("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_decimal("-2.5e1").unwrap(), int(-25));
        assert_eq!(parse_decimal("3/8").unwrap(), ratio(3, 8));
        assert!(parse_decimal("e5").is_err());
    }

    #[test]
    fn powers() {
        assert_eq!(p_pow(2, -3), ratio(1, 8));
        assert_eq!(pow(&ratio(2, 3), -2), ratio(9, 4));
        assert_eq!(format_decimal(&ratio(1, 3), 4), "0.3333");
        assert_eq!(format_decimal(&ratio(-1, 3), 2), "-0.33");
    }

    #[test]
    fn scaled_floor_and_ceil() {
        assert_eq!(floor_scaled(&ratio(1, 3), 4), BigUint::from(5u32));
        assert_eq!(ceil_scaled(&ratio(1, 3), 4), BigUint::from(6u32));
        assert_eq!(ceil_scaled(&ratio(1, 2), 4), BigUint::from(8u32));
    }
}
