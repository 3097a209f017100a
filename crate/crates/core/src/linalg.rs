//! Square matrices over `Q_p`, their singular numbers, corners, Haar
//! sampling on `GL(N, Z_p)` and orbit assembly.
//!
//! A [`PadicMatrix`] stores one shared shift `s0` and the row-major residues
//! of the integral matrix `p^{s0} M` modulo `p^E`. Every entry of `M` is thus
//! known modulo `p^{E - s0}`, and elimination runs in `Z / p^E`.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::laws::HuaParams;
use crate::padic::{
    check_prime, mod_inverse, p_power, p_valuation, sample_residue, PadicScalar, PrecisionBudget,
};
use crate::qseries::pochhammer;

/// One coordinate of a singular tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SingularValue {
    Exact(i64),
    /// Not certified: the true value is at most this floor.
    AtMost(i64),
}

impl SingularValue {
    pub fn exact(&self) -> Option<i64> {
        match *self {
            SingularValue::Exact(k) => Some(k),
            SingularValue::AtMost(_) => None,
        }
    }
}

impl fmt::Display for SingularValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularValue::Exact(k) => write!(f, "{k}"),
            SingularValue::AtMost(k) => write!(f, "<={k}"),
        }
    }
}

impl Serialize for SingularValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SingularValue::Exact(k) => serializer.serialize_i64(*k),
            SingularValue::AtMost(_) => serializer.serialize_str(&self.to_string()),
        }
    }
}

/// An element of `Delta_N`: `k_1 >= ... >= k_N`, with uncertified values
/// only in a suffix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SingularTuple {
    #[serde(skip)]
    p: u64,
    values: Vec<SingularValue>,
}

impl SingularTuple {
    pub fn new(p: u64, values: Vec<SingularValue>) -> Result<Self> {
        let mut seen_marker = false;
        let mut prev: Option<i64> = None;
        for v in &values {
            let cur = match *v {
                SingularValue::Exact(k) => {
                    if seen_marker {
                        return Err(Error::InvalidTuple("exact value after a marker".into()));
                    }
                    k
                }
                SingularValue::AtMost(f) => {
                    seen_marker = true;
                    f
                }
            };
            if let Some(pv) = prev {
                if cur > pv {
                    return Err(Error::InvalidTuple(format!("not weakly decreasing: {values:?}")));
                }
            }
            prev = Some(cur);
        }
        Ok(Self { p, values })
    }

    pub fn from_exact(p: u64, ks: &[i64]) -> Result<Self> {
        Self::new(p, ks.iter().map(|&k| SingularValue::Exact(k)).collect())
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[SingularValue] {
        &self.values
    }

    pub fn is_certified(&self) -> bool {
        self.values.iter().all(|v| matches!(v, SingularValue::Exact(_)))
    }

    /// All values as integers; law evaluators refuse markers.
    pub fn finite(&self) -> Result<Vec<i64>> {
        self.values
            .iter()
            .map(|v| {
                v.exact().ok_or_else(|| {
                    Error::BelowPrecision(format!("singular tuple {self} has uncertified entries"))
                })
            })
            .collect()
    }

    /// The strictly positive parts, in decreasing order. Markers are always
    /// non-positive under the default budgets; a positive floor is an error.
    pub fn positive_parts(&self) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        for v in &self.values {
            match *v {
                SingularValue::Exact(k) if k > 0 => out.push(k as u64),
                SingularValue::Exact(_) => {}
                SingularValue::AtMost(f) if f > 0 => {
                    return Err(Error::BelowPrecision(format!(
                        "marker <= {f} hides possibly positive parts"
                    )))
                }
                SingularValue::AtMost(_) => {}
            }
        }
        Ok(out)
    }
}

impl fmt::Display for SingularTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicMatrix {
    p: u64,
    n: usize,
    shift: i64,
    digits: u32,
    guard: u32,
    modulus: BigUint,
    entries: Vec<BigUint>,
}

impl PadicMatrix {
    /// Builds `M = p^{-shift} * entries`, entries read modulo `p^digits`,
    /// then factors any common power of `p` into the shift.
    pub fn from_scaled(
        p: u64,
        n: usize,
        shift: i64,
        digits: u32,
        guard: u32,
        entries: Vec<BigUint>,
    ) -> Result<Self> {
        check_prime(p)?;
        if entries.len() != n * n {
            return Err(Error::Dimension(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        let modulus = p_power(p, digits);
        let entries = entries.into_iter().map(|e| e % &modulus).collect();
        let mut m = Self { p, n, shift, digits, guard, modulus, entries };
        m.normalize();
        Ok(m)
    }

    fn normalize(&mut self) {
        let v = self
            .entries
            .iter()
            .map(|e| p_valuation(e, self.p, self.digits))
            .min()
            .unwrap_or(0);
        if v == 0 || v >= self.digits {
            return;
        }
        let d = p_power(self.p, v);
        for e in &mut self.entries {
            *e /= &d;
        }
        self.shift -= v as i64;
        self.digits -= v;
        self.modulus = p_power(self.p, self.digits);
    }

    /// Exact rational entries, carried with the budget's digits relative to
    /// the largest entry.
    pub fn from_rationals(
        p: u64,
        n: usize,
        entries: &[BigRational],
        budget: PrecisionBudget,
    ) -> Result<Self> {
        check_prime(p)?;
        if entries.len() != n * n {
            return Err(Error::Dimension(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        let scalars = entries
            .iter()
            .map(|r| PadicScalar::from_rational(p, r, budget.digits()))
            .collect::<Result<Vec<_>>>()?;
        let shift = scalars
            .iter()
            .filter(|s| !s.is_exact_zero())
            .map(|s| s.shift())
            .max()
            .unwrap_or(0);
        let modulus = p_power(p, budget.digits());
        let scaled = scalars
            .iter()
            .map(|s| {
                if s.is_exact_zero() {
                    return BigUint::zero();
                }
                let up = (shift - s.shift()) as u32;
                if up >= budget.digits() {
                    BigUint::zero()
                } else {
                    s.residue() * p_power(p, up) % &modulus
                }
            })
            .collect();
        Self::from_scaled(p, n, shift, budget.digits(), budget.guard(), scaled)
    }

    /// Entries as [`PadicScalar`]s; the matrix takes the coarsest absolute
    /// precision among them.
    pub fn from_scalars(p: u64, n: usize, entries: &[PadicScalar], guard: u32) -> Result<Self> {
        check_prime(p)?;
        if entries.len() != n * n {
            return Err(Error::Dimension(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        if let Some(bad) = entries.iter().find(|e| e.prime() != p) {
            return Err(Error::PrimeMismatch(p, bad.prime()));
        }
        let shift = entries
            .iter()
            .filter(|s| s.is_certified())
            .map(|s| s.shift())
            .max()
            .unwrap_or(0);
        let abs = entries.iter().filter_map(|s| s.abs_precision()).min();
        let digits = match abs {
            Some(a) if a + shift <= 0 => {
                return Err(Error::PrecisionExhausted("entries carry no common window".into()))
            }
            Some(a) => (a + shift) as u32,
            None => {
                return Err(Error::PrecisionExhausted(
                    "all entries are exact zeros; use from_rationals with a budget".into(),
                ))
            }
        };
        let modulus = p_power(p, digits);
        let scaled = entries
            .iter()
            .map(|s| {
                if !s.is_certified() {
                    return BigUint::zero();
                }
                let up = (shift - s.shift()) as u32;
                if up >= digits {
                    BigUint::zero()
                } else {
                    s.residue() * p_power(p, up) % &modulus
                }
            })
            .collect();
        Self::from_scaled(p, n, shift, digits, guard, scaled)
    }

    pub fn identity(p: u64, n: usize, budget: PrecisionBudget) -> Result<Self> {
        let entries = (0..n * n)
            .map(|i| if i / n == i % n { BigUint::one() } else { BigUint::zero() })
            .collect();
        Self::from_scaled(p, n, 0, budget.digits(), budget.guard(), entries)
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `M` lies in `p^{-shift} Mat(N, Z_p)`.
    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// Digits of the scaled integral matrix `p^{shift} M` that are known.
    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn guard(&self) -> u32 {
        self.guard
    }

    /// Singular values at or below this are reported as markers.
    pub fn precision_floor(&self) -> i64 {
        self.shift - self.digits as i64 + self.guard as i64
    }

    /// Row-major residues of `p^{shift} M` modulo `p^digits`.
    pub fn scaled_entries(&self) -> &[BigUint] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> PadicScalar {
        PadicScalar::from_parts(self.p, self.shift, self.entries[i * self.n + j].clone(), self.digits)
            .expect("prime already validated")
    }

    /// Top-left `m x m` block, absolute window preserved.
    pub fn corner(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n {
            return Err(Error::Dimension(format!("corner {m} of a {}x{} matrix", self.n, self.n)));
        }
        let entries = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[i * self.n + j].clone())
            .collect();
        Self::from_scaled(self.p, m, self.shift, self.digits, self.guard, entries)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.p != other.p {
            return Err(Error::PrimeMismatch(self.p, other.p));
        }
        if self.n != other.n {
            return Err(Error::Dimension(format!("{} vs {}", self.n, other.n)));
        }
        let n = self.n;
        let digits = self.digits.min(other.digits);
        let modulus = p_power(self.p, digits);
        let mut out = vec![BigUint::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = BigUint::zero();
                for l in 0..n {
                    acc += &self.entries[i * n + l] * &other.entries[l * n + j];
                }
                out[i * n + j] = acc % &modulus;
            }
        }
        Self::from_scaled(
            self.p,
            n,
            self.shift + other.shift,
            digits,
            self.guard.max(other.guard),
            out,
        )
    }

    /// Entries reduced modulo `p`, when the matrix is integral.
    fn mod_p(&self) -> Option<Vec<u64>> {
        if self.shift > 0 {
            return None;
        }
        let pb = BigUint::from(self.p);
        let lift = (-self.shift) as u32;
        Some(
            self.entries
                .iter()
                .map(|e| {
                    if lift > 0 {
                        0
                    } else {
                        (e % &pb).to_u64().expect("residue below p")
                    }
                })
                .collect(),
        )
    }

    /// Whether the matrix lies in `GL(N, Z_p)`.
    pub fn is_unimodular(&self) -> bool {
        match self.mod_p() {
            Some(r) => rank_mod_p(r, self.n, self.p) == self.n,
            None => false,
        }
    }

    /// Singular numbers `k_1 >= ... >= k_N` with `M = B diag(p^{-k_i}) C`.
    ///
    /// Smith normal form of `p^{shift} M` over `Z / p^E` by minimum-valuation
    /// pivoting; the pivot valuations are the elementary-divisor valuations.
    pub fn singular_numbers(&self) -> Result<SingularTuple> {
        if self.digits == 0 {
            return Err(Error::PrecisionExhausted("matrix carries no digits".into()));
        }
        let vals = smith_valuations(self.p, self.n, self.digits, &self.modulus, self.entries.clone());
        let cut = self.digits.saturating_sub(self.guard);
        let floor = self.precision_floor();
        let values = vals
            .into_iter()
            .map(|v| {
                if v >= cut {
                    SingularValue::AtMost(floor)
                } else {
                    SingularValue::Exact(self.shift - v as i64)
                }
            })
            .collect();
        SingularTuple::new(self.p, values)
    }

    /// Parses the text format: one row per line, entries `a*p^v`, `a`, or
    /// `a/b` (optionally `a/b*p^v`), separated by whitespace or commas.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str, p: u64, budget: PrecisionBudget) -> Result<Self> {
        check_prime(p)?;
        let mut rows: Vec<Vec<BigRational>> = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| parse_entry(t, p))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse(format!("matrix is not square ({n} rows)")));
        }
        let flat: Vec<BigRational> = rows.into_iter().flatten().collect();
        Self::from_rationals(p, n, &flat, budget)
    }

    /// Entries rendered as `a*p^v` strings.
    pub fn to_rows(&self) -> Vec<Vec<String>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.entry(i, j).to_string()).collect())
            .collect()
    }
}

impl fmt::Display for PadicMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.to_rows() {
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn parse_entry(tok: &str, p: u64) -> Result<BigRational> {
    let bad = |why: &str| Error::Parse(format!("entry '{tok}': {why}"));
    let (coef, power) = match tok.split_once('*') {
        Some((c, pw)) => (c, Some(pw)),
        None => (tok, None),
    };
    let coef = crate::rational::parse_fraction(coef).map_err(|_| bad("bad coefficient"))?;
    let exp = match power {
        None => 0,
        Some(pw) => {
            let (base, e) = pw.split_once('^').ok_or_else(|| bad("expected p^v"))?;
            let base: u64 = base.trim().parse().map_err(|_| bad("bad base"))?;
            if base != p {
                return Err(bad(&format!("base {base} differs from p = {p}")));
            }
            e.trim().parse::<i64>().map_err(|_| bad("bad exponent"))?
        }
    };
    Ok(coef * crate::rational::p_pow(p, exp))
}

/// Pivot valuations of the Smith form of an `n x n` matrix over `Z / p^E`,
/// in non-decreasing order; `E` stands for "zero modulo `p^E`".
pub(crate) fn smith_valuations(
    p: u64,
    n: usize,
    digits: u32,
    modulus: &BigUint,
    a: Vec<BigUint>,
) -> Vec<u32> {
    if let Some(m) = modulus.to_u64().filter(|&m| m < 1 << 62) {
        let small = a.iter().map(|e| e.to_u64().expect("reduced entry")).collect();
        return smith_valuations_u64(p, n, digits, m, small);
    }
    smith_valuations_big(p, n, digits, modulus, a)
}

pub(crate) fn smith_valuations_big(
    p: u64,
    n: usize,
    digits: u32,
    modulus: &BigUint,
    mut a: Vec<BigUint>,
) -> Vec<u32> {
    let mut out = Vec::with_capacity(n);
    let mut val: Vec<u32> = a.iter().map(|e| p_valuation(e, p, digits)).collect();
    for step in 0..n {
        let floor = out.last().copied().unwrap_or(0);
        let mut best = (digits, step, step);
        'search: for r in step..n {
            for c in step..n {
                let v = val[r * n + c];
                if v < best.0 {
                    best = (v, r, c);
                    if v == floor {
                        break 'search;
                    }
                }
            }
        }
        let (v, pr, pc) = best;
        if v >= digits {
            out.extend(std::iter::repeat_n(digits, n - step));
            break;
        }
        if pr != step {
            for c in 0..n {
                a.swap(pr * n + c, step * n + c);
                val.swap(pr * n + c, step * n + c);
            }
        }
        if pc != step {
            for r in 0..n {
                a.swap(r * n + pc, r * n + step);
                val.swap(r * n + pc, r * n + step);
            }
        }
        let pv = p_power(p, v);
        let unit = &a[step * n + step] / &pv;
        let unit_inv = mod_inverse(&unit, modulus);
        for r in step + 1..n {
            if val[r * n + step] >= digits {
                continue;
            }
            let f = (&a[r * n + step] / &pv) * &unit_inv % modulus;
            for c in step + 1..n {
                let sub = &f * &a[step * n + c] % modulus;
                let e = &mut a[r * n + c];
                if *e >= sub {
                    *e -= sub;
                } else {
                    *e += modulus - sub;
                }
                val[r * n + c] = p_valuation(e, p, digits);
            }
            a[r * n + step] = BigUint::zero();
            val[r * n + step] = digits;
        }
        out.push(v);
    }
    out
}

fn val_u64(mut x: u64, p: u64, cap: u32) -> u32 {
    if x == 0 {
        return cap;
    }
    if p == 2 {
        return x.trailing_zeros().min(cap);
    }
    let mut v = 0;
    while v < cap && x.is_multiple_of(p) {
        x /= p;
        v += 1;
    }
    v
}

fn inv_u64(u: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i128, u as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    s0.rem_euclid(m as i128) as u64
}

/// Same elimination in machine words, for `p^E < 2^62`.
pub(crate) fn smith_valuations_u64(p: u64, n: usize, digits: u32, m: u64, mut a: Vec<u64>) -> Vec<u32> {
    let mulmod = |x: u64, y: u64| ((x as u128 * y as u128) % m as u128) as u64;
    let mut out = Vec::with_capacity(n);
    let mut val: Vec<u32> = a.iter().map(|&e| val_u64(e, p, digits)).collect();
    for step in 0..n {
        let floor = out.last().copied().unwrap_or(0);
        let mut best = (digits, step, step);
        'search: for r in step..n {
            for c in step..n {
                let v = val[r * n + c];
                if v < best.0 {
                    best = (v, r, c);
                    if v == floor {
                        break 'search;
                    }
                }
            }
        }
        let (v, pr, pc) = best;
        if v >= digits {
            out.extend(std::iter::repeat_n(digits, n - step));
            break;
        }
        if pr != step {
            for c in 0..n {
                a.swap(pr * n + c, step * n + c);
                val.swap(pr * n + c, step * n + c);
            }
        }
        if pc != step {
            for r in 0..n {
                a.swap(r * n + pc, r * n + step);
                val.swap(r * n + pc, r * n + step);
            }
        }
        let pv = p.pow(v);
        let unit_inv = inv_u64(a[step * n + step] / pv, m);
        for r in step + 1..n {
            if val[r * n + step] >= digits {
                continue;
            }
            let f = mulmod(a[r * n + step] / pv, unit_inv);
            for c in step + 1..n {
                let sub = mulmod(f, a[step * n + c]);
                let e = &mut a[r * n + c];
                *e = if *e >= sub { *e - sub } else { *e + (m - sub) };
                val[r * n + c] = val_u64(*e, p, digits);
            }
            a[r * n + step] = 0;
            val[r * n + step] = digits;
        }
        out.push(v);
    }
    out
}

/// Rank of an `n x n` matrix over `F_p`.
pub(crate) fn rank_mod_p(mut m: Vec<u64>, n: usize, p: u64) -> usize {
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % p as u128) as u64;
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..n).find(|&r| m[r * n + col] != 0) else {
            continue;
        };
        for c in 0..n {
            m.swap(piv * n + c, rank * n + c);
        }
        let inv = {
            let x = BigInt::from(m[rank * n + col]);
            let eg = x.extended_gcd(&BigInt::from(p));
            eg.x.mod_floor(&BigInt::from(p)).to_u64().unwrap()
        };
        for r in 0..n {
            if r != rank && m[r * n + col] != 0 {
                let f = mulmod(m[r * n + col], inv);
                for c in 0..n {
                    let sub = mulmod(f, m[rank * n + c]);
                    m[r * n + c] = (m[r * n + c] + p - sub) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Haar-random element of `GL(N, Z_p)` truncated to the budget's digits:
/// uniform entries, accepted iff the reduction mod `p` is invertible.
pub fn sample_haar_gl<R: Rng + ?Sized>(
    n: usize,
    p: u64,
    budget: PrecisionBudget,
    rng: &mut R,
) -> Result<PadicMatrix> {
    check_prime(p)?;
    let modulus = p_power(p, budget.digits());
    let pb = BigUint::from(p);
    loop {
        let entries: Vec<BigUint> = (0..n * n).map(|_| sample_residue(&modulus, rng)).collect();
        let reduced = entries.iter().map(|e| (e % &pb).to_u64().unwrap()).collect();
        if rank_mod_p(reduced, n, p) == n {
            return PadicMatrix::from_scaled(p, n, 0, budget.digits(), budget.guard(), entries);
        }
    }
}

/// `B * diag(p^{-k_1}, ..., p^{-k_N}) * C` for unimodular `B`, `C`.
pub fn assemble_orbit(k: &[i64], b: &PadicMatrix, c: &PadicMatrix) -> Result<PadicMatrix> {
    let n = k.len();
    if b.size() != n || c.size() != n {
        return Err(Error::Dimension(format!("tuple of length {n} with {}x{} factors", b.size(), b.size())));
    }
    if b.prime() != c.prime() {
        return Err(Error::PrimeMismatch(b.prime(), c.prime()));
    }
    SingularTuple::from_exact(b.prime(), k)?;
    if !b.is_unimodular() || !c.is_unimodular() {
        return Err(Error::InvalidDomain("orbit factors must lie in GL(N, Z_p)".into()));
    }
    let digits = b.digits().min(c.digits());
    if n == 0 {
        return Err(Error::Dimension("empty tuple".into()));
    }
    let top = k[0];
    if top >= digits as i64 {
        return Err(Error::PrecisionExhausted(format!(
            "p^-{top} leaves no absolute precision in a {digits}-digit window"
        )));
    }
    let p = b.prime();
    let modulus = p_power(p, digits);
    // Scale column j of B by p^{k_1 - k_j}; columns pushed past the window vanish.
    let mut scaled = vec![BigUint::zero(); n * n];
    for j in 0..n {
        let up = top - k[j];
        if up >= digits as i64 {
            continue;
        }
        let f = p_power(p, up as u32);
        for i in 0..n {
            scaled[i * n + j] = &b.scaled_entries()[i * n + j] * &f % &modulus;
        }
    }
    let bd = PadicMatrix::from_scaled(p, n, 0, digits, b.guard(), scaled)?;
    let mut out = bd.mul(c)?;
    out.shift += top;
    Ok(out)
}

/// Exponent `g` with `gamma = p^g`: the sum of the positive parts.
pub fn gamma_weight(k: &SingularTuple) -> Result<i64> {
    let parts = k.positive_parts()?;
    Ok(parts.iter().map(|&x| x as i64).sum())
}

/// Density of the Hua measure against additive Haar volume at a matrix
/// with singular numbers `k`, split as `coefficient * p^{p_exponent}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuaDensity {
    /// `(a; q)_N^2 / (a; q)_{2N} * t^g` with `a = t / p`, `q = 1 / p`.
    pub coefficient: BigRational,
    /// `-2 N g`.
    pub p_exponent: i64,
}

impl HuaDensity {
    pub fn value(&self, p: u64) -> BigRational {
        &self.coefficient * crate::rational::p_pow(p, self.p_exponent)
    }
}

/// Hua normalization `(p^{-1-s}; p^{-1})_N^2 / (p^{-1-s}; p^{-1})_{2N}`.
pub fn hua_normalization(hp: &HuaParams, n: usize) -> BigRational {
    let a = hp.a();
    let q = hp.q();
    let half = pochhammer(&a, &q, n);
    &half * &half / pochhammer(&a, &q, 2 * n)
}

pub fn hua_log_density(k: &SingularTuple, hp: &HuaParams) -> Result<HuaDensity> {
    if k.prime() != hp.p() {
        return Err(Error::PrimeMismatch(k.prime(), hp.p()));
    }
    let n = k.len();
    let g = gamma_weight(k)?;
    let coefficient = hua_normalization(hp, n) * crate::rational::pow(hp.t(), g);
    Ok(HuaDensity { coefficient, p_exponent: -2 * n as i64 * g })
}

/// Valuation of a nonzero integer (test and oracle helper).
pub fn int_valuation(x: &BigInt, p: u64) -> Option<u32> {
    if x.is_zero() {
        return None;
    }
    Some(p_valuation(x.magnitude(), p, u32::MAX))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact(p: u64, ks: &[i64]) -> SingularTuple {
        SingularTuple::from_exact(p, ks).unwrap()
    }

    fn mat(p: u64, rows: &[&[i64]]) -> PadicMatrix {
        let n = rows.len();
        let flat: Vec<BigRational> = rows.iter().flat_map(|r| r.iter().map(|&x| int(x))).collect();
        PadicMatrix::from_rationals(p, n, &flat, PrecisionBudget::exact(20).unwrap()).unwrap()
    }

    /// Determinantal divisors: v(d_1 ... d_j) is the minimum valuation of
    /// the j x j minors. Independent of the elimination above.
    #[allow(clippy::needless_range_loop)]
    fn oracle_by_minors(p: u64, m: &[Vec<i64>]) -> Vec<i64> {
        let n = m.len();
        let mut prefix = vec![0i64; n + 1];
        for j in 1..=n {
            let mut best: Option<u32> = None;
            for rows in subsets(n, j) {
                for cols in subsets(n, j) {
                    let sub: Vec<Vec<i64>> =
                        rows.iter().map(|&r| cols.iter().map(|&c| m[r][c]).collect()).collect();
                    if let Some(v) = int_valuation(&det(&sub), p) {
                        best = Some(best.map_or(v, |b| b.min(v)));
                    }
                }
            }
            prefix[j] = best.expect("full rank test matrices") as i64;
        }
        (1..=n).map(|j| -(prefix[j] - prefix[j - 1])).collect()
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 0..n {
            for rest in subsets(n, k - 1) {
                if rest.first().is_none_or(|&r| r > first) {
                    let mut v = vec![first];
                    v.extend(rest);
                    out.push(v);
                }
            }
        }
        out
    }

    fn det(m: &[Vec<i64>]) -> BigInt {
        let n = m.len();
        if n == 1 {
            return BigInt::from(m[0][0]);
        }
        let mut acc = BigInt::zero();
        for c in 0..n {
            let minor: Vec<Vec<i64>> = m[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, &x)| x).collect())
                .collect();
            let term = BigInt::from(m[0][c]) * det(&minor);
            if c % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        acc
    }

    #[test]
    fn singular_number_examples() {
        let d = PadicMatrix::from_rationals(
            2,
            2,
            &[ratio(1, 2), int(0), int(0), int(1)],
            PrecisionBudget::DEFAULT,
        )
        .unwrap();
        assert_eq!(d.singular_numbers().unwrap(), exact(2, &[1, 0]));
        assert_eq!(mat(2, &[&[2, 1], &[0, 4]]).singular_numbers().unwrap(), exact(2, &[0, -3]));
        assert_eq!(oracle_by_minors(2, &[vec![2, 1], vec![0, 4]]), vec![0, -3]);
    }

    #[test]
    fn zero_matrix_is_all_markers() {
        for p in [2, 3, 7] {
            let z = mat(p, &[&[0, 0, 0], &[0, 0, 0], &[0, 0, 0]]);
            let k = z.singular_numbers().unwrap();
            assert!(k.values().iter().all(|v| matches!(v, SingularValue::AtMost(_))));
            assert!(k.finite().is_err());
        }
    }

    #[test]
    fn markers_respect_guard() {
        // diag(1, 2^10): with 20 digits and guard 0 both are certified;
        // with guard 12 the second falls at the floor.
        let flat = [int(1), int(0), int(0), int(1024)];
        let m = PadicMatrix::from_rationals(2, 2, &flat, PrecisionBudget::new(20, 12).unwrap()).unwrap();
        let k = m.singular_numbers().unwrap();
        assert_eq!(k.values(), &[SingularValue::Exact(0), SingularValue::AtMost(-8)]);
        let m = PadicMatrix::from_rationals(2, 2, &flat, PrecisionBudget::exact(20).unwrap()).unwrap();
        assert_eq!(m.singular_numbers().unwrap(), exact(2, &[0, -10]));
    }

    #[test]
    fn corners() {
        let m = mat(3, &[&[1, 3, 0], &[9, 2, 1], &[0, 5, 27]]);
        assert_eq!(m.corner(3).unwrap(), m);
        assert_eq!(m.corner(2).unwrap().corner(1).unwrap(), m.corner(1).unwrap());
        let d = mat(5, &[&[25, 0], &[0, 1]]);
        let c = d.corner(1).unwrap();
        assert_eq!(c.entry(0, 0).to_rational(), int(25));
        assert_eq!(c.singular_numbers().unwrap(), exact(5, &[-2]));
        // Absolute window is preserved by renormalization.
        assert_eq!(c.shift() - c.digits() as i64, d.shift() - d.digits() as i64);
        assert!(m.corner(0).is_err() && m.corner(4).is_err());
    }

    #[test]
    fn haar_gl_acceptance_rate_and_unimodularity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let budget = PrecisionBudget::DEFAULT;
        for _ in 0..50 {
            let g = sample_haar_gl(3, 2, budget, &mut rng).unwrap();
            assert!(g.is_unimodular());
            assert_eq!(g.singular_numbers().unwrap(), exact(2, &[0, 0, 0]));
        }
        // Exhaustive: 6 of the 16 matrices over F_2 are invertible (3/8).
        let invertible = (0u64..16)
            .filter(|bits| rank_mod_p((0..4).map(|i| (bits >> i) & 1).collect(), 2, 2) == 2)
            .count();
        assert_eq!(invertible, 6);
    }

    #[test]
    fn haar_gl_mod_p_is_uniform_on_gl2_f2() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..n {
            let g = sample_haar_gl(2, 2, PrecisionBudget::new(4, 0).unwrap(), &mut rng).unwrap();
            let key: Vec<u64> = g.mod_p().unwrap();
            *counts.entry(key).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = n as f64 / 6.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 5 degrees of freedom; 20.5 is the 0.999 quantile.
        assert!(chi2 < 20.5, "chi-square {chi2}");
    }

    #[test]
    fn orbit_assembly() {
        let budget = PrecisionBudget::DEFAULT;
        let id = PadicMatrix::identity(2, 3, budget).unwrap();
        let m = assemble_orbit(&[2, 0, -1], &id, &id).unwrap();
        assert_eq!(m.entry(0, 0).to_rational(), ratio(1, 4));
        assert_eq!(m.entry(2, 2).to_rational(), int(2));
        assert!(m.entry(0, 1).to_rational().is_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in [vec![3, 1, 1, -2], vec![0, 0, 0, 0], vec![5, -4, -4, -9]] {
            let b = sample_haar_gl(4, 3, budget, &mut rng).unwrap();
            let c = sample_haar_gl(4, 3, budget, &mut rng).unwrap();
            let m = assemble_orbit(&k, &b, &c).unwrap();
            assert_eq!(m.singular_numbers().unwrap(), exact(3, &k));
        }
        assert!(assemble_orbit(&[24, 0], &PadicMatrix::identity(2, 2, budget).unwrap(), &PadicMatrix::identity(2, 2, budget).unwrap()).is_err());
        assert!(assemble_orbit(&[0, 1], &PadicMatrix::identity(2, 2, budget).unwrap(), &PadicMatrix::identity(2, 2, budget).unwrap()).is_err());
    }

    #[test]
    fn determinant_identity_on_example() {
        // det [[2,1],[0,4]] = 8, valuation 3 = -(0 + (-3)).
        let k = mat(2, &[&[2, 1], &[0, 4]]).singular_numbers().unwrap().finite().unwrap();
        assert_eq!(-k.iter().sum::<i64>(), int_valuation(&BigInt::from(8), 2).unwrap() as i64);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_weight(&exact(2, &[2, 1, 0, -3])).unwrap(), 3);
        assert_eq!(gamma_weight(&exact(2, &[0, -1])).unwrap(), 0);
        assert_eq!(gamma_weight(&exact(2, &[1])).unwrap(), 1);
        let marked = SingularTuple::new(2, vec![SingularValue::Exact(2), SingularValue::AtMost(-5)]).unwrap();
        assert_eq!(gamma_weight(&marked).unwrap(), 2);
        let bad = SingularTuple::new(2, vec![SingularValue::AtMost(3)]).unwrap();
        assert!(gamma_weight(&bad).is_err());
    }

    #[test]
    fn hua_density_examples() {
        let hp = HuaParams::new(2, int(1)).unwrap();
        // Normalization at N = 1 is (1/2)^2 / ((1/2)(3/4)) = 2/3.
        assert_eq!(hua_normalization(&hp, 1), ratio(2, 3));
        let d = hua_log_density(&exact(2, &[0]), &hp).unwrap();
        assert_eq!(d.value(2), ratio(2, 3));
        let d = hua_log_density(&exact(2, &[1]), &hp).unwrap();
        assert_eq!(d.p_exponent, -2);
        assert_eq!(d.value(2), ratio(1, 6));
        // Against the shell volume vol(p^{-1} Z_p^x) = 1 this is m_1((1)) = 1/6.
        let shell = int(2) * ratio(1, 2);
        assert_eq!(d.value(2) * shell, crate::laws::m_n_direct(&hp, &[1]).unwrap());
    }

    #[test]
    fn parse_text_format() {
        let m = PadicMatrix::parse("# comment\n3*2^-1 0\n1/3, -2*2^2\n", 2, PrecisionBudget::DEFAULT).unwrap();
        assert_eq!(m.size(), 2);
        assert_eq!(m.entry(0, 0).to_rational(), ratio(3, 2));
        assert_eq!(m.singular_numbers().unwrap(), exact(2, &[1, -3]));
        let again = PadicMatrix::parse(&m.to_string(), 2, PrecisionBudget::DEFAULT).unwrap();
        assert_eq!(again.singular_numbers().unwrap(), m.singular_numbers().unwrap());
        assert!(PadicMatrix::parse("1 2\n3", 2, PrecisionBudget::DEFAULT).is_err());
        assert!(PadicMatrix::parse("1*3^2", 2, PrecisionBudget::DEFAULT).is_err());
    }

    fn arb_int_matrix() -> impl Strategy<Value = (u64, Vec<Vec<i64>>)> {
        (prop::sample::select(vec![2u64, 3, 5]), 1usize..4).prop_flat_map(|(p, n)| {
            (Just(p), prop::collection::vec(prop::collection::vec(-40i64..40, n), n))
        })
    }

    #[test]
    fn wide_window_uses_big_integers() {
        // p^E far above 2^62 forces the arbitrary-precision elimination.
        let m = vec![vec![6, 4, 0], vec![2, 10, 8], vec![16, 2, 12]];
        let refs: Vec<&[i64]> = m.iter().map(|r| r.as_slice()).collect();
        let n = refs.len();
        let flat: Vec<BigRational> = refs.iter().flat_map(|r| r.iter().map(|&x| int(x))).collect();
        let a = PadicMatrix::from_rationals(2, n, &flat, PrecisionBudget::exact(100).unwrap()).unwrap();
        assert!(a.modulus.bits() > 64);
        assert_eq!(a.singular_numbers().unwrap().finite().unwrap(), oracle_by_minors(2, &m));
    }

    proptest! {
        #[test]
        fn big_and_word_eliminations_agree(
            p in prop::sample::select(vec![2u64, 3, 5]),
            n in 1usize..5,
            digits in 1u32..7,
            seed in any::<u64>(),
        ) {
            let m = p.pow(digits);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Bias towards p-divisible entries so that deep pivots occur.
            let entries: Vec<u64> = (0..n * n)
                .map(|_| rng.gen_range(0..m) * p.pow(rng.gen_range(0..digits)) % m)
                .collect();
            let big: Vec<BigUint> = entries.iter().map(|&e| BigUint::from(e)).collect();
            prop_assert_eq!(
                smith_valuations_big(p, n, digits, &BigUint::from(m), big),
                smith_valuations_u64(p, n, digits, m, entries)
            );
        }
    }

    proptest! {
        #[test]
        fn smith_matches_minor_oracle((p, m) in arb_int_matrix()) {
            prop_assume!(!det(&m).is_zero());
            let refs: Vec<&[i64]> = m.iter().map(|r| r.as_slice()).collect();
            let k = mat(p, &refs).singular_numbers().unwrap();
            prop_assert_eq!(k.finite().unwrap(), oracle_by_minors(p, &m));
            // Sum rule against the determinant.
            let v = int_valuation(&det(&m), p).unwrap() as i64;
            prop_assert_eq!(-k.finite().unwrap().iter().sum::<i64>(), v);
        }

        #[test]
        fn bi_invariance(seed in 0u64..1000, (p, m) in arb_int_matrix()) {
            let refs: Vec<&[i64]> = m.iter().map(|r| r.as_slice()).collect();
            let a = mat(p, &refs);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let budget = PrecisionBudget::exact(20).unwrap();
            let b = sample_haar_gl(a.size(), p, budget, &mut rng).unwrap();
            let c = sample_haar_gl(a.size(), p, budget, &mut rng).unwrap();
            let bac = b.mul(&a).unwrap().mul(&c).unwrap();
            prop_assert_eq!(bac.singular_numbers().unwrap(), a.singular_numbers().unwrap());
            for j in 1..=a.size() {
                prop_assert!(bac.corner(j).unwrap().singular_numbers().is_ok());
            }
        }
    }
}
