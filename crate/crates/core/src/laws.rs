//! Exact laws: the Markov kernel `P^(s)`, the boundary laws `pi_N`,
//! `tilde pi_N`, the singular-number law `m_N` in its direct, profile and
//! two chain forms, the Hall-Littlewood law `nu^(s)`, the Rogers-Ramanujan
//! distribution of `k_1`, and the volume/Haar pushforwards.
//!
//! All `s`-dependence goes through `t = p^{-s}`, so every finite law is an
//! exact rational. Infinite products appear only in `pi^(s)` and `nu^(s)`
//! and are returned as certified brackets.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::padic::check_prime;
use crate::qseries::{pochhammer, pochhammer_inf, pochhammer_table, CertifiedValue};
use crate::rational::{format_exact, int, p_pow, pow};

/// Prime `p` and `t = p^{-s}` with `0 < t < p` (that is, `s > -1`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuaParams {
    p: u64,
    t: BigRational,
}

impl HuaParams {
    pub fn new(p: u64, t: BigRational) -> Result<Self> {
        check_prime(p)?;
        if !t.is_positive() || t >= int(p as i64) {
            return Err(Error::InvalidDomain(format!(
                "t = {} must satisfy 0 < t < p = {p}",
                format_exact(&t)
            )));
        }
        Ok(Self { p, t })
    }

    /// `s = 0`.
    pub fn volume(p: u64) -> Result<Self> {
        Self::new(p, BigRational::one())
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn t(&self) -> &BigRational {
        &self.t
    }

    /// `q = p^{-1}`.
    pub fn q(&self) -> BigRational {
        p_pow(self.p, -1)
    }

    /// `a = p^{-1-s} = t / p`.
    pub fn a(&self) -> BigRational {
        &self.t / int(self.p as i64)
    }

    /// The same prime at `s = 0`.
    pub fn at_zero(&self) -> Self {
        Self { p: self.p, t: BigRational::one() }
    }
}

impl fmt::Display for HuaParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={}, t={}", self.p, format_exact(&self.t))
    }
}

impl Serialize for HuaParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("HuaParams", 2)?;
        st.serialize_field("p", &self.p)?;
        st.serialize_field("t", &format_exact(&self.t))?;
        st.end()
    }
}

/// An element of `Delta_0`, stored as multiplicities `l_1, l_2, ...`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    mult: Vec<u64>,
}

impl Partition {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Zero parts are ignored; order does not matter.
    pub fn from_parts(parts: &[u64]) -> Self {
        let mut mult = Vec::new();
        for &k in parts.iter().filter(|&&k| k > 0) {
            let i = k as usize;
            if mult.len() < i {
                mult.resize(i, 0);
            }
            mult[i - 1] += 1;
        }
        Self { mult }
    }

    /// `l[0]` is the multiplicity of the part 1.
    pub fn from_multiplicities(l: &[u64]) -> Self {
        let mut mult = l.to_vec();
        while mult.last() == Some(&0) {
            mult.pop();
        }
        Self { mult }
    }

    /// From `X_1 >= X_2 >= ...`; the sequence is implicitly followed by 0.
    pub fn from_tail_sums(x: &[u64]) -> Result<Self> {
        if x.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidTuple(format!("tail sums must decrease: {x:?}")));
        }
        let l: Vec<u64> = (0..x.len())
            .map(|i| x[i] - x.get(i + 1).copied().unwrap_or(0))
            .collect();
        Ok(Self::from_multiplicities(&l))
    }

    pub fn multiplicity(&self, i: usize) -> u64 {
        if i == 0 {
            return 0;
        }
        self.mult.get(i - 1).copied().unwrap_or(0)
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.mult
    }

    /// `X_1, ..., X_{k_1}`, all positive.
    pub fn tail_sums(&self) -> Vec<u64> {
        let mut out = vec![0; self.mult.len()];
        let mut acc = 0;
        for i in (0..self.mult.len()).rev() {
            acc += self.mult[i];
            out[i] = acc;
        }
        out
    }

    /// `X_i = sum_{j >= i} l_j` for `i >= 1`.
    pub fn tail_sum(&self, i: usize) -> u64 {
        self.mult.iter().skip(i.saturating_sub(1)).sum()
    }

    /// Parts in decreasing order.
    pub fn parts(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for i in (0..self.mult.len()).rev() {
            out.extend(std::iter::repeat_n(i as u64 + 1, self.mult[i] as usize));
        }
        out
    }

    pub fn largest_part(&self) -> u64 {
        self.mult.len() as u64
    }

    /// Number of positive parts, `X_1`.
    pub fn length(&self) -> u64 {
        self.mult.iter().sum()
    }

    /// `sum_i i l_i = sum_i X_i`.
    pub fn weight(&self) -> u64 {
        self.mult.iter().enumerate().map(|(i, &l)| (i as u64 + 1) * l).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.mult.is_empty()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts().iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.parts().serialize(serializer)
    }
}

/// Multiplicities `l_i = #{j : k_j = i}` of a finite element of `Delta_N`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LProfile {
    l: BTreeMap<i64, u64>,
}

impl LProfile {
    pub fn from_tuple(k: &[i64]) -> Result<Self> {
        check_decreasing(k)?;
        let mut l = BTreeMap::new();
        for &x in k {
            *l.entry(x).or_insert(0) += 1;
        }
        Ok(Self { l })
    }

    pub fn from_map(map: BTreeMap<i64, u64>) -> Self {
        Self { l: map.into_iter().filter(|&(_, v)| v > 0).collect() }
    }

    pub fn n(&self) -> u64 {
        self.l.values().sum()
    }

    pub fn l(&self, i: i64) -> u64 {
        self.l.get(&i).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.l.iter().map(|(&i, &v)| (i, v))
    }

    /// `sum_{j >= i} l_j`.
    pub fn s_ge(&self, i: i64) -> u64 {
        self.l.range(i..).map(|(_, &v)| v).sum()
    }

    /// `sum_{j <= i} l_j`.
    pub fn s_le(&self, i: i64) -> u64 {
        self.l.range(..=i).map(|(_, &v)| v).sum()
    }

    pub fn to_tuple(&self) -> Vec<i64> {
        let mut out = Vec::new();
        for (&i, &v) in self.l.iter().rev() {
            out.extend(std::iter::repeat_n(i, v as usize));
        }
        out
    }

    fn max_index(&self) -> i64 {
        self.l.keys().next_back().copied().unwrap_or(0)
    }

    fn min_index(&self) -> i64 {
        self.l.keys().next().copied().unwrap_or(0)
    }
}

fn check_decreasing(k: &[i64]) -> Result<()> {
    if k.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidTuple(format!("not weakly decreasing: {k:?}")));
    }
    Ok(())
}

/// `(q; q)_n` at `q = 1/p`, computed by table.
struct QTables {
    qq: Vec<BigRational>,
    aq: Vec<BigRational>,
}

impl QTables {
    fn new(hp: &HuaParams, n: usize) -> Self {
        let q = hp.q();
        Self { qq: pochhammer_table(&q, &q, n), aq: pochhammer_table(&hp.a(), &q, n) }
    }
}

/// `P^(s)(x1, x2)`.
pub fn kernel_p(hp: &HuaParams, x1: u64, x2: u64) -> BigRational {
    if x2 > x1 {
        return BigRational::zero();
    }
    let (q, a) = (hp.q(), hp.a());
    let (x1, x2) = (x1 as usize, x2 as usize);
    let num = pochhammer(&q, &q, x1) * pochhammer(&a, &q, x1);
    let den = pochhammer(&q, &q, x2) * pochhammer(&q, &q, x1 - x2) * pochhammer(&a, &q, x2);
    p_pow(hp.p, -((x2 * x2) as i64)) * pow(&hp.t, x2 as i64) * num / den
}

/// The row `P^(s)(x1, 0..=x1)`.
pub fn kernel_row(hp: &HuaParams, x1: u64) -> Vec<BigRational> {
    let n = x1 as usize;
    let tb = QTables::new(hp, n);
    let head = &tb.qq[n] * &tb.aq[n];
    (0..=n)
        .map(|x2| {
            p_pow(hp.p, -((x2 * x2) as i64)) * pow(&hp.t, x2 as i64) * &head
                / (&tb.qq[x2] * &tb.qq[n - x2] * &tb.aq[x2])
        })
        .collect()
}

/// `pi^(s)(x) / (a; q)_inf = p^{-x^2} t^x / ((q;q)_x (a;q)_x)`.
pub fn pi_s_weight(hp: &HuaParams, x: u64) -> BigRational {
    let (q, a) = (hp.q(), hp.a());
    let xs = x as usize;
    p_pow(hp.p, -((x * x) as i64)) * pow(&hp.t, x as i64)
        / (pochhammer(&q, &q, xs) * pochhammer(&a, &q, xs))
}

fn scaled_eps(eps: &BigRational, factor: &BigRational) -> BigRational {
    if *factor > BigRational::one() {
        eps / factor
    } else {
        eps.clone()
    }
}

/// `(p^{-1-s}; p^{-1})_inf`, bracketed to width `eps`.
pub fn hua_infinite(hp: &HuaParams, eps: &BigRational) -> Result<CertifiedValue> {
    Ok(pochhammer_inf(&hp.a(), &hp.q(), eps)?.bracket)
}

/// `pi^(s)(x)` bracketed to width at most `eps`.
pub fn pi_s(hp: &HuaParams, x: u64, eps: &BigRational) -> Result<CertifiedValue> {
    let w = pi_s_weight(hp, x);
    let inf = hua_infinite(hp, &scaled_eps(eps, &w))?;
    Ok(inf.scale(&w))
}

/// A rigorous upper bound on `sum_{y > m} pi^(s)(y)` that does not use
/// the normalization of `pi^(s)`.
///
/// `pi^(s)(y) <= p^{-y^2} t^y / (q;q)_inf` and the ratio of successive
/// terms is at most `p^{-2(m+1)}` beyond `m`.
pub fn pi_s_tail_bound(hp: &HuaParams, m: u64) -> Result<BigRational> {
    let q = hp.q();
    let euler = pochhammer_inf(&q, &q, &BigRational::new(1.into(), 1000.into()))?.bracket;
    let y = m + 1;
    let first = p_pow(hp.p, -((y * y) as i64)) * pow(&hp.t, y as i64);
    let ratio = p_pow(hp.p, -2 * y as i64);
    Ok(first / (BigRational::one() - ratio) / euler.lower())
}

fn hua_norm(tb: &QTables, n: usize) -> BigRational {
    &tb.aq[n] * &tb.aq[n] / &tb.aq[2 * n]
}

/// `pi_N^(s)(x)`, the law of the number of non-positive singular numbers.
pub fn pi_n(hp: &HuaParams, n: u64, x: u64) -> BigRational {
    if x > n {
        return BigRational::zero();
    }
    let tb = QTables::new(hp, 2 * n as usize);
    pi_n_with(hp, &tb, n, x)
}

fn pi_n_with(hp: &HuaParams, tb: &QTables, n: u64, x: u64) -> BigRational {
    let (nu, xu) = (n as usize, x as usize);
    let d = n - x;
    hua_norm(tb, nu) * &tb.qq[nu] * &tb.qq[nu] * p_pow(hp.p, -((d * d) as i64)) * pow(&hp.t, d as i64)
        / (&tb.qq[xu] * &tb.qq[xu] * &tb.qq[nu - xu] * &tb.aq[nu - xu])
}

/// `tilde pi_N^(s)(x)`, the law of the number of non-negative singular numbers.
pub fn tilde_pi_n(hp: &HuaParams, n: u64, x: u64) -> BigRational {
    if x > n {
        return BigRational::zero();
    }
    let tb = QTables::new(hp, 2 * n as usize);
    tilde_pi_n_with(hp, &tb, n, x)
}

fn tilde_pi_n_with(hp: &HuaParams, tb: &QTables, n: u64, x: u64) -> BigRational {
    let (nu, xu) = (n as usize, x as usize);
    let d = n - x;
    hua_norm(tb, nu) * &tb.qq[nu] * &tb.qq[nu] * p_pow(hp.p, -((d * d) as i64))
        / (&tb.qq[xu] * &tb.aq[xu] * &tb.qq[nu - xu] * &tb.qq[nu - xu])
}

/// The full row `pi_N^(s)(0..=N)`.
pub fn pi_n_law(hp: &HuaParams, n: u64) -> Vec<BigRational> {
    let tb = QTables::new(hp, 2 * n as usize);
    (0..=n).map(|x| pi_n_with(hp, &tb, n, x)).collect()
}

/// The full row `tilde pi_N^(s)(0..=N)`.
pub fn tilde_pi_n_law(hp: &HuaParams, n: u64) -> Vec<BigRational> {
    let tb = QTables::new(hp, 2 * n as usize);
    (0..=n).map(|x| tilde_pi_n_with(hp, &tb, n, x)).collect()
}

fn inv_multiplicity_product(tb: &QTables, prof: &LProfile) -> BigRational {
    let mut den = BigRational::one();
    for (_, l) in prof.entries() {
        den *= &tb.qq[l as usize];
    }
    den.recip()
}

/// `m_N^(s)(k)` from the product over the singular numbers themselves.
pub fn m_n_direct(hp: &HuaParams, k: &[i64]) -> Result<BigRational> {
    let prof = LProfile::from_tuple(k)?;
    let n = k.len() as i64;
    let tb = QTables::new(hp, 2 * k.len());
    let g: i64 = k.iter().filter(|&&x| x > 0).sum();
    let lin: i64 = k.iter().enumerate().map(|(j, &x)| (2 * (j as i64 + 1) - 2 * n - 1) * x).sum();
    let qn = &tb.qq[k.len()];
    Ok(hua_norm(&tb, k.len())
        * pow(&hp.t, g)
        * p_pow(hp.p, -2 * n * g - lin)
        * qn
        * qn
        * inv_multiplicity_product(&tb, &prof))
}

/// `m_N^(s)` written through the multiplicity profile only.
pub fn m_n_profile(hp: &HuaParams, prof: &LProfile) -> BigRational {
    let n = prof.n() as usize;
    let tb = QTables::new(hp, 2 * n);
    let weight: i64 = prof.entries().filter(|&(i, _)| i > 0).map(|(i, l)| i * l as i64).sum();
    let mut quad: i64 = 0;
    for i in 1..=prof.max_index().max(0) {
        let x = prof.s_ge(i) as i64;
        quad += x * x;
    }
    for i in 1..=(-prof.min_index()).max(0) {
        let y = prof.s_le(-i) as i64;
        quad += y * y;
    }
    let qn = &tb.qq[n];
    hua_norm(&tb, n)
        * qn
        * qn
        * pow(&hp.t, weight)
        * p_pow(hp.p, -quad)
        * inv_multiplicity_product(&tb, prof)
}

/// Chain from `tilde pi_N`: non-negative tail sums under `P^(s)`, then the
/// complements of the lower tail sums under `P^(0)`.
pub fn chain_product_rep1(hp: &HuaParams, prof: &LProfile) -> BigRational {
    let n = prof.n();
    let zero = hp.at_zero();
    let mut acc = tilde_pi_n(hp, n, prof.s_ge(0));
    for i in 0..=prof.max_index().max(0) {
        acc *= kernel_p(hp, prof.s_ge(i), prof.s_ge(i + 1));
    }
    for i in 0..=(-prof.min_index()).max(0) {
        acc *= kernel_p(&zero, n - prof.s_ge(-i), n - prof.s_ge(-i - 1));
    }
    acc
}

/// Chain from `pi_N`: complements of the upper cumulative sums under
/// `P^(s)`, lower cumulative sums under `P^(0)`.
pub fn chain_product_rep2(hp: &HuaParams, prof: &LProfile) -> BigRational {
    let n = prof.n();
    let zero = hp.at_zero();
    let mut acc = pi_n(hp, n, prof.s_le(0));
    for i in 0..=prof.max_index().max(0) {
        acc *= kernel_p(hp, n - prof.s_le(i), n - prof.s_le(i + 1));
    }
    for i in 0..=(-prof.min_index()).max(0) {
        acc *= kernel_p(&zero, prof.s_le(-i), prof.s_le(-i - 1));
    }
    acc
}

/// `nu^(s)(lambda) / (a; q)_inf`.
pub fn nu_weight(hp: &HuaParams, lam: &Partition) -> BigRational {
    let q = hp.q();
    let x = lam.tail_sums();
    let quad: u64 = x.iter().map(|v| v * v).sum();
    let mut den = BigRational::one();
    for &l in lam.multiplicities() {
        den *= pochhammer(&q, &q, l as usize);
    }
    p_pow(hp.p, -(quad as i64)) * pow(&hp.t, lam.weight() as i64) / den
}

/// `nu^(s)(lambda)` bracketed to width at most `eps`.
pub fn nu_s(hp: &HuaParams, lam: &Partition, eps: &BigRational) -> Result<CertifiedValue> {
    let w = nu_weight(hp, lam);
    let inf = hua_infinite(hp, &scaled_eps(eps, &w))?;
    Ok(inf.scale(&w))
}

/// `nu^(s)` through its chain: `pi^(s)(X_1) prod_i P^(s)(X_i, X_{i+1})`.
pub fn nu_chain_product(hp: &HuaParams, lam: &Partition, eps: &BigRational) -> Result<CertifiedValue> {
    let x = lam.tail_sums();
    let first = x.first().copied().unwrap_or(0);
    let mut kernel = BigRational::one();
    for i in 0..x.len() {
        kernel *= kernel_p(hp, x[i], x.get(i + 1).copied().unwrap_or(0));
    }
    let head = pi_s(hp, first, &scaled_eps(eps, &kernel))?;
    Ok(head.scale(&kernel))
}

/// `vol` pushed forward to singular numbers.
pub fn vol_singular_law(p: u64, k: &[i64]) -> Result<BigRational> {
    check_prime(p)?;
    let prof = LProfile::from_tuple(k)?;
    let hp = HuaParams::volume(p)?;
    let tb = QTables::new(&hp, k.len());
    let n = k.len() as i64;
    let lin: i64 = k.iter().enumerate().map(|(j, &x)| (2 * (j as i64 + 1) - 2 * n - 1) * x).sum();
    let qn = &tb.qq[k.len()];
    Ok(p_pow(p, -lin) * qn * qn * inv_multiplicity_product(&tb, &prof))
}

/// Haar mass of the double coset `GL(N, Z_p) diag(p^{-k}) GL(N, Z_p)`.
pub fn haar_orbit_mass(p: u64, k: &[i64]) -> Result<BigRational> {
    check_prime(p)?;
    let prof = LProfile::from_tuple(k)?;
    let hp = HuaParams::volume(p)?;
    let tb = QTables::new(&hp, k.len());
    let n = k.len() as i64;
    let lin: i64 = k.iter().enumerate().map(|(j, &x)| (2 * (j as i64 + 1) - n - 1) * x).sum();
    Ok(p_pow(p, -lin) * &tb.qq[k.len()] * inv_multiplicity_product(&tb, &prof))
}

/// `nu^(s)(k_1 < x)` for `s in {0, 1}` as a product over residue classes
/// modulo `2x + 1`.
pub fn rr_cdf(p: u64, s: u8, x: u64, eps: &BigRational) -> Result<CertifiedValue> {
    check_prime(p)?;
    if x < 2 {
        return Err(Error::InvalidDomain(format!("x = {x} must be at least 2")));
    }
    if !eps.is_positive() {
        return Err(Error::InvalidDomain("eps must be positive".into()));
    }
    let m = 2 * x + 1;
    let (start, classes) = match s {
        0 => (1, [0, x, m - x]),
        1 => (2, [0, 1, m - 1]),
        _ => return Err(Error::InvalidDomain(format!("s = {s}: only s = 0 and s = 1 are covered"))),
    };
    let q = p_pow(p, -1);
    let mut head = BigRational::one();
    let mut qi = pow(&q, start as i64 - 1);
    let mut i = start - 1;
    loop {
        // prod_{j > i} (1 - q^j) over any subset lies in [1 - q^{i+1}/(1-q), 1].
        let tail = &qi * &q / (BigRational::one() - &q);
        if &tail <= eps {
            let lower = &head * (BigRational::one() - tail);
            return Ok(CertifiedValue::new(lower, head));
        }
        i += 1;
        qi *= &q;
        if classes.contains(&(i % m)) {
            head *= BigRational::one() - &qi;
        }
    }
}

/// `nu^(s)(k_1 < x)` by direct summation of `nu^(s)` over partitions with
/// parts below `x`, with a rigorous bound for the neglected `X_1 > M`.
pub fn nu_first_part_below(hp: &HuaParams, x: u64, eps: &BigRational) -> Result<CertifiedValue> {
    if x == 0 {
        return Ok(CertifiedValue::exact(BigRational::zero()));
    }
    if !eps.is_positive() {
        return Err(Error::InvalidDomain("eps must be positive".into()));
    }
    let half = eps / int(2);
    let mut m = 0;
    let mut tail = pi_s_tail_bound(hp, m)?;
    while tail > half {
        m += 1;
        tail = pi_s_tail_bound(hp, m)?;
    }
    let mut sum = BigRational::zero();
    for lam in partitions_bounded(m, x - 1) {
        sum += nu_weight(hp, &lam);
    }
    let inf = hua_infinite(hp, &scaled_eps(&half, &sum))?;
    let body = inf.scale(&sum);
    Ok(CertifiedValue::new(body.lower().clone(), body.upper() + tail))
}

/// All partitions with at most `max_len` parts, each at most `max_part`.
pub fn partitions_bounded(max_len: u64, max_part: u64) -> Vec<Partition> {
    fn rec(prefix: &mut Vec<u64>, cap: u64, left: u64, out: &mut Vec<Partition>) {
        out.push(Partition::from_parts(prefix));
        if left == 0 {
            return;
        }
        for k in 1..=cap {
            prefix.push(k);
            rec(prefix, k, left - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), max_part, max_len, &mut out);
    out.sort();
    out
}

/// All weakly decreasing tuples of length `n` with parts in `[lo, hi]`.
pub fn tuples_bounded(n: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    fn rec(prefix: &mut Vec<i64>, n: usize, lo: i64, cap: i64, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for k in (lo..=cap).rev() {
            prefix.push(k);
            rec(prefix, n, lo, k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, lo, hi, &mut out);
    out
}

/// Values of both sides of the three rewriting identities for `k`:
/// `[(lhs1, rhs1a, rhs1b), (lhs2, rhs2, rhs2), (lhs3, rhs3a, rhs3b)]`.
pub fn rewrite_identity_sides(k: &[i64]) -> Result<[(i64, i64, i64); 3]> {
    let prof = LProfile::from_tuple(k)?;
    let n = k.len() as i64;
    let idx = |j: usize| j as i64 + 1;
    let lhs1: i64 = k.iter().enumerate().filter(|(_, &x)| x > 0).map(|(j, &x)| x * (2 * idx(j) - 1)).sum();
    let top = prof.max_index().max(0);
    let rhs1a: i64 = (1..=top).map(|i| (prof.s_ge(i) as i64).pow(2)).sum();
    let rhs1b: i64 = (0..top).map(|i| (n - prof.s_le(i) as i64).pow(2)).sum();
    let lhs2: i64 = k
        .iter()
        .enumerate()
        .filter(|(_, &x)| x <= 0)
        .map(|(j, &x)| x * (2 * idx(j) - 2 * n - 1))
        .sum();
    let rhs2: i64 = (1..=(-prof.min_index()).max(0)).map(|i| (prof.s_le(-i) as i64).pow(2)).sum();
    let lhs3: i64 = k.iter().filter(|&&x| x > 0).sum();
    let rhs3a: i64 = prof.entries().filter(|&(i, _)| i >= 0).map(|(i, l)| i * l as i64).sum();
    let rhs3b: i64 = prof.entries().filter(|&(i, _)| i >= 1).map(|(i, l)| i * l as i64).sum();
    Ok([(lhs1, rhs1a, rhs1b), (lhs2, rhs2, rhs2), (lhs3, rhs3a, rhs3b)])
}

pub fn rewrite_identity_check(k: &[i64]) -> Result<[bool; 3]> {
    let sides = rewrite_identity_sides(k)?;
    Ok(sides.map(|(a, b, c)| a == b && b == c))
}

/// A finitely supported law with exact masses. When the support is a
/// truncation, `deficit` is the mass outside it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactLaw<K: Ord> {
    masses: BTreeMap<K, BigRational>,
}

impl<K: Ord + Clone> ExactLaw<K> {
    pub fn new(masses: BTreeMap<K, BigRational>) -> Self {
        Self { masses }
    }

    pub fn masses(&self) -> &BTreeMap<K, BigRational> {
        &self.masses
    }

    pub fn mass(&self, k: &K) -> BigRational {
        self.masses.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total(&self) -> BigRational {
        self.masses.values().fold(BigRational::zero(), |acc, m| acc + m)
    }

    /// `1 - total`; zero for a complete law.
    pub fn deficit(&self) -> BigRational {
        BigRational::one() - self.total()
    }

    pub fn to_brackets(&self) -> BracketLaw<K> {
        BracketLaw::new(
            self.masses.iter().map(|(k, v)| (k.clone(), CertifiedValue::exact(v.clone()))).collect(),
        )
    }
}

impl<K: Ord + fmt::Display> Serialize for ExactLaw<K> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = serializer.serialize_map(Some(self.masses.len()))?;
        for (k, v) in &self.masses {
            m.serialize_entry(&k.to_string(), &format_exact(v))?;
        }
        m.end()
    }
}

/// A truncated law whose masses are certified brackets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BracketLaw<K: Ord> {
    masses: BTreeMap<K, CertifiedValue>,
}

impl<K: Ord> BracketLaw<K> {
    pub fn new(masses: BTreeMap<K, CertifiedValue>) -> Self {
        Self { masses }
    }

    pub fn masses(&self) -> &BTreeMap<K, CertifiedValue> {
        &self.masses
    }

    /// Bracket on the mass outside the listed support, for a probability law.
    pub fn rest(&self) -> CertifiedValue {
        let mut lo = BigRational::one();
        let mut hi = BigRational::one();
        for v in self.masses.values() {
            lo -= v.upper();
            hi -= v.lower();
        }
        if lo.is_negative() {
            lo = BigRational::zero();
        }
        if hi < lo {
            hi = lo.clone();
        }
        CertifiedValue::new(lo, hi)
    }
}

/// `m_N^(s)` on tuples with parts in `[-bound, bound]`.
pub fn m_n_law(hp: &HuaParams, n: usize, bound: i64) -> Result<ExactLaw<Vec<i64>>> {
    let mut masses = BTreeMap::new();
    for k in tuples_bounded(n, -bound, bound) {
        let m = m_n_direct(hp, &k)?;
        masses.insert(k, m);
    }
    Ok(ExactLaw::new(masses))
}

/// `nu^(s)` on partitions with at most `max_len` parts, each at most
/// `max_part`.
pub fn nu_law(hp: &HuaParams, max_len: u64, max_part: u64, eps: &BigRational) -> Result<BracketLaw<Partition>> {
    let inf = hua_infinite(hp, eps)?;
    let mut masses = BTreeMap::new();
    for lam in partitions_bounded(max_len, max_part) {
        let w = nu_weight(hp, &lam);
        masses.insert(lam, inf.scale(&w));
    }
    Ok(BracketLaw::new(masses))
}

/// Certified total-variation distance between `pi_N^(s)(N - .)` and
/// `pi^(s)`.
pub fn boundary_tv(hp: &HuaParams, n: u64, eps: &BigRational) -> Result<CertifiedValue> {
    let law = pi_n_law(hp, n);
    let inf = hua_infinite(hp, eps)?;
    let mut lo = BigRational::zero();
    let mut hi = BigRational::zero();
    for x in 0..=n {
        let exact = &law[(n - x) as usize];
        let b = inf.scale(&pi_s_weight(hp, x));
        let d = b.sub(&CertifiedValue::exact(exact.clone())).abs();
        lo += d.lower();
        hi += d.upper();
    }
    hi += pi_s_tail_bound(hp, n)?;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    Ok(CertifiedValue::new(lo * &half, hi * half))
}
