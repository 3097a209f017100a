//! Verification harness: exhaustive oracles, exact identity checks, and
//! Monte Carlo comparisons against exact laws.
//!
//! Monte Carlo draw `i` of an experiment uses its own ChaCha stream, and
//! histograms merge by integer addition, so every report is a function of
//! its parameters and seed alone, whatever the worker count.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::laws::{
    boundary_tv, chain_product_rep1, chain_product_rep2, hua_infinite, kernel_row, m_n_direct,
    m_n_law, m_n_profile, nu_chain_product, nu_first_part_below, nu_law, nu_weight,
    partitions_bounded, pi_n_law, rewrite_identity_check, rr_cdf, tilde_pi_n_law, tuples_bounded,
    vol_singular_law, BracketLaw, ExactLaw, HuaParams, LProfile, Partition,
};
use crate::linalg::{smith_valuations_u64, SingularTuple, SingularValue};
use crate::padic::{check_prime, PrecisionBudget};
use crate::qseries::CertifiedValue;
use crate::rational::{format_exact, int, p_pow, parse_decimal, ratio, to_f64};
use crate::samplers::{
    sample_ergodic_matrix, sample_hua_matrix, split, DiscreteLaw, HuaSampler, NuSampler, RngStream,
};

pub const SCHEMA: &str = "padic-hua.report.v1";

/// Suite names accepted by [`run_suite`], in the order `all` runs them.
pub const SUITES: [&str; 6] = ["oracle", "identities", "chains", "corners", "ergodic", "nulimit"];

/// Largest enumeration the oracle accepts.
pub const ORACLE_LIMIT: u64 = 1 << 24;

/// Counts per label; `other` collects outcomes that carry no label (for
/// example singular tuples with uncertified entries).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram<K: Ord> {
    counts: BTreeMap<K, u64>,
    other: u64,
    total: u64,
}

impl<K: Ord> Default for Histogram<K> {
    fn default() -> Self {
        Self { counts: BTreeMap::new(), other: 0, total: 0 }
    }
}

impl<K: Ord + Clone> Histogram<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, label: Option<K>) {
        match label {
            Some(k) => *self.counts.entry(k).or_insert(0) += 1,
            None => self.other += 1,
        }
        self.total += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.other += other.other;
        self.total += other.total;
        self
    }

    pub fn count(&self, k: &K) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<K, u64> {
        &self.counts
    }

    pub fn other(&self) -> u64 {
        self.other
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequency(&self, k: &K) -> BigRational {
        BigRational::new(BigInt::from(self.count(k)), BigInt::from(self.total.max(1)))
    }
}

/// Total variation between a histogram and a truncated law, coarsened to
/// the law's support atoms plus one bucket for everything else. Labels
/// outside the support are scored against the law's rest mass.
pub fn tv_distance<K: Ord + Clone>(h: &Histogram<K>, law: &BracketLaw<K>) -> Result<CertifiedValue> {
    if h.total() == 0 {
        return Err(Error::InvalidDomain("empty histogram".into()));
    }
    let n = BigRational::from_integer(BigInt::from(h.total()));
    let mut lo = BigRational::zero();
    let mut hi = BigRational::zero();
    let mut inside = 0u64;
    for (k, mass) in law.masses() {
        let c = h.count(k);
        inside += c;
        let e = CertifiedValue::exact(BigRational::from_integer(BigInt::from(c)) / &n);
        let d = e.sub(mass).abs();
        lo += d.lower();
        hi += d.upper();
    }
    let rest_emp = CertifiedValue::exact(BigRational::from_integer(BigInt::from(h.total() - inside)) / &n);
    let d = rest_emp.sub(&law.rest()).abs();
    lo += d.lower();
    hi += d.upper();
    let half = ratio(1, 2);
    Ok(CertifiedValue::new(lo * &half, hi * half))
}

/// Result of a parallel Monte Carlo run.
#[derive(Clone, Debug)]
pub struct McOutcome<K: Ord> {
    pub hist: Histogram<K>,
    pub errors: u64,
    pub first_error: Option<String>,
}

impl<K: Ord + Clone> McOutcome<K> {
    fn empty() -> Self {
        Self { hist: Histogram::new(), errors: 0, first_error: None }
    }

    fn merge(self, other: Self) -> Self {
        Self {
            hist: self.hist.merge(other.hist),
            errors: self.errors + other.errors,
            first_error: self.first_error.or(other.first_error),
        }
    }
}

/// Runs `draws` independent draws, draw `i` on stream `i` of the seed
/// derived from `(seed, label)`.
pub fn monte_carlo<K, F>(draws: u64, seed: u64, label: &str, f: F) -> McOutcome<K>
where
    K: Ord + Clone + Send,
    F: Fn(&mut RngStream) -> Result<Option<K>> + Sync,
{
    let root = split(seed, label);
    (0..draws)
        .into_par_iter()
        .fold(McOutcome::empty, |mut acc, i| {
            let mut rng = RngStream::new(root, i);
            match f(&mut rng) {
                Ok(k) => acc.hist.record(k),
                Err(e) => {
                    acc.errors += 1;
                    if acc.first_error.is_none() {
                        acc.first_error = Some(format!("draw {i}: {e}"));
                    }
                }
            }
            acc
        })
        .reduce(McOutcome::empty, McOutcome::merge)
}

/// Statistical gate at `draws`, given the acceptance threshold `base` at
/// `reference` draws; fewer draws widen it by `sqrt(reference / draws)`.
pub fn gate_threshold(base: f64, reference: u64, draws: u64) -> f64 {
    base * (reference as f64 / draws.max(1) as f64).max(1.0).sqrt()
}

fn rational_of(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite threshold")
}

#[derive(Clone, Debug, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: Value,
    pub threshold: Value,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub label: String,
    pub exact: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_decimal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

impl Row {
    fn exact(label: impl Display, v: &BigRational) -> Self {
        Self { label: label.to_string(), exact: format_exact(v), exact_decimal: Some(to_f64(v)), empirical: None, count: None }
    }

    fn bracket(label: impl Display, v: &CertifiedValue) -> Self {
        let o = v.outward(96);
        Self {
            label: label.to_string(),
            exact: format!("[{}, {}]", format_exact(o.lower()), format_exact(o.upper())),
            exact_decimal: Some(v.midpoint_f64()),
            empirical: None,
            count: None,
        }
    }

    fn with_count(mut self, count: u64, total: u64) -> Self {
        self.count = Some(count);
        self.empirical = Some(count as f64 / total.max(1) as f64);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub schema: &'static str,
    pub name: String,
    pub params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<u64>,
    pub pass: bool,
    pub gates: Vec<Gate>,
    pub precision_errors: u64,
    pub notes: Vec<String>,
    pub rows: Vec<Row>,
    /// Wall time; kept out of the JSON so reports are reproducible bytes.
    #[serde(skip)]
    pub runtime: Duration,
}

impl ExperimentReport {
    fn new(name: impl Into<String>, params: Value, seed: Option<u64>, draws: Option<u64>) -> Self {
        Self {
            schema: SCHEMA,
            name: name.into(),
            params,
            seed,
            draws,
            pass: false,
            gates: Vec::new(),
            precision_errors: 0,
            notes: Vec::new(),
            rows: Vec::new(),
            runtime: Duration::ZERO,
        }
    }

    fn gate(&mut self, name: impl Into<String>, value: impl Serialize, threshold: impl Serialize, pass: bool) {
        self.gates.push(Gate {
            name: name.into(),
            value: serde_json::to_value(value).expect("serializable"),
            threshold: serde_json::to_value(threshold).expect("serializable"),
            pass,
        });
    }

    fn errors<K: Ord>(&mut self, mc: &McOutcome<K>) {
        self.precision_errors += mc.errors;
        if let Some(e) = &mc.first_error {
            self.notes.push(format!("first precision error: {e}"));
        }
    }

    fn finish(mut self, start: Instant) -> Self {
        self.pass = !self.gates.is_empty() && self.gates.iter().all(|g| g.pass) && self.precision_errors == 0;
        self.runtime = start.elapsed();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report")
    }

    /// Exact-versus-empirical table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,exact,exact_decimal,empirical,count\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(&r.label),
                csv_field(&r.exact),
                r.exact_decimal.map(|e| e.to_string()).unwrap_or_default(),
                r.empirical.map(|e| e.to_string()).unwrap_or_default(),
                r.count.map(|c| c.to_string()).unwrap_or_default(),
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn tv_gate<K: Ord + Clone>(
    report: &mut ExperimentReport,
    name: &str,
    hist: &Histogram<K>,
    law: &BracketLaw<K>,
    threshold: f64,
) -> Result<CertifiedValue> {
    let tv = tv_distance(hist, law)?;
    let pass = *tv.upper() < rational_of(threshold);
    report.gate(name, to_f64(tv.upper()), threshold, pass);
    Ok(tv)
}

fn three_sigma_gate(report: &mut ExperimentReport, name: &str, count: u64, total: u64, law: &CertifiedValue) {
    let f = count as f64 / total.max(1) as f64;
    let mid = law.midpoint_f64();
    let sd = (mid * (1.0 - mid) / total.max(1) as f64).sqrt();
    let lo = to_f64(law.lower()) - 3.0 * sd;
    let hi = to_f64(law.upper()) + 3.0 * sd;
    report.gate(name, f, json!([lo, hi]), lo <= f && f <= hi);
}

/// Every `n x n` matrix over `Z / p^E`, binned by singular numbers; values
/// at the floor are marked `<= -E`.
pub fn enumerate_oracle(p: u64, n: usize, e: u32) -> Result<Histogram<SingularTuple>> {
    check_prime(p)?;
    let cells = (e as u64) * (n * n) as u64;
    let total = (p as u128).checked_pow(cells as u32).filter(|&t| t <= ORACLE_LIMIT as u128).ok_or_else(|| {
        Error::SizeGuard(format!("p^(E N^2) = {p}^{cells} exceeds 2^24"))
    })? as u64;
    let m = p.pow(e);
    let hist = (0..total)
        .into_par_iter()
        .fold(
            || (Histogram::new(), vec![0u64; n * n]),
            |(mut h, mut buf), idx| {
                let mut rest = idx;
                for slot in buf.iter_mut() {
                    *slot = rest % m;
                    rest /= m;
                }
                let vals = smith_valuations_u64(p, n, e, m, buf.clone());
                let values = vals
                    .into_iter()
                    .map(|v| if v < e { SingularValue::Exact(-(v as i64)) } else { SingularValue::AtMost(-(e as i64)) })
                    .collect();
                h.record(Some(SingularTuple::new(p, values).expect("smith output is ordered")));
                (h, buf)
            },
        )
        .map(|(h, _)| h)
        .reduce(Histogram::new, Histogram::merge);
    Ok(hist)
}

/// Exact equality between oracle frequencies and the volume law on every
/// class with all `k_i > -E`.
pub fn run_oracle_equality(p: u64, n: usize, e: u32) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport::new(
        format!("oracle_p{p}_n{n}_e{e}"),
        json!({"p": p, "N": n, "E": e}),
        None,
        None,
    );
    let hist = enumerate_oracle(p, n, e)?;
    let total = BigRational::from_integer(BigInt::from(hist.total()));
    let mut mismatches = 0u64;
    let mut compared = 0u64;
    for k in tuples_bounded(n, -(e as i64) + 1, 0) {
        let label = SingularTuple::from_exact(p, &k)?;
        let count = hist.count(&label);
        let freq = BigRational::from_integer(BigInt::from(count)) / &total;
        let law = vol_singular_law(p, &k)?;
        compared += 1;
        if freq != law {
            mismatches += 1;
        }
        report.rows.push(Row::exact(&label, &law).with_count(count, hist.total()));
    }
    let marked: u64 = hist.counts().iter().filter(|(k, _)| !k.is_certified()).map(|(_, c)| c).sum();
    let certified = hist.counts().keys().filter(|k| k.is_certified()).count() as u64;
    let stray = certified.saturating_sub(compared);
    report.gate("exact_mismatches", mismatches, 0, mismatches == 0);
    report.gate("unexpected_certified_classes", stray, 0, stray == 0);
    report.notes.push(format!("{} matrices enumerated; {marked} touch the precision floor", hist.total()));
    Ok(report.finish(start))
}

/// Parameter grid for the exact identities.
pub fn identity_grid() -> Vec<HuaParams> {
    let mut out = Vec::new();
    for p in [2u64, 3, 5] {
        for t in [ratio(1, p as i64), int(1), ratio(p as i64 + 1, 2)] {
            out.push(HuaParams::new(p, t).expect("grid parameters are valid"));
        }
    }
    out
}

fn grid_json(grid: &[HuaParams]) -> Value {
    serde_json::to_value(grid).expect("serializable")
}

pub fn run_kernel_row_sums(max_x1: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = identity_grid();
    let mut report = ExperimentReport::new("identities_kernel_rows", json!({"grid": grid_json(&grid), "max_x1": max_x1}), None, None);
    let failures: u64 = grid
        .par_iter()
        .map(|hp| (0..=max_x1).filter(|&x| kernel_row(hp, x).iter().sum::<BigRational>() != BigRational::one()).count() as u64)
        .sum();
    report.gate("rows_not_summing_to_one", failures, 0, failures == 0);
    report.notes.push(format!("{} rows checked", grid.len() as u64 * (max_x1 + 1)));
    Ok(report.finish(start))
}

pub fn run_boundary_sums(max_n: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = identity_grid();
    let mut report = ExperimentReport::new("identities_boundary_sums", json!({"grid": grid_json(&grid), "max_N": max_n}), None, None);
    let (bad_pi, bad_tilde): (u64, u64) = grid
        .par_iter()
        .map(|hp| {
            let mut a = 0;
            let mut b = 0;
            for n in 0..=max_n {
                a += (pi_n_law(hp, n).iter().sum::<BigRational>() != BigRational::one()) as u64;
                b += (tilde_pi_n_law(hp, n).iter().sum::<BigRational>() != BigRational::one()) as u64;
            }
            (a, b)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    report.gate("pi_N_not_summing_to_one", bad_pi, 0, bad_pi == 0);
    report.gate("tilde_pi_N_not_summing_to_one", bad_tilde, 0, bad_tilde == 0);
    Ok(report.finish(start))
}

fn random_tuple(rng: &mut RngStream, max_n: usize, bound: i64) -> Vec<i64> {
    let n = rng.gen_range(1..=max_n);
    let mut k: Vec<i64> = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    k.sort_unstable_by(|a, b| b.cmp(a));
    k
}

pub fn run_rewriting(samples: u64, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport::new("identities_rewriting", json!({"max_N": 8, "part_bound": 6}), Some(seed), Some(samples));
    let mc = monte_carlo(samples, seed, "rewriting", |rng| {
        let k = random_tuple(rng, 8, 6);
        Ok(Some(rewrite_identity_check(&k)?))
    });
    report.errors(&mc);
    for (i, name) in ["item1_failures", "item2_failures", "item3_failures"].iter().enumerate() {
        let bad: u64 = mc.hist.counts().iter().filter(|(f, _)| !f[i]).map(|(_, c)| c).sum();
        report.gate(*name, bad, 0, bad == 0);
    }
    Ok(report.finish(start))
}

pub fn run_four_forms(profiles: u64, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = identity_grid();
    let mut report = ExperimentReport::new(
        "identities_four_forms",
        json!({"grid": grid_json(&grid), "max_N": 5, "part_bound": 4}),
        Some(seed),
        Some(profiles),
    );
    let root = split(seed, "four_forms");
    let results: Vec<Result<u64>> = grid
        .par_iter()
        .enumerate()
        .map(|(g, hp)| {
            let mut rng = RngStream::new(root, g as u64);
            let mut bad = 0;
            for _ in 0..profiles {
                let k = random_tuple(&mut rng, 5, 4);
                let prof = LProfile::from_tuple(&k)?;
                let d = m_n_direct(hp, &k)?;
                let ok = m_n_profile(hp, &prof) == d
                    && chain_product_rep1(hp, &prof) == d
                    && chain_product_rep2(hp, &prof) == d;
                bad += !ok as u64;
            }
            Ok(bad)
        })
        .collect();
    let mut bad = 0;
    for r in results {
        bad += r?;
    }
    report.gate("profiles_with_disagreement", bad, 0, bad == 0);
    report.notes.push(format!("{} profiles per parameter pair", profiles));
    Ok(report.finish(start))
}

/// `nu^(s)` against its chain factorization on every partition with at
/// most `max_len` parts, each at most `max_part`.
pub fn run_nu_factorization(params: &[HuaParams], max_len: u64, max_part: u64, eps: &BigRational) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport::new(
        "nu_factorization",
        json!({"params": grid_json(params), "max_X1": max_len, "max_part": max_part, "eps": format_exact(eps)}),
        None,
        None,
    );
    let parts = partitions_bounded(max_len, max_part);
    let results: Vec<Result<(u64, Vec<Row>)>> = params
        .par_iter()
        .map(|hp| {
            let inf = hua_infinite(hp, &(eps / int(4)))?;
            let mut bad = 0;
            let mut rows = Vec::new();
            for lam in &parts {
                let direct = inf.scale(&nu_weight(hp, lam));
                let chain = nu_chain_product(hp, lam, eps)?;
                bad += !direct.overlaps(&chain) as u64;
                if lam.weight() <= 2 {
                    rows.push(Row::bracket(format!("{hp}: {lam}"), &direct));
                }
            }
            Ok((bad, rows))
        })
        .collect();
    let mut bad = 0;
    for r in results {
        let (b, rows) = r?;
        bad += b;
        report.rows.extend(rows);
    }
    report.gate("non_overlapping_brackets", bad, 0, bad == 0);
    report.notes.push(format!("{} partitions per parameter pair", parts.len()));
    Ok(report.finish(start))
}

/// Product formula for the law of `k_1` against direct summation.
pub fn run_rogers_ramanujan(primes: &[u64], xs: &[u64], eps: &BigRational) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport::new(
        "rogers_ramanujan",
        json!({"primes": primes, "x": xs, "s": [0, 1], "eps": format_exact(eps)}),
        None,
        None,
    );
    let mut bad = 0u64;
    let mut non_monotone = 0u64;
    for &p in primes {
        for s in [0u8, 1] {
            let hp = HuaParams::new(p, if s == 0 { int(1) } else { p_pow(p, -1) })?;
            let mut prev: Option<CertifiedValue> = None;
            for &x in xs {
                let prod = rr_cdf(p, s, x, eps)?;
                let direct = nu_first_part_below(&hp, x, eps)?;
                bad += !prod.overlaps(&direct) as u64;
                if let Some(pv) = &prev {
                    non_monotone += (prod.lower() <= pv.upper()) as u64;
                }
                report.rows.push(Row::bracket(format!("p={p} s={s} x={x} product"), &prod));
                report.rows.push(Row::bracket(format!("p={p} s={s} x={x} direct"), &direct));
                prev = Some(prod);
            }
        }
    }
    report.gate("non_overlapping_pairs", bad, 0, bad == 0);
    report.gate("non_increasing_steps", non_monotone, 0, non_monotone == 0);
    Ok(report.finish(start))
}

/// Draws from a kernel row against the exact row.
pub fn run_kernel_sampler(hp: &HuaParams, x: u64, draws: u64, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport::new("kernel_sampler", json!({"params": hp, "x": x}), Some(seed), Some(draws));
    let row = kernel_row(hp, x);
    let law = DiscreteLaw::new(&row)?;
    let mc = monte_carlo(draws, seed, &format!("kernel/{hp}/{x}"), |rng| Ok(Some(law.sample(rng) as u64)));
    report.errors(&mc);
    let exact: BTreeMap<u64, BigRational> = row.iter().enumerate().map(|(i, v)| (i as u64, v.clone())).collect();
    for (k, v) in &exact {
        report.rows.push(Row::exact(k, v).with_count(mc.hist.count(k), draws));
    }
    let bl = ExactLaw::new(exact).to_brackets();
    tv_gate(&mut report, "tv", &mc.hist, &bl, gate_threshold(0.01, 100_000, draws))?;
    let above = mc.hist.counts().keys().filter(|&&y| y > x).count() as u64;
    report.gate("draws_above_start", above, 0, above == 0);
    Ok(report.finish(start))
}

/// Classification of one matrix draw against a truncated support
/// `|k_i| <= bound`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Tuple(Vec<i64>),
    /// Certainly outside the support, though not every value is certified.
    Outside,
    /// A precision marker whose range straddles the support edge.
    Ambiguous,
    /// The sampler refused to build the matrix because `k_1 > E/2`.
    BeyondWindow,
}

pub fn classify(k: &SingularTuple, bound: i64) -> Outcome {
    if let Ok(v) = k.finite() {
        return Outcome::Tuple(v);
    }
    let mut outside = false;
    for v in k.values() {
        match *v {
            SingularValue::Exact(x) => outside |= x.abs() > bound,
            SingularValue::AtMost(f) => outside |= f < -bound,
        }
    }
    if outside {
        Outcome::Outside
    } else {
        Outcome::Ambiguous
    }
}

fn outcome_law(law: &ExactLaw<Vec<i64>>) -> BracketLaw<Outcome> {
    BracketLaw::new(
        law.masses().iter().map(|(k, v)| (Outcome::Tuple(k.clone()), CertifiedValue::exact(v.clone()))).collect(),
    )
}

/// Runs matrix draws labelled by [`classify`]. Draws refused for `k_1 > E/2`
/// lie outside the support when `E/2 >= bound` and are ambiguous otherwise.
#[allow(clippy::too_many_arguments)]
fn matrix_round_trip<F>(
    report: &mut ExperimentReport,
    law: &ExactLaw<Vec<i64>>,
    bound: i64,
    budget: PrecisionBudget,
    draws: u64,
    seed: u64,
    label: &str,
    draw: F,
) -> Result<()>
where
    F: Fn(&mut RngStream) -> Result<SingularTuple> + Sync,
{
    let beyond = if (budget.digits() / 2) as i64 >= bound { Outcome::BeyondWindow } else { Outcome::Ambiguous };
    let mc = monte_carlo(draws, seed, label, |rng| match draw(rng) {
        Ok(k) => Ok(Some(classify(&k, bound))),
        Err(Error::PrecisionExhausted(_)) => Ok(Some(beyond.clone())),
        Err(e) => Err(e),
    });
    report.errors(&mc);
    let hist = &mc.hist;
    for (k, v) in law.masses() {
        let key = Outcome::Tuple(k.clone());
        if to_f64(v) >= 1e-4 || hist.count(&key) > 0 {
            report.rows.push(Row::exact(format!("{k:?}"), v).with_count(hist.count(&key), hist.total()));
        }
    }
    for (o, name) in [
        (Outcome::Outside, "outside the support with uncertified values"),
        (Outcome::BeyondWindow, "k_1 > E/2, matrix not built"),
        (Outcome::Ambiguous, "precision marker straddles the support edge"),
    ] {
        report.notes.push(format!("{} draws: {name}", hist.count(&o)));
    }
    // Relabelling one draw moves the distance by at most 1/draws.
    let amb = BigRational::new(BigInt::from(hist.count(&Outcome::Ambiguous)), BigInt::from(hist.total().max(1)));
    let tv = tv_distance(hist, &outcome_law(law))?;
    let upper = tv.upper() + amb;
    let threshold = gate_threshold(0.01, 100_000, draws);
    report.gate("tv", to_f64(&upper), threshold, upper < rational_of(threshold));
    Ok(())
}

/// Singular numbers of sampled Hua matrices against `m_N^(s)`.
pub fn run_hua_roundtrip(hp: &HuaParams, n: u64, draws: u64, seed: u64, budget: PrecisionBudget) -> Result<ExperimentReport> {
    let start = Instant::now();
    let bound = 8;
    let mut report = ExperimentReport::new(
        format!("hua_roundtrip_n{n}"),
        json!({"params": hp, "N": n, "E": budget.digits(), "guard": budget.guard(), "support": format!("|k_i| <= {bound}")}),
        Some(seed),
        Some(draws),
    );
    let sampler = HuaSampler::new(hp, n)?;
    let law = m_n_law(hp, n as usize, bound)?;
    matrix_round_trip(&mut report, &law, bound, budget, draws, seed, &format!("roundtrip/{hp}/{n}"), |rng| {
        sample_hua_matrix(&sampler, budget, rng)?.singular_numbers()
    })?;
    Ok(report.finish(start))
}

/// The `(N-1)`-corner of Hua matrices of size `N` against `m_{N-1}^(s)`.
pub fn run_corners_consistency(hp: &HuaParams, n: u64, draws: u64, seed: u64, budget: PrecisionBudget) -> Result<ExperimentReport> {
    if n < 2 {
        return Err(Error::Dimension("corners consistency needs N >= 2".into()));
    }
    let start = Instant::now();
    let bound = 8;
    let mut report = ExperimentReport::new(
        format!("corners_consistency_n{n}_t{}", format_exact(hp.t()).replace('/', "_")),
        json!({"params": hp, "N": n, "E": budget.digits(), "guard": budget.guard(), "support": format!("|k_i| <= {bound}")}),
        Some(seed),
        Some(draws),
    );
    let sampler = HuaSampler::new(hp, n)?;
    let law = m_n_law(hp, n as usize - 1, bound)?;
    matrix_round_trip(&mut report, &law, bound, budget, draws, seed, &format!("corners/{hp}/{n}"), |rng| {
        let k = sample_hua_matrix(&sampler, budget, rng)?.corner(n as usize - 1)?.singular_numbers()?;
        if k.len() as u64 != n - 1 {
            return Err(Error::LabelMismatch(format!("corner tuple {k} has the wrong length")));
        }
        Ok(k)
    })?;
    Ok(report.finish(start))
}

/// Whether the singular numbers of a corner of `A_k` show `k`: its positive
/// parts equal those of `k`, followed by `w` zeros (as far as `N` allows).
pub fn matches_ergodic_parameter(out: &SingularTuple, k: &Partition, w: usize) -> bool {
    let parts = k.parts();
    let vals = out.values();
    if vals.len() < parts.len() {
        return false;
    }
    let head = parts.iter().zip(vals).all(|(&a, v)| *v == SingularValue::Exact(a as i64));
    let zeros = vals[parts.len()..].iter().take(w).all(|v| *v == SingularValue::Exact(0));
    head && zeros
}

/// Frequency `f_N` with which the `N`-corner of `A_k` recovers `k`.
pub fn run_ergodic_convergence(
    p: u64,
    k: &Partition,
    n_list: &[usize],
    draws: u64,
    budget: PrecisionBudget,
    seed: u64,
) -> Result<ExperimentReport> {
    const W: usize = 2;
    const FLOOR: f64 = 0.95;
    let start = Instant::now();
    let mut report = ExperimentReport::new(
        format!("ergodic_convergence_{}", k.parts().iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_")),
        json!({"p": p, "k": k, "N": n_list, "E": budget.digits(), "guard": budget.guard(), "zeros_checked": W}),
        Some(seed),
        Some(draws),
    );
    let mut freqs = Vec::new();
    for &n in n_list {
        let mc = monte_carlo(draws, seed, &format!("ergodic/{p}/{k}/{n}"), |rng| {
            let m = sample_ergodic_matrix(p, k, n, budget, rng)?;
            Ok(Some(matches_ergodic_parameter(&m.singular_numbers()?, k, W)))
        });
        report.errors(&mc);
        let hits = mc.hist.count(&true);
        let f = hits as f64 / draws.max(1) as f64;
        report.rows.push(Row {
            label: format!("f_{n}"),
            exact: String::new(),
            exact_decimal: None,
            empirical: Some(f),
            count: Some(hits),
        });
        freqs.push(f);
    }
    let mut drops = 0;
    for w in freqs.windows(2) {
        let sd = ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / draws.max(1) as f64).sqrt();
        drops += (w[1] < w[0] - 2.0 * sd) as u64;
    }
    report.gate("monotone_within_2_sigma", drops, 0, drops == 0);
    let last = freqs.last().copied().unwrap_or(0.0);
    report.gate("f_last", last, FLOOR, last >= FLOOR);
    report.notes.push(
        "thresholds are empirical calibrations: only the almost-sure limit is known, not a finite-N rate".into(),
    );
    Ok(report.finish(start))
}

/// End to end: `k ~ nu^(s)`, the `N`-corner of `A_k`, its positive
/// singular numbers against `nu^(s)`.
pub fn run_ergodic_decomposition(
    hp: &HuaParams,
    n_list: &[usize],
    draws: u64,
    budget: PrecisionBudget,
    seed: u64,
) -> Result<ExperimentReport> {
    let (max_len, max_part) = (3, 12);
    let start = Instant::now();
    let mut report = ExperimentReport::new(
        "ergodic_decomposition",
        json!({"params": hp, "N": n_list, "E": budget.digits(), "guard": budget.guard(),
               "support": format!("X_1 <= {max_len}, k_1 <= {max_part}")}),
        Some(seed),
        Some(draws),
    );
    let nu = NuSampler::new(hp)?;
    let law = nu_law(hp, max_len, max_part, &parse_decimal("1e-15")?)?;
    let threshold = gate_threshold(0.03, 10_000, draws);
    for (i, &n) in n_list.iter().enumerate() {
        let mc = monte_carlo(draws, seed, &format!("decomposition/{hp}/{n}"), |rng| {
            let k = nu.sample(rng);
            let m = sample_ergodic_matrix(hp.p(), &k, n, budget, rng)?;
            let parts = m.singular_numbers()?.positive_parts()?;
            Ok(Some(Partition::from_parts(&parts)))
        });
        report.errors(&mc);
        let tv = tv_distance(&mc.hist, &law)?;
        if i + 1 == n_list.len() {
            let pass = *tv.upper() < rational_of(threshold);
            report.gate(format!("tv_n{n}"), to_f64(tv.upper()), threshold, pass);
            for (lam, v) in law.masses() {
                if v.midpoint_f64() >= 1e-3 {
                    report.rows.push(Row::bracket(lam, v).with_count(mc.hist.count(lam), draws));
                }
            }
        } else {
            report.notes.push(format!("trend: tv at N = {n} is {:.6}", to_f64(tv.upper())));
        }
    }
    Ok(report.finish(start))
}

/// Exact distance between `pi_N^(s)(N - .)` and `pi^(s)` along `n_list`.
pub fn run_boundary_limit(hp: &HuaParams, n_list: &[u64], eps: &BigRational) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport::new(
        format!("boundary_limit_t{}", format_exact(hp.t()).replace('/', "_")),
        json!({"params": hp, "N": n_list, "eps": format_exact(eps)}),
        None,
        None,
    );
    let mut tvs = Vec::new();
    for &n in n_list {
        let tv = boundary_tv(hp, n, eps)?;
        report.rows.push(Row::bracket(format!("tv_N{n}"), &tv));
        tvs.push(tv);
    }
    let increases = tvs.windows(2).filter(|w| w[1].upper() >= w[0].lower()).count() as u64;
    report.gate("non_decreasing_steps", increases, 0, increases == 0);
    if let (Some(&n), Some(tv)) = (n_list.last(), tvs.last()) {
        let limit = parse_decimal("1e-6")?;
        report.gate(format!("tv_at_N{n}"), to_f64(tv.upper()), 1e-6, *tv.upper() < limit);
    }
    Ok(report.finish(start))
}

/// Positive parts of `m_N^(s)` samples at large `N` against `nu^(s)`.
pub fn run_nu_limit(hp: &HuaParams, n: u64, draws: u64, seed: u64) -> Result<ExperimentReport> {
    let (max_len, max_part) = (3, 12);
    let start = Instant::now();
    let mut report = ExperimentReport::new(
        format!("nu_limit_t{}", format_exact(hp.t()).replace('/', "_")),
        json!({"params": hp, "N": n, "support": format!("X_1 <= {max_len}, k_1 <= {max_part}")}),
        Some(seed),
        Some(draws),
    );
    let sampler = HuaSampler::new(hp, n)?;
    let mc = monte_carlo(draws, seed, &format!("nulimit/{hp}/{n}"), |rng| {
        let parts = sampler.sample(rng).positive_parts()?;
        Ok(Some(Partition::from_parts(&parts)))
    });
    report.errors(&mc);
    let eps = parse_decimal("1e-15")?;
    let law = nu_law(hp, max_len, max_part, &eps)?;
    tv_gate(&mut report, "tv", &mc.hist, &law, gate_threshold(0.02, 100_000, draws))?;
    for lam in [Partition::empty(), Partition::from_parts(&[1])] {
        let v = &law.masses()[&lam];
        three_sigma_gate(&mut report, &format!("mass_{lam}"), mc.hist.count(&lam), draws, v);
    }
    let s = if *hp.t() == int(1) {
        Some(0)
    } else if *hp.t() == p_pow(hp.p(), -1) {
        Some(1)
    } else {
        None
    };
    if let Some(s) = s {
        let below: u64 = mc.hist.counts().iter().filter(|(l, _)| l.largest_part() < 2).map(|(_, c)| c).sum();
        let rr = rr_cdf(hp.p(), s, 2, &eps)?;
        three_sigma_gate(&mut report, "rogers_ramanujan_k1_below_2", below, draws, &rr);
    }
    for (lam, v) in law.masses() {
        if v.midpoint_f64() >= 1e-3 {
            report.rows.push(Row::bracket(lam, v).with_count(mc.hist.count(lam), draws));
        }
    }
    Ok(report.finish(start))
}

/// Suite options; `draws` overrides every Monte Carlo sample size.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    pub draws: Option<u64>,
    pub budget: PrecisionBudget,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 42, draws: None, budget: PrecisionBudget::DEFAULT }
    }
}

impl SuiteConfig {
    fn draws(&self, default: u64) -> u64 {
        self.draws.unwrap_or(default)
    }
}

fn hp(p: u64, t: BigRational) -> HuaParams {
    HuaParams::new(p, t).expect("suite parameters are valid")
}

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Vec<ExperimentReport>> {
    let seed = cfg.seed;
    let budget = cfg.budget;
    Ok(match name {
        "oracle" => vec![
            run_oracle_equality(2, 1, 3)?,
            run_oracle_equality(2, 2, 3)?,
            run_oracle_equality(3, 1, 2)?,
            run_oracle_equality(3, 2, 2)?,
        ],
        "identities" => vec![
            run_kernel_row_sums(50)?,
            run_boundary_sums(30)?,
            run_rewriting(10_000, seed)?,
            run_four_forms(200, seed)?,
        ],
        "chains" => {
            let params = [hp(2, int(1)), hp(2, ratio(1, 2)), hp(3, int(1)), hp(3, ratio(1, 3))];
            vec![
                run_nu_factorization(&params, 4, 10, &parse_decimal("1e-9")?)?,
                run_rogers_ramanujan(&[2, 3], &[2, 3, 4], &parse_decimal("1e-10")?)?,
                run_kernel_sampler(&hp(2, int(1)), 1, cfg.draws(100_000), seed)?,
            ]
        }
        "corners" => vec![
            run_hua_roundtrip(&hp(2, int(1)), 2, cfg.draws(100_000), seed, budget)?,
            run_corners_consistency(&hp(2, int(1)), 3, cfg.draws(100_000), seed, budget)?,
            run_corners_consistency(&hp(2, ratio(1, 2)), 2, cfg.draws(100_000), seed, budget)?,
        ],
        "ergodic" => vec![
            run_ergodic_convergence(2, &Partition::empty(), &[4, 8, 16], cfg.draws(1_000), budget, seed)?,
            run_ergodic_convergence(2, &Partition::from_parts(&[2, 1]), &[4, 8, 16], cfg.draws(1_000), budget, seed)?,
            run_ergodic_decomposition(&hp(2, int(1)), &[8, 16], cfg.draws(10_000), budget, seed)?,
        ],
        "nulimit" => {
            let eps = parse_decimal("1e-30")?;
            vec![
                run_boundary_limit(&hp(2, int(1)), &[5, 10, 20, 40], &eps)?,
                run_boundary_limit(&hp(2, ratio(1, 2)), &[5, 10, 20, 40], &eps)?,
                run_nu_limit(&hp(2, int(1)), 40, cfg.draws(100_000), seed)?,
                run_nu_limit(&hp(2, ratio(1, 2)), 40, cfg.draws(100_000), seed)?,
            ]
        }
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, cfg)?);
            }
            out
        }
        other => {
            return Err(Error::InvalidDomain(format!(
                "unknown suite '{other}'; expected one of {}, all",
                SUITES.join(", ")
            )))
        }
    })
}

/// All reports of a run as one JSON document.
pub fn bundle_json(suite: &str, cfg: &SuiteConfig, reports: &[ExperimentReport]) -> String {
    let doc = json!({
        "schema": SCHEMA,
        "suite": suite,
        "seed": cfg.seed,
        "draws_override": cfg.draws,
        "E": cfg.budget.digits(),
        "guard": cfg.budget.guard(),
        "pass": reports.iter().all(|r| r.pass),
        "reports": reports,
    });
    serde_json::to_string_pretty(&doc).expect("serializable bundle")
}
