//! Exact samplers for the kernel chains, `nu^(s)`, the Hua singular law and
//! matrices, and the ergodic matrices `A_k`.
//!
//! Discrete draws compare a uniform binary expansion against exact (or
//! certified) cumulative sums, reading more bits only when the first 64 do
//! not decide the atom. No draw is ever misclassified.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::laws::{
    hua_infinite, kernel_row, pi_n_law, pi_s_tail_bound, pi_s_weight, HuaParams, Partition,
};
use crate::linalg::{assemble_orbit, sample_haar_gl, PadicMatrix, SingularTuple};
use crate::padic::{p_power, sample_residue, PrecisionBudget};
use crate::rational::{ceil_scaled, floor_scaled, p_pow};

/// Chains absorb at 0 almost surely and fast; a longer path is a bug.
pub const STEP_CAP: usize = 10_000;

/// A ChaCha20 stream identified by `(seed, stream)`.
///
/// Parallel work derives one stream per draw: draw `i` of an experiment
/// labelled `L` under root seed `s` uses `RngStream::new(split(s, L), i)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Words consumed so far (32-bit units).
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }
}

/// Derives an independent root seed for a labelled sub-experiment
/// (FNV-1a over the label, mixed with the seed by splitmix64).
pub fn split(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), RandError> {
        self.rng.try_fill_bytes(dest)
    }
}

/// A uniform draw from `[0, 1)` revealed 64 bits at a time: it currently
/// lies in `[num, num + 1) / 2^bits`.
struct Uniform {
    num: BigUint,
    bits: u32,
}

impl Uniform {
    fn first<R: RngCore + ?Sized>(rng: &mut R) -> (u64, Self) {
        let w = rng.next_u64();
        (w, Self { num: BigUint::from(w), bits: 64 })
    }

    fn refine<R: RngCore + ?Sized>(&mut self, rng: &mut R) {
        self.num = (&self.num << 64u32) + BigUint::from(rng.next_u64());
        self.bits += 64;
    }

    fn lo(&self) -> BigRational {
        BigRational::new(self.num.clone().into(), (BigUint::one() << self.bits).into())
    }

    fn hi(&self) -> BigRational {
        BigRational::new((&self.num + 1u32).into(), (BigUint::one() << self.bits).into())
    }
}

fn scaled_floor(r: &BigRational) -> u128 {
    floor_scaled(r, 64).to_u128().expect("cdf at most 1")
}

fn scaled_ceil(r: &BigRational) -> u128 {
    ceil_scaled(r, 64).to_u128().expect("cdf at most 1")
}

/// A law on `0..n` with exact rational weights, sampled by inverse CDF.
#[derive(Clone, Debug)]
pub struct DiscreteLaw {
    cdf: Vec<BigRational>,
    fast_lo: Vec<u128>,
    fast_hi: Vec<u128>,
}

impl DiscreteLaw {
    /// Weights need not be normalized; they must be non-negative with a
    /// positive total.
    pub fn new(weights: &[BigRational]) -> Result<Self> {
        let total: BigRational = weights.iter().sum();
        if weights.is_empty() || total <= BigRational::zero() || weights.iter().any(|w| *w < BigRational::zero()) {
            return Err(Error::InvalidDomain("weights must be non-negative with positive total".into()));
        }
        let mut acc = BigRational::zero();
        let cdf: Vec<BigRational> = weights
            .iter()
            .map(|w| {
                acc += w;
                &acc / &total
            })
            .collect();
        let fast_lo = cdf.iter().map(scaled_floor).collect();
        let fast_hi = cdf.iter().map(scaled_ceil).collect();
        Ok(Self { cdf, fast_lo, fast_hi })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let (w, mut u) = Uniform::first(rng);
        let w = w as u128;
        let i = self.fast_lo.partition_point(|&lo| lo < w + 1);
        if i < self.len() && (i == 0 || w >= self.fast_hi[i - 1]) {
            return i;
        }
        loop {
            u.refine(rng);
            let (lo, hi) = (u.lo(), u.hi());
            let i = self.cdf.partition_point(|c| *c < hi);
            if i < self.len() && (i == 0 || lo >= self.cdf[i - 1]) {
                return i;
            }
        }
    }
}

/// Sampler for `pi^(s)` on all of `Z_+`, exact despite the infinite
/// normalizing product.
#[derive(Clone, Debug)]
pub struct PiSampler {
    hp: HuaParams,
    fast_lo: Vec<u128>,
    fast_hi: Vec<u128>,
}

impl PiSampler {
    pub fn new(hp: &HuaParams) -> Result<Self> {
        let eps = p_pow(2, -100);
        let inf = hua_infinite(hp, &eps)?;
        let mut acc = BigRational::zero();
        let (mut fast_lo, mut fast_hi) = (Vec::new(), Vec::new());
        let mut x = 0;
        loop {
            acc += pi_s_weight(hp, x);
            fast_lo.push(scaled_floor(&(inf.lower() * &acc)));
            fast_hi.push(scaled_ceil(&(inf.upper() * &acc)));
            if pi_s_tail_bound(hp, x)? < p_pow(2, -70) {
                break;
            }
            x += 1;
        }
        Ok(Self { hp: hp.clone(), fast_lo, fast_hi })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        let (w, mut u) = Uniform::first(rng);
        let w = w as u128;
        let i = self.fast_lo.partition_point(|&lo| lo < w + 1);
        if i < self.fast_lo.len() && (i == 0 || w >= self.fast_hi[i - 1]) {
            return i as u64;
        }
        let mut eps_bits = 160i64;
        loop {
            u.refine(rng);
            if let Some(x) = self.resolve(&u, eps_bits) {
                return x;
            }
            eps_bits += 64;
        }
    }

    /// Decides the atom containing the uniform's current interval, or
    /// `None` when the bracket at this precision cannot.
    fn resolve(&self, u: &Uniform, eps_bits: i64) -> Option<u64> {
        let inf = hua_infinite(&self.hp, &p_pow(2, -eps_bits)).expect("validated parameters");
        let (lo, hi) = (u.lo(), u.hi());
        let mut acc = BigRational::zero();
        for x in 0.. {
            acc += pi_s_weight(&self.hp, x);
            if hi <= inf.lower() * &acc {
                return Some(x);
            }
            if lo < inf.upper() * &acc {
                return None;
            }
        }
        unreachable!()
    }
}

/// Cached rows of `P^(s)`.
#[derive(Clone, Debug)]
pub struct KernelRows {
    hp: HuaParams,
    rows: Vec<DiscreteLaw>,
}

impl KernelRows {
    pub fn new(hp: &HuaParams, max_state: u64) -> Self {
        let rows = (0..=max_state)
            .map(|x| DiscreteLaw::new(&kernel_row(hp, x)).expect("kernel rows are laws"))
            .collect();
        Self { hp: hp.clone(), rows }
    }

    pub fn step<R: RngCore + ?Sized>(&self, x: u64, rng: &mut R) -> u64 {
        match self.rows.get(x as usize) {
            Some(row) => row.sample(rng) as u64,
            None => sample_kernel_step(&self.hp, x, rng),
        }
    }

    /// States from `start` until absorption; the final state is 0.
    pub fn run<R: RngCore + ?Sized>(&self, start: u64, rng: &mut R) -> ChainPath {
        let mut states = vec![start];
        let mut x = start;
        while x > 0 {
            x = self.step(x, rng);
            states.push(x);
            assert!(states.len() <= STEP_CAP, "chain failed to absorb within {STEP_CAP} steps");
        }
        ChainPath { states }
    }
}

/// A weakly decreasing path of the kernel chain, ending at 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainPath {
    pub states: Vec<u64>,
}

impl ChainPath {
    /// Read as tail sums `X_1, X_2, ...`.
    pub fn to_partition(&self) -> Partition {
        Partition::from_tail_sums(&self.states).expect("kernel paths decrease")
    }
}

/// One step of `P^(s)` from `x`.
pub fn sample_kernel_step<R: RngCore + ?Sized>(hp: &HuaParams, x: u64, rng: &mut R) -> u64 {
    if x == 0 {
        return 0;
    }
    DiscreteLaw::new(&kernel_row(hp, x)).expect("kernel rows are laws").sample(rng) as u64
}

/// `X_1 ~ pi^(s)`, then the `P^(s)` chain.
#[derive(Clone, Debug)]
pub struct NuSampler {
    pi: PiSampler,
    rows: KernelRows,
}

impl NuSampler {
    pub fn new(hp: &HuaParams) -> Result<Self> {
        Ok(Self { pi: PiSampler::new(hp)?, rows: KernelRows::new(hp, 12) })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Partition {
        let x1 = self.pi.sample(rng);
        self.rows.run(x1, rng).to_partition()
    }
}

pub fn sample_nu<R: RngCore + ?Sized>(hp: &HuaParams, rng: &mut R) -> Result<Partition> {
    Ok(NuSampler::new(hp)?.sample(rng))
}

/// Singular numbers of `M_N^(s)`: the count of non-positive parts from
/// `pi_N^(s)`, the positive tail sums by `P^(s)`, the non-positive
/// cumulative sums by `P^(0)`.
#[derive(Clone, Debug)]
pub struct HuaSampler {
    hp: HuaParams,
    n: u64,
    boundary: DiscreteLaw,
    upper: KernelRows,
    lower: KernelRows,
}

impl HuaSampler {
    pub fn new(hp: &HuaParams, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("N must be at least 1".into()));
        }
        Ok(Self {
            hp: hp.clone(),
            n,
            boundary: DiscreteLaw::new(&pi_n_law(hp, n))?,
            upper: KernelRows::new(hp, n),
            lower: KernelRows::new(&hp.at_zero(), n),
        })
    }

    pub fn params(&self) -> &HuaParams {
        &self.hp
    }

    pub fn size(&self) -> u64 {
        self.n
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> SingularTuple {
        let x = self.boundary.sample(rng) as u64;
        let up = self.upper.run(self.n - x, rng);
        let down = self.lower.run(x, rng);
        let mut k: Vec<i64> = up.to_partition().parts().iter().map(|&v| v as i64).collect();
        for (i, w) in down.states.windows(2).enumerate() {
            k.extend(std::iter::repeat_n(-(i as i64), (w[0] - w[1]) as usize));
        }
        debug_assert_eq!(k.len() as u64, self.n);
        SingularTuple::from_exact(self.hp.p(), &k).expect("chain output is decreasing")
    }
}

pub fn sample_hua_singulars<R: RngCore + ?Sized>(
    hp: &HuaParams,
    n: u64,
    rng: &mut R,
) -> Result<SingularTuple> {
    Ok(HuaSampler::new(hp, n)?.sample(rng))
}

/// A draw from `M_N^(s)`: Hua singular numbers conjugated by independent
/// Haar elements of `GL(N, Z_p)`.
pub fn sample_hua_matrix<R: RngCore + ?Sized>(
    sampler: &HuaSampler,
    budget: PrecisionBudget,
    rng: &mut R,
) -> Result<PadicMatrix> {
    let k = sampler.sample(rng).finite()?;
    let top = k[0];
    if 2 * top > budget.digits() as i64 {
        return Err(Error::PrecisionExhausted(format!(
            "k_1 = {top} exceeds half of the {}-digit window",
            budget.digits()
        )));
    }
    let n = sampler.size() as usize;
    let b = sample_haar_gl(n, sampler.params().p(), budget, rng)?;
    let c = sample_haar_gl(n, sampler.params().p(), budget, rng)?;
    assemble_orbit(&k, &b, &c)
}

/// The `N x N` corner of `A_k`: `sum_M p^{-k_M} X^(M) Y^(M)^T + Z` with
/// every coordinate independent Haar on `Z_p`.
pub fn sample_ergodic_matrix<R: RngCore + ?Sized>(
    p: u64,
    k: &Partition,
    n: usize,
    budget: PrecisionBudget,
    rng: &mut R,
) -> Result<PadicMatrix> {
    let digits = budget.digits();
    let top = k.largest_part() as i64;
    if top >= digits as i64 {
        return Err(Error::PrecisionExhausted(format!(
            "k_1 = {top} leaves no digits in a {digits}-digit window"
        )));
    }
    crate::padic::check_prime(p)?;
    let modulus = p_power(p, digits);
    let mut entries = vec![BigUint::zero(); n * n];
    for part in k.parts() {
        let x: Vec<BigUint> = (0..n).map(|_| sample_residue(&modulus, rng)).collect();
        let y: Vec<BigUint> = (0..n).map(|_| sample_residue(&modulus, rng)).collect();
        let scale = p_power(p, (top - part as i64) as u32);
        for i in 0..n {
            let xi = &x[i] * &scale % &modulus;
            for j in 0..n {
                let e = &mut entries[i * n + j];
                *e = (&*e + &xi * &y[j]) % &modulus;
            }
        }
    }
    let lift = p_power(p, top as u32);
    for e in entries.iter_mut() {
        let z = sample_residue(&modulus, rng);
        *e = (&*e + z * &lift) % &modulus;
    }
    PadicMatrix::from_scaled(p, n, top, digits, budget.guard(), entries)
}
