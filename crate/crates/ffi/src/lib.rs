//! C ABI over `padic-hua`.
//!
//! Objects are opaque heap handles released by their matching `_free`
//! function. Every fallible call returns a [`PhStatus`]; on failure the
//! message is kept per thread and can be fetched with
//! [`ph_last_error_message`]. Strings handed out by the library are
//! released with [`ph_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use padic_hua::laws::{m_n_direct, nu_s, pi_s};
use padic_hua::rational::{format_exact, parse_decimal, parse_fraction};
use padic_hua::samplers::{sample_hua_matrix, HuaSampler, NuSampler};
use padic_hua::{Error, HuaParams, PadicMatrix, Partition, PrecisionBudget, RngStream, SingularValue};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    PrecisionExhausted = 3,
    BelowPrecision = 4,
    SizeGuard = 5,
    InvalidUtf8 = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PhStatus {
    match e {
        Error::PrecisionExhausted(_) => PhStatus::PrecisionExhausted,
        Error::BelowPrecision(_) => PhStatus::BelowPrecision,
        Error::SizeGuard(_) => PhStatus::SizeGuard,
        _ => PhStatus::InvalidArgument,
    }
}

struct Fail(PhStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> PhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PhStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PhStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(PhStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(PhStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let out = as_mut(out, "out")?;
    *out = CString::new(s).expect("no interior nul").into_raw();
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    let out = as_mut(out, "out")?;
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Hua parameters `(p, t)`.
pub struct PhHuaParams(HuaParams);
/// A seeded random stream.
pub struct PhRng(RngStream);
/// Sampler for singular numbers of `M_N^(s)`.
pub struct PhHuaSampler(HuaSampler);
/// Sampler for `nu^(s)`.
pub struct PhNuSampler(NuSampler);
/// A matrix over `Q_p` at finite precision.
pub struct PhMatrix(PadicMatrix);

/// The library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ph_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy of the calling thread's last error message, or null if none.
/// Release with `ph_string_free`.
#[no_mangle]
pub extern "C" fn ph_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ph_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parameters with `t` given as an exact fraction string such as `"1/2"`.
///
/// # Safety
/// `t` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ph_hua_params_new(p: u64, t: *const c_char, out: *mut *mut PhHuaParams) -> PhStatus {
    guard(|| {
        let t = parse_fraction(as_str(t, "t")?)?;
        put_handle(out, PhHuaParams(HuaParams::new(p, t)?))
    })
}

/// # Safety
/// `h` must be null or a handle from `ph_hua_params_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn ph_hua_params_free(h: *mut PhHuaParams) {
    free_handle(h)
}

/// `m_N^(s)(k)` for a non-increasing tuple of length `n`, as `"num/den"`.
///
/// # Safety
/// `k` must point to `n` integers; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ph_law_m_n(
    params: *const PhHuaParams,
    k: *const i64,
    n: usize,
    out: *mut *mut c_char,
) -> PhStatus {
    guard(|| {
        let hp = &as_ref(params, "params")?.0;
        let k = slice(k, n, "k")?;
        put_string(out, format_exact(&m_n_direct(hp, k)?))
    })
}

/// Bracket `[lower, upper]` of `pi^(s)(x)` of width at most `eps` (a
/// fraction or decimal string), endpoints as `"num/den"`.
///
/// # Safety
/// `eps` must be a nul-terminated string; `lower` and `upper` valid.
#[no_mangle]
pub unsafe extern "C" fn ph_law_pi_s(
    params: *const PhHuaParams,
    x: u64,
    eps: *const c_char,
    lower: *mut *mut c_char,
    upper: *mut *mut c_char,
) -> PhStatus {
    guard(|| {
        let hp = &as_ref(params, "params")?.0;
        let eps = parse_decimal(as_str(eps, "eps")?)?;
        let b = pi_s(hp, x, &eps)?;
        as_mut(upper, "upper")?;
        put_string(lower, format_exact(b.lower()))?;
        put_string(upper, format_exact(b.upper()))
    })
}

/// Bracket of `nu^(s)(lambda)` for `len` non-increasing positive parts.
///
/// # Safety
/// `parts` must point to `len` integers; `eps` nul-terminated; outputs valid.
#[no_mangle]
pub unsafe extern "C" fn ph_law_nu(
    params: *const PhHuaParams,
    parts: *const u64,
    len: usize,
    eps: *const c_char,
    lower: *mut *mut c_char,
    upper: *mut *mut c_char,
) -> PhStatus {
    guard(|| {
        let hp = &as_ref(params, "params")?.0;
        let parts = slice(parts, len, "parts")?;
        if parts.contains(&0) || parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Fail(PhStatus::InvalidArgument, "parts must be positive and non-increasing".into()));
        }
        let eps = parse_decimal(as_str(eps, "eps")?)?;
        let b = nu_s(hp, &Partition::from_parts(parts), &eps)?;
        as_mut(upper, "upper")?;
        put_string(lower, format_exact(b.lower()))?;
        put_string(upper, format_exact(b.upper()))
    })
}

/// Stream `stream` of the generator seeded with `seed`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ph_rng_new(seed: u64, stream: u64, out: *mut *mut PhRng) -> PhStatus {
    guard(|| put_handle(out, PhRng(RngStream::new(seed, stream))))
}

/// # Safety
/// `h` must be null or a handle from `ph_rng_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn ph_rng_free(h: *mut PhRng) {
    free_handle(h)
}

/// # Safety
/// `params` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ph_hua_sampler_new(
    params: *const PhHuaParams,
    n: u64,
    out: *mut *mut PhHuaSampler,
) -> PhStatus {
    guard(|| {
        let hp = &as_ref(params, "params")?.0;
        put_handle(out, PhHuaSampler(HuaSampler::new(hp, n)?))
    })
}

/// # Safety
/// `h` must be null or a handle from `ph_hua_sampler_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn ph_hua_sampler_free(h: *mut PhHuaSampler) {
    free_handle(h)
}

/// Writes `N` singular numbers `k_1 >= ... >= k_N` of one draw.
///
/// # Safety
/// Handles must be live; `out` must have room for `cap` integers.
#[no_mangle]
pub unsafe extern "C" fn ph_hua_sample_singulars(
    sampler: *const PhHuaSampler,
    rng: *mut PhRng,
    out: *mut i64,
    cap: usize,
) -> PhStatus {
    guard(|| {
        let s = &as_ref(sampler, "sampler")?.0;
        let rng = &mut as_mut(rng, "rng")?.0;
        let n = s.size() as usize;
        if cap < n {
            return Err(Fail(PhStatus::BufferTooSmall, format!("need room for {n} values")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let k = s.sample(rng).finite()?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&k);
        Ok(())
    })
}

/// One matrix from `M_N^(s)` at `digits` digits with `guard` guard digits.
///
/// # Safety
/// Handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ph_hua_sample_matrix(
    sampler: *const PhHuaSampler,
    rng: *mut PhRng,
    digits: u32,
    guard_digits: u32,
    out: *mut *mut PhMatrix,
) -> PhStatus {
    guard(|| {
        let s = &as_ref(sampler, "sampler")?.0;
        let rng = &mut as_mut(rng, "rng")?.0;
        as_mut(out, "out")?;
        let budget = PrecisionBudget::new(digits, guard_digits)?;
        put_handle(out, PhMatrix(sample_hua_matrix(s, budget, rng)?))
    })
}

/// # Safety
/// `params` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ph_nu_sampler_new(params: *const PhHuaParams, out: *mut *mut PhNuSampler) -> PhStatus {
    guard(|| {
        let hp = &as_ref(params, "params")?.0;
        put_handle(out, PhNuSampler(NuSampler::new(hp)?))
    })
}

/// # Safety
/// `h` must be null or a handle from `ph_nu_sampler_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn ph_nu_sampler_free(h: *mut PhNuSampler) {
    free_handle(h)
}

/// Draws a partition; its parts go to `out` and their count to `len`.
/// With too little room the status is `BufferTooSmall`, `len` holds the
/// required size and the draw is lost.
///
/// # Safety
/// Handles must be live; `out` must have room for `cap` integers.
#[no_mangle]
pub unsafe extern "C" fn ph_nu_sample(
    sampler: *const PhNuSampler,
    rng: *mut PhRng,
    out: *mut u64,
    cap: usize,
    len: *mut usize,
) -> PhStatus {
    guard(|| {
        let s = &as_ref(sampler, "sampler")?.0;
        let rng = &mut as_mut(rng, "rng")?.0;
        let len = as_mut(len, "len")?;
        let parts = s.sample(rng).parts();
        *len = parts.len();
        if parts.len() > cap {
            return Err(Fail(PhStatus::BufferTooSmall, format!("need room for {} parts", parts.len())));
        }
        if !parts.is_empty() {
            if out.is_null() {
                return Err(null("out"));
            }
            std::slice::from_raw_parts_mut(out, parts.len()).copy_from_slice(&parts);
        }
        Ok(())
    })
}

/// Parses the matrix text format (rows of `a*p^v` entries).
///
/// # Safety
/// `text` must be nul-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ph_matrix_parse(
    text: *const c_char,
    p: u64,
    digits: u32,
    guard_digits: u32,
    out: *mut *mut PhMatrix,
) -> PhStatus {
    guard(|| {
        let text = as_str(text, "text")?;
        let budget = PrecisionBudget::new(digits, guard_digits)?;
        put_handle(out, PhMatrix(PadicMatrix::parse(text, p, budget)?))
    })
}

/// # Safety
/// `h` must be null or a matrix handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ph_matrix_free(h: *mut PhMatrix) {
    free_handle(h)
}

/// Matrix size `N`, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ph_matrix_size(m: *const PhMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.size())
}

/// The matrix in the text format accepted by `ph_matrix_parse`.
///
/// # Safety
/// `m` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ph_matrix_to_string(m: *const PhMatrix, out: *mut *mut c_char) -> PhStatus {
    guard(|| {
        let m = &as_ref(m, "matrix")?.0;
        put_string(out, m.to_string())
    })
}

/// Singular numbers into `values`; `certified[i]` is 1 when `values[i]` is
/// exact and 0 when it is only an upper bound (the precision floor).
///
/// # Safety
/// `m` must be live; `values` and `certified` need room for `cap` items.
#[no_mangle]
pub unsafe extern "C" fn ph_matrix_singular_numbers(
    m: *const PhMatrix,
    values: *mut i64,
    certified: *mut u8,
    cap: usize,
) -> PhStatus {
    guard(|| {
        let m = &as_ref(m, "matrix")?.0;
        let n = m.size();
        if cap < n {
            return Err(Fail(PhStatus::BufferTooSmall, format!("need room for {n} values")));
        }
        if values.is_null() || certified.is_null() {
            return Err(null("output buffer"));
        }
        let k = m.singular_numbers()?;
        let vs = std::slice::from_raw_parts_mut(values, n);
        let cs = std::slice::from_raw_parts_mut(certified, n);
        for (i, v) in k.values().iter().enumerate() {
            (vs[i], cs[i]) = match *v {
                SingularValue::Exact(x) => (x, 1),
                SingularValue::AtMost(f) => (f, 0),
            };
        }
        Ok(())
    })
}
