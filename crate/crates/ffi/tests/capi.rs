use std::ffi::{c_char, CStr, CString};
use std::ptr;

use padic_hua_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { ph_string_free(s) };
    out
}

fn last_error() -> String {
    take(ph_last_error_message())
}

fn params(p: u64, t: &str) -> *mut PhHuaParams {
    let t = CString::new(t).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ph_hua_params_new(p, t.as_ptr(), &mut h) }, PhStatus::Ok);
    h
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(ph_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn m_n_exact_string() {
    let hp = params(2, "1/1");
    let mut out = ptr::null_mut();
    let k = [0i64];
    assert_eq!(unsafe { ph_law_m_n(hp, k.as_ptr(), 1, &mut out) }, PhStatus::Ok);
    assert_eq!(take(out), "1/3");
    let k = [-1i64];
    assert_eq!(unsafe { ph_law_m_n(hp, k.as_ptr(), 1, &mut out) }, PhStatus::Ok);
    assert_eq!(take(out), "1/6");
    let bad = [0i64, 1];
    assert_eq!(unsafe { ph_law_m_n(hp, bad.as_ptr(), 2, &mut out) }, PhStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    unsafe { ph_hua_params_free(hp) };
}

#[test]
fn parameter_errors() {
    let mut h = ptr::null_mut();
    let t = CString::new("2/1").unwrap();
    assert_eq!(unsafe { ph_hua_params_new(2, t.as_ptr(), &mut h) }, PhStatus::InvalidArgument);
    assert!(h.is_null());
    let t = CString::new("0.5").unwrap();
    assert_eq!(unsafe { ph_hua_params_new(2, t.as_ptr(), &mut h) }, PhStatus::InvalidArgument);
    assert!(last_error().contains("fraction"));
    assert_eq!(unsafe { ph_hua_params_new(2, ptr::null(), &mut h) }, PhStatus::NullPointer);
    let t = CString::new("1").unwrap();
    assert_eq!(unsafe { ph_hua_params_new(4, t.as_ptr(), &mut h) }, PhStatus::InvalidArgument);
    assert_eq!(unsafe { ph_hua_params_new(2, t.as_ptr(), ptr::null_mut()) }, PhStatus::NullPointer);
    let invalid = [0xffu8, 0];
    assert_eq!(
        unsafe { ph_hua_params_new(2, invalid.as_ptr() as *const c_char, &mut h) },
        PhStatus::InvalidUtf8
    );
}

fn ratio(s: &str) -> f64 {
    let (n, d) = s.split_once('/').unwrap();
    n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap()
}

#[test]
fn brackets() {
    let hp = params(2, "1");
    let eps = CString::new("1e-6").unwrap();
    let (mut lo, mut hi) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { ph_law_pi_s(hp, 0, eps.as_ptr(), &mut lo, &mut hi) }, PhStatus::Ok);
    let (l, h) = (ratio(&take(lo)), ratio(&take(hi)));
    assert!(l <= 0.2887885 && 0.2887875 <= h && h - l <= 1e-6);
    // nu(empty) = pi(0) at t = 1.
    assert_eq!(unsafe { ph_law_nu(hp, ptr::null(), 0, eps.as_ptr(), &mut lo, &mut hi) }, PhStatus::Ok);
    let (l2, h2) = (ratio(&take(lo)), ratio(&take(hi)));
    assert!(l2 <= h && l <= h2);
    let parts = [1u64, 2];
    assert_eq!(
        unsafe { ph_law_nu(hp, parts.as_ptr(), 2, eps.as_ptr(), &mut lo, &mut hi) },
        PhStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { ph_law_pi_s(hp, 0, eps.as_ptr(), &mut lo, ptr::null_mut()) },
        PhStatus::NullPointer
    );
    unsafe { ph_hua_params_free(hp) };
}

#[test]
fn singular_sampling_is_seeded() {
    let hp = params(2, "1");
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ph_hua_sampler_new(hp, 3, &mut s) }, PhStatus::Ok);
    let draw = |seed| {
        let mut rng = ptr::null_mut();
        assert_eq!(unsafe { ph_rng_new(seed, 0, &mut rng) }, PhStatus::Ok);
        let mut out = Vec::new();
        for _ in 0..20 {
            let mut k = [0i64; 3];
            assert_eq!(unsafe { ph_hua_sample_singulars(s, rng, k.as_mut_ptr(), 3) }, PhStatus::Ok);
            assert!(k[0] >= k[1] && k[1] >= k[2]);
            out.push(k);
        }
        unsafe { ph_rng_free(rng) };
        out
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
    let mut rng = ptr::null_mut();
    unsafe { ph_rng_new(1, 0, &mut rng) };
    let mut small = [0i64; 2];
    assert_eq!(unsafe { ph_hua_sample_singulars(s, rng, small.as_mut_ptr(), 2) }, PhStatus::BufferTooSmall);
    assert_eq!(unsafe { ph_hua_sample_singulars(ptr::null(), rng, small.as_mut_ptr(), 2) }, PhStatus::NullPointer);
    unsafe {
        ph_rng_free(rng);
        ph_hua_sampler_free(s);
        ph_hua_params_free(hp);
    }
}

#[test]
fn matrix_round_trip() {
    let hp = params(2, "1");
    let mut s = ptr::null_mut();
    let mut rng = ptr::null_mut();
    unsafe {
        ph_hua_sampler_new(hp, 2, &mut s);
        ph_rng_new(11, 3, &mut rng);
    }
    let mut hits = 0;
    for _ in 0..50 {
        let mut m = ptr::null_mut();
        match unsafe { ph_hua_sample_matrix(s, rng, 24, 8, &mut m) } {
            PhStatus::Ok => {}
            PhStatus::PrecisionExhausted => continue,
            other => panic!("{other:?}"),
        }
        assert_eq!(unsafe { ph_matrix_size(m) }, 2);
        let mut text = ptr::null_mut();
        assert_eq!(unsafe { ph_matrix_to_string(m, &mut text) }, PhStatus::Ok);
        let text = CString::new(take(text)).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(unsafe { ph_matrix_parse(text.as_ptr(), 2, 24, 8, &mut back) }, PhStatus::Ok);
        let (mut a, mut b) = ([0i64; 2], [0i64; 2]);
        let (mut ca, mut cb) = ([0u8; 2], [0u8; 2]);
        unsafe {
            assert_eq!(ph_matrix_singular_numbers(m, a.as_mut_ptr(), ca.as_mut_ptr(), 2), PhStatus::Ok);
            assert_eq!(ph_matrix_singular_numbers(back, b.as_mut_ptr(), cb.as_mut_ptr(), 2), PhStatus::Ok);
            ph_matrix_free(m);
            ph_matrix_free(back);
        }
        if ca == [1, 1] {
            assert_eq!(a, b);
            assert_eq!(cb, [1, 1]);
            hits += 1;
        }
    }
    assert!(hits > 40);
    unsafe {
        ph_rng_free(rng);
        ph_hua_sampler_free(s);
        ph_hua_params_free(hp);
    }
}

#[test]
fn parsed_matrix_singular_numbers() {
    let text = CString::new("1*2^-1 0\n0 1*2^2").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ph_matrix_parse(text.as_ptr(), 2, 24, 8, &mut m) }, PhStatus::Ok);
    let mut v = [0i64; 2];
    let mut c = [0u8; 2];
    assert_eq!(unsafe { ph_matrix_singular_numbers(m, v.as_mut_ptr(), c.as_mut_ptr(), 2) }, PhStatus::Ok);
    assert_eq!(v, [1, -2]);
    assert_eq!(c, [1, 1]);
    assert_eq!(unsafe { ph_matrix_singular_numbers(m, v.as_mut_ptr(), c.as_mut_ptr(), 1) }, PhStatus::BufferTooSmall);
    unsafe { ph_matrix_free(m) };
    let zero = CString::new("0 0\n0 0").unwrap();
    assert_eq!(unsafe { ph_matrix_parse(zero.as_ptr(), 2, 24, 8, &mut m) }, PhStatus::Ok);
    assert_eq!(unsafe { ph_matrix_singular_numbers(m, v.as_mut_ptr(), c.as_mut_ptr(), 2) }, PhStatus::Ok);
    assert_eq!(c, [0, 0]);
    unsafe { ph_matrix_free(m) };
    let bad = CString::new("1 2\n3").unwrap();
    assert_eq!(unsafe { ph_matrix_parse(bad.as_ptr(), 2, 24, 8, &mut m) }, PhStatus::InvalidArgument);
    assert_eq!(unsafe { ph_matrix_size(ptr::null()) }, 0);
}

#[test]
fn nu_sampler_buffers() {
    let hp = params(2, "1");
    let mut s = ptr::null_mut();
    let mut rng = ptr::null_mut();
    unsafe {
        assert_eq!(ph_nu_sampler_new(hp, &mut s), PhStatus::Ok);
        ph_rng_new(3, 0, &mut rng);
    }
    let mut seen_nonempty = false;
    for _ in 0..200 {
        let mut buf = [0u64; 64];
        let mut len = 0usize;
        assert_eq!(unsafe { ph_nu_sample(s, rng, buf.as_mut_ptr(), 64, &mut len) }, PhStatus::Ok);
        assert!(buf[..len].windows(2).all(|w| w[0] >= w[1]));
        assert!(buf[..len].iter().all(|&x| x > 0));
        seen_nonempty |= len > 0;
    }
    assert!(seen_nonempty);
    // Zero capacity: empty draws succeed, others report the needed size.
    let mut len = 0usize;
    loop {
        match unsafe { ph_nu_sample(s, rng, ptr::null_mut(), 0, &mut len) } {
            PhStatus::Ok => assert_eq!(len, 0),
            PhStatus::BufferTooSmall => {
                assert!(len > 0);
                break;
            }
            other => panic!("{other:?}"),
        }
    }
    unsafe {
        ph_rng_free(rng);
        ph_nu_sampler_free(s);
        ph_hua_params_free(hp);
        ph_string_free(ptr::null_mut());
        ph_matrix_free(ptr::null_mut());
    }
}
