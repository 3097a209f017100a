//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. The full `all` suite runs twice, once on a single
//! worker and once on four; the single-worker run supplies the reports
//! (and the runtimes) that criteria 1 to 8 are judged on.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Duration;

use num_bigint::BigInt;
use num_rational::BigRational;
use padic_hua::experiments::{bundle_json, run_suite, ExperimentReport, SuiteConfig};
use padic_hua::laws::{tuples_bounded, vol_singular_law};
use serde_json::Value;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn report<'a>(reports: &'a [ExperimentReport], name: &str) -> &'a ExperimentReport {
    reports.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("missing report {name}"))
}

fn gate(r: &ExperimentReport, name: &str) -> Value {
    r.gates.iter().find(|g| g.name == name).unwrap_or_else(|| panic!("{}: no gate {name}", r.name)).value.clone()
}

fn total_runtime(reports: &[&ExperimentReport]) -> Duration {
    reports.iter().map(|r| r.runtime).sum()
}

fn all_pass(reports: &[&ExperimentReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

fn val(mut x: u64, p: u64, cap: u32) -> u32 {
    let mut v = 0;
    while v < cap && x.is_multiple_of(p) {
        if x == 0 {
            return cap;
        }
        x /= p;
        v += 1;
    }
    v
}

/// Singular classes of every `N x N` matrix over `Z/p^E` for `N <= 2`,
/// read off gcds of entries and the determinant rather than elimination.
fn minors_census(p: u64, n: usize, e: u32) -> BTreeMap<Vec<i64>, u64> {
    let m = p.pow(e);
    let mut out = BTreeMap::new();
    let cells = n * n;
    let total = m.pow(cells as u32);
    for idx in 0..total {
        let mut rest = idx;
        let a: Vec<u64> = (0..cells)
            .map(|_| {
                let x = rest % m;
                rest /= m;
                x
            })
            .collect();
        let vmin = a.iter().map(|&x| val(x, p, e)).min().unwrap();
        if vmin >= e {
            continue;
        }
        let k = if n == 1 {
            vec![-(vmin as i64)]
        } else {
            // Entries of p^{-vmin} A are known modulo p^{E - vmin}.
            let w = e - vmin;
            let mw = p.pow(w) as i128;
            let s: Vec<i128> = a.iter().map(|&x| (x / p.pow(vmin)) as i128).collect();
            let det = (s[0] * s[3] - s[1] * s[2]).rem_euclid(mw) as u64;
            let vd = val(det, p, w);
            if vd >= w {
                continue;
            }
            vec![-(vmin as i64), -((vmin + vd) as i64)]
        };
        *out.entry(k).or_insert(0) += 1;
    }
    out
}

fn criterion_1(reports: &[ExperimentReport]) -> Verdict {
    let names = ["oracle_p2_n1_e3", "oracle_p2_n2_e3", "oracle_p3_n1_e2", "oracle_p3_n2_e2"];
    let rs: Vec<&ExperimentReport> = names.iter().map(|n| report(reports, n)).collect();
    let mut independent = 0;
    let mut mismatches = 0;
    for (p, n, e) in [(2u64, 1usize, 3u32), (2, 2, 3), (3, 1, 2), (3, 2, 2)] {
        let census = minors_census(p, n, e);
        let total = BigRational::from_integer(BigInt::from(p.pow(e * (n * n) as u32)));
        for k in tuples_bounded(n, -(e as i64) + 1, 0) {
            let c = census.get(&k).copied().unwrap_or(0);
            let freq = BigRational::from_integer(BigInt::from(c)) / &total;
            independent += 1;
            if freq != vol_singular_law(p, &k).unwrap() {
                mismatches += 1;
            }
        }
    }
    let t = total_runtime(&rs);
    verdict(
        all_pass(&rs) && mismatches == 0 && t < Duration::from_secs(10),
        format!("4 enumerations exact; {independent} classes re-derived from minors, {mismatches} mismatches; {:.2}s", t.as_secs_f64()),
    )
}

fn criterion_2(reports: &[ExperimentReport]) -> Verdict {
    let names = ["identities_kernel_rows", "identities_boundary_sums", "identities_rewriting", "identities_four_forms"];
    let rs: Vec<&ExperimentReport> = names.iter().map(|n| report(reports, n)).collect();
    let t = total_runtime(&rs);
    let failures: u64 = rs.iter().flat_map(|r| r.gates.iter()).map(|g| g.value.as_u64().unwrap_or(u64::MAX)).sum();
    verdict(
        all_pass(&rs) && failures == 0 && t < Duration::from_secs(30),
        format!("(a)-(d) zero failures; {:.2}s", t.as_secs_f64()),
    )
}

fn criterion_3(reports: &[ExperimentReport]) -> Verdict {
    let r = report(reports, "nu_factorization");
    let ok = r.params["max_X1"] == 4 && r.params["eps"] == "1/1000000000";
    verdict(r.pass && ok, format!("{} non-overlapping of {}", gate(r, "non_overlapping_brackets"), r.notes.join("; ")))
}

fn criterion_4(reports: &[ExperimentReport]) -> Verdict {
    let r = report(reports, "rogers_ramanujan");
    let ok = r.params["eps"] == "1/10000000000" && r.rows.len() == 2 * 2 * 2 * 3;
    verdict(r.pass && ok, format!("{} pairs compared, {} disjoint", r.rows.len() / 2, gate(r, "non_overlapping_pairs")))
}

fn criterion_5(reports: &[ExperimentReport]) -> Verdict {
    let rs = [report(reports, "boundary_limit_t1_1"), report(reports, "boundary_limit_t1_2")];
    let tvs: Vec<f64> = rs.iter().map(|r| gate(r, "tv_at_N40").as_f64().unwrap()).collect();
    let ok = tvs.iter().all(|&t| t < 1e-6);
    verdict(all_pass(&rs) && ok, format!("TV at N = 40: {:.3e} (t = 1), {:.3e} (t = 1/2); decreasing", tvs[0], tvs[1]))
}

fn tv_of(r: &ExperimentReport) -> f64 {
    gate(r, "tv").as_f64().unwrap()
}

fn criterion_6(reports: &[ExperimentReport]) -> Verdict {
    let r = report(reports, "hua_roundtrip_n2");
    let tv = tv_of(r);
    let ok = r.draws == Some(100_000) && tv < 0.01 && r.runtime < Duration::from_secs(300);
    verdict(r.pass && ok, format!("TV {tv:.5} < 0.01 at 10^5 draws; {:.2}s single-threaded; {}", r.runtime.as_secs_f64(), r.notes.join("; ")))
}

fn criterion_7(reports: &[ExperimentReport]) -> Verdict {
    let rs = [report(reports, "corners_consistency_n3_t1_1"), report(reports, "corners_consistency_n2_t1_2")];
    let tvs: Vec<f64> = rs.iter().map(|r| tv_of(r)).collect();
    let ok = rs.iter().all(|r| r.draws == Some(100_000)) && tvs.iter().all(|&t| t < 0.01);
    verdict(all_pass(&rs) && ok, format!("TV {:.5} (2,1,3), {:.5} (2,1/2,2)", tvs[0], tvs[1]))
}

fn criterion_8(reports: &[ExperimentReport]) -> Verdict {
    let r = report(reports, "ergodic_decomposition");
    let tv = gate(r, "tv_n16").as_f64().unwrap();
    let ok = r.draws == Some(10_000) && tv < 0.03;
    verdict(r.pass && ok, format!("TV {tv:.5} < 0.03 at N = 16; {}", r.notes.join("; ")))
}

fn run_all(threads: usize, cfg: &SuiteConfig) -> (String, Vec<ExperimentReport>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let reports = run_suite("all", cfg).expect("suite runs");
        (bundle_json("all", cfg, &reports), reports)
    })
}

fn main() -> ExitCode {
    let cfg = SuiteConfig { seed: 42, ..SuiteConfig::default() };
    let (single, reports) = run_all(1, &cfg);
    let (multi, multi_reports) = run_all(4, &cfg);
    let per_report_equal = reports.len() == multi_reports.len()
        && reports.iter().zip(&multi_reports).all(|(a, b)| a.to_json() == b.to_json() && a.to_csv() == b.to_csv());

    let results = [
        ("exhaustive oracle equality", criterion_1(&reports)),
        ("exact identity suite", criterion_2(&reports)),
        ("nu factorization", criterion_3(&reports)),
        ("Rogers-Ramanujan products", criterion_4(&reports)),
        ("boundary limit", criterion_5(&reports)),
        ("round-trip Monte Carlo", criterion_6(&reports)),
        ("corners consistency", criterion_7(&reports)),
        ("ergodic decomposition", criterion_8(&reports)),
        (
            "determinism",
            verdict(
                single == multi && per_report_equal,
                format!("`all --seed 42` bundle of {} bytes identical on 1 and 4 workers", single.len()),
            ),
        ),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        println!("criterion {}: {:<28} {}  {}", i + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
