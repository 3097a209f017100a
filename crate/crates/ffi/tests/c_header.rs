//! Compiles and runs a small C program against the generated header and
//! the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "padic_hua.h"

int main(void) {
    PhHuaParams *hp = NULL;
    if (ph_hua_params_new(2, "1/1", &hp) != PH_STATUS_OK) return 10;
    int64_t k[1] = {0};
    char *m = NULL;
    if (ph_law_m_n(hp, k, 1, &m) != PH_STATUS_OK) return 11;
    if (strcmp(m, "1/3") != 0) return 12;
    ph_string_free(m);
    PhHuaParams *bad = NULL;
    if (ph_hua_params_new(2, "3/1", &bad) != PH_STATUS_INVALID_ARGUMENT) return 13;
    char *msg = ph_last_error_message();
    if (msg == NULL) return 14;
    ph_string_free(msg);
    PhMatrix *a = NULL;
    if (ph_matrix_parse("2 0\n0 1*2^-3", 2, 24, 8, &a) != PH_STATUS_OK) return 15;
    int64_t v[2];
    uint8_t c[2];
    if (ph_matrix_singular_numbers(a, v, c, 2) != PH_STATUS_OK) return 16;
    printf("%lld %lld\n", (long long)v[0], (long long)v[1]);
    ph_matrix_free(a);
    ph_hua_params_free(hp);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps/<name>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn find_staticlib(dir: &Path) -> Option<PathBuf> {
    [dir.join("libpadic_hua_ffi.a"), dir.join("deps/libpadic_hua_ffi.a")].into_iter().find(|p| p.exists())
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/padic_hua.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let names: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(names.len() >= 20);
    for n in names {
        assert!(header.contains(&format!("{n}(")), "{n} missing from header");
    }
}

#[test]
fn c_program_links_and_runs() {
    let dir = target_dir();
    let lib = find_staticlib(&dir).expect("static library is built alongside the tests");
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("probe.c");
    let bin = tmp.path().join("probe");
    std::fs::write(&c, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}", concat!(env!("CARGO_MANIFEST_DIR"), "/include")))
        .arg(&c)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler is available as cc");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "3 -1");
}
