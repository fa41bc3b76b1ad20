use std::path::{Path, PathBuf};
use std::process::Command;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/markov_binomial.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).expect("header is generated by the build script");
    for name in [
        "MARKOV_BINOMIAL_H",
        "typedef struct MbChain MbChain;",
        "typedef struct MbPmf MbPmf;",
        "MB_STATUS_OK = 0",
        "MB_STATUS_BUFFER_TOO_SMALL = 6",
        "MB_START_CUSTOM = 3",
        "mb_chain_new(",
        "mb_chain_free(",
        "mb_chain_exact_pmf(",
        "mb_fit_negative_binomial(",
        "mb_fit_binomial(",
        "mb_bound(",
        "mb_exact_tv_to_fit(",
        "mb_pmf_copy(",
        "mb_last_error_message(",
        "mb_status_name(",
        "mb_version(",
    ] {
        assert!(text.contains(name), "header is missing {name}");
    }
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "markov_binomial.h"

int main(void) {
    MbChain *chain = NULL;
    if (mb_chain_new(0.5, 1.5, &chain) != MB_STATUS_INVALID_ARGUMENT) return 10;
    char msg[128];
    if (mb_last_error_message(msg, sizeof msg) == 0) return 11;
    if (mb_chain_new(0.5, 0.5, &chain) != MB_STATUS_OK) return 12;
    MbPmf *pmf = NULL;
    if (mb_chain_exact_pmf(chain, 3, MB_START_STATIONARY, 0.0, &pmf) != MB_STATUS_OK) return 13;
    double buf[4];
    size_t written = 0;
    if (mb_pmf_copy(pmf, buf, 2, &written) != MB_STATUS_BUFFER_TOO_SMALL || written != 4) return 14;
    if (mb_pmf_copy(pmf, buf, 4, &written) != MB_STATUS_OK) return 15;
    printf("%.17g %.17g %.17g %.17g\n", buf[0], buf[1], buf[2], buf[3]);
    MbBound bound;
    if (mb_bound(chain, 3, &bound) != MB_STATUS_OK || bound.regime != MB_REGIME_UNDERDISPERSED) return 16;
    mb_pmf_free(pmf);
    mb_chain_free(chain);
    return strcmp(mb_status_name(MB_STATUS_OK), "ok") == 0 ? 0 : 17;
}
"#;

/// Directory holding the library artifacts, next to the test binary's `deps/`.
fn artifact_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    Some(exe.parent()?.parent()?.to_path_buf())
}

#[test]
fn c_program_links_against_static_library() {
    let Some(dir) = artifact_dir() else { return };
    let lib = dir.join("libmarkov_binomial_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    let bin = work.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let values: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect();
    for (g, w) in values.iter().zip([0.125, 0.375, 0.375, 0.125]) {
        assert!((g - w).abs() < 1e-15, "{values:?}");
    }
}
