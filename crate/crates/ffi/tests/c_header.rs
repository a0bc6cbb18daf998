//! Compiles and runs a C program against the generated header and the
//! static library. Skipped when no C compiler is available.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "wavetorus.h"

int main(void) {
    WtField *f = NULL, *w = NULL;
    if (wt_field_zeros(6, &f) != WT_STATUS_OK) return 1;
    if (wt_field_set_pair(f, 1, 3, 1.0, 0.0) != WT_STATUS_OK) return 2;
    if (wt_solve_box(f, &w) != WT_STATUS_OK) return 3;
    double re = 0, im = 0;
    wt_field_get(w, 1, 3, &re, &im);
    if (fabs(re + 0.2) > 1e-15) return 4;
    double e = 0;
    if (wt_field_norm(NULL, WT_NORM_E, 0, &e) != WT_STATUS_NULL_POINTER) return 5;
    if (wt_last_error() == NULL) return 6;
    char *json = NULL;
    if (wt_field_to_json(w, &json) != WT_STATUS_OK) return 7;
    wt_string_free(json);
    wt_field_free(w);
    wt_field_free(f);
    printf("ok %s\n", wt_version());
    return 0;
}
"#;

fn have(cmd: &str) -> bool {
    Command::new(cmd).arg("--version").output().is_ok()
}

#[test]
fn c_program_links_and_runs() {
    if !have("cc") {
        eprintln!("skipping: no C compiler");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test-binary> -> target/<profile>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libwavetorus_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
