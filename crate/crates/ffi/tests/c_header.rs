//! Compiles and runs a C program against the generated header and the
//! shared library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "dflsim.h"

int main(void) {
    DflGraph *g = NULL;
    if (dfl_graph_generate("family = \"star\"", 4, 0, &g) != DFL_STATUS_OK) return 1;
    double norm = 0.0;
    if (dfl_steady_state(g, NULL, 0, &norm) != DFL_STATUS_OK) return 2;
    printf("%.12f\n", norm);
    size_t deg[1];
    if (dfl_graph_degrees(g, deg, 1) != DFL_STATUS_BUFFER_TOO_SMALL) return 3;
    char msg[128];
    if (dfl_last_error_message(msg, sizeof msg) == 0 || strstr(msg, "needed") == NULL) return 4;
    dfl_graph_free(g);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // …/target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib_dir = target_dir();
    assert!(
        lib_dir.join("libdflsim_ffi.so").exists() || lib_dir.join("libdflsim_ffi.dylib").exists(),
        "shared library not found in {}",
        lib_dir.display()
    );
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    let exe = work.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg(format!("-I{}", include.display()))
        .arg(format!("-L{}", lib_dir.display()))
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-ldflsim_ffi")
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let norm: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((norm - 0.28f64.sqrt()).abs() < 1e-9);
}
