//! Compiles a small C program against include/smartlid.h, links it to the
//! static library and runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "smartlid.h"

int main(void) {
    double a, b;
    if (smartlid_cartesian_to_belts(1.0, 1.0, &a, &b) != SMARTLID_STATUS_OK || a != 2.0 || b != 0.0) return 1;

    SmartlidConfig *cfg = smartlid_config_default();
    SmartlidPath *path = NULL;
    if (smartlid_plan(cfg, SMARTLID_PATH_MODE_RASTER, &path) != SMARTLID_STATUS_OK) return 2;
    double len, speed;
    smartlid_path_length(path, &len, &speed);
    printf("length %.3f speed %.3f\n", len, speed);

    SmartlidDrag drag;
    smartlid_stokes_drag(cfg, 0.032, &drag);
    printf("per-finger %.3f total %.3f\n", drag.per_finger_force, drag.total_force);

    SmartlidMixReport r;
    if (smartlid_mix_report(0, 0, 0, &r) != SMARTLID_STATUS_DEGENERATE) return 3;
    if (strlen(smartlid_last_error()) == 0) return 4;

    smartlid_path_free(path);
    smartlid_config_free(cfg);
    return 0;
}
"#;

/// target/<profile>/, found from this test binary in target/<profile>/deps/.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = profile_dir().join("libsmartlid_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I", include])
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("length 1.920 speed 0.032"), "{text}");
    assert!(text.contains("per-finger 1.131 total 9.048"), "{text}");
}
