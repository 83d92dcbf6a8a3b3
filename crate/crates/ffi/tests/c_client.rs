//! Compiles a C program against the generated header and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const CLIENT: &str = r#"
#include <stdio.h>
#include <string.h>
#include "nadisc.h"

#define CHECK(call) do { NadiscStatus st_ = (call); if (st_ != NADISC_STATUS_OK) { \
    fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_, nadisc_last_error()); return 1; } } while (0)

int main(void) {
    NadiscInstance *inst = NULL;
    CHECK(nadisc_instance_random("coverage", 2, 6, 4, &inst));
    size_t n = 0, m = 0;
    CHECK(nadisc_instance_shape(inst, &n, &m));
    if (n != 2 || m != 6) return 2;

    double empty = -1.0;
    CHECK(nadisc_eval(inst, 0, 0, &empty));
    if (empty != 0.0) return 3;

    NadiscSplit *split = NULL;
    CHECK(nadisc_split(inst, 2, 1, 2, &split));
    size_t colors[6];
    double disc = -1.0, again = -2.0;
    CHECK(nadisc_round(inst, split, 8, 1, colors, 6, &disc));
    CHECK(nadisc_disc_of_coloring(inst, colors, 6, 2, &again));
    if (disc != again) return 4;

    if (nadisc_instance_random("bogus", 2, 6, 0, &inst) != NADISC_STATUS_INVALID_INPUT) return 5;
    if (nadisc_last_error() == NULL || strstr(nadisc_last_error(), "bogus") == NULL) return 6;

    char *json = NULL;
    CHECK(nadisc_instance_to_json(inst, &json));
    NadiscInstance *copy = NULL;
    CHECK(nadisc_instance_from_json(json, &copy));
    nadisc_string_free(json);

    nadisc_instance_free(copy);
    nadisc_split_free(split);
    nadisc_instance_free(inst);
    printf("ok %s\n", nadisc_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<this test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libnadisc_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let work = Path::new(env!("CARGO_TARGET_TMPDIR")).join("c_client");
    std::fs::create_dir_all(&work).unwrap();
    let src = work.join("client.c");
    let bin = work.join("client");
    std::fs::write(&src, CLIENT).unwrap();

    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("run the C compiler");
    assert!(status.success(), "C client failed to compile");

    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "client exited with {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("ok {}", env!("CARGO_PKG_VERSION")));
}
