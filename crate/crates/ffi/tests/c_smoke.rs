//! Compiles a small C program against the generated header and the static
//! library. Skipped when no C compiler is on the PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "evfair.h"

int main(void) {
    EvfScenario *s = NULL;
    if (evf_scenario_generate("shopping", 2, 2, 2, 3.0, &s) != EVF_STATUS_OK) return 10;
    if (evf_scenario_set_mode(s, "joint") != EVF_STATUS_OK) return 11;
    EvfRun *r = NULL;
    if (evf_solve(s, "auto", 0.0, &r) != EVF_STATUS_OK) { puts(evf_last_error()); return 12; }
    if (evf_run_status(r) != EVF_SOLVE_STATUS_OPTIMAL || !evf_run_audit_pass(r)) return 13;
    printf("%.6f\n", evf_run_objective(r));
    evf_run_free(r);
    EvfScenario *bad = NULL;
    if (evf_scenario_from_json("[]", &bad) != EVF_STATUS_PARSE_ERROR || bad != NULL) return 14;
    if (evf_last_error() == NULL) return 15;
    evf_scenario_free(s);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> → target/<profile>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libevfair_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "smoke exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    let obj: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!(obj.is_finite());
}
