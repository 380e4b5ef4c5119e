use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "seginr.h"

int main(void) {
    SeginrModel *model = NULL;
    if (seginr_model_init(3, &model) != SEGINR_STATUS_OK) return 10;
    SeginrModelInfo info;
    if (seginr_model_info(model, &info) != SEGINR_STATUS_OK || info.end_id != 32) return 11;
    size_t tokens[3] = {1, 2, 3};
    SeginrDecodeResult *res = NULL;
    if (seginr_decode(model, tokens, 3, SEGINR_DECODE_MODE_PARALLEL, SEGINR_STOP_RULE_THRESHOLD, 1.1, 5, &res)
        != SEGINR_STATUS_OK) return 12;
    if (seginr_result_num_segments(res) != 3 || seginr_result_output_len(res) != 15) return 13;
    if (seginr_result_wasted(res) != 0 || seginr_result_truncated(res)[2] != 1) return 14;
    seginr_result_free(res);
    tokens[0] = 500;
    if (seginr_decode(model, tokens, 3, SEGINR_DECODE_MODE_STREAMING, SEGINR_STOP_RULE_ARGMAX, 0.0, 5, &res)
        != SEGINR_STATUS_INVALID_ARGUMENT) return 15;
    printf("%s\n", seginr_last_error());
    seginr_model_free(model);
    return 0;
}
"#;

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(header_dir().join("seginr.h")).unwrap();
    for name in [
        "seginr_model_load",
        "seginr_model_free",
        "seginr_decode",
        "seginr_result_free",
        "seginr_probe",
        "seginr_last_error",
        "typedef struct SeginrModel SeginrModel",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let lib = deps.join("libseginr_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("500"));
}
