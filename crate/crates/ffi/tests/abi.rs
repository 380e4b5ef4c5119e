use std::ffi::{CStr, CString};
use std::ptr;

use seginr_ffi::*;

fn last_error() -> String {
    let p = seginr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_model(seed: u64) -> *mut SeginrModel {
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { seginr_model_init(seed, &mut model) },
        SeginrStatus::Ok
    );
    model
}

#[test]
fn info_reports_architecture() {
    let model = new_model(1);
    let mut info = SeginrModelInfo::default();
    assert_eq!(
        unsafe { seginr_model_info(model, &mut info) },
        SeginrStatus::Ok
    );
    assert_eq!(
        (info.input_size, info.output_size, info.end_id),
        (16, 32, 32)
    );
    assert_eq!(
        (info.embed_dim, info.hidden, info.siren_layers),
        (64, 64, 3)
    );
    assert!(info.num_params > 0);
    unsafe { seginr_model_free(model) };
}

#[test]
fn decode_matches_library() {
    let model = new_model(3);
    let tokens = [1usize, 4, 9, 2];
    for mode in [SeginrDecodeMode::Streaming, SeginrDecodeMode::Parallel] {
        let mut res = ptr::null_mut();
        let status = unsafe {
            seginr_decode(
                model,
                tokens.as_ptr(),
                tokens.len(),
                mode,
                SeginrStopRule::Threshold,
                0.5,
                20,
                &mut res,
            )
        };
        assert_eq!(status, SeginrStatus::Ok);
        let lib = {
            let m = seginr::net::ModelParams::init(
                seginr::net::ModelConfig::default(),
                &mut seginr::numerics::rng_from_seed(3),
            )
            .unwrap();
            let x = seginr::TokenSequence::new(tokens.to_vec(), m.vocab()).unwrap();
            seginr::decode::parallel_decode(&x, &m, &seginr::decode::DecodeConfig::default())
                .unwrap()
        };
        unsafe {
            let n = seginr_result_num_segments(res);
            assert_eq!(n, 4);
            let durations = std::slice::from_raw_parts(seginr_result_durations(res), n);
            assert_eq!(durations, lib.durations.as_slice());
            let len = seginr_result_output_len(res);
            let output = if len == 0 {
                &[][..]
            } else {
                std::slice::from_raw_parts(seginr_result_output(res), len)
            };
            assert_eq!(output, lib.output.as_slice());
            let truncated = std::slice::from_raw_parts(seginr_result_truncated(res), n);
            assert_eq!(
                truncated,
                lib.truncated
                    .iter()
                    .map(|&t| u8::from(t))
                    .collect::<Vec<_>>()
                    .as_slice()
            );
            let expected_waste = if mode == SeginrDecodeMode::Parallel {
                lib.wasted
            } else {
                0
            };
            assert_eq!(seginr_result_wasted(res), expected_waste);
            seginr_result_free(res);
        }
    }
    unsafe { seginr_model_free(model) };
}

#[test]
fn invalid_token_sets_error() {
    let model = new_model(0);
    let tokens = [99usize];
    let mut res = ptr::null_mut();
    let status = unsafe {
        seginr_decode(
            model,
            tokens.as_ptr(),
            1,
            SeginrDecodeMode::Parallel,
            SeginrStopRule::Argmax,
            0.0,
            20,
            &mut res,
        )
    };
    assert_eq!(status, SeginrStatus::InvalidArgument);
    assert!(res.is_null());
    assert!(last_error().contains("99"));
    unsafe { seginr_model_free(model) };
}

#[test]
fn null_arguments_are_reported() {
    let mut info = SeginrModelInfo::default();
    assert_eq!(
        unsafe { seginr_model_info(ptr::null(), &mut info) },
        SeginrStatus::NullPointer
    );
    assert_eq!(
        unsafe { seginr_model_load(ptr::null(), &mut ptr::null_mut()) },
        SeginrStatus::NullPointer
    );
    unsafe {
        seginr_model_free(ptr::null_mut());
        seginr_result_free(ptr::null_mut());
    }
}

#[test]
fn save_load_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
    let model = new_model(5);
    assert_eq!(
        unsafe { seginr_model_save(model, path.as_ptr()) },
        SeginrStatus::Ok
    );
    let mut loaded = ptr::null_mut();
    assert_eq!(
        unsafe { seginr_model_load(path.as_ptr(), &mut loaded) },
        SeginrStatus::Ok
    );

    let tokens = [0usize, 5, 7];
    let mut a = [0.0f64; 6];
    let mut b = [0.0f64; 6];
    unsafe {
        assert_eq!(
            seginr_probe(model, tokens.as_ptr(), 3, 1, 6, a.as_mut_ptr(), 6),
            SeginrStatus::Ok
        );
        assert_eq!(
            seginr_probe(loaded, tokens.as_ptr(), 3, 1, 6, b.as_mut_ptr(), 6),
            SeginrStatus::Ok
        );
        assert_eq!(
            seginr_probe(model, tokens.as_ptr(), 3, 1, 6, a.as_mut_ptr(), 5),
            SeginrStatus::BufferTooSmall
        );
        assert_eq!(
            seginr_probe(model, tokens.as_ptr(), 3, 3, 6, a.as_mut_ptr(), 6),
            SeginrStatus::InvalidArgument
        );
    }
    assert_eq!(a, b);
    assert!(a.iter().all(|p| (0.0..=1.0).contains(p)));
    unsafe {
        seginr_model_free(model);
        seginr_model_free(loaded);
    }
}

#[test]
fn missing_and_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("none.ckpt").to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { seginr_model_load(missing.as_ptr(), &mut m) },
        SeginrStatus::Io
    );
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { seginr_model_load(junk.as_ptr(), &mut m) },
        SeginrStatus::Format
    );
    assert!(m.is_null());
}
