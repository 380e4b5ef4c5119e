//! C ABI over the `seginr` library.
//!
//! Models and decode results are opaque heap handles released with their
//! `_free` function. Every fallible call returns a [`SeginrStatus`]; on
//! failure a message is kept per thread and can be read with
//! [`seginr_last_error`]. The generated header lives in `include/seginr.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use seginr::decode::{decode, probe_segment, DecodeConfig, DecodeMode, StopRule};
use seginr::net::{ModelConfig, ModelParams};
use seginr::numerics::rng_from_seed;
use seginr::train::{load_checkpoint, save_checkpoint};
use seginr::{Error, TokenSequence};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeginrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeginrDecodeMode {
    Streaming = 0,
    Parallel = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeginrStopRule {
    /// End when `P(end) >= tau`.
    Threshold = 0,
    /// End when the end class is the overall argmax.
    Argmax = 1,
}

/// Architecture of a loaded model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SeginrModelInfo {
    pub input_size: usize,
    pub output_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub enc_layers: usize,
    pub siren_layers: usize,
    pub window: usize,
    pub w0: f64,
    pub num_params: usize,
    /// Id of the end-of-segment class, equal to `output_size`.
    pub end_id: usize,
}

/// Opaque model handle.
pub struct SeginrModel {
    inner: ModelParams,
}

/// Opaque decode result handle.
pub struct SeginrDecodeResult {
    output: Vec<usize>,
    durations: Vec<usize>,
    truncated: Vec<u8>,
    wasted: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: SeginrStatus, msg: impl Into<String>) -> SeginrStatus {
    set_error(msg.into());
    status
}

fn from_error(err: Error) -> SeginrStatus {
    let status = match err {
        Error::Io { .. } => SeginrStatus::Io,
        Error::BadMagic(_)
        | Error::BadVersion(_)
        | Error::TruncatedFile { .. }
        | Error::TrailingBytes(_)
        | Error::Parse { .. } => SeginrStatus::Format,
        _ => SeginrStatus::InvalidArgument,
    };
    fail(status, err.to_string())
}

/// Runs `f`, turning panics into [`SeginrStatus::Panic`].
fn guard(f: impl FnOnce() -> SeginrStatus) -> SeginrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(SeginrStatus::Panic, "internal panic"),
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, SeginrStatus> {
    if path.is_null() {
        return Err(fail(SeginrStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(SeginrStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn tokens_arg(
    model: &ModelParams,
    tokens: *const usize,
    len: usize,
) -> Result<TokenSequence, SeginrStatus> {
    if tokens.is_null() && len > 0 {
        return Err(fail(SeginrStatus::NullPointer, "tokens is null"));
    }
    let slice = if len == 0 {
        &[][..]
    } else {
        std::slice::from_raw_parts(tokens, len)
    };
    TokenSequence::new(slice.to_vec(), model.vocab()).map_err(from_error)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn seginr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a checkpoint file. On success `*out` owns a new model.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seginr_model_load(
    path: *const c_char,
    out: *mut *mut SeginrModel,
) -> SeginrStatus {
    guard(|| {
        if out.is_null() {
            return fail(SeginrStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_checkpoint(path) {
            Ok(ck) => {
                *out = Box::into_raw(Box::new(SeginrModel { inner: ck.model }));
                SeginrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Creates a randomly initialised model with the default architecture.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seginr_model_init(seed: u64, out: *mut *mut SeginrModel) -> SeginrStatus {
    guard(|| {
        if out.is_null() {
            return fail(SeginrStatus::NullPointer, "out is null");
        }
        match ModelParams::init(ModelConfig::default(), &mut rng_from_seed(seed)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SeginrModel { inner }));
                SeginrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Writes the model parameters as a checkpoint without optimiser state.
///
/// # Safety
/// `model` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn seginr_model_save(
    model: *const SeginrModel,
    path: *const c_char,
) -> SeginrStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return fail(SeginrStatus::NullPointer, "model is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_checkpoint(&model.inner, None, path) {
            Ok(()) => SeginrStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `model` must be null or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn seginr_model_free(model: *mut SeginrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seginr_model_info(
    model: *const SeginrModel,
    out: *mut SeginrModelInfo,
) -> SeginrStatus {
    guard(|| {
        let (Some(model), false) = (model.as_ref(), out.is_null()) else {
            return fail(SeginrStatus::NullPointer, "model or out is null");
        };
        let c = model.inner.config();
        *out = SeginrModelInfo {
            input_size: c.input_size,
            output_size: c.output_size,
            embed_dim: c.embed_dim,
            hidden: c.hidden,
            enc_layers: c.enc_layers,
            siren_layers: c.siren_layers,
            window: c.window,
            w0: c.w0,
            num_params: model.inner.num_params(),
            end_id: model.inner.vocab().end_id(),
        };
        SeginrStatus::Ok
    })
}

/// Decodes `tokens[0..len]` into segments. `tau` is ignored for the argmax
/// rule. On success `*out` owns a new result.
///
/// # Safety
/// `model` must come from this library, `tokens` must point to `len`
/// values and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seginr_decode(
    model: *const SeginrModel,
    tokens: *const usize,
    len: usize,
    mode: SeginrDecodeMode,
    rule: SeginrStopRule,
    tau: f64,
    i_max: usize,
    out: *mut *mut SeginrDecodeResult,
) -> SeginrStatus {
    guard(|| {
        let (Some(model), false) = (model.as_ref(), out.is_null()) else {
            return fail(SeginrStatus::NullPointer, "model or out is null");
        };
        let x = match tokens_arg(&model.inner, tokens, len) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let cfg = DecodeConfig {
            mode: match mode {
                SeginrDecodeMode::Streaming => DecodeMode::Streaming,
                SeginrDecodeMode::Parallel => DecodeMode::Parallel,
            },
            rule: match rule {
                SeginrStopRule::Threshold => StopRule::Threshold(tau),
                SeginrStopRule::Argmax => StopRule::Argmax,
            },
            i_max,
        };
        match decode(&x, &model.inner, &cfg) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(SeginrDecodeResult {
                    output: r.output,
                    durations: r.durations,
                    truncated: r.truncated.into_iter().map(u8::from).collect(),
                    wasted: r.wasted,
                }));
                SeginrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of decoded output tokens.
///
/// # Safety
/// `result` must come from [`seginr_decode`].
#[no_mangle]
pub unsafe extern "C" fn seginr_result_output_len(result: *const SeginrDecodeResult) -> usize {
    result.as_ref().map_or(0, |r| r.output.len())
}

/// Decoded output tokens, `seginr_result_output_len` entries.
///
/// # Safety
/// `result` must come from [`seginr_decode`].
#[no_mangle]
pub unsafe extern "C" fn seginr_result_output(result: *const SeginrDecodeResult) -> *const usize {
    result.as_ref().map_or(ptr::null(), |r| r.output.as_ptr())
}

/// Number of segments, equal to the input length.
///
/// # Safety
/// `result` must come from [`seginr_decode`].
#[no_mangle]
pub unsafe extern "C" fn seginr_result_num_segments(result: *const SeginrDecodeResult) -> usize {
    result.as_ref().map_or(0, |r| r.durations.len())
}

/// Per-segment durations, `seginr_result_num_segments` entries.
///
/// # Safety
/// `result` must come from [`seginr_decode`].
#[no_mangle]
pub unsafe extern "C" fn seginr_result_durations(
    result: *const SeginrDecodeResult,
) -> *const usize {
    result
        .as_ref()
        .map_or(ptr::null(), |r| r.durations.as_ptr())
}

/// Per-segment flags, 1 where the segment hit `i_max` without ending.
///
/// # Safety
/// `result` must come from [`seginr_decode`].
#[no_mangle]
pub unsafe extern "C" fn seginr_result_truncated(result: *const SeginrDecodeResult) -> *const u8 {
    result
        .as_ref()
        .map_or(ptr::null(), |r| r.truncated.as_ptr())
}

/// Cells evaluated past the end of each segment (parallel mode only).
///
/// # Safety
/// `result` must come from [`seginr_decode`].
#[no_mangle]
pub unsafe extern "C" fn seginr_result_wasted(result: *const SeginrDecodeResult) -> usize {
    result.as_ref().map_or(0, |r| r.wasted)
}

/// # Safety
/// `result` must be null or come from [`seginr_decode`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn seginr_result_free(result: *mut SeginrDecodeResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Writes `P(end)` at indices `0..i_pad` of segment `u` into `p_end`, which
/// must hold at least `i_pad` values.
///
/// # Safety
/// `model` must come from this library, `tokens` must point to `len`
/// values and `p_end` to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn seginr_probe(
    model: *const SeginrModel,
    tokens: *const usize,
    len: usize,
    u: usize,
    i_pad: usize,
    p_end: *mut f64,
    capacity: usize,
) -> SeginrStatus {
    guard(|| {
        let (Some(model), false) = (model.as_ref(), p_end.is_null()) else {
            return fail(SeginrStatus::NullPointer, "model or p_end is null");
        };
        if capacity < i_pad {
            return fail(
                SeginrStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, need {i_pad}"),
            );
        }
        let x = match tokens_arg(&model.inner, tokens, len) {
            Ok(x) => x,
            Err(s) => return s,
        };
        match probe_segment(u, &x, &model.inner, i_pad) {
            Ok(records) => {
                let out = std::slice::from_raw_parts_mut(p_end, i_pad);
                for (o, r) in out.iter_mut().zip(&records) {
                    *o = r.p_end;
                }
                SeginrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
