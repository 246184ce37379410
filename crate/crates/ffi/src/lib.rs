//! C ABI over the mcwb model container and its predictors.
//!
//! Conventions: every function returns an [`McwbStatus`] code; out-values are
//! written through pointers only on `MCWB_STATUS_OK`. A loaded model is an
//! opaque handle owned by the caller and released with [`mcwb_model_free`].
//! Handles are immutable, so one handle may be shared across threads for
//! prediction. After a non-OK return, [`mcwb_last_error`] yields a
//! human-readable message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mcwb::boost::predict_strong;
use mcwb::model::ModelContainer;
use mcwb::wald::predict_early_exit;

/// Result of every C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McwbStatus {
    /// Success; out-parameters are valid.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Argument values were rejected (dimension mismatch, bad UTF-8, ...).
    InvalidInput = 2,
    /// The file could not be read or written.
    Io = 3,
    /// The model file failed validation (magic, checksum, layout).
    CorruptModel = 4,
    /// The model lacks the section this call needs (e.g. no mapper).
    MissingSection = 5,
    /// An internal panic was caught; treat the handle as poisoned.
    Panic = 6,
}

/// Opaque trained-model handle.
pub struct McwbModel(ModelContainer);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String =
        message.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn fail(status: McwbStatus, message: &str) -> McwbStatus {
    set_error(message);
    status
}

fn fail_with(err: &mcwb::Error) -> McwbStatus {
    let status = match err {
        mcwb::Error::Io { .. } => McwbStatus::Io,
        mcwb::Error::Model(_) => McwbStatus::CorruptModel,
        _ => McwbStatus::InvalidInput,
    };
    fail(status, &err.to_string())
}

fn guarded(body: impl FnOnce() -> McwbStatus) -> McwbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(McwbStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for reads.
unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, McwbStatus> {
    if ptr.is_null() {
        return Err(fail(McwbStatus::NullPointer, "path pointer is null"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(text) => Ok(Path::new(text)),
        Err(_) => Err(fail(McwbStatus::InvalidInput, "path is not valid UTF-8")),
    }
}

unsafe fn model_arg<'a>(ptr: *const McwbModel) -> Result<&'a ModelContainer, McwbStatus> {
    if ptr.is_null() {
        return Err(fail(McwbStatus::NullPointer, "model handle is null"));
    }
    Ok(&(*ptr).0)
}

/// Load a model file into a fresh handle.
///
/// On success `*out` owns the handle; release it with `mcwb_model_free`.
///
/// # Safety
/// `path` must point to a NUL-terminated string and `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mcwb_model_load(
    path: *const c_char,
    out: *mut *mut McwbModel,
) -> McwbStatus {
    guarded(|| {
        if out.is_null() {
            return fail(McwbStatus::NullPointer, "out pointer is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match ModelContainer::load(path) {
            Ok(container) => {
                *out = Box::into_raw(Box::new(McwbModel(container)));
                McwbStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Write the model to a file in the container format.
///
/// # Safety
/// `model` must be a live handle from `mcwb_model_load` and `path` a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mcwb_model_save(
    model: *const McwbModel,
    path: *const c_char,
) -> McwbStatus {
    guarded(|| {
        let container = match model_arg(model) {
            Ok(c) => c,
            Err(status) => return status,
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match container.save(path) {
            Ok(()) => McwbStatus::Ok,
            Err(e) => fail_with(&e),
        }
    })
}

/// Release a handle. Null is a no-op; a handle must be freed exactly once.
///
/// # Safety
/// `model` must be null or a live handle from `mcwb_model_load`.
#[no_mangle]
pub unsafe extern "C" fn mcwb_model_free(model: *mut McwbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of classes the boosted mapper predicts.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mcwb_model_num_classes(
    model: *const McwbModel,
    out: *mut usize,
) -> McwbStatus {
    guarded(|| {
        let container = match model_arg(model) {
            Ok(c) => c,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(McwbStatus::NullPointer, "out pointer is null");
        }
        match &container.ensemble {
            Some(ensemble) => {
                *out = ensemble.num_classes;
                McwbStatus::Ok
            }
            None => fail(McwbStatus::MissingSection, "model has no mapper section"),
        }
    })
}

/// Length of the raw-patch sample vector the mapper expects.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mcwb_model_sample_dim(
    model: *const McwbModel,
    out: *mut usize,
) -> McwbStatus {
    guarded(|| {
        let container = match model_arg(model) {
            Ok(c) => c,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(McwbStatus::NullPointer, "out pointer is null");
        }
        *out = container.config.sample_dim();
        McwbStatus::Ok
    })
}

/// Number of boosting stages in the mapper.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mcwb_model_stages(
    model: *const McwbModel,
    out: *mut usize,
) -> McwbStatus {
    guarded(|| {
        let container = match model_arg(model) {
            Ok(c) => c,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(McwbStatus::NullPointer, "out pointer is null");
        }
        match &container.ensemble {
            Some(ensemble) => {
                *out = ensemble.stages();
                McwbStatus::Ok
            }
            None => fail(McwbStatus::MissingSection, "model has no mapper section"),
        }
    })
}

/// Early-exit threshold the model was configured with.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mcwb_model_alpha(
    model: *const McwbModel,
    out: *mut f64,
) -> McwbStatus {
    guarded(|| {
        let container = match model_arg(model) {
            Ok(c) => c,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(McwbStatus::NullPointer, "out pointer is null");
        }
        *out = container.config.alpha;
        McwbStatus::Ok
    })
}

/// Full-ensemble class scores for one L1-normalized sample.
///
/// `sample_len` must equal the model's sample dimension and `scores_len` the
/// number of classes; scores are written in class order.
///
/// # Safety
/// `model` must be a live handle, `sample` readable for `sample_len` doubles
/// and `scores` writable for `scores_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mcwb_predict_strong(
    model: *const McwbModel,
    sample: *const f64,
    sample_len: usize,
    scores: *mut f64,
    scores_len: usize,
) -> McwbStatus {
    guarded(|| {
        let container = match model_arg(model) {
            Ok(c) => c,
            Err(status) => return status,
        };
        if sample.is_null() || scores.is_null() {
            return fail(McwbStatus::NullPointer, "sample or scores pointer is null");
        }
        let ensemble = match &container.ensemble {
            Some(e) => e,
            None => return fail(McwbStatus::MissingSection, "model has no mapper section"),
        };
        if scores_len != ensemble.num_classes {
            return fail(
                McwbStatus::InvalidInput,
                &format!(
                    "scores_len {scores_len} does not match {} classes",
                    ensemble.num_classes
                ),
            );
        }
        let input = std::slice::from_raw_parts(sample, sample_len);
        match predict_strong(ensemble, input) {
            Ok((values, _)) => {
                std::slice::from_raw_parts_mut(scores, scores_len).copy_from_slice(&values);
                McwbStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Early-exit prediction for one L1-normalized sample.
///
/// Writes the predicted class to `class_out`; `stages_out` (stages actually
/// evaluated) and `confidence_out` (final stopping confidence) may be null.
///
/// # Safety
/// `model` must be a live handle, `sample` readable for `sample_len` doubles,
/// `class_out` writable, and `stages_out` / `confidence_out` each null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mcwb_predict_early_exit(
    model: *const McwbModel,
    sample: *const f64,
    sample_len: usize,
    alpha: f64,
    class_out: *mut usize,
    stages_out: *mut usize,
    confidence_out: *mut f64,
) -> McwbStatus {
    guarded(|| {
        let container = match model_arg(model) {
            Ok(c) => c,
            Err(status) => return status,
        };
        if sample.is_null() || class_out.is_null() {
            return fail(McwbStatus::NullPointer, "sample or class_out pointer is null");
        }
        let ensemble = match &container.ensemble {
            Some(e) => e,
            None => return fail(McwbStatus::MissingSection, "model has no mapper section"),
        };
        let input = std::slice::from_raw_parts(sample, sample_len);
        match predict_early_exit(ensemble, input, alpha) {
            Ok(result) => {
                *class_out = result.predicted_class;
                if !stages_out.is_null() {
                    *stages_out = result.stages_evaluated;
                }
                if !confidence_out.is_null() {
                    *confidence_out = result.stop_confidence;
                }
                McwbStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Copy the calling thread's last error message into `buf`.
///
/// Returns the message length in bytes (without the NUL). When `buf` is
/// non-null and `len > 0`, writes at most `len - 1` bytes plus a NUL. The
/// message describes the most recent non-OK return on this thread.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mcwb_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}
