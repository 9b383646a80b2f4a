//! C ABI over the scriptenc parser and evaluation helpers.
//!
//! Every fallible call returns an [`SeStatus`]; on failure the message is
//! available from [`se_last_error_message`] on the same thread. Strings
//! handed out by this library must be released with [`se_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use scriptenc::classifier::LabelMatrix;
use scriptenc::evaluation;
use scriptenc::parser::{self, ParserConfig, Screenplay};
use scriptenc::trajectories;
use scriptenc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Domain = 4,
    InvalidArgument = 5,
    Internal = 6,
}

/// Parsed screenplay.
pub struct SeScreenplay {
    inner: Screenplay,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SeStatus, msg: impl Into<String>) -> SeStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> SeStatus {
    match e {
        Error::Parse { .. } | Error::EmptyScript => SeStatus::Parse,
        Error::DomainError(_) | Error::InvalidDistribution(_) | Error::NoPositives => SeStatus::Domain,
        Error::ShapeMismatch { .. } | Error::InvalidTensor(_) => SeStatus::InvalidArgument,
        _ => SeStatus::Internal,
    }
}

fn from_error(e: Error) -> SeStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, SeStatus> {
    if p.is_null() {
        return Err(fail(SeStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SeStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

fn guard(f: impl FnOnce() -> SeStatus + std::panic::UnwindSafe) -> SeStatus {
    std::panic::catch_unwind(f).unwrap_or_else(|_| fail(SeStatus::Internal, "panic inside scriptenc"))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn se_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn se_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse screenplay text with the default parser settings.
///
/// # Safety
/// `title` and `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_screenplay_parse(
    title: *const c_char,
    text: *const c_char,
    out: *mut *mut SeScreenplay,
) -> SeStatus {
    if out.is_null() {
        return fail(SeStatus::NullPointer, "null output pointer");
    }
    *out = ptr::null_mut();
    let (title, text) = match (read_str(title), read_str(text)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    let out = std::panic::AssertUnwindSafe(out);
    guard(move || match parser::parse_text(title, text, &ParserConfig::default()) {
        Ok(p) => {
            *out.0 = Box::into_raw(Box::new(SeScreenplay { inner: p.screenplay }));
            SeStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `sp` must come from [`se_screenplay_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn se_screenplay_free(sp: *mut SeScreenplay) {
    if !sp.is_null() {
        drop(Box::from_raw(sp));
    }
}

/// Number of scenes, or 0 for NULL.
///
/// # Safety
/// `sp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_screenplay_scene_count(sp: *const SeScreenplay) -> usize {
    sp.as_ref().map_or(0, |s| s.inner.scenes.len())
}

/// Title/Line/Scene/Type/Character/Text table as a new string.
///
/// # Safety
/// `sp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_screenplay_to_tsv(sp: *const SeScreenplay, out: *mut *mut c_char) -> SeStatus {
    if out.is_null() {
        return fail(SeStatus::NullPointer, "null output pointer");
    }
    *out = ptr::null_mut();
    let Some(sp) = sp.as_ref() else {
        return fail(SeStatus::NullPointer, "null screenplay");
    };
    match CString::new(parser::to_table(&sp.inner)) {
        Ok(s) => {
            *out = s.into_raw();
            SeStatus::Ok
        }
        Err(_) => fail(SeStatus::Internal, "table contains a NUL byte"),
    }
}

/// 2^entropy of `n` probabilities.
///
/// # Safety
/// `probs` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_tag_perplexity(probs: *const f64, n: usize, out: *mut f64) -> SeStatus {
    if probs.is_null() || out.is_null() {
        return fail(SeStatus::NullPointer, "null pointer argument");
    }
    let probs = std::slice::from_raw_parts(probs, n);
    match evaluation::tag_perplexity(probs) {
        Ok(v) => {
            *out = v;
            SeStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Micro-F1 of two row-major `rows × cols` 0/1 matrices.
///
/// # Safety
/// `pred` and `gold` must point to `rows * cols` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_micro_f1(
    pred: *const u8,
    gold: *const u8,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> SeStatus {
    if pred.is_null() || gold.is_null() || out.is_null() {
        return fail(SeStatus::NullPointer, "null pointer argument");
    }
    let Some(n) = rows.checked_mul(cols) else {
        return fail(SeStatus::InvalidArgument, "matrix size overflows");
    };
    let matrix = |p: *const u8| -> Result<LabelMatrix, SeStatus> {
        let data = std::slice::from_raw_parts(p, n);
        if data.iter().any(|&v| v > 1) {
            return Err(fail(SeStatus::InvalidArgument, "labels must be 0 or 1"));
        }
        let rows: Vec<Vec<u8>> = data.chunks(cols.max(1)).take(rows).map(<[u8]>::to_vec).collect();
        if rows.is_empty() {
            return Ok(LabelMatrix::zeros(0, cols));
        }
        LabelMatrix::from_rows(&rows).map_err(from_error)
    };
    let (p, g) = match (matrix(pred), matrix(gold)) {
        (Ok(p), Ok(g)) => (p, g),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match evaluation::micro_f1(&p, &g) {
        Ok(v) => {
            *out = v;
            SeStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Centered moving average of `n` values into `out` (also `n` values).
///
/// # Safety
/// `values` and `out` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn se_smooth(values: *const f64, n: usize, window: usize, out: *mut f64) -> SeStatus {
    if values.is_null() || out.is_null() {
        return fail(SeStatus::NullPointer, "null pointer argument");
    }
    match trajectories::smooth(std::slice::from_raw_parts(values, n), window) {
        Ok(v) => {
            std::slice::from_raw_parts_mut(out, n).copy_from_slice(&v);
            SeStatus::Ok
        }
        Err(e) => from_error(e),
    }
}
