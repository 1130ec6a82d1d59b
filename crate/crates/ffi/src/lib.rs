//! C ABI over the pure parts of confmeta: QuickStatements value rendering,
//! parsing and batch validation, LLM output parsing, grounding and micro
//! precision/recall/F1.
//!
//! Conventions: every fallible function returns a [`CmStatus`]; on failure
//! [`cm_last_error`] describes the problem. Strings handed out are owned by
//! the caller and released with [`cm_string_free`]. Structured results
//! (rows, grounding maps, values, reports) travel as JSON text.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use confmeta::extract::{ground_check, parse_output, Source};
use confmeta::model::{MappingVocabulary, Value};
use confmeta::qs::{parse_line_value, render_value, validate_batch, LineValue};
use confmeta::records::{Row, Task};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    IoError = 5,
    Panic = 6,
}

/// A mapping vocabulary (labels to Wikidata items and properties).
pub struct CmVocabulary(MappingVocabulary);

/// Source text indexed for repeated grounding checks.
pub struct CmSource(Source);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(CmStatus, String);

impl Failure {
    fn new(status: CmStatus, message: impl std::fmt::Display) -> Self {
        Failure(status, message.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CmStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("panic inside confmeta");
            CmStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(CmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure::new(CmStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn task(raw: &str) -> Result<Task, Failure> {
    raw.parse().map_err(|e| Failure::new(CmStatus::InvalidArgument, e))
}

fn json<T: serde::de::DeserializeOwned>(raw: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(raw).map_err(|e| Failure::new(CmStatus::InvalidArgument, format!("{what}: {e}")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(CmStatus::NullPointer, "output pointer is null"));
    }
    let c = CString::new(s).map_err(|e| Failure::new(CmStatus::InvalidArgument, e))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn put_json(out: *mut *mut c_char, v: &impl serde::Serialize) -> Result<(), Failure> {
    let s = serde_json::to_string(v).map_err(|e| Failure::new(CmStatus::InvalidArgument, e))?;
    put_string(out, s)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The vocabulary shipped with the library.
#[no_mangle]
pub extern "C" fn cm_vocabulary_builtin() -> *mut CmVocabulary {
    Box::into_raw(Box::new(CmVocabulary(MappingVocabulary::builtin())))
}

/// Loads a vocabulary JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_vocabulary_load(path: *const c_char, out: *mut *mut CmVocabulary) -> CmStatus {
    guard(|| {
        let path = text(path, "path")?;
        if out.is_null() {
            return Err(Failure::new(CmStatus::NullPointer, "output pointer is null"));
        }
        let v = MappingVocabulary::load(Path::new(path)).map_err(|e| Failure::new(CmStatus::IoError, e))?;
        *out = Box::into_raw(Box::new(CmVocabulary(v)));
        Ok(())
    })
}

/// # Safety
/// `v` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_vocabulary_free(v: *mut CmVocabulary) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// Renders a value (its JSON form) as a QuickStatements V1 token.
///
/// # Safety
/// `value_json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_qs_render_value(value_json: *const c_char, out: *mut *mut c_char) -> CmStatus {
    guard(|| {
        let v: Value = json(text(value_json, "value_json")?, "value_json")?;
        v.validate().map_err(|e| Failure::new(CmStatus::InvalidArgument, e))?;
        put_string(out, render_value(&v))
    })
}

/// Parses a V1 value token into its JSON form; `LAST` yields `"LAST"`.
///
/// # Safety
/// `token` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_qs_parse_value(token: *const c_char, out: *mut *mut c_char) -> CmStatus {
    guard(|| {
        let token = text(token, "token")?;
        match parse_line_value(token).map_err(|e| Failure::new(CmStatus::ParseError, e))? {
            LineValue::Last => put_json(out, &"LAST"),
            LineValue::Value(v) => put_json(out, &v),
        }
    })
}

/// Validates batch text against a vocabulary. Writes the violation count to
/// `violations` and, when `report_json` is not null, the full report.
///
/// # Safety
/// `vocab` must be a live handle, `batch` a NUL-terminated string and
/// `violations` writable; `report_json` may be null.
#[no_mangle]
pub unsafe extern "C" fn cm_qs_validate(
    vocab: *const CmVocabulary,
    batch: *const c_char,
    violations: *mut usize,
    report_json: *mut *mut c_char,
) -> CmStatus {
    guard(|| {
        if vocab.is_null() || violations.is_null() {
            return Err(Failure::new(CmStatus::NullPointer, "vocab or violations is null"));
        }
        let report = validate_batch(text(batch, "batch")?, &(*vocab).0);
        *violations = report.violations.len();
        if !report_json.is_null() {
            put_json(report_json, &report)?;
        }
        Ok(())
    })
}

/// Micro precision, recall and F1 from counts; a zero denominator gives 1.0.
///
/// # Safety
/// `p`, `r` and `f1` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_micro_prf(tp: u64, fp: u64, fn_: u64, p: *mut f64, r: *mut f64, f1: *mut f64) -> CmStatus {
    guard(|| {
        if p.is_null() || r.is_null() || f1.is_null() {
            return Err(Failure::new(CmStatus::NullPointer, "output pointer is null"));
        }
        (*p, *r, *f1) = confmeta::eval::micro_prf(tp, fp, fn_);
        Ok(())
    })
}

/// Parses a model response for `task` (e.g. `"counts"`) into a JSON array
/// of rows (column to string or null).
///
/// # Safety
/// `task_name` and `raw` must be NUL-terminated strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_parse_output(task_name: *const c_char, raw: *const c_char, out: *mut *mut c_char) -> CmStatus {
    guard(|| {
        let t = task(text(task_name, "task")?)?;
        let rows = parse_output(text(raw, "raw")?, t).map_err(|e| Failure::new(CmStatus::ParseError, e))?;
        put_json(out, &rows)
    })
}

/// Grounding of each row in `rows_json` against `source_text`, as a JSON
/// array of column-to-status maps.
///
/// # Safety
/// All string arguments must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_ground_check(
    task_name: *const c_char,
    rows_json: *const c_char,
    source_text: *const c_char,
    out: *mut *mut c_char,
) -> CmStatus {
    guard(|| {
        let t = task(text(task_name, "task")?)?;
        let rows: Vec<Row> = json(text(rows_json, "rows_json")?, "rows_json")?;
        put_json(out, &ground_check(&rows, t, text(source_text, "source_text")?))
    })
}

/// Indexes `source_text` once for many [`cm_source_ground_row`] calls.
///
/// # Safety
/// `source_text` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_source_new(source_text: *const c_char, out: *mut *mut CmSource) -> CmStatus {
    guard(|| {
        let s = text(source_text, "source_text")?;
        if out.is_null() {
            return Err(Failure::new(CmStatus::NullPointer, "output pointer is null"));
        }
        *out = Box::into_raw(Box::new(CmSource(Source::new(s))));
        Ok(())
    })
}

/// Grounding of one row (a JSON object) against an indexed source.
///
/// # Safety
/// `source` must be a live handle, the strings NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_source_ground_row(
    source: *const CmSource,
    task_name: *const c_char,
    row_json: *const c_char,
    out: *mut *mut c_char,
) -> CmStatus {
    guard(|| {
        if source.is_null() {
            return Err(Failure::new(CmStatus::NullPointer, "source is null"));
        }
        let t = task(text(task_name, "task")?)?;
        let row: Row = json(text(row_json, "row_json")?, "row_json")?;
        put_json(out, &(*source).0.ground_row(t, &row))
    })
}

/// # Safety
/// `s` must come from [`cm_source_new`] (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_source_free(s: *mut CmSource) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
