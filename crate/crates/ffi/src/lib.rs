//! C ABI over the translator.
//!
//! Every function returns a [`TtStatus`]. On failure a message is kept per
//! thread and can be read with [`tt_last_error`]. Strings handed out by the
//! library must be released with [`tt_string_free`]; handles with their own
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use treetrans::disambig::{content_leaves, DisambigError, Disambiguator};
use treetrans::parser::{detokenize, parse_formula, ParserOptions};
use treetrans::treelstm::{decode_greedy, Checkpoint, DecodeOptions, ModelError};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    BadCheckpoint = 5,
    UnknownSymbol = 6,
    Model = 7,
    Panic = 8,
}

/// Parser switches; see [`tt_parser_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TtParserOptions {
    pub command_end: bool,
    pub concat_end: bool,
    pub infix_to_prefix: bool,
    pub right_biggest: bool,
}

impl From<TtParserOptions> for ParserOptions {
    fn from(o: TtParserOptions) -> Self {
        ParserOptions {
            command_end: o.command_end,
            concat_end: o.concat_end,
            infix_to_prefix: o.infix_to_prefix,
            right_biggest: o.right_biggest,
        }
    }
}

/// A loaded translation checkpoint.
pub struct TtModel {
    ck: Checkpoint,
}

/// A loaded symbol disambiguator.
pub struct TtDisambiguator {
    d: Disambiguator,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(TtStatus, String);

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Io(_) => TtStatus::Io,
            ModelError::Checkpoint(_) => TtStatus::BadCheckpoint,
            _ => TtStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

impl From<DisambigError> for Failure {
    fn from(e: DisambigError) -> Self {
        let status = match e {
            DisambigError::UnknownSymbol(_) => TtStatus::UnknownSymbol,
            DisambigError::Checkpoint(_) => TtStatus::BadCheckpoint,
            DisambigError::InvalidConfig(_) => TtStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TtStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TtStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(TtStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(TtStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(TtStatus::Model, "result contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure(TtStatus::NullArgument, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn tt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn tt_parser_options_default() -> TtParserOptions {
    let o = ParserOptions::default();
    TtParserOptions {
        command_end: o.command_end,
        concat_end: o.concat_end,
        infix_to_prefix: o.infix_to_prefix,
        right_biggest: o.right_biggest,
    }
}

/// Parses `formula` into the canonical JSON tree and stores it in `*out_json`.
///
/// # Safety
/// `formula` must be a NUL-terminated string and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tt_parse(formula: *const c_char, opts: TtParserOptions, out_json: *mut *mut c_char) -> TtStatus {
    guard(|| {
        check_out(out_json)?;
        let f = text(formula, "formula")?;
        let t = parse_formula(f, &opts.into()).map_err(|e| Failure(TtStatus::Parse, e.to_string()))?;
        put_string(out_json, t.to_json())
    })
}

/// Loads a translation checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tt_model_load(path: *const c_char, out: *mut *mut TtModel) -> TtStatus {
    guard(|| {
        check_out(out)?;
        let ck = Checkpoint::load(Path::new(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(TtModel { ck }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`tt_model_load`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tt_model_free(model: *mut TtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Translates a generic formula into semantic LaTeX.
///
/// # Safety
/// `model` must be a live handle, `formula` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tt_translate(model: *const TtModel, formula: *const c_char, out: *mut *mut c_char) -> TtStatus {
    guard(|| {
        check_out(out)?;
        let m = model.as_ref().ok_or(Failure(TtStatus::NullArgument, "model is null".into()))?;
        let f = text(formula, "formula")?;
        let tree = parse_formula(f, &m.ck.parser).map_err(|e| Failure(TtStatus::Parse, e.to_string()))?;
        let decoded = decode_greedy(&m.ck.params, &m.ck.vocabs.input.encode(&tree), &DecodeOptions::default())?;
        let labels = m.ck.vocabs.output.decode(&decoded).map_err(|e| Failure(TtStatus::Model, e.to_string()))?;
        put_string(out, detokenize(&labels))
    })
}

/// Loads a disambiguator saved as JSON.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tt_disambiguator_load(path: *const c_char, out: *mut *mut TtDisambiguator) -> TtStatus {
    guard(|| {
        check_out(out)?;
        let p = text(path, "path")?;
        let json = std::fs::read_to_string(p).map_err(|e| Failure(TtStatus::Io, format!("{p}: {e}")))?;
        let d = Disambiguator::from_json(&json)?;
        *out = Box::into_raw(Box::new(TtDisambiguator { d }));
        Ok(())
    })
}

/// # Safety
/// `d` must come from [`tt_disambiguator_load`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tt_disambiguator_free(d: *mut TtDisambiguator) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Picks the semantic macro for `symbol` as it occurs in `formula`.
///
/// # Safety
/// `d` must be a live handle, the strings NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tt_disambiguate(
    d: *const TtDisambiguator,
    symbol: *const c_char,
    formula: *const c_char,
    out: *mut *mut c_char,
) -> TtStatus {
    guard(|| {
        check_out(out)?;
        let d = d.as_ref().ok_or(Failure(TtStatus::NullArgument, "disambiguator is null".into()))?;
        let sym = text(symbol, "symbol")?;
        let f = text(formula, "formula")?;
        let tree =
            parse_formula(f, &ParserOptions::default()).map_err(|e| Failure(TtStatus::Parse, e.to_string()))?;
        let leaves = content_leaves(&tree);
        let pos = leaves.iter().position(|l| l == sym);
        put_string(out, d.d.classify(sym, &leaves, pos)?.to_string())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
