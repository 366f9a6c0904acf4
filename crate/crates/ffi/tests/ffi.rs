use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use treetrans::disambig::{extract_instances, DisambigConfig, Disambiguator};
use treetrans::parser::ParserOptions;
use treetrans::pipeline::{gen_synthetic_corpus, parse_pairs, VocabOptions, Vocabs};
use treetrans::treelstm::{Checkpoint, ModelConfig, Params};
use treetrans_ffi::*;

/// Writes an untrained checkpoint and a disambiguator into `dir`.
fn fixtures(dir: &Path) -> (PathBuf, PathBuf) {
    let (trees, _) = parse_pairs(&gen_synthetic_corpus(1, 200), &ParserOptions::default());
    let vocabs = Vocabs::build(&trees, &VocabOptions::default());
    let cfg = ModelConfig::new(vocabs.input.len(), vocabs.output.len(), 8);
    let ck = Checkpoint::new(Params::init(&cfg, 1).unwrap(), vocabs, ParserOptions::default()).unwrap();
    let model = dir.join("m.ckpt");
    ck.save(&model).unwrap();
    let (inst, _) = extract_instances(&trees);
    let d = Disambiguator::new(&inst, DisambigConfig::default()).unwrap();
    let dis = dir.join("d.json");
    std::fs::write(&dis, d.to_json()).unwrap();
    (model, dis)
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    tt_string_free(s);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tt_last_error()).to_string_lossy().into_owned() }
}

#[test]
fn parse_through_the_c_abi() {
    let mut out = ptr::null_mut();
    let opts = TtParserOptions { command_end: false, concat_end: false, infix_to_prefix: false, right_biggest: false };
    let st = unsafe { tt_parse(c(r"\frac{a}{b}").as_ptr(), opts, &mut out) };
    assert_eq!(st, TtStatus::Ok);
    let json = unsafe { take(out) };
    let want = treetrans::parser::parse_formula(r"\frac{a}{b}", &ParserOptions::plain()).unwrap().to_json();
    assert_eq!(json, want);
    assert_eq!(last_error(), "");

    let st = unsafe { tt_parse(c(r"\frac{a}{b").as_ptr(), tt_parser_options_default(), &mut out) };
    assert_eq!(st, TtStatus::Parse);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { tt_parse(ptr::null(), opts, &mut out) }, TtStatus::NullArgument);
    assert_eq!(unsafe { tt_parse(c("x").as_ptr(), opts, ptr::null_mut()) }, TtStatus::NullArgument);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { tt_parse(bad.as_ptr().cast(), opts, &mut out) }, TtStatus::InvalidUtf8);
}

#[test]
fn handles_and_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dis) = fixtures(dir.path());
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(tt_model_load(c(model.to_str().unwrap()).as_ptr(), &mut m), TtStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(tt_translate(m, c(r"\sin{x}+1").as_ptr(), &mut out), TtStatus::Ok);
        let direct = treetrans::cli::translate_formula(&Checkpoint::load(&model).unwrap(), r"\sin{x}+1").unwrap();
        assert_eq!(take(out), direct);
        assert_eq!(tt_translate(m, c(r"\frac{").as_ptr(), &mut out), TtStatus::Parse);
        tt_model_free(m);
        tt_model_free(ptr::null_mut());
        assert_eq!(tt_translate(ptr::null(), c("x").as_ptr(), &mut out), TtStatus::NullArgument);

        let mut missing = ptr::null_mut();
        assert_eq!(tt_model_load(c("/nonexistent/m.ckpt").as_ptr(), &mut missing), TtStatus::Io);
        assert!(missing.is_null());
        let junk = dir.path().join("junk.ckpt");
        std::fs::write(&junk, b"not a checkpoint").unwrap();
        assert_eq!(tt_model_load(c(junk.to_str().unwrap()).as_ptr(), &mut missing), TtStatus::BadCheckpoint);

        let mut d = ptr::null_mut();
        assert_eq!(tt_disambiguator_load(c(dis.to_str().unwrap()).as_ptr(), &mut d), TtStatus::Ok);
        assert_eq!(tt_disambiguate(d, c(r"\pi").as_ptr(), c(r"2\pi r").as_ptr(), &mut out), TtStatus::Ok);
        assert_eq!(take(out), r"\cpi");
        assert_eq!(tt_disambiguate(d, c(r"\nosuch").as_ptr(), c("x").as_ptr(), &mut out), TtStatus::UnknownSymbol);
        assert!(last_error().contains("nosuch"));
        tt_disambiguator_free(d);
        assert_eq!(tt_disambiguator_load(c(junk.to_str().unwrap()).as_ptr(), &mut d), TtStatus::BadCheckpoint);
    }
}

#[test]
fn header_lists_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/treetrans.h")).unwrap();
    for f in [
        "tt_version",
        "tt_last_error",
        "tt_parser_options_default",
        "tt_parse",
        "tt_model_load",
        "tt_model_free",
        "tt_translate",
        "tt_disambiguator_load",
        "tt_disambiguator_free",
        "tt_disambiguate",
        "tt_string_free",
        "TT_STATUS_BAD_CHECKPOINT",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(Path::parent).unwrap().join("libtreetrans_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let (model, dis) = fixtures(dir.path());
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let bin = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg(root.join("tests/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&bin).arg(&model).arg(&dis).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with('{'));
    assert_eq!(lines[2], r"\cpi");
    assert_eq!(lines[3], env!("CARGO_PKG_VERSION"));
}
