//! The C ABI exercised from Rust.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use ideval_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ideval_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn fig1() -> [CString; 4] {
    [
        c("h_1\tid_1\nh_2\tid_1\nh_3\tid_2\n"),
        c("i_1\tid_1\ni_2\tid_1\ni_3\tid_2\n"),
        c("i_1\tid_3\ni_2\tid_3\ni_3\tid_4\n"),
        c("hist:H:h_1\ty\nhist:H:h_2\ty\ncur:i_1\ty\ncur:i_2\ty\n\
           hist:H:h_3\tc\ncur:i_3\tc\nid:id_3\tm\nid:id_4\tr\n"),
    ]
}

#[test]
fn evaluates_strings_and_reads_metrics() {
    let [hist, base, exp, ideal] = fig1();
    let mut report = ptr::null_mut();
    let status = unsafe {
        ideval_evaluate_tsv(
            hist.as_ptr(),
            c("H").as_ptr(),
            base.as_ptr(),
            exp.as_ptr(),
            ideal.as_ptr(),
            IdevalMode::Separate,
            0.0,
            &mut report,
        )
    };
    assert_eq!(status, IdevalStatus::Ok);
    assert!(ideval_last_error().is_null());

    let mut impact = IdevalImpact::default();
    assert_eq!(unsafe { ideval_report_impact(report, &mut impact) }, IdevalStatus::Ok);
    assert!((impact.jaccard_distance - 0.5002).abs() < 5e-5, "{impact:?}");
    let mut quality = IdevalQuality::default();
    assert_eq!(unsafe { ideval_report_quality(report, &mut quality) }, IdevalStatus::Ok);
    assert_eq!(quality.iq, -1.0);

    let mut json = ptr::null();
    assert_eq!(unsafe { ideval_report_json(report, &mut json) }, IdevalStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(text).unwrap();
    assert_eq!(parsed["impact"]["jaccard_distance"], impact.jaccard_distance);
    // The string is cached on the handle.
    let mut again = ptr::null();
    unsafe { ideval_report_json(report, &mut again) };
    assert_eq!(json, again);
    unsafe { ideval_report_free(report) };
}

#[test]
fn quality_needs_an_ideal() {
    let [hist, base, exp, _] = fig1();
    let mut report = ptr::null_mut();
    let status = unsafe {
        ideval_evaluate_tsv(
            hist.as_ptr(),
            ptr::null(),
            base.as_ptr(),
            exp.as_ptr(),
            ptr::null(),
            IdevalMode::Separate,
            0.001,
            &mut report,
        )
    };
    assert_eq!(status, IdevalStatus::Ok);
    let mut q = IdevalQuality::default();
    assert_eq!(unsafe { ideval_report_quality(report, &mut q) }, IdevalStatus::NotAvailable);
    assert!(last_error().contains("no ideal"));
    unsafe { ideval_report_free(report) };
}

#[test]
fn failures_set_the_status_and_message() {
    let base = c("i_1\tid_1\n");
    let bad = c("i_1\tid_1\tminus-one\n");
    let mut report = ptr::null_mut();
    let status = unsafe {
        ideval_evaluate_tsv(
            ptr::null(),
            ptr::null(),
            base.as_ptr(),
            bad.as_ptr(),
            ptr::null(),
            IdevalMode::Separate,
            0.0,
            &mut report,
        )
    };
    assert_eq!(status, IdevalStatus::Parse);
    assert!(report.is_null());
    assert!(last_error().contains("exp.tsv:1"), "{}", last_error());

    let status = unsafe {
        ideval_evaluate_tsv(
            ptr::null(),
            ptr::null(),
            ptr::null(),
            base.as_ptr(),
            ptr::null(),
            IdevalMode::Separate,
            0.0,
            &mut report,
        )
    };
    assert_eq!(status, IdevalStatus::InvalidArgument);
    assert!(last_error().contains("base_tsv"));

    let missing = c("/nonexistent/run.json");
    let status = unsafe { ideval_evaluate_config(missing.as_ptr(), &mut report) };
    assert_eq!(status, IdevalStatus::Io);
    unsafe { ideval_report_free(ptr::null_mut()) };
}

#[test]
fn evaluates_a_config_file() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/fig05");
    let tmp = tempfile::tempdir().unwrap();
    for name in ["hist.tsv", "base.tsv", "exp.tsv", "ideal.tsv", "config.json"] {
        std::fs::copy(dir.join(name), tmp.path().join(name)).unwrap();
    }
    let cfg = c(tmp.path().join("config.json").to_str().unwrap());
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { ideval_evaluate_config(cfg.as_ptr(), &mut report) }, IdevalStatus::Ok);
    let mut q = IdevalQuality::default();
    unsafe { ideval_report_quality(report, &mut q) };
    assert!((q.iq - (-9.0 / 32.0)).abs() < 1e-12, "{q:?}");
    unsafe { ideval_report_free(report) };
}

#[test]
fn figures_reproduce() {
    let (mut passed, mut total) = (0, 0);
    assert_eq!(unsafe { ideval_check_figures(&mut passed, &mut total) }, IdevalStatus::Ok);
    assert_eq!((passed, total), (10, 10));
    let version = unsafe { CStr::from_ptr(ideval_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
