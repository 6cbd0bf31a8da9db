//! C ABI over the `ideval` engine.
//!
//! Conventions:
//!
//! - Every function returns an [`IdevalStatus`]; results come back through
//!   out-pointers. On failure the out-pointers are left untouched and
//!   [`ideval_last_error`] describes the problem.
//! - Strings passed in are NUL-terminated UTF-8. Strings handed out are owned
//!   by the library and stay valid as documented on each function.
//! - An [`IdevalReport`] is opaque; release it with [`ideval_report_free`].
//! - Panics never cross the boundary; they surface as
//!   [`IdevalStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use ideval::config::{HistSpec, RunConfig};
use ideval::metrics::{evaluate, EvalOptions};
use ideval::report::to_json;
use ideval::transform::DEFAULT_K;
use ideval::{AssignmentMode, Error, MetricsReport};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdevalStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    InvalidArgument = 1,
    /// Inputs failed validation (missing weights, bad clusterings, ...).
    Validation = 2,
    /// An input file or string could not be parsed.
    Parse = 3,
    /// A file could not be read.
    Io = 4,
    /// The requested value does not exist, e.g. quality without an ideal.
    NotAvailable = 5,
    /// A worked example did not reproduce.
    Mismatch = 6,
    /// A bug: the library panicked.
    Internal = 7,
}

/// Assignment mode of the two schemes being compared.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdevalMode {
    /// Both schemes label the same clustering.
    Separate = 0,
    /// Memberships may differ as well.
    Simultaneous = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdevalImpact {
    pub jaccard_distance: f64,
    pub split_rate: f64,
    pub merge_rate: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdevalQuality {
    pub good_split_rate: f64,
    pub bad_split_rate: f64,
    pub good_merge_rate: f64,
    pub bad_merge_rate: f64,
    pub delta_precision: f64,
    pub delta_recall: f64,
    pub iq: f64,
}

/// An evaluated metrics report.
pub struct IdevalReport {
    report: MetricsReport,
    json: Option<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let mut message = message.into();
    message.retain(|c| c != '\0');
    let c = CString::new(message).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> IdevalStatus {
    match e {
        Error::Parse { .. } => IdevalStatus::Parse,
        Error::Io { .. } => IdevalStatus::Io,
        _ => IdevalStatus::Validation,
    }
}

struct Failure(IdevalStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), format!("{}: {e}", e.kind()))
    }
}

/// Runs `f`, recording failures and containing panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IdevalStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IdevalStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let what = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {what}"));
            IdevalStatus::Internal
        }
    }
}

fn invalid(what: &str) -> Failure {
    Failure(IdevalStatus::InvalidArgument, what.to_string())
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn required_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    optional_str(s, name)?.ok_or_else(|| invalid(&format!("`{name}` must not be null")))
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn optional_str<'a>(s: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if s.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(s)
        .to_str()
        .map(Some)
        .map_err(|_| invalid(&format!("`{name}` is not valid UTF-8")))
}

fn store_report(out: *mut *mut IdevalReport, report: MetricsReport) {
    let handle = Box::new(IdevalReport { report, json: None });
    // SAFETY: callers check `out` for null before evaluating.
    unsafe { *out = Box::into_raw(handle) };
}

/// Message describing the last failure on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ideval_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ideval_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Evaluates the run described by a JSON configuration file.
///
/// # Safety
/// `config_path` is a valid NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ideval_evaluate_config(
    config_path: *const c_char,
    out: *mut *mut IdevalReport,
) -> IdevalStatus {
    guard(|| {
        let path = required_str(config_path, "config_path")?;
        if out.is_null() {
            return Err(invalid("`out` must not be null"));
        }
        let inputs = RunConfig::from_path(Path::new(path))?.load_inputs()?;
        store_report(out, evaluate(&inputs, &EvalOptions::default())?);
        Ok(())
    })
}

/// Evaluates in-memory clustering files.
///
/// `hist_tsv`, `base_tsv` and `exp_tsv` hold `item<TAB>cluster_id[<TAB>weight]`
/// lines; `hist_tsv` may be null for no history. `ideal_tsv` holds
/// `element<TAB>class` lines and may be null. A non-positive `k` selects the
/// default synthetic-id weight.
///
/// # Safety
/// Non-null strings are valid and NUL-terminated; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ideval_evaluate_tsv(
    hist_tsv: *const c_char,
    hist_epoch: *const c_char,
    base_tsv: *const c_char,
    exp_tsv: *const c_char,
    ideal_tsv: *const c_char,
    mode: IdevalMode,
    k: f64,
    out: *mut *mut IdevalReport,
) -> IdevalStatus {
    guard(|| {
        let hist = optional_str(hist_tsv, "hist_tsv")?;
        let epoch = optional_str(hist_epoch, "hist_epoch")?.unwrap_or("H");
        let base = required_str(base_tsv, "base_tsv")?;
        let exp = required_str(exp_tsv, "exp_tsv")?;
        let ideal = optional_str(ideal_tsv, "ideal_tsv")?;
        if out.is_null() {
            return Err(invalid("`out` must not be null"));
        }

        // Route the strings through the file-based loader under fixed names.
        let files: [(&str, Option<&str>); 4] = [
            ("hist.tsv", hist),
            ("base.tsv", Some(base)),
            ("exp.tsv", Some(exp)),
            ("ideal.tsv", ideal),
        ];
        let cfg = RunConfig {
            hist: hist
                .map(|_| HistSpec {
                    path: PathBuf::from("hist.tsv"),
                    epoch_label: epoch.to_string(),
                    epoch_weight: 1.0,
                })
                .into_iter()
                .collect(),
            base: PathBuf::from("base.tsv"),
            exp: PathBuf::from("exp.tsv"),
            mode: match mode {
                IdevalMode::Separate => AssignmentMode::Separate,
                IdevalMode::Simultaneous => AssignmentMode::Simultaneous,
            },
            align_items: false,
            k: if k > 0.0 { k } else { DEFAULT_K },
            hist_scale_factor: 1.0,
            ideal: ideal.map(|_| PathBuf::from("ideal.tsv")),
            output: None,
        };
        let inputs = cfg.load_inputs_with(|p| {
            files
                .iter()
                .find(|(name, _)| p == Path::new(name))
                .and_then(|(_, text)| *text)
                .map(str::to_string)
                .ok_or_else(|| Error::InvalidConfig(format!("no input named {}", p.display())))
        })?;
        store_report(out, evaluate(&inputs, &EvalOptions::default())?);
        Ok(())
    })
}

/// # Safety
/// `report` is a live handle or null.
unsafe fn report_ref<'a>(report: *const IdevalReport) -> Result<&'a IdevalReport, Failure> {
    report
        .as_ref()
        .ok_or_else(|| invalid("`report` must not be null"))
}

/// Copies the impact metrics (fractions) into `out`.
///
/// # Safety
/// `report` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ideval_report_impact(
    report: *const IdevalReport,
    out: *mut IdevalImpact,
) -> IdevalStatus {
    guard(|| {
        let r = report_ref(report)?;
        let out = out.as_mut().ok_or_else(|| invalid("`out` must not be null"))?;
        let i = &r.report.impact;
        *out = IdevalImpact {
            jaccard_distance: i.jaccard_distance,
            split_rate: i.split_rate,
            merge_rate: i.merge_rate,
        };
        Ok(())
    })
}

/// Copies the quality metrics into `out`; `NotAvailable` when the run had
/// no ideal clustering.
///
/// # Safety
/// `report` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ideval_report_quality(
    report: *const IdevalReport,
    out: *mut IdevalQuality,
) -> IdevalStatus {
    guard(|| {
        let r = report_ref(report)?;
        let out = out.as_mut().ok_or_else(|| invalid("`out` must not be null"))?;
        let q = r.report.quality.as_ref().ok_or_else(|| {
            Failure(
                IdevalStatus::NotAvailable,
                "the report has no quality metrics (no ideal clustering)".into(),
            )
        })?;
        *out = IdevalQuality {
            good_split_rate: q.good_split_rate,
            bad_split_rate: q.bad_split_rate,
            good_merge_rate: q.good_merge_rate,
            bad_merge_rate: q.bad_merge_rate,
            delta_precision: q.delta_precision,
            delta_recall: q.delta_recall,
            iq: q.iq,
        };
        Ok(())
    })
}

/// The report as pretty-printed JSON. The string is owned by the report and
/// lives until [`ideval_report_free`].
///
/// # Safety
/// `report` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ideval_report_json(
    report: *mut IdevalReport,
    out: *mut *const c_char,
) -> IdevalStatus {
    guard(|| {
        let r = report
            .as_mut()
            .ok_or_else(|| invalid("`report` must not be null"))?;
        if out.is_null() {
            return Err(invalid("`out` must not be null"));
        }
        let json = r.json.get_or_insert_with(|| {
            CString::new(to_json(&r.report)).expect("JSON has no NUL bytes")
        });
        *out = json.as_ptr();
        Ok(())
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ideval_report_free(report: *mut IdevalReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Recomputes the embedded worked examples. Writes how many figures
/// reproduced and how many exist; returns `Mismatch` unless all do.
///
/// # Safety
/// Non-null out-pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn ideval_check_figures(passed: *mut u32, total: *mut u32) -> IdevalStatus {
    guard(|| {
        let mut ok = 0u32;
        let all = ideval::figures::fixtures();
        for f in all {
            if f.check()?.passed() {
                ok += 1;
            }
        }
        if let Some(p) = passed.as_mut() {
            *p = ok;
        }
        if let Some(t) = total.as_mut() {
            *t = all.len() as u32;
        }
        if ok as usize == all.len() {
            Ok(())
        } else {
            Err(Failure(
                IdevalStatus::Mismatch,
                format!("{ok}/{} figures reproduce", all.len()),
            ))
        }
    })
}
