//! C ABI over the `stimclone` simulator.
//!
//! Configurations and scans are opaque heap handles owned by the caller and
//! released with their `*_free` function. Every fallible call returns an
//! [`ScStatus`]; on failure [`sc_last_error_message`] describes the cause.
//! No panic crosses the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use stimclone::analysis::{exact_fidelity, extract_ratio, fidelity_from_ratio, CountSource, FidelityEstimate};
use stimclone::cli::{parse_config, render_csv, CliError};
use stimclone::detection::{Basis, Scheme};
use stimclone::experiment::{run_scan, ExperimentConfig, RunMode, ScanResult};
use stimclone::source::PdcConfig;
use stimclone::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Numerical = 4,
    OutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScBasis {
    Vh = 0,
    Diagonal = 1,
    Circular = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScScheme {
    N20 = 0,
    N11 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScMode {
    Exact = 0,
    MonteCarlo = 1,
    Both = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScSource {
    Exact = 0,
    Sampled = 1,
}

/// Opaque experiment configuration.
pub struct ScConfig(ExperimentConfig);

/// Opaque scan result.
pub struct ScScan(ScanResult);

/// One scan row. Counts are −1 when the scan drew no samples.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScRecord {
    pub delay_fs: f64,
    pub gamma: f64,
    pub scheme: ScScheme,
    pub basis: ScBasis,
    pub expected_rate_hz: f64,
    pub expected_count: f64,
    pub sampled_count: i64,
    pub trigger_count: i64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScFidelity {
    pub r: f64,
    pub sigma_r: f64,
    pub fidelity: f64,
    pub sigma_fidelity: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> ScStatus {
    match err {
        Error::Config { .. } | Error::Usage(_) => ScStatus::InvalidConfig,
        _ => ScStatus::Numerical,
    }
}

fn fail(status: ScStatus, msg: impl Into<String>) -> ScStatus {
    set_error(msg);
    status
}

fn fail_with(err: Error) -> ScStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, turning a panic into [`ScStatus::Panic`].
fn guard(f: impl FnOnce() -> ScStatus) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(ScStatus::Panic, msg)
        }
    }
}

fn basis_of(b: ScBasis) -> Basis {
    match b {
        ScBasis::Vh => Basis::LinearVH,
        ScBasis::Diagonal => Basis::Linear45,
        ScBasis::Circular => Basis::Circular,
    }
}

fn sc_basis(b: Basis) -> ScBasis {
    match b {
        Basis::LinearVH => ScBasis::Vh,
        Basis::Linear45 => ScBasis::Diagonal,
        Basis::Circular => ScBasis::Circular,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; empty when nothing has failed.
#[no_mangle]
pub extern "C" fn sc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses and validates a JSON configuration (or a run manifest).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_config_from_json(json: *const c_char, out: *mut *mut ScConfig) -> ScStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(ScStatus::NullPointer, "null argument");
        }
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(e) => return fail(ScStatus::InvalidUtf8, e.to_string()),
        };
        match parse_config(text) {
            Ok(cfg) => {
                unsafe { *out = Box::into_raw(Box::new(ScConfig(cfg))) };
                ScStatus::Ok
            }
            Err(CliError::Run(e)) => fail_with(e),
            Err(e) => fail(ScStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// The reference operating point.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_config_default(out: *mut *mut ScConfig) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScStatus::NullPointer, "null argument");
        }
        unsafe { *out = Box::into_raw(Box::new(ScConfig(ExperimentConfig::reference()))) };
        ScStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_config_free(cfg: *mut ScConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_config_set_seed(cfg: *mut ScConfig, seed: u64) -> ScStatus {
    match unsafe { cfg.as_mut() } {
        Some(c) => {
            c.0.seed = seed;
            ScStatus::Ok
        }
        None => fail(ScStatus::NullPointer, "null config"),
    }
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_config_set_mode(cfg: *mut ScConfig, mode: ScMode) -> ScStatus {
    match unsafe { cfg.as_mut() } {
        Some(c) => {
            c.0.mode = match mode {
                ScMode::Exact => RunMode::Exact,
                ScMode::MonteCarlo => RunMode::MonteCarlo,
                ScMode::Both => RunMode::Both,
            };
            ScStatus::Ok
        }
        None => fail(ScStatus::NullPointer, "null config"),
    }
}

/// Runs a scan on `threads` workers (0 means one per core). Output does not
/// depend on the worker count.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_scan_run(cfg: *const ScConfig, threads: u32, out: *mut *mut ScScan) -> ScStatus {
    guard(|| {
        let Some(cfg) = (unsafe { cfg.as_ref() }) else {
            return fail(ScStatus::NullPointer, "null config");
        };
        if out.is_null() {
            return fail(ScStatus::NullPointer, "null output");
        }
        let pool = match rayon_pool(threads) {
            Ok(p) => p,
            Err(e) => return fail(ScStatus::Numerical, e),
        };
        match pool.install(|| run_scan(&cfg.0)) {
            Ok(scan) => {
                unsafe { *out = Box::into_raw(Box::new(ScScan(scan))) };
                ScStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

fn rayon_pool(threads: u32) -> Result<rayon::ThreadPool, String> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        b = b.num_threads(threads as usize);
    }
    b.build().map_err(|e| e.to_string())
}

/// # Safety
/// `scan` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_scan_free(scan: *mut ScScan) {
    if !scan.is_null() {
        drop(unsafe { Box::from_raw(scan) });
    }
}

/// # Safety
/// `scan` must be a live handle and `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_scan_len(scan: *const ScScan, len: *mut usize) -> ScStatus {
    match (unsafe { scan.as_ref() }, unsafe { len.as_mut() }) {
        (Some(s), Some(l)) => {
            *l = s.0.records.len();
            ScStatus::Ok
        }
        _ => fail(ScStatus::NullPointer, "null argument"),
    }
}

/// # Safety
/// `scan` must be a live handle and `row` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_scan_get(scan: *const ScScan, index: usize, row: *mut ScRecord) -> ScStatus {
    let (Some(s), Some(row)) = (unsafe { scan.as_ref() }, unsafe { row.as_mut() }) else {
        return fail(ScStatus::NullPointer, "null argument");
    };
    let Some(r) = s.0.records.get(index) else {
        return fail(
            ScStatus::OutOfRange,
            format!("row {index} out of range for {} rows", s.0.records.len()),
        );
    };
    let count = |c: Option<u64>| c.map_or(-1, |v| i64::try_from(v).unwrap_or(i64::MAX));
    *row = ScRecord {
        delay_fs: r.delay_fs,
        gamma: r.gamma,
        scheme: match r.scheme {
            Scheme::PolarizerPlusBs => ScScheme::N20,
            Scheme::PbsCoincidence => ScScheme::N11,
        },
        basis: sc_basis(r.basis),
        expected_rate_hz: r.expected_rate_hz,
        expected_count: r.expected_count,
        sampled_count: count(r.sampled_count),
        trigger_count: count(r.trigger_count),
    };
    ScStatus::Ok
}

/// CSV table for one basis, identical to the command-line output. Release
/// the string with [`sc_string_free`].
///
/// # Safety
/// `scan` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_scan_csv(scan: *const ScScan, basis: ScBasis, out: *mut *mut c_char) -> ScStatus {
    guard(|| {
        let Some(s) = (unsafe { scan.as_ref() }) else {
            return fail(ScStatus::NullPointer, "null scan");
        };
        if out.is_null() {
            return fail(ScStatus::NullPointer, "null output");
        }
        let want = basis_of(basis);
        match render_csv(&s.0).into_iter().find(|(b, _)| *b == want) {
            Some((_, csv)) => {
                unsafe { *out = CString::new(csv).expect("csv has no NUL").into_raw() };
                ScStatus::Ok
            }
            None => fail(ScStatus::OutOfRange, format!("basis `{want}` is not in the scan")),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Peak/base ratio and clone fidelity of one basis in a scan.
///
/// # Safety
/// `scan` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_scan_fidelity(
    scan: *const ScScan,
    basis: ScBasis,
    source: ScSource,
    out: *mut ScFidelity,
) -> ScStatus {
    guard(|| {
        let (Some(s), Some(out)) = (unsafe { scan.as_ref() }, unsafe { out.as_mut() }) else {
            return fail(ScStatus::NullPointer, "null argument");
        };
        let basis = basis_of(basis);
        let source = match source {
            ScSource::Exact => CountSource::Exact,
            ScSource::Sampled => CountSource::Sampled,
        };
        match extract_ratio(&s.0, basis, source) {
            Ok(ratio) => {
                let e = FidelityEstimate::from_ratio(basis, source, ratio);
                *out = ScFidelity {
                    r: e.r,
                    sigma_r: e.sigma_r,
                    fidelity: e.fidelity,
                    sigma_fidelity: e.sigma_fidelity,
                };
                ScStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// `F = (2R + 1)/(2R + 2)`.
#[no_mangle]
pub extern "C" fn sc_fidelity_from_ratio(r: f64) -> f64 {
    fidelity_from_ratio(r)
}

/// Exact clone and anti-clone fidelities for a single input photon with
/// overlap `gamma`, polarized along the reference state of `basis`.
///
/// # Safety
/// `clone` and `anticlone` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_exact_fidelity(
    kappa_t: f64,
    dephasing: f64,
    gamma: f64,
    basis: ScBasis,
    clone: *mut f64,
    anticlone: *mut f64,
) -> ScStatus {
    guard(|| {
        if clone.is_null() || anticlone.is_null() {
            return fail(ScStatus::NullPointer, "null output");
        }
        if !(0.0..=1.0).contains(&gamma) {
            return fail(ScStatus::OutOfRange, format!("gamma {gamma} is outside [0, 1]"));
        }
        let pdc = PdcConfig {
            kappa_t,
            dephasing,
            ..PdcConfig::default()
        };
        match exact_fidelity(&pdc, gamma, basis_of(basis).reference_polarization()) {
            Ok(f) => {
                unsafe {
                    *clone = f.clone;
                    *anticlone = f.anticlone;
                }
                ScStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}
