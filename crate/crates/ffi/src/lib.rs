//! C interface to the nma-forge engine.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_from_*`
//! or `*_run` functions and released by the matching `*_free`. Every fallible
//! call returns an [`NmaStatus`]; on failure the message is kept per thread
//! and can be fetched with [`nma_last_error`]. Strings handed out by the
//! library are owned by the caller and released with [`nma_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nma_forge::harness;
use nma_forge::planner::{self, Allocation};
use nma_forge::{Error, EvidenceNetwork, ExperimentConfig, ExperimentRecord, PlanCandidate};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Rejected network, parameters, configuration or index.
    InvalidInput = 3,
    /// File system failure.
    Io = 4,
    /// A chain failed its acceptance-rate check or another statistical
    /// failure occurred.
    Statistical = 5,
    /// The library panicked; this is a bug.
    Panic = 6,
}

/// An evidence network.
pub struct NmaNetwork(EvidenceNetwork);

/// Candidate trial additions ranked by resulting irregularity.
pub struct NmaPlanList(Vec<PlanCandidate>);

/// A finished experiment with its per-replication results and aggregate.
pub struct NmaExperiment(ExperimentRecord);

/// Network-level summary of a finished experiment.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NmaTotals {
    pub n_trials: usize,
    pub normalised_irregularity: f64,
    pub sd_bar: f64,
    pub abs_dp_bar: f64,
    pub abs_dp_bar_norm: f64,
    pub abs_dsucra_bar: f64,
    pub abs_dsucra_bar_norm: f64,
    pub abs_dd_bar: f64,
    pub mean_tau: f64,
    pub sd_tau: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NmaStatus {
    match e {
        Error::Io { .. } => NmaStatus::Io,
        e if e.is_input_error() => NmaStatus::InvalidInput,
        _ => NmaStatus::Statistical,
    }
}

struct Fail(NmaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NmaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NmaStatus::Panic
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(NmaStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(NmaStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(NmaStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(NmaStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn boxed<T>(x: T) -> *mut T {
    Box::into_raw(Box::new(x))
}

/// Copy of the last error message on this thread, or null if none.
/// Release with [`nma_string_free`].
#[no_mangle]
pub extern "C" fn nma_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nma_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a network description (JSON, trials or `K` shorthand).
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_network_from_json(json: *const c_char, out: *mut *mut NmaNetwork) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let net = EvidenceNetwork::from_json_str(text(json, "json")?)?;
        *slot = boxed(NmaNetwork(net));
        Ok(())
    })
}

/// Builds a two-arm network from trial counts per treatment pair, listed
/// in the order (1,2), (1,3), ..., (N-1,N).
///
/// # Safety
/// `counts` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_network_from_pair_counts(
    n_treatments: usize,
    counts: *const u32,
    len: usize,
    n_per_arm: u32,
    out: *mut *mut NmaNetwork,
) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let counts = std::slice::from_raw_parts(arg(counts, "counts")?, len);
        let expected = n_treatments * n_treatments.saturating_sub(1) / 2;
        if len != expected {
            return Err(Fail(
                NmaStatus::InvalidInput,
                format!("{n_treatments} treatments need {expected} pair counts, got {len}"),
            ));
        }
        let net = EvidenceNetwork::from_pair_counts(n_treatments, counts, n_per_arm).map_err(Error::from)?;
        *slot = boxed(NmaNetwork(net));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn nma_network_free(net: *mut NmaNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_network_n_trials(net: *const NmaNetwork, out: *mut usize) -> NmaStatus {
    guard(|| {
        *self::out(out, "out")? = arg(net, "net")?.0.n_trials();
        Ok(())
    })
}

/// Degree irregularity divided by the squared mean degree.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_network_irregularity(net: *const NmaNetwork, out: *mut f64) -> NmaStatus {
    guard(|| {
        *self::out(out, "out")? = arg(net, "net")?.0.geometry().normalised_irregularity;
        Ok(())
    })
}

/// Full geometry summary as JSON.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_network_geometry_json(net: *const NmaNetwork, out: *mut *mut c_char) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let g = arg(net, "net")?.0.geometry();
        let json = serde_json::to_string(&g).map_err(|e| Fail(NmaStatus::Panic, e.to_string()))?;
        *slot = owned_string(json);
        Ok(())
    })
}

/// Enumerates ways of adding `budget` two-arm trials, best first. With
/// `any_split` false all trials go to one comparison.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_plan_enumerate(
    net: *const NmaNetwork,
    budget: u32,
    any_split: bool,
    out: *mut *mut NmaPlanList,
) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let allocation = if any_split { Allocation::AnySplit } else { Allocation::Single };
        let plans = planner::enumerate_plans(&arg(net, "net")?.0, budget, allocation)?;
        *slot = boxed(NmaPlanList(plans));
        Ok(())
    })
}

/// # Safety
/// `list` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn nma_plan_list_free(list: *mut NmaPlanList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// Number of candidates, or 0 for a null handle.
///
/// # Safety
/// `list` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nma_plan_list_len(list: *const NmaPlanList) -> usize {
    list.as_ref().map_or(0, |l| l.0.len())
}

unsafe fn plan<'a>(list: *const NmaPlanList, index: usize) -> Result<&'a PlanCandidate, Fail> {
    let l = arg(list, "list")?;
    l.0.get(index).ok_or_else(|| {
        Fail(
            NmaStatus::InvalidInput,
            format!("candidate index {index} out of range (0..{})", l.0.len()),
        )
    })
}

/// Label of one candidate, such as `T1-T4 x10`.
///
/// # Safety
/// `list` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_plan_list_label(list: *const NmaPlanList, index: usize, out: *mut *mut c_char) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        *slot = owned_string(plan(list, index)?.label());
        Ok(())
    })
}

/// Irregularity of the network after adding one candidate.
///
/// # Safety
/// `list` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_plan_list_irregularity(list: *const NmaPlanList, index: usize, out: *mut f64) -> NmaStatus {
    guard(|| {
        *self::out(out, "out")? = plan(list, index)?.resulting_irregularity;
        Ok(())
    })
}

/// The ranked candidates as CSV.
///
/// # Safety
/// `list` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_plan_list_csv(list: *const NmaPlanList, out: *mut *mut c_char) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        *slot = owned_string(planner::plans_csv(&arg(list, "list")?.0));
        Ok(())
    })
}

/// Runs the experiment described by a JSON config. Relative `network_file`
/// paths resolve against `base_dir` (the working directory if null). A
/// non-null `seed` overrides the config's seed.
///
/// # Safety
/// `config_json` must be a nul-terminated string, `base_dir` null or one,
/// `seed` null or readable, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nma_experiment_run_json(
    config_json: *const c_char,
    base_dir: *const c_char,
    seed: *const u64,
    out: *mut *mut NmaExperiment,
) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let json = text(config_json, "config_json")?;
        let dir = if base_dir.is_null() { "." } else { text(base_dir, "base_dir")? };
        let config = ExperimentConfig::from_json_str(json, Path::new(dir), seed.as_ref().copied())?;
        let record = harness::run_experiment(&config)?;
        *slot = boxed(NmaExperiment(record));
        Ok(())
    })
}

/// # Safety
/// `exp` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn nma_experiment_free(exp: *mut NmaExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_experiment_totals(exp: *const NmaExperiment, out: *mut NmaTotals) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let r = &arg(exp, "exp")?.0;
        let t = &r.aggregate.totals;
        *slot = NmaTotals {
            n_trials: r.config.network.n_trials(),
            normalised_irregularity: r.geometry.normalised_irregularity,
            sd_bar: t.sd_bar,
            abs_dp_bar: t.abs_dp_bar,
            abs_dp_bar_norm: t.abs_dp_bar_norm,
            abs_dsucra_bar: t.abs_dsucra_bar,
            abs_dsucra_bar_norm: t.abs_dsucra_bar_norm,
            abs_dd_bar: t.abs_dd_bar,
            mean_tau: r.aggregate.mean_tau,
            sd_tau: r.aggregate.sd_tau,
        };
        Ok(())
    })
}

/// Per-replication results as CSV, identical to `replications.csv`.
///
/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nma_experiment_replications_csv(exp: *const NmaExperiment, out: *mut *mut c_char) -> NmaStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        *slot = owned_string(harness::replications_csv(&arg(exp, "exp")?.0));
        Ok(())
    })
}

/// Writes the experiment's output files into `dir`, creating it if needed.
///
/// # Safety
/// `exp` must be a live handle and `dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nma_experiment_write(exp: *const NmaExperiment, dir: *const c_char) -> NmaStatus {
    guard(|| {
        let record = &arg(exp, "exp")?.0;
        let dir = Path::new(text(dir, "dir")?);
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        harness::write_record(record, dir)?;
        Ok(())
    })
}
