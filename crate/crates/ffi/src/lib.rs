//! C ABI over the discovery pipeline.
//!
//! Handles are opaque and owned by the caller once returned; each has a
//! matching `_free`. Fallible calls return a `TcdStatus` and leave a message
//! for `tcd_last_error` on the calling thread. Output pointers are written
//! only on success. Matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::ArrayView2;
use tcd::aggregate::{discover, DiscoverConfig, Discovery};
use tcd::dgp::{generate, DgpConfig, GroundTruthInstance};
use tcd::eval::window_scores;
use tcd::graph::{NodeId, NodeSpace, TemporalDag};
use tcd::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Io = 4,
    Parse = 5,
    Panic = 6,
}

/// A directed edge between lagged variables, `from_var(t - from_lag)` to
/// `to_var(t - to_lag)`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TcdEdge {
    pub from_var: usize,
    pub from_lag: usize,
    pub to_var: usize,
    pub to_lag: usize,
}

pub struct TcdConfig(DiscoverConfig);

pub struct TcdDiscovery(Discovery);

pub struct TcdInstance(GroundTruthInstance);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TcdStatus {
    match e.root() {
        Error::Numerical(_) => TcdStatus::Numerical,
        Error::Io { .. } => TcdStatus::Io,
        Error::Parse(_) => TcdStatus::Parse,
        _ => TcdStatus::InvalidInput,
    }
}

struct Fail(TcdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TcdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TcdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TcdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TcdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn edges_of(dag: &TemporalDag) -> Vec<TcdEdge> {
    dag.node_edges()
        .map(|(a, b)| TcdEdge {
            from_var: a.var,
            from_lag: a.lag,
            to_var: b.var,
            to_lag: b.lag,
        })
        .collect()
}

/// Copy `src` into a caller buffer of `len` elements, which must be large
/// enough.
unsafe fn fill<T: Copy>(src: &[T], buf: *mut T, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err(Fail(
            TcdStatus::InvalidInput,
            format!("buffer holds {len} elements, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn tcd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tcd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default configuration.
#[no_mangle]
pub extern "C" fn tcd_config_new() -> *mut TcdConfig {
    Box::into_raw(Box::new(TcdConfig(DiscoverConfig::default())))
}

/// Configuration from a JSON object; missing keys take defaults.
///
/// Safety: `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcd_config_from_json(
    json: *const c_char,
    out: *mut *mut TcdConfig,
) -> TcdStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(TcdStatus::Parse, e.to_string()))?;
        let cfg: DiscoverConfig =
            serde_json::from_str(text).map_err(|e| Fail(TcdStatus::Parse, e.to_string()))?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(TcdConfig(cfg)));
        Ok(())
    })
}

/// Apply `f` to a copy and keep it only if it validates.
unsafe fn update(config: *mut TcdConfig, f: impl FnOnce(&mut DiscoverConfig)) -> TcdStatus {
    guard(|| {
        let TcdConfig(current) = config.as_mut().ok_or_else(|| null("config"))?;
        let mut next = current.clone();
        f(&mut next);
        next.validate()?;
        *current = next;
        Ok(())
    })
}

/// Safety: `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn tcd_config_set_tau_max(config: *mut TcdConfig, value: usize) -> TcdStatus {
    update(config, |c| c.tau_max = value)
}

/// Safety: `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn tcd_config_set_orderings(
    config: *mut TcdConfig,
    value: usize,
) -> TcdStatus {
    update(config, |c| {
        c.orderings = value;
        c.scales = None;
    })
}

/// Safety: `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn tcd_config_set_theta(config: *mut TcdConfig, value: f64) -> TcdStatus {
    update(config, |c| c.theta = value)
}

/// Safety: `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn tcd_config_set_alpha(config: *mut TcdConfig, value: f64) -> TcdStatus {
    update(config, |c| c.prune.alpha = value)
}

/// Safety: `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn tcd_config_set_seed(config: *mut TcdConfig, value: u64) -> TcdStatus {
    update(config, |c| c.seed = value)
}

/// Safety: `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn tcd_config_set_max_epochs(
    config: *mut TcdConfig,
    value: usize,
) -> TcdStatus {
    update(config, |c| c.train.max_epochs = value)
}

/// Safety: `config` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn tcd_config_free(config: *mut TcdConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Simulate `t` steps of `d` variables with every link at lag `tau`.
///
/// Safety: `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcd_simulate(
    t: usize,
    d: usize,
    tau: usize,
    seed: u64,
    out: *mut *mut TcdInstance,
) -> TcdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inst = generate(&DgpConfig::new(t, d, tau, seed))?;
        *out = Box::into_raw(Box::new(TcdInstance(inst)));
        Ok(())
    })
}

/// Safety: `instance` must come from `tcd_simulate`.
#[no_mangle]
pub unsafe extern "C" fn tcd_instance_rows(instance: *const TcdInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.series.nrows())
}

/// Safety: `instance` must come from `tcd_simulate`.
#[no_mangle]
pub unsafe extern "C" fn tcd_instance_cols(instance: *const TcdInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.series.ncols())
}

/// Copy the series, rows times cols values, into `buf`.
///
/// Safety: `instance` must come from `tcd_simulate`; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tcd_instance_series(
    instance: *const TcdInstance,
    buf: *mut f64,
    len: usize,
) -> TcdStatus {
    guard(|| {
        let inst = deref(instance, "instance")?;
        let values: Vec<f64> = inst.0.series.iter().copied().collect();
        fill(&values, buf, len)
    })
}

/// Safety: `instance` must come from `tcd_simulate`.
#[no_mangle]
pub unsafe extern "C" fn tcd_instance_edge_count(instance: *const TcdInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.dag.edges().len())
}

/// Copy the true window graph's edges into `buf`.
///
/// Safety: `instance` must come from `tcd_simulate`; `buf` must hold `len` edges.
#[no_mangle]
pub unsafe extern "C" fn tcd_instance_edges(
    instance: *const TcdInstance,
    buf: *mut TcdEdge,
    len: usize,
) -> TcdStatus {
    guard(|| fill(&edges_of(&deref(instance, "instance")?.0.dag), buf, len))
}

/// Safety: `instance` must come from `tcd_simulate` or be null.
#[no_mangle]
pub unsafe extern "C" fn tcd_instance_free(instance: *mut TcdInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Learn a window graph from one `rows x cols` series.
///
/// Safety: `data` must hold `rows * cols` doubles; `config` may be null for the
/// defaults; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcd_discover(
    data: *const f64,
    rows: usize,
    cols: usize,
    config: *const TcdConfig,
    out: *mut *mut TcdDiscovery,
) -> TcdStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(TcdStatus::InvalidInput, "rows * cols overflows".into()))?;
        let values = std::slice::from_raw_parts(data, len);
        let view = ArrayView2::from_shape((rows, cols), values)
            .map_err(|e| Fail(TcdStatus::InvalidInput, e.to_string()))?;
        let default = DiscoverConfig::default();
        let cfg = config.as_ref().map_or(&default, |c| &c.0);
        let result = discover(&[view], cfg)?;
        *out = Box::into_raw(Box::new(TcdDiscovery(result)));
        Ok(())
    })
}

/// Safety: `result` must come from `tcd_discover`.
#[no_mangle]
pub unsafe extern "C" fn tcd_discovery_vars(result: *const TcdDiscovery) -> usize {
    result.as_ref().map_or(0, |r| r.0.window.space().d())
}

/// Safety: `result` must come from `tcd_discover`.
#[no_mangle]
pub unsafe extern "C" fn tcd_discovery_tau_max(result: *const TcdDiscovery) -> usize {
    result.as_ref().map_or(0, |r| r.0.window.space().tau_max())
}

/// Safety: `result` must come from `tcd_discover`.
#[no_mangle]
pub unsafe extern "C" fn tcd_discovery_edge_count(result: *const TcdDiscovery) -> usize {
    result.as_ref().map_or(0, |r| r.0.window.edges().len())
}

/// Copy the window graph's edges into `buf`.
///
/// Safety: `result` must come from `tcd_discover`; `buf` must hold `len` edges.
#[no_mangle]
pub unsafe extern "C" fn tcd_discovery_edges(
    result: *const TcdDiscovery,
    buf: *mut TcdEdge,
    len: usize,
) -> TcdStatus {
    guard(|| fill(&edges_of(&deref(result, "result")?.0.window), buf, len))
}

/// Copy the `d x d` summary adjacency into `buf`; entry `(i, j)` is 1 when
/// variable `i` causes variable `j` at some lag.
///
/// Safety: `result` must come from `tcd_discover`; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tcd_discovery_summary(
    result: *const TcdDiscovery,
    buf: *mut u8,
    len: usize,
) -> TcdStatus {
    guard(|| {
        let s = &deref(result, "result")?.0.summary;
        let mut m = vec![0u8; s.d * s.d];
        for &(i, j) in &s.edges {
            m[i * s.d + j] = 1;
        }
        fill(&m, buf, len)
    })
}

/// Graph and diagnostics as JSON. Free with `tcd_string_free`; null on
/// failure.
///
/// Safety: `result` must come from `tcd_discover`.
#[no_mangle]
pub unsafe extern "C" fn tcd_discovery_report_json(result: *const TcdDiscovery) -> *mut c_char {
    let mut out = ptr::null_mut();
    guard(|| {
        let text = serde_json::to_string(&deref(result, "result")?.0)
            .map_err(|e| Fail(TcdStatus::Parse, e.to_string()))?;
        out = CString::new(text)
            .map_err(|e| Fail(TcdStatus::Parse, e.to_string()))?
            .into_raw();
        Ok(())
    });
    out
}

/// Safety: `result` must come from `tcd_discover` or be null.
#[no_mangle]
pub unsafe extern "C" fn tcd_discovery_free(result: *mut TcdDiscovery) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Safety: `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn tcd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn dag_from(edges: *const TcdEdge, n: usize, d: usize) -> Result<TemporalDag, Fail> {
    let edges: &[TcdEdge] = if n == 0 {
        &[]
    } else if edges.is_null() {
        return Err(null("edges"));
    } else {
        std::slice::from_raw_parts(edges, n)
    };
    let tau_max = edges
        .iter()
        .map(|e| e.from_lag.max(e.to_lag))
        .max()
        .unwrap_or(0);
    let space = NodeSpace::new(d, tau_max)?;
    let pairs = edges.iter().map(|e| {
        (
            NodeId::new(e.from_var, e.from_lag),
            NodeId::new(e.to_var, e.to_lag),
        )
    });
    Ok(TemporalDag::new(space, pairs)?)
}

/// Precision, recall and F1 of the edges ending at lag 0, over `d`
/// variables.
///
/// Safety: Edge arrays must hold the given counts; the outputs must be valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn tcd_window_scores(
    pred: *const TcdEdge,
    n_pred: usize,
    truth: *const TcdEdge,
    n_truth: usize,
    d: usize,
    precision: *mut f64,
    recall: *mut f64,
    f1: *mut f64,
) -> TcdStatus {
    guard(|| {
        if precision.is_null() || recall.is_null() || f1.is_null() {
            return Err(null("output"));
        }
        let (_, s) = window_scores(&dag_from(pred, n_pred, d)?, &dag_from(truth, n_truth, d)?)?;
        *precision = s.precision;
        *recall = s.recall;
        *f1 = s.f1;
        Ok(())
    })
}
