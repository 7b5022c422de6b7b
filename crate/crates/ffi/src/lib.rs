//! C ABI over the `fairge` library.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `*_new`/`*_from_*` function and released by the matching `*_free`.
//! Fallible calls return a [`FairgeStatus`]; on failure the message is kept
//! per thread and can be fetched with [`fairge_last_error_message`]. Strings
//! returned by the library must be released with [`fairge_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fairge::lab::{limit_check, Variant};
use fairge::{
    run_experiment, top_m_eigenpairs, Dataset, FairgeError, FairnessReport, Graph, SpectralTruncation, TrainConfig,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairgeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    DimensionMismatch = 5,
    NoConvergence = 6,
    Divergence = 7,
    UndefinedMetric = 8,
    Degenerate = 9,
    BufferTooSmall = 10,
    Io = 11,
    Other = 12,
    Panic = 13,
}

impl From<&FairgeError> for FairgeStatus {
    fn from(e: &FairgeError) -> Self {
        match e {
            FairgeError::Parse { .. }
            | FairgeError::MissingColumn(_)
            | FairgeError::NonContiguousIds(_)
            | FairgeError::Json(_)
            | FairgeError::Csv(_) => FairgeStatus::Parse,
            FairgeError::EmptyInput | FairgeError::InvalidArgument(_) | FairgeError::NoPresentNodes => {
                FairgeStatus::InvalidArgument
            }
            FairgeError::DimensionMismatch(_) | FairgeError::OracleCap { .. } => FairgeStatus::DimensionMismatch,
            FairgeError::NoConvergence { .. } => FairgeStatus::NoConvergence,
            FairgeError::Divergence { .. } => FairgeStatus::Divergence,
            FairgeError::UndefinedMetric(_) => FairgeStatus::UndefinedMetric,
            FairgeError::Degenerate(_) | FairgeError::RepeatedDominant { .. } | FairgeError::NotEstimable(_) => {
                FairgeStatus::Degenerate
            }
            FairgeError::Io(_) => FairgeStatus::Io,
            _ => FairgeStatus::Other,
        }
    }
}

/// Undirected graph handle.
pub struct FairgeGraph(Graph);
/// Graph plus node attributes, sensitive column and labels.
pub struct FairgeDataset(Dataset);
/// Leading eigenpairs of a graph's adjacency matrix.
pub struct FairgeTruncation(SpectralTruncation);
/// Outcome of one training run.
pub struct FairgeReport(FairnessReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(FairgeStatus, String);

impl From<FairgeError> for Failure {
    fn from(e: FairgeError) -> Self {
        Failure(FairgeStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FairgeStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FairgeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            FairgeStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FairgeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller passes a NUL-terminated string that outlives the call.
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FairgeStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles were produced by this library and are live.
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: `out` is non-null and writable by contract.
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < src.len() {
        return Err(Failure(
            FairgeStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    // SAFETY: `out` has room for `len >= src.len()` doubles.
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fairge_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// Release with [`fairge_string_free`].
#[no_mangle]
pub extern "C" fn fairge_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fairge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a graph on `n` nodes from `n_edges` pairs stored flat in `edges`
/// (`edges[2k]`, `edges[2k + 1]`).
///
/// # Safety
/// `edges` must point to `2 * n_edges` values (may be null when `n_edges` is
/// 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fairge_graph_from_edges(
    n: usize,
    edges: *const usize,
    n_edges: usize,
    out: *mut *mut FairgeGraph,
) -> FairgeStatus {
    guard(|| {
        let flat: &[usize] = if n_edges == 0 {
            &[]
        } else if edges.is_null() {
            return Err(null("edges"));
        } else {
            std::slice::from_raw_parts(edges, 2 * n_edges)
        };
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        store(out, FairgeGraph(Graph::from_edges(n, &pairs)?))
    })
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fairge_graph_node_count(graph: *const FairgeGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// Undirected edge count, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fairge_graph_edge_count(graph: *const FairgeGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.edge_count())
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fairge_graph_free(graph: *mut FairgeGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Computes the `m` largest-magnitude adjacency eigenpairs.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fairge_graph_eigenpairs(
    graph: *const FairgeGraph,
    m: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut FairgeTruncation,
) -> FairgeStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        store(out, FairgeTruncation(top_m_eigenpairs(&g.0, m, tol, max_iter)?))
    })
}

/// Number of retained eigenpairs, or 0 for a null handle.
///
/// # Safety
/// `trunc` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fairge_truncation_len(trunc: *const FairgeTruncation) -> usize {
    trunc.as_ref().map_or(0, |t| t.0.m())
}

/// Copies the eigenvalues (descending magnitude) into `out[0..len]`.
///
/// # Safety
/// `trunc` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fairge_truncation_eigenvalues(
    trunc: *const FairgeTruncation,
    out: *mut f64,
    len: usize,
) -> FairgeStatus {
    guard(|| copy_out(&handle(trunc, "truncation")?.0.eigenvalues, out, len))
}

/// Copies eigenvector `index` (length n) into `out[0..len]`.
///
/// # Safety
/// `trunc` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fairge_truncation_eigenvector(
    trunc: *const FairgeTruncation,
    index: usize,
    out: *mut f64,
    len: usize,
) -> FairgeStatus {
    guard(|| {
        let t = &handle(trunc, "truncation")?.0;
        if index >= t.m() {
            return Err(Failure(
                FairgeStatus::InvalidArgument,
                format!("eigenvector {index} out of range for {} pairs", t.m()),
            ));
        }
        copy_out(&t.vector(index), out, len)
    })
}

/// # Safety
/// `trunc` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fairge_truncation_free(trunc: *mut FairgeTruncation) {
    if !trunc.is_null() {
        drop(Box::from_raw(trunc));
    }
}

/// Parses an edge list and an attribute CSV (with `sensitive` and `label`
/// columns) into a dataset.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fairge_dataset_from_text(
    edge_list: *const c_char,
    attributes_csv: *const c_char,
    out: *mut *mut FairgeDataset,
) -> FairgeStatus {
    guard(|| {
        let edges = str_arg(edge_list, "edge_list")?;
        let attrs = str_arg(attributes_csv, "attributes_csv")?;
        store(out, FairgeDataset(Dataset::from_text(edges, attrs)?))
    })
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fairge_dataset_node_count(dataset: *const FairgeDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.graph.n())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fairge_dataset_free(dataset: *mut FairgeDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Trains and evaluates once. `config_json` is a training config object
/// (missing keys take defaults) or null for all defaults.
///
/// # Safety
/// `dataset` must be a live handle; `name` and non-null `config_json` must be
/// NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fairge_train(
    dataset: *const FairgeDataset,
    name: *const c_char,
    config_json: *const c_char,
    out: *mut *mut FairgeReport,
) -> FairgeStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let name = str_arg(name, "name")?;
        let config: TrainConfig = if config_json.is_null() {
            TrainConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(FairgeError::from)?
        };
        let exp = run_experiment(&ds.0, name, &config, None)?;
        store(out, FairgeReport(exp.report))
    })
}

/// Test accuracy as a fraction, or NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fairge_report_accuracy(report: *const FairgeReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.acc)
}

/// Statistical parity gap in percent, or NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fairge_report_delta_sp(report: *const FairgeReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.d_sp)
}

/// Equal opportunity gap in percent, or NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fairge_report_delta_eo(report: *const FairgeReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.d_eo)
}

/// The report as JSON, or null for a null handle. Release with
/// [`fairge_string_free`].
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fairge_report_to_json(report: *const FairgeReport) -> *mut c_char {
    match report.as_ref().map(|r| r.0.to_json()) {
        Some(Ok(json)) => into_c_string(json),
        Some(Err(e)) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fairge_report_free(report: *mut FairgeReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Alignment check for one variant (`"lemma1"`, `"thm1"`, `"thm2"` or
/// `"thm3"`) on the dataset's graph and sensitive column. Writes the final
/// cosine and the predicted limit.
///
/// # Safety
/// `dataset` must be a live handle; `variant` NUL-terminated; `cos_out` and
/// `limit_out` writable.
#[no_mangle]
pub unsafe extern "C" fn fairge_limit_check(
    dataset: *const FairgeDataset,
    variant: *const c_char,
    k_max: usize,
    cos_out: *mut f64,
    limit_out: *mut f64,
) -> FairgeStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.0;
        let variant: Variant = str_arg(variant, "variant")?.parse()?;
        if cos_out.is_null() || limit_out.is_null() {
            return Err(null("output"));
        }
        let series = limit_check(variant, &ds.graph, &ds.sensitive, k_max)?;
        *cos_out = *series.cos_k.last().expect("series has k_max + 1 entries");
        *limit_out = series.limit;
        Ok(())
    })
}
