//! C interface to the selector.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `_free` function. Every fallible call returns an [`L2pStatus`]
//! and, on failure, leaves a message readable through
//! [`l2p_last_error_message`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use l2p_select::io::read_dense_csv;
use l2p_select::problem::normalize;
use l2p_select::solver::run;
use l2p_select::{Dataset, Error, FeatureRanking, Matrix, SolverConfig, SolverState};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum L2pStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Solver settings. Obtain defaults from [`l2p_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct L2pConfig {
    pub p: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub weight_floor: f64,
    pub d: usize,
}

impl From<L2pConfig> for SolverConfig {
    fn from(c: L2pConfig) -> Self {
        SolverConfig {
            p: c.p,
            max_outer_iterations: c.max_iterations,
            relative_objective_tolerance: c.tolerance,
            weight_floor: c.weight_floor,
            feature_count_d: c.d,
        }
    }
}

/// Opaque labeled dataset.
pub struct L2pDataset {
    inner: Dataset,
}

/// Opaque outcome of one selection run.
pub struct L2pResult {
    state: SolverState,
    ranking: FeatureRanking,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> L2pStatus {
    match err {
        Error::Io { .. } => L2pStatus::Io,
        Error::Parse { .. } | Error::Json(_) => L2pStatus::Parse,
        Error::SvdFailure | Error::Singular { .. } | Error::NonFinite(_) | Error::ZeroRank => L2pStatus::Numerical,
        Error::SweepFailed { source, .. } => status_of(source),
        _ => L2pStatus::InvalidArgument,
    }
}

/// Runs `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (L2pStatus, String)>) -> L2pStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => L2pStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            L2pStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (L2pStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (L2pStatus, String) {
    (L2pStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failure on this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn l2p_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn l2p_config_default() -> L2pConfig {
    let c = SolverConfig::default();
    L2pConfig {
        p: c.p,
        max_iterations: c.max_outer_iterations,
        tolerance: c.relative_objective_tolerance,
        weight_floor: c.weight_floor,
        d: c.feature_count_d,
    }
}

/// Builds a dataset from a row-major `rows × cols` feature block and 1-based
/// class labels.
///
/// # Safety
/// `features` must point to `rows * cols` doubles and `labels` to `rows`
/// values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2p_dataset_from_dense(
    features: *const f64,
    rows: usize,
    cols: usize,
    labels: *const usize,
    class_count: usize,
    out: *mut *mut L2pDataset,
) -> L2pStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if features.is_null() || labels.is_null() {
            return Err(null("features or labels"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or((L2pStatus::InvalidArgument, "rows * cols overflows".to_string()))?;
        let values = std::slice::from_raw_parts(features, len).to_vec();
        let labels = std::slice::from_raw_parts(labels, rows).to_vec();
        let matrix = Matrix::from_vec(rows, cols, values).map_err(lib_err)?;
        let inner = Dataset::new(matrix, labels, class_count).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(L2pDataset { inner }));
        Ok(())
    })
}

/// Reads a dense CSV file whose last column holds the class label.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2p_dataset_read_csv(
    path: *const c_char,
    has_header: bool,
    out: *mut *mut L2pDataset,
) -> L2pStatus {
    guard(|| {
        if out.is_null() || path.is_null() {
            return Err(null("path or out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (L2pStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let inner = read_dense_csv(path, has_header, None).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(L2pDataset { inner }));
        Ok(())
    })
}

/// Standardizes every feature to zero mean and unit variance, in place.
///
/// # Safety
/// `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn l2p_dataset_normalize(dataset: *mut L2pDataset) -> L2pStatus {
    guard(|| {
        let ds = dataset.as_mut().ok_or_else(|| null("dataset"))?;
        ds.inner = normalize(&ds.inner).map_err(lib_err)?;
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2p_dataset_shape(
    dataset: *const L2pDataset,
    rows: *mut usize,
    cols: *mut usize,
) -> L2pStatus {
    guard(|| {
        let ds = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if rows.is_null() || cols.is_null() {
            return Err(null("rows or cols"));
        }
        *rows = ds.inner.samples();
        *cols = ds.inner.feature_count();
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn l2p_dataset_free(dataset: *mut L2pDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Runs the selector. A run that hits the iteration budget still succeeds;
/// check [`l2p_result_converged`].
///
/// # Safety
/// `dataset` and `config` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2p_select(
    dataset: *const L2pDataset,
    config: *const L2pConfig,
    out: *mut *mut L2pResult,
) -> L2pStatus {
    guard(|| {
        let ds = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (state, ranking) = run(&ds.inner, &SolverConfig::from(*cfg)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(L2pResult { state, ranking }));
        Ok(())
    })
}

unsafe fn copy_out<T: Copy>(
    src: &[T],
    buffer: *mut T,
    capacity: usize,
    written: *mut usize,
) -> Result<(), (L2pStatus, String)> {
    if written.is_null() {
        return Err(null("written"));
    }
    *written = src.len();
    if capacity < src.len() {
        return Err((
            L2pStatus::BufferTooSmall,
            format!("buffer holds {capacity}, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buffer, src.len());
    }
    Ok(())
}

/// Copies the selected features (0-based, best first) into `buffer`. The
/// required length is stored in `written` even when the buffer is too small.
///
/// # Safety
/// `buffer` must hold `capacity` values; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2p_result_selected(
    result: *const L2pResult,
    buffer: *mut usize,
    capacity: usize,
    written: *mut usize,
) -> L2pStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        copy_out(&r.ranking.selected, buffer, capacity, written)
    })
}

/// Copies every feature's weight row norm, indexed by 0-based feature.
///
/// # Safety
/// As for [`l2p_result_selected`].
#[no_mangle]
pub unsafe extern "C" fn l2p_result_row_norms(
    result: *const L2pResult,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> L2pStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        copy_out(&r.ranking.row_norms, buffer, capacity, written)
    })
}

/// Final objective value, or NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn l2p_result_objective(result: *const L2pResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.state.objective())
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn l2p_result_iterations(result: *const L2pResult) -> usize {
    result.as_ref().map_or(0, |r| r.state.iteration)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn l2p_result_converged(result: *const L2pResult) -> bool {
    result.as_ref().is_some_and(|r| r.state.converged)
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn l2p_result_free(result: *mut L2pResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
