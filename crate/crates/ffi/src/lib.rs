//! C ABI over the mtbench correlation, significance, scaling and scoring
//! routines.
//!
//! Every fallible entry point returns an [`MtbStatus`]; on anything other than
//! `MTB_STATUS_OK` a message is available from [`mtb_last_error`] on the same thread.
//! Models and providers are opaque handles that must be released with their
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mtbench::embeddings::{DeterministicProvider, EmbedError, EmbeddingProvider, FileStore};
use mtbench::estimator::{load_model, EstimatorError, EstimatorModel};
use mtbench::qa::{minmax_scale, QaError};
use mtbench::stats::{perm_input_test, CorrelationKind, StatsError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    /// Input is constant or too short for the statistic to be defined.
    Undefined = 4,
    Io = 5,
    Checksum = 6,
    Corrupt = 7,
    Version = 8,
    DimensionMismatch = 9,
    MissingReference = 10,
    Embedding = 11,
    Utf8 = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtbCorrelation {
    Pearson = 0,
    Spearman = 1,
    Kendall = 2,
}

impl From<MtbCorrelation> for CorrelationKind {
    fn from(c: MtbCorrelation) -> Self {
        match c {
            MtbCorrelation::Pearson => CorrelationKind::Pearson,
            MtbCorrelation::Spearman => CorrelationKind::Spearman,
            MtbCorrelation::Kendall => CorrelationKind::Kendall,
        }
    }
}

/// Loaded estimator checkpoint.
pub struct MtbModel {
    inner: EstimatorModel,
}

/// Source of token embeddings for [`mtb_model_score`].
pub struct MtbProvider {
    inner: Box<dyn EmbeddingProvider>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(MtbStatus, String);

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        let status = match e {
            StatsError::LengthMismatch { .. } => MtbStatus::LengthMismatch,
            StatsError::InvalidArgument(_) => MtbStatus::InvalidArgument,
            _ => MtbStatus::Undefined,
        };
        Failure(status, e.to_string())
    }
}

impl From<QaError> for Failure {
    fn from(e: QaError) -> Self {
        Failure(MtbStatus::InvalidArgument, e.to_string())
    }
}

impl From<EmbedError> for Failure {
    fn from(e: EmbedError) -> Self {
        let status = match e {
            EmbedError::DimensionMismatch { .. } => MtbStatus::DimensionMismatch,
            EmbedError::Io { .. } => MtbStatus::Io,
            _ => MtbStatus::Embedding,
        };
        Failure(status, e.to_string())
    }
}

impl From<EstimatorError> for Failure {
    fn from(e: EstimatorError) -> Self {
        let status = match &e {
            EstimatorError::Io { .. } => MtbStatus::Io,
            EstimatorError::Checksum { .. } => MtbStatus::Checksum,
            EstimatorError::Corrupt(_) => MtbStatus::Corrupt,
            EstimatorError::VersionMismatch { .. } => MtbStatus::Version,
            EstimatorError::DimensionMismatch { .. } | EstimatorError::DescriptorMismatch { .. } => {
                MtbStatus::DimensionMismatch
            }
            EstimatorError::MissingReference => MtbStatus::MissingReference,
            EstimatorError::Embed(_) => MtbStatus::Embedding,
            _ => MtbStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MtbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MtbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            MtbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MtbStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, n))
}

unsafe fn string<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(MtbStatus::Utf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = value;
    Ok(())
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next mtbench call on this thread.
#[no_mangle]
pub extern "C" fn mtb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mtb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Correlation of `x` and `y` (both length `n`) written to `*out`.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtb_correlation(
    kind: MtbCorrelation,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> MtbStatus {
    guard(|| {
        let x = slice(x, n, "x")?;
        let y = slice(y, n, "y")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CorrelationKind::from(kind).compute(x, y)?;
        Ok(())
    })
}

/// # Safety
/// See [`mtb_correlation`].
#[no_mangle]
pub unsafe extern "C" fn mtb_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> MtbStatus {
    mtb_correlation(MtbCorrelation::Pearson, x, y, n, out)
}

/// # Safety
/// See [`mtb_correlation`].
#[no_mangle]
pub unsafe extern "C" fn mtb_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> MtbStatus {
    mtb_correlation(MtbCorrelation::Spearman, x, y, n, out)
}

/// Kendall tau-b.
///
/// # Safety
/// See [`mtb_correlation`].
#[no_mangle]
pub unsafe extern "C" fn mtb_kendall(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> MtbStatus {
    mtb_correlation(MtbCorrelation::Kendall, x, y, n, out)
}

/// One-sided paired permutation test that `metric_a` correlates with `human`
/// better than `metric_b`. Writes the observed difference and the p-value.
///
/// # Safety
/// The three input arrays must hold `n` doubles; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtb_perm_input_test(
    metric_a: *const f64,
    metric_b: *const f64,
    human: *const f64,
    n: usize,
    runs: usize,
    seed: u64,
    kind: MtbCorrelation,
    delta_out: *mut f64,
    p_value_out: *mut f64,
) -> MtbStatus {
    guard(|| {
        let a = slice(metric_a, n, "metric_a")?;
        let b = slice(metric_b, n, "metric_b")?;
        let h = slice(human, n, "human")?;
        if delta_out.is_null() || p_value_out.is_null() {
            return Err(null("output pointer"));
        }
        let r = perm_input_test(a, b, h, runs, seed, kind.into())?;
        *delta_out = r.delta;
        *p_value_out = r.p_value;
        Ok(())
    })
}

/// Rescales `values` into `out` so the minimum maps to 0 and the maximum to 1
/// (every value maps to 0.5 when they are all equal). `min_out` / `max_out`
/// may be NULL.
///
/// # Safety
/// `values` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mtb_minmax_scale(
    values: *const f64,
    n: usize,
    out: *mut f64,
    min_out: *mut f64,
    max_out: *mut f64,
) -> MtbStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        if out.is_null() && n > 0 {
            return Err(null("out"));
        }
        let (scaled, bounds) = minmax_scale(v)?;
        if n > 0 {
            std::slice::from_raw_parts_mut(out, n).copy_from_slice(&scaled);
        }
        if !min_out.is_null() {
            *min_out = bounds.min;
        }
        if !max_out.is_null() {
            *max_out = bounds.max;
        }
        Ok(())
    })
}

unsafe fn new_provider(out: *mut *mut MtbProvider, inner: Box<dyn EmbeddingProvider>) -> Result<(), Failure> {
    write(out, Box::into_raw(Box::new(MtbProvider { inner })), "out")
}

/// Hash-seeded encoder for tests and demos; no model download needed.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtb_provider_deterministic(dim: usize, seed: u64, out: *mut *mut MtbProvider) -> MtbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        new_provider(out, Box::new(DeterministicProvider::new(dim, seed)?))
    })
}

/// Read-only view of an embedding store directory filled by `mtbench embed-cache`.
///
/// # Safety
/// `dir` and `identity` must be NUL-terminated UTF-8; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtb_provider_file_store(
    dir: *const c_char,
    identity: *const c_char,
    dim: usize,
    out: *mut *mut MtbProvider,
) -> MtbStatus {
    guard(|| {
        let dir = PathBuf::from(string(dir, "dir")?);
        let identity = string(identity, "identity")?;
        if out.is_null() {
            return Err(null("out"));
        }
        new_provider(out, Box::new(FileStore::open(dir, identity, dim)?))
    })
}

/// # Safety
/// `provider` must come from an `mtb_provider_*` constructor and not be freed
/// already. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn mtb_provider_free(provider: *mut MtbProvider) {
    if !provider.is_null() {
        drop(Box::from_raw(provider));
    }
}

/// Loads a checkpoint written by `mtbench train`.
///
/// # Safety
/// `path` must be NUL-terminated UTF-8; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtb_model_load(path: *const c_char, out: *mut *mut MtbModel) -> MtbStatus {
    guard(|| {
        let path = string(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = load_model(path)?;
        write(out, Box::into_raw(Box::new(MtbModel { inner })), "out")
    })
}

/// # Safety
/// `model` must come from [`mtb_model_load`] and not be freed already.
/// NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn mtb_model_free(model: *mut MtbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Embedding width the model expects, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtb_model_dim(model: *const MtbModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// 0 = reference-based, 1 = quality estimation, 2 = multi-task; -1 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtb_model_mode(model: *const MtbModel) -> i32 {
    model.as_ref().map_or(-1, |m| m.inner.mode().code() as i32)
}

/// Scores one translation. `reference` may be NULL for quality-estimation
/// models, or when `force_qe` asks a multi-task model for its QE head.
/// `score_out` receives the [0, 1] prediction and `descaled_out` (nullable)
/// the same value mapped back onto the training score range.
///
/// # Safety
/// Handles must be live; strings NUL-terminated UTF-8; `score_out` writable.
#[no_mangle]
pub unsafe extern "C" fn mtb_model_score(
    model: *const MtbModel,
    provider: *const MtbProvider,
    src: *const c_char,
    mt: *const c_char,
    reference: *const c_char,
    force_qe: bool,
    score_out: *mut f64,
    descaled_out: *mut f64,
) -> MtbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let provider = provider.as_ref().ok_or_else(|| null("provider"))?;
        let src = string(src, "src")?;
        let mt = string(mt, "mt")?;
        let reference = if reference.is_null() { None } else { Some(string(reference, "reference")?) };
        if score_out.is_null() {
            return Err(null("score_out"));
        }
        let p = model.inner.score_texts(provider.inner.as_ref(), src, mt, reference, force_qe)?;
        *score_out = p.score;
        if !descaled_out.is_null() {
            *descaled_out = p.descaled;
        }
        Ok(())
    })
}
