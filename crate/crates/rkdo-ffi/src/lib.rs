//! C ABI for the response-field training library.
//!
//! Conventions: every fallible call returns an [`RkdoStatus`]; `RKDO_STATUS_OK`
//! means any `out` parameters were written. Handles are opaque pointers owned
//! by the library and released through the matching `_free` function (null is
//! accepted and ignored). On failure a thread-local message describes the
//! error; fetch it with [`rkdo_last_error_message`]. No call unwinds across
//! the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rkdo_core::embedding::EmbeddingTable;
use rkdo_core::field::{
    debiased_target, field_loss, kernel_field, supervisor_update, ResponseField,
    TemperatureSchedule,
};
use rkdo_core::optim::{
    train_icon_debiased, train_rkdo, OptimizerKind, OptimizerSettings, RKDOConfig, TrainingTrace,
};
use rkdo_core::rng::{substream, StreamPurpose};
use rkdo_core::Error;

/// Result of every fallible library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkdoStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Arguments failed validation; the error message has details.
    InvalidArgument = 2,
    /// A loss or gradient stopped being finite.
    NumericalError = 3,
    IoError = 4,
    ParseError = 5,
    /// An internal invariant broke; the handle states are unspecified.
    InternalPanic = 6,
}

/// An owned n-by-n row-stochastic response field.
pub struct RkdoField {
    inner: ResponseField,
}

/// An owned n-by-d embedding table.
pub struct RkdoEmbeddings {
    inner: EmbeddingTable,
}

/// An owned training trace: per-step losses plus the final embeddings.
pub struct RkdoTrace {
    inner: TrainingTrace,
}

/// Training hyperparameters, plain-old-data so callers can fill them field by
/// field. Obtain defaults from `rkdo_train_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RkdoTrainOptions {
    /// EMA coefficient in (0, 1] pulling the supervisor toward the model.
    pub alpha: f64,
    /// Inner supervisor-refresh + gradient-step cycles per recorded step.
    pub recursion_depth: usize,
    /// Recorded outer steps.
    pub steps: usize,
    /// Initial softmax temperature (> 0).
    pub tau0: f64,
    /// Linear temperature decay fraction in [0, 1).
    pub beta: f64,
    /// 0 = plain gradient descent, 1 = Adam.
    pub optimizer: u32,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Stream seed for the run.
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::default());
}

fn fail(err: &Error) -> RkdoStatus {
    set_last_error(&err.to_string());
    match err {
        Error::InvalidArgument(_) => RkdoStatus::InvalidArgument,
        Error::NonFiniteLoss { .. } => RkdoStatus::NumericalError,
        Error::Io(_) => RkdoStatus::IoError,
        Error::Parse(_) => RkdoStatus::ParseError,
    }
}

fn null_arg(name: &str) -> RkdoStatus {
    set_last_error(&format!("{name} must not be null"));
    RkdoStatus::NullPointer
}

/// Runs `body` with panics converted to `InternalPanic`, clearing the error
/// slot first so `rkdo_last_error_message` reflects only the latest call.
fn guarded(body: impl FnOnce() -> RkdoStatus) -> RkdoStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            RkdoStatus::InternalPanic
        }
    }
}

/// Number of bytes (including the trailing nul) needed to hold the message
/// for the most recent failed call on this thread. Zero when none.
#[no_mangle]
pub extern "C" fn rkdo_last_error_length() -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        if msg.as_bytes().is_empty() {
            0
        } else {
            msg.as_bytes_with_nul().len()
        }
    })
}

/// Copies the most recent error message into `buffer` as a nul-terminated
/// string and returns the number of bytes written (including the nul).
/// Returns 0 if `buffer` is null or `capacity` is too small.
///
/// # Safety
/// `buffer` must point to at least `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rkdo_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    if buffer.is_null() {
        return 0;
    }
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if msg.as_bytes().is_empty() || bytes.len() > capacity {
            return 0;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast::<u8>(), bytes.len());
        bytes.len()
    })
}

// ---------------------------------------------------------------------------
// Response fields
// ---------------------------------------------------------------------------

/// Creates the uniform off-diagonal field over `n` points.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives an owned handle.
#[no_mangle]
pub unsafe extern "C" fn rkdo_field_uniform(n: usize, out: *mut *mut RkdoField) -> RkdoStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match ResponseField::uniform(n) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RkdoField { inner }));
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Creates a random row-stochastic field from the given seed.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives an owned handle.
#[no_mangle]
pub unsafe extern "C" fn rkdo_field_random(
    n: usize,
    seed: u64,
    out: *mut *mut RkdoField,
) -> RkdoStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let mut rng = substream(seed, StreamPurpose::Init);
        match ResponseField::random(n, &mut rng) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RkdoField { inner }));
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Builds a field from `n * n` row-major entries (zero diagonal, rows
/// summing to one).
///
/// # Safety
/// `entries` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_field_from_rows(
    n: usize,
    entries: *const f64,
    len: usize,
    out: *mut *mut RkdoField,
) -> RkdoStatus {
    guarded(|| {
        if entries.is_null() {
            return null_arg("entries");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let data = std::slice::from_raw_parts(entries, len).to_vec();
        if len != n * n {
            set_last_error(&format!("expected {} entries for n={n}, got {len}", n * n));
            return RkdoStatus::InvalidArgument;
        }
        match ResponseField::from_rows(n, data) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RkdoField { inner }));
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of points in the field; 0 for a null handle.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rkdo_field_len(field: *const RkdoField) -> usize {
    if field.is_null() {
        0
    } else {
        (*field).inner.len()
    }
}

/// Copies the field's `n * n` row-major entries into `buffer`.
///
/// # Safety
/// `buffer` must point to at least `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rkdo_field_copy_rows(
    field: *const RkdoField,
    buffer: *mut f64,
    capacity: usize,
) -> RkdoStatus {
    guarded(|| {
        if field.is_null() {
            return null_arg("field");
        }
        if buffer.is_null() {
            return null_arg("buffer");
        }
        let rows = (*field).inner.rows_flat();
        if capacity < rows.len() {
            set_last_error(&format!("need capacity {}, got {capacity}", rows.len()));
            return RkdoStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(rows.as_ptr(), buffer, rows.len());
        RkdoStatus::Ok
    })
}

/// Mean row-wise KL divergence of `p` from `q`, in nats.
///
/// # Safety
/// `p` and `q` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_field_loss(
    p: *const RkdoField,
    q: *const RkdoField,
    out: *mut f64,
) -> RkdoStatus {
    guarded(|| {
        if p.is_null() {
            return null_arg("p");
        }
        if q.is_null() {
            return null_arg("q");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match field_loss(&(*p).inner, &(*q).inner) {
            Ok(v) => {
                *out = v;
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Convex combination `(1 - alpha) * p + alpha * q`, the supervisor update.
///
/// # Safety
/// `p` and `q` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_supervisor_update(
    p: *const RkdoField,
    q: *const RkdoField,
    alpha: f64,
    out: *mut *mut RkdoField,
) -> RkdoStatus {
    guarded(|| {
        if p.is_null() {
            return null_arg("p");
        }
        if q.is_null() {
            return null_arg("q");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match supervisor_update(&(*p).inner, &(*q).inner, alpha) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RkdoField { inner }));
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Mixes `p` with the uniform off-diagonal field at weight `debias`.
///
/// # Safety
/// `p` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_debiased_target(
    p: *const RkdoField,
    debias: f64,
    out: *mut *mut RkdoField,
) -> RkdoStatus {
    guarded(|| {
        if p.is_null() {
            return null_arg("p");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match debiased_target(&(*p).inner, debias) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RkdoField { inner }));
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a field handle; null is ignored.
///
/// # Safety
/// `field` must be a handle returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn rkdo_field_free(field: *mut RkdoField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

/// Random unit-norm embeddings, deterministic in the seed.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives an owned handle.
#[no_mangle]
pub unsafe extern "C" fn rkdo_embeddings_random_unit(
    n: usize,
    dim: usize,
    seed: u64,
    out: *mut *mut RkdoEmbeddings,
) -> RkdoStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let mut rng = substream(seed, StreamPurpose::Init);
        match EmbeddingTable::random_unit(n, dim, &mut rng) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RkdoEmbeddings { inner }));
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Builds embeddings from `n * dim` row-major coordinates.
///
/// # Safety
/// `coords` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_embeddings_from_rows(
    n: usize,
    dim: usize,
    coords: *const f64,
    len: usize,
    out: *mut *mut RkdoEmbeddings,
) -> RkdoStatus {
    guarded(|| {
        if coords.is_null() {
            return null_arg("coords");
        }
        if out.is_null() {
            return null_arg("out");
        }
        if len != n * dim {
            set_last_error(&format!("expected {} coords for {n}x{dim}, got {len}", n * dim));
            return RkdoStatus::InvalidArgument;
        }
        let data = std::slice::from_raw_parts(coords, len).to_vec();
        match EmbeddingTable::from_rows(n, dim, data) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RkdoEmbeddings { inner }));
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of embedded points; 0 for a null handle.
///
/// # Safety
/// `embeddings` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rkdo_embeddings_len(embeddings: *const RkdoEmbeddings) -> usize {
    if embeddings.is_null() {
        0
    } else {
        (*embeddings).inner.len()
    }
}

/// Embedding dimensionality; 0 for a null handle.
///
/// # Safety
/// `embeddings` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rkdo_embeddings_dim(embeddings: *const RkdoEmbeddings) -> usize {
    if embeddings.is_null() {
        0
    } else {
        (*embeddings).inner.dim()
    }
}

/// Copies the `n * dim` row-major coordinates into `buffer`.
///
/// # Safety
/// `buffer` must point to at least `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rkdo_embeddings_copy(
    embeddings: *const RkdoEmbeddings,
    buffer: *mut f64,
    capacity: usize,
) -> RkdoStatus {
    guarded(|| {
        if embeddings.is_null() {
            return null_arg("embeddings");
        }
        if buffer.is_null() {
            return null_arg("buffer");
        }
        let coords = (*embeddings).inner.coords_flat();
        if capacity < coords.len() {
            set_last_error(&format!("need capacity {}, got {capacity}", coords.len()));
            return RkdoStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(coords.as_ptr(), buffer, coords.len());
        RkdoStatus::Ok
    })
}

/// Softmax kernel field of the embeddings at temperature `tau`.
///
/// # Safety
/// `embeddings` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_kernel_field(
    embeddings: *const RkdoEmbeddings,
    tau: f64,
    out: *mut *mut RkdoField,
) -> RkdoStatus {
    guarded(|| {
        if embeddings.is_null() {
            return null_arg("embeddings");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match kernel_field(&(*embeddings).inner, tau) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RkdoField { inner }));
                RkdoStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases an embeddings handle; null is ignored.
///
/// # Safety
/// `embeddings` must be a handle returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn rkdo_embeddings_free(embeddings: *mut RkdoEmbeddings) {
    if !embeddings.is_null() {
        drop(Box::from_raw(embeddings));
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

fn build_config(options: &RkdoTrainOptions) -> Result<RKDOConfig, Error> {
    let kind = match options.optimizer {
        0 => OptimizerKind::Sgd,
        1 => OptimizerKind::Adam,
        other => {
            return Err(Error::InvalidArgument(format!(
                "optimizer must be 0 (sgd) or 1 (adam), got {other}"
            )))
        }
    };
    let config = RKDOConfig {
        alpha: options.alpha,
        recursion_depth: options.recursion_depth,
        steps: options.steps,
        schedule: TemperatureSchedule::new(options.tau0, options.beta, options.steps.max(1))?,
        optimizer: OptimizerSettings {
            kind,
            learning_rate: options.learning_rate,
            beta1: options.adam_beta1,
            beta2: options.adam_beta2,
            epsilon: options.adam_epsilon,
            weight_decay: options.weight_decay,
        },
        seed: options.seed,
    };
    config.validate()?;
    Ok(config)
}

/// Fills `out` with the stock configuration: alpha 0.2, depth 3, 100 steps,
/// tau 0.5 annealed with beta 0.1, Adam at 0.001 with weight decay 1e-5.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rkdo_train_options_default(out: *mut RkdoTrainOptions) -> RkdoStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = RkdoTrainOptions {
            alpha: 0.2,
            recursion_depth: 3,
            steps: 100,
            tau0: 0.5,
            beta: 0.1,
            optimizer: 1,
            learning_rate: 0.001,
            weight_decay: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 42,
        };
        RkdoStatus::Ok
    })
}

unsafe fn train_common(
    options: *const RkdoTrainOptions,
    p0: *const RkdoField,
    e0: *const RkdoEmbeddings,
    out: *mut *mut RkdoTrace,
    run: impl FnOnce(&RKDOConfig, &ResponseField, &EmbeddingTable) -> Result<TrainingTrace, Error>,
) -> RkdoStatus {
    if options.is_null() {
        return null_arg("options");
    }
    if p0.is_null() {
        return null_arg("p0");
    }
    if e0.is_null() {
        return null_arg("e0");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let config = match build_config(&*options) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match run(&config, &(*p0).inner, &(*e0).inner) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(RkdoTrace { inner }));
            RkdoStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Trains with the recursive EMA supervisor from `p0` and `e0`.
///
/// # Safety
/// All handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_train_rkdo(
    options: *const RkdoTrainOptions,
    p0: *const RkdoField,
    e0: *const RkdoEmbeddings,
    out: *mut *mut RkdoTrace,
) -> RkdoStatus {
    guarded(|| train_common(options, p0, e0, out, train_rkdo))
}

/// Trains against the fixed target `(1 - debias) * p0 + debias * uniform`
/// at constant temperature.
///
/// # Safety
/// All handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_train_icon(
    options: *const RkdoTrainOptions,
    p0: *const RkdoField,
    e0: *const RkdoEmbeddings,
    debias: f64,
    out: *mut *mut RkdoTrace,
) -> RkdoStatus {
    guarded(|| train_common(options, p0, e0, out, |c, p, e| train_icon_debiased(c, debias, p, e)))
}

/// Number of recorded steps; 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rkdo_trace_len(trace: *const RkdoTrace) -> usize {
    if trace.is_null() {
        0
    } else {
        (*trace).inner.steps.len()
    }
}

/// Training loss at step `index`.
///
/// # Safety
/// `trace` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_trace_loss(
    trace: *const RkdoTrace,
    index: usize,
    out: *mut f64,
) -> RkdoStatus {
    guarded(|| {
        if trace.is_null() {
            return null_arg("trace");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let steps = &(*trace).inner.steps;
        match steps.get(index) {
            Some(step) => {
                *out = step.loss;
                RkdoStatus::Ok
            }
            None => {
                set_last_error(&format!(
                    "step {index} out of range ({} recorded)",
                    steps.len()
                ));
                RkdoStatus::InvalidArgument
            }
        }
    })
}

/// Loss against the shared reference target at step `index`, comparable
/// across methods started from the same inputs.
///
/// # Safety
/// `trace` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_trace_common_loss(
    trace: *const RkdoTrace,
    index: usize,
    out: *mut f64,
) -> RkdoStatus {
    guarded(|| {
        if trace.is_null() {
            return null_arg("trace");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let steps = &(*trace).inner.steps;
        match steps.get(index) {
            Some(step) => {
                *out = step.loss_vs_common_target;
                RkdoStatus::Ok
            }
            None => {
                set_last_error(&format!(
                    "step {index} out of range ({} recorded)",
                    steps.len()
                ));
                RkdoStatus::InvalidArgument
            }
        }
    })
}

/// Loss recorded at the last step.
///
/// # Safety
/// `trace` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_trace_final_loss(
    trace: *const RkdoTrace,
    out: *mut f64,
) -> RkdoStatus {
    guarded(|| {
        if trace.is_null() {
            return null_arg("trace");
        }
        if out.is_null() {
            return null_arg("out");
        }
        *out = (*trace).inner.final_loss();
        RkdoStatus::Ok
    })
}

/// Clones the trained embeddings out of the trace.
///
/// # Safety
/// `trace` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rkdo_trace_final_embeddings(
    trace: *const RkdoTrace,
    out: *mut *mut RkdoEmbeddings,
) -> RkdoStatus {
    guarded(|| {
        if trace.is_null() {
            return null_arg("trace");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let inner = (*trace).inner.final_embeddings.clone();
        *out = Box::into_raw(Box::new(RkdoEmbeddings { inner }));
        RkdoStatus::Ok
    })
}

/// Bytes (including the trailing nul) needed for the trace's CSV rendering.
///
/// # Safety
/// `trace` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn rkdo_trace_csv_length(trace: *const RkdoTrace) -> usize {
    if trace.is_null() {
        0
    } else {
        (*trace).inner.to_csv().len() + 1
    }
}

/// Writes the trace as CSV (`step,loss,loss_vs_common_target,tau,elapsed_ms`)
/// into `buffer` as a nul-terminated string.
///
/// # Safety
/// `buffer` must point to at least `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rkdo_trace_csv(
    trace: *const RkdoTrace,
    buffer: *mut c_char,
    capacity: usize,
) -> RkdoStatus {
    guarded(|| {
        if trace.is_null() {
            return null_arg("trace");
        }
        if buffer.is_null() {
            return null_arg("buffer");
        }
        let csv = (*trace).inner.to_csv();
        let needed = csv.len() + 1;
        if capacity < needed {
            set_last_error(&format!("need capacity {needed}, got {capacity}"));
            return RkdoStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(csv.as_ptr(), buffer.cast::<u8>(), csv.len());
        *buffer.add(csv.len()) = 0;
        RkdoStatus::Ok
    })
}

/// Releases a trace handle; null is ignored.
///
/// # Safety
/// `trace` must be a handle returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn rkdo_trace_free(trace: *mut RkdoTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
