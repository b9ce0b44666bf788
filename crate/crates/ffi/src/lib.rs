//! C ABI for the quantum embedding kernel library.
//!
//! Every fallible function returns a [`QekStatus`]; on failure a message is
//! available from [`qek_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Matrices are dense,
//! row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use qek::circuit::{AnsatzSpec, Architecture};
use qek::kernel::{target_alignment, Embedding, KernelMatrix};
use qek::linalg::Matrix;
use qek::svm::{self, OvrModel, SvmParams};
use qek::{experiment, train, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QekStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericFailure = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QekArchitecture {
    DataFirst = 0,
    DataLast = 1,
    DataWeaved = 2,
}

impl From<QekArchitecture> for Architecture {
    fn from(a: QekArchitecture) -> Self {
        match a {
            QekArchitecture::DataFirst => Architecture::DataFirst,
            QekArchitecture::DataLast => Architecture::DataLast,
            QekArchitecture::DataWeaved => Architecture::DataWeaved,
        }
    }
}

/// Ansatz plus its current parameter vector.
pub struct QekModel {
    spec: AnsatzSpec,
    theta: Vec<f64>,
    feature_scale: f64,
}

/// One-vs-rest SVM fitted on a precomputed kernel.
pub struct QekSvm {
    model: OvrModel,
    n_train: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QekGateCounts {
    pub one_qubit: usize,
    pub two_qubit: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QekEraseReport {
    pub before: QekGateCounts,
    pub after: QekGateCounts,
    pub erased: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QekStatus {
    match e {
        Error::Dimension { .. } => QekStatus::DimensionMismatch,
        Error::DegenerateKernel | Error::SingleClass => QekStatus::NumericFailure,
        _ => QekStatus::InvalidArgument,
    }
}

struct Fail(QekStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(QekStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QekStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QekStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            QekStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn model_ref<'a>(m: *const QekModel) -> Result<&'a QekModel, Fail> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn rows(points: *const f64, n_points: usize, width: usize) -> Result<Vec<Vec<f64>>, Fail> {
    let flat = input(points, n_points * width, "points")?;
    Ok(flat.chunks(width.max(1)).map(<[f64]>::to_vec).collect())
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), Fail> {
    if expected != actual {
        return Err(Error::dim(what, expected, actual).into());
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qek_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qek_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a model with all parameters set to zero.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qek_model_new(
    arch: QekArchitecture,
    n_qubits: usize,
    n_layers: usize,
    feature_scale: f64,
    out: *mut *mut QekModel,
) -> QekStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !feature_scale.is_finite() {
            return Err(Fail(
                QekStatus::InvalidArgument,
                "feature_scale must be finite".into(),
            ));
        }
        let spec = AnsatzSpec::new(arch.into(), n_qubits, n_layers)?;
        let model = QekModel {
            spec,
            theta: vec![0.0; spec.param_count()],
            feature_scale,
        };
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`qek_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qek_model_free(model: *mut QekModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qek_model_param_count(model: *const QekModel) -> usize {
    model.as_ref().map_or(0, |m| m.theta.len())
}

/// # Safety
/// `out` must point to `len` writable doubles; `len` must equal the
/// parameter count.
#[no_mangle]
pub unsafe extern "C" fn qek_model_get_params(
    model: *const QekModel,
    out: *mut f64,
    len: usize,
) -> QekStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_len("parameter buffer length", m.theta.len(), len)?;
        output(out, len, "out")?.copy_from_slice(&m.theta);
        Ok(())
    })
}

/// # Safety
/// `params` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn qek_model_set_params(
    model: *mut QekModel,
    params: *const f64,
    len: usize,
) -> QekStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        check_len("parameter buffer length", m.theta.len(), len)?;
        m.theta.copy_from_slice(input(params, len, "params")?);
        Ok(())
    })
}

/// Draws parameters uniformly from `[0, 2π)` with the given seed.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qek_model_init_params(model: *mut QekModel, seed: u64) -> QekStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.theta = train::init_params(&m.spec, seed);
        Ok(())
    })
}

/// Gate counts of the model's ansatz.
///
/// # Safety
/// `out` must point to writable storage for one [`QekGateCounts`].
#[no_mangle]
pub unsafe extern "C" fn qek_gate_counts(
    model: *const QekModel,
    out: *mut QekGateCounts,
) -> QekStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = m.spec.build().count_gates();
        *out = QekGateCounts {
            one_qubit: c.one_qubit,
            two_qubit: c.two_qubit,
        };
        Ok(())
    })
}

/// Kernel value between two feature vectors of length `n_qubits`.
///
/// # Safety
/// `x` and `x_prime` must point to `len` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn qek_kernel_value(
    model: *const QekModel,
    x: *const f64,
    x_prime: *const f64,
    len: usize,
    out: *mut f64,
) -> QekStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let emb = Embedding::new(&m.spec, &m.theta, m.feature_scale)?;
        *out = emb.value(input(x, len, "x")?, input(x_prime, len, "x_prime")?)?;
        Ok(())
    })
}

/// Gram matrix of `n_points` row-major points of width `n_features`,
/// written to `out` (`n_points × n_points`).
///
/// # Safety
/// `points` must hold `n_points * n_features` doubles and `out`
/// `n_points * n_points`.
#[no_mangle]
pub unsafe extern "C" fn qek_kernel_matrix(
    model: *const QekModel,
    points: *const f64,
    n_points: usize,
    n_features: usize,
    out: *mut f64,
) -> QekStatus {
    guard(|| {
        let m = model_ref(model)?;
        let pts = rows(points, n_points, n_features)?;
        let emb = Embedding::new(&m.spec, &m.theta, m.feature_scale)?;
        let k = emb.matrix(&pts)?;
        output(out, n_points * n_points, "out")?.copy_from_slice(k.matrix().as_slice());
        Ok(())
    })
}

/// Kernel-target alignment of an `n × n` kernel matrix with class labels.
///
/// # Safety
/// `kernel` must hold `n * n` doubles, `labels` `n` values, `out` one double.
#[no_mangle]
pub unsafe extern "C" fn qek_target_alignment(
    kernel: *const f64,
    labels: *const u32,
    n: usize,
    out: *mut f64,
) -> QekStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let k = Matrix::from_vec(n, n, input(kernel, n * n, "kernel")?.to_vec())?;
        let k = KernelMatrix::from_matrix(k)?;
        *out = target_alignment(&k, input(labels, n, "labels")?)?;
        Ok(())
    })
}

/// Runs the erasure pass on the echo circuit of the given ansatz and checks
/// `trials` random bindings for unchanged kernel values.
///
/// # Safety
/// `out` must point to writable storage for one [`QekEraseReport`].
#[no_mangle]
pub unsafe extern "C" fn qek_erase_check(
    arch: QekArchitecture,
    n_qubits: usize,
    n_layers: usize,
    trials: usize,
    seed: u64,
    out: *mut QekEraseReport,
) -> QekStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = AnsatzSpec::new(arch.into(), n_qubits, n_layers)?;
        let r = experiment::erase_check(&spec, trials, seed)?;
        let counts = |c: qek::GateCounts| QekGateCounts {
            one_qubit: c.one_qubit,
            two_qubit: c.two_qubit,
        };
        *out = QekEraseReport {
            before: counts(r.before),
            after: counts(r.after),
            erased: r.erased,
            max_deviation: r.max_deviation,
            passed: r.passed(),
        };
        Ok(())
    })
}

/// Fits a one-vs-rest SVM on an `n × n` training kernel.
///
/// # Safety
/// `kernel` must hold `n * n` doubles, `labels` `n` values and `out` must
/// be writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qek_svm_fit(
    kernel: *const f64,
    labels: *const u32,
    n: usize,
    c: f64,
    out: *mut *mut QekSvm,
) -> QekStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let k = Matrix::from_vec(n, n, input(kernel, n * n, "kernel")?.to_vec())?;
        let k = KernelMatrix::from_matrix_unchecked(k)?;
        let labels: Vec<usize> = input(labels, n, "labels")?
            .iter()
            .map(|&l| l as usize)
            .collect();
        let model = svm::fit_ovr(&k, &labels, &SvmParams::with_c(c))?;
        *out = Box::into_raw(Box::new(QekSvm { model, n_train: n }));
        Ok(())
    })
}

/// Predicts labels from an `n_rows × n_train` cross-kernel block.
///
/// # Safety
/// `k_cross` must hold `n_rows * n_train` doubles and `out_labels`
/// `n_rows` values.
#[no_mangle]
pub unsafe extern "C" fn qek_svm_predict(
    svm: *const QekSvm,
    k_cross: *const f64,
    n_rows: usize,
    n_train: usize,
    out_labels: *mut u32,
) -> QekStatus {
    guard(|| {
        let s = svm.as_ref().ok_or_else(|| null("svm"))?;
        check_len("cross-kernel columns", s.n_train, n_train)?;
        let k = Matrix::from_vec(
            n_rows,
            n_train,
            input(k_cross, n_rows * n_train, "k_cross")?.to_vec(),
        )?;
        let predicted = s.model.predict(&k)?;
        for (o, p) in output(out_labels, n_rows, "out_labels")?
            .iter_mut()
            .zip(predicted)
        {
            *o = p as u32;
        }
        Ok(())
    })
}

/// # Safety
/// `svm` must be null or a handle from [`qek_svm_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qek_svm_free(svm: *mut QekSvm) {
    if !svm.is_null() {
        drop(Box::from_raw(svm));
    }
}
