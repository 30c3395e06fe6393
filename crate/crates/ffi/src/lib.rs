//! C ABI for the `signeq` library.
//!
//! Models are opaque handles built from a JSON architecture spec. Every
//! fallible call returns a [`SigneqStatus`]; on failure the message is kept
//! per thread and can be copied out with [`signeq_last_error`]. Panics never
//! cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use signeq::models::{Model, ModelSpec, ParamTree};
use signeq::{Tape, Tensor};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigneqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    BufferTooSmall = 4,
    Overflow = 5,
    Panic = 6,
}

/// A model with its parameters. Create with [`signeq_model_new`] and release
/// with [`signeq_model_free`].
pub struct SigneqModel {
    model: Model,
    params: ParamTree,
    spec: ModelSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: SigneqStatus, msg: impl Into<String>) -> SigneqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> SigneqStatus) -> SigneqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SigneqStatus::Panic, msg)
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn signeq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to fit) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn signeq_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: caller guarantees `buf` holds `len` bytes and n < len.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Builds a model from a JSON spec such as
/// `{"arch":"sign_eq_elementwise","k":4,"widths":[16,16]}` and initialises
/// its parameters from `seed`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn signeq_model_new(
    spec_json: *const c_char,
    seed: u64,
    out: *mut *mut SigneqModel,
) -> SigneqStatus {
    guard(|| {
        if spec_json.is_null() || out.is_null() {
            return fail(SigneqStatus::NullPointer, "null argument");
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let text = match unsafe { CStr::from_ptr(spec_json) }.to_str() {
            Ok(t) => t,
            Err(_) => return fail(SigneqStatus::InvalidArgument, "spec is not UTF-8"),
        };
        let spec: ModelSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail(SigneqStatus::InvalidArgument, e.to_string()),
        };
        let mut rng = signeq::rng::seeded(seed);
        match spec.build(&mut rng) {
            Ok((model, params)) => {
                let handle = Box::new(SigneqModel { model, params, spec });
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(handle) };
                SigneqStatus::Ok
            }
            Err(e) => fail(SigneqStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`signeq_model_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn signeq_model_free(model: *mut SigneqModel) {
    if !model.is_null() {
        // SAFETY: pointer came from Box::into_raw in signeq_model_new.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of scalar parameters.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn signeq_model_param_count(model: *const SigneqModel, out: *mut usize) -> SigneqStatus {
    guard(|| {
        // SAFETY: null-checked; caller guarantees liveness.
        match unsafe { (model.as_ref(), out.as_mut()) } {
            (Some(m), Some(o)) => {
                *o = m.params.count();
                SigneqStatus::Ok
            }
            _ => fail(SigneqStatus::NullPointer, "null argument"),
        }
    })
}

/// Writes the model's spec as JSON into `buf`, like [`signeq_last_error`].
///
/// # Safety
/// `model` must be a live handle, `buf` null or valid for `len` bytes, and
/// `needed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn signeq_model_spec(
    model: *const SigneqModel,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> SigneqStatus {
    guard(|| {
        // SAFETY: null-checked; caller guarantees liveness.
        let (Some(m), Some(needed)) = (unsafe { model.as_ref() }, unsafe { needed.as_mut() }) else {
            return fail(SigneqStatus::NullPointer, "null argument");
        };
        let json = serde_json::to_string(&m.spec).expect("specs serialize");
        *needed = json.len() + 1;
        if buf.is_null() || len < json.len() + 1 {
            return fail(SigneqStatus::BufferTooSmall, format!("need {} bytes", json.len() + 1));
        }
        // SAFETY: buf holds at least json.len() + 1 bytes.
        unsafe {
            std::ptr::copy_nonoverlapping(json.as_ptr(), buf.cast::<u8>(), json.len());
            *buf.add(json.len()) = 0;
        }
        SigneqStatus::Ok
    })
}

/// Runs the model on a row-major input of the given shape.
///
/// On return `*out_len` holds the number of output values and, when
/// `out_shape` is non-null, up to `out_shape_cap` output dimensions are
/// written there with the rank in `*out_rank`. If `out` is null or smaller
/// than the result, nothing is copied and `BufferTooSmall` is returned with
/// the required length, so callers can size the buffer with a first call.
///
/// # Safety
/// All non-null pointers must be valid for the stated lengths; `model`,
/// `input`, `shape` and `out_len` must be non-null.
#[no_mangle]
pub unsafe extern "C" fn signeq_model_forward(
    model: *const SigneqModel,
    input: *const f64,
    shape: *const usize,
    rank: usize,
    out: *mut f64,
    out_cap: usize,
    out_len: *mut usize,
    out_shape: *mut usize,
    out_shape_cap: usize,
    out_rank: *mut usize,
) -> SigneqStatus {
    guard(|| {
        if model.is_null() || input.is_null() || shape.is_null() || out_len.is_null() {
            return fail(SigneqStatus::NullPointer, "null argument");
        }
        if rank == 0 {
            return fail(SigneqStatus::ShapeMismatch, "input rank must be at least 1");
        }
        // SAFETY: non-null and sized by the caller.
        let (m, dims) = unsafe { (&*model, std::slice::from_raw_parts(shape, rank)) };
        let Some(n) = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)) else {
            return fail(SigneqStatus::Overflow, "input size overflows");
        };
        // SAFETY: caller guarantees `input` holds the product of `shape`.
        let data = unsafe { std::slice::from_raw_parts(input, n) }.to_vec();
        let x = match Tensor::new(data, dims) {
            Ok(t) => t,
            Err(e) => return fail(SigneqStatus::ShapeMismatch, e.to_string()),
        };
        let mut tape = Tape::new();
        let bound = m.params.bind(&mut tape);
        let xv = tape.constant(x);
        let y = match m.model.forward(&mut tape, &bound, xv) {
            Ok(y) => tape.value(y).clone(),
            Err(e) => return fail(SigneqStatus::ShapeMismatch, e.to_string()),
        };
        // SAFETY: checked non-null above; the others are optional.
        unsafe {
            *out_len = y.len();
            if let Some(r) = out_rank.as_mut() {
                *r = y.shape().len();
            }
            if !out_shape.is_null() {
                let k = y.shape().len().min(out_shape_cap);
                std::ptr::copy_nonoverlapping(y.shape().as_ptr(), out_shape, k);
            }
        }
        if out.is_null() || out_cap < y.len() {
            return fail(SigneqStatus::BufferTooSmall, format!("output needs {} values", y.len()));
        }
        // SAFETY: out holds at least y.len() values.
        unsafe { std::ptr::copy_nonoverlapping(y.data().as_ptr(), out, y.len()) };
        SigneqStatus::Ok
    })
}

/// Dimension of the space of sign-equivariant linear maps between order
/// `m1` and order `m2` tensors over `k` eigenvectors.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn signeq_fixed_dim(k: u32, m1: u32, m2: u32, out: *mut u64) -> SigneqStatus {
    guard(|| {
        // SAFETY: null-checked.
        let Some(o) = (unsafe { out.as_mut() }) else {
            return fail(SigneqStatus::NullPointer, "null argument");
        };
        match signeq::algebra::fixed_dim_formula(k, m1, m2) {
            Ok(d) => match u64::try_from(d) {
                Ok(d) => {
                    *o = d;
                    SigneqStatus::Ok
                }
                Err(_) => fail(SigneqStatus::Overflow, format!("dimension {d} exceeds 64 bits")),
            },
            Err(e) => fail(SigneqStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Runs the property suite; `*passed` is set to 1 when every check passes.
/// A nonzero `quick` uses small sample counts.
///
/// # Safety
/// `passed` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn signeq_check(seed: u64, quick: i32, passed: *mut i32) -> SigneqStatus {
    guard(|| {
        // SAFETY: null-checked.
        let Some(p) = (unsafe { passed.as_mut() }) else {
            return fail(SigneqStatus::NullPointer, "null argument");
        };
        let mut cfg = signeq::suite::SuiteConfig::new(seed);
        if quick != 0 {
            cfg.k_max = 3;
            cfg.permutation_samples = 5;
            cfg.orthogonal_samples = 5;
            cfg.gradient_instances = 3;
        }
        let report = signeq::suite::run_suite(&cfg);
        *p = i32::from(report.passed());
        if !report.passed() {
            let names: Vec<_> = report.failures().map(|r| r.name.clone()).collect();
            fail(SigneqStatus::Ok, names.join("; "));
        }
        SigneqStatus::Ok
    })
}
