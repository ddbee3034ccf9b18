//! C ABI over `envdamp`.
//!
//! Conventions:
//!
//! - Every fallible call returns an [`EdStatus`]; `ED_STATUS_OK` is zero.
//!   On failure a message is kept per thread and can be read with
//!   [`ed_last_error_message`].
//! - Objects are opaque handles created by `*_new`/fit calls and released
//!   with the matching `*_free`. Freeing `NULL` is a no-op.
//! - Arrays are passed as pointer plus length; output buffers are caller
//!   owned and must hold the documented number of elements.
//! - Panics never cross the boundary; they surface as `ED_STATUS_PANIC`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use envdamp::baselines::{half_power_damping, lsrf_fit, match_pole_to_mode, pole_freq_hz, PoleSet};
use envdamp::estimator::{estimate_from_ensemble, fit_damping, EnsembleConfig};
use envdamp::kernels::extract_envelope;
use envdamp::signal_model::synthesize_response;
use envdamp::{
    Complex64, DampingEstimate, Envelope, Error, FrfData, KernelForm, KernelSpec, ModalSystem, SegmentPolicy,
    TimeRecord,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdStatus {
    Ok = 0,
    NullPointer = 1,
    /// A parameter or input array violates a precondition.
    InvalidArgument = 2,
    /// The data do not support an estimate (segment too short, no decay,
    /// degenerate peak, singular fit, no pole near the target).
    EstimationFailed = 3,
    Panic = 4,
}

/// The nine envelope estimator shapes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdKernelForm {
    GaussianWindow = 0,
    RectWindow = 1,
    ShannonFilter = 2,
    TriangleFilter = 3,
    TriangleWindow = 4,
    WelchFilter = 5,
    WelchWindow = 6,
    BlackmanFilter = 7,
    BlackmanWindow = 8,
}

impl From<EdKernelForm> for KernelForm {
    fn from(f: EdKernelForm) -> Self {
        match f {
            EdKernelForm::GaussianWindow => KernelForm::GaussianWindow,
            EdKernelForm::RectWindow => KernelForm::RectWindow,
            EdKernelForm::ShannonFilter => KernelForm::ShannonFilter,
            EdKernelForm::TriangleFilter => KernelForm::TriangleFilter,
            EdKernelForm::TriangleWindow => KernelForm::TriangleWindow,
            EdKernelForm::WelchFilter => KernelForm::WelchFilter,
            EdKernelForm::WelchWindow => KernelForm::WelchWindow,
            EdKernelForm::BlackmanFilter => KernelForm::BlackmanFilter,
            EdKernelForm::BlackmanWindow => KernelForm::BlackmanWindow,
        }
    }
}

/// Segment selection settings; see [`ed_segment_policy_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdSegmentPolicy {
    pub floor_fraction: f64,
    pub cycles: f64,
    pub edge_guard_cycles: f64,
}

impl From<EdSegmentPolicy> for SegmentPolicy {
    fn from(p: EdSegmentPolicy) -> Self {
        SegmentPolicy {
            floor_fraction: p.floor_fraction,
            cycles: p.cycles,
            edge_guard_cycles: p.edge_guard_cycles,
        }
    }
}

/// Log-linear fit result.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdDampingEstimate {
    pub zeta: f64,
    pub slope: f64,
    pub intercept: f64,
    pub segment_start: usize,
    pub segment_end: usize,
    pub r_squared: f64,
}

impl From<DampingEstimate> for EdDampingEstimate {
    fn from(e: DampingEstimate) -> Self {
        Self {
            zeta: e.zeta,
            slope: e.slope,
            intercept: e.intercept,
            segment_start: e.segment.0,
            segment_end: e.segment.1,
            r_squared: e.r_squared,
        }
    }
}

/// Opaque envelope estimator: a form, a width and a center frequency.
pub struct EdKernel {
    spec: KernelSpec,
}

/// Opaque set of fitted poles.
pub struct EdPoleSet {
    inner: PoleSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EdStatus {
    match e {
        Error::InvalidParameter(_)
        | Error::LengthMismatch { .. }
        | Error::IndexOutOfRange { .. }
        | Error::AboveNyquist { .. }
        | Error::KernelSupport(_)
        | Error::Config(_)
        | Error::Empty(_)
        | Error::MissingFit(_)
        | Error::Io(_)
        | Error::Json(_) => EdStatus::InvalidArgument,
        _ => EdStatus::EstimationFailed,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EdStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            EdStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            EdStatus::Panic
        }
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Borrows `len` elements; a zero length accepts a null pointer.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

/// Message of the last failed call on this thread, or `NULL` if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ed_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default segment policy: 5% floor, 10 cycles, 5 guard cycles.
#[no_mangle]
pub extern "C" fn ed_segment_policy_default() -> EdSegmentPolicy {
    let p = SegmentPolicy::default();
    EdSegmentPolicy {
        floor_fraction: p.floor_fraction,
        cycles: p.cycles,
        edge_guard_cycles: p.edge_guard_cycles,
    }
}

/// Creates a kernel. `theta` is seconds for windows and rad/s for filters.
///
/// # Safety
/// `out_kernel` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ed_kernel_new(
    form: EdKernelForm,
    theta: f64,
    center_freq_hz: f64,
    out_kernel: *mut *mut EdKernel,
) -> EdStatus {
    guard(|| {
        let slot = out(out_kernel, "out_kernel")?;
        *slot = ptr::null_mut();
        let spec = KernelSpec::new(form.into(), theta, center_freq_hz)?;
        *slot = Box::into_raw(Box::new(EdKernel { spec }));
        Ok(())
    })
}

/// # Safety
/// `kernel` must be `NULL` or a handle from [`ed_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ed_kernel_free(kernel: *mut EdKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Envelope of one record; `out_envelope` receives `n` values.
///
/// # Safety
/// `samples` and `out_envelope` must each address `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ed_extract_envelope(
    kernel: *const EdKernel,
    samples: *const f64,
    n: usize,
    sample_rate_hz: f64,
    out_envelope: *mut f64,
) -> EdStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or(Fail::Null("kernel"))?;
        let x = slice(samples, n, "samples")?;
        if out_envelope.is_null() {
            return Err(Fail::Null("out_envelope"));
        }
        let env = extract_envelope(&TimeRecord::new(x.to_vec(), sample_rate_hz)?, &k.spec)?;
        std::slice::from_raw_parts_mut(out_envelope, n).copy_from_slice(env.values());
        Ok(())
    })
}

/// Fits the damping ratio to an envelope. `policy` may be `NULL` for the
/// defaults.
///
/// # Safety
/// `envelope` must address `n` doubles; `policy` must be `NULL` or valid;
/// `out_estimate` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_fit_damping(
    envelope: *const f64,
    n: usize,
    sample_rate_hz: f64,
    mode_freq_hz: f64,
    policy: *const EdSegmentPolicy,
    out_estimate: *mut EdDampingEstimate,
) -> EdStatus {
    guard(|| {
        let v = slice(envelope, n, "envelope")?;
        let slot = out(out_estimate, "out_estimate")?;
        let policy: SegmentPolicy = policy.as_ref().map_or_else(SegmentPolicy::default, |p| (*p).into());
        if v.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidParameter("envelope values must be nonnegative".into()).into());
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter("sample rate must be positive".into()).into());
        }
        let est = fit_damping(&Envelope::new(v.to_vec(), sample_rate_hz), mode_freq_hz, &policy)?;
        *slot = est.into();
        Ok(())
    })
}

/// Full ensemble pipeline: `n_records` records of `n` samples each, stored
/// row-major in `records`. The mode frequency is the kernel's center.
///
/// # Safety
/// `records` must address `n_records * n` doubles; `policy` must be `NULL`
/// or valid; `out_estimate` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_estimate_damping(
    kernel: *const EdKernel,
    records: *const f64,
    n_records: usize,
    n: usize,
    sample_rate_hz: f64,
    policy: *const EdSegmentPolicy,
    out_estimate: *mut EdDampingEstimate,
) -> EdStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or(Fail::Null("kernel"))?;
        let total = n_records
            .checked_mul(n)
            .ok_or_else(|| Error::InvalidParameter("record buffer size overflows".into()))?;
        let data = slice(records, total, "records")?;
        let slot = out(out_estimate, "out_estimate")?;
        let policy: SegmentPolicy = policy.as_ref().map_or_else(SegmentPolicy::default, |p| (*p).into());
        if n == 0 {
            return Err(Error::Empty("records").into());
        }
        let recs = data
            .chunks_exact(n)
            .map(|c| TimeRecord::new(c.to_vec(), sample_rate_hz))
            .collect::<envdamp::Result<Vec<_>>>()?;
        let cfg = EnsembleConfig {
            n_records,
            kernel: k.spec,
            segment_policy: policy,
        };
        *slot = estimate_from_ensemble(&recs, &cfg, k.spec.center_freq_hz)?.into();
        Ok(())
    })
}

unsafe fn frf_from_parts(freqs: *const f64, re: *const f64, im: *const f64, n: usize) -> Result<FrfData, Fail> {
    let f = slice(freqs, n, "freqs_hz")?;
    let re = slice(re, n, "re")?;
    let im = slice(im, n, "im")?;
    let values = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    Ok(FrfData::new(f.to_vec(), values)?)
}

/// Half-power damping ratio around the FRF bin `peak_index`.
///
/// # Safety
/// `freqs_hz`, `re` and `im` must each address `n` doubles; `out_zeta`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_half_power_damping(
    freqs_hz: *const f64,
    re: *const f64,
    im: *const f64,
    n: usize,
    peak_index: usize,
    out_zeta: *mut f64,
) -> EdStatus {
    guard(|| {
        let frf = frf_from_parts(freqs_hz, re, im, n)?;
        let slot = out(out_zeta, "out_zeta")?;
        *slot = half_power_damping(&frf, peak_index)?;
        Ok(())
    })
}

/// Rational fit of the FRF magnitude; returns the stable poles.
///
/// # Safety
/// `freqs_hz`, `re` and `im` must each address `n` doubles; `out_poles`
/// must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ed_lsrf_fit(
    freqs_hz: *const f64,
    re: *const f64,
    im: *const f64,
    n: usize,
    num_order: usize,
    den_order: usize,
    n_iters: usize,
    out_poles: *mut *mut EdPoleSet,
) -> EdStatus {
    guard(|| {
        let slot = out(out_poles, "out_poles")?;
        *slot = ptr::null_mut();
        let frf = frf_from_parts(freqs_hz, re, im, n)?;
        let inner = lsrf_fit(&frf, num_order, den_order, n_iters)?;
        *slot = Box::into_raw(Box::new(EdPoleSet { inner }));
        Ok(())
    })
}

/// Number of poles in the set (0 for `NULL`).
///
/// # Safety
/// `poles` must be `NULL` or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ed_pole_set_len(poles: *const EdPoleSet) -> usize {
    poles.as_ref().map_or(0, |p| p.inner.len())
}

/// Pole `index` in rad/s.
///
/// # Safety
/// `poles` must be a live handle; `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_pole_set_get(
    poles: *const EdPoleSet,
    index: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> EdStatus {
    guard(|| {
        let p = poles.as_ref().ok_or(Fail::Null("poles"))?;
        let re = out(out_re, "out_re")?;
        let im = out(out_im, "out_im")?;
        let z = *p.inner.poles.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: p.inner.len(),
        })?;
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Damping ratio and frequency (Hz) of the stable pole nearest
/// `target_freq_hz` within 20% of it.
///
/// # Safety
/// `poles` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_pole_set_match(
    poles: *const EdPoleSet,
    target_freq_hz: f64,
    out_zeta: *mut f64,
    out_freq_hz: *mut f64,
) -> EdStatus {
    guard(|| {
        let p = poles.as_ref().ok_or(Fail::Null("poles"))?;
        let zeta = out(out_zeta, "out_zeta")?;
        let freq = out(out_freq_hz, "out_freq_hz")?;
        let (pole, z) = match_pole_to_mode(&p.inner, target_freq_hz)?;
        *zeta = z;
        *freq = pole_freq_hz(pole);
        Ok(())
    })
}

/// # Safety
/// `poles` must be `NULL` or a handle from [`ed_lsrf_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ed_pole_set_free(poles: *mut EdPoleSet) {
    if !poles.is_null() {
        drop(Box::from_raw(poles));
    }
}

/// Noise-free impulse response of `n_modes` modes, `n` samples.
///
/// # Safety
/// The three mode arrays must address `n_modes` doubles each and
/// `out_samples` must address `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ed_synthesize_response(
    damped_freqs_hz: *const f64,
    damping_ratios: *const f64,
    amplitudes: *const f64,
    n_modes: usize,
    n: usize,
    sample_rate_hz: f64,
    out_samples: *mut f64,
) -> EdStatus {
    guard(|| {
        let f = slice(damped_freqs_hz, n_modes, "damped_freqs_hz")?;
        let z = slice(damping_ratios, n_modes, "damping_ratios")?;
        let a = slice(amplitudes, n_modes, "amplitudes")?;
        if out_samples.is_null() {
            return Err(Fail::Null("out_samples"));
        }
        let rec = synthesize_response(&ModalSystem::from_parts(f, z, a)?, n, sample_rate_hz)?;
        std::slice::from_raw_parts_mut(out_samples, n).copy_from_slice(rec.samples());
        Ok(())
    })
}
