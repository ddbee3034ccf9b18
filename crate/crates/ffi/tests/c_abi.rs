use std::ffi::CStr;
use std::ptr;

use envdamp_ffi::*;

const FS: f64 = 800.0;
const N: usize = 4096;

fn single_mode(f: f64, zeta: f64) -> Vec<f64> {
    let mut out = vec![0.0; N];
    let st = unsafe { ed_synthesize_response(&f, &zeta, &1.0, 1, N, FS, out.as_mut_ptr()) };
    assert_eq!(st, EdStatus::Ok);
    out
}

fn last_error() -> String {
    let p = ed_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn kernel_envelope_and_fit() {
    let x = single_mode(15.56, 0.01);
    let mut k: *mut EdKernel = ptr::null_mut();
    assert_eq!(unsafe { ed_kernel_new(EdKernelForm::TriangleWindow, 0.6, 15.56, &mut k) }, EdStatus::Ok);
    let mut env = vec![0.0; N];
    assert_eq!(unsafe { ed_extract_envelope(k, x.as_ptr(), N, FS, env.as_mut_ptr()) }, EdStatus::Ok);
    assert!(env.iter().all(|v| *v >= 0.0));

    let mut est = EdDampingEstimate::default();
    let policy = ed_segment_policy_default();
    assert_eq!(unsafe { ed_fit_damping(env.as_ptr(), N, FS, 15.56, &policy, &mut est) }, EdStatus::Ok);
    assert!((est.zeta - 0.01).abs() / 0.01 < 0.02, "{}", est.zeta);
    assert!(est.segment_start < est.segment_end);

    // two identical records through the ensemble path
    let both: Vec<f64> = x.iter().chain(&x).copied().collect();
    let mut ens = EdDampingEstimate::default();
    assert_eq!(unsafe { ed_estimate_damping(k, both.as_ptr(), 2, N, FS, ptr::null(), &mut ens) }, EdStatus::Ok);
    assert!((ens.zeta - est.zeta).abs() < 1e-12);
    unsafe { ed_kernel_free(k) };
    unsafe { ed_kernel_free(ptr::null_mut()) };
}

#[test]
fn errors_are_reported() {
    let mut k: *mut EdKernel = ptr::null_mut();
    assert_eq!(
        unsafe { ed_kernel_new(EdKernelForm::GaussianWindow, -1.0, 15.56, &mut k) },
        EdStatus::InvalidArgument
    );
    assert!(k.is_null());
    assert!(last_error().contains("theta"));
    assert_eq!(
        unsafe { ed_kernel_new(EdKernelForm::GaussianWindow, 0.2, 15.56, ptr::null_mut()) },
        EdStatus::NullPointer
    );
    let mut est = EdDampingEstimate::default();
    let flat = vec![1.0; 64];
    assert_eq!(
        unsafe { ed_fit_damping(flat.as_ptr(), flat.len(), FS, 15.56, ptr::null(), &mut est) },
        EdStatus::EstimationFailed
    );
    assert!(!last_error().is_empty());
}

#[test]
fn half_power_and_lsrf_on_sdof_frf() {
    use std::f64::consts::PI;
    let (fd, zeta) = (15.56, 0.01);
    let wn = 2.0 * PI * fd / (1.0f64 - zeta * zeta).sqrt();
    let freqs: Vec<f64> = (1..8000).map(|k| k as f64 * 0.005).collect();
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for &f in &freqs {
        let w = 2.0 * PI * f;
        // 1 / (wn^2 - w^2 + 2 i zeta wn w)
        let (a, b) = (wn * wn - w * w, 2.0 * zeta * wn * w);
        let d = a * a + b * b;
        re.push(a / d);
        im.push(-b / d);
    }
    let peak = (0..freqs.len())
        .max_by(|&i, &j| (re[i].hypot(im[i])).total_cmp(&re[j].hypot(im[j])))
        .unwrap();
    let mut z = 0.0;
    let n = freqs.len();
    assert_eq!(
        unsafe { ed_half_power_damping(freqs.as_ptr(), re.as_ptr(), im.as_ptr(), n, peak, &mut z) },
        EdStatus::Ok
    );
    assert!((z - zeta).abs() / zeta < 0.01, "{z}");

    let mut poles: *mut EdPoleSet = ptr::null_mut();
    assert_eq!(
        unsafe { ed_lsrf_fit(freqs.as_ptr(), re.as_ptr(), im.as_ptr(), n, 0, 2, 5, &mut poles) },
        EdStatus::Ok
    );
    let len = unsafe { ed_pole_set_len(poles) };
    assert_eq!(len, 2);
    let (mut pr, mut pi) = (0.0, 0.0);
    assert_eq!(unsafe { ed_pole_set_get(poles, 0, &mut pr, &mut pi) }, EdStatus::Ok);
    assert!(pr < 0.0);
    assert_eq!(unsafe { ed_pole_set_get(poles, len, &mut pr, &mut pi) }, EdStatus::InvalidArgument);
    let (mut mz, mut mf) = (0.0, 0.0);
    assert_eq!(unsafe { ed_pole_set_match(poles, fd, &mut mz, &mut mf) }, EdStatus::Ok);
    assert!((mz - zeta).abs() < 1e-6 && (mf - fd).abs() < 1e-4, "{mz} {mf}");
    unsafe { ed_pole_set_free(poles) };
    assert_eq!(unsafe { ed_pole_set_len(ptr::null()) }, 0);
}
