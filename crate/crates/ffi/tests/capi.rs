use std::ffi::{c_char, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use bahadur_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { bahadur_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n - 1].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn functional(name: &str) -> *mut BahadurFunctional {
    let name = CString::new(name).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { bahadur_functional_new(name.as_ptr(), &mut f) }, BahadurStatus::Ok);
    f
}

fn model(spec: &str) -> *mut BahadurModel {
    let spec = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { bahadur_model_parse(spec.as_ptr(), &mut m) }, BahadurStatus::Ok);
    m
}

#[test]
fn functional_round_trip() {
    let f = functional("abs");
    let (mut q, mut c, mut d) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(bahadur_functional_quantile(f, 0.5, &mut q), BahadurStatus::Ok);
        assert_eq!(bahadur_functional_cdf(f, q, &mut c), BahadurStatus::Ok);
        assert_eq!(bahadur_functional_pdf(f, q, &mut d), BahadurStatus::Ok);
        bahadur_functional_free(f);
    }
    assert!((q - 0.674_489_750_196_081_7).abs() < 1e-12);
    assert!((c - 0.5).abs() < 1e-14);
    assert!(d > 0.0);
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("powerlaw:alpha=-1").unwrap();
    let mut m = ptr::null_mut();
    let status = unsafe { bahadur_model_parse(bad.as_ptr(), &mut m) };
    assert_eq!(status, BahadurStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains("alpha must be positive"));

    let (mut v, mut r) = (0.0, BahadurRegime::Srd);
    assert_eq!(unsafe { bahadur_rate(0.0, 1, 100, &mut v, &mut r) }, BahadurStatus::InvalidArgument);
    assert_eq!(unsafe { bahadur_rate(0.3, 1, 100, ptr::null_mut(), &mut r) }, BahadurStatus::NullPointer);
    assert_eq!(unsafe { bahadur_functional_eval(ptr::null(), 1.0, &mut v) }, BahadurStatus::NullPointer);

    let f = functional("identity");
    let slow = model("powerlaw:alpha=0.3");
    let mut t = 0.0;
    assert_eq!(unsafe { bahadur_sigma2(f, 0.5, slow, 20, 1000, &mut v, &mut t) }, BahadurStatus::WrongRegime);
    unsafe {
        bahadur_functional_free(f);
        bahadur_model_free(slow);
    }
}

#[test]
fn rate_and_constants() {
    let (mut v, mut r) = (0.0, BahadurRegime::Srd);
    assert_eq!(unsafe { bahadur_rate(0.3, 1, 10_000, &mut v, &mut r) }, BahadurStatus::Ok);
    assert_eq!(r, BahadurRegime::Lrd);
    assert!((v - 10_000f64.powf(-0.15)).abs() < 1e-15);
    assert_eq!(unsafe { bahadur_rate(f64::INFINITY, 1, 100, &mut v, &mut r) }, BahadurStatus::Ok);
    assert_eq!(r, BahadurRegime::Srd);
    assert_eq!(unsafe { bahadur_rate(0.5, 2, 100, &mut v, &mut r) }, BahadurStatus::Ok);
    assert_eq!(r, BahadurRegime::Boundary);

    let mut k = 0.0;
    assert_eq!(unsafe { bahadur_k_const(1, 0.5, &mut k) }, BahadurStatus::Ok);
    assert!((k - 0.386_785).abs() < 1e-6);

    let f = functional("identity");
    let iid = model("iid");
    let (mut s, mut t) = (0.0, 0.0);
    assert_eq!(unsafe { bahadur_sigma2(f, 0.5, iid, 20, 10, &mut s, &mut t) }, BahadurStatus::Ok);
    assert!((s - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    unsafe {
        bahadur_functional_free(f);
        bahadur_model_free(iid);
    }
}

#[test]
fn coefficients_and_buffers() {
    let f = functional("abs");
    let mut u = 0.0;
    unsafe { bahadur_functional_quantile(f, 0.5, &mut u) };
    let mut buf = [0.0; 7];
    let mut rank = 0;
    let status = unsafe { bahadur_coefficients(f, u, 6, 1e-10, buf.as_mut_ptr(), buf.len(), &mut rank) };
    assert_eq!(status, BahadurStatus::Ok);
    assert_eq!(rank, 2);
    assert!(buf[1].abs() < 1e-14 && buf[2] != 0.0);
    let status = unsafe { bahadur_coefficients(f, u, 6, 1e-10, buf.as_mut_ptr(), 3, &mut rank) };
    assert_eq!(status, BahadurStatus::BufferTooSmall);
    unsafe { bahadur_functional_free(f) };
}

#[test]
fn sampling_is_deterministic() {
    let m = model("fgn:H=0.85");
    let mut rho = 0.0;
    unsafe { bahadur_model_rho(m, 1, &mut rho) };
    assert!((rho - (2f64.powf(1.7) - 2.0) / 2.0).abs() < 1e-12);
    let (mut a, mut b) = (vec![0.0; 300], vec![0.0; 300]);
    unsafe {
        assert_eq!(bahadur_model_sample(m, 300, 9, a.as_mut_ptr()), BahadurStatus::Ok);
        assert_eq!(bahadur_model_sample(m, 300, 9, b.as_mut_ptr()), BahadurStatus::Ok);
        bahadur_model_free(m);
    }
    assert_eq!(a, b);
    let mut q = 0.0;
    let data = [3.0, 1.0, 2.0];
    assert_eq!(unsafe { bahadur_sample_quantile(data.as_ptr(), 3, 0.5, &mut q) }, BahadurStatus::Ok);
    assert_eq!(q, 2.0);
    assert_eq!(unsafe { bahadur_sample_quantile(data.as_ptr(), 0, 0.5, &mut q) }, BahadurStatus::InvalidArgument);
}

fn study_text(s: *const BahadurStudy, csv: bool) -> String {
    let call = |buf: *mut c_char, len: usize, needed: &mut usize| unsafe {
        if csv {
            bahadur_study_csv(s, buf, len, needed)
        } else {
            bahadur_study_summary_json(s, buf, len, needed)
        }
    };
    let mut needed = 0;
    assert_eq!(call(ptr::null_mut(), 0, &mut needed), BahadurStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(call(buf.as_mut_ptr(), needed, &mut needed), BahadurStatus::Ok);
    let bytes: Vec<u8> = buf[..needed - 1].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn study_is_thread_independent() {
    let config = CString::new(
        r#"{"model":"ar:phi=0.5","functional":"identity","p":0.5,"n_grid":[64,128,256],"replicates":8,"base_seed":3}"#,
    )
    .unwrap();
    let mut runs = Vec::new();
    for threads in [1, 4] {
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { bahadur_study_run(config.as_ptr(), threads, &mut s) }, BahadurStatus::Ok);
        runs.push((study_text(s, false), study_text(s, true)));
        unsafe { bahadur_study_free(s) };
    }
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0].1.lines().nth(1).unwrap().starts_with("run_id,n,replicate"));
    assert_eq!(runs[0].1.lines().count(), 2 + 3 * 8);

    let summary = CString::new(runs[0].0.clone()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { bahadur_study_run(summary.as_ptr(), 2, &mut s) }, BahadurStatus::Ok);
    assert_eq!(study_text(s, false), runs[0].0);
    unsafe { bahadur_study_free(s) };
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/bahadur.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["bahadur_study_run", "bahadur_last_error", "BAHADUR_STATUS_OK", "BahadurModel"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    match Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99"]).arg(&header).status() {
        Ok(status) => assert!(status.success()),
        Err(_) => eprintln!("no C compiler found; skipped syntax check"),
    }
}
