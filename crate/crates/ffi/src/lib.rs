//! C ABI for `bahadur-core`.
//!
//! Every function returns a [`BahadurStatus`]; results go through out
//! pointers. On failure the message is kept per thread and can be copied out
//! with [`bahadur_last_error`]. Handles are opaque and must be released with
//! the matching `*_free` function.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bahadur::asymptotics::{classify_regime, k_const, rate_rn, sigma2_p, Regime};
use bahadur::experiments::{run_bahadur_study, with_threads, BahadurStudyResult, StudyConfig};
use bahadur::functionals::{cdf_gy, pdf_gy, true_quantile, FunctionalName, PiecewiseFunctional};
use bahadur::gaussproc::{CirculantEmbedding, CorrelationModel};
use bahadur::hermite::coefficients_of_indicator;
use bahadur::quantiles::sample_quantile;
use bahadur::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BahadurStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    WrongRegime = 4,
    Computation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BahadurRegime {
    Srd = 0,
    Boundary = 1,
    Lrd = 2,
}

impl From<Regime> for BahadurRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Srd => BahadurRegime::Srd,
            Regime::Boundary => BahadurRegime::Boundary,
            Regime::Lrd => BahadurRegime::Lrd,
        }
    }
}

/// A bundled functional `g`.
pub struct BahadurFunctional {
    inner: PiecewiseFunctional,
}

/// A correlation model of the Gaussian sequence.
pub struct BahadurModel {
    inner: CorrelationModel,
}

/// A finished Bahadur remainder study.
pub struct BahadurStudy {
    inner: BahadurStudyResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(BahadurStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::Config(_) => BahadurStatus::InvalidArgument,
            Error::OutOfRange { .. } => BahadurStatus::OutOfRange,
            Error::WrongRegime { .. } => BahadurStatus::WrongRegime,
            _ => BahadurStatus::Computation,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: BahadurStatus, msg: &str) -> Result<T, Failure> {
    Err(Failure(status, msg.to_string()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BahadurStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (BahadurStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(payload) => {
            let m = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (BahadurStatus::Panic, m)
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure(BahadurStatus::NullPointer, "null output pointer".into()))
}

unsafe fn in_ref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure(BahadurStatus::NullPointer, "null handle".into()))
}

unsafe fn in_str<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return fail(BahadurStatus::NullPointer, "null string");
    }
    CStr::from_ptr(s).to_str().map_err(|_| Failure(BahadurStatus::InvalidArgument, "string is not UTF-8".into()))
}

/// Copies `text` plus a NUL into `buf`; `needed` receives the full size.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Failure> {
    let size = text.len() + 1;
    if let Some(n) = needed.as_mut() {
        *n = size;
    }
    if buf.is_null() || len < size {
        return fail(BahadurStatus::BufferTooSmall, "buffer too small");
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf as *mut u8, text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

/// Copies the calling thread's last error message into `buf` and returns the
/// size it needs (including the NUL); an empty string means no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bahadur_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Creates a functional by name: `identity`, `abs`, `square` or `cube`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_functional_new(
    name: *const c_char,
    out: *mut *mut BahadurFunctional,
) -> BahadurStatus {
    guard(|| {
        let out = out_ref(out)?;
        let name: FunctionalName = in_str(name)?.parse()?;
        *out = Box::into_raw(Box::new(BahadurFunctional { inner: name.build() }));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle from [`bahadur_functional_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn bahadur_functional_free(f: *mut BahadurFunctional) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `g(t)`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_functional_eval(f: *const BahadurFunctional, t: f64, out: *mut f64) -> BahadurStatus {
    guard(|| {
        *out_ref(out)? = in_ref(f)?.inner.eval(t);
        Ok(())
    })
}

/// Quantile of `g(Y)` at probability `p`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_functional_quantile(
    f: *const BahadurFunctional,
    p: f64,
    out: *mut f64,
) -> BahadurStatus {
    guard(|| {
        *out_ref(out)? = true_quantile(&in_ref(f)?.inner, p)?;
        Ok(())
    })
}

/// CDF of `g(Y)` at `u`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_functional_cdf(f: *const BahadurFunctional, u: f64, out: *mut f64) -> BahadurStatus {
    guard(|| {
        *out_ref(out)? = cdf_gy(&in_ref(f)?.inner, u);
        Ok(())
    })
}

/// Density of `g(Y)` at `u`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_functional_pdf(f: *const BahadurFunctional, u: f64, out: *mut f64) -> BahadurStatus {
    guard(|| {
        *out_ref(out)? = pdf_gy(&in_ref(f)?.inner, u)?;
        Ok(())
    })
}

/// Hermite coefficients `c_0..=c_J` of the indicator of `{g(Y) <= u}`.
/// `buf` must hold `max_order + 1` values; `rank` receives the Hermite rank.
///
/// # Safety
/// `f` must be a live handle; `buf` valid for `len` doubles; `rank` writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_coefficients(
    f: *const BahadurFunctional,
    u: f64,
    max_order: usize,
    zero_tol: f64,
    buf: *mut f64,
    len: usize,
    rank: *mut usize,
) -> BahadurStatus {
    guard(|| {
        let rank = out_ref(rank)?;
        if buf.is_null() {
            return fail(BahadurStatus::NullPointer, "null buffer");
        }
        if len < max_order + 1 {
            return fail(BahadurStatus::BufferTooSmall, "buffer needs max_order + 1 entries");
        }
        let c = coefficients_of_indicator(&in_ref(f)?.inner, u, max_order, zero_tol)?;
        std::slice::from_raw_parts_mut(buf, max_order + 1).copy_from_slice(&c.coeffs);
        *rank = c.rank.unwrap_or(0);
        Ok(())
    })
}

/// Parses a model such as `powerlaw:alpha=0.3`, `fgn:H=0.85`, `iid`, `ar:phi=0.5`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_model_parse(spec: *const c_char, out: *mut *mut BahadurModel) -> BahadurStatus {
    guard(|| {
        let out = out_ref(out)?;
        let inner: CorrelationModel = in_str(spec)?.parse()?;
        *out = Box::into_raw(Box::new(BahadurModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from [`bahadur_model_parse`], freed once.
#[no_mangle]
pub unsafe extern "C" fn bahadur_model_free(m: *mut BahadurModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Correlation at `lag`.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_model_rho(m: *const BahadurModel, lag: i64, out: *mut f64) -> BahadurStatus {
    guard(|| {
        *out_ref(out)? = in_ref(m)?.inner.rho(lag);
        Ok(())
    })
}

/// Draws an exact path of length `n` into `buf`, deterministic in `seed`.
///
/// # Safety
/// `m` must be a live handle; `buf` must be valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn bahadur_model_sample(
    m: *const BahadurModel,
    n: usize,
    seed: u64,
    buf: *mut f64,
) -> BahadurStatus {
    guard(|| {
        if buf.is_null() {
            return fail(BahadurStatus::NullPointer, "null buffer");
        }
        let path = CirculantEmbedding::new(in_ref(m)?.inner, n)?.sample(seed);
        std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&path.values);
        Ok(())
    })
}

/// The rate `r_n` for `(alpha, tau_bar)`; pass `INFINITY` for short memory.
///
/// # Safety
/// `value` and `regime` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_rate(
    alpha: f64,
    tau_bar: usize,
    n: u64,
    value: *mut f64,
    regime: *mut BahadurRegime,
) -> BahadurStatus {
    guard(|| {
        let (value, regime) = (out_ref(value)?, out_ref(regime)?);
        if !(alpha > 0.0) {
            return fail(BahadurStatus::InvalidArgument, "alpha must be positive");
        }
        if tau_bar < 1 {
            return fail(BahadurStatus::InvalidArgument, "tau must be at least 1");
        }
        let spec = classify_regime(alpha, tau_bar);
        *value = rate_rn(&spec, n)?;
        *regime = spec.regime.into();
        Ok(())
    })
}

/// `K(tau, alpha)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_k_const(tau: usize, alpha: f64, out: *mut f64) -> BahadurStatus {
    guard(|| {
        *out_ref(out)? = k_const(tau, alpha)?;
        Ok(())
    })
}

/// SRD limit variance of the `p`-quantile of `g(Y)`, with its truncation bound.
///
/// # Safety
/// Handles must be live; `value` and `tail_bound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_sigma2(
    f: *const BahadurFunctional,
    p: f64,
    m: *const BahadurModel,
    max_order: usize,
    lag_cap: usize,
    value: *mut f64,
    tail_bound: *mut f64,
) -> BahadurStatus {
    guard(|| {
        let (value, tail_bound) = (out_ref(value)?, out_ref(tail_bound)?);
        let s = sigma2_p(&in_ref(f)?.inner, p, &in_ref(m)?.inner, max_order, lag_cap)?;
        *value = s.value;
        *tail_bound = s.tail_bound;
        Ok(())
    })
}

/// The `ceil(n p)`-th order statistic of `data`.
///
/// # Safety
/// `data` must be valid for `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_sample_quantile(data: *const f64, n: usize, p: f64, out: *mut f64) -> BahadurStatus {
    guard(|| {
        let out = out_ref(out)?;
        if data.is_null() {
            return fail(BahadurStatus::NullPointer, "null data");
        }
        *out = sample_quantile(std::slice::from_raw_parts(data, n), p)?;
        Ok(())
    })
}

/// Runs a study from a JSON config (a bare config or a previous summary).
/// `threads = 0` uses every core; results do not depend on it.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bahadur_study_run(
    config_json: *const c_char,
    threads: usize,
    out: *mut *mut BahadurStudy,
) -> BahadurStatus {
    guard(|| {
        let out = out_ref(out)?;
        let mut value: serde_json::Value = serde_json::from_str(in_str(config_json)?)
            .map_err(|e| Failure(BahadurStatus::InvalidArgument, e.to_string()))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        let mut config: StudyConfig =
            serde_json::from_value(value).map_err(|e| Failure(BahadurStatus::InvalidArgument, e.to_string()))?;
        config.output = None;
        let inner = with_threads((threads > 0).then_some(threads), || run_bahadur_study(&config))??;
        *out = Box::into_raw(Box::new(BahadurStudy { inner }));
        Ok(())
    })
}

/// Summary JSON of a study. Call with a null `buf` to learn the size.
///
/// # Safety
/// `s` must be a live handle; `buf` null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bahadur_study_summary_json(
    s: *const BahadurStudy,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> BahadurStatus {
    guard(|| {
        let json = serde_json::to_string(&in_ref(s)?.inner).expect("summary serializes");
        copy_out(&json, buf, len, needed)
    })
}

/// Per-replicate CSV of a study. Call with a null `buf` to learn the size.
///
/// # Safety
/// `s` must be a live handle; `buf` null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bahadur_study_csv(
    s: *const BahadurStudy,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> BahadurStatus {
    guard(|| {
        let mut csv = Vec::new();
        in_ref(s)?.inner.write_csv(&mut csv).expect("in-memory write");
        copy_out(std::str::from_utf8(&csv).expect("utf-8 csv"), buf, len, needed)
    })
}

/// # Safety
/// `s` must be null or a handle from [`bahadur_study_run`], freed once.
#[no_mangle]
pub unsafe extern "C" fn bahadur_study_free(s: *mut BahadurStudy) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
