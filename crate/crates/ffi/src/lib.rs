//! C ABI over `affect-core`.
//!
//! Conventions: every fallible entry point returns an [`AffectStatus`] and
//! writes results through out-pointers. On failure the message is kept in a
//! thread-local slot readable with [`affect_last_error_message`]. Objects
//! with internal state (flow fields, fitted curves) are opaque handles that
//! the caller releases with the matching `*_free` function.
//!
//! Panics never cross the boundary; they surface as `AFFECT_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use affect_core::curve::{
    bin_state, fit_affective_curve, to_sam_scale, AffectiveCurve, AffectiveState, CurveConfig,
    SamScalePair, StateThresholds,
};
use affect_core::eeg::{butter_highpass, filtfilt};
use affect_core::flow::{estimate_flow, motion_activity, motion_component, FlowConfig, FlowField};
use affect_core::ingest::GrayImage;
use affect_core::{affect, eval, motivation, pipeline, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffectStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InsufficientData = 5,
    Numeric = 6,
    Pipeline = 7,
    Panic = 8,
}

/// The nine arousal/valence states, low arousal first, negative valence
/// first within each arousal level.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffectState {
    Lanv = 0,
    Lauv = 1,
    Lapv = 2,
    Manv = 3,
    Mauv = 4,
    Mapv = 5,
    Hanv = 6,
    Hauv = 7,
    Hapv = 8,
}

const STATES: [AffectState; 9] = [
    AffectState::Lanv,
    AffectState::Lauv,
    AffectState::Lapv,
    AffectState::Manv,
    AffectState::Mauv,
    AffectState::Mapv,
    AffectState::Hanv,
    AffectState::Hauv,
    AffectState::Hapv,
];

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffectDecomposition {
    pub d1: f64,
    pub d2: f64,
    pub h1: f64,
    pub h2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffectParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha1: f64,
    pub nu1: f64,
    pub smoothing_window_s: f64,
}

/// Opaque block-matching flow field.
pub struct AffectFlowField {
    inner: FlowField,
}

/// Opaque fitted affective curve.
pub struct AffectCurve {
    inner: AffectiveCurve,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> AffectStatus {
    match err {
        Error::Io { .. } | Error::EmptyDirectory { .. } => AffectStatus::Io,
        Error::Pgm { .. } | Error::Csv { .. } | Error::Config(_) => AffectStatus::Parse,
        Error::InsufficientData(_) | Error::NoOverlap { .. } | Error::SensorGap { .. } => {
            AffectStatus::InsufficientData
        }
        Error::SingularFit(_) | Error::Numeric(_) => AffectStatus::Numeric,
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => {
            AffectStatus::InvalidArgument
        }
    }
}

struct Fail(AffectStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AffectStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(AffectStatus::InvalidArgument, msg.into())
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AffectStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AffectStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            AffectStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn input<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn affect_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread, or NULL if the last call
/// succeeded. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn affect_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Short static description of a status code.
#[no_mangle]
pub extern "C" fn affect_status_name(status: AffectStatus) -> *const c_char {
    let s: &'static str = match status {
        AffectStatus::Ok => "ok\0",
        AffectStatus::NullPointer => "null pointer\0",
        AffectStatus::InvalidArgument => "invalid argument\0",
        AffectStatus::Io => "i/o error\0",
        AffectStatus::Parse => "parse error\0",
        AffectStatus::InsufficientData => "insufficient data\0",
        AffectStatus::Numeric => "numerical failure\0",
        AffectStatus::Pipeline => "pipeline failure\0",
        AffectStatus::Panic => "internal panic\0",
    };
    s.as_ptr() as *const c_char
}

/// Estimates block-matching flow from `frame_a` to `frame_b`, both 8-bit
/// grayscale, row-major, `width * height` bytes. Zero for `block_size`,
/// `search_radius` or `levels` selects the library default.
#[no_mangle]
pub unsafe extern "C" fn affect_flow_estimate(
    frame_a: *const u8,
    frame_b: *const u8,
    width: usize,
    height: usize,
    block_size: usize,
    search_radius: usize,
    levels: usize,
    out_field: *mut *mut AffectFlowField,
) -> AffectStatus {
    guard(|| {
        let slot = out(out_field, "out_field")?;
        *slot = ptr::null_mut();
        let n = width
            .checked_mul(height)
            .ok_or_else(|| invalid("image size overflows"))?;
        let a = GrayImage::new(width, height, input(frame_a, n, "frame_a")?.to_vec())?;
        let b = GrayImage::new(width, height, input(frame_b, n, "frame_b")?.to_vec())?;
        let d = FlowConfig::default();
        let cfg = FlowConfig {
            block_size: if block_size == 0 {
                d.block_size
            } else {
                block_size
            },
            search_radius: if search_radius == 0 {
                d.search_radius
            } else {
                search_radius
            },
            levels: if levels == 0 { d.levels } else { levels },
        };
        let inner = estimate_flow(&a, &b, &cfg)?;
        *slot = Box::into_raw(Box::new(AffectFlowField { inner }));
        Ok(())
    })
}

/// Block-grid dimensions of a flow field.
#[no_mangle]
pub unsafe extern "C" fn affect_flow_dims(
    field: *const AffectFlowField,
    out_cols: *mut usize,
    out_rows: *mut usize,
) -> AffectStatus {
    guard(|| {
        let f = &field.as_ref().ok_or_else(|| null("field"))?.inner;
        *out(out_cols, "out_cols")? = f.cols();
        *out(out_rows, "out_rows")? = f.rows();
        Ok(())
    })
}

/// Copies the flow vectors as interleaved `(dx, dy)` pairs, row-major over
/// the block grid. `capacity` counts doubles and must be at least
/// `2 * cols * rows`.
#[no_mangle]
pub unsafe extern "C" fn affect_flow_vectors(
    field: *const AffectFlowField,
    out_xy: *mut f64,
    capacity: usize,
) -> AffectStatus {
    guard(|| {
        let f = &field.as_ref().ok_or_else(|| null("field"))?.inner;
        let need = 2 * f.len();
        if capacity < need {
            return Err(invalid(format!(
                "buffer holds {capacity} doubles, need {need}"
            )));
        }
        if out_xy.is_null() {
            return Err(null("out_xy"));
        }
        let dst = slice::from_raw_parts_mut(out_xy, need);
        for (i, v) in f.vectors().iter().enumerate() {
            dst[2 * i] = v[0];
            dst[2 * i + 1] = v[1];
        }
        Ok(())
    })
}

/// Mean flow magnitude normalized by `v_max` and clamped to [0,1].
#[no_mangle]
pub unsafe extern "C" fn affect_flow_activity(
    field: *const AffectFlowField,
    v_max: f64,
    out_activity: *mut f64,
) -> AffectStatus {
    guard(|| {
        let f = &field.as_ref().ok_or_else(|| null("field"))?.inner;
        *out(out_activity, "out_activity")? = motion_activity(f, v_max)?;
        Ok(())
    })
}

/// Releases a flow field. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn affect_flow_free(field: *mut AffectFlowField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Gated motion component `m = m_bar * (1 - g)`.
#[no_mangle]
pub unsafe extern "C" fn affect_motion_component(
    m_bar: f64,
    gate: f64,
    out_m: *mut f64,
) -> AffectStatus {
    guard(|| {
        *out(out_m, "out_m")? = motion_component(m_bar, gate)?;
        Ok(())
    })
}

/// Splits the 2x2 affine matrix `chi` (row-major `[c1, c3, c2, c4]`) into
/// divergence, curl and the two deformation terms.
#[no_mangle]
pub unsafe extern "C" fn affect_decompose(
    chi: *const f64,
    out_d: *mut AffectDecomposition,
) -> AffectStatus {
    guard(|| {
        let c = input(chi, 4, "chi")?;
        let d = motivation::decompose([[c[0], c[1]], [c[2], c[3]]]);
        *out(out_d, "out_d")? = AffectDecomposition {
            d1: d.d1,
            d2: d.d2,
            h1: d.h1,
            h2: d.h2,
        };
        Ok(())
    })
}

/// Default model parameters.
#[no_mangle]
pub extern "C" fn affect_params_default() -> AffectParams {
    let p = affect::AffectParams::default();
    AffectParams {
        lambda1: p.lambda1,
        lambda2: p.lambda2,
        lambda3: p.lambda3,
        alpha1: p.alpha1,
        nu1: p.nu1,
        smoothing_window_s: p.smoothing_window_s,
    }
}

/// Contentment component at `t_elapsed` seconds into a situation.
#[no_mangle]
pub unsafe extern "C" fn affect_contentment(
    t_elapsed: f64,
    params: *const AffectParams,
    out_l: *mut f64,
) -> AffectStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let p = affect::AffectParams {
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            lambda3: p.lambda3,
            alpha1: p.alpha1,
            nu1: p.nu1,
            smoothing_window_s: p.smoothing_window_s,
        };
        p.validate()?;
        *out(out_l, "out_l")? = affect::contentment_component(t_elapsed, &p);
        Ok(())
    })
}

/// Fits the arousal-over-valence curve through `n` points. `noise_variance`
/// and `length_scale` fall back to the library defaults when `<= 0`.
#[no_mangle]
pub unsafe extern "C" fn affect_curve_fit(
    valence: *const f64,
    arousal: *const f64,
    n: usize,
    noise_variance: f64,
    length_scale: f64,
    out_curve: *mut *mut AffectCurve,
) -> AffectStatus {
    guard(|| {
        let slot = out(out_curve, "out_curve")?;
        *slot = ptr::null_mut();
        let v = input(valence, n, "valence")?;
        let a = input(arousal, n, "arousal")?;
        let points: Vec<(f64, f64)> = v.iter().copied().zip(a.iter().copied()).collect();
        let mut cfg = CurveConfig::default();
        if noise_variance > 0.0 {
            cfg.noise_variance = noise_variance;
        }
        if length_scale > 0.0 {
            cfg.length_scale = Some(length_scale);
        }
        let inner = fit_affective_curve(&points, &cfg)?;
        *slot = Box::into_raw(Box::new(AffectCurve { inner }));
        Ok(())
    })
}

/// Posterior mean and variance of arousal at valence `v`. Either output may
/// be NULL.
#[no_mangle]
pub unsafe extern "C" fn affect_curve_predict(
    curve: *const AffectCurve,
    v: f64,
    out_mean: *mut f64,
    out_variance: *mut f64,
) -> AffectStatus {
    guard(|| {
        let c = &curve.as_ref().ok_or_else(|| null("curve"))?.inner;
        if !v.is_finite() {
            return Err(invalid("valence must be finite"));
        }
        if let Some(m) = out_mean.as_mut() {
            *m = c.mean(v);
        }
        if let Some(s) = out_variance.as_mut() {
            *s = c.variance(v);
        }
        Ok(())
    })
}

/// Length scale the curve was fitted with; 0 for a degenerate curve fitted
/// to a single distinct valence.
#[no_mangle]
pub unsafe extern "C" fn affect_curve_length_scale(
    curve: *const AffectCurve,
    out_ell: *mut f64,
) -> AffectStatus {
    guard(|| {
        let c = &curve.as_ref().ok_or_else(|| null("curve"))?.inner;
        *out(out_ell, "out_ell")? = c.length_scale().unwrap_or(0.0);
        Ok(())
    })
}

/// Releases a curve. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn affect_curve_free(curve: *mut AffectCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Maps valence in [-1,1] and arousal in [0,1] onto the 0..6 rating scale.
#[no_mangle]
pub unsafe extern "C" fn affect_to_sam_scale(
    valence: f64,
    arousal: f64,
    out_v6: *mut f64,
    out_a6: *mut f64,
) -> AffectStatus {
    guard(|| {
        let p = to_sam_scale(valence, arousal)?;
        *out(out_v6, "out_v6")? = p.v6;
        *out(out_a6, "out_a6")? = p.a6;
        Ok(())
    })
}

/// Bins a rating-scale pair into one of nine states with the default
/// thresholds.
#[no_mangle]
pub unsafe extern "C" fn affect_bin_state(
    v6: f64,
    a6: f64,
    out_state: *mut AffectState,
) -> AffectStatus {
    guard(|| {
        if !(v6.is_finite() && a6.is_finite()) {
            return Err(invalid("scores must be finite"));
        }
        let s = bin_state(SamScalePair { v6, a6 }, &StateThresholds::default());
        let idx = AffectiveState::ALL
            .iter()
            .position(|x| *x == s)
            .unwrap_or(0);
        *out(out_state, "out_state")? = STATES[idx];
        Ok(())
    })
}

/// Four-letter code of a state, e.g. "HAPV".
#[no_mangle]
pub extern "C" fn affect_state_code(state: AffectState) -> *const c_char {
    let s: &'static str = match state {
        AffectState::Lanv => "LANV\0",
        AffectState::Lauv => "LAUV\0",
        AffectState::Lapv => "LAPV\0",
        AffectState::Manv => "MANV\0",
        AffectState::Mauv => "MAUV\0",
        AffectState::Mapv => "MAPV\0",
        AffectState::Hanv => "HANV\0",
        AffectState::Hauv => "HAUV\0",
        AffectState::Hapv => "HAPV\0",
    };
    s.as_ptr() as *const c_char
}

type Metric = fn(&[f64], &[f64]) -> affect_core::Result<f64>;

unsafe fn metric(f: Metric, x: *const f64, y: *const f64, n: usize, res: *mut f64) -> AffectStatus {
    guard(|| {
        let x = input(x, n, "x")?;
        let y = input(y, n, "y")?;
        *out(res, "out")? = f(x, y)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn affect_rmse(
    pred: *const f64,
    truth: *const f64,
    n: usize,
    out_rmse: *mut f64,
) -> AffectStatus {
    metric(eval::rmse, pred, truth, n, out_rmse)
}

#[no_mangle]
pub unsafe extern "C" fn affect_pearson(
    x: *const f64,
    y: *const f64,
    n: usize,
    out_r: *mut f64,
) -> AffectStatus {
    metric(eval::pearson, x, y, n, out_r)
}

#[no_mangle]
pub unsafe extern "C" fn affect_spearman(
    x: *const f64,
    y: *const f64,
    n: usize,
    out_rho: *mut f64,
) -> AffectStatus {
    metric(eval::spearman, x, y, n, out_rho)
}

/// Zero-phase Butterworth high-pass of `n` samples into `out_y` (may alias
/// `x`). `order` must be even.
#[no_mangle]
pub unsafe extern "C" fn affect_highpass(
    x: *const f64,
    n: usize,
    sample_rate: f64,
    cutoff_hz: f64,
    order: usize,
    out_y: *mut f64,
) -> AffectStatus {
    guard(|| {
        let sos = butter_highpass(order, cutoff_hz, sample_rate)?;
        let y = filtfilt(&sos, input(x, n, "x")?);
        if n > 0 {
            if out_y.is_null() {
                return Err(null("out_y"));
            }
            ptr::copy(y.as_ptr(), out_y, n);
        }
        Ok(())
    })
}

/// Runs the labeling pipeline for the JSON config at `config_path`, writing
/// artifacts under `out_dir`. Per-situation failures do not abort the run;
/// they are counted in `out_failures` (may be NULL) and reported as
/// `AFFECT_STATUS_PIPELINE`.
#[no_mangle]
pub unsafe extern "C" fn affect_run_pipeline(
    config_path: *const c_char,
    out_dir: *const c_char,
    workers: usize,
    out_failures: *mut usize,
) -> AffectStatus {
    guard(|| {
        let cfg_path = path_arg(config_path, "config_path")?;
        let out_path = path_arg(out_dir, "out_dir")?;
        let mut cfg = pipeline::PipelineConfig::load(cfg_path)?;
        if workers > 0 {
            cfg.workers = workers;
        }
        let report = pipeline::run_pipeline(&cfg, out_path)?;
        if let Some(f) = out_failures.as_mut() {
            *f = report.failures.len();
        }
        if let Some(first) = report.failures.first() {
            return Err(Fail(
                AffectStatus::Pipeline,
                format!(
                    "{} failure(s); first: situation {} stage {}: {}",
                    report.failures.len(),
                    first.situation,
                    first.stage,
                    first.message
                ),
            ));
        }
        Ok(())
    })
}
