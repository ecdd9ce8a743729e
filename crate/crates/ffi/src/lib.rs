//! C interface to score calibration, effective rank and frozen encoders.
//!
//! Every function returns a [`CfStatus`]. On failure the message is kept per
//! thread and can be copied out with [`cf_last_error_message`]. Objects are
//! opaque handles released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use contrafraud::calibrate::{self, Estimator, Side};
use contrafraud::classify::ScoreSet;
use contrafraud::encoder::{load_model, TransformerEncoder};
use contrafraud::numkernel::Tensor;
use contrafraud::pipeline::{rankme, PipelineConfig};
use contrafraud::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Degenerate = 4,
    Checkpoint = 5,
    ConfigMismatch = 6,
    Io = 7,
    Numeric = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfSide {
    /// Fraud declarations; null accounts are non-fraud.
    High = 0,
    /// Non-fraud declarations; null accounts are fraud.
    Low = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfEstimator {
    Strict = 0,
    Conservative = 1,
}

/// Summary of one side of the two-threshold procedure.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CfDecision {
    /// Number of rejections; 0 when BH found no crossing.
    pub bh_index: usize,
    /// Valid only when `has_threshold` is nonzero.
    pub threshold: f64,
    pub has_threshold: u8,
    /// Level handed to BH; the corrected level on the low side.
    pub bh_level: f64,
    pub false_discoveries: usize,
    pub realized_fdp: f64,
}

/// Labeled scores.
pub struct CfScoreSet(ScoreSet);

/// A frozen encoder loaded from a checkpoint.
pub struct CfEncoder(TransformerEncoder);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> CfStatus {
    match e {
        Error::InvalidArgument(_) | Error::Shape { .. } => CfStatus::InvalidArgument,
        Error::Record { .. } | Error::Data(_) | Error::Csv(_) | Error::TomlDe(_) | Error::TomlSer(_) => CfStatus::Data,
        Error::Degenerate(_) => CfStatus::Degenerate,
        Error::Checkpoint(_) => CfStatus::Checkpoint,
        Error::ConfigMismatch { .. } => CfStatus::ConfigMismatch,
        Error::Io(_) => CfStatus::Io,
        Error::NonFinite { .. } | Error::Training(_) => CfStatus::Numeric,
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

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CfStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CfStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CfStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path<'a>(p: *const c_char, what: &'static str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::InvalidArgument(format!("{what} is not UTF-8"))))?;
    Ok(Path::new(s))
}

fn side(s: CfSide) -> Side {
    match s {
        CfSide::High => Side::High,
        CfSide::Low => Side::Low,
    }
}

fn estimator(e: CfEstimator) -> Estimator {
    match e {
        CfEstimator::Strict => Estimator::Strict,
        CfEstimator::Conservative => Estimator::Conservative,
    }
}

/// Length in bytes of the calling thread's last error message, excluding the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn cf_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a score set; account `i` is named by its index.
///
/// # Safety
/// `scores` and `labels` must point to `n` readable values; `out_set` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_score_set_new(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out_set: *mut *mut CfScoreSet,
) -> CfStatus {
    guard(|| {
        let o = out(out_set, "out_set")?;
        let s = slice(scores, n, "scores")?.to_vec();
        let y = slice(labels, n, "labels")?.to_vec();
        let set = ScoreSet::new((0..n).map(|i| i.to_string()).collect(), s, y)?;
        *o = Box::into_raw(Box::new(CfScoreSet(set)));
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from [`cf_score_set_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cf_score_set_free(set: *mut CfScoreSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Leave-one-out p-values of every account, in input order.
///
/// # Safety
/// `set` must be a live handle; `out_p` must hold as many values as the set.
#[no_mangle]
pub unsafe extern "C" fn cf_pvalues(
    set: *const CfScoreSet,
    which: CfSide,
    est: CfEstimator,
    out_p: *mut f64,
) -> CfStatus {
    guard(|| {
        let set = &set.as_ref().ok_or(Fail::Null("set"))?.0;
        let p = calibrate::pvalues_with(set, side(which), estimator(est))?;
        slice_mut(out_p, set.len(), "out_p")?.copy_from_slice(&p.values);
        Ok(())
    })
}

/// Number of BH rejections at `level`; 0 when nothing crosses.
///
/// # Safety
/// `p` must point to `n` readable values; `out_index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_bh_index(p: *const f64, n: usize, level: f64, out_index: *mut usize) -> CfStatus {
    guard(|| {
        let o = out(out_index, "out_index")?;
        *o = calibrate::bh_index(slice(p, n, "p")?, level)?.unwrap_or(0);
        Ok(())
    })
}

/// Corrected low-side level; `out_capped` is set to 1 when it was capped at 1.
///
/// # Safety
/// `labels` must point to `n` readable values; both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_adjust_alpha_low(
    alpha: f64,
    labels: *const u8,
    n: usize,
    out_level: *mut f64,
    out_capped: *mut u8,
) -> CfStatus {
    guard(|| {
        let a = calibrate::adjust_alpha_low(alpha, slice(labels, n, "labels")?)?;
        *out(out_level, "out_level")? = a.value;
        *out(out_capped, "out_capped")? = u8::from(a.capped);
        Ok(())
    })
}

fn summary(d: &calibrate::ThresholdDecision, labels: &[u8]) -> CfDecision {
    CfDecision {
        bh_index: d.bh_index.unwrap_or(0),
        threshold: d.threshold.unwrap_or(f64::NAN),
        has_threshold: u8::from(d.threshold.is_some()),
        bh_level: d.adjusted_level.unwrap_or(d.level),
        false_discoveries: d.false_discoveries(labels),
        realized_fdp: d.realized_fdp.unwrap_or(f64::NAN),
    }
}

/// Both thresholds with leave-one-out p-values on the set itself.
///
/// # Safety
/// `set` must be a live handle; `high` and `low` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_thresholds(
    set: *const CfScoreSet,
    alpha_high: f64,
    alpha_low: f64,
    est: CfEstimator,
    high: *mut CfDecision,
    low: *mut CfDecision,
) -> CfStatus {
    guard(|| {
        let set = &set.as_ref().ok_or(Fail::Null("set"))?.0;
        let h = out(high, "high")?;
        let l = out(low, "low")?;
        let (dh, dl) = calibrate::thresholds_with(set, alpha_high, alpha_low, estimator(est))?;
        *h = summary(&dh, &set.labels);
        *l = summary(&dl, &set.labels);
        Ok(())
    })
}

/// Effective rank of a row-major `rows x cols` matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable values; `out_rank` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cf_rankme(data: *const f64, rows: usize, cols: usize, out_rank: *mut f64) -> CfStatus {
    guard(|| {
        let o = out(out_rank, "out_rank")?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidArgument("matrix size overflows".into()))?;
        let d = slice(data, n, "data")?;
        let m: Vec<&[f64]> = if cols == 0 {
            Vec::new()
        } else {
            d.chunks(cols).collect()
        };
        *o = rankme(&m)?;
        Ok(())
    })
}

/// Loads an encoder checkpoint written with the architecture in the pipeline
/// configuration at `config_path`, for inputs of width `d_input`.
///
/// # Safety
/// Both paths must be NUL-terminated strings; `out_encoder` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_encoder_load(
    config_path: *const c_char,
    checkpoint_path: *const c_char,
    d_input: usize,
    out_encoder: *mut *mut CfEncoder,
) -> CfStatus {
    guard(|| {
        let o = out(out_encoder, "out_encoder")?;
        let cfg = PipelineConfig::load(path(config_path, "config_path")?)?;
        let (enc, _) = load_model(
            path(checkpoint_path, "checkpoint_path")?,
            &cfg.encoder_for(d_input)?,
            &cfg.head,
        )?;
        *o = Box::into_raw(Box::new(CfEncoder(enc)));
        Ok(())
    })
}

/// # Safety
/// `enc` must be null or a handle from [`cf_encoder_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cf_encoder_free(enc: *mut CfEncoder) {
    if !enc.is_null() {
        drop(Box::from_raw(enc));
    }
}

/// Width of the representation [`cf_encoder_embed`] writes; 0 for null.
///
/// # Safety
/// `enc` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_encoder_latent_dim(enc: *const CfEncoder) -> usize {
    enc.as_ref().map_or(0, |e| e.0.config.d_latent)
}

/// Input width the encoder expects; 0 for null.
///
/// # Safety
/// `enc` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_encoder_input_dim(enc: *const CfEncoder) -> usize {
    enc.as_ref().map_or(0, |e| e.0.config.d_input)
}

/// Representation of one encoded series of `len` events stored row-major
/// with `width` columns each.
///
/// # Safety
/// `events` must point to `len * width` readable values and `out_u` to
/// [`cf_encoder_latent_dim`] writable values.
#[no_mangle]
pub unsafe extern "C" fn cf_encoder_embed(
    enc: *const CfEncoder,
    events: *const f64,
    len: usize,
    width: usize,
    out_u: *mut f64,
) -> CfStatus {
    guard(|| {
        let enc = &enc.as_ref().ok_or(Fail::Null("enc"))?.0;
        let n = len
            .checked_mul(width)
            .ok_or_else(|| Error::InvalidArgument("series size overflows".into()))?;
        let x = Tensor::matrix(len, width, slice(events, n, "events")?.to_vec())?;
        let u = enc.encode_one(&x, &vec![true; len])?;
        slice_mut(out_u, u.len(), "out_u")?.copy_from_slice(&u);
        Ok(())
    })
}
