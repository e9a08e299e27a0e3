//! C interface to the hyfacial library.
//!
//! Every fallible call returns an `HyfStatus`; on failure the message is
//! available from `hyf_last_error_message` on the same thread. Objects are
//! opaque handles owned by the caller and released with their `_free`
//! function. Strings returned by the library are released with
//! `hyf_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hyfacial::dataset::GrayImage;
use hyfacial::descriptors::{orb_detect_describe, sift_with_params, DescriptorSet, DescriptorVectors, OrbParams, SiftParams};
use hyfacial::error::Error;
use hyfacial::fusion::{load_deep_features, DeepFeatureTable};
use hyfacial::pipeline::{run_pipeline, RunConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HyfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// The request itself was rejected (bad config, missing deep features, ...).
    Validation = 4,
    /// A pipeline stage or file operation failed.
    Failed = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
    OutOfRange = 7,
}

pub struct HyfImage(GrayImage);

pub struct HyfDescriptors(DescriptorSet);

pub struct HyfDeepFeatures(DeepFeatureTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

struct Failure(HyfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() { HyfStatus::Validation } else { HyfStatus::Failed };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HyfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HyfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HyfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(HyfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HyfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn hyf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hyf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn hyf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Copies `height * width` row-major intensities in [0, 1] into a new image.
///
/// # Safety
/// `pixels` must point to `height * width` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hyf_image_new(
    height: usize,
    width: usize,
    pixels: *const f64,
    out: *mut *mut HyfImage,
) -> HyfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        let n = height
            .checked_mul(width)
            .ok_or_else(|| Failure(HyfStatus::InvalidArgument, "image size overflows".into()))?;
        let data = std::slice::from_raw_parts(pixels, n).to_vec();
        let img = GrayImage::new(height, width, data).map_err(|e| Failure(HyfStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(HyfImage(img)));
        Ok(())
    })
}

/// # Safety
/// `img` must come from `hyf_image_new`, or be null.
#[no_mangle]
pub unsafe extern "C" fn hyf_image_free(img: *mut HyfImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

unsafe fn describe(
    img: *const HyfImage,
    out: *mut *mut HyfDescriptors,
    f: impl FnOnce(&GrayImage) -> Result<DescriptorSet, String>,
) -> HyfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let img = handle(img, "img")?;
        let ds = f(&img.0).map_err(|e| Failure(HyfStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(HyfDescriptors(ds)));
        Ok(())
    })
}

/// SIFT keypoints and 128-value descriptors with default parameters.
///
/// # Safety
/// `img` must be a live image handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hyf_sift_describe(img: *const HyfImage, out: *mut *mut HyfDescriptors) -> HyfStatus {
    describe(img, out, |im| sift_with_params(im, &SiftParams::default()).map_err(|e| e.to_string()))
}

/// FAST keypoints and 256-bit ORB descriptors with default parameters.
///
/// # Safety
/// `img` must be a live image handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hyf_orb_describe(img: *const HyfImage, out: *mut *mut HyfDescriptors) -> HyfStatus {
    describe(img, out, |im| orb_detect_describe(im, &OrbParams::default()).map_err(|e| e.to_string()))
}

/// Number of keypoints, or 0 for a null handle.
///
/// # Safety
/// `ds` must be a live descriptor handle or null.
#[no_mangle]
pub unsafe extern "C" fn hyf_descriptors_len(ds: *const HyfDescriptors) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Values per descriptor row: 128 for SIFT, 256 bits for ORB.
///
/// # Safety
/// `ds` must be a live descriptor handle or null.
#[no_mangle]
pub unsafe extern "C" fn hyf_descriptors_dim(ds: *const HyfDescriptors) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dim())
}

/// Keypoint `i` as (x, y, scale, orientation in radians).
///
/// # Safety
/// `ds` must be a live descriptor handle; `out` must point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn hyf_descriptors_keypoint(ds: *const HyfDescriptors, i: usize, out: *mut f64) -> HyfStatus {
    guard(|| {
        let ds = handle(ds, "ds")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let kp = ds.0.keypoints.get(i).ok_or_else(|| out_of_range(i, ds.0.len()))?;
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&[kp.x, kp.y, kp.scale, kp.orientation]);
        Ok(())
    })
}

fn out_of_range(i: usize, n: usize) -> Failure {
    Failure(HyfStatus::OutOfRange, format!("index {i} out of range for {n} rows"))
}

/// Row `i` as doubles; ORB bits are unpacked to 0/1. `len` must equal the row dimension.
///
/// # Safety
/// `ds` must be a live descriptor handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hyf_descriptors_row(
    ds: *const HyfDescriptors,
    i: usize,
    out: *mut f64,
    len: usize,
) -> HyfStatus {
    guard(|| {
        let ds = handle(ds, "ds")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if i >= ds.0.len() {
            return Err(out_of_range(i, ds.0.len()));
        }
        if len != ds.0.dim() {
            return Err(Failure(HyfStatus::InvalidArgument, format!("len {len}, row has {}", ds.0.dim())));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        match &ds.0.vectors {
            DescriptorVectors::Real(m) => dst.copy_from_slice(m.row(i)),
            DescriptorVectors::Binary(codes) => {
                for (b, v) in dst.iter_mut().enumerate() {
                    *v = f64::from((codes[i][b / 8] >> (7 - b % 8)) & 1);
                }
            }
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must come from a describe call, or be null.
#[no_mangle]
pub unsafe extern "C" fn hyf_descriptors_free(ds: *mut HyfDescriptors) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Reads an HYF1 deep-feature file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hyf_deep_features_load(path: *const c_char, out: *mut *mut HyfDeepFeatures) -> HyfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let t = load_deep_features(path).map_err(|e| Failure(HyfStatus::Failed, e.to_string()))?;
        *out = Box::into_raw(Box::new(HyfDeepFeatures(t)));
        Ok(())
    })
}

/// # Safety
/// `t` must be a live table handle or null.
#[no_mangle]
pub unsafe extern "C" fn hyf_deep_features_len(t: *const HyfDeepFeatures) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `t` must be a live table handle or null.
#[no_mangle]
pub unsafe extern "C" fn hyf_deep_features_dim(t: *const HyfDeepFeatures) -> usize {
    t.as_ref().map_or(0, |t| t.0.dim())
}

/// Copies row `i` into `out`, which holds `len` doubles (must equal the dimension).
///
/// # Safety
/// `t` must be a live table handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hyf_deep_features_row(
    t: *const HyfDeepFeatures,
    i: usize,
    out: *mut f64,
    len: usize,
) -> HyfStatus {
    guard(|| {
        let t = handle(t, "table")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if i >= t.0.len() {
            return Err(out_of_range(i, t.0.len()));
        }
        if len != t.0.dim() {
            return Err(Failure(HyfStatus::InvalidArgument, format!("len {len}, row has {}", t.0.dim())));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(t.0.vectors.row(i));
        Ok(())
    })
}

/// Identifier of row `i` as a new string (free with `hyf_string_free`).
///
/// # Safety
/// `t` must be a live table handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hyf_deep_features_id(t: *const HyfDeepFeatures, i: usize, out: *mut *mut c_char) -> HyfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let t = handle(t, "table")?;
        let id = t.0.ids.get(i).ok_or_else(|| out_of_range(i, t.0.len()))?;
        *out = CString::new(id.as_str())
            .map_err(|_| Failure(HyfStatus::InvalidArgument, "id contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `t` must come from `hyf_deep_features_load`, or be null.
#[no_mangle]
pub unsafe extern "C" fn hyf_deep_features_free(t: *mut HyfDeepFeatures) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Runs the pipeline for a JSON run config and returns the report JSON.
///
/// Relative paths in the config resolve against `base_dir` (the working
/// directory when null). Artifacts are written to the config's output
/// directory exactly as the command-line tool does.
///
/// # Safety
/// `config_json` and `base_dir` must be NUL-terminated strings (`base_dir`
/// may be null); `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hyf_pipeline_run_json(
    config_json: *const c_char,
    base_dir: *const c_char,
    out_report: *mut *mut c_char,
) -> HyfStatus {
    guard(|| {
        let out = out_arg(out_report, "out_report")?;
        *out = ptr::null_mut();
        let text = str_arg(config_json, "config_json")?;
        let base = if base_dir.is_null() {
            std::env::current_dir().map_err(|e| Failure(HyfStatus::Failed, e.to_string()))?
        } else {
            PathBuf::from(str_arg(base_dir, "base_dir")?)
        };
        let cfg = RunConfig::from_json(text, base)?;
        let report = run_pipeline(&cfg)?;
        *out = CString::new(report.to_json()).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}
