//! C ABI over the flowtruth library.
//!
//! Images and flows cross the boundary as opaque handles created and
//! released here. Every fallible call returns an [`FtStatus`]; on failure
//! `ft_last_error()` describes it. Outputs are written only on success.
//! Handles are not thread-safe to mutate, but distinct handles may be used
//! from different threads.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use flowtruth::estimator::MatchParams;
use flowtruth::io::{load_flo, save_flo};
use flowtruth::metrics::flow_metrics;
use flowtruth::pipeline::recover_frame;
use flowtruth::template::{decode, embed, generate_template, ncc, reference, to_rgb, TemplateSpec};
use flowtruth::warp::{backward_warp, forward_scatter};
use flowtruth::{BoolMask, Error, FlowField, ImageBuffer};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Parse = 4,
    Io = 5,
    NonFinite = 6,
    /// A bug: the library panicked. The handle arguments are still valid.
    Panic = 7,
}

/// Planar float image, `channels x height x width`.
pub struct FtImage(ImageBuffer);

/// Dense flow field; `u` points right, `v` down.
pub struct FtFlow(FlowField);

/// Optional estimator overrides. Zero fields take the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FtMatchParams {
    pub patch: usize,
    pub levels: usize,
    pub radius: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } => FtStatus::DimensionMismatch,
            Error::Parse { .. } | Error::Config(_) | Error::UnsupportedImage(_) | Error::Codec(_) => FtStatus::Parse,
            Error::Io(_) => FtStatus::Io,
            Error::NonFinite(_) => FtStatus::NonFinite,
            Error::InvalidParameter { .. } | Error::Empty(_) => FtStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FtStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(FtStatus::InvalidArgument, msg.into())
}

type FfiResult<T = ()> = Result<T, Failure>;

/// Runs `f`, recording any failure for `ft_last_error`.
fn guard(f: impl FnOnce() -> FfiResult) -> FtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FtStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            FtStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path<'a>(p: *const c_char) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not valid UTF-8"))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn mask_image(mask: &BoolMask) -> ImageBuffer {
    let (h, w) = mask.dims();
    ImageBuffer::from_fn(1, h, w, |_, y, x| if mask.get(y, x) { 1.0 } else { 0.0 })
}

fn spec(seed: u64, amplitude: f64) -> FfiResult<TemplateSpec> {
    let mut s = TemplateSpec::with_seed(seed);
    if amplitude > 0.0 {
        s.amplitude = amplitude;
    }
    s.validate()?;
    Ok(s)
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// --- images -----------------------------------------------------------------

/// Copies `channels * height * width` planar floats into a new image.
#[no_mangle]
pub unsafe extern "C" fn ft_image_new(
    channels: usize,
    height: usize,
    width: usize,
    data: *const f32,
    out_image: *mut *mut FtImage,
) -> FtStatus {
    guard(|| {
        let out_image = out(out_image, "out_image")?;
        let n = channels
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| invalid("image size overflows"))?;
        let data = slice(data, n, "data")?;
        let img = ImageBuffer::from_planar(channels, height, width, data.to_vec())?;
        *out_image = boxed(FtImage(img));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ft_image_dims(
    image: *const FtImage,
    channels: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> FtStatus {
    guard(|| {
        let img = &deref(image, "image")?.0;
        let (c, h, w) = (out(channels, "channels")?, out(height, "height")?, out(width, "width")?);
        (*c, *h, *w) = (img.channels(), img.height(), img.width());
        Ok(())
    })
}

/// Borrowed planar pixel data, valid until the image is freed.
#[no_mangle]
pub unsafe extern "C" fn ft_image_data(image: *const FtImage) -> *const f32 {
    image.as_ref().map_or(ptr::null(), |i| i.0.data().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn ft_image_free(image: *mut FtImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

// --- flows ------------------------------------------------------------------

#[no_mangle]
pub unsafe extern "C" fn ft_flow_new(
    height: usize,
    width: usize,
    u: *const f32,
    v: *const f32,
    out_flow: *mut *mut FtFlow,
) -> FtStatus {
    guard(|| {
        let out_flow = out(out_flow, "out_flow")?;
        let n = height.checked_mul(width).ok_or_else(|| invalid("flow size overflows"))?;
        let (u, v) = (slice(u, n, "u")?, slice(v, n, "v")?);
        *out_flow = boxed(FtFlow(FlowField::from_components(height, width, u.to_vec(), v.to_vec())?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ft_flow_dims(flow: *const FtFlow, height: *mut usize, width: *mut usize) -> FtStatus {
    guard(|| {
        let f = &deref(flow, "flow")?.0;
        let (h, w) = (out(height, "height")?, out(width, "width")?);
        (*h, *w) = f.dims();
        Ok(())
    })
}

/// Borrowed horizontal components, row-major, valid until the flow is freed.
#[no_mangle]
pub unsafe extern "C" fn ft_flow_u(flow: *const FtFlow) -> *const f32 {
    flow.as_ref().map_or(ptr::null(), |f| f.0.u().as_ptr())
}

/// Borrowed vertical components, row-major, valid until the flow is freed.
#[no_mangle]
pub unsafe extern "C" fn ft_flow_v(flow: *const FtFlow) -> *const f32 {
    flow.as_ref().map_or(ptr::null(), |f| f.0.v().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn ft_flow_free(flow: *mut FtFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// Reads a Middlebury `.flo` file.
#[no_mangle]
pub unsafe extern "C" fn ft_flo_read(file: *const c_char, out_flow: *mut *mut FtFlow) -> FtStatus {
    guard(|| {
        let out_flow = out(out_flow, "out_flow")?;
        let p = path(file)?;
        let f = load_flo(p).map_err(|e| Failure::from(e).context(p))?;
        *out_flow = boxed(FtFlow(f));
        Ok(())
    })
}

/// Writes a Middlebury `.flo` file atomically.
#[no_mangle]
pub unsafe extern "C" fn ft_flo_write(flow: *const FtFlow, file: *const c_char) -> FtStatus {
    guard(|| {
        let f = &deref(flow, "flow")?.0;
        let p = path(file)?;
        save_flo(p, f).map_err(|e| Failure::from(e).context(p))
    })
}

impl Failure {
    fn context(self, p: &str) -> Self {
        Failure(self.0, format!("{p}: {}", self.1))
    }
}

// --- geometry ---------------------------------------------------------------

/// Bilinear backward warp with border clamping. `out_coverage`, if not
/// null, receives a one-channel 0/1 image of in-frame samples.
#[no_mangle]
pub unsafe extern "C" fn ft_backward_warp(
    image: *const FtImage,
    flow: *const FtFlow,
    out_image: *mut *mut FtImage,
    out_coverage: *mut *mut FtImage,
) -> FtStatus {
    guard(|| {
        let (img, f) = (&deref(image, "image")?.0, &deref(flow, "flow")?.0);
        let out_image = out(out_image, "out_image")?;
        let (warped, cov) = backward_warp(img, f)?;
        *out_image = boxed(FtImage(warped));
        if let Some(c) = out_coverage.as_mut() {
            *c = boxed(FtImage(mask_image(&cov)));
        }
        Ok(())
    })
}

/// Forward splat to the rounded target. `out_holes`, if not null, receives
/// a one-channel 0/1 image of pixels nothing landed on.
#[no_mangle]
pub unsafe extern "C" fn ft_forward_scatter(
    image: *const FtImage,
    flow: *const FtFlow,
    out_image: *mut *mut FtImage,
    out_holes: *mut *mut FtImage,
) -> FtStatus {
    guard(|| {
        let (img, f) = (&deref(image, "image")?.0, &deref(flow, "flow")?.0);
        let out_image = out(out_image, "out_image")?;
        let (frame, holes) = forward_scatter(img, f)?;
        *out_image = boxed(FtImage(frame));
        if let Some(h) = out_holes.as_mut() {
            *h = boxed(FtImage(mask_image(&holes)));
        }
        Ok(())
    })
}

// --- metrics ----------------------------------------------------------------

/// Flow metrics as a JSON report. `mask` is `height * width` bytes (nonzero
/// means evaluated) or null for every pixel. Free the string with
/// `ft_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ft_flow_metrics_json(
    pred: *const FtFlow,
    gt: *const FtFlow,
    mask: *const u8,
    out_json: *mut *mut c_char,
) -> FtStatus {
    guard(|| {
        let (p, g) = (&deref(pred, "pred")?.0, &deref(gt, "gt")?.0);
        let out_json = out(out_json, "out_json")?;
        let (h, w) = g.dims();
        let valid = if mask.is_null() {
            BoolMask::filled(h, w, true)
        } else {
            BoolMask::from_vec(h, w, slice(mask, h * w, "mask")?.iter().map(|&b| b != 0).collect())?
        };
        let report = flow_metrics(p, g, &valid, "ffi")?;
        let text = serde_json::to_string(&report).map_err(|e| invalid(e.to_string()))?;
        *out_json = CString::new(text).expect("json has no nul").into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ft_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// --- template ---------------------------------------------------------------

/// Adds the template for `seed`. `amplitude <= 0` selects the default.
/// Gray inputs are promoted to RGB.
#[no_mangle]
pub unsafe extern "C" fn ft_embed(image: *const FtImage, seed: u64, amplitude: f64, out_image: *mut *mut FtImage) -> FtStatus {
    guard(|| {
        let img = to_rgb(&deref(image, "image")?.0)?;
        let out_image = out(out_image, "out_image")?;
        let s = spec(seed, amplitude)?;
        let (h, w) = img.dims();
        let marked = embed(&img, &generate_template(&s, h, w)?, s.amplitude)?;
        *out_image = boxed(FtImage(marked));
        Ok(())
    })
}

/// Normalized cross-correlation between the decoded residual of `image`
/// and the reference for `seed`.
#[no_mangle]
pub unsafe extern "C" fn ft_decode_ncc(image: *const FtImage, seed: u64, out_ncc: *mut f64) -> FtStatus {
    guard(|| {
        let img = to_rgb(&deref(image, "image")?.0)?;
        let out_ncc = out(out_ncc, "out_ncc")?;
        let s = spec(seed, 0.0)?;
        let (h, w) = img.dims();
        let refr = reference(&generate_template(&s, h, w)?, &s)?;
        *out_ncc = ncc(&decode(&img, &s)?, &refr)?;
        Ok(())
    })
}

/// Estimates the motion of the template for `seed` in `frame`. `params`
/// may be null. `out_confidence`, if not null, receives a one-channel
/// confidence image in `[0, 1]`.
#[no_mangle]
pub unsafe extern "C" fn ft_estimate(
    frame: *const FtImage,
    seed: u64,
    params: *const FtMatchParams,
    out_flow: *mut *mut FtFlow,
    out_confidence: *mut *mut FtImage,
) -> FtStatus {
    guard(|| {
        let img = to_rgb(&deref(frame, "frame")?.0)?;
        let out_flow = out(out_flow, "out_flow")?;
        let d = MatchParams::default();
        let o = params.as_ref().copied().unwrap_or_default();
        let pick = |v: usize, default: usize| if v == 0 { default } else { v };
        let mp = MatchParams { patch: pick(o.patch, d.patch), levels: pick(o.levels, d.levels), radius: pick(o.radius, d.radius) };
        mp.validate()?;
        let s = spec(seed, 0.0)?;
        let (h, w) = img.dims();
        let refr = reference(&generate_template(&s, h, w)?, &s)?;
        let rec = recover_frame(&img, &refr, &s, &mp)?;
        if !rec.estimate.flow.is_finite() {
            return Err(Error::NonFinite("estimated flow").into());
        }
        let conf = rec.recovered.confidence;
        if let Some(c) = out_confidence.as_mut() {
            let data = conf.data().iter().map(|&v| v as f32).collect();
            *c = boxed(FtImage(ImageBuffer::from_planar(1, h, w, data)?));
        }
        *out_flow = boxed(FtFlow(rec.estimate.flow));
        Ok(())
    })
}
