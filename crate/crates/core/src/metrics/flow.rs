//! Motion-accuracy metrics: forward-backward validity, endpoint and angular
//! error, Fl-all, n-pixel outlier rates, AUC and magnitude bins.

use crate::buffer::{BoolMask, FlowField, ScalarMap};
use crate::error::Result;
use crate::warp::{flow_magnitude, warp_flow};

use super::report::{Bins, MetricsReport, OutlierRates, PixelCounts, REPORT_SCHEMA};

/// Guard added to denominators.
pub const EPS: f64 = 1e-8;

/// Number of EPE thresholds sampled for AUC.
pub const AUC_STEPS: usize = 100;
/// Upper end of the AUC threshold range, in pixels.
pub const AUC_MAX_PX: f64 = 5.0;

/// Upper bounds of the slow and medium bins (left-closed, right-open).
pub const SLOW_MAX: f64 = 10.0;
pub const MEDIUM_MAX: f64 = 40.0;

/// Forward-backward consistency weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbParams {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for FbParams {
    fn default() -> Self {
        FbParams {
            alpha1: 0.01,
            alpha2: 0.5,
        }
    }
}

/// A pixel is valid when the forward flow and the backward flow sampled at
/// its forward target nearly cancel:
/// `|fw + bw'|² ≤ α₁ (|fw|² + |bw'|²) + α₂`, with `bw' = W(bw, fw)`.
/// Pixels whose forward target lies outside the frame are invalid.
pub fn fb_valid_mask(fw: &FlowField, bw: &FlowField, p: FbParams) -> Result<BoolMask> {
    bw.check_dims("fb_valid_mask backward flow", fw.dims())?;
    let (bw_warped, coverage) = warp_flow(bw, fw)?;
    let (h, w) = fw.dims();
    Ok(BoolMask::from_fn(h, w, |y, x| {
        if !coverage.get(y, x) {
            return false;
        }
        let (fu, fv) = fw.get(y, x);
        let (bu, bv) = bw_warped.get(y, x);
        let (fu, fv, bu, bv) = (fu as f64, fv as f64, bu as f64, bv as f64);
        let lhs = (fu + bu).powi(2) + (fv + bv).powi(2);
        let rhs = p.alpha1 * (fu * fu + fv * fv + bu * bu + bv * bv) + p.alpha2;
        lhs <= rhs
    }))
}

pub fn epe_map(pred: &FlowField, gt: &FlowField) -> Result<ScalarMap> {
    pred.check_dims("epe_map prediction", gt.dims())?;
    let data = pred
        .u()
        .iter()
        .zip(pred.v())
        .zip(gt.u().iter().zip(gt.v()))
        .map(|((&up, &vp), (&ug, &vg))| {
            let du = ug as f64 - up as f64;
            let dv = vg as f64 - vp as f64;
            (du * du + dv * dv).sqrt()
        })
        .collect();
    ScalarMap::from_vec(gt.height(), gt.width(), data)
}

fn masked<'a>(map: &'a ScalarMap, mask: &'a BoolMask) -> impl Iterator<Item = f64> + 'a {
    map.data()
        .iter()
        .zip(mask.bits())
        .filter_map(|(&v, &m)| m.then_some(v))
}

/// `Σ epe·mask / (Σ mask + ε)`; `None` for an empty mask.
pub fn aee(epe: &ScalarMap, mask: &BoolMask) -> Result<Option<f64>> {
    mask.check_dims("aee mask", epe.dims())?;
    let n = mask.count();
    if n == 0 {
        return Ok(None);
    }
    let sum: f64 = masked(epe, mask).sum();
    Ok(Some(sum / (n as f64 + EPS)))
}

/// Angular error in degrees at one pixel.
///
/// Literal form: when either vector is zero the cosine is 0, i.e. 90°.
#[inline]
pub fn angular_error_deg(pred: (f32, f32), gt: (f32, f32)) -> f64 {
    let (up, vp) = (pred.0 as f64, pred.1 as f64);
    let (ug, vg) = (gt.0 as f64, gt.1 as f64);
    let dot = up * ug + vp * vg;
    let norms = (up * up + vp * vp).sqrt() * (ug * ug + vg * vg).sqrt();
    if norms < EPS {
        let cos = (dot / EPS).clamp(-1.0, 1.0);
        return cos.acos().to_degrees();
    }
    // Same angle as acos(dot / norms), without the loss of precision near 0°.
    let cross = up * vg - vp * ug;
    cross.abs().atan2(dot).to_degrees()
}

pub fn aae(pred: &FlowField, gt: &FlowField, mask: &BoolMask) -> Result<Option<f64>> {
    pred.check_dims("aae prediction", gt.dims())?;
    mask.check_dims("aae mask", gt.dims())?;
    let n = mask.count();
    if n == 0 {
        return Ok(None);
    }
    let mut sum = 0.0;
    for (i, &m) in mask.bits().iter().enumerate() {
        if m {
            sum += angular_error_deg((pred.u()[i], pred.v()[i]), (gt.u()[i], gt.v()[i]));
        }
    }
    Ok(Some(sum / (n as f64 + EPS)))
}

/// KITTI outlier ratio: EPE > 3 px and EPE / |gt| > 5 %.
pub fn fl_all(epe: &ScalarMap, gt: &FlowField, mask: &BoolMask) -> Result<Option<f64>> {
    gt.check_dims("fl_all ground truth", epe.dims())?;
    mask.check_dims("fl_all mask", epe.dims())?;
    let n = mask.count();
    if n == 0 {
        return Ok(None);
    }
    let mut outliers = 0usize;
    for (i, &m) in mask.bits().iter().enumerate() {
        if !m {
            continue;
        }
        let e = epe.data()[i];
        let g = (gt.u()[i] as f64).hypot(gt.v()[i] as f64);
        if e > 3.0 && e / g.max(EPS) > 0.05 {
            outliers += 1;
        }
    }
    Ok(Some(outliers as f64 / (n as f64 + EPS)))
}

/// Fraction of masked pixels with EPE strictly greater than `n` pixels.
pub fn outlier_rate(epe: &ScalarMap, mask: &BoolMask, n: f64) -> Result<Option<f64>> {
    mask.check_dims("outlier_rate mask", epe.dims())?;
    let total = mask.count();
    if total == 0 {
        return Ok(None);
    }
    let over = masked(epe, mask).filter(|&e| e > n).count();
    Ok(Some(over as f64 / total as f64))
}

/// The AUC thresholds: `AUC_STEPS` uniformly spaced values spanning
/// `[0, AUC_MAX_PX]`, endpoints included.
pub fn auc_thresholds() -> impl Iterator<Item = f64> {
    (0..AUC_STEPS).map(|i| AUC_MAX_PX * i as f64 / (AUC_STEPS - 1) as f64)
}

/// Mean inlier rate (EPE ≤ t) over the AUC thresholds, in `[0, 1]`.
pub fn auc(epe: &ScalarMap, mask: &BoolMask) -> Result<Option<f64>> {
    mask.check_dims("auc mask", epe.dims())?;
    let mut values: Vec<f64> = masked(epe, mask).collect();
    if values.is_empty() {
        return Ok(None);
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let sum: f64 = auc_thresholds()
        .map(|t| values.partition_point(|&e| e <= t) as f64 / n)
        .sum();
    Ok(Some(sum / AUC_STEPS as f64))
}

/// Pixel partition by ground-truth motion magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeBins {
    pub slow: BoolMask,
    pub medium: BoolMask,
    pub fast: BoolMask,
}

pub fn magnitude_bins(gt: &FlowField) -> MagnitudeBins {
    let mag = flow_magnitude(gt);
    let (h, w) = gt.dims();
    let pick = |lo: f64, hi: f64| {
        BoolMask::from_vec(h, w, mag.data().iter().map(|&m| m >= lo && m < hi).collect())
            .expect("dims match")
    };
    MagnitudeBins {
        slow: pick(0.0, SLOW_MAX),
        medium: pick(SLOW_MAX, MEDIUM_MAX),
        fast: pick(MEDIUM_MAX, f64::INFINITY),
    }
}

fn rates(epe: &ScalarMap, mask: &BoolMask) -> Result<OutlierRates> {
    Ok(OutlierRates {
        r1: outlier_rate(epe, mask, 1.0)?,
        r3: outlier_rate(epe, mask, 3.0)?,
        r5: outlier_rate(epe, mask, 5.0)?,
    })
}

/// Every flow metric for one prediction over the `valid` pixels.
pub fn flow_metrics(
    pred: &FlowField,
    gt: &FlowField,
    valid: &BoolMask,
    sample: &str,
) -> Result<MetricsReport> {
    pred.check_dims("flow_metrics prediction", gt.dims())?;
    valid.check_dims("flow_metrics valid mask", gt.dims())?;
    let epe = epe_map(pred, gt)?;
    let bins = magnitude_bins(gt);
    let slow = bins.slow.and(valid);
    let medium = bins.medium.and(valid);
    let fast = bins.fast.and(valid);
    Ok(MetricsReport {
        schema: REPORT_SCHEMA,
        sample: sample.to_owned(),
        pixel_counts: PixelCounts {
            valid: valid.count() as u64,
            s0_10: slow.count() as u64,
            s10_40: medium.count() as u64,
            s40p: fast.count() as u64,
        },
        aee: aee(&epe, valid)?,
        aae_deg: aae(pred, gt, valid)?,
        fl_all: fl_all(&epe, gt, valid)?,
        auc: auc(&epe, valid)?,
        bins: Bins {
            s0_10: rates(&epe, &slow)?,
            s10_40: rates(&epe, &medium)?,
            s40p: rates(&epe, &fast)?,
        },
        recovery: None,
    })
}
