//! Warping frames back to the source and fusing them by confidence.

use crate::buffer::{BoolMask, ConfidenceMap, FlowField, ImageBuffer, ScalarMap};
use crate::error::{Error, Result};
use crate::metrics::{phash_similarity, psnr_masked, ssim_masked, Psnr, RecoveryReport};
use crate::warp::backward_warp;

pub const FUSE_EPS: f64 = 1e-8;
pub const SUPPORT_MIN: f64 = 1e-6;

/// Samples `frame` at `p + flow(p)`: the frame aligned back to the source.
pub fn reverse_frame(frame: &ImageBuffer, flow: &FlowField) -> Result<(ImageBuffer, BoolMask)> {
    backward_warp(frame, flow)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryFrame {
    pub image: ImageBuffer,
    pub confidence: ConfidenceMap,
    pub coverage: BoolMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySet {
    pub frames: Vec<RecoveryFrame>,
    /// 1-based index of `frames[0]` in the original sequence.
    pub first: usize,
}

impl RecoverySet {
    pub fn new(frames: Vec<RecoveryFrame>) -> Result<Self> {
        let set = RecoverySet { frames, first: 1 };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(f0) = self.frames.first() else {
            return Err(Error::Empty("recovery set"));
        };
        if self.first == 0 {
            return Err(Error::param("first", "frame indices are 1-based"));
        }
        let dims = f0.image.dims();
        for f in &self.frames {
            f.image.check_dims("recovery frame", dims)?;
            f.coverage.check_dims("recovery coverage", dims)?;
            if f.confidence.dims() != dims {
                return Err(Error::DimensionMismatch {
                    what: "recovery confidence",
                    expected: dims,
                    found: f.confidence.dims(),
                });
            }
            if f.image.channels() != f0.image.channels() {
                return Err(Error::param("channels", "recovery frames disagree"));
            }
        }
        Ok(())
    }
}

/// Keeps frames with 1-based index `≥ ceil(fraction·N) + 1`; at least the
/// last frame always survives.
pub fn drop_first(set: &RecoverySet, fraction: f64) -> Result<RecoverySet> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::param("fraction", format!("{fraction} not in [0, 1)")));
    }
    let n = set.frames.len();
    if n == 0 {
        return Err(Error::Empty("recovery set"));
    }
    // The tolerance keeps e.g. 0.9·20 from rounding up to 19.
    let dropped = ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n - 1);
    Ok(RecoverySet {
        frames: set.frames[dropped..].to_vec(),
        first: set.first + dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub image: ImageBuffer,
    pub support: BoolMask,
    pub total_weight: ScalarMap,
}

/// `Σ w_t·Ĩ_t / (Σ w_t + ε)` with `w_t = C_t·coverage_t`. Pixels whose total
/// weight is at most `SUPPORT_MIN` are left at 0 and marked unsupported.
pub fn fuse(set: &RecoverySet) -> Result<Fused> {
    set.validate()?;
    let f0 = &set.frames[0].image;
    let (h, w) = f0.dims();
    let n = h * w;
    let channels = f0.channels();
    let mut total = vec![0.0f64; n];
    let mut acc = vec![0.0f64; channels * n];
    for f in &set.frames {
        let (conf, cov) = (f.confidence.data(), f.coverage.bits());
        for i in 0..n {
            let wt = if cov[i] { conf[i] } else { 0.0 };
            if wt == 0.0 {
                continue;
            }
            total[i] += wt;
            for c in 0..channels {
                acc[c * n + i] += wt * f.image.plane(c)[i] as f64;
            }
        }
    }
    let support: Vec<bool> = total.iter().map(|&t| t > SUPPORT_MIN).collect();
    let mut data = vec![0.0f32; channels * n];
    for c in 0..channels {
        for i in 0..n {
            if support[i] {
                data[c * n + i] = (acc[c * n + i] / (total[i] + FUSE_EPS)) as f32;
            }
        }
    }
    Ok(Fused {
        image: ImageBuffer::from_planar(channels, h, w, data)?,
        support: BoolMask::from_vec(h, w, support)?,
        total_weight: ScalarMap::from_vec(h, w, total)?,
    })
}

/// PSNR, SSIM and pHash similarity of `recovered` against `source` over
/// `support`. pHash sees both images with unsupported pixels zeroed.
pub fn recovery_eval(recovered: &ImageBuffer, source: &ImageBuffer, support: &BoolMask) -> Result<RecoveryReport> {
    let psnr = psnr_masked(recovered, source, support)?;
    let Some(psnr) = psnr else {
        return Ok(RecoveryReport { psnr: None, ssim: None, phash_sim: None, identical: false });
    };
    let ssim = ssim_masked(recovered, source, support)?;
    let zeroed = |img: &ImageBuffer| {
        let mut out = img.clone();
        for c in 0..out.channels() {
            for (v, &m) in out.plane_mut(c).iter_mut().zip(support.bits()) {
                if !m {
                    *v = 0.0;
                }
            }
        }
        out
    };
    Ok(RecoveryReport {
        psnr: psnr.db(),
        ssim,
        phash_sim: Some(phash_similarity(&zeroed(recovered), &zeroed(source))),
        identical: psnr == Psnr::Identical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::forward_scatter;

    fn img(seed: u32) -> ImageBuffer {
        ImageBuffer::from_fn(3, 12, 12, |c, y, x| ((x * 5 + y * 11 + c * 3 + seed as usize) % 13) as f32 / 12.0)
    }

    fn frame(image: ImageBuffer, conf: f64) -> RecoveryFrame {
        let (h, w) = image.dims();
        RecoveryFrame {
            image,
            confidence: ConfidenceMap::new(ScalarMap::filled(h, w, conf)).unwrap(),
            coverage: BoolMask::filled(h, w, true),
        }
    }

    fn close(a: &ImageBuffer, b: &ImageBuffer, tol: f32) -> bool {
        a.data().iter().zip(b.data()).all(|(p, q)| (p - q).abs() <= tol)
    }

    #[test]
    fn zero_flow_reverse_is_identity() {
        let a = img(0);
        let (r, cov) = reverse_frame(&a, &FlowField::zeros(12, 12)).unwrap();
        assert_eq!(r, a);
        assert_eq!(cov.count(), 144);
    }

    #[test]
    fn scatter_then_reverse_round_trip() {
        let a = img(1);
        let flow = FlowField::constant(12, 12, 2.0, -1.0);
        let (f, _) = forward_scatter(&a, &flow).unwrap();
        let (r, cov) = reverse_frame(&f, &flow).unwrap();
        assert!(cov.count() > 0);
        for y in 0..12 {
            for x in 0..12 {
                if cov.get(y, x) {
                    for c in 0..3 {
                        assert_eq!(r.get(c, y, x), a.get(c, y, x));
                    }
                }
            }
        }
    }

    #[test]
    fn fuse_examples() {
        let (a, b) = (img(2), img(5));
        let one = fuse(&RecoverySet::new(vec![frame(a.clone(), 1.0)]).unwrap()).unwrap();
        assert!(close(&one.image, &a, 1e-6));
        let first = fuse(&RecoverySet::new(vec![frame(a.clone(), 1.0), frame(b.clone(), 0.0)]).unwrap()).unwrap();
        assert!(close(&first.image, &a, 1e-6));
        let mean = fuse(&RecoverySet::new(vec![frame(a.clone(), 0.5), frame(b.clone(), 0.5)]).unwrap()).unwrap();
        let expect = ImageBuffer::from_fn(3, 12, 12, |c, y, x| 0.5 * (a.get(c, y, x) + b.get(c, y, x)));
        assert!(close(&mean.image, &expect, 1e-6));
    }

    #[test]
    fn unsupported_pixels_are_zero() {
        let mut f = frame(img(3), 1.0);
        f.coverage.set(4, 4, false);
        let out = fuse(&RecoverySet::new(vec![f]).unwrap()).unwrap();
        assert!(!out.support.get(4, 4));
        assert!((0..3).all(|c| out.image.get(c, 4, 4) == 0.0));
        assert!(RecoverySet::new(vec![]).is_err());
    }

    #[test]
    fn drop_first_indices() {
        let frames: Vec<_> = (0..20).map(|i| frame(img(i), 1.0)).collect();
        let set = RecoverySet::new(frames).unwrap();
        assert_eq!(drop_first(&set, 0.0).unwrap().frames.len(), 20);
        let kept = drop_first(&set, 0.9).unwrap();
        assert_eq!((kept.first, kept.frames.len()), (19, 2));
        assert_eq!(kept.frames[0], set.frames[18]);
        let last = drop_first(&set, 0.999).unwrap();
        assert_eq!((last.first, last.frames.len()), (20, 1));
        assert!(drop_first(&set, 1.0).is_err());
    }

    #[test]
    fn eval_examples() {
        let a = img(4);
        let all = BoolMask::filled(12, 12, true);
        let r = recovery_eval(&a, &a, &all).unwrap();
        assert!(r.identical && r.psnr.is_none());
        assert_eq!((r.ssim, r.phash_sim), (Some(1.0), Some(1.0)));
        let none = recovery_eval(&a, &img(5), &BoolMask::filled(12, 12, false)).unwrap();
        assert_eq!(none, RecoveryReport { psnr: None, ssim: None, phash_sim: None, identical: false });
    }
}
