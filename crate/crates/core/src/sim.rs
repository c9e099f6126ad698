//! Image-to-video threat simulation: degrade, move, scatter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{BoolMask, FlowField, ImageBuffer};
use crate::degrade::{apply_degradation, sample_degradation, DegradationSpec};
use crate::error::{Error, Result};
use crate::motion::{render_motion, sample_motion_scaled, MotionBank, MotionSpec};
use crate::warp::forward_scatter;

/// One forged frame with the motion that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub frame: ImageBuffer,
    pub gt_flow: FlowField,
    pub holes: BoolMask,
    pub meta: FrameMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    /// 1-based frame index.
    pub index: usize,
    pub seed: u64,
    pub motion: MotionSpec,
    /// Magnitude multiplier applied to `motion` when it is file-backed.
    pub flow_scale: f64,
    pub degradation: Option<DegradationSpec>,
}

fn scatter(
    marked: &ImageBuffer,
    flow: FlowField,
    degrade: Option<&DegradationSpec>,
    seed: u64,
) -> Result<(ImageBuffer, FlowField, BoolMask)> {
    let src = match degrade {
        Some(d) => apply_degradation(marked, d, seed)?,
        None => marked.clone(),
    };
    let (frame, holes) = forward_scatter(&src, &flow)?;
    Ok((frame, flow, holes))
}

/// Degrades `marked` (if asked), renders `motion` and scatters.
pub fn simulate_i2v(
    marked: &ImageBuffer,
    motion: &MotionSpec,
    degrade: Option<&DegradationSpec>,
    seed: u64,
) -> Result<(ImageBuffer, FlowField, BoolMask)> {
    let (h, w) = marked.dims();
    scatter(marked, render_motion(motion, h, w)?, degrade, seed)
}

/// Per-frame seed for frame `t` of a run seeded with `seed`.
pub fn frame_seed(seed: u64, t: usize) -> u64 {
    seed ^ t as u64
}

fn frame(marked: &ImageBuffer, bank: &MotionBank, n: usize, seed: u64, t: usize) -> Result<SimFrame> {
    let (h, w) = marked.dims();
    let fseed = frame_seed(seed, t);
    let mut rng = ChaCha8Rng::seed_from_u64(fseed);
    let motion_seed: u64 = rng.random();
    let degrade_seed: u64 = rng.random();
    let noise_seed: u64 = rng.random();
    let degraded = rng.random_bool(0.5);
    let s = t as f64 / n as f64;
    let motion = sample_motion_scaled(bank, motion_seed, h, w, s)?;
    let flow_scale = if matches!(motion, MotionSpec::FromFile { .. }) { s } else { 1.0 };
    let flow = render_motion(&motion, h, w)?;
    let flow = if flow_scale != 1.0 { flow.scaled(flow_scale as f32) } else { flow };
    let degradation = degraded.then(|| sample_degradation(degrade_seed));
    let (img, gt_flow, holes) = scatter(marked, flow, degradation.as_ref(), noise_seed)?;
    Ok(SimFrame {
        frame: img,
        gt_flow,
        holes,
        meta: FrameMeta { index: t, seed: noise_seed, motion, flow_scale, degradation },
    })
}

/// `n_frames` frames, each scattered from the source. Frame `t` draws a
/// fresh motion of magnitude scaled by `t / n_frames` and is degraded with
/// probability one half.
pub fn simulate_video(marked: &ImageBuffer, bank: &MotionBank, n_frames: usize, seed: u64) -> Result<Vec<SimFrame>> {
    if n_frames == 0 {
        return Err(Error::param("frames", "must be at least 1"));
    }
    bank.validate()?;
    (1..=n_frames)
        .into_par_iter()
        .map(|t| frame(marked, bank, n_frames, seed, t))
        .collect()
}
