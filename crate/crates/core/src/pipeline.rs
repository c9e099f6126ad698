//! Per-frame recovery: decode the template, match it against the reference,
//! turn costs into confidence and warp the frame back.

use rayon::prelude::*;

use crate::buffer::ImageBuffer;
use crate::error::Result;
use crate::estimator::{cost_to_confidence, estimate_flow, FlowEstimate, MatchParams};
use crate::reversal::{reverse_frame, RecoveryFrame};
use crate::template::{decode, TemplateSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecovery {
    pub estimate: FlowEstimate,
    pub recovered: RecoveryFrame,
}

pub fn recover_frame(
    frame: &ImageBuffer,
    reference: &ImageBuffer,
    spec: &TemplateSpec,
    params: &MatchParams,
) -> Result<FrameRecovery> {
    let observed = decode(frame, spec)?;
    let estimate = estimate_flow(reference, &observed, params)?;
    let confidence = cost_to_confidence(&estimate.cost, &estimate.second_best_ratio)?;
    let (image, coverage) = reverse_frame(frame, &estimate.flow)?;
    Ok(FrameRecovery {
        estimate,
        recovered: RecoveryFrame { image, confidence, coverage },
    })
}

/// [`recover_frame`] over a sequence; frames are processed in parallel and
/// returned in input order.
pub fn recover_frames(
    frames: &[ImageBuffer],
    reference: &ImageBuffer,
    spec: &TemplateSpec,
    params: &MatchParams,
) -> Result<Vec<FrameRecovery>> {
    frames
        .par_iter()
        .map(|f| recover_frame(f, reference, spec, params))
        .collect()
}
