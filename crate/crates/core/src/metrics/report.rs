use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA: u32 = 1;

/// Flow accuracy for one sample (or an aggregate), plus optional recovery
/// scores. Metrics over an empty mask are `None` and serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: u32,
    pub sample: String,
    pub pixel_counts: PixelCounts,
    pub aee: Option<f64>,
    pub aae_deg: Option<f64>,
    pub fl_all: Option<f64>,
    pub auc: Option<f64>,
    pub bins: Bins,
    pub recovery: Option<RecoveryReport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub valid: u64,
    pub s0_10: u64,
    pub s10_40: u64,
    pub s40p: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierRates {
    pub r1: Option<f64>,
    pub r3: Option<f64>,
    pub r5: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub s0_10: OutlierRates,
    pub s10_40: OutlierRates,
    pub s40p: OutlierRates,
}

/// Valid-area image recovery scores.
///
/// `psnr` is `None` with `identical == true` when the images agree exactly
/// on the evaluated area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub phash_sim: Option<f64>,
    #[serde(default)]
    pub identical: bool,
}

impl MetricsReport {
    /// A report with every metric null and zero pixel counts.
    pub fn empty(sample: impl Into<String>) -> Self {
        MetricsReport {
            schema: REPORT_SCHEMA,
            sample: sample.into(),
            pixel_counts: PixelCounts::default(),
            aee: None,
            aae_deg: None,
            fl_all: None,
            auc: None,
            bins: Bins::default(),
            recovery: None,
        }
    }
}
