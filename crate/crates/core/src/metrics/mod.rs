//! Flow-accuracy and image-recovery metrics.

mod aggregate;
mod flow;
mod quality;
mod report;

pub use aggregate::aggregate;
pub use flow::{
    aae, aee, angular_error_deg, auc, auc_thresholds, epe_map, fb_valid_mask, fl_all, flow_metrics,
    magnitude_bins, outlier_rate, FbParams, MagnitudeBins, AUC_MAX_PX, AUC_STEPS, EPS, MEDIUM_MAX,
    SLOW_MAX,
};
pub use quality::{phash, phash_similarity, psnr_masked, ssim_map, ssim_masked, Psnr};
pub use report::{Bins, MetricsReport, OutlierRates, PixelCounts, RecoveryReport, REPORT_SCHEMA};
