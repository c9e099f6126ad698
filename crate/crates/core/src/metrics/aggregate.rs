use crate::error::{Error, Result};

use super::report::{Bins, MetricsReport, OutlierRates, PixelCounts, RecoveryReport, REPORT_SCHEMA};

/// Weighted mean of the non-null values; `None` when no weight remains.
fn wmean(values: impl Iterator<Item = (Option<f64>, f64)>) -> Option<f64> {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (v, w) in values {
        if let Some(v) = v {
            if w > 0.0 {
                num += w * v;
                den += w;
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Sample-count-weighted average of per-sample reports.
///
/// Null fields drop out and the remaining weights are renormalized. Pixel
/// counts are summed over reports with positive weight.
pub fn aggregate(reports: &[MetricsReport], weights: &[f64], sample: &str) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(Error::Empty("reports"));
    }
    if reports.len() != weights.len() {
        return Err(Error::param(
            "weights",
            format!("{} weights for {} reports", weights.len(), reports.len()),
        ));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::param("weights", "must be finite and non-negative"));
    }
    let pairs = || reports.iter().zip(weights.iter().copied());
    let field = |f: fn(&MetricsReport) -> Option<f64>| wmean(pairs().map(|(r, w)| (f(r), w)));
    let rates = |f: fn(&Bins) -> OutlierRates| OutlierRates {
        r1: wmean(pairs().map(|(r, w)| (f(&r.bins).r1, w))),
        r3: wmean(pairs().map(|(r, w)| (f(&r.bins).r3, w))),
        r5: wmean(pairs().map(|(r, w)| (f(&r.bins).r5, w))),
    };

    let mut counts = PixelCounts::default();
    for (r, w) in pairs() {
        if w > 0.0 {
            counts.valid += r.pixel_counts.valid;
            counts.s0_10 += r.pixel_counts.s0_10;
            counts.s10_40 += r.pixel_counts.s10_40;
            counts.s40p += r.pixel_counts.s40p;
        }
    }

    let weighted_recovery: Vec<(&RecoveryReport, f64)> = pairs()
        .filter(|(_, w)| *w > 0.0)
        .filter_map(|(r, w)| r.recovery.as_ref().map(|rec| (rec, w)))
        .collect();
    let recovery = if weighted_recovery.is_empty() {
        None
    } else {
        let pick = |f: fn(&RecoveryReport) -> Option<f64>| {
            wmean(weighted_recovery.iter().map(|(r, w)| (f(r), *w)))
        };
        Some(RecoveryReport {
            psnr: pick(|r| r.psnr),
            ssim: pick(|r| r.ssim),
            phash_sim: pick(|r| r.phash_sim),
            identical: weighted_recovery.iter().all(|(r, _)| r.identical),
        })
    };

    Ok(MetricsReport {
        schema: REPORT_SCHEMA,
        sample: sample.to_owned(),
        pixel_counts: counts,
        aee: field(|r| r.aee),
        aae_deg: field(|r| r.aae_deg),
        fl_all: field(|r| r.fl_all),
        auc: field(|r| r.auc),
        bins: Bins {
            s0_10: rates(|b| b.s0_10),
            s10_40: rates(|b| b.s10_40),
            s40p: rates(|b| b.s40p),
        },
        recovery,
    })
}
