//! Single-transform appearance degradations applied before motion.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::ImageFormat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::buffer::ImageBuffer;
use crate::error::{Error, Result};
use crate::filter::{gaussian_blur, median_filter, resize_bilinear};
use crate::io::{from_dynamic, to_dynamic};

pub const JPEG_QUALITY: [u8; 2] = [30, 90];
/// Noise standard deviation bounds, in 8-bit units.
pub const NOISE_STD: [f64; 2] = [1.0, 5.0];
pub const BLUR_RADII: [u8; 2] = [1, 2];
pub const MEDIAN_SIZES: [usize; 4] = [3, 5, 7, 9];
pub const RESIZE_RATIO: [f64; 2] = [0.6, 0.9];
pub const BRIGHTNESS: [f64; 2] = [1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DegradationSpec {
    Jpeg { quality: u8 },
    GaussNoise { std: f64 },
    GaussBlur { radius: u8 },
    MedianBlur { k: usize },
    ResizeRecover { ratio: f64 },
    Brightness { factor: f64 },
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DegradationSpec::Jpeg { quality } => (JPEG_QUALITY[0]..=JPEG_QUALITY[1]).contains(&quality),
            DegradationSpec::GaussNoise { std } => (NOISE_STD[0]..=NOISE_STD[1]).contains(&std),
            DegradationSpec::GaussBlur { radius } => BLUR_RADII.contains(&radius),
            DegradationSpec::MedianBlur { k } => MEDIAN_SIZES.contains(&k),
            DegradationSpec::ResizeRecover { ratio } => (RESIZE_RATIO[0]..=RESIZE_RATIO[1]).contains(&ratio),
            DegradationSpec::Brightness { factor } => BRIGHTNESS.contains(&factor),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("degradation", format!("{self:?} is outside the allowed range")))
        }
    }
}

/// One variant chosen uniformly, then one strength drawn from its range.
pub fn sample_degradation(seed: u64) -> DegradationSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match rng.random_range(0..6u8) {
        0 => DegradationSpec::Jpeg { quality: rng.random_range(JPEG_QUALITY[0]..=JPEG_QUALITY[1]) },
        1 => DegradationSpec::GaussNoise { std: rng.random_range(NOISE_STD[0]..=NOISE_STD[1]) },
        2 => DegradationSpec::GaussBlur { radius: BLUR_RADII[rng.random_range(0..BLUR_RADII.len())] },
        3 => DegradationSpec::MedianBlur { k: MEDIAN_SIZES[rng.random_range(0..MEDIAN_SIZES.len())] },
        4 => DegradationSpec::ResizeRecover { ratio: rng.random_range(RESIZE_RATIO[0]..=RESIZE_RATIO[1]) },
        _ => DegradationSpec::Brightness { factor: BRIGHTNESS[rng.random_range(0..BRIGHTNESS.len())] },
    }
}

fn jpeg_round_trip(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    let src = to_dynamic(img)?;
    let mut bytes = Vec::new();
    src.write_with_encoder(JpegEncoder::new_with_quality(&mut bytes, quality))
        .map_err(|e| Error::Codec(e.to_string()))?;
    let decoded = image::load(Cursor::new(bytes), ImageFormat::Jpeg).map_err(|e| Error::Codec(e.to_string()))?;
    from_dynamic(decoded)
}

/// Applies `spec` to `img`. Only `GaussNoise` consumes `seed`.
pub fn apply_degradation(img: &ImageBuffer, spec: &DegradationSpec, seed: u64) -> Result<ImageBuffer> {
    spec.validate()?;
    let (h, w) = img.dims();
    Ok(match *spec {
        DegradationSpec::Jpeg { quality } => jpeg_round_trip(img, quality)?,
        DegradationSpec::GaussNoise { std } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = (std / 255.0) as f32;
            img.map(|v| (v + s * rng.sample::<f32, _>(StandardNormal)).clamp(0.0, 1.0))
        }
        DegradationSpec::GaussBlur { radius } => gaussian_blur(img, radius as f64),
        DegradationSpec::MedianBlur { k } => median_filter(img, k),
        DegradationSpec::ResizeRecover { ratio } => {
            let dh = ((ratio * h as f64).round() as usize).max(1);
            let dw = ((ratio * w as f64).round() as usize).max(1);
            resize_bilinear(&resize_bilinear(img, dh, dw), h, w)
        }
        DegradationSpec::Brightness { factor } => img.map(|v| (factor as f32 * v).clamp(0.0, 1.0)),
    })
}
