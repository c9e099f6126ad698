//! Seed-keyed band-pass templates: generation, additive embedding and
//! high-pass decoding.

use serde::{Deserialize, Serialize};

use crate::buffer::{BoolMask, ImageBuffer};
use crate::error::{Error, Result};
use crate::filter::gaussian_blur_plane;
use crate::metrics::{psnr_masked, ssim_masked, Psnr};

pub const TEMPLATE_CHANNELS: usize = 3;

/// Amplitude giving the requested embedding PSNR for a unit-RMS template.
pub fn amplitude_for_psnr(db: f64) -> f64 {
    10f64.powf(-db / 20.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateSpec {
    pub seed: u64,
    pub amplitude: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec {
            seed: 0,
            amplitude: amplitude_for_psnr(36.0),
            sigma_lo: 3.0,
            sigma_hi: 8.0,
        }
    }
}

impl TemplateSpec {
    pub fn with_seed(seed: u64) -> Self {
        TemplateSpec { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(Error::param("amplitude", format!("{} not in (0, 1]", self.amplitude)));
        }
        if !(self.sigma_lo > 0.0 && self.sigma_lo < self.sigma_hi && self.sigma_hi.is_finite()) {
            return Err(Error::param(
                "band",
                format!("need 0 < sigma_lo < sigma_hi, got ({}, {})", self.sigma_lo, self.sigma_hi),
            ));
        }
        Ok(())
    }
}

/// A 3-channel zero-mean, unit-RMS pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Template(ImageBuffer);

impl Template {
    pub fn image(&self) -> &ImageBuffer {
        &self.0
    }

    pub fn into_image(self) -> ImageBuffer {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal sample number `counter` of the stream keyed by `seed`.
fn gaussian_at(seed: u64, counter: u64) -> f64 {
    let bits = splitmix64(splitmix64(seed) ^ counter);
    let u1 = ((bits >> 32) as f64 + 1.0) / 4_294_967_296.0;
    let u2 = (bits & 0xffff_ffff) as f64 / 4_294_967_296.0;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// White noise → difference of Gaussians → zero mean, unit RMS per channel.
pub fn generate_template(spec: &TemplateSpec, height: usize, width: usize) -> Result<Template> {
    spec.validate()?;
    if height == 0 || width == 0 {
        return Err(Error::Empty("template dimensions"));
    }
    let n = height * width;
    let mut data = Vec::with_capacity(TEMPLATE_CHANNELS * n);
    for c in 0..TEMPLATE_CHANNELS {
        let noise: Vec<f32> = (0..n)
            .map(|i| gaussian_at(spec.seed, (c * n + i) as u64) as f32)
            .collect();
        let lo = gaussian_blur_plane(&noise, height, width, spec.sigma_lo);
        let hi = gaussian_blur_plane(&noise, height, width, spec.sigma_hi);
        let band: Vec<f64> = lo.iter().zip(&hi).map(|(&a, &b)| a as f64 - b as f64).collect();
        let mean = band.iter().sum::<f64>() / n as f64;
        let rms = (band.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        if rms.is_nan() || rms <= 0.0 {
            return Err(Error::NonFinite("template normalization"));
        }
        data.extend(band.iter().map(|v| ((v - mean) / rms) as f32));
    }
    Ok(Template(ImageBuffer::from_planar(TEMPLATE_CHANNELS, height, width, data)?))
}

/// Replicates a single-channel image to three channels; RGB passes through.
pub fn to_rgb(img: &ImageBuffer) -> Result<ImageBuffer> {
    match img.channels() {
        TEMPLATE_CHANNELS => Ok(img.clone()),
        1 => Ok(ImageBuffer::from_fn(TEMPLATE_CHANNELS, img.height(), img.width(), |_, y, x| {
            img.get(0, y, x)
        })),
        c => Err(Error::UnsupportedImage(format!("{c} channels"))),
    }
}

/// `clip(img + a·T)`. Gray covers are promoted to RGB first.
pub fn embed(img: &ImageBuffer, t: &Template, amplitude: f64) -> Result<ImageBuffer> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::param("amplitude", format!("{amplitude} must be positive")));
    }
    img.check_dims("embed cover", t.dims())?;
    let mut out = to_rgb(img)?;
    let a = amplitude as f32;
    for (o, &p) in out.data_mut().iter_mut().zip(t.image().data()) {
        *o = (*o + a * p).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// High-pass residual `img − blur(img, σ_hi)`, mean-subtracted per channel.
pub fn decode(img: &ImageBuffer, spec: &TemplateSpec) -> Result<ImageBuffer> {
    spec.validate()?;
    let img = to_rgb(img)?;
    let (h, w) = img.dims();
    let n = h * w;
    let mut data = Vec::with_capacity(img.data().len());
    for c in 0..img.channels() {
        let plane = img.plane(c);
        let low = gaussian_blur_plane(plane, h, w, spec.sigma_hi);
        let res: Vec<f64> = plane.iter().zip(&low).map(|(&p, &l)| p as f64 - l as f64).collect();
        let mean = res.iter().sum::<f64>() / n as f64;
        data.extend(res.iter().map(|v| (v - mean) as f32));
    }
    ImageBuffer::from_planar(img.channels(), h, w, data)
}

/// What `decode` returns for the template alone on a flat cover: the
/// reference the estimator matches observations against.
pub fn reference(t: &Template, spec: &TemplateSpec) -> Result<ImageBuffer> {
    let scaled = t.image().map(|v| v * spec.amplitude as f32);
    decode(&scaled, spec)
}

/// Normalized cross-correlation of two equally shaped buffers.
pub fn ncc(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    b.check_dims("ncc", a.dims())?;
    if a.channels() != b.channels() {
        return Err(Error::param("channels", format!("{} vs {}", a.channels(), b.channels())));
    }
    let n = a.data().len() as f64;
    let ma = a.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb = b.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&p, &q) in a.data().iter().zip(b.data()) {
        let (p, q) = (p as f64 - ma, q as f64 - mb);
        sab += p * q;
        saa += p * p;
        sbb += q * q;
    }
    let den = (saa * sbb).sqrt();
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(sab / den)
}

/// PSNR and SSIM of `marked` against `cover` over the full frame.
pub fn embedding_fidelity(cover: &ImageBuffer, marked: &ImageBuffer) -> Result<(Psnr, f64)> {
    let cover = to_rgb(cover)?;
    let all = BoolMask::filled(cover.height(), cover.width(), true);
    let psnr = psnr_masked(&cover, marked, &all)?.ok_or(Error::Empty("image"))?;
    let ssim = ssim_masked(&cover, marked, &all)?.ok_or(Error::Empty("image"))?;
    Ok((psnr, ssim))
}
