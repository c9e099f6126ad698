//! Image-recovery quality: masked PSNR, masked SSIM and pHash similarity.

use crate::buffer::{BoolMask, ImageBuffer};
use crate::error::{Error, Result};
use crate::filter::{gaussian_kernel_radius, resize_area};

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_RADIUS: usize = 5;

/// Mean squared error over masked pixels, all channels pooled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    /// Zero error: PSNR is unbounded.
    Identical,
}

impl Psnr {
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Db(v) => Some(v),
            Psnr::Identical => None,
        }
    }
}

fn check_pair(a: &ImageBuffer, b: &ImageBuffer, mask: &BoolMask) -> Result<()> {
    b.check_dims("image pair", a.dims())?;
    mask.check_dims("image mask", a.dims())?;
    if a.channels() != b.channels() {
        return Err(Error::param(
            "channels",
            format!("{} vs {}", a.channels(), b.channels()),
        ));
    }
    Ok(())
}

/// `10 log10(1 / MSE)` over masked pixels; `None` for an empty mask.
pub fn psnr_masked(a: &ImageBuffer, b: &ImageBuffer, mask: &BoolMask) -> Result<Option<Psnr>> {
    check_pair(a, b, mask)?;
    let n = mask.count();
    if n == 0 {
        return Ok(None);
    }
    let mut sse = 0.0f64;
    for c in 0..a.channels() {
        for ((&p, &q), &m) in a.plane(c).iter().zip(b.plane(c)).zip(mask.bits()) {
            if m {
                let d = p as f64 - q as f64;
                sse += d * d;
            }
        }
    }
    if sse == 0.0 {
        return Ok(Some(Psnr::Identical));
    }
    let mse = sse / (n * a.channels()) as f64;
    Ok(Some(Psnr::Db(10.0 * (1.0 / mse).log10())))
}

fn blur64(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &t) in k.iter().enumerate() {
                let xx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += t * plane[y * w + xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for (i, &t) in k.iter().enumerate() {
            let yy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
            for x in 0..w {
                out[y * w + x] += t * tmp[yy * w + x];
            }
        }
    }
    out
}

/// Per-pixel SSIM averaged over channels (Gaussian 11×11 window, σ = 1.5,
/// dynamic range 1, clamped borders).
pub fn ssim_map(a: &ImageBuffer, b: &ImageBuffer) -> Result<Vec<f64>> {
    check_pair(a, b, &BoolMask::filled(a.height(), a.width(), true))?;
    let (h, w) = a.dims();
    let k: Vec<f64> = gaussian_kernel_radius(SSIM_SIGMA, SSIM_RADIUS)
        .into_iter()
        .map(f64::from)
        .collect();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut acc = vec![0.0f64; h * w];
    for c in 0..a.channels() {
        let x: Vec<f64> = a.plane(c).iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = b.plane(c).iter().map(|&v| v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = blur64(&x, h, w, &k);
        let my = blur64(&y, h, w, &k);
        let sxx = blur64(&xx, h, w, &k);
        let syy = blur64(&yy, h, w, &k);
        let sxy = blur64(&xy, h, w, &k);
        for i in 0..h * w {
            let vx = sxx[i] - mx[i] * mx[i];
            let vy = syy[i] - my[i] * my[i];
            let cxy = sxy[i] - mx[i] * my[i];
            let num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
            let den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
            acc[i] += num / den;
        }
    }
    let nc = a.channels() as f64;
    Ok(acc.into_iter().map(|v| v / nc).collect())
}

/// Mean of the SSIM map over masked pixels. Windows may reach into unmasked
/// pixels.
pub fn ssim_masked(a: &ImageBuffer, b: &ImageBuffer, mask: &BoolMask) -> Result<Option<f64>> {
    check_pair(a, b, mask)?;
    let n = mask.count();
    if n == 0 {
        return Ok(None);
    }
    let map = ssim_map(a, b)?;
    let sum: f64 = map
        .iter()
        .zip(mask.bits())
        .filter_map(|(&v, &m)| m.then_some(v))
        .sum();
    Ok(Some(sum / n as f64))
}

const HASH_SIDE: usize = 32;
const HASH_LOW: usize = 8;

/// 64-bit DCT perceptual hash.
///
/// Luma, area-resized to 32×32, 2-D DCT-II, top-left 8×8 block thresholded
/// at the median of its 63 AC coefficients. Bit `8·v + u` is coefficient
/// `(u, v)`.
pub fn phash(img: &ImageBuffer) -> u64 {
    let small = resize_area(&img.to_gray(), HASH_SIDE, HASH_SIDE);
    let px: Vec<f64> = small.plane(0).iter().map(|&v| v as f64).collect();
    let n = HASH_SIDE;
    let basis: Vec<f64> = (0..HASH_LOW)
        .flat_map(|k| {
            (0..n).map(move |i| {
                (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos()
            })
        })
        .collect();
    // Row transform then column transform, low frequencies only.
    let mut rows = vec![0.0f64; n * HASH_LOW];
    for y in 0..n {
        for u in 0..HASH_LOW {
            let b = &basis[u * n..(u + 1) * n];
            rows[y * HASH_LOW + u] = (0..n).map(|x| px[y * n + x] * b[x]).sum();
        }
    }
    let mut coeff = [0.0f64; HASH_LOW * HASH_LOW];
    for v in 0..HASH_LOW {
        let b = &basis[v * n..(v + 1) * n];
        for u in 0..HASH_LOW {
            coeff[v * HASH_LOW + u] = (0..n).map(|y| rows[y * HASH_LOW + u] * b[y]).sum();
        }
    }
    let mut ac: Vec<f64> = coeff[1..].to_vec();
    ac.sort_by(f64::total_cmp);
    let median = ac[ac.len() / 2];
    coeff
        .iter()
        .enumerate()
        .fold(0u64, |h, (i, &c)| if c > median { h | (1 << i) } else { h })
}

/// `1 − Hamming(hash(a), hash(b)) / 64`.
pub fn phash_similarity(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    1.0 - (phash(a) ^ phash(b)).count_ones() as f64 / 64.0
}
