//! Separable filters and resampling on planar float images.
//!
//! Border handling is clamp-to-edge throughout.

use rayon::prelude::*;

use crate::buffer::ImageBuffer;

/// Normalized 1-D Gaussian taps, truncated at `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    gaussian_kernel_radius(sigma, (3.0 * sigma).ceil().max(1.0) as usize)
}

pub fn gaussian_kernel_radius(sigma: f64, radius: usize) -> Vec<f32> {
    let taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| (t / sum) as f32).collect()
}

/// Convolves one plane with `kernel` along rows then columns.
pub fn convolve_separable(plane: &[f32], height: usize, width: usize, kernel: &[f32]) -> Vec<f32> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0f32; height * width];
    tmp.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let src = &plane[y * width..(y + 1) * width];
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            for (k, &t) in kernel.iter().enumerate() {
                let xx = (x as isize + k as isize - r).clamp(0, width as isize - 1) as usize;
                acc += t * src[xx];
            }
            *o = acc;
        }
    });
    let mut out = vec![0.0f32; height * width];
    out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (k, &t) in kernel.iter().enumerate() {
            let yy = (y as isize + k as isize - r).clamp(0, height as isize - 1) as usize;
            let src = &tmp[yy * width..(yy + 1) * width];
            for (o, s) in row.iter_mut().zip(src) {
                *o += t * s;
            }
        }
    });
    out
}

pub fn gaussian_blur_plane(plane: &[f32], height: usize, width: usize, sigma: f64) -> Vec<f32> {
    convolve_separable(plane, height, width, &gaussian_kernel(sigma))
}

pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
    let (h, w) = img.dims();
    let kernel = gaussian_kernel(sigma);
    let mut data = Vec::with_capacity(img.data().len());
    for c in 0..img.channels() {
        data.extend(convolve_separable(img.plane(c), h, w, &kernel));
    }
    ImageBuffer::from_planar(img.channels(), h, w, data).expect("dims preserved")
}

/// Median over a `k × k` window, per channel.
pub fn median_filter(img: &ImageBuffer, k: usize) -> ImageBuffer {
    let (h, w) = img.dims();
    let r = (k / 2) as isize;
    let mut out = ImageBuffer::new(img.channels(), h, w);
    for c in 0..img.channels() {
        let src = img.plane(c);
        out.plane_mut(c)
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                let mut window = Vec::with_capacity(k * k);
                for (x, o) in row.iter_mut().enumerate() {
                    window.clear();
                    for dy in -r..=r {
                        let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        for dx in -r..=r {
                            let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                            window.push(src[yy * w + xx]);
                        }
                    }
                    let mid = window.len() / 2;
                    window.select_nth_unstable_by(mid, f32::total_cmp);
                    *o = window[mid];
                }
            });
    }
    out
}

/// Bilinear resize with half-pixel centers and no prefiltering.
pub fn resize_bilinear(img: &ImageBuffer, out_h: usize, out_w: usize) -> ImageBuffer {
    let (h, w) = img.dims();
    let sy = h as f32 / out_h as f32;
    let sx = w as f32 / out_w as f32;
    let mut out = ImageBuffer::new(img.channels(), out_h, out_w);
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..out_h {
            let fy = ((y as f32 + 0.5) * sy - 0.5).max(0.0);
            for x in 0..out_w {
                let fx = ((x as f32 + 0.5) * sx - 0.5).max(0.0);
                dst[y * out_w + x] = crate::warp::sample_plane(src, h, w, fx, fy);
            }
        }
    }
    out
}

/// Exact area-average resize: each output pixel integrates the input over its
/// footprint, weighting partially covered input pixels by overlap.
pub fn resize_area(img: &ImageBuffer, out_h: usize, out_w: usize) -> ImageBuffer {
    let (h, w) = img.dims();
    let wy = overlap_weights(h, out_h);
    let wx = overlap_weights(w, out_w);
    let mut out = ImageBuffer::new(img.channels(), out_h, out_w);
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for (oy, ry) in wy.iter().enumerate() {
            for (ox, rx) in wx.iter().enumerate() {
                let mut acc = 0.0f64;
                let mut norm = 0.0f64;
                for &(iy, a) in ry {
                    for &(ix, b) in rx {
                        acc += a * b * src[iy * w + ix] as f64;
                        norm += a * b;
                    }
                }
                dst[oy * out_w + ox] = (acc / norm) as f32;
            }
        }
    }
    out
}

fn overlap_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let mut taps = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < n_in {
                let a = (i as f64).max(lo);
                let b = ((i + 1) as f64).min(hi);
                if b > a {
                    taps.push((i, b - a));
                }
                i += 1;
            }
            taps
        })
        .collect()
}

/// Halves each dimension by 2×2 averaging (odd trailing rows/columns are
/// averaged with their clamped neighbour).
pub fn downsample2(img: &ImageBuffer) -> ImageBuffer {
    let (h, w) = img.dims();
    let oh = h.div_ceil(2).max(1);
    let ow = w.div_ceil(2).max(1);
    let mut out = ImageBuffer::new(img.channels(), oh, ow);
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..oh {
            let y0 = (2 * y).min(h - 1);
            let y1 = (2 * y + 1).min(h - 1);
            for x in 0..ow {
                let x0 = (2 * x).min(w - 1);
                let x1 = (2 * x + 1).min(w - 1);
                dst[y * ow + x] = 0.25 * (src[y0 * w + x0] + src[y0 * w + x1] + src[y1 * w + x0] + src[y1 * w + x1]);
            }
        }
    }
    out
}
