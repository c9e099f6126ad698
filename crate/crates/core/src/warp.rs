//! Bilinear sampling, backward warping and forward scattering.

use rayon::prelude::*;

use crate::buffer::{BoolMask, FlowField, ImageBuffer, ScalarMap};
use crate::error::Result;

/// Samples one plane at `(x, y)` with border clamping.
#[inline]
pub(crate) fn sample_plane(plane: &[f32], height: usize, width: usize, x: f32, y: f32) -> f32 {
    let x = x.clamp(0.0, (width - 1) as f32);
    let y = y.clamp(0.0, (height - 1) as f32);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f32;
    let fy = y - y0 as f32;
    let top = plane[y0 * width + x0] * (1.0 - fx) + plane[y0 * width + x1] * fx;
    let bottom = plane[y1 * width + x0] * (1.0 - fx) + plane[y1 * width + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Bilinear interpolation of every channel at `(x, y)`; out-of-range
/// coordinates are clamped to the border.
pub fn bilinear_sample(img: &ImageBuffer, x: f32, y: f32) -> Vec<f32> {
    let (h, w) = img.dims();
    (0..img.channels())
        .map(|c| sample_plane(img.plane(c), h, w, x, y))
        .collect()
}

#[inline]
fn in_bounds(x: f32, y: f32, height: usize, width: usize) -> bool {
    x >= 0.0 && y >= 0.0 && x <= (width - 1) as f32 && y <= (height - 1) as f32
}

/// `out(x, y) = img(x + u(x, y), y + v(x, y))`, bilinearly sampled.
///
/// The returned mask is true where the sampled point fell inside the image.
pub fn backward_warp(img: &ImageBuffer, flow: &FlowField) -> Result<(ImageBuffer, BoolMask)> {
    flow.check_dims("backward_warp flow", img.dims())?;
    let (h, w) = img.dims();
    let mut out = ImageBuffer::new(img.channels(), h, w);
    for c in 0..img.channels() {
        let src = img.plane(c);
        out.plane_mut(c)
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                for (x, o) in row.iter_mut().enumerate() {
                    let (u, v) = flow.get(y, x);
                    *o = sample_plane(src, h, w, x as f32 + u, y as f32 + v);
                }
            });
    }
    let coverage = BoolMask::from_fn(h, w, |y, x| {
        let (u, v) = flow.get(y, x);
        in_bounds(x as f32 + u, y as f32 + v, h, w)
    });
    Ok((out, coverage))
}

/// Backward-warps a flow field by another one (used by consistency checks).
pub fn warp_flow(field: &FlowField, by: &FlowField) -> Result<(FlowField, BoolMask)> {
    let (planes, coverage) = backward_warp(&field.to_planes(), by)?;
    Ok((FlowField::from_planes(&planes), coverage))
}

/// Splats each source pixel to `round(p + flow(p))`.
///
/// Rounding is half away from zero. When several sources land on one target
/// the one with the largest flow magnitude wins; ties go to the larger
/// row-major source index. Targets that receive nothing are holes (value 0).
pub fn forward_scatter(img: &ImageBuffer, flow: &FlowField) -> Result<(ImageBuffer, BoolMask)> {
    flow.check_dims("forward_scatter flow", img.dims())?;
    let (h, w) = img.dims();
    let n = h * w;
    let mut winner: Vec<Option<(f32, usize)>> = vec![None; n];
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.get(y, x);
            let tx = (x as f32 + u).round();
            let ty = (y as f32 + v).round();
            if tx < 0.0 || ty < 0.0 || tx >= w as f32 || ty >= h as f32 {
                continue;
            }
            let t = ty as usize * w + tx as usize;
            let src = y * w + x;
            let mag = u.hypot(v);
            // Sources arrive in increasing index order; replacing on equal
            // magnitude keeps the larger index.
            match winner[t] {
                Some((best, _)) if mag < best => {}
                _ => winner[t] = Some((mag, src)),
            }
        }
    }
    let mut out = ImageBuffer::new(img.channels(), h, w);
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for (t, slot) in winner.iter().enumerate() {
            if let Some((_, s)) = slot {
                dst[t] = src[*s];
            }
        }
    }
    let holes = BoolMask::from_vec(h, w, winner.iter().map(Option::is_none).collect())?;
    Ok((out, holes))
}

/// Per-pixel Euclidean length of the flow.
pub fn flow_magnitude(flow: &FlowField) -> ScalarMap {
    let data = flow
        .u()
        .iter()
        .zip(flow.v())
        .map(|(&u, &v)| (u as f64).hypot(v as f64))
        .collect();
    ScalarMap::from_vec(flow.height(), flow.width(), data).expect("flow dims are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp() -> ImageBuffer {
        ImageBuffer::from_fn(1, 4, 5, |_, y, x| (y * 5 + x) as f32)
    }

    fn random_image(seed: u64, c: usize, h: usize, w: usize) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(c, h, w, |_, _, _| rng.random::<f32>())
    }

    #[test]
    fn sample_at_lattice_points() {
        let img = ramp();
        assert_eq!(bilinear_sample(&img, 2.0, 3.0), vec![17.0]);
    }

    #[test]
    fn sample_midpoint() {
        let img = ImageBuffer::from_fn(1, 1, 4, |_, _, x| x as f32);
        assert_eq!(bilinear_sample(&img, 0.5, 0.0), vec![0.5]);
    }

    #[test]
    fn sample_clamps_to_border() {
        let img = ramp();
        assert_eq!(bilinear_sample(&img, -5.0, -5.0), vec![0.0]);
        assert_eq!(bilinear_sample(&img, 100.0, 100.0), vec![19.0]);
    }

    #[test]
    fn zero_flow_is_identity() {
        let img = random_image(1, 3, 9, 7);
        let (out, cov) = backward_warp(&img, &FlowField::zeros(9, 7)).unwrap();
        assert_eq!(out, img);
        assert_eq!(cov.count(), 63);
    }

    #[test]
    fn unit_shift_clamps_last_column() {
        let img = ImageBuffer::from_fn(1, 1, 3, |_, _, x| [10.0, 20.0, 30.0][x]);
        let (out, cov) = backward_warp(&img, &FlowField::constant(1, 3, 1.0, 0.0)).unwrap();
        assert_eq!(out.data(), &[20.0, 30.0, 30.0]);
        assert_eq!(cov.bits(), &[true, true, false]);
    }

    #[test]
    fn warp_rejects_mismatch() {
        assert!(backward_warp(&ramp(), &FlowField::zeros(4, 4)).is_err());
        assert!(forward_scatter(&ramp(), &FlowField::zeros(3, 5)).is_err());
    }

    #[test]
    fn scatter_zero_flow_is_identity() {
        let img = random_image(2, 3, 6, 6);
        let (out, holes) = forward_scatter(&img, &FlowField::zeros(6, 6)).unwrap();
        assert_eq!(out, img);
        assert!(holes.is_empty());
    }

    #[test]
    fn scatter_integer_shift() {
        let img = random_image(3, 1, 5, 8);
        let (out, holes) = forward_scatter(&img, &FlowField::constant(5, 8, 3.0, 0.0)).unwrap();
        for y in 0..5 {
            for x in 0..8 {
                if x >= 3 {
                    assert_eq!(out.get(0, y, x), img.get(0, y, x - 3));
                    assert!(!holes.get(y, x));
                } else {
                    assert!(holes.get(y, x));
                    assert_eq!(out.get(0, y, x), 0.0);
                }
            }
        }
    }

    #[test]
    fn scatter_collision_prefers_larger_motion() {
        // Pixel (0,0) moves by 5 to (0,5); pixel (0,3) moves by 2 to (0,5).
        let img = ImageBuffer::from_fn(1, 1, 8, |_, _, x| (x + 1) as f32 / 10.0);
        let mut flow = FlowField::zeros(1, 8);
        flow.set(0, 0, (5.0, 0.0));
        flow.set(0, 3, (2.0, 0.0));
        // Park (0,5) elsewhere so only the two candidates compete.
        flow.set(0, 5, (2.0, 0.0));
        let (out, holes) = forward_scatter(&img, &flow).unwrap();
        assert_eq!(out.get(0, 0, 5), 0.1);
        assert!(holes.get(0, 0));
        assert!(holes.get(0, 3));

        // Three sources meet at column 2; the stationary one loses.
        let mut flow = FlowField::zeros(1, 8);
        flow.set(0, 0, (2.0, 0.0));
        flow.set(0, 3, (-1.0, 0.0));
        let (out, _) = forward_scatter(&img, &flow).unwrap();
        assert_eq!(out.get(0, 0, 2), 0.1);
    }

    #[test]
    fn scatter_tie_goes_to_larger_index() {
        let img = ImageBuffer::from_fn(1, 1, 3, |_, _, x| x as f32);
        let mut flow = FlowField::zeros(1, 3);
        flow.set(0, 0, (1.0, 0.0));
        flow.set(0, 2, (-1.0, 0.0));
        let (out, _) = forward_scatter(&img, &flow).unwrap();
        assert_eq!(out.get(0, 0, 1), 2.0);
    }

    #[test]
    fn scatter_rounds_half_away_from_zero() {
        let img = ImageBuffer::from_fn(1, 1, 5, |_, _, x| x as f32);
        let (out, _) = forward_scatter(&img, &FlowField::constant(1, 5, 0.5, 0.0)).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 1.0, 2.0, 3.0]);
        let (out, _) = forward_scatter(&img, &FlowField::constant(1, 5, -0.5, 0.0)).unwrap();
        // 0.5 - 0.5 = 0 stays put, 1 - 0.5 = 0.5 rounds to 1.
        assert_eq!(out.get(0, 0, 0), 0.0);
        assert_eq!(out.get(0, 0, 1), 1.0);
    }

    #[test]
    fn magnitude_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let flow = FlowField::from_fn(16, 16, |_, _| (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)));
        let mag = flow_magnitude(&flow);
        for y in 0..16 {
            for x in 0..16 {
                let (u, v) = flow.get(y, x);
                let expect = ((u as f64).powi(2) + (v as f64).powi(2)).sqrt();
                assert!((mag.get(y, x) - expect).abs() < 1e-12);
            }
        }
        assert_eq!(flow_magnitude(&FlowField::constant(1, 1, 3.0, 4.0)).data(), &[5.0]);
        assert_eq!(flow_magnitude(&FlowField::zeros(1, 1)).data(), &[0.0]);
    }

    #[test]
    fn scatter_then_reverse_round_trip() {
        for seed in 0..8u64 {
            let img = random_image(seed, 3, 32, 32);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let t = (rng.random_range(-6..=6) as f32, rng.random_range(-6..=6) as f32);
            let flow = FlowField::constant(32, 32, t.0, t.1);
            let (frame, holes) = forward_scatter(&img, &flow).unwrap();
            let (back, cov) = backward_warp(&frame, &flow).unwrap();
            for y in 0..32 {
                for x in 0..32 {
                    let ty = y as i64 + t.1 as i64;
                    let tx = x as i64 + t.0 as i64;
                    if !cov.get(y, x) {
                        continue;
                    }
                    if holes.get(ty as usize, tx as usize) {
                        continue;
                    }
                    for c in 0..3 {
                        assert_eq!(back.get(c, y, x), img.get(c, y, x));
                    }
                }
            }
        }
    }

    #[test]
    fn scatter_translation_minus_three_then_warp() {
        let img = random_image(11, 1, 32, 32);
        let flow = FlowField::constant(32, 32, -3.0, 0.0);
        let (frame, _) = forward_scatter(&img, &flow).unwrap();
        let (back, cov) = backward_warp(&frame, &flow).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(cov.get(y, x), x >= 3);
                if x >= 3 {
                    assert_eq!(back.get(0, y, x), img.get(0, y, x));
                }
            }
        }
    }
}
