//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use flowtruth::motion::{BankEntry, MotionBank, MotionRange};
use flowtruth::sim::SimFrame;
use flowtruth::{BoolMask, ImageBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn photo_paths() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures().join("photo"))
        .expect("photo fixtures")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    paths.sort();
    paths
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E2eManifest {
    pub size: usize,
    pub covers: u64,
    pub cover_seed: u64,
    pub template_seed: u64,
    pub sim_seed: u64,
    pub max_translation: f64,
    pub frames: usize,
    pub drop_frames: usize,
    pub drop_fraction: f64,
    pub footprint_margin: usize,
    pub thresholds: Thresholds,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub fused_psnr_db: f64,
    pub aee_clean_px: f64,
    pub aee_degraded_px: f64,
    pub runtime_s: f64,
    pub drop_within_db: f64,
}

impl E2eManifest {
    pub fn load() -> Self {
        let text = std::fs::read_to_string(fixtures().join("e2e.toml")).expect("e2e manifest");
        toml::from_str(&text).expect("valid e2e manifest")
    }

    pub fn cover(&self, k: u64) -> ImageBuffer {
        smooth_cover(self.cover_seed + k, self.size)
    }

    pub fn bank(&self) -> MotionBank {
        let m = self.max_translation;
        MotionBank {
            entries: vec![BankEntry {
                weight: 1.0,
                motion: MotionRange::Translate { dx: [-m, m], dy: [-m, m], integer: true },
            }],
        }
    }
}

/// A mid-tone RGB image made of one low-frequency separable wave per
/// channel; little of it survives the template decoder's high-pass.
pub fn smooth_cover(seed: u64, size: usize) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f32, f32, f32)> = (0..3)
        .map(|_| (rng.random_range(0.3..1.0), rng.random_range(0.0..1.0), rng.random_range(0.3..1.0)))
        .collect();
    ImageBuffer::from_fn(3, size, size, |c, y, x| {
        let (fx, phase, fy) = waves[c];
        let (xx, yy) = (x as f32 / size as f32, y as f32 / size as f32);
        0.35 + 0.15 * (std::f32::consts::TAU * (fx * xx + phase)).sin() * (std::f32::consts::TAU * fy * yy).cos()
    })
}

/// Source pixels whose ground-truth target is in the frame and where
/// neither the source nor the target has an image border or scatter hole
/// within `margin` pixels (L∞).
pub fn footprint_mask(frame: &SimFrame, margin: usize) -> BoolMask {
    let (h, w) = frame.holes.dims();
    // Summed-area table of holes for O(1) window queries.
    let stride = w + 1;
    let mut sat = vec![0u32; (h + 1) * stride];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += frame.holes.get(y, x) as u32;
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
        }
    }
    let m = margin as isize;
    let inside = |y: isize, x: isize| y >= m && x >= m && y < h as isize - m && x < w as isize - m;
    BoolMask::from_fn(h, w, |y, x| {
        let (u, v) = frame.gt_flow.get(y, x);
        let (qx, qy) = ((x as f32 + u).round() as isize, (y as f32 + v).round() as isize);
        if !inside(y as isize, x as isize) || !inside(qy, qx) {
            return false;
        }
        let (y0, x0, y1, x1) = ((qy - m) as usize, (qx - m) as usize, (qy + m + 1) as usize, (qx + m + 1) as usize);
        sat[y1 * stride + x1] + sat[y0 * stride + x0] == sat[y0 * stride + x1] + sat[y1 * stride + x0]
    })
}

pub fn random_image(rng: &mut ChaCha8Rng, channels: usize, h: usize, w: usize) -> ImageBuffer {
    ImageBuffer::from_fn(channels, h, w, |_, _, _| rng.random_range(0.0..1.0))
}
