//! Parametric motion fields and the weighted bank they are drawn from.

use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::buffer::FlowField;
use crate::error::{Error, Result};
use crate::filter::{gaussian_blur_plane, resize_bilinear};
use crate::io::load_flo;

/// One concrete motion. Coordinates are pixel positions, `x` right, `y` down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSpec {
    Translate { dx: f64, dy: f64 },
    Rotate { cx: f64, cy: f64, theta: f64 },
    Zoom { cx: f64, cy: f64, scale: f64 },
    Affine { a11: f64, a12: f64, a21: f64, a22: f64, tx: f64, ty: f64 },
    SmoothRandom { sigma: f64, target_mag: f64, seed: u64 },
    FromFile { path: PathBuf },
}

impl MotionSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |name, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} is not finite")))
            }
        };
        match *self {
            MotionSpec::Translate { dx, dy } => {
                finite("dx", dx)?;
                finite("dy", dy)
            }
            MotionSpec::Rotate { cx, cy, theta } => {
                finite("cx", cx)?;
                finite("cy", cy)?;
                finite("theta", theta)
            }
            MotionSpec::Zoom { cx, cy, scale } => {
                finite("cx", cx)?;
                finite("cy", cy)?;
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::param("scale", format!("{scale} must be positive")));
                }
                Ok(())
            }
            MotionSpec::Affine { a11, a12, a21, a22, tx, ty } => {
                for v in [a11, a12, a21, a22, tx, ty] {
                    finite("affine", v)?;
                }
                Ok(())
            }
            MotionSpec::SmoothRandom { sigma, target_mag, .. } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::param("sigma", format!("{sigma} must be positive")));
                }
                if !(target_mag >= 0.0 && target_mag.is_finite()) {
                    return Err(Error::param("target_mag", format!("{target_mag} must be >= 0")));
                }
                Ok(())
            }
            MotionSpec::FromFile { .. } => Ok(()),
        }
    }

    /// The same kind of motion with its magnitude multiplied by `s`.
    ///
    /// File-backed fields cannot be rescaled here; use the rendered field.
    pub fn scaled(&self, s: f64) -> MotionSpec {
        match *self {
            MotionSpec::Translate { dx, dy } => MotionSpec::Translate { dx: dx * s, dy: dy * s },
            MotionSpec::Rotate { cx, cy, theta } => MotionSpec::Rotate { cx, cy, theta: theta * s },
            MotionSpec::Zoom { cx, cy, scale } => MotionSpec::Zoom { cx, cy, scale: 1.0 + (scale - 1.0) * s },
            MotionSpec::Affine { a11, a12, a21, a22, tx, ty } => MotionSpec::Affine {
                a11: 1.0 + (a11 - 1.0) * s,
                a12: a12 * s,
                a21: a21 * s,
                a22: 1.0 + (a22 - 1.0) * s,
                tx: tx * s,
                ty: ty * s,
            },
            MotionSpec::SmoothRandom { sigma, target_mag, seed } => {
                MotionSpec::SmoothRandom { sigma, target_mag: target_mag * s, seed }
            }
            MotionSpec::FromFile { .. } => self.clone(),
        }
    }
}

fn affine_field(h: usize, w: usize, m: [f64; 6]) -> FlowField {
    let [a11, a12, a21, a22, tx, ty] = m;
    FlowField::from_fn(h, w, |y, x| {
        let (x, y) = (x as f64, y as f64);
        let u = a11 * x + a12 * y + tx - x;
        let v = a21 * x + a22 * y + ty - y;
        (u as f32, v as f32)
    })
}

fn smooth_random(h: usize, w: usize, sigma: f64, target: f64, seed: u64) -> FlowField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |rng: &mut ChaCha8Rng| -> Vec<f32> {
        let white: Vec<f32> = (0..h * w).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
        gaussian_blur_plane(&white, h, w, sigma)
    };
    let u = noise(&mut rng);
    let v = noise(&mut rng);
    let mean_mag =
        u.iter().zip(&v).map(|(&a, &b)| (a as f64).hypot(b as f64)).sum::<f64>() / (h * w) as f64;
    let k = if mean_mag > 0.0 { (target / mean_mag) as f32 } else { 0.0 };
    FlowField::from_components(h, w, u.iter().map(|a| a * k).collect(), v.iter().map(|b| b * k).collect())
        .expect("sized")
}

/// Bilinear spatial resample; vectors are rescaled to the new pixel grid.
pub fn resample_flow(flow: &FlowField, h: usize, w: usize) -> FlowField {
    if flow.dims() == (h, w) {
        return flow.clone();
    }
    let planes = resize_bilinear(&flow.to_planes(), h, w);
    let su = w as f32 / flow.width() as f32;
    let sv = h as f32 / flow.height() as f32;
    FlowField::from_components(
        h,
        w,
        planes.plane(0).iter().map(|u| u * su).collect(),
        planes.plane(1).iter().map(|v| v * sv).collect(),
    )
    .expect("sized")
}

/// Dense field for `spec` on an `h × w` grid.
pub fn render_motion(spec: &MotionSpec, h: usize, w: usize) -> Result<FlowField> {
    spec.validate()?;
    if h == 0 || w == 0 {
        return Err(Error::Empty("motion dimensions"));
    }
    Ok(match *spec {
        MotionSpec::Translate { dx, dy } => FlowField::constant(h, w, dx as f32, dy as f32),
        MotionSpec::Rotate { cx, cy, theta } => {
            let (s, c) = theta.sin_cos();
            FlowField::from_fn(h, w, |y, x| {
                let (px, py) = (x as f64 - cx, y as f64 - cy);
                ((c * px - s * py - px) as f32, (s * px + c * py - py) as f32)
            })
        }
        MotionSpec::Zoom { cx, cy, scale } => FlowField::from_fn(h, w, |y, x| {
            (((scale - 1.0) * (x as f64 - cx)) as f32, ((scale - 1.0) * (y as f64 - cy)) as f32)
        }),
        MotionSpec::Affine { a11, a12, a21, a22, tx, ty } => affine_field(h, w, [a11, a12, a21, a22, tx, ty]),
        MotionSpec::SmoothRandom { sigma, target_mag, seed } => smooth_random(h, w, sigma, target_mag, seed),
        MotionSpec::FromFile { ref path } => resample_flow(&load_flo(path)?, h, w),
    })
}

/// Inclusive `[lo, hi]` parameter range.
pub type Range = [f64; 2];

fn check_range(name: &'static str, r: Range) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::param(name, format!("bad range {r:?}")));
    }
    Ok(())
}

fn draw(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

fn image_center(h: usize, w: usize) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

/// A motion family with parameter ranges. Rotations and zooms are about the
/// image center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionRange {
    Translate {
        dx: Range,
        dy: Range,
        /// Round the drawn (and any later rescaled) offsets to whole pixels.
        #[serde(default)]
        integer: bool,
    },
    Rotate { theta: Range },
    Zoom { scale: Range },
    Affine { a11: Range, a12: Range, a21: Range, a22: Range, tx: Range, ty: Range },
    SmoothRandom { sigma: Range, target_mag: Range },
    FromFile { path: PathBuf },
}

impl MotionRange {
    fn validate(&self) -> Result<()> {
        match self {
            MotionRange::Translate { dx, dy, .. } => {
                check_range("dx", *dx)?;
                check_range("dy", *dy)
            }
            MotionRange::Rotate { theta } => check_range("theta", *theta),
            MotionRange::Zoom { scale } => {
                check_range("scale", *scale)?;
                if scale[0] <= 0.0 {
                    return Err(Error::param("scale", "must be positive"));
                }
                Ok(())
            }
            MotionRange::Affine { a11, a12, a21, a22, tx, ty } => {
                for r in [a11, a12, a21, a22, tx, ty] {
                    check_range("affine", *r)?;
                }
                Ok(())
            }
            MotionRange::SmoothRandom { sigma, target_mag } => {
                check_range("sigma", *sigma)?;
                check_range("target_mag", *target_mag)?;
                if sigma[0] <= 0.0 || target_mag[0] < 0.0 {
                    return Err(Error::param("smooth_random", "sigma must be > 0, target_mag >= 0"));
                }
                Ok(())
            }
            MotionRange::FromFile { .. } => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, h: usize, w: usize, s: f64) -> MotionSpec {
        let (cx, cy) = image_center(h, w);
        match self {
            MotionRange::Translate { dx, dy, integer } => {
                let (mut dx, mut dy) = (draw(rng, *dx) * s, draw(rng, *dy) * s);
                if *integer {
                    dx = dx.round();
                    dy = dy.round();
                }
                MotionSpec::Translate { dx, dy }
            }
            MotionRange::Rotate { theta } => MotionSpec::Rotate { cx, cy, theta: draw(rng, *theta) }.scaled(s),
            MotionRange::Zoom { scale } => MotionSpec::Zoom { cx, cy, scale: draw(rng, *scale) }.scaled(s),
            MotionRange::Affine { a11, a12, a21, a22, tx, ty } => MotionSpec::Affine {
                a11: draw(rng, *a11),
                a12: draw(rng, *a12),
                a21: draw(rng, *a21),
                a22: draw(rng, *a22),
                tx: draw(rng, *tx),
                ty: draw(rng, *ty),
            }
            .scaled(s),
            MotionRange::SmoothRandom { sigma, target_mag } => MotionSpec::SmoothRandom {
                sigma: draw(rng, *sigma),
                target_mag: draw(rng, *target_mag),
                seed: rng.random(),
            }
            .scaled(s),
            MotionRange::FromFile { path } => MotionSpec::FromFile { path: path.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankEntry {
    pub weight: f64,
    pub motion: MotionRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionBank {
    pub entries: Vec<BankEntry>,
}

impl Default for MotionBank {
    fn default() -> Self {
        let entry = |motion| BankEntry { weight: 1.0, motion };
        MotionBank {
            entries: vec![
                entry(MotionRange::Translate { dx: [-40.0, 40.0], dy: [-40.0, 40.0], integer: false }),
                entry(MotionRange::Rotate { theta: [-0.2, 0.2] }),
                entry(MotionRange::Zoom { scale: [0.8, 1.25] }),
                entry(MotionRange::SmoothRandom { sigma: [8.0, 32.0], target_mag: [0.0, 40.0] }),
            ],
        }
    }
}

impl MotionBank {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Empty("motion bank"));
        }
        for e in &self.entries {
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::param("weight", format!("{} must be positive", e.weight)));
            }
            e.motion.validate()?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let bank: MotionBank = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Weight-proportional entry choice, then a uniform draw inside its ranges.
/// `h` and `w` place rotation and zoom centers.
pub fn sample_motion(bank: &MotionBank, seed: u64, h: usize, w: usize) -> Result<MotionSpec> {
    sample_motion_scaled(bank, seed, h, w, 1.0)
}

/// As [`sample_motion`], with the drawn magnitude multiplied by `s`.
/// Integer translations stay integral after scaling.
pub fn sample_motion_scaled(bank: &MotionBank, seed: u64, h: usize, w: usize, s: f64) -> Result<MotionSpec> {
    bank.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = WeightedIndex::new(bank.entries.iter().map(|e| e.weight))
        .map_err(|e| Error::param("weight", e.to_string()))?;
    let entry = &bank.entries[index.sample(&mut rng)];
    Ok(entry.motion.sample(&mut rng, h, w, s))
}
