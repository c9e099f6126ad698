//! Coarse-to-fine block matching between a reference template and a decoded
//! observation.
//!
//! Displacement convention: the estimate `D` at pixel `x` says that
//! `ref(x)` is found at `obs(x + D)`, so it is directly a forward flow from
//! the reference frame to the observed one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{ConfidenceMap, FlowField, ImageBuffer, ScalarMap};
use crate::error::{Error, Result};
use crate::filter::{downsample2, resize_bilinear};

/// Pyramid levels stop before either side drops below this or below two
/// patch widths, whichever is larger.
pub const MIN_LEVEL_SIDE: usize = 8;
const TILE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchParams {
    pub patch: usize,
    pub levels: usize,
    pub radius: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams { patch: 21, levels: 4, radius: 4 }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch < 3 || self.patch % 2 == 0 {
            return Err(Error::param("patch", format!("{} must be odd and >= 3", self.patch)));
        }
        if self.levels == 0 {
            return Err(Error::param("levels", "must be >= 1"));
        }
        if self.radius == 0 {
            return Err(Error::param("radius", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEstimate {
    pub flow: FlowField,
    /// Plane-detrended patch SSD at the chosen integer displacement (finest
    /// level).
    pub cost: ScalarMap,
    /// Best cost over the best cost outside the winner's 3×3 neighborhood;
    /// 0 when no such alternative exists.
    pub second_best_ratio: ScalarMap,
}

/// Planar channels with clamped lookups.
struct Planes<'a> {
    img: &'a ImageBuffer,
    h: isize,
    w: isize,
}

impl<'a> Planes<'a> {
    fn new(img: &'a ImageBuffer) -> Self {
        Planes { img, h: img.height() as isize, w: img.width() as isize }
    }

    #[inline]
    fn index(&self, y: isize, x: isize) -> usize {
        (y.clamp(0, self.h - 1) * self.w + x.clamp(0, self.w - 1)) as usize
    }
}

/// Channel differences `ref(clamp(q)) − obs(clamp(q + d))` into `diff`,
/// returning their sum of squares.
#[inline]
fn pixel_diffs(r: &Planes, o: &Planes, qy: isize, qx: isize, du: isize, dv: isize, diff: &mut [f64]) -> f64 {
    let ri = r.index(qy, qx);
    let oi = o.index(qy + dv, qx + du);
    let mut s = 0.0f64;
    for (c, d) in diff.iter_mut().enumerate() {
        *d = r.img.plane(c)[ri] as f64 - o.img.plane(c)[oi] as f64;
        s += *d * *d;
    }
    s
}

/// Patch SSD left after removing a per-channel plane `a + b·x + c·y` from
/// the differences, from the patch sums `Σ d²`, `Σ d_c`, `Σ x·d_c`, `Σ y·d_c`
/// (`x`, `y` relative to the patch center). Smooth offsets and ramps in the
/// observation, such as the high-pass response near borders and holes,
/// then cost nothing.
#[inline]
fn plane_ssd(sq: f64, sums: &[[f64; 3]], half: usize) -> f64 {
    let side = (2 * half + 1) as f64;
    let n = side * side;
    let hf = half as f64;
    let moment = n * hf * (hf + 1.0) / 3.0;
    let fitted: f64 = sums.iter().map(|[s, sx, sy]| s * s / n + (sx * sx + sy * sy) / moment).sum();
    (sq - fitted).max(0.0)
}

#[derive(Debug, Clone, Copy)]
struct PixelResult {
    d: (i32, i32),
    offset: (f32, f32),
    best: f64,
    ratio: f64,
}

#[derive(Clone, Copy)]
struct Region {
    y0: usize,
    x0: usize,
    h: usize,
    w: usize,
}

struct LevelSearch<'a> {
    r: Planes<'a>,
    o: Planes<'a>,
    width: usize,
    init: &'a [(i32, i32)],
    half: usize,
    radius: i32,
    subpixel: bool,
}

impl LevelSearch<'_> {
    fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    fn bounds(&self, reg: Region) -> (i32, i32, i32, i32) {
        let (mut umin, mut umax, mut vmin, mut vmax) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for y in reg.y0..reg.y0 + reg.h {
            for &(u, v) in &self.init[y * self.width + reg.x0..y * self.width + reg.x0 + reg.w] {
                umin = umin.min(u);
                umax = umax.max(u);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
        }
        (umin, umax, vmin, vmax)
    }

    /// Searches `reg`, splitting it while its initial displacements are too
    /// spread out for one shared candidate set to pay off.
    fn search(&self, reg: Region, out: &mut Vec<(usize, PixelResult)>) {
        let (umin, umax, vmin, vmax) = self.bounds(reg);
        let r = self.radius;
        let candidates = ((umax - umin + 2 * r + 1) as usize) * ((vmax - vmin + 2 * r + 1) as usize);
        if candidates > 4 * self.side() * self.side() && reg.h * reg.w > 1 {
            let (h1, w1) = (reg.h.div_ceil(2), reg.w.div_ceil(2));
            for (dy, hh) in [(0, h1), (h1, reg.h - h1)] {
                for (dx, ww) in [(0, w1), (w1, reg.w - w1)] {
                    if hh > 0 && ww > 0 {
                        self.search(Region { y0: reg.y0 + dy, x0: reg.x0 + dx, h: hh, w: ww }, out);
                    }
                }
            }
            return;
        }
        self.evaluate(reg, (umin, umax, vmin, vmax), out);
    }

    fn evaluate(&self, reg: Region, (umin, umax, vmin, vmax): (i32, i32, i32, i32), out: &mut Vec<(usize, PixelResult)>) {
        let r = self.radius;
        let side = self.side();
        let win = side * side;
        let p = 2 * self.half;
        let (eh, ew) = (reg.h + p, reg.w + p);
        let stride = ew + 1;
        let mut windows = vec![f64::INFINITY; reg.h * reg.w * win];
        let channels = self.r.img.channels();
        // Integral images of Σ d², then d, x·d and y·d per channel.
        let planes = 1 + 3 * channels;
        let plane = (eh + 1) * stride;
        let mut integral = vec![0.0f64; planes * plane];
        let mut diff = vec![0.0f64; channels];
        let mut row = vec![0.0f64; planes];
        let mut sums = vec![[0.0f64; 3]; channels];
        let init_at = |ly: usize, lx: usize| self.init[(reg.y0 + ly) * self.width + reg.x0 + lx];

        for du in umin - r..=umax + r {
            for dv in vmin - r..=vmax + r {
                for ey in 0..eh {
                    let qy = (reg.y0 + ey) as isize - self.half as isize;
                    row.iter_mut().for_each(|v| *v = 0.0);
                    for ex in 0..ew {
                        let qx = (reg.x0 + ex) as isize - self.half as isize;
                        row[0] += pixel_diffs(&self.r, &self.o, qy, qx, du as isize, dv as isize, &mut diff);
                        for (c, &d) in diff.iter().enumerate() {
                            row[1 + 3 * c] += d;
                            row[2 + 3 * c] += ex as f64 * d;
                            row[3 + 3 * c] += ey as f64 * d;
                        }
                        let (above, at) = (ey * stride + ex + 1, (ey + 1) * stride + ex + 1);
                        for (k, &acc) in row.iter().enumerate() {
                            integral[k * plane + at] = integral[k * plane + above] + acc;
                        }
                    }
                }
                let rect = |k: usize, ly: usize, lx: usize| {
                    let b = &integral[k * plane..(k + 1) * plane];
                    b[(ly + p + 1) * stride + lx + p + 1] - b[ly * stride + lx + p + 1] - b[(ly + p + 1) * stride + lx]
                        + b[ly * stride + lx]
                };
                for ly in 0..reg.h {
                    for lx in 0..reg.w {
                        let (iu, iv) = init_at(ly, lx);
                        let (ou, ov) = (du - iu + r, dv - iv + r);
                        if ou < 0 || ov < 0 || ou >= side as i32 || ov >= side as i32 {
                            continue;
                        }
                        let (cx, cy) = ((lx + self.half) as f64, (ly + self.half) as f64);
                        for (c, m) in sums.iter_mut().enumerate() {
                            let s = rect(1 + 3 * c, ly, lx);
                            *m = [s, rect(2 + 3 * c, ly, lx) - cx * s, rect(3 + 3 * c, ly, lx) - cy * s];
                        }
                        windows[(ly * reg.w + lx) * win + ou as usize * side + ov as usize] =
                            plane_ssd(rect(0, ly, lx), &sums, self.half);
                    }
                }
            }
        }

        for ly in 0..reg.h {
            for lx in 0..reg.w {
                let w = &windows[(ly * reg.w + lx) * win..(ly * reg.w + lx + 1) * win];
                let (iu, iv) = init_at(ly, lx);
                out.push(((reg.y0 + ly) * self.width + reg.x0 + lx, self.pick(w, iu, iv)));
            }
        }
    }

    /// Winner of one cost window, indexed `u`-major so the first strict
    /// minimum is the lexicographically smallest displacement.
    fn pick(&self, w: &[f64], iu: i32, iv: i32) -> PixelResult {
        let side = self.side();
        let mut bi = 0;
        for (i, &c) in w.iter().enumerate() {
            if c < w[bi] {
                bi = i;
            }
        }
        let (bu, bv) = (bi / side, bi % side);
        let best = w[bi];
        let mut second = f64::INFINITY;
        for (i, &c) in w.iter().enumerate() {
            let (u, v) = (i / side, i % side);
            if u.abs_diff(bu) > 1 || v.abs_diff(bv) > 1 {
                second = second.min(c);
            }
        }
        let ratio = if second.is_infinite() {
            0.0
        } else if second > 0.0 {
            best / second
        } else {
            1.0
        };
        let offset = if self.subpixel {
            let at = |u: usize, v: usize| w[u * side + v];
            let fit = |lo: Option<f64>, hi: Option<f64>| -> f32 {
                let (Some(lo), Some(hi)) = (lo, hi) else { return 0.0 };
                // An exact match is already integral.
                if best <= 1e-9 * 0.5 * (lo + hi) {
                    return 0.0;
                }
                let den = lo - 2.0 * best + hi;
                if den <= 0.0 {
                    return 0.0;
                }
                ((lo - hi) / (2.0 * den)).clamp(-0.5, 0.5) as f32
            };
            let nb = |u: isize, v: isize| {
                (u >= 0 && v >= 0 && (u as usize) < side && (v as usize) < side).then(|| at(u as usize, v as usize))
            };
            let (bu, bv) = (bu as isize, bv as isize);
            (fit(nb(bu - 1, bv), nb(bu + 1, bv)), fit(nb(bu, bv - 1), nb(bu, bv + 1)))
        } else {
            (0.0, 0.0)
        };
        PixelResult {
            d: (iu + bu as i32 - self.radius, iv + bv as i32 - self.radius),
            offset,
            best,
            ratio,
        }
    }
}

fn search_level(
    r: &ImageBuffer,
    o: &ImageBuffer,
    init: &[(i32, i32)],
    params: &MatchParams,
    subpixel: bool,
) -> Vec<PixelResult> {
    let (h, w) = r.dims();
    let search = LevelSearch {
        r: Planes::new(r),
        o: Planes::new(o),
        width: w,
        init,
        half: params.patch / 2,
        radius: params.radius as i32,
        subpixel,
    };
    let tiles: Vec<Region> = (0..h)
        .step_by(TILE)
        .flat_map(|y0| {
            (0..w).step_by(TILE).map(move |x0| Region { y0, x0, h: TILE.min(h - y0), w: TILE.min(w - x0) })
        })
        .collect();
    let parts: Vec<Vec<(usize, PixelResult)>> = tiles
        .par_iter()
        .map(|&reg| {
            let mut out = Vec::with_capacity(reg.h * reg.w);
            search.search(reg, &mut out);
            out
        })
        .collect();
    let blank = PixelResult { d: (0, 0), offset: (0.0, 0.0), best: 0.0, ratio: 0.0 };
    let mut result = vec![blank; h * w];
    for (i, px) in parts.into_iter().flatten() {
        result[i] = px;
    }
    result
}

/// Doubles an integer field onto the next finer grid.
fn upsample_init(d: &[PixelResult], (h, w): (usize, usize), fine: (usize, usize)) -> Vec<(i32, i32)> {
    let coarse = FlowField::from_components(
        h,
        w,
        d.iter().map(|p| p.d.0 as f32).collect(),
        d.iter().map(|p| p.d.1 as f32).collect(),
    )
    .expect("sized");
    let up = resize_bilinear(&coarse.to_planes(), fine.0, fine.1);
    up.plane(0)
        .iter()
        .zip(up.plane(1))
        .map(|(&u, &v)| ((2.0 * u).round() as i32, (2.0 * v).round() as i32))
        .collect()
}

fn check_pair(r: &ImageBuffer, o: &ImageBuffer) -> Result<()> {
    o.check_dims("observed template", r.dims())?;
    if r.channels() != o.channels() {
        return Err(Error::param("channels", format!("{} vs {}", r.channels(), o.channels())));
    }
    Ok(())
}

/// Dense flow from `reference` to `observed`; see the module docs for the
/// convention.
pub fn estimate_flow(reference: &ImageBuffer, observed: &ImageBuffer, params: &MatchParams) -> Result<FlowEstimate> {
    params.validate()?;
    check_pair(reference, observed)?;
    let mut pyramid = vec![(reference.clone(), observed.clone())];
    while pyramid.len() < params.levels {
        let (r, o) = pyramid.last().expect("non-empty");
        let (h, w) = r.dims();
        let min_side = MIN_LEVEL_SIDE.max(2 * params.patch);
        if h.div_ceil(2) < min_side || w.div_ceil(2) < min_side {
            break;
        }
        let next = (downsample2(r), downsample2(o));
        pyramid.push(next);
    }

    let coarsest = pyramid.last().expect("non-empty").0.dims();
    let mut init = vec![(0i32, 0i32); coarsest.0 * coarsest.1];
    let mut level = pyramid.len() - 1;
    loop {
        let (r, o) = &pyramid[level];
        let res = search_level(r, o, &init, params, level == 0);
        if level == 0 {
            let (h, w) = r.dims();
            let flow = FlowField::from_components(
                h,
                w,
                res.iter().map(|p| p.d.0 as f32 + p.offset.0).collect(),
                res.iter().map(|p| p.d.1 as f32 + p.offset.1).collect(),
            )?;
            return Ok(FlowEstimate {
                flow,
                cost: ScalarMap::from_vec(h, w, res.iter().map(|p| p.best).collect())?,
                second_best_ratio: ScalarMap::from_vec(h, w, res.iter().map(|p| p.ratio).collect())?,
            });
        }
        init = upsample_init(&res, r.dims(), pyramid[level - 1].0.dims());
        level -= 1;
    }
}

/// Brute-force single-scale integer search over `[-max_disp, max_disp]²`,
/// same cost, border rule and tie-break as [`estimate_flow`]. Meant as a
/// test oracle on small inputs.
pub fn oracle_exhaustive(
    reference: &ImageBuffer,
    observed: &ImageBuffer,
    max_disp: usize,
    patch: usize,
) -> Result<(FlowField, ScalarMap)> {
    check_pair(reference, observed)?;
    if patch < 3 || patch % 2 == 0 {
        return Err(Error::param("patch", "must be odd"));
    }
    let (h, w) = reference.dims();
    let (r, o) = (Planes::new(reference), Planes::new(observed));
    let half = (patch / 2) as isize;
    let m = max_disp as isize;
    let mut flow = FlowField::zeros(h, w);
    let mut cost = ScalarMap::filled(h, w, 0.0);
    let mut diff = vec![0.0f64; reference.channels()];
    let mut sums = vec![[0.0f64; 3]; reference.channels()];
    for y in 0..h {
        for x in 0..w {
            let mut best = (f64::INFINITY, 0, 0);
            for du in -m..=m {
                for dv in -m..=m {
                    let mut sq = 0.0;
                    sums.iter_mut().for_each(|v| *v = [0.0; 3]);
                    for py in -half..=half {
                        for px in -half..=half {
                            sq += pixel_diffs(&r, &o, y as isize + py, x as isize + px, du, dv, &mut diff);
                            for (acc, &d) in sums.iter_mut().zip(&diff) {
                                acc[0] += d;
                                acc[1] += px as f64 * d;
                                acc[2] += py as f64 * d;
                            }
                        }
                    }
                    let s = plane_ssd(sq, &sums, half as usize);
                    if s < best.0 {
                        best = (s, du, dv);
                    }
                }
            }
            flow.set(y, x, (best.1 as f32, best.2 as f32));
            cost.data_mut()[y * w + x] = best.0;
        }
    }
    Ok((flow, cost))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

const TAU_EPS: f64 = 1e-12;

/// `exp(−cost/τ)·(1 − ratio)` with `τ = median(cost) + ε`, min-max
/// normalized.
pub fn cost_to_confidence(cost: &ScalarMap, second_best_ratio: &ScalarMap) -> Result<ConfidenceMap> {
    second_best_ratio.check_dims("second-best ratio", cost.dims())?;
    if cost.data().is_empty() {
        return Err(Error::Empty("cost map"));
    }
    if cost.data().iter().chain(second_best_ratio.data()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost map"));
    }
    let tau = median(cost.data()) + TAU_EPS;
    let raw: Vec<f64> = cost
        .data()
        .iter()
        .zip(second_best_ratio.data())
        .map(|(&c, &q)| (-c / tau).exp() * (1.0 - q.clamp(0.0, 1.0)))
        .collect();
    Ok(ConfidenceMap::normalize(&ScalarMap::from_vec(cost.height(), cost.width(), raw)?))
}
