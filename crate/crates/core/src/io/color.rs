//! Middlebury color-wheel flow visualization.

use crate::buffer::{FlowField, ImageBuffer};

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
pub const WHEEL_LEN: usize = RY + YG + GC + CB + BM + MR;

/// The 55 hue anchors, RGB in 0..=255.
pub fn color_wheel() -> Vec<[f32; 3]> {
    let mut wheel = Vec::with_capacity(WHEEL_LEN);
    let ramp = |i: usize, n: usize| (255.0 * i as f32 / n as f32).floor();
    for i in 0..RY {
        wheel.push([255.0, ramp(i, RY), 0.0]);
    }
    for i in 0..YG {
        wheel.push([255.0 - ramp(i, YG), 255.0, 0.0]);
    }
    for i in 0..GC {
        wheel.push([0.0, 255.0, ramp(i, GC)]);
    }
    for i in 0..CB {
        wheel.push([0.0, 255.0 - ramp(i, CB), 255.0]);
    }
    for i in 0..BM {
        wheel.push([ramp(i, BM), 0.0, 255.0]);
    }
    for i in 0..MR {
        wheel.push([255.0, 0.0, 255.0 - ramp(i, MR)]);
    }
    wheel
}

/// Colors `flow` on the standard wheel. Magnitudes are divided by `max_mag`
/// (default: the field maximum, floored at 1e-6). Zero motion is white.
pub fn flow_to_rgb(flow: &FlowField, max_mag: Option<f32>) -> ImageBuffer {
    let wheel = color_wheel();
    let max_mag = max_mag.unwrap_or_else(|| {
        flow.u()
            .iter()
            .zip(flow.v())
            .map(|(u, v)| u.hypot(*v))
            .fold(0.0f32, f32::max)
    });
    let max_mag = max_mag.max(1e-6);
    let (h, w) = flow.dims();
    let n = h * w;
    let mut data = vec![0.0f32; 3 * n];
    for i in 0..n {
        let u = flow.u()[i] / max_mag;
        let v = flow.v()[i] / max_mag;
        let rad = u.hypot(v);
        let a = (-v).atan2(-u) / std::f32::consts::PI;
        let fk = (a + 1.0) / 2.0 * (WHEEL_LEN - 1) as f32;
        let k0 = (fk.floor() as usize).min(WHEEL_LEN - 1);
        let k1 = if k0 + 1 == WHEEL_LEN { 0 } else { k0 + 1 };
        let f = fk - k0 as f32;
        for c in 0..3 {
            let col0 = wheel[k0][c] / 255.0;
            let col1 = wheel[k1][c] / 255.0;
            let mut col = (1.0 - f) * col0 + f * col1;
            if rad <= 1.0 {
                col = 1.0 - rad * (1.0 - col);
            } else {
                col *= 0.75;
            }
            data[c * n + i] = col;
        }
    }
    ImageBuffer::from_planar(3, h, w, data).expect("finite colors")
}
