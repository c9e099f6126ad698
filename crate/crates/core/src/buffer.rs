//! Image, flow and mask containers.
//!
//! All buffers are row-major. Images are stored planar: channel `c`, row `y`,
//! column `x` lives at `c * height * width + y * width + x`.

use crate::error::{Error, Result};

/// A `channels × height × width` float image with nominal range `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        ImageBuffer {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_planar(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Empty("image dimensions"));
        }
        if data.len() != channels * height * width {
            return Err(Error::param(
                "data",
                format!(
                    "length {} does not match {}x{}x{}",
                    data.len(),
                    channels,
                    height,
                    width
                ),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image data"));
        }
        Ok(ImageBuffer {
            channels,
            height,
            width,
            data,
        })
    }

    /// Builds an image by evaluating `f(c, y, x)` at every sample.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        ImageBuffer {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }
    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }
    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        ImageBuffer {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Clamps every sample into `[0, 1]`.
    pub fn clipped(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    /// ITU-R BT.601 luma for RGB, identity for single-channel images.
    pub fn to_gray(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.plane_len();
        let mut out = vec![0.0f32; n];
        if self.channels >= 3 {
            let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
            for i in 0..n {
                out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
            }
        } else {
            for c in 0..self.channels {
                for (o, v) in out.iter_mut().zip(self.plane(c)) {
                    *o += v / self.channels as f32;
                }
            }
        }
        ImageBuffer {
            channels: 1,
            height: self.height,
            width: self.width,
            data: out,
        }
    }

    pub(crate) fn check_dims(&self, what: &'static str, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                what,
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }
}

/// A dense `height × width` displacement field in pixels.
///
/// `+u` points right (increasing column), `+v` points down (increasing row).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::constant(height, width, 0.0, 0.0)
    }

    pub fn constant(height: usize, width: usize, u: f32, v: f32) -> Self {
        FlowField {
            height,
            width,
            u: vec![u; height * width],
            v: vec![v; height * width],
        }
    }

    pub fn from_components(height: usize, width: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Empty("flow dimensions"));
        }
        if u.len() != height * width || v.len() != height * width {
            return Err(Error::param(
                "flow",
                format!("component lengths {}/{} do not match {}x{}", u.len(), v.len(), height, width),
            ));
        }
        Ok(FlowField { height, width, u, v })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> (f32, f32)) -> Self {
        let mut u = Vec::with_capacity(height * width);
        let mut v = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(y, x);
                u.push(a);
                v.push(b);
            }
        }
        FlowField { height, width, u, v }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.u.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }
    pub fn v(&self) -> &[f32] {
        &self.v
    }
    pub fn u_mut(&mut self) -> &mut [f32] {
        &mut self.u
    }
    pub fn v_mut(&mut self) -> &mut [f32] {
        &mut self.v
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }
    #[inline]
    pub fn set(&mut self, y: usize, x: usize, d: (f32, f32)) {
        let i = y * self.width + x;
        self.u[i] = d.0;
        self.v[i] = d.1;
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub fn scaled(&self, s: f32) -> FlowField {
        FlowField {
            height: self.height,
            width: self.width,
            u: self.u.iter().map(|x| x * s).collect(),
            v: self.v.iter().map(|x| x * s).collect(),
        }
    }

    /// The two components as a 2-channel planar buffer (u, then v).
    pub fn to_planes(&self) -> ImageBuffer {
        let mut data = self.u.clone();
        data.extend_from_slice(&self.v);
        ImageBuffer {
            channels: 2,
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub(crate) fn from_planes(planes: &ImageBuffer) -> FlowField {
        FlowField {
            height: planes.height(),
            width: planes.width(),
            u: planes.plane(0).to_vec(),
            v: planes.plane(1).to_vec(),
        }
    }

    pub(crate) fn check_dims(&self, what: &'static str, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                what,
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }
}

/// One boolean per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BoolMask {
    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        BoolMask {
            height,
            width,
            bits: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::param(
                "mask",
                format!("length {} does not match {}x{}", bits.len(), height, width),
            ));
        }
        Ok(BoolMask { height, width, bits })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        BoolMask { height, width, bits }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }
    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }
    #[inline]
    pub fn set(&mut self, y: usize, x: usize, b: bool) {
        self.bits[y * self.width + x] = b;
    }
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn and(&self, other: &BoolMask) -> BoolMask {
        debug_assert_eq!(self.dims(), other.dims());
        BoolMask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn not(&self) -> BoolMask {
        BoolMask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Clears a `margin`-pixel frame around the border.
    pub fn without_border(&self, margin: usize) -> BoolMask {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                if y < margin || x < margin || y + margin >= self.height || x + margin >= self.width {
                    out.set(y, x, false);
                }
            }
        }
        out
    }

    pub(crate) fn check_dims(&self, what: &'static str, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                what,
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }
}

/// A single-channel float64 map (errors, magnitudes, costs, weights).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        ScalarMap {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::param(
                "map",
                format!("length {} does not match {}x{}", data.len(), height, width),
            ));
        }
        Ok(ScalarMap { height, width, data })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub(crate) fn check_dims(&self, what: &'static str, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                what,
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }
}

/// Per-pixel reliability weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap(ScalarMap);

impl ConfidenceMap {
    pub fn ones(height: usize, width: usize) -> Self {
        ConfidenceMap(ScalarMap::filled(height, width, 1.0))
    }

    /// Wraps `map`, rejecting values outside `[0, 1]`.
    pub fn new(map: ScalarMap) -> Result<Self> {
        if map.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("confidence", "values must lie in [0, 1]"));
        }
        Ok(ConfidenceMap(map))
    }

    /// Min-max normalizes `raw` into `[0, 1]`. A constant map becomes all ones.
    pub fn normalize(raw: &ScalarMap) -> Self {
        let (lo, hi) = raw
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        let data = if raw.data().is_empty() || span <= 0.0 || !span.is_finite() {
            vec![1.0; raw.data().len()]
        } else {
            raw.data().iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
        };
        ConfidenceMap(ScalarMap {
            height: raw.height(),
            width: raw.width(),
            data,
        })
    }

    pub fn map(&self) -> &ScalarMap {
        &self.0
    }
    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn scaled(&self, s: f64) -> ScalarMap {
        ScalarMap {
            height: self.0.height,
            width: self.0.width,
            data: self.0.data.iter().map(|v| v * s).collect(),
        }
    }
}
