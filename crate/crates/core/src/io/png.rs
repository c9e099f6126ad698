//! 8-bit grayscale / RGB PNG in and out. Other codecs (JPEG) are used by the
//! degradation step and live there.

use std::io::Cursor;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat};

use crate::buffer::ImageBuffer;
use crate::error::{Error, Result};

pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::parse("png", e.to_string()))?;
    from_dynamic(img)
}

/// Converts an 8-bit L or RGB image into a `[0, 1]` float buffer.
pub(crate) fn from_dynamic(img: DynamicImage) -> Result<ImageBuffer> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ColorType::L8 => {
            let raw = img.into_luma8().into_raw();
            ImageBuffer::from_planar(1, h, w, raw.iter().map(|&b| b as f32 / 255.0).collect())
        }
        ColorType::Rgb8 => {
            let raw = img.into_rgb8().into_raw();
            let n = h * w;
            let mut data = vec![0.0f32; 3 * n];
            for (i, px) in raw.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * n + i] = px[c] as f32 / 255.0;
                }
            }
            ImageBuffer::from_planar(3, h, w, data)
        }
        other => Err(Error::UnsupportedImage(format!(
            "{other:?}; only 8-bit grayscale or RGB is accepted"
        ))),
    }
}

/// Quantizes to 8 bits with `round(v * 255)` after clamping to `[0, 1]`.
pub(crate) fn to_dynamic(img: &ImageBuffer) -> Result<DynamicImage> {
    let (h, w) = img.dims();
    let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match img.channels() {
        1 => {
            let raw: Vec<u8> = img.plane(0).iter().map(|&v| q(v)).collect();
            let buf = image::GrayImage::from_raw(w as u32, h as u32, raw).expect("sized");
            Ok(DynamicImage::ImageLuma8(buf))
        }
        3 => {
            let n = h * w;
            let mut raw = Vec::with_capacity(3 * n);
            for i in 0..n {
                for c in 0..3 {
                    raw.push(q(img.plane(c)[i]));
                }
            }
            let buf = image::RgbImage::from_raw(w as u32, h as u32, raw).expect("sized");
            Ok(DynamicImage::ImageRgb8(buf))
        }
        n => Err(Error::UnsupportedImage(format!("{n} channels"))),
    }
}

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let dynimg = to_dynamic(img)?;
    let mut out = Cursor::new(Vec::new());
    dynimg
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    decode_png(&std::fs::read(path)?)
}

/// Rounds every sample to the nearest 8-bit level, as a PNG round trip would.
pub fn quantize(img: &ImageBuffer) -> ImageBuffer {
    img.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}
