//! Middlebury `.flo` container.
//!
//! Layout, all little-endian: `f32` magic `202021.25`, `i32` width, `i32`
//! height, then `width * height` interleaved `(u, v)` `f32` pairs in row-major
//! order.

use std::path::Path;

use crate::buffer::FlowField;
use crate::error::{Error, Result};

pub const FLO_MAGIC: f32 = 202021.25;
const HEADER_LEN: usize = 12;

pub fn read_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 4 {
        return Err(Error::parse("magic", format!("need 4 bytes, got {}", bytes.len())));
    }
    let magic = f32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(Error::parse("magic", format!("expected {FLO_MAGIC}, found {magic}")));
    }
    let width = read_dim(bytes, 4, "width")?;
    let height = read_dim(bytes, 8, "height")?;
    let n = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::parse("payload", "dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n {
        return Err(Error::parse(
            "payload",
            format!("expected {} bytes for {}x{}, found {}", n, width, height, payload.len()),
        ));
    }
    let mut u = Vec::with_capacity(width * height);
    let mut v = Vec::with_capacity(width * height);
    for pair in payload.chunks_exact(8) {
        u.push(f32::from_le_bytes(pair[0..4].try_into().unwrap()));
        v.push(f32::from_le_bytes(pair[4..8].try_into().unwrap()));
    }
    FlowField::from_components(height, width, u, v)
}

fn read_dim(bytes: &[u8], at: usize, field: &'static str) -> Result<usize> {
    let raw = bytes
        .get(at..at + 4)
        .ok_or_else(|| Error::parse(field, "truncated header"))?;
    let d = i32::from_le_bytes(raw.try_into().unwrap());
    if d <= 0 {
        return Err(Error::parse(field, format!("must be positive, found {d}")));
    }
    Ok(d as usize)
}

pub fn write_flo(flow: &FlowField) -> Result<Vec<u8>> {
    if !flow.is_finite() {
        return Err(Error::NonFinite("flow field"));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + flow.len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn load_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    read_flo(&std::fs::read(path)?)
}
