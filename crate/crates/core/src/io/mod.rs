//! File formats: `.flo` flow fields, 8-bit PNG images, flow visualization and
//! JSON metric reports.

mod color;
mod flo;
mod png;
mod report;

pub use color::{color_wheel, flow_to_rgb, WHEEL_LEN};
pub use flo::{load_flo, read_flo, write_flo, FLO_MAGIC};
pub use png::{decode_png, encode_png, quantize, read_image};
pub(crate) use png::{from_dynamic, to_dynamic};
pub use report::{read_report, write_report};

use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_image(path: impl AsRef<Path>, img: &crate::ImageBuffer) -> Result<()> {
    write_atomic(path, &encode_png(img)?)
}

pub fn save_flo(path: impl AsRef<Path>, flow: &crate::FlowField) -> Result<()> {
    write_atomic(path, &write_flo(flow)?)
}
