//! MVSD depth binaries and 16-bit PNG depth images.

use std::path::Path;

use image::{ImageBuffer, Luma};

use super::DepthMap;
use crate::error::{MvsError, Result};

const MVSD_MAGIC: &[u8; 4] = b"MVSD";
const MVSD_HEADER: usize = 12;

/// Little-endian `"MVSD", u32 width, u32 height, f32 depths`; invalid
/// pixels are written as 0.
pub fn encode_depth_map(d: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(MVSD_HEADER + 4 * d.depth.len());
    out.extend_from_slice(MVSD_MAGIC);
    out.extend_from_slice(&(d.width as u32).to_le_bytes());
    out.extend_from_slice(&(d.height as u32).to_le_bytes());
    for (v, ok) in d.depth.iter().zip(&d.valid) {
        let x = if *ok { *v as f32 } else { 0.0 };
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_depth_map(bytes: &[u8]) -> Result<DepthMap> {
    if bytes.len() < MVSD_HEADER {
        return Err(MvsError::format(
            bytes.len(),
            format!(
                "truncated header: expected {MVSD_HEADER} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[0..4] != MVSD_MAGIC {
        return Err(MvsError::format(
            0,
            format!(
                "bad magic {:?}, expected \"MVSD\"",
                String::from_utf8_lossy(&bytes[0..4])
            ),
        ));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| MvsError::format(4, "dimensions overflow"))?;
    let actual = bytes.len() - MVSD_HEADER;
    if actual != expected {
        return Err(MvsError::format(
            MVSD_HEADER,
            format!("payload size mismatch: expected {expected} bytes, found {actual}"),
        ));
    }
    let mut values = Vec::with_capacity(w * h);
    for (i, chunk) in bytes[MVSD_HEADER..].chunks_exact(4).enumerate() {
        let x = f32::from_le_bytes(chunk.try_into().unwrap());
        if !x.is_finite() {
            return Err(MvsError::format(
                MVSD_HEADER + 4 * i,
                format!("non-finite depth {x}"),
            ));
        }
        values.push(x as f64);
    }
    DepthMap::from_values(w, h, values)
}

pub fn save_depth_map(d: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_depth_map(d)).map_err(|e| MvsError::io(path, e))
}

pub fn load_depth_map(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| MvsError::io(path, e))?;
    decode_depth_map(&bytes)
}

/// 16-bit PNG with `round(depth * depth_scale)`; 0 marks invalid pixels and
/// values past 65535 saturate.
pub fn save_depth_png(d: &DepthMap, depth_scale: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(d.width as u32, d.height as u32, |x, y| {
            let i = y as usize * d.width + x as usize;
            let v = if d.valid[i] {
                (d.depth[i] * depth_scale).round().clamp(1.0, 65535.0) as u16
            } else {
                0
            };
            Luma([v])
        });
    img.save(path)
        .map_err(|e| MvsError::Pipeline(format!("writing {}: {e}", path.display())))
}

/// Reads a 16-bit (or 8-bit) single-channel depth PNG, dividing by
/// `depth_scale`; zero pixels are invalid.
pub fn load_depth_png(path: impl AsRef<Path>, depth_scale: f64) -> Result<DepthMap> {
    let path = path.as_ref();
    if !(depth_scale > 0.0) {
        return Err(MvsError::Config(format!(
            "depth scale must be positive, got {depth_scale}"
        )));
    }
    let img = image::open(path)
        .map_err(|e| MvsError::format(0, format!("{}: {e}", path.display())))?
        .into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img.pixels().map(|p| p.0[0] as f64 / depth_scale).collect();
    DepthMap::from_values(w, h, values)
}
