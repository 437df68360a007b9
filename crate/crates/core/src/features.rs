//! Image containers, census descriptors and feature-map I/O.

use std::path::Path;

use crate::error::{MvsError, Result};

/// Row-major pixel grid with interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(MvsError::Argument("image dimensions must be non-zero".into()));
        }
        if data.len() != width * height * channels {
            return Err(MvsError::Argument(format!(
                "image data has {} values, expected {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(MvsError::Argument(format!("non-finite image value at index {i}")));
        }
        Ok(ImageGrid {
            width,
            height,
            channels,
            data,
        })
    }

    /// Luma `0.299 R + 0.587 G + 0.114 B`; single-channel images pass through
    /// and a fourth (alpha) channel is ignored.
    pub fn to_gray(&self) -> Vec<f32> {
        let n = self.width * self.height;
        match self.channels {
            1 => self.data.clone(),
            2 => (0..n).map(|i| self.data[2 * i]).collect(),
            c => (0..n)
                .map(|i| {
                    let p = &self.data[c * i..c * i + 3];
                    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
                })
                .collect(),
        }
    }
}

/// Channel-major descriptor grid sampled every `scale` image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub scale: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, width: usize, height: usize, scale: usize, data: Vec<f32>) -> Result<Self> {
        if scale == 0 {
            return Err(MvsError::Argument("feature scale must be >= 1".into()));
        }
        if data.len() != channels * width * height {
            return Err(MvsError::Argument(format!(
                "feature data has {} values, expected {}x{}x{}",
                data.len(),
                channels,
                width,
                height
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(MvsError::Argument(format!(
                "non-finite feature value at index {i}"
            )));
        }
        Ok(FeatureMap {
            channels,
            width,
            height,
            scale,
            data,
        })
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Descriptor at an integer grid cell.
    pub fn vector_at(&self, x: usize, y: usize) -> Vec<f32> {
        (0..self.channels).map(|c| self.get(c, x, y)).collect()
    }

    /// Pixel-major copy (`[y][x][c]`) for cache-friendly repeated sampling.
    pub(crate) fn interleaved(&self) -> Vec<f32> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; self.data.len()];
        for c in 0..self.channels {
            for p in 0..plane {
                out[p * self.channels + c] = self.data[c * plane + p];
            }
        }
        out
    }

    /// Bilinear blend of the four neighbours of `(x, y)`; `None` outside
    /// `[0, W-1] x [0, H-1]`.
    pub fn sample_into(&self, x: f64, y: f64, out: &mut [f32]) -> bool {
        match BilinearTap::new(self.width, self.height, x, y) {
            Some(tap) => {
                for (c, o) in out.iter_mut().enumerate().take(self.channels) {
                    let plane = &self.data[c * self.width * self.height..];
                    *o = tap.blend(|i| plane[i]);
                }
                true
            }
            None => false,
        }
    }
}

/// Indices and weights of a bilinear lookup.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BilinearTap {
    pub idx: [usize; 4],
    pub w: [f64; 4],
}

impl BilinearTap {
    pub fn new(width: usize, height: usize, x: f64, y: f64) -> Option<Self> {
        if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
            return None;
        }
        let x0 = (x.floor() as usize).min(width - 1);
        let y0 = (y.floor() as usize).min(height - 1);
        let x1 = (x0 + 1).min(width - 1);
        let y1 = (y0 + 1).min(height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        Some(BilinearTap {
            idx: [y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1],
            w: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
        })
    }

    #[inline]
    pub fn blend(&self, value: impl Fn(usize) -> f32) -> f32 {
        let mut acc = 0.0f64;
        for k in 0..4 {
            if self.w[k] != 0.0 {
                acc += self.w[k] * value(self.idx[k]) as f64;
            }
        }
        acc as f32
    }
}

/// Bilinear lookup at continuous grid coordinates.
pub fn sample_bilinear(fm: &FeatureMap, x: f64, y: f64) -> (Vec<f32>, bool) {
    let mut out = vec![0.0; fm.channels];
    let valid = fm.sample_into(x, y, &mut out);
    (out, valid)
}

pub fn dot_affinity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MvsError::Argument(format!(
            "descriptor length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

/// Census-style descriptor: signs of `gray(neighbour) - gray(centre)` over a
/// `(2r+1)^2` window, L2-normalised. Flat patches stay zero. Grid cell
/// `(u, v)` is centred on image pixel `(stride*u, stride*v)`; neighbours past
/// the border are clamped.
pub fn extract_census_features(img: &ImageGrid, patch_radius: usize, stride: usize) -> Result<FeatureMap> {
    if patch_radius == 0 || stride == 0 {
        return Err(MvsError::Argument(
            "census needs patch_radius >= 1 and stride >= 1".into(),
        ));
    }
    let side = 2 * patch_radius + 1;
    if img.width < side || img.height < side {
        return Err(MvsError::Argument(format!(
            "image {}x{} is smaller than the {side}x{side} census patch",
            img.width, img.height
        )));
    }
    let gray = img.to_gray();
    let (w, h) = (img.width as isize, img.height as isize);
    let r = patch_radius as isize;
    let channels = side * side - 1;
    let out_w = img.width.div_ceil(stride);
    let out_h = img.height.div_ceil(stride);
    let plane = out_w * out_h;
    let mut data = vec![0.0f32; channels * plane];
    let mut desc = vec![0.0f32; channels];

    for v in 0..out_h {
        for u in 0..out_w {
            let cx = (u * stride) as isize;
            let cy = (v * stride) as isize;
            let center = gray[(cy * w + cx) as usize];
            let mut c = 0;
            let mut norm2 = 0.0f64;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let x = (cx + dx).clamp(0, w - 1);
                    let y = (cy + dy).clamp(0, h - 1);
                    let diff = gray[(y * w + x) as usize] - center;
                    let s = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    desc[c] = s;
                    norm2 += (s * s) as f64;
                    c += 1;
                }
            }
            let inv = if norm2 > 0.0 { 1.0 / norm2.sqrt() } else { 0.0 };
            let p = v * out_w + u;
            for (ch, d) in desc.iter().enumerate() {
                data[ch * plane + p] = (*d as f64 * inv) as f32;
            }
        }
    }
    FeatureMap::new(channels, out_w, out_h, stride, data)
}

const MVSF_MAGIC: &[u8; 4] = b"MVSF";
const MVSF_HEADER: usize = 20;

pub fn encode_feature_map(fm: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(MVSF_HEADER + 4 * fm.data.len());
    out.extend_from_slice(MVSF_MAGIC);
    for v in [fm.channels, fm.width, fm.height, fm.scale] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for x in &fm.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    if bytes.len() < MVSF_HEADER {
        return Err(MvsError::format(
            bytes.len(),
            format!(
                "truncated header: expected {MVSF_HEADER} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[0..4] != MVSF_MAGIC {
        return Err(MvsError::format(
            0,
            format!(
                "bad magic {:?}, expected \"MVSF\"",
                String::from_utf8_lossy(&bytes[0..4])
            ),
        ));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (c, w, h, scale) = (field(0), field(1), field(2), field(3));
    if scale == 0 {
        return Err(MvsError::format(16, "scale must be >= 1"));
    }
    let count = c
        .checked_mul(w)
        .and_then(|x| x.checked_mul(h))
        .ok_or_else(|| MvsError::format(4, "dimensions overflow"))?;
    let expected = count * 4;
    let actual = bytes.len() - MVSF_HEADER;
    if actual != expected {
        return Err(MvsError::format(
            MVSF_HEADER,
            format!("payload size mismatch: expected {expected} bytes, found {actual}"),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in bytes[MVSF_HEADER..].chunks_exact(4).enumerate() {
        let x = f32::from_le_bytes(chunk.try_into().unwrap());
        if !x.is_finite() {
            return Err(MvsError::format(
                MVSF_HEADER + 4 * i,
                format!("non-finite value {x}"),
            ));
        }
        data.push(x);
    }
    FeatureMap::new(c, w, h, scale, data)
}

pub fn save_feature_map(fm: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_feature_map(fm)).map_err(|e| MvsError::io(path, e))
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| MvsError::io(path, e))?;
    decode_feature_map(&bytes)
}
