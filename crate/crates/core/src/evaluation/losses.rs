//! Training-style losses on depth maps: multi-scale log-depth L1,
//! multi-scale inverse-depth gradient matching and a normals loss.

use nalgebra::Vector3;

use crate::depth::DepthMap;
use crate::error::{MvsError, Result};
use crate::geometry::{backproject_pixel, Intrinsics};

/// Number of pyramid levels the multi-scale losses run over.
pub const LOSS_SCALES: usize = 4;

fn check_same_dims(a: &DepthMap, b: &DepthMap) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(MvsError::Argument(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// `sum_s (1/s^2) * mean |log up(pred_s) - log gt|` over ground-truth-valid
/// pixels, where `pred[s-1]` is the prediction at scale `s` (size
/// `ceil(H / 2^(s-1))`) and `up` is nearest-neighbour upsampling.
pub fn log_depth_l1(pred: &[DepthMap], gt: &DepthMap) -> Result<f64> {
    if pred.is_empty() {
        return Err(MvsError::Argument("need at least one prediction scale".into()));
    }
    let n_gt = gt.valid_count();
    if n_gt == 0 {
        return Err(MvsError::Argument("ground truth has no valid pixels".into()));
    }
    let mut total = 0.0;
    for (i, p) in pred.iter().enumerate() {
        let shift = i as u32;
        let (ew, eh) = (gt.width.div_ceil(1 << shift), gt.height.div_ceil(1 << shift));
        if p.width != ew || p.height != eh {
            return Err(MvsError::Argument(format!(
                "scale {} prediction is {}x{}, expected {ew}x{eh}",
                i + 1,
                p.width,
                p.height
            )));
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in 0..gt.height {
            for x in 0..gt.width {
                let Some(g) = gt.get(x, y) else { continue };
                if let Some(d) = p.get(x >> shift, y >> shift) {
                    sum += (d.ln() - g.ln()).abs();
                    n += 1;
                }
            }
        }
        if n > 0 {
            let s = (i + 1) as f64;
            total += sum / n as f64 / (s * s);
        }
    }
    Ok(total)
}

/// Inverse depth averaged over valid pixels in `factor x factor` blocks.
fn pooled_inverse(d: &DepthMap, mask: &[bool], factor: usize) -> (usize, usize, Vec<Option<f64>>) {
    let w = d.width.div_ceil(factor);
    let h = d.height.div_ceil(factor);
    let mut out = vec![None; w * h];
    for by in 0..h {
        for bx in 0..w {
            let mut sum = 0.0;
            let mut n = 0usize;
            for y in by * factor..((by + 1) * factor).min(d.height) {
                for x in bx * factor..((bx + 1) * factor).min(d.width) {
                    let i = y * d.width + x;
                    if mask[i] {
                        sum += 1.0 / d.depth[i];
                        n += 1;
                    }
                }
            }
            if n > 0 {
                out[by * w + bx] = Some(sum / n as f64);
            }
        }
    }
    (w, h, out)
}

/// Forward differences along x and y; `None` where either endpoint is
/// missing, and 0 on the last column / row.
fn forward_gradients(w: usize, h: usize, f: &[Option<f64>]) -> Vec<(Option<f64>, Option<f64>)> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let c = f[y * w + x];
            let gx = if x + 1 < w {
                c.zip(f[y * w + x + 1]).map(|(a, b)| b - a)
            } else {
                c.map(|_| 0.0)
            };
            let gy = if y + 1 < h {
                c.zip(f[(y + 1) * w + x]).map(|(a, b)| b - a)
            } else {
                c.map(|_| 0.0)
            };
            out.push((gx, gy));
        }
    }
    out
}

/// Summed `|grad pred - grad gt|` of inverse depth at one pooling factor.
pub fn inv_depth_gradient_term(pred: &DepthMap, gt: &DepthMap, factor: usize) -> Result<f64> {
    check_same_dims(pred, gt)?;
    let mask: Vec<bool> = pred.valid.iter().zip(&gt.valid).map(|(a, b)| *a && *b).collect();
    let (w, h, fp) = pooled_inverse(pred, &mask, factor);
    let (_, _, fg) = pooled_inverse(gt, &mask, factor);
    let gp = forward_gradients(w, h, &fp);
    let gg = forward_gradients(w, h, &fg);
    let mut sum = 0.0;
    for ((px, py), (gx, gy)) in gp.iter().zip(&gg) {
        if let (Some(a), Some(b)) = (px, gx) {
            sum += (a - b).abs();
        }
        if let (Some(a), Some(b)) = (py, gy) {
            sum += (a - b).abs();
        }
    }
    Ok(sum)
}

/// Gradient-matching loss on `1/depth` summed over four average-pooled
/// scales and divided by the number of jointly valid full-resolution pixels.
pub fn inv_depth_gradient_loss(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    check_same_dims(pred, gt)?;
    let n = pred
        .valid
        .iter()
        .zip(&gt.valid)
        .filter(|(a, b)| **a && **b)
        .count();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in 0..LOSS_SCALES {
        total += inv_depth_gradient_term(pred, gt, 1 << s)?;
    }
    Ok(total / n as f64)
}

/// Per-pixel camera-space unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    pub normals: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

/// Normals from central-difference tangents of the backprojected depth,
/// falling back to one-sided differences at borders and next to invalid
/// pixels; oriented to face the camera (`n_z < 0`).
pub fn normals_from_depth(d: &DepthMap, k: &Intrinsics) -> Result<NormalMap> {
    if k.width != d.width || k.height != d.height {
        return Err(MvsError::Argument(format!(
            "intrinsics are for {}x{}, depth map is {}x{}",
            k.width, k.height, d.width, d.height
        )));
    }
    let (w, h) = (d.width, d.height);
    let points: Vec<Option<Vector3<f64>>> = (0..w * h)
        .map(|i| {
            d.valid[i]
                .then(|| backproject_pixel(k, (i % w) as f64, (i / w) as f64, d.depth[i]).ok())
                .flatten()
        })
        .collect();
    let at = |x: isize, y: isize| -> Option<Vector3<f64>> {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            None
        } else {
            points[y as usize * w + x as usize]
        }
    };
    let tangent = |c: Vector3<f64>, prev: Option<Vector3<f64>>, next: Option<Vector3<f64>>| match (prev, next)
    {
        (Some(a), Some(b)) => Some(b - a),
        (None, Some(b)) => Some(b - c),
        (Some(a), None) => Some(c - a),
        (None, None) => None,
    };
    let mut normals = vec![Vector3::zeros(); w * h];
    let mut valid = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let Some(c) = at(x, y) else { continue };
            let tu = tangent(c, at(x - 1, y), at(x + 1, y));
            let tv = tangent(c, at(x, y - 1), at(x, y + 1));
            let (Some(tu), Some(tv)) = (tu, tv) else { continue };
            let n = tu.cross(&tv);
            let len = n.norm();
            if !(len > 1e-12) {
                continue;
            }
            let mut n = n / len;
            if n.z > 0.0 {
                n = -n;
            }
            let i = y as usize * w + x as usize;
            normals[i] = n;
            valid[i] = true;
        }
    }
    Ok(NormalMap {
        width: w,
        height: h,
        normals,
        valid,
    })
}

/// Mean of `(1 - cos)/2` over jointly valid pixels.
pub fn normals_loss(pred: &NormalMap, gt: &NormalMap) -> Result<f64> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(MvsError::Argument("normal maps differ in size".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..pred.normals.len() {
        if pred.valid[i] && gt.valid[i] {
            let c = pred.normals[i].dot(&gt.normals[i]).clamp(-1.0, 1.0);
            sum += 0.5 * (1.0 - c);
            n += 1;
        }
    }
    if n == 0 {
        return Err(MvsError::Argument("no jointly valid normals".into()));
    }
    Ok(sum / n as f64)
}

/// Sum of the three losses: log-depth L1 over the pyramid, gradient loss
/// on the finest prediction, and the normals loss derived through `k`.
pub fn total_loss(pred: &[DepthMap], gt: &DepthMap, k: &Intrinsics) -> Result<f64> {
    let finest = pred
        .first()
        .ok_or_else(|| MvsError::Argument("need at least one prediction scale".into()))?;
    let depth = log_depth_l1(pred, gt)?;
    let grad = inv_depth_gradient_loss(finest, gt)?;
    let normals = normals_loss(&normals_from_depth(finest, k)?, &normals_from_depth(gt, k)?)?;
    Ok(depth + grad + normals)
}
