//! Depth extraction from cost volumes and the two-pass cascade.

mod cascade;
mod io;

pub use cascade::{cascaded_depth, default_temperature, CascadeConfig, CascadeResult, PassDiagnostics};
pub use io::{
    decode_depth_map, encode_depth_map, load_depth_map, load_depth_png, save_depth_map, save_depth_png,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costvolume::CostVolume;
use crate::error::{MvsError, Result};
use crate::geometry::RangeEstimate;

/// Dense depth with a validity mask; `depth > 0` wherever valid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    /// Treats non-positive and non-finite entries as invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(MvsError::Argument(format!(
                "depth map has {} values, expected {width}x{height}",
                values.len()
            )));
        }
        let valid: Vec<bool> = values.iter().map(|d| *d > 0.0 && d.is_finite()).collect();
        let depth = values
            .into_iter()
            .zip(&valid)
            .map(|(d, ok)| if *ok { d } else { 0.0 })
            .collect();
        Ok(DepthMap {
            width,
            height,
            depth,
            valid,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        DepthMap::from_values(width, height, vec![value; width * height])
            .expect("dimensions match by construction")
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            depth: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.depth[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Smallest and largest valid depth.
    pub fn valid_range(&self) -> Option<(f64, f64)> {
        self.depth
            .iter()
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .fold(None, |acc, (d, _)| match acc {
                None => Some((*d, *d)),
                Some((lo, hi)) => Some((lo.min(*d), hi.max(*d))),
            })
    }

    /// Picks every `stride`-th pixel, matching a feature grid's layout.
    pub fn subsample(&self, stride: usize) -> DepthMap {
        let w = self.width.div_ceil(stride);
        let h = self.height.div_ceil(stride);
        let mut out = DepthMap::invalid(w, h);
        for y in 0..h {
            for x in 0..w {
                let i = (y * stride) * self.width + x * stride;
                out.depth[y * w + x] = self.depth[i];
                out.valid[y * w + x] = self.valid[i];
            }
        }
        out
    }

    pub fn scaled(&self, lambda: f64) -> DepthMap {
        DepthMap {
            depth: self.depth.iter().map(|d| d * lambda).collect(),
            ..self.clone()
        }
    }
}

/// Per-pixel softmax over bins (scores / temperature), with the expectation
/// taken in log depth. Pixels no source sees at any bin are invalid.
pub fn soft_argmin_depth(cv: &CostVolume, temperature: f64) -> Result<DepthMap> {
    if !(temperature > 0.0) {
        return Err(MvsError::Argument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let plane = cv.width * cv.height;
    let nk = cv.bins.len();
    let log_bins: Vec<f64> = cv.bins.values().iter().map(|d| d.ln()).collect();
    let (lo, hi) = (cv.bins.min(), cv.bins.max());
    let inv_t = 1.0 / temperature;
    let out: Vec<Option<f64>> = (0..plane)
        .into_par_iter()
        .map(|p| {
            if (0..nk).all(|k| cv.coverage[k * plane + p] == 0) {
                return None;
            }
            let max = (0..nk)
                .map(|k| cv.scores[k * plane + p])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, lb) in log_bins.iter().enumerate() {
                let e = ((cv.scores[k * plane + p] - max) * inv_t).exp();
                num += e * lb;
                den += e;
            }
            Some((num / den).exp().clamp(lo, hi))
        })
        .collect();
    Ok(DepthMap {
        width: cv.width,
        height: cv.height,
        depth: out.iter().map(|d| d.unwrap_or(0.0)).collect(),
        valid: out.iter().map(Option::is_some).collect(),
    })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `exp(log d_min + log(d_max / d_min) * sigmoid(x))`.
pub fn sigmoid_log_depth(x: f64, range: &RangeEstimate) -> f64 {
    (range.d_min.ln() + (range.d_max / range.d_min).ln() * sigmoid(x)).exp()
}

/// Inverse of [`sigmoid_log_depth`] on the open interval `(d_min, d_max)`.
pub fn log_depth_to_logit(depth: f64, range: &RangeEstimate) -> Result<f64> {
    if !(depth > range.d_min && depth < range.d_max) {
        return Err(MvsError::Domain(format!(
            "depth {depth} outside open range ({}, {})",
            range.d_min, range.d_max
        )));
    }
    let s = (depth / range.d_min).ln() / (range.d_max / range.d_min).ln();
    Ok((s / (1.0 - s)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    /// Maximum one-sided widening in log depth.
    pub log_amplitude: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            log_amplitude: std::f64::consts::LN_2,
        }
    }
}

/// Widens a known depth range by independent log-uniform factors:
/// `d_min * exp(-U[0,a])`, `d_max * exp(U[0,a])`.
pub fn perturb_range(range: &RangeEstimate, seed: u64, cfg: &PerturbConfig) -> RangeEstimate {
    let a = cfg.log_amplitude.max(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo: f64 = rng.gen::<f64>() * a;
    let hi: f64 = rng.gen::<f64>() * a;
    RangeEstimate {
        d_min: range.d_min * (-lo).exp(),
        d_max: range.d_max * hi.exp(),
    }
}
