//! Procedurally textured synthetic scenes with analytic ground truth.

use std::str::FromStr;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{MvsError, Result};
use crate::features::ImageGrid;
use crate::geometry::{CameraFrame, Intrinsics, RigidPose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Fronto-parallel plane `z = 2`.
    Plane,
    /// Sphere of radius 0.5 centred at `(0, 0, 2)`.
    Sphere,
    /// Half-plane `z = 1.6, x < 0` in front of the plane `z = 2.4`.
    TwoPlanes,
}

impl FromStr for SynthKind {
    type Err = MvsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(SynthKind::Plane),
            "sphere" => Ok(SynthKind::Sphere),
            "two-planes" => Ok(SynthKind::TwoPlanes),
            other => Err(MvsError::Argument(format!(
                "unknown scene kind {other:?} (expected plane, sphere or two-planes)"
            ))),
        }
    }
}

pub const SPHERE_CENTER: [f64; 3] = [0.0, 0.0, 2.0];
pub const SPHERE_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CameraLayout {
    /// Sphere scenes use a ring, the planar scenes an arc.
    Auto,
    /// Horizontal arc around the scene target, `arc_step_deg` apart.
    Arc,
    /// Full circle around the target with elevations cycling 0, +e, -e.
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub layout: CameraLayout,
    /// Camera distance to the scene target `(0, 0, 2)`.
    pub orbit_radius: f64,
    pub arc_step_deg: f64,
    pub ring_elevation_deg: f64,
    /// Lattice frequency of the coarsest noise octave, per scene unit.
    pub texture_frequency: f64,
    pub octaves: usize,
    /// Sub-samples per pixel side for anti-aliasing.
    pub supersample: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 640,
            height: 480,
            focal: 500.0,
            layout: CameraLayout::Auto,
            orbit_radius: 2.0,
            arc_step_deg: 3.0,
            ring_elevation_deg: 35.0,
            texture_frequency: 10.0,
            octaves: 3,
            supersample: 2,
        }
    }
}

const TARGET: [f64; 3] = [0.0, 0.0, 2.0];
const BACKGROUND: f32 = 0.5;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice(seed: u64, octave: usize, i: [i64; 3]) -> f64 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15 ^ ((octave as u64) << 56));
    for c in i {
        h = mix(h ^ c as u64);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise in `[0, 1]`.
fn value_noise(p: &Vector3<f64>, seed: u64, cfg: &SynthConfig) -> f64 {
    let mut total = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut freq = cfg.texture_frequency;
    for o in 0..cfg.octaves.max(1) {
        let q = p * freq;
        let base = [q.x.floor(), q.y.floor(), q.z.floor()];
        let f = [
            smooth(q.x - base[0]),
            smooth(q.y - base[1]),
            smooth(q.z - base[2]),
        ];
        let b = [base[0] as i64, base[1] as i64, base[2] as i64];
        let mut acc = 0.0;
        for corner in 0..8 {
            let d = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let w: f64 = (0..3)
                .map(|a| if d[a] == 1 { f[a] } else { 1.0 - f[a] })
                .product();
            acc += w * lattice(
                seed,
                o,
                [b[0] + d[0] as i64, b[1] + d[1] as i64, b[2] + d[2] as i64],
            );
        }
        total += amp * acc;
        norm += amp;
        amp *= 0.6;
        freq *= 2.0;
    }
    total / norm
}

/// Nearest positive ray parameter; with a camera-space direction whose z
/// is 1 this equals the camera depth.
fn intersect(kind: SynthKind, o: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let plane = |z0: f64| {
        let t = (z0 - o.z) / dir.z;
        (t.is_finite() && t > 0.0).then_some(t)
    };
    match kind {
        SynthKind::Plane => plane(2.0),
        SynthKind::TwoPlanes => {
            let near = plane(1.6).filter(|t| o.x + t * dir.x < 0.0);
            near.or_else(|| plane(2.4))
        }
        SynthKind::Sphere => {
            let c = Vector3::from(SPHERE_CENTER);
            let oc = o - c;
            let a = dir.norm_squared();
            let b = oc.dot(dir);
            let cc = oc.norm_squared() - SPHERE_RADIUS * SPHERE_RADIUS;
            let disc = b * b - a * cc;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            [(-b - s) / a, (-b + s) / a].into_iter().find(|&t| t > 0.0)
        }
    }
}

fn camera_poses(kind: SynthKind, n: usize, cfg: &SynthConfig) -> Result<Vec<RigidPose>> {
    let target = Vector3::from(TARGET);
    let up = Vector3::new(0.0, -1.0, 0.0);
    let ring = match cfg.layout {
        CameraLayout::Auto => kind == SynthKind::Sphere,
        CameraLayout::Arc => false,
        CameraLayout::Ring => true,
    };
    let center = (n / 2) as isize;
    (0..n)
        .map(|i| {
            let k = i as isize - center;
            let (azimuth, elevation) = if ring {
                let e = match k.rem_euclid(3) {
                    0 => 0.0,
                    1 => cfg.ring_elevation_deg,
                    _ => -cfg.ring_elevation_deg,
                };
                (2.0 * std::f64::consts::PI * k as f64 / n as f64, e.to_radians())
            } else {
                ((k as f64 * cfg.arc_step_deg).to_radians(), 0.0)
            };
            let dir = Vector3::new(
                elevation.cos() * azimuth.sin(),
                -elevation.sin(),
                -elevation.cos() * azimuth.cos(),
            );
            RigidPose::look_at(target + dir * cfg.orbit_radius, target, up)
        })
        .collect()
}

/// Index of the frame that sits at the origin looking down `+z`.
pub fn central_frame_index(n_frames: usize) -> usize {
    n_frames / 2
}

fn render(
    kind: SynthKind,
    k: &Intrinsics,
    pose: &RigidPose,
    seed: u64,
    cfg: &SynthConfig,
) -> (Vec<f32>, Vec<f64>) {
    let (w, h) = (k.width, k.height);
    let ss = cfg.supersample.max(1);
    let o = pose.translation;
    let ray =
        |u: f64, v: f64| pose.transform_vector(&Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0));
    let rows: Vec<(Vec<f32>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut img = Vec::with_capacity(w);
            let mut depth = Vec::with_capacity(w);
            for x in 0..w {
                let mut sum = 0.0;
                for sy in 0..ss {
                    for sx in 0..ss {
                        let u = x as f64 + (sx as f64 + 0.5) / ss as f64 - 0.5;
                        let v = y as f64 + (sy as f64 + 0.5) / ss as f64 - 0.5;
                        let d = ray(u, v);
                        sum += match intersect(kind, &o, &d) {
                            Some(t) => 0.1 + 0.8 * value_noise(&(o + d * t), seed, cfg),
                            None => BACKGROUND as f64,
                        };
                    }
                }
                let val = (sum / (ss * ss) as f64).clamp(0.0, 1.0);
                img.push(((val * 65535.0).round() / 65535.0) as f32);
                let gt = intersect(kind, &o, &ray(x as f64, y as f64)).map_or(0.0, |t| t as f32 as f64);
                depth.push(gt);
            }
            (img, depth)
        })
        .collect();
    let mut img = Vec::with_capacity(w * h);
    let mut depth = Vec::with_capacity(w * h);
    for (i, d) in rows {
        img.extend(i);
        depth.extend(d);
    }
    (img, depth)
}

/// Renders `n_frames` views of `kind`. Images are quantised to 16 bits and
/// depths to f32 so that writing and re-reading the scene is lossless.
pub fn synth_scene(
    kind: SynthKind,
    n_frames: usize,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<Vec<CameraFrame>> {
    if n_frames < 2 {
        return Err(MvsError::Argument(format!(
            "synthetic scenes need at least 2 frames, got {n_frames}"
        )));
    }
    let k = Intrinsics::new(
        cfg.focal,
        cfg.focal,
        cfg.width as f64 / 2.0,
        cfg.height as f64 / 2.0,
        cfg.width,
        cfg.height,
    )?;
    camera_poses(kind, n_frames, cfg)?
        .into_iter()
        .enumerate()
        .map(|(i, pose)| {
            let (img, depth) = render(kind, &k, &pose, seed, cfg);
            let image = ImageGrid::new(k.width, k.height, 1, img)?;
            let gt = DepthMap::from_values(k.width, k.height, depth)?;
            CameraFrame::new(format!("frame{i:03}"), k, pose, image, Some(gt))
        })
        .collect()
}

/// Signed distance to the analytic sphere surface.
pub fn sphere_sdf(p: &Vector3<f64>) -> f64 {
    (p - Vector3::from(SPHERE_CENTER)).norm() - SPHERE_RADIUS
}
