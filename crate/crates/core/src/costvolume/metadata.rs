//! Per-source geometric metadata attached to every cost-volume cell.

use nalgebra::Vector3;

use super::DepthBins;
use crate::error::{MvsError, Result};
use crate::features::{dot_unchecked, BilinearTap, FeatureMap};
use crate::geometry::{
    backproject_pixel, pose_distance, relative_pose, sweep_world_point, CameraFrame, PinholeView, RigidPose,
    ZERO_BASELINE_EPS,
};

/// Number of floats fed to the aggregation MLP per source.
pub const MLP_INPUT_DIM: usize = 12;

/// Geometric side information for one (source, bin, pixel) triple.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetadataRecord {
    pub dot: f64,
    pub ray_ref: Vector3<f64>,
    pub ray_src: Vector3<f64>,
    pub depth_ref_norm: f64,
    pub depth_src_norm: f64,
    pub ray_angle: f64,
    pub pose_dist_norm: f64,
    pub valid: bool,
}

impl MetadataRecord {
    /// Canonical MLP layout: `dot, ray_ref(3), ray_src(3), depth_ref_norm,
    /// depth_src_norm, ray_angle, pose_dist_norm, valid`.
    pub fn to_mlp_input(&self) -> [f64; MLP_INPUT_DIM] {
        [
            self.dot,
            self.ray_ref.x,
            self.ray_ref.y,
            self.ray_ref.z,
            self.ray_src.x,
            self.ray_src.y,
            self.ray_src.z,
            self.depth_ref_norm,
            self.depth_src_norm,
            self.ray_angle,
            self.pose_dist_norm,
            if self.valid { 1.0 } else { 0.0 },
        ]
    }
}

/// Log-space min-max normalisation of depth against a bin set, clamped.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogDepthNormalizer {
    log_min: f64,
    inv_span: f64,
}

impl LogDepthNormalizer {
    pub fn new(bins: &DepthBins) -> Self {
        let log_min = bins.min().ln();
        let log_max = bins.max().ln();
        LogDepthNormalizer {
            log_min,
            inv_span: 1.0 / (log_max - log_min),
        }
    }

    #[inline]
    pub fn apply(&self, depth: f64) -> f64 {
        ((depth.ln() - self.log_min) * self.inv_span).clamp(0.0, 1.0)
    }
}

/// Descriptor grid stored pixel-major for fast repeated bilinear lookups.
pub(crate) struct PackedFeatures {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl PackedFeatures {
    pub fn new(fm: &FeatureMap) -> Self {
        PackedFeatures {
            width: fm.width,
            height: fm.height,
            channels: fm.channels,
            data: fm.interleaved(),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn sample(&self, x: f64, y: f64, out: &mut [f32]) -> bool {
        let Some(tap) = BilinearTap::new(self.width, self.height, x, y) else {
            return false;
        };
        let c = self.channels;
        for (ch, o) in out.iter_mut().enumerate().take(c) {
            *o = tap.blend(|p| self.data[p * c + ch]);
        }
        true
    }
}

/// Metadata for one source at world point `p_world`, which lies at
/// reference depth `depth`. `pose_dist_norm` is left at zero.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn metadata_at(
    reference: &PinholeView,
    source: &PinholeView,
    ref_desc: &[f32],
    src_features: &PackedFeatures,
    p_world: &Vector3<f64>,
    depth: f64,
    norm: &LogDepthNormalizer,
    scratch: &mut [f32],
) -> MetadataRecord {
    let hit = sweep_world_point(source, p_world);
    if !hit.valid || !src_features.sample(hit.u, hit.v, scratch) {
        return MetadataRecord::default();
    }
    let ray_ref = (p_world - reference.center()).normalize();
    let ray_src = (p_world - source.center()).normalize();
    let cos = ray_ref.dot(&ray_src).clamp(-1.0, 1.0);
    MetadataRecord {
        dot: dot_unchecked(ref_desc, scratch),
        ray_ref,
        ray_src,
        depth_ref_norm: norm.apply(depth),
        depth_src_norm: norm.apply(hit.z),
        ray_angle: cos.acos(),
        pose_dist_norm: 0.0,
        valid: true,
    }
}

/// Builds the metadata record for feature-grid pixel `(u, v)` at bin `k`.
/// Camera intrinsics are rescaled to each feature map's grid. The pose
/// field is left at zero; [`normalize_metadata`] fills it in.
#[allow(clippy::too_many_arguments)]
pub fn compute_metadata(
    reference: &CameraFrame,
    source: &CameraFrame,
    f_ref: &FeatureMap,
    f_src: &FeatureMap,
    bins: &DepthBins,
    u: usize,
    v: usize,
    k: usize,
) -> Result<MetadataRecord> {
    if u >= f_ref.width || v >= f_ref.height || k >= bins.len() {
        return Err(MvsError::Argument(format!(
            "cell (k={k}, v={v}, u={u}) outside {}x{}x{} volume",
            bins.len(),
            f_ref.height,
            f_ref.width
        )));
    }
    if f_ref.channels != f_src.channels {
        return Err(MvsError::Argument("feature maps differ in channel count".into()));
    }
    let ref_view = reference.view().downscaled(f_ref.scale);
    let src_view = source.view().downscaled(f_src.scale);
    let depth = bins.values()[k];
    let p_ref = backproject_pixel(&ref_view.k, u as f64, v as f64, depth)?;
    let p_world = ref_view.world_from_camera.transform_point(&p_ref);
    let packed = PackedFeatures::new(f_src);
    let mut scratch = vec![0.0f32; f_src.channels];
    Ok(metadata_at(
        &ref_view,
        &src_view,
        &f_ref.vector_at(u, v),
        &packed,
        &p_world,
        depth,
        &LogDepthNormalizer::new(bins),
        &mut scratch,
    ))
}

/// Raw pose distances from the reference to each source, with relative
/// translations first divided by the largest one so the result does not
/// depend on scene units.
pub fn source_pose_distances(reference: &RigidPose, sources: &[RigidPose]) -> Vec<f64> {
    let rels: Vec<RigidPose> = sources.iter().map(|s| relative_pose(reference, s)).collect();
    let t_max = rels.iter().map(|r| r.translation.norm()).fold(0.0f64, f64::max);
    let scale = if t_max > ZERO_BASELINE_EPS {
        1.0 / t_max
    } else {
        1.0
    };
    rels.iter().map(|r| pose_distance(&r.scaled(scale))).collect()
}

/// `p_i / max_j p_j`, or all zeros when every distance is zero.
pub fn normalized_pose_distances(pose_dists: &[f64]) -> Vec<f64> {
    let max = pose_dists.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        pose_dists.iter().map(|p| p / max).collect()
    } else {
        vec![0.0; pose_dists.len()]
    }
}

/// Sets each source's `pose_dist_norm` to its distance divided by the
/// maximum over sources. `records[i]` holds source `i`'s records; invalid
/// records stay zeroed. Depth fields are already normalised against the
/// bin range at construction.
pub fn normalize_metadata(records: &mut [Vec<MetadataRecord>], pose_dists: &[f64]) -> Result<()> {
    if records.is_empty() || records.len() != pose_dists.len() {
        return Err(MvsError::Argument(format!(
            "need one pose distance per source ({} record sets, {} distances)",
            records.len(),
            pose_dists.len()
        )));
    }
    let norms = normalized_pose_distances(pose_dists);
    for (set, n) in records.iter_mut().zip(norms) {
        for r in set.iter_mut().filter(|r| r.valid) {
            r.pose_dist_norm = n;
        }
    }
    Ok(())
}
