//! Plane-sweep cost volumes aggregated over any number of source views.
//!
//! Every cell `(k, v, u)` combines one `(score, weight)` pair per source
//! that sees the hypothesised point: weights go through a softmax across
//! sources and the scores are averaged with them. Sources that do not see
//! the point are left out of the softmax entirely.

mod metadata;
mod mlp;

pub use metadata::{
    compute_metadata, normalize_metadata, normalized_pose_distances, source_pose_distances, MetadataRecord,
    MLP_INPUT_DIM,
};
pub use mlp::{mlp_forward, Activation, DenseLayer, MlpWeights};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MvsError, Result};
use crate::features::FeatureMap;
use crate::geometry::{CameraFrame, PinholeView, RangeEstimate, RigidPose};
use metadata::{metadata_at, LogDepthNormalizer, PackedFeatures};

/// Strictly increasing, positive depth hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthBins {
    values: Vec<f64>,
}

impl DepthBins {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(MvsError::Argument("need at least two depth bins".into()));
        }
        if values.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(MvsError::Argument(
                "depth bins must be positive and finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MvsError::Argument(
                "depth bins must be strictly increasing".into(),
            ));
        }
        Ok(DepthBins { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn range(&self) -> RangeEstimate {
        RangeEstimate {
            d_min: self.min(),
            d_max: self.max(),
        }
    }
}

/// `count` depths spaced uniformly in log depth, endpoints exact.
pub fn make_log_bins(range: &RangeEstimate, count: usize) -> Result<DepthBins> {
    if count < 2 {
        return Err(MvsError::Argument(format!("need K >= 2 bins, got {count}")));
    }
    let range = RangeEstimate::new(range.d_min, range.d_max)?;
    let lo = range.d_min.ln();
    let step = (range.d_max.ln() - lo) / (count - 1) as f64;
    let mut values: Vec<f64> = (0..count).map(|j| (lo + j as f64 * step).exp()).collect();
    values[0] = range.d_min;
    values[count - 1] = range.d_max;
    DepthBins::new(values)
}

/// Softmax-weighted mean of per-source scores.
pub fn aggregate_views(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(MvsError::Argument("cannot aggregate zero views".into()));
    }
    if pairs.iter().any(|(s, w)| !s.is_finite() || !w.is_finite()) {
        return Err(MvsError::Argument("non-finite score or weight".into()));
    }
    Ok(softmax_blend(pairs))
}

#[inline]
fn softmax_blend(pairs: &[(f64, f64)]) -> f64 {
    let max_w = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, w) in pairs {
        let e = (w - max_w).exp();
        num += e * s;
        den += e;
    }
    num / den
}

/// Softmax of the weight column, exposed for diagnostics.
pub fn softmax_weights(pairs: &[(f64, f64)]) -> Vec<f64> {
    let max_w = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = pairs.iter().map(|p| (p.1 - max_w).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// How each source's metadata turns into a `(score, weight)` pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Scorer {
    /// Feature dot product used as both score and weight.
    #[default]
    DotOnly,
    /// Metadata vector passed through a small MLP.
    Mlp(MlpWeights),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScorerConfig {
    pub scorer: Scorer,
    /// Score assigned to cells no source can see.
    pub empty_score: f64,
}

impl ScorerConfig {
    pub fn dot_only() -> Self {
        ScorerConfig::default()
    }

    pub fn mlp(weights: MlpWeights) -> Self {
        ScorerConfig {
            scorer: Scorer::Mlp(weights),
            empty_score: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Scorer::Mlp(w) = &self.scorer {
            if w.input_dim() != MLP_INPUT_DIM {
                return Err(MvsError::Config(format!(
                    "MLP input dim {} does not match the {MLP_INPUT_DIM}-float metadata layout",
                    w.input_dim()
                )));
            }
        }
        if !self.empty_score.is_finite() {
            return Err(MvsError::Config("empty_score must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerMode {
    DotOnly,
    Mlp,
}

/// Aggregated matching scores over `(bin, row, column)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    pub bins: DepthBins,
    pub width: usize,
    pub height: usize,
    /// Bin-major: `scores[(k * height + v) * width + u]`.
    pub scores: Vec<f64>,
    /// Number of sources that saw each cell.
    pub coverage: Vec<u16>,
}

impl CostVolume {
    #[inline]
    pub fn index(&self, k: usize, v: usize, u: usize) -> usize {
        (k * self.height + v) * self.width + u
    }

    pub fn score(&self, k: usize, v: usize, u: usize) -> f64 {
        self.scores[self.index(k, v, u)]
    }

    pub fn coverage_at(&self, k: usize, v: usize, u: usize) -> u16 {
        self.coverage[self.index(k, v, u)]
    }
}

/// One source view with its descriptors.
#[derive(Debug, Clone, Copy)]
pub struct SourceView<'a> {
    pub frame: &'a CameraFrame,
    pub features: &'a FeatureMap,
}

fn check_grid(frame: &CameraFrame, fm: &FeatureMap, scale: usize) -> Result<()> {
    if fm.scale != scale {
        return Err(MvsError::Argument(format!(
            "frame {}: feature scale {} differs from reference scale {scale}",
            frame.id, fm.scale
        )));
    }
    let k = frame.intrinsics.downscaled(scale);
    if fm.width != k.width || fm.height != k.height {
        return Err(MvsError::Argument(format!(
            "frame {}: feature grid {}x{} does not match {}x{} expected at scale {scale}",
            frame.id, fm.width, fm.height, k.width, k.height
        )));
    }
    Ok(())
}

/// Sweeps every reference feature pixel through `bins`, scoring each source
/// and aggregating with a softmax over source weights.
pub fn build_cost_volume(
    reference: &CameraFrame,
    ref_features: &FeatureMap,
    sources: &[SourceView<'_>],
    bins: &DepthBins,
    scorer: &ScorerConfig,
) -> Result<CostVolume> {
    if sources.is_empty() {
        return Err(MvsError::Argument("cost volume needs at least one source".into()));
    }
    scorer.validate()?;
    let scale = ref_features.scale;
    check_grid(reference, ref_features, scale)?;
    for s in sources {
        check_grid(s.frame, s.features, scale)?;
        if s.features.channels != ref_features.channels {
            return Err(MvsError::Argument(format!(
                "frame {}: {} feature channels, reference has {}",
                s.frame.id, s.features.channels, ref_features.channels
            )));
        }
    }

    let ref_view = reference.view().downscaled(scale);
    let src_views: Vec<PinholeView> = sources.iter().map(|s| s.frame.view().downscaled(scale)).collect();
    let src_poses: Vec<RigidPose> = sources.iter().map(|s| *s.frame.world_from_camera()).collect();
    let pose_norm =
        normalized_pose_distances(&source_pose_distances(reference.world_from_camera(), &src_poses));
    let ref_packed = PackedFeatures::new(ref_features);
    let src_packed: Vec<PackedFeatures> = sources.iter().map(|s| PackedFeatures::new(s.features)).collect();
    let norm = LogDepthNormalizer::new(bins);

    let (w, h, nk) = (ref_features.width, ref_features.height, bins.len());
    let channels = ref_features.channels;
    let kinv = (1.0 / ref_view.k.fx, 1.0 / ref_view.k.fy);

    // per-pixel columns of K (score, coverage), transposed afterwards
    let columns: Vec<(Vec<f64>, Vec<u16>)> = (0..w * h)
        .into_par_iter()
        .map_init(
            || {
                (
                    vec![0.0f32; channels],
                    Vec::with_capacity(sources.len()),
                    Vec::new(),
                    Vec::new(),
                )
            },
            |(scratch, pairs, buf_a, buf_b), pix| {
                let (u, v) = (pix % w, pix / w);
                let ref_desc = ref_packed.at(u, v);
                let ray = nalgebra::Vector3::new(
                    (u as f64 - ref_view.k.cx) * kinv.0,
                    (v as f64 - ref_view.k.cy) * kinv.1,
                    1.0,
                );
                let mut col_s = vec![scorer.empty_score; nk];
                let mut col_c = vec![0u16; nk];
                for (k, &depth) in bins.values().iter().enumerate() {
                    let p_world = ref_view.world_from_camera.transform_point(&(ray * depth));
                    pairs.clear();
                    for (i, src) in src_views.iter().enumerate() {
                        let mut rec = metadata_at(
                            &ref_view,
                            src,
                            ref_desc,
                            &src_packed[i],
                            &p_world,
                            depth,
                            &norm,
                            scratch,
                        );
                        if !rec.valid {
                            continue;
                        }
                        rec.pose_dist_norm = pose_norm[i];
                        let pair = match &scorer.scorer {
                            Scorer::DotOnly => (rec.dot, rec.dot),
                            Scorer::Mlp(net) => {
                                net.forward_with(&rec.to_mlp_input(), buf_a, buf_b);
                                (buf_a[0], buf_a[1])
                            }
                        };
                        pairs.push(pair);
                    }
                    if !pairs.is_empty() {
                        col_s[k] = softmax_blend(pairs);
                        col_c[k] = pairs.len().min(u16::MAX as usize) as u16;
                    }
                }
                (col_s, col_c)
            },
        )
        .collect();

    let plane = w * h;
    let mut scores = vec![0.0; nk * plane];
    let mut coverage = vec![0u16; nk * plane];
    for (pix, (cs, cc)) in columns.into_iter().enumerate() {
        for k in 0..nk {
            scores[k * plane + pix] = cs[k];
            coverage[k * plane + pix] = cc[k];
        }
    }
    Ok(CostVolume {
        bins: bins.clone(),
        width: w,
        height: h,
        scores,
        coverage,
    })
}
