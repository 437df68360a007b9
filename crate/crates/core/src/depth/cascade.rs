use serde::{Deserialize, Serialize};

use super::{soft_argmin_depth, DepthMap};
use crate::costvolume::{build_cost_volume, make_log_bins, ScorerConfig, SourceView};
use crate::error::{MvsError, Result};
use crate::features::FeatureMap;
use crate::geometry::{estimate_matchable_range, CameraFrame, RangeEstimate, RangeHeuristicConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    /// Depth hypotheses per pass.
    pub bins: usize,
    pub passes: usize,
    /// Log-space widening of the refined range, as a fraction of its span.
    pub margin_frac: f64,
    /// Softmax temperature; `None` uses `1/sqrt(channels)`.
    pub temperature: Option<f64>,
    pub range: RangeHeuristicConfig,
    /// Pass-1 range; `None` derives it from the camera frusta.
    pub initial_range: Option<RangeEstimate>,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            bins: 64,
            passes: 2,
            margin_frac: 0.05,
            temperature: None,
            range: RangeHeuristicConfig::default(),
            initial_range: None,
        }
    }
}

pub fn default_temperature(channels: usize) -> f64 {
    1.0 / (channels.max(1) as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct PassDiagnostics {
    pub range: RangeEstimate,
    pub depth: DepthMap,
}

#[derive(Debug, Clone)]
pub struct CascadeResult {
    /// Output of the final pass.
    pub depth: DepthMap,
    /// Every pass in order, the last one included.
    pub passes: Vec<PassDiagnostics>,
}

/// `[min, max]` widened by `margin` of its log span on each side. A
/// degenerate span is widened by `margin` in absolute log units.
fn refine_range(lo: f64, hi: f64, margin: f64) -> Result<RangeEstimate> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let span = lhi - llo;
    let pad = if span > 1e-9 {
        margin * span
    } else {
        margin.max(1e-6)
    };
    RangeEstimate::new((llo - pad).exp(), (lhi + pad).exp())
}

/// Pass 1 sweeps the frustum-derived range; every later pass rebuilds the
/// volume over the min/max of the previous estimate.
pub fn cascaded_depth(
    reference: &CameraFrame,
    ref_features: &FeatureMap,
    sources: &[SourceView<'_>],
    scorer: &ScorerConfig,
    cfg: &CascadeConfig,
) -> Result<CascadeResult> {
    if sources.is_empty() {
        return Err(MvsError::Argument("cascade needs at least one source".into()));
    }
    if cfg.passes == 0 {
        return Err(MvsError::Config("cascade needs at least one pass".into()));
    }
    let temperature = cfg
        .temperature
        .unwrap_or_else(|| default_temperature(ref_features.channels));
    let src_frames: Vec<&CameraFrame> = sources.iter().map(|s| s.frame).collect();
    let mut range = match cfg.initial_range {
        Some(r) => r,
        None => estimate_matchable_range(reference, &src_frames, &cfg.range)?,
    };
    let mut passes: Vec<PassDiagnostics> = Vec::with_capacity(cfg.passes);

    for pass in 0..cfg.passes {
        if let Some(prev) = passes.last() {
            let Some((lo, hi)) = prev.depth.valid_range() else {
                return Err(MvsError::Pipeline(format!(
                    "pass {pass} of frame {} has no valid depths",
                    reference.id
                )));
            };
            range = refine_range(lo, hi, cfg.margin_frac)?;
        }
        let bins = make_log_bins(&range, cfg.bins)?;
        let cv = build_cost_volume(reference, ref_features, sources, &bins, scorer)?;
        let depth = soft_argmin_depth(&cv, temperature)?;
        log::debug!(
            "frame {} pass {}: range [{:.4}, {:.4}], {} valid px",
            reference.id,
            pass + 1,
            range.d_min,
            range.d_max,
            depth.valid_count()
        );
        if pass == 0 && depth.valid_count() == 0 {
            return Err(MvsError::Pipeline(format!(
                "no matchable content for frame {}",
                reference.id
            )));
        }
        passes.push(PassDiagnostics { range, depth });
    }
    let depth = passes.last().expect("at least one pass").depth.clone();
    Ok(CascadeResult { depth, passes })
}
