//! End-to-end orchestration: depth per tuple, fusion, evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tuples::TupleSpec;
use crate::costvolume::{MlpWeights, ScorerConfig, ScorerMode, SourceView};
use crate::depth::{
    cascaded_depth, load_depth_map, perturb_range, save_depth_map, save_depth_png, CascadeConfig, DepthMap,
    PerturbConfig,
};
use crate::error::{MvsError, Result};
use crate::evaluation::{depth_report, DepthReport, DEFAULT_INLIER_THRESHOLD};
use crate::features::{extract_census_features, FeatureMap};
use crate::fusion::{extract_mesh, TriangleMesh, TsdfConfig, TsdfVolume};
use crate::geometry::{estimate_matchable_range, CameraFrame, RangeHeuristicConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub bins: usize,
    pub passes: usize,
    pub margin_frac: f64,
    pub temperature: Option<f64>,
    pub scorer: ScorerMode,
    /// MLP weight file, required when `scorer` is `mlp`. Relative paths are
    /// resolved against the config file's directory.
    pub mlp_weights: Option<PathBuf>,
    pub empty_score: f64,
    pub range: RangeHeuristicConfig,
    /// When set, each reference's pass-1 range is widened by a seeded
    /// random log-space factor.
    pub range_perturbation: Option<PerturbConfig>,
    pub census_radius: usize,
    pub feature_stride: usize,
    pub fusion: TsdfConfig,
    pub seed: u64,
    pub write_png: bool,
    /// Units per PNG count when `write_png` is on.
    pub png_depth_scale: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bins: 64,
            passes: 2,
            margin_frac: 0.05,
            temperature: None,
            scorer: ScorerMode::DotOnly,
            mlp_weights: None,
            empty_score: 0.0,
            range: RangeHeuristicConfig::default(),
            range_perturbation: None,
            census_radius: 3,
            feature_stride: 4,
            fusion: TsdfConfig::default(),
            seed: 0,
            write_png: false,
            png_depth_scale: 1000.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(MvsError::Config(format!(
                "bins must be at least 2, got {}",
                self.bins
            )));
        }
        if self.passes < 1 {
            return Err(MvsError::Config("passes must be at least 1".into()));
        }
        if self.census_radius == 0 || self.feature_stride == 0 {
            return Err(MvsError::Config(
                "census_radius and feature_stride must be positive".into(),
            ));
        }
        if self.scorer == ScorerMode::Mlp && self.mlp_weights.is_none() {
            return Err(MvsError::Config("scorer mode mlp needs mlp_weights".into()));
        }
        if let Some(t) = self.temperature {
            if !(t > 0.0) {
                return Err(MvsError::Config(format!("temperature must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| {
            let offset = super::scene::line_col_offset(text, e.line(), e.column());
            MvsError::format(offset, format!("invalid pipeline config: {e}"))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config and resolves a relative `mlp_weights` path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MvsError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(w), Some(dir)) = (&cfg.mlp_weights, path.parent()) {
            if w.is_relative() {
                cfg.mlp_weights = Some(dir.join(w));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    pub fn cascade(&self) -> CascadeConfig {
        CascadeConfig {
            bins: self.bins,
            passes: self.passes,
            margin_frac: self.margin_frac,
            temperature: self.temperature,
            range: self.range,
            initial_range: None,
        }
    }

    /// Scorer for this config, loading MLP weights from disk if needed.
    pub fn scorer_config(&self) -> Result<ScorerConfig> {
        let scorer = match self.scorer {
            ScorerMode::DotOnly => ScorerConfig::dot_only(),
            ScorerMode::Mlp => {
                let path = self
                    .mlp_weights
                    .as_ref()
                    .ok_or_else(|| MvsError::Config("scorer mode mlp needs mlp_weights".into()))?;
                ScorerConfig::mlp(MlpWeights::load(path)?)
            }
        };
        let cfg = ScorerConfig {
            empty_score: self.empty_score,
            ..scorer
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleFailure {
    pub reference: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRunReport {
    pub completed: Vec<String>,
    pub failed: Vec<TupleFailure>,
    /// Present when at least one completed reference has ground truth.
    pub metrics: Option<DepthReport>,
}

/// One finished tuple: the final depth map plus every pass.
#[derive(Debug, Clone)]
pub struct TupleDepth {
    pub reference: String,
    pub depth: DepthMap,
    pub pass_depths: Vec<DepthMap>,
}

#[derive(Debug, Clone)]
pub struct DepthRun {
    pub results: Vec<TupleDepth>,
    pub report: DepthRunReport,
}

fn seed_for(seed: u64, reference: &str) -> u64 {
    reference.bytes().fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Census features for every frame named in a valid tuple.
fn features_for(
    frames: &[CameraFrame],
    tuples: &[TupleSpec],
    cfg: &PipelineConfig,
) -> BTreeMap<String, Result<FeatureMap>> {
    let needed: BTreeSet<&str> = tuples
        .iter()
        .filter(|t| t.validate(frames).is_ok())
        .flat_map(|t| std::iter::once(t.reference.as_str()).chain(t.sources.iter().map(String::as_str)))
        .collect();
    let list: Vec<&CameraFrame> = frames.iter().filter(|f| needed.contains(f.id.as_str())).collect();
    list.par_iter()
        .map(|f| {
            (
                f.id.clone(),
                extract_census_features(&f.image, cfg.census_radius, cfg.feature_stride),
            )
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn run_tuple(
    frames: &[CameraFrame],
    features: &BTreeMap<String, Result<FeatureMap>>,
    tuple: &TupleSpec,
    scorer: &ScorerConfig,
    cfg: &PipelineConfig,
) -> Result<TupleDepth> {
    tuple.validate(frames)?;
    let frame = |id: &str| frames.iter().find(|f| f.id == id).expect("validated id");
    let feats = |id: &str| -> Result<&FeatureMap> {
        match features.get(id) {
            Some(Ok(f)) => Ok(f),
            Some(Err(e)) => Err(MvsError::Pipeline(format!("features of {id}: {e}"))),
            None => Err(MvsError::Pipeline(format!("no features computed for {id}"))),
        }
    };
    let reference = frame(&tuple.reference);
    let sources = tuple
        .sources
        .iter()
        .map(|id| {
            Ok(SourceView {
                frame: frame(id),
                features: feats(id)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cascade = cfg.cascade();
    if let Some(p) = &cfg.range_perturbation {
        let src: Vec<&CameraFrame> = sources.iter().map(|s| s.frame).collect();
        let r = estimate_matchable_range(reference, &src, &cfg.range)?;
        cascade.initial_range = Some(perturb_range(&r, seed_for(cfg.seed, &reference.id), p));
    }
    let out = cascaded_depth(reference, feats(&reference.id)?, &sources, scorer, &cascade)?;
    Ok(TupleDepth {
        reference: tuple.reference.clone(),
        depth: out.depth,
        pass_depths: out.passes.into_iter().map(|p| p.depth).collect(),
    })
}

/// Integer stride `s` with `ceil(full / s) == reduced` on both axes.
pub fn infer_stride(full: (usize, usize), reduced: (usize, usize)) -> Option<usize> {
    if reduced.0 == 0 || reduced.1 == 0 {
        return None;
    }
    (1..=full.0.max(1)).find(|&s| full.0.div_ceil(s) == reduced.0 && full.1.div_ceil(s) == reduced.1)
}

/// `(name, prediction, ground truth at the prediction's grid)` for every
/// prediction whose frame has ground truth.
fn gt_pairs<'a>(
    frames: &[CameraFrame],
    preds: impl Iterator<Item = (&'a str, &'a DepthMap)>,
) -> Result<Vec<(String, DepthMap, DepthMap)>> {
    let mut pairs = Vec::new();
    for (id, pred) in preds {
        let Some(gt) = frames
            .iter()
            .find(|f| f.id == id)
            .and_then(|f| f.gt_depth.as_ref())
        else {
            continue;
        };
        let stride = infer_stride((gt.width, gt.height), (pred.width, pred.height)).ok_or_else(|| {
            MvsError::Data(format!(
                "prediction for {id} is {}x{}, not a downscale of the {}x{} ground truth",
                pred.width, pred.height, gt.width, gt.height
            ))
        })?;
        pairs.push((id.to_string(), pred.clone(), gt.subsample(stride)));
    }
    Ok(pairs)
}

/// Runs the cascade for every tuple. A failing tuple is recorded in the
/// report and does not stop the others.
pub fn run_depth(frames: &[CameraFrame], tuples: &[TupleSpec], cfg: &PipelineConfig) -> Result<DepthRun> {
    cfg.validate()?;
    let scorer = cfg.scorer_config()?;
    let features = features_for(frames, tuples, cfg);
    let outcomes: Vec<Result<TupleDepth>> = tuples
        .par_iter()
        .map(|t| run_tuple(frames, &features, t, &scorer, cfg))
        .collect();
    let mut results = Vec::new();
    let mut failed = Vec::new();
    for (t, r) in tuples.iter().zip(outcomes) {
        match r {
            Ok(d) => results.push(d),
            Err(e) => {
                log::warn!("tuple {}: {e}", t.reference);
                failed.push(TupleFailure {
                    reference: t.reference.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let pairs = gt_pairs(frames, results.iter().map(|r| (r.reference.as_str(), &r.depth)))?;
    let metrics = if pairs.is_empty() {
        None
    } else {
        match depth_report(&pairs, DEFAULT_INLIER_THRESHOLD) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("depth metrics unavailable: {e}");
                None
            }
        }
    };
    let report = DepthRunReport {
        completed: results.iter().map(|r| r.reference.clone()).collect(),
        failed,
        metrics,
    };
    Ok(DepthRun { results, report })
}

/// Writes `<id>.mvsd` (and `<id>.png` when enabled) per result, plus
/// `report.json`.
pub fn write_depth_outputs(run: &DepthRun, dir: &Path, cfg: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| MvsError::io(dir, e))?;
    for r in &run.results {
        save_depth_map(&r.depth, dir.join(format!("{}.mvsd", r.reference)))?;
        if cfg.write_png {
            save_depth_png(
                &r.depth,
                cfg.png_depth_scale,
                dir.join(format!("{}.png", r.reference)),
            )?;
        }
    }
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&run.report).expect("report always serializes");
    std::fs::write(&path, text).map_err(|e| MvsError::io(&path, e))
}

/// Depth maps named `<frame id>.mvsd` found in `dir`, in manifest order.
pub fn load_depth_dir(frames: &[CameraFrame], dir: &Path) -> Result<Vec<(String, DepthMap)>> {
    if !dir.is_dir() {
        return Err(MvsError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "depth directory not found"),
        ));
    }
    let mut out = Vec::new();
    for f in frames {
        let p = dir.join(format!("{}.mvsd", f.id));
        if p.is_file() {
            out.push((f.id.clone(), load_depth_map(&p)?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseReport {
    pub integrated: Vec<String>,
    pub blocks: usize,
    pub vertices: usize,
    pub triangles: usize,
}

/// Integrates the depth maps in the given order and extracts the mesh.
pub fn fuse_depth_maps(
    frames: &[CameraFrame],
    depths: &[(String, DepthMap)],
    cfg: &TsdfConfig,
) -> Result<(TriangleMesh, FuseReport)> {
    let mut vol = TsdfVolume::new(cfg)?;
    let mut integrated = Vec::new();
    for (id, d) in depths {
        let frame = frames
            .iter()
            .find(|f| &f.id == id)
            .ok_or_else(|| MvsError::Data(format!("depth map {id} has no frame in the scene")))?;
        vol.integrate(frame, d)?;
        integrated.push(id.clone());
    }
    let mesh = extract_mesh(&vol);
    let report = FuseReport {
        integrated,
        blocks: vol.block_count(),
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
    };
    Ok((mesh, report))
}

/// Scores every `<id>.mvsd` in `pred_dir` against the scene's ground truth.
pub fn evaluate_depth_dir(frames: &[CameraFrame], pred_dir: &Path, thresh: f64) -> Result<DepthReport> {
    let preds = load_depth_dir(frames, pred_dir)?;
    let pairs = gt_pairs(frames, preds.iter().map(|(id, d)| (id.as_str(), d)))?;
    if pairs.is_empty() {
        return Err(MvsError::Data(
            "no prediction in the directory has matching ground truth".into(),
        ));
    }
    depth_report(&pairs, thresh)
}
