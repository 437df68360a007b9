//! Reference / source tuple selection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MvsError, Result};
use crate::geometry::{
    estimate_matchable_range, pose_distance, relative_pose, sweep_views, CameraFrame, RangeHeuristicConfig,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleSpec {
    pub reference: String,
    pub sources: Vec<String>,
}

impl TupleSpec {
    /// Checks the tuple against the loaded frames.
    pub fn validate(&self, frames: &[CameraFrame]) -> Result<()> {
        let known = |id: &str| frames.iter().any(|f| f.id == id);
        if self.sources.is_empty() {
            return Err(MvsError::Data(format!(
                "tuple for {:?} has no sources",
                self.reference
            )));
        }
        if let Some(id) = std::iter::once(&self.reference)
            .chain(&self.sources)
            .find(|id| !known(id))
        {
            return Err(MvsError::Data(format!(
                "tuple references unknown frame id {id:?}"
            )));
        }
        if self.sources.contains(&self.reference) {
            return Err(MvsError::Data(format!(
                "tuple lists reference {:?} among its sources",
                self.reference
            )));
        }
        Ok(())
    }
}

/// Selected tuples plus the references that found no candidate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TupleSelection {
    pub tuples: Vec<TupleSpec>,
    #[serde(default)]
    pub omitted: Vec<String>,
}

impl TupleSelection {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let offset = super::scene::line_col_offset(text, e.line(), e.column());
            MvsError::format(offset, format!("invalid tuple file: {e}"))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tuples always serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MvsError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| MvsError::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseTupleConfig {
    pub t_low: f64,
    pub t_high: f64,
    pub t_target: f64,
    pub max_sources: usize,
}

impl Default for PoseTupleConfig {
    fn default() -> Self {
        PoseTupleConfig {
            t_low: 0.025,
            t_high: 0.45,
            t_target: 0.225,
            max_sources: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlapTupleConfig {
    /// Samples per side of the reference grid.
    pub grid: usize,
    pub min_overlap: f64,
    pub max_sources: usize,
    pub range: RangeHeuristicConfig,
}

impl Default for OverlapTupleConfig {
    fn default() -> Self {
        OverlapTupleConfig {
            grid: 16,
            min_overlap: 0.3,
            max_sources: 8,
            range: RangeHeuristicConfig::default(),
        }
    }
}

fn need_two(frames: &[CameraFrame]) -> Result<()> {
    if frames.len() < 2 {
        return Err(MvsError::Argument(format!(
            "tuple selection needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    Ok(())
}

/// `(score, manifest index)` pairs sorted by ascending key, then index.
fn rank_and_build(
    frames: &[CameraFrame],
    per_reference: impl Fn(usize) -> Result<Vec<(f64, usize)>>,
    max_sources: usize,
) -> Result<TupleSelection> {
    let mut out = TupleSelection::default();
    for r in 0..frames.len() {
        let mut cands = per_reference(r)?;
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(max_sources);
        if cands.is_empty() {
            log::info!("frame {}: no source candidates, tuple omitted", frames[r].id);
            out.omitted.push(frames[r].id.clone());
        } else {
            out.tuples.push(TupleSpec {
                reference: frames[r].id.clone(),
                sources: cands.iter().map(|&(_, j)| frames[j].id.clone()).collect(),
            });
        }
    }
    Ok(out)
}

/// Sources whose pose distance lies in `[t_low, t_high]`, closest to
/// `t_target` first; ties go to the earlier manifest entry.
pub fn select_tuples_pose(frames: &[CameraFrame], cfg: &PoseTupleConfig) -> Result<TupleSelection> {
    need_two(frames)?;
    if !(cfg.t_low <= cfg.t_high) || cfg.max_sources == 0 {
        return Err(MvsError::Config(
            "pose tuple window needs t_low <= t_high and max_sources >= 1".into(),
        ));
    }
    rank_and_build(
        frames,
        |r| {
            let ref_pose = frames[r].world_from_camera();
            Ok(frames
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != r)
                .filter_map(|(j, f)| {
                    let d = pose_distance(&relative_pose(ref_pose, f.world_from_camera()));
                    (d >= cfg.t_low && d <= cfg.t_high).then(|| ((d - cfg.t_target).abs(), j))
                })
                .collect())
        },
        cfg.max_sources,
    )
}

/// Fraction of a `grid x grid` lattice of reference pixels that, placed at
/// the geometric midpoint of the pair's matchable range, project inside the
/// candidate image.
pub fn overlap_score(
    reference: &CameraFrame,
    candidate: &CameraFrame,
    cfg: &OverlapTupleConfig,
) -> Result<f64> {
    let range = estimate_matchable_range(reference, &[candidate], &cfg.range)?;
    let depth = range.geometric_mid();
    let (rv, cv) = (reference.view(), candidate.view());
    let k = &reference.intrinsics;
    let g = cfg.grid.max(1);
    let mut hits = 0usize;
    for j in 0..g {
        for i in 0..g {
            let u = (i as f64 + 0.5) * k.width as f64 / g as f64 - 0.5;
            let v = (j as f64 + 0.5) * k.height as f64 / g as f64 - 0.5;
            if sweep_views(&rv, &cv, u, v, depth)?.valid {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / (g * g) as f64)
}

/// Sources with overlap at least `min_overlap`, highest overlap first.
pub fn select_tuples_overlap(frames: &[CameraFrame], cfg: &OverlapTupleConfig) -> Result<TupleSelection> {
    need_two(frames)?;
    if cfg.max_sources == 0 {
        return Err(MvsError::Config("max_sources must be at least 1".into()));
    }
    rank_and_build(
        frames,
        |r| {
            let mut out = Vec::new();
            for (j, f) in frames.iter().enumerate() {
                if j == r {
                    continue;
                }
                let s = overlap_score(&frames[r], f, cfg)?;
                if s >= cfg.min_overlap {
                    out.push((-s, j));
                }
            }
            Ok(out)
        },
        cfg.max_sources,
    )
}
