//! Sparse, block-hashed truncated signed distance volume.

use std::collections::{BTreeSet, HashMap};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{MvsError, Result};
use crate::geometry::{backproject_pixel, project_point, CameraFrame, Intrinsics};

/// Voxels per block edge.
pub const BLOCK_SIDE: i32 = 16;
const BLOCK_VOXELS: usize = (BLOCK_SIDE * BLOCK_SIDE * BLOCK_SIDE) as usize;

pub type BlockKey = [i32; 3];
pub type VoxelIndex = [i32; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsdfConfig {
    pub voxel_size: f64,
    /// Truncation distance in scene units; `None` means three voxels.
    pub truncation: Option<f64>,
    pub max_fuse_depth: f64,
    pub weight_cap: f32,
}

impl Default for TsdfConfig {
    fn default() -> Self {
        TsdfConfig {
            voxel_size: 0.04,
            truncation: None,
            max_fuse_depth: 3.5,
            weight_cap: 128.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub tsdf: Vec<f32>,
    pub weight: Vec<f32>,
}

impl Block {
    fn new() -> Self {
        Block {
            tsdf: vec![1.0; BLOCK_VOXELS],
            weight: vec![0.0; BLOCK_VOXELS],
        }
    }
}

#[inline]
fn local_index(l: [i32; 3]) -> usize {
    ((l[2] * BLOCK_SIDE + l[1]) * BLOCK_SIDE + l[0]) as usize
}

#[inline]
pub(crate) fn split_index(v: VoxelIndex) -> (BlockKey, usize) {
    let key = [
        v[0].div_euclid(BLOCK_SIDE),
        v[1].div_euclid(BLOCK_SIDE),
        v[2].div_euclid(BLOCK_SIDE),
    ];
    let local = [
        v[0].rem_euclid(BLOCK_SIDE),
        v[1].rem_euclid(BLOCK_SIDE),
        v[2].rem_euclid(BLOCK_SIDE),
    ];
    (key, local_index(local))
}

/// Normalised TSDF values in `[-1, 1]` (positive in front of surfaces)
/// with integration weights, stored in 16^3 blocks keyed by block index.
/// Voxel `i` sits at `origin + i * voxel_size`.
#[derive(Debug, Clone)]
pub struct TsdfVolume {
    pub voxel_size: f64,
    pub truncation: f64,
    pub max_fuse_depth: f64,
    pub weight_cap: f32,
    pub origin: Vector3<f64>,
    pub(crate) blocks: HashMap<BlockKey, Block>,
}

impl TsdfVolume {
    pub fn new(cfg: &TsdfConfig) -> Result<Self> {
        if !(cfg.voxel_size > 0.0) {
            return Err(MvsError::Config(format!(
                "voxel size must be positive, got {}",
                cfg.voxel_size
            )));
        }
        let truncation = cfg.truncation.unwrap_or(3.0 * cfg.voxel_size);
        if !(truncation > 0.0) || !(cfg.max_fuse_depth > 0.0) || !(cfg.weight_cap > 0.0) {
            return Err(MvsError::Config(
                "truncation, max fuse depth and weight cap must be positive".into(),
            ));
        }
        Ok(TsdfVolume {
            voxel_size: cfg.voxel_size,
            truncation,
            max_fuse_depth: cfg.max_fuse_depth,
            weight_cap: cfg.weight_cap,
            origin: Vector3::zeros(),
            blocks: HashMap::new(),
        })
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn voxel_position(&self, v: VoxelIndex) -> Vector3<f64> {
        self.origin + Vector3::new(v[0] as f64, v[1] as f64, v[2] as f64) * self.voxel_size
    }

    fn block_origin(&self, key: BlockKey) -> VoxelIndex {
        [key[0] * BLOCK_SIDE, key[1] * BLOCK_SIDE, key[2] * BLOCK_SIDE]
    }

    fn block_key_of(&self, p: &Vector3<f64>) -> BlockKey {
        let q = (p - self.origin) / self.voxel_size;
        let v = [q.x.round() as i32, q.y.round() as i32, q.z.round() as i32];
        split_index(v).0
    }

    /// `(tsdf, weight)` of a voxel; unallocated voxels read as `(1, 0)`.
    pub fn voxel(&self, v: VoxelIndex) -> (f32, f32) {
        let (key, i) = split_index(v);
        self.blocks
            .get(&key)
            .map_or((1.0, 0.0), |b| (b.tsdf[i], b.weight[i]))
    }

    pub fn set_voxel(&mut self, v: VoxelIndex, tsdf: f32, weight: f32) {
        let (key, i) = split_index(v);
        let b = self.blocks.entry(key).or_insert_with(Block::new);
        b.tsdf[i] = tsdf.clamp(-1.0, 1.0);
        b.weight[i] = weight.max(0.0);
    }

    /// Writes `clamp(sdf(p) / truncation, -1, 1)` with weight 1 into every
    /// voxel whose position lies in `[lo, hi]`.
    pub fn write_sdf(&mut self, lo: Vector3<f64>, hi: Vector3<f64>, sdf: impl Fn(&Vector3<f64>) -> f64) {
        let a = ((lo - self.origin) / self.voxel_size).map(|x| x.ceil() as i32);
        let b = ((hi - self.origin) / self.voxel_size).map(|x| x.floor() as i32);
        for z in a.z..=b.z {
            for y in a.y..=b.y {
                for x in a.x..=b.x {
                    let v = [x, y, z];
                    let d = sdf(&self.voxel_position(v)) / self.truncation;
                    self.set_voxel(v, d.clamp(-1.0, 1.0) as f32, 1.0);
                }
            }
        }
    }

    /// Projective TSDF update from one posed depth map. The map may be at
    /// the frame's resolution or at an integer downscale of it.
    pub fn integrate(&mut self, frame: &CameraFrame, depth: &DepthMap) -> Result<()> {
        let k = depth_intrinsics(&frame.intrinsics, depth)?;
        let wfc = *frame.world_from_camera();
        let cfw = *frame.camera_from_world();
        let trunc = self.truncation;
        let max_depth = self.max_fuse_depth;

        let mut touched: BTreeSet<BlockKey> = BTreeSet::new();
        let step = 0.5 * self.voxel_size;
        for y in 0..depth.height {
            for x in 0..depth.width {
                let Some(d) = depth.get(x, y) else { continue };
                if d > max_depth {
                    continue;
                }
                let ray = backproject_pixel(&k, x as f64, y as f64, 1.0)?;
                let n = (2.0 * trunc / step).ceil() as usize;
                for s in 0..=n {
                    let z = d - trunc + s as f64 * step;
                    if z <= 0.0 {
                        continue;
                    }
                    let p = wfc.transform_point(&(ray * z));
                    touched.insert(self.block_key_of(&p));
                }
            }
        }
        if touched.is_empty() {
            return Ok(());
        }
        for key in &touched {
            self.blocks.entry(*key).or_insert_with(Block::new);
        }

        let origin = self.origin;
        let voxel = self.voxel_size;
        let cap = self.weight_cap;
        let mut work: Vec<(BlockKey, &mut Block)> = self
            .blocks
            .iter_mut()
            .filter(|(key, _)| touched.contains(*key))
            .map(|(key, b)| (*key, b))
            .collect();
        work.par_iter_mut().for_each(|(key, block)| {
            let base = [key[0] * BLOCK_SIDE, key[1] * BLOCK_SIDE, key[2] * BLOCK_SIDE];
            for lz in 0..BLOCK_SIDE {
                for ly in 0..BLOCK_SIDE {
                    for lx in 0..BLOCK_SIDE {
                        let p = origin
                            + Vector3::new(
                                (base[0] + lx) as f64,
                                (base[1] + ly) as f64,
                                (base[2] + lz) as f64,
                            ) * voxel;
                        let pc = cfw.transform_point(&p);
                        let proj = project_point(&k, &pc);
                        if !proj.valid {
                            continue;
                        }
                        let (px, py) = (proj.u.round(), proj.v.round());
                        if px < 0.0 || py < 0.0 || px >= k.width as f64 || py >= k.height as f64 {
                            continue;
                        }
                        let Some(d) = depth.get(px as usize, py as usize) else {
                            continue;
                        };
                        if d > max_depth {
                            continue;
                        }
                        let sdf = d - pc.z;
                        if sdf < -trunc {
                            continue;
                        }
                        let obs = (sdf.min(trunc) / trunc) as f32;
                        let i = local_index([lx, ly, lz]);
                        let w = block.weight[i];
                        block.tsdf[i] = (block.tsdf[i] * w + obs) / (w + 1.0);
                        block.weight[i] = (w + 1.0).min(cap);
                    }
                }
            }
        });
        Ok(())
    }

    /// Allocated block keys in ascending order.
    pub(crate) fn sorted_keys(&self) -> Vec<BlockKey> {
        let mut keys: Vec<BlockKey> = self.blocks.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    pub(crate) fn block_voxels(&self, key: BlockKey) -> impl Iterator<Item = VoxelIndex> {
        let o = self.block_origin(key);
        (0..BLOCK_SIDE).flat_map(move |z| {
            (0..BLOCK_SIDE).flat_map(move |y| (0..BLOCK_SIDE).map(move |x| [o[0] + x, o[1] + y, o[2] + z]))
        })
    }
}

/// Intrinsics matching the depth map's grid: the frame's own, or those of
/// an integer downscale that produces exactly the map's size.
fn depth_intrinsics(k: &Intrinsics, depth: &DepthMap) -> Result<Intrinsics> {
    if depth.width == k.width && depth.height == k.height {
        return Ok(*k);
    }
    if let Some(stride) = k.width.checked_div(depth.width) {
        for s in [stride, stride + 1] {
            if s >= 1 {
                let d = k.downscaled(s);
                if d.width == depth.width && d.height == depth.height {
                    return Ok(d);
                }
            }
        }
    }
    Err(MvsError::Argument(format!(
        "depth map {}x{} is not an integer downscale of the {}x{} frame",
        depth.width, depth.height, k.width, k.height
    )))
}

/// Free-function form of [`TsdfVolume::integrate`].
pub fn integrate_depth_map(vol: &mut TsdfVolume, frame: &CameraFrame, depth: &DepthMap) -> Result<()> {
    vol.integrate(frame, depth)
}
