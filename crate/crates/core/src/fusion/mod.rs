//! TSDF fusion of depth maps, mesh extraction and mesh metrics.

mod kdtree;
mod marching_cubes;
mod mesh;
mod ply;
mod tables;
mod tsdf;

pub use kdtree::KdTree;
pub use marching_cubes::extract_mesh;
pub use mesh::{
    fscore_at_threshold, mesh_distance_metrics, nearest_distances, sample_surface_points, FScore,
    MeshMetrics, TriangleMesh,
};
pub use ply::{decode_ply, encode_ply, load_ply, save_ply, PlyFormat};
pub use tsdf::{integrate_depth_map, BlockKey, TsdfConfig, TsdfVolume, VoxelIndex, BLOCK_SIDE};
