//! Iso-surface extraction at TSDF = 0.

use std::collections::HashMap;

use super::mesh::TriangleMesh;
use super::tables::{EDGE_TABLE, TRIANGLE_TABLE};
use super::tsdf::{TsdfVolume, VoxelIndex};

/// Corner offsets in table order.
pub(crate) const CORNERS: [[i32; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs for each of the twelve cube edges.
pub(crate) const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Edge identity shared between neighbouring cells: lower endpoint plus axis.
fn edge_key(a: VoxelIndex, b: VoxelIndex) -> (VoxelIndex, u8) {
    let lo = if a <= b { a } else { b };
    let axis = (0..3).find(|&i| a[i] != b[i]).unwrap_or(0) as u8;
    (lo, axis)
}

/// Marching cubes over every cell whose eight corners all carry positive
/// weight. Vertices on shared edges are welded. Output depends only on the
/// volume contents, not on hash iteration order.
pub fn extract_mesh(vol: &TsdfVolume) -> TriangleMesh {
    let mut mesh = TriangleMesh::default();
    let mut welded: HashMap<(VoxelIndex, u8), u32> = HashMap::new();
    let mut vals = [0f32; 8];
    let mut idx = [[0i32; 3]; 8];

    for key in vol.sorted_keys() {
        for base in vol.block_voxels(key) {
            let mut usable = true;
            let mut cube = 0usize;
            for c in 0..8 {
                let v = [
                    base[0] + CORNERS[c][0],
                    base[1] + CORNERS[c][1],
                    base[2] + CORNERS[c][2],
                ];
                let (t, w) = vol.voxel(v);
                if !(w > 0.0) {
                    usable = false;
                    break;
                }
                idx[c] = v;
                vals[c] = t;
                if t < 0.0 {
                    cube |= 1 << c;
                }
            }
            if !usable || EDGE_TABLE[cube] == 0 {
                continue;
            }
            let mut edge_vertex = [u32::MAX; 12];
            for (e, &[a, b]) in EDGES.iter().enumerate() {
                if EDGE_TABLE[cube] & (1 << e) == 0 {
                    continue;
                }
                let k = edge_key(idx[a], idx[b]);
                let id = *welded.entry(k).or_insert_with(|| {
                    let (va, vb) = (vals[a] as f64, vals[b] as f64);
                    let t = va / (va - vb);
                    let pa = vol.voxel_position(idx[a]);
                    let pb = vol.voxel_position(idx[b]);
                    let p = pa + (pb - pa) * t;
                    mesh.vertices.push([p.x as f32, p.y as f32, p.z as f32]);
                    (mesh.vertices.len() - 1) as u32
                });
                edge_vertex[e] = id;
            }
            for tri in TRIANGLE_TABLE[cube].chunks(3) {
                if tri[0] < 0 {
                    break;
                }
                // reversed so that faces point toward free space
                let t = [
                    edge_vertex[tri[0] as usize],
                    edge_vertex[tri[2] as usize],
                    edge_vertex[tri[1] as usize],
                ];
                if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                    mesh.triangles.push(t);
                }
            }
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::tsdf::TsdfConfig;
    use nalgebra::Vector3;

    #[test]
    fn tables_agree_with_sign_changes() {
        for cube in 0..256usize {
            let mut expect = 0u16;
            for (e, &[a, b]) in EDGES.iter().enumerate() {
                if ((cube >> a) & 1) != ((cube >> b) & 1) {
                    expect |= 1 << e;
                }
            }
            assert_eq!(EDGE_TABLE[cube], expect, "case {cube}");
            let mut used = 0u16;
            let row = &TRIANGLE_TABLE[cube];
            let n = row.iter().position(|&x| x < 0).unwrap_or(16);
            assert_eq!(n % 3, 0);
            for &e in &row[..n] {
                used |= 1 << e;
            }
            assert_eq!(used, expect, "case {cube}");
        }
    }

    fn sphere_volume(r: f64) -> TsdfVolume {
        let mut v = TsdfVolume::new(&TsdfConfig::default()).unwrap();
        let c = Vector3::new(0.1, -0.05, 1.0);
        let e = Vector3::repeat(r + 0.3);
        v.write_sdf(c - e, c + e, |p| (p - c).norm() - r);
        v
    }

    #[test]
    fn sphere_vertices_near_surface_and_watertight() {
        let r = 0.5;
        let v = sphere_volume(r);
        let m = extract_mesh(&v);
        assert!(m.triangles.len() > 500);
        let c = Vector3::new(0.1, -0.05, 1.0);
        let max_err = m
            .vertices
            .iter()
            .map(|p| ((Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64) - c).norm() - r).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.5 * v.voxel_size, "max error {max_err}");

        let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &m.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&n| n == 2));

        // winding puts normals on the positive (free-space) side
        let f = |i: u32| {
            let p = m.vertices[i as usize];
            Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64)
        };
        for t in &m.triangles {
            let (a, b, cc) = (f(t[0]), f(t[1]), f(t[2]));
            let n = (b - a).cross(&(cc - a));
            assert!(n.dot(&((a + b + cc) / 3.0 - c)) > 0.0);
        }
    }

    #[test]
    fn plane_vertices_exact() {
        let mut v = TsdfVolume::new(&TsdfConfig::default()).unwrap();
        let z0 = 0.53;
        v.write_sdf(Vector3::repeat(-0.3), Vector3::new(0.3, 0.3, 1.0), |p| z0 - p.z);
        let m = extract_mesh(&v);
        assert!(!m.triangles.is_empty());
        for p in &m.vertices {
            assert!((p[2] as f64 - z0).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn all_positive_volume_is_empty() {
        let mut v = TsdfVolume::new(&TsdfConfig::default()).unwrap();
        v.write_sdf(Vector3::zeros(), Vector3::repeat(1.0), |_| 1.0);
        let m = extract_mesh(&v);
        assert!(m.vertices.is_empty() && m.triangles.is_empty());
    }

    #[test]
    fn unobserved_corners_block_extraction() {
        let mut v = TsdfVolume::new(&TsdfConfig::default()).unwrap();
        v.set_voxel([0, 0, 0], -0.5, 1.0);
        for c in &CORNERS[1..] {
            v.set_voxel(*c, 0.5, 1.0);
        }
        assert_eq!(extract_mesh(&v).triangles.len(), 1);
        v.set_voxel([1, 1, 1], 0.5, 0.0);
        assert!(extract_mesh(&v).triangles.is_empty());
    }

    #[test]
    fn extraction_is_deterministic() {
        let a = extract_mesh(&sphere_volume(0.3));
        let b = extract_mesh(&sphere_volume(0.3).clone());
        assert_eq!(a, b);
    }
}
