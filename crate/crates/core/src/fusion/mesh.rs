//! Triangle meshes, surface sampling and mesh-to-mesh metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kdtree::KdTree;
use crate::error::{MvsError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f32; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        if let Some((i, t)) = self
            .triangles
            .iter()
            .enumerate()
            .find(|(_, t)| t.iter().any(|&v| v >= n))
        {
            return Err(MvsError::Data(format!(
                "triangle {i} references vertex {:?} but the mesh has {n} vertices",
                t
            )));
        }
        if let Some(i) = self
            .vertices
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(MvsError::Data(format!("vertex {i} is not finite")));
        }
        Ok(())
    }

    pub(crate) fn vertex_f64(&self, i: usize) -> [f64; 3] {
        let p = self.vertices[i];
        [p[0] as f64, p[1] as f64, p[2] as f64]
    }

    pub fn vertices_f64(&self) -> Vec<[f64; 3]> {
        (0..self.vertices.len()).map(|i| self.vertex_f64(i)).collect()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertex_f64(i as usize));
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let x = u[1] * v[2] - u[2] * v[1];
        let y = u[2] * v[0] - u[0] * v[2];
        let z = u[0] * v[1] - u[1] * v[0];
        0.5 * (x * x + y * y + z * z).sqrt()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }
}

/// `n` points drawn uniformly over the surface (triangles chosen with
/// probability proportional to area, then uniform barycentrics).
pub fn sample_surface_points(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    mesh.validate()?;
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MvsError::Data("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen::<f64>() * total;
        let t = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertex_f64(i as usize));
        let s = rng.gen::<f64>().sqrt();
        let r2 = rng.gen::<f64>();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        out.push([
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ]);
    }
    Ok(out)
}

/// Distance from each query to its nearest point in the tree.
pub fn nearest_distances(tree: &KdTree, queries: &[[f64; 3]]) -> Vec<f64> {
    queries
        .par_iter()
        .map(|q| tree.nearest(q).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshMetrics {
    /// Mean distance from ground-truth vertices to the nearest predicted vertex.
    pub accuracy: f64,
    /// Mean distance from predicted vertices to the nearest ground-truth vertex.
    pub completion: f64,
    pub chamfer: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Vertex-to-vertex accuracy, completion and their mean.
pub fn mesh_distance_metrics(pred: &TriangleMesh, gt: &TriangleMesh) -> Result<MeshMetrics> {
    pred.validate()?;
    gt.validate()?;
    if pred.vertices.is_empty() || gt.vertices.is_empty() {
        return Err(MvsError::Argument("both meshes need at least one vertex".into()));
    }
    let pv = pred.vertices_f64();
    let gv = gt.vertices_f64();
    let accuracy = mean(&nearest_distances(&KdTree::build(pv.clone()), &gv));
    let completion = mean(&nearest_distances(&KdTree::build(gv), &pv));
    Ok(MeshMetrics {
        accuracy,
        completion,
        chamfer: 0.5 * (accuracy + completion),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    /// Fraction of predicted points closer than the threshold to ground truth.
    pub precision: f64,
    /// Fraction of ground-truth points closer than the threshold to the prediction.
    pub recall: f64,
    pub fscore: f64,
    pub threshold: f64,
}

pub fn fscore_at_threshold(pred: &[[f64; 3]], gt: &[[f64; 3]], thresh: f64) -> Result<FScore> {
    if pred.is_empty() || gt.is_empty() {
        return Err(MvsError::Argument("point sets must be non-empty".into()));
    }
    if !(thresh > 0.0) {
        return Err(MvsError::Argument(format!(
            "threshold must be positive, got {thresh}"
        )));
    }
    let frac = |d: Vec<f64>| d.iter().filter(|&&x| x < thresh).count() as f64 / d.len() as f64;
    let precision = frac(nearest_distances(&KdTree::build(gt.to_vec()), pred));
    let recall = frac(nearest_distances(&KdTree::build(pred.to_vec()), gt));
    let fscore = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FScore {
        precision,
        recall,
        fscore,
        threshold: thresh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> TriangleMesh {
        // areas 0.5 and 1.5, separated along x
        TriangleMesh {
            vertices: vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [10.0, 0.0, 0.0],
                [13.0, 0.0, 0.0],
                [10.0, 1.0, 0.0],
            ],
            triangles: vec![[0, 1, 2], [3, 4, 5]],
        }
    }

    #[test]
    fn sampling_follows_area() {
        let m = two_triangles();
        let pts = sample_surface_points(&m, 40_000, 3).unwrap();
        let right = pts.iter().filter(|p| p[0] >= 10.0).count() as f64 / pts.len() as f64;
        assert!((right - 0.75).abs() < 0.01, "{right}");
        assert!(pts.iter().all(|p| p[2] == 0.0 && p[1] >= 0.0));
        assert_eq!(pts, sample_surface_points(&m, 40_000, 3).unwrap());
        assert_ne!(pts, sample_surface_points(&m, 40_000, 4).unwrap());
    }

    #[test]
    fn degenerate_sampling_errors() {
        let m = TriangleMesh {
            vertices: vec![[0.0; 3]; 3],
            triangles: vec![[0, 1, 2]],
        };
        assert!(sample_surface_points(&m, 10, 0).is_err());
        assert!(sample_surface_points(&TriangleMesh::default(), 10, 0).is_err());
    }

    #[test]
    fn identical_meshes_score_perfectly() {
        let m = two_triangles();
        let r = mesh_distance_metrics(&m, &m).unwrap();
        assert_eq!((r.accuracy, r.completion, r.chamfer), (0.0, 0.0, 0.0));
        let pts = sample_surface_points(&m, 500, 1).unwrap();
        let f = fscore_at_threshold(&pts, &pts, 0.05).unwrap();
        assert_eq!((f.precision, f.recall, f.fscore), (1.0, 1.0, 1.0));
    }

    #[test]
    fn shifted_mesh_distances() {
        let a = two_triangles();
        let mut b = a.clone();
        for v in &mut b.vertices {
            v[2] += 0.25;
        }
        let r = mesh_distance_metrics(&a, &b).unwrap();
        assert!((r.accuracy - 0.25).abs() < 1e-7);
        assert!((r.chamfer - 0.25).abs() < 1e-7);
        let pa = a.vertices_f64();
        let pb = b.vertices_f64();
        assert_eq!(fscore_at_threshold(&pa, &pb, 0.2).unwrap().fscore, 0.0);
        assert_eq!(fscore_at_threshold(&pa, &pb, 0.3).unwrap().fscore, 1.0);
        // half of the ground truth is far from the prediction
        let f = fscore_at_threshold(&pa[..3], &pa, 0.05).unwrap();
        assert_eq!((f.precision, f.recall), (1.0, 0.5));
        assert!((f.fscore - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_metrics() {
        let gt = two_triangles();
        let mut pred = gt.clone();
        pred.vertices.push([0.0, 0.0, 7.0]);
        let r = mesh_distance_metrics(&pred, &gt).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert!((r.completion - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let mut m = two_triangles();
        m.triangles.push([0, 1, 99]);
        assert!(m.validate().is_err());
        assert!(mesh_distance_metrics(&TriangleMesh::default(), &two_triangles()).is_err());
        assert!(fscore_at_threshold(&[[0.0; 3]], &[[0.0; 3]], 0.0).is_err());
    }
}
