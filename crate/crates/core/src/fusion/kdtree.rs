//! Exact nearest-neighbour search over 3-D points.

#[inline]
pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone, Copy)]
struct Node {
    point: u32,
    axis: u8,
    left: u32,
    right: u32,
}

const NIL: u32 = u32::MAX;

/// Static k-d tree. Queries return the same squared distance as a linear
/// scan would.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    root: u32,
}

impl KdTree {
    pub fn build(points: Vec<[f64; 3]>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(&points, &mut order[..], &mut nodes);
        KdTree { points, nodes, root }
    }

    fn build_rec(points: &[[f64; 3]], idx: &mut [u32], nodes: &mut Vec<Node>) -> u32 {
        if idx.is_empty() {
            return NIL;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in idx.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(points[i as usize][a]);
                hi[a] = hi[a].max(points[i as usize][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][axis].total_cmp(&points[b as usize][axis])
        });
        let id = nodes.len() as u32;
        nodes.push(Node {
            point: idx[mid],
            axis: axis as u8,
            left: NIL,
            right: NIL,
        });
        let (l, r) = idx.split_at_mut(mid);
        let left = Self::build_rec(points, l, nodes);
        let right = Self::build_rec(points, &mut r[1..], nodes);
        nodes[id as usize].left = left;
        nodes[id as usize].right = right;
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(index, squared distance)` of the closest point, None when empty.
    pub fn nearest(&self, q: &[f64; 3]) -> Option<(usize, f64)> {
        if self.root == NIL {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack = vec![self.root];
        // Each entry carries no bound; the split test is redone on pop.
        while let Some(n) = stack.pop() {
            let node = self.nodes[n as usize];
            let p = &self.points[node.point as usize];
            let d = dist2(p, q);
            if d < best.1 || (d == best.1 && (node.point as usize) < best.0) {
                best = (node.point as usize, d);
            }
            let diff = q[node.axis as usize] - p[node.axis as usize];
            let (near, far) = if diff < 0.0 {
                (node.left, node.right)
            } else {
                (node.right, node.left)
            };
            if far != NIL && diff * diff <= best.1 {
                stack.push(far);
            }
            if near != NIL {
                stack.push(near);
            }
        }
        Some(best)
    }
}
