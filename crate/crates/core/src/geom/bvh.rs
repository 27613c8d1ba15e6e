use super::{closest_point_on_triangle, Aabb, Point3, TriangleMesh};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct BvhNode {
    bounds: Aabb,
    // leaf when `count > 0`: triangles `order[first..first + count]`
    first: usize,
    count: usize,
    left: usize,
    right: usize,
}

/// Bounding-volume hierarchy over the triangles of a mesh, answering exact
/// closest-point queries.
#[derive(Clone, Debug)]
pub struct TriangleIndex {
    tris: Vec<[Point3; 3]>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
}

impl TriangleIndex {
    pub fn build(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::invalid("cannot index an empty mesh"));
        }
        let tris: Vec<[Point3; 3]> = (0..mesh.faces().len()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Point3> = tris
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::new();
        build(&tris, &centroids, &mut order, 0, tris.len(), &mut nodes);
        Ok(TriangleIndex { tris, order, nodes })
    }

    /// Closest point on the mesh and its distance.
    pub fn closest(&self, p: &Point3) -> (Point3, f64) {
        let mut best_d2 = f64::INFINITY;
        let mut best = self.tris[0][0];
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds.distance_squared(p) >= best_d2 {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.first..node.first + node.count] {
                    let [a, b, c] = &self.tris[t];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d2 = (q - p).norm_squared();
                    if d2 < best_d2 {
                        best_d2 = d2;
                        best = q;
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = self.nodes[l].bounds.distance_squared(p);
                let dr = self.nodes[r].bounds.distance_squared(p);
                // visit the nearer child first
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        (best, best_d2.sqrt())
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        self.closest(p).1
    }
}

fn build(tris: &[[Point3; 3]], centroids: &[Point3], order: &mut [usize], first: usize, end: usize, nodes: &mut Vec<BvhNode>) -> usize {
    let mut bounds = Aabb::empty();
    let mut cb = Aabb::empty();
    for &t in &order[first..end] {
        for v in &tris[t] {
            bounds.grow(v);
        }
        cb.grow(&centroids[t]);
    }
    let me = nodes.len();
    nodes.push(BvhNode {
        bounds,
        first,
        count: end - first,
        left: 0,
        right: 0,
    });
    if end - first <= LEAF_SIZE {
        return me;
    }
    let ext = cb.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = first + (end - first) / 2;
    order[first..end].select_nth_unstable_by(mid - first, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    let left = build(tris, centroids, order, first, mid, nodes);
    let right = build(tris, centroids, order, mid, end, nodes);
    let node = &mut nodes[me];
    node.count = 0;
    node.left = left;
    node.right = right;
    me
}
