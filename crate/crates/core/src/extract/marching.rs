use super::ScalarGrid;
use crate::error::Result;
use crate::geom::{Point3, TriangleMesh, Vector3};
use std::collections::HashMap;

/// Six tetrahedra sharing the 0–7 diagonal. Corner bits: x=1, y=2, z=4.
const TETS: [[usize; 4]; 6] = [[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7], [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]];

struct Builder<'a> {
    grid: &'a ScalarGrid,
    iso: f64,
    h: Vector3,
    weld: HashMap<(usize, usize), usize>,
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl Builder<'_> {
    fn lattice(&self, g: usize) -> (Point3, f64) {
        let [nx, ny, _] = self.grid.resolution();
        let (i, j, k) = (g % nx, (g / nx) % ny, g / (nx * ny));
        let b = self.grid.bounds();
        let p = Point3::new(
            b.min.x + self.h.x * i as f64,
            b.min.y + self.h.y * j as f64,
            b.min.z + self.h.z * k as f64,
        );
        (p, self.grid.values()[g] as f64)
    }

    fn edge_vertex(&mut self, inside: usize, outside: usize) -> usize {
        let key = (inside.min(outside), inside.max(outside));
        if let Some(&v) = self.weld.get(&key) {
            return v;
        }
        let (pa, va) = self.lattice(inside);
        let (pb, vb) = self.lattice(outside);
        let t = ((self.iso - va) / (vb - va)).clamp(0.0, 1.0);
        let id = self.vertices.len();
        self.vertices.push(pa + (pb - pa) * t);
        self.weld.insert(key, id);
        id
    }

    fn midpoint(&self, e: (usize, usize)) -> Point3 {
        let (a, _) = self.lattice(e.0);
        let (b, _) = self.lattice(e.1);
        Point3::from((a.coords + b.coords) / 2.0)
    }

    /// Emits a triangle over crossing edges, oriented so its normal points
    /// from the inside corners toward the outside ones.
    fn triangle(&mut self, edges: [(usize, usize); 3], toward: &Vector3) {
        let m: Vec<Point3> = edges.iter().map(|&e| self.midpoint(e)).collect();
        let n = (m[1] - m[0]).cross(&(m[2] - m[0]));
        let ids = edges.map(|(a, b)| self.edge_vertex(a, b));
        if n.dot(toward) >= 0.0 {
            self.faces.push(ids);
        } else {
            self.faces.push([ids[0], ids[2], ids[1]]);
        }
    }

    fn tetrahedron(&mut self, g: [usize; 4]) {
        let vals = g.map(|c| self.grid.values()[c] as f64);
        let inside: Vec<usize> = (0..4).filter(|&i| vals[i] < self.iso).map(|i| g[i]).collect();
        let outside: Vec<usize> = (0..4).filter(|&i| vals[i] >= self.iso).map(|i| g[i]).collect();
        if inside.is_empty() || outside.is_empty() {
            return;
        }
        let centroid = |ids: &[usize]| -> Vector3 { ids.iter().map(|&c| self.lattice(c).0.coords).sum::<Vector3>() / ids.len() as f64 };
        let toward = centroid(&outside) - centroid(&inside);
        match (inside.as_slice(), outside.as_slice()) {
            (&[a], &[b, c, d]) => self.triangle([(a, b), (a, c), (a, d)], &toward),
            (&[a, b, c], &[d]) => self.triangle([(a, d), (b, d), (c, d)], &toward),
            (&[a, b], &[c, d]) => {
                // crossing edges in cyclic order a-c, a-d, b-d, b-c
                self.triangle([(a, c), (a, d), (b, d)], &toward);
                self.triangle([(a, c), (b, d), (b, c)], &toward);
            }
            _ => unreachable!(),
        }
    }
}

/// Triangulates the level set `{v = iso}` of a grid.
///
/// Each cell is split into six tetrahedra along its main diagonal, which
/// keeps neighbouring cells consistent and yields a closed, oriented
/// 2-manifold wherever the level set stays inside the grid. Vertices are
/// welded per lattice edge and faces point toward increasing values.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> Result<TriangleMesh> {
    let [nx, ny, nz] = grid.resolution();
    let mut b = Builder {
        grid,
        iso,
        h: grid.spacing(),
        weld: HashMap::new(),
        vertices: Vec::new(),
        faces: Vec::new(),
    };
    let values = grid.values();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corners: [usize; 8] = std::array::from_fn(|c| grid.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)));
                let below = corners.iter().filter(|&&c| (values[c] as f64) < iso).count();
                if below == 0 || below == 8 {
                    continue;
                }
                for t in TETS {
                    b.tetrahedron(t.map(|c| corners[c]));
                }
            }
        }
    }
    TriangleMesh::new(b.vertices, b.faces)
}
