use super::{Aabb, Point3, Vector3};
use crate::error::{Error, Result};
use rand::Rng;
use std::collections::HashMap;

/// Adjacency derived from the face list. Rebuilding from the same faces
/// gives an identical table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Topology {
    /// Unique undirected edges as sorted vertex pairs, lexicographic order.
    pub edges: Vec<[usize; 2]>,
    /// Faces incident to each edge.
    pub edge_faces: Vec<Vec<usize>>,
    /// Edge ids of each face, matching `(f[0],f[1]), (f[1],f[2]), (f[2],f[0])`.
    pub face_edges: Vec<[usize; 3]>,
    ring_offsets: Vec<usize>,
    ring: Vec<usize>,
    vertex_face_offsets: Vec<usize>,
    vertex_faces: Vec<usize>,
}

impl Topology {
    pub fn build(vertex_count: usize, faces: &[[usize; 3]]) -> Self {
        let mut half: Vec<([usize; 2], usize)> = Vec::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                half.push(([a.min(b), a.max(b)], fi));
            }
        }
        half.sort_unstable();

        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_faces: Vec<Vec<usize>> = Vec::new();
        for (e, f) in &half {
            if edges.last() != Some(e) {
                edges.push(*e);
                edge_faces.push(Vec::with_capacity(2));
            }
            edge_faces.last_mut().unwrap().push(*f);
        }

        let mut face_edges = vec![[0usize; 3]; faces.len()];
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                face_edges[fi][k] = edges.binary_search(&key).expect("edge present");
            }
        }

        let mut degree = vec![0usize; vertex_count];
        for e in &edges {
            degree[e[0]] += 1;
            degree[e[1]] += 1;
        }
        let mut ring_offsets = Vec::with_capacity(vertex_count + 1);
        ring_offsets.push(0);
        for d in &degree {
            ring_offsets.push(ring_offsets.last().unwrap() + d);
        }
        let mut fill = ring_offsets.clone();
        let mut ring = vec![0usize; *ring_offsets.last().unwrap()];
        for e in &edges {
            ring[fill[e[0]]] = e[1];
            fill[e[0]] += 1;
            ring[fill[e[1]]] = e[0];
            fill[e[1]] += 1;
        }
        for v in 0..vertex_count {
            ring[ring_offsets[v]..ring_offsets[v + 1]].sort_unstable();
        }

        let mut vf_count = vec![0usize; vertex_count];
        for f in faces {
            for &v in f {
                vf_count[v] += 1;
            }
        }
        let mut vertex_face_offsets = Vec::with_capacity(vertex_count + 1);
        vertex_face_offsets.push(0);
        for c in &vf_count {
            vertex_face_offsets.push(vertex_face_offsets.last().unwrap() + c);
        }
        let mut fill = vertex_face_offsets.clone();
        let mut vertex_faces = vec![0usize; *vertex_face_offsets.last().unwrap()];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[fill[v]] = fi;
                fill[v] += 1;
            }
        }

        Topology {
            edges,
            edge_faces,
            face_edges,
            ring_offsets,
            ring,
            vertex_face_offsets,
            vertex_faces,
        }
    }

    /// One-ring neighbours N(v), sorted.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.ring[self.ring_offsets[v]..self.ring_offsets[v + 1]]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[self.vertex_face_offsets[v]..self.vertex_face_offsets[v + 1]]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&[a.min(b), a.max(b)]).ok()
    }
}

/// Indexed triangle surface with adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    topology: Topology,
}

impl Default for TriangleMesh {
    fn default() -> Self {
        TriangleMesh::empty()
    }
}

impl TriangleMesh {
    /// Validates indices and rejects faces that repeat a vertex. Zero-area
    /// faces with distinct indices are accepted.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::invalid(format!("face {i} references a vertex out of range ({n} vertices)")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::invalid(format!("face {i} is degenerate: {f:?}")));
            }
        }
        if vertices.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("mesh has non-finite vertex coordinates"));
        }
        let topology = Topology::build(n, &faces);
        Ok(TriangleMesh { vertices, faces, topology })
    }

    pub fn empty() -> Self {
        TriangleMesh {
            vertices: Vec::new(),
            faces: Vec::new(),
            topology: Topology::default(),
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Same connectivity, new positions.
    pub fn with_positions(&self, positions: Vec<Point3>) -> Result<Self> {
        if positions.len() != self.vertices.len() {
            return Err(Error::invalid(format!(
                "{} positions for {} vertices",
                positions.len(),
                self.vertices.len()
            )));
        }
        Ok(TriangleMesh {
            vertices: positions,
            faces: self.faces.clone(),
            topology: self.topology.clone(),
        })
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn triangle(&self, f: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Non-normalized face normal (twice the area).
    pub fn face_cross(&self, f: usize) -> Vector3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Option<Vector3> {
        let n = self.face_cross(f);
        let len = n.norm();
        (len > 0.0).then(|| n / len)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// V − E + F with E counted as unique undirected edges.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.topology.edges.len() as i64 + self.faces.len() as i64
    }

    /// Signed enclosed volume by the divergence theorem.
    pub fn signed_volume(&self) -> f64 {
        signed_volume(&self.vertices, &self.faces)
    }

    /// Total area of the faces around each vertex.
    pub fn adjacent_areas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vertices.len()];
        for f in 0..self.faces.len() {
            let a = self.face_area(f);
            for &v in &self.faces[f] {
                out[v] += a;
            }
        }
        out
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vector3> {
        let mut out = vec![Vector3::zeros(); self.vertices.len()];
        for f in 0..self.faces.len() {
            let n = self.face_cross(f);
            for &v in &self.faces[f] {
                out[v] += n;
            }
        }
        for n in &mut out {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        out
    }

    /// Face index lists of the connected components (faces sharing a vertex).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for f in &self.faces {
            for k in 1..3 {
                let a = find(&mut parent, f[0]);
                let b = find(&mut parent, f[k]);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            let root = find(&mut parent, f[0]);
            let slot = *groups.entry(root).or_insert_with(|| {
                out.push(Vec::new());
                out.len() - 1
            });
            out[slot].push(fi);
        }
        out
    }

    /// Mesh made of the given faces only; unreferenced vertices are dropped
    /// and the remaining ones keep their relative order.
    pub fn subset(&self, faces: &[usize]) -> TriangleMesh {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut keep: Vec<bool> = vec![false; self.vertices.len()];
        for &f in faces {
            for &v in &self.faces[f] {
                keep[v] = true;
            }
        }
        let mut vertices = Vec::new();
        for (v, k) in keep.iter().enumerate() {
            if *k {
                remap[v] = vertices.len();
                vertices.push(self.vertices[v]);
            }
        }
        let mut sorted = faces.to_vec();
        sorted.sort_unstable();
        let new_faces: Vec<[usize; 3]> = sorted
            .iter()
            .map(|&f| {
                let [a, b, c] = self.faces[f];
                [remap[a], remap[b], remap[c]]
            })
            .collect();
        TriangleMesh::new(vertices, new_faces).expect("subset of a valid mesh is valid")
    }

    /// Same surface with every face orientation reversed.
    pub fn flipped(&self) -> TriangleMesh {
        let faces = self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect();
        TriangleMesh::new(self.vertices.clone(), faces).expect("valid")
    }

    /// Disjoint union.
    pub fn merge(&self, other: &TriangleMesh) -> TriangleMesh {
        let off = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        TriangleMesh::new(vertices, faces).expect("valid")
    }

    pub fn transformed(&self, map: impl Fn(&Point3) -> Point3) -> TriangleMesh {
        let vertices = self.vertices.iter().map(map).collect();
        TriangleMesh::new(vertices, self.faces.clone()).expect("valid")
    }

    /// Generalized winding number at `p`; ≈1 inside a closed outward mesh.
    pub fn winding_number(&self, p: &Point3) -> f64 {
        let mut total = 0.0;
        for f in 0..self.faces.len() {
            let [a, b, c] = self.triangle(f);
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    pub fn contains_point(&self, p: &Point3) -> bool {
        self.winding_number(p) > 0.5
    }

    /// Area-weighted random surface samples with their face normals.
    pub fn sample_surface<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<(Vec<Point3>, Vec<Vector3>)> {
        let mut cdf = Vec::with_capacity(self.faces.len());
        let mut acc = 0.0;
        for f in 0..self.faces.len() {
            acc += self.face_area(f);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::invalid("cannot sample a mesh with zero area"));
        }
        let mut points = Vec::with_capacity(count);
        let mut normals = Vec::with_capacity(count);
        for _ in 0..count {
            let t = rng.gen::<f64>() * acc;
            let f = cdf.partition_point(|&c| c < t).min(self.faces.len() - 1);
            let [a, b, c] = self.triangle(f);
            let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            points.push(a + (b - a) * u + (c - a) * v);
            normals.push(self.face_normal(f).unwrap_or_else(Vector3::z));
        }
        Ok((points, normals))
    }
}

/// Signed volume of a face set over arbitrary positions: Σ det(v0,v1,v2)/6.
pub fn signed_volume(vertices: &[Point3], faces: &[[usize; 3]]) -> f64 {
    let mut vol = 0.0;
    for &[a, b, c] in faces {
        let (pa, pb, pc) = (vertices[a].coords, vertices[b].coords, vertices[c].coords);
        vol += pa.dot(&pb.cross(&pc));
    }
    vol / 6.0
}
