//! Sharp-feature consolidation: membrane rims near the surface are marched
//! to the closest sharp edge or corner of the input cloud and snapped there
//! with a quadric error metric. The points feed back into field fitting.

use crate::error::{Error, Result};
use crate::fields::FieldBundle;
use crate::geom::{NNIndex, Point3, PointCloud, TriangleMesh, Vector3};
use crate::shrink::MedialMembrane;
use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::path::Path;

/// Default band below 2π within which an edge counts as a fold.
pub const DEFAULT_ANGLE_BAND: f64 = 0.35;
pub const MARCH_TOLERANCE: f64 = 1e-5;
pub const MAX_MARCH_STEPS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub vertices: Vec<usize>,
    pub closed: bool,
}

/// Fold edges of a membrane and the chains they form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryCurve {
    pub edges: Vec<[usize; 2]>,
    pub chains: Vec<Chain>,
}

impl BoundaryCurve {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.edges.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Chain point sequences of a membrane.
    pub fn polylines(&self, mesh: &TriangleMesh) -> Vec<(Vec<Point3>, bool)> {
        self.chains
            .iter()
            .map(|c| (c.vertices.iter().map(|&v| mesh.vertices()[v]).collect(), c.closed))
            .collect()
    }
}

/// Dihedral angle of an interior edge measured so that a flat
/// continuation is π and a complete fold is 2π.
pub fn dihedral_angle(mesh: &TriangleMesh, edge: usize) -> Option<f64> {
    let faces = &mesh.topology().edge_faces[edge];
    if faces.len() != 2 {
        return None;
    }
    let a = mesh.face_normal(faces[0])?;
    let b = mesh.face_normal(faces[1])?;
    Some(std::f64::consts::PI + a.dot(&b).clamp(-1.0, 1.0).acos())
}

/// Edges with dihedral angle at least `2π − angle_band`, ordered into chains.
pub fn detect_boundary(mesh: &TriangleMesh, angle_band: f64) -> BoundaryCurve {
    let limit = 2.0 * std::f64::consts::PI - angle_band;
    let topo = mesh.topology();
    let edges: Vec<[usize; 2]> = (0..topo.edges.len())
        .filter(|&e| dihedral_angle(mesh, e).is_some_and(|a| a >= limit))
        .map(|e| topo.edges[e])
        .collect();
    let chains = assemble_chains(mesh.vertices().len(), &edges);
    BoundaryCurve { edges, chains }
}

/// Orders edges into maximal chains. Chains start at vertices whose edge
/// count is not two; the remaining edges form closed loops.
pub fn assemble_chains(vertex_count: usize, edges: &[[usize; 2]]) -> Vec<Chain> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vertex_count];
    for (i, e) in edges.iter().enumerate() {
        adj[e[0]].push((e[1], i));
        adj[e[1]].push((e[0], i));
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    let mut used = vec![false; edges.len()];
    let mut chains = Vec::new();
    let walk = |start: usize, used: &mut Vec<bool>| -> Vec<usize> {
        let mut seq = vec![start];
        let mut at = start;
        loop {
            let next = adj[at].iter().find(|(_, e)| !used[*e]).copied();
            let Some((v, e)) = next else { break };
            used[e] = true;
            seq.push(v);
            at = v;
            if adj[at].len() != 2 {
                break;
            }
        }
        seq
    };
    let mut starts: Vec<usize> = (0..vertex_count).filter(|&v| !adj[v].is_empty() && adj[v].len() != 2).collect();
    starts.sort_unstable();
    for s in starts {
        while adj[s].iter().any(|(_, e)| !used[*e]) {
            let seq = walk(s, &mut used);
            chains.push(Chain {
                vertices: seq,
                closed: false,
            });
        }
    }
    for v in 0..vertex_count {
        if adj[v].iter().any(|(_, e)| !used[*e]) {
            let mut seq = walk(v, &mut used);
            let closed = seq.len() > 2 && seq.last() == Some(&v);
            if closed {
                seq.pop();
            }
            chains.push(Chain { vertices: seq, closed });
        }
    }
    chains
}

/// Outward normals of the two sheets meeting at `v`, or `None` when the
/// incident faces do not split into two opposite groups.
pub fn sheet_normals(mesh: &TriangleMesh, v: usize) -> Option<(Vector3, Vector3)> {
    let faces = mesh.topology().vertex_faces(v);
    let normals: Vec<(Vector3, f64)> = faces
        .iter()
        .filter_map(|&f| mesh.face_normal(f).map(|n| (n, mesh.face_area(f))))
        .collect();
    let reference = normals.first()?.0;
    let (mut a, mut b) = (Vector3::zeros(), Vector3::zeros());
    for (n, area) in &normals {
        if n.dot(&reference) >= 0.0 {
            a += n * *area;
        } else {
            b += n * *area;
        }
    }
    if a.norm() < 1e-300 || b.norm() < 1e-300 {
        return None;
    }
    Some((a.normalize(), b.normalize()))
}

/// SDF gradients just off the two sheets at `v`, `delta` along each sheet's
/// outward normal.
pub fn bilateral_gradients(mesh: &TriangleMesh, v: usize, bundle: &FieldBundle, delta: f64) -> Option<(Vector3, Vector3)> {
    let (na, nb) = sheet_normals(mesh, v)?;
    let p = mesh.vertices()[v];
    Some((bundle.sdf.gradient(&(p + na * delta)), bundle.sdf.gradient(&(p + nb * delta))))
}

/// Moves `start` along `dir` by the current distance to the cloud until
/// that distance stops decreasing.
pub fn march_to_feature(start: &Point3, dir: &Vector3, index: &NNIndex) -> Result<Point3> {
    let n = dir.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::invalid("marching direction must be nonzero"));
    }
    let dir = dir / n;
    let mut p = *start;
    let mut d = index.nearest(&p).1;
    for _ in 0..MAX_MARCH_STEPS {
        if d < MARCH_TOLERANCE {
            break;
        }
        let q = p + dir * d;
        let dq = index.nearest(&q).1;
        if dq > d {
            break;
        }
        p = q;
        d = dq;
    }
    Ok(p)
}

/// `Σ (nᵢ·(x − qᵢ))²`.
pub fn quadric_error(x: &Point3, points: &[Point3], normals: &[Vector3]) -> f64 {
    points.iter().zip(normals).map(|(q, n)| n.dot(&(x - q)).powi(2)).sum()
}

/// Minimizer of the quadric of `points`/`normals` closest to `p`.
/// Eigenvalues below `clamp·σ_max` are treated as zero.
pub fn qem_minimizer(p: &Point3, points: &[Point3], normals: &[Vector3], clamp: f64) -> Point3 {
    let mut a = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (q, n) in points.iter().zip(normals) {
        let nn = n * n.transpose();
        a += nn;
        rhs += nn * q.coords;
    }
    let eig = SymmetricEigen::new(a);
    let smax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if smax == 0.0 {
        return *p;
    }
    let r = rhs - a * p.coords;
    let mut x = p.coords;
    for i in 0..3 {
        let s = eig.eigenvalues[i];
        if s > clamp * smax {
            let u = eig.eigenvectors.column(i);
            x += u * (u.dot(&r) / s);
        }
    }
    Point3::from(x)
}

/// Snaps `p` with the quadric of its `k` nearest oriented cloud samples.
pub fn qem_snap(p: &Point3, cloud: &PointCloud, index: &NNIndex, k: usize, clamp: f64) -> Result<Point3> {
    let normals = cloud.normals()?;
    if k > cloud.len() {
        return Err(Error::invalid(format!("k = {k} exceeds the cloud size {}", cloud.len())));
    }
    if k < 3 {
        return Err(Error::invalid("QEM needs at least 3 neighbours"));
    }
    let nb = index.knn(p, k);
    let pts: Vec<Point3> = nb.iter().map(|&(i, _)| cloud.points[i]).collect();
    let ns: Vec<Vector3> = nb.iter().map(|&(i, _)| normals[i]).collect();
    Ok(qem_minimizer(p, &pts, &ns, clamp))
}

/// Feature points with their originating boundary samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeaturePointSet {
    pub points: Vec<Point3>,
    pub sources: Vec<Point3>,
    /// Quadric error at each point.
    pub residuals: Vec<f64>,
}

impl FeaturePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adds the points of `other` farther than `radius` from every kept
    /// point, in order. Returns how many were added.
    pub fn merge(&mut self, other: &FeaturePointSet, radius: f64) -> usize {
        let mut added = 0;
        for i in 0..other.len() {
            let p = other.points[i];
            if self.points.iter().all(|q| (q - p).norm() >= radius) {
                self.points.push(p);
                self.sources.push(other.sources[i]);
                self.residuals.push(other.residuals[i]);
                added += 1;
            }
        }
        added
    }

    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        for p in &self.points {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        self.write(&mut out).expect("write to memory");
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads `x y z` rows; sources are set to the points and residuals to 0.
    pub fn read(r: impl BufRead, path: &Path) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .ok()
                .filter(|v: &Vec<f64>| v.len() == 3 && v.iter().all(|x| x.is_finite()))
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: "expected three finite numbers".into(),
                })?;
            points.push(Point3::new(v[0], v[1], v[2]));
        }
        Ok(FeaturePointSet {
            sources: points.clone(),
            residuals: vec![0.0; points.len()],
            points,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f), path)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    pub angle_band: f64,
    /// Grid cell size of the extraction that produced the membrane.
    pub cell_size: f64,
    /// Boundary vertices qualify when both |sdf| and mf are below this many cells.
    pub candidate_cells: f64,
    /// Sheet offset for the bilateral gradients, in cells.
    pub offset_cells: f64,
    pub qem_neighbors: usize,
    pub singular_clamp: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            angle_band: DEFAULT_ANGLE_BAND,
            cell_size: 1.0 / 255.0,
            candidate_cells: 3.0,
            offset_cells: 2.0,
            qem_neighbors: 12,
            singular_clamp: 1e-3,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.angle_band,
            self.cell_size,
            self.candidate_cells,
            self.offset_cells,
            self.singular_clamp,
        ];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.qem_neighbors < 3 {
            return Err(Error::invalid("feature settings must be positive, with at least 3 QEM neighbours"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConsolidationLog {
    pub boundary_edges: usize,
    pub candidate_vertices: usize,
    pub samples: usize,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

struct Sample {
    point: Point3,
    vertex: usize,
}

/// Points spaced `spacing` apart along every candidate segment of the chains.
fn boundary_samples(mesh: &TriangleMesh, curve: &BoundaryCurve, keep: &[bool], spacing: f64) -> Vec<Sample> {
    let mut out = Vec::new();
    for c in &curve.chains {
        let n = c.vertices.len();
        let segs = if c.closed { n } else { n.saturating_sub(1) };
        for s in 0..segs {
            let (a, b) = (c.vertices[s], c.vertices[(s + 1) % n]);
            if !(keep[a] && keep[b]) {
                continue;
            }
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let len = (pb - pa).norm();
            let count = ((len / spacing).ceil() as usize).max(1);
            for i in 0..count {
                let t = i as f64 / count as f64;
                out.push(Sample {
                    point: pa + (pb - pa) * t,
                    vertex: if t <= 0.5 { a } else { b },
                });
            }
        }
    }
    out
}

/// Feature points for `membrane`: rim detection, candidate filtering by
/// field values, uniform rim sampling, marching, snapping and merging.
pub fn consolidate(
    membrane: &MedialMembrane,
    bundle: &FieldBundle,
    cloud: &PointCloud,
    config: &FeatureConfig,
) -> Result<(FeaturePointSet, ConsolidationLog)> {
    config.validate()?;
    cloud.normals()?;
    let mesh = &membrane.mesh;
    let index = NNIndex::build(&cloud.points)?;
    let mut log = ConsolidationLog::default();
    let curve = detect_boundary(mesh, config.angle_band);
    log.boundary_edges = curve.edges.len();
    if curve.is_empty() {
        return Ok((FeaturePointSet::default(), log));
    }
    let limit = config.candidate_cells * config.cell_size;
    let mut keep = vec![false; mesh.vertices().len()];
    for v in curve.vertices() {
        let p = mesh.vertices()[v];
        keep[v] = bundle.sdf.eval(&p).abs() <= limit && bundle.mf.eval(&p) <= limit;
    }
    log.candidate_vertices = keep.iter().filter(|k| **k).count();
    let mean_edge = curve
        .edges
        .iter()
        .map(|e| (mesh.vertices()[e[0]] - mesh.vertices()[e[1]]).norm())
        .sum::<f64>()
        / curve.edges.len() as f64;
    let samples = boundary_samples(mesh, &curve, &keep, 0.5 * mean_edge);
    log.samples = samples.len();
    let delta = config.offset_cells * config.cell_size;
    let k = config.qem_neighbors.min(cloud.len());
    let found: Vec<Option<(Point3, Point3, f64)>> = samples
        .par_iter()
        .map(|s| -> Result<Option<(Point3, Point3, f64)>> {
            let Some((g1, g2)) = bilateral_gradients(mesh, s.vertex, bundle, delta) else {
                return Ok(None);
            };
            let dir = g1 + g2;
            if dir.norm() < 1e-9 {
                return Ok(None);
            }
            let marched = march_to_feature(&s.point, &dir, &index)?;
            let snapped = qem_snap(&marched, cloud, &index, k, config.singular_clamp)?;
            // keep the snap only when it does not move away from the cloud
            let d_marched = index.nearest(&marched).1;
            let p = if index.nearest(&snapped).1 <= d_marched.max(index.nearest(&s.point).1) {
                snapped
            } else {
                marched
            };
            let nb = index.knn(&p, k);
            let pts: Vec<Point3> = nb.iter().map(|&(i, _)| cloud.points[i]).collect();
            let ns: Vec<Vector3> = nb.iter().map(|&(i, _)| cloud.normals().unwrap()[i]).collect();
            Ok(Some((p, s.point, quadric_error(&p, &pts, &ns))))
        })
        .collect::<Result<_>>()?;
    let mut raw = FeaturePointSet::default();
    for f in found {
        match f {
            Some((p, src, res)) => {
                raw.points.push(p);
                raw.sources.push(src);
                raw.residuals.push(res);
            }
            None => log.skipped += 1,
        }
    }
    if log.skipped > 0 {
        log.warnings
            .push(format!("{} rim samples had no two-sheet neighbourhood", log.skipped));
    }
    let mut out = FeaturePointSet::default();
    out.merge(&raw, 2.0 * cloud.mean_spacing(&index));
    Ok((out, log))
}

/// Points along the sharp edges of a mesh, where adjacent face normals
/// differ by at least `angle` radians, spaced about `spacing` apart.
pub fn mesh_feature_points(mesh: &TriangleMesh, angle: f64, spacing: f64) -> Result<FeaturePointSet> {
    if !(spacing > 0.0) {
        return Err(Error::invalid("feature spacing must be positive"));
    }
    let topo = mesh.topology();
    let mut raw = FeaturePointSet::default();
    for (e, faces) in topo.edge_faces.iter().enumerate() {
        if faces.len() != 2 {
            continue;
        }
        let (Some(a), Some(b)) = (mesh.face_normal(faces[0]), mesh.face_normal(faces[1])) else {
            continue;
        };
        if a.dot(&b).clamp(-1.0, 1.0).acos() < angle {
            continue;
        }
        let [i, j] = topo.edges[e];
        let (pa, pb) = (mesh.vertices()[i], mesh.vertices()[j]);
        let count = (((pb - pa).norm() / spacing).ceil() as usize).max(1);
        for s in 0..=count {
            let p = pa + (pb - pa) * (s as f64 / count as f64);
            raw.points.push(p);
            raw.sources.push(p);
            raw.residuals.push(0.0);
        }
    }
    let mut out = FeaturePointSet::default();
    out.merge(&raw, 0.5 * spacing);
    Ok(out)
}
