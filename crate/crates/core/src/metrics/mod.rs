//! Evaluation of a medial membrane: envelope reconstruction, Chamfer and
//! Hausdorff distances, Euler characteristic and boundary smoothness.

use crate::error::{Error, Result};
use crate::extract::{cubic_lattice, marching_cubes, ScalarGrid};
use crate::features::{detect_boundary, DEFAULT_ANGLE_BAND};
use crate::geom::{Aabb, NNIndex, Point3, TriangleIndex, TriangleMesh, Vector3};
use crate::shrink::MedialMembrane;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Convex hull of one, two or three spheres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MedialPrimitive {
    Sphere(Point3, f64),
    Cone([Point3; 2], [f64; 2]),
    Slab([Point3; 3], [f64; 3]),
}

impl MedialPrimitive {
    fn spheres(&self) -> (&[Point3], &[f64]) {
        match self {
            MedialPrimitive::Sphere(c, r) => (std::slice::from_ref(c), std::slice::from_ref(r)),
            MedialPrimitive::Cone(c, r) => (c, r),
            MedialPrimitive::Slab(c, r) => (c, r),
        }
    }

    /// Box of the sphere centers and the largest radius; the envelope SDF
    /// is at least the distance to the box minus that radius.
    fn core(&self) -> (Aabb, f64) {
        let (c, r) = self.spheres();
        (Aabb::from_points(c), r.iter().copied().fold(0.0, f64::max))
    }

    pub fn bounds(&self) -> Aabb {
        let (c, r) = self.spheres();
        let mut b = Aabb::empty();
        for (c, r) in c.iter().zip(r) {
            b.grow(&(c - Vector3::repeat(*r)));
            b.grow(&(c + Vector3::repeat(*r)));
        }
        b
    }
}

/// Support function of the sphere hull: `max_i n·cᵢ + rᵢ`.
fn support(c: &[Point3], r: &[f64], n: &Vector3) -> f64 {
    c.iter().zip(r).map(|(c, r)| n.dot(&c.coords) + r).fold(f64::NEG_INFINITY, f64::max)
}

/// Unit normals of planes tangent to both spheres `i`, `j` that maximize
/// `n·g` on the tangency circle.
fn pair_direction(ci: &Point3, ri: f64, cj: &Point3, rj: f64, g: &Vector3) -> Option<Vector3> {
    let e = cj - ci;
    let len = e.norm();
    if len < 1e-15 {
        return None;
    }
    let e = e / len;
    let a = (ri - rj) / len;
    if a.abs() >= 1.0 {
        return None;
    }
    let perp = g - e * g.dot(&e);
    let w = if perp.norm() > 1e-15 {
        perp.normalize()
    } else {
        e.cross(&if e.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() }).normalize()
    };
    Some(e * a + w * (1.0 - a * a).sqrt())
}

/// Normals of the two planes tangent to three spheres, spheres on the
/// negative side.
fn triple_directions(c: &[Point3; 3], r: &[f64; 3]) -> Option<[Vector3; 2]> {
    let e2 = c[1] - c[0];
    let e3 = c[2] - c[0];
    let m = e2.cross(&e3);
    if m.norm() < 1e-14 * e2.norm() * e3.norm() {
        return None;
    }
    let m = m.normalize();
    // n·e2 = r0 − r1, n·e3 = r0 − r2 with n = a·e2 + b·e3 + t·m
    let (b2, b3) = (r[0] - r[1], r[0] - r[2]);
    let (g22, g23, g33) = (e2.dot(&e2), e2.dot(&e3), e3.dot(&e3));
    let det = g22 * g33 - g23 * g23;
    let a = (b2 * g33 - b3 * g23) / det;
    let b = (b3 * g22 - b2 * g23) / det;
    let n0 = e2 * a + e3 * b;
    let s = 1.0 - n0.norm_squared();
    if s <= 0.0 {
        return None;
    }
    let t = s.sqrt();
    Some([n0 + m * t, n0 - m * t])
}

/// Signed distance to the convex hull of the primitive's spheres.
///
/// Uses `sdf(p) = max_{|n|=1} n·p − h(n)` for the hull's support function
/// `h`; the maximizer lies where one, two or three spheres are active, and
/// each case has a closed-form direction.
pub fn envelope_sdf(prim: &MedialPrimitive, p: &Point3) -> f64 {
    let (c, r) = prim.spheres();
    let mut best = f64::NEG_INFINITY;
    let mut consider = |n: Vector3| {
        best = best.max(n.dot(&p.coords) - support(c, r, &n));
    };
    for ci in c {
        let d = p - ci;
        let len = d.norm();
        consider(if len > 0.0 { d / len } else { Vector3::x() });
    }
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            for (a, b) in [(i, j), (j, i)] {
                if let Some(n) = pair_direction(&c[a], r[a], &c[b], r[b], &(p - c[a])) {
                    consider(n);
                }
            }
        }
    }
    if let MedialPrimitive::Slab(c3, r3) = prim {
        if let Some(ns) = triple_directions(c3, r3) {
            ns.into_iter().for_each(&mut consider);
        }
    }
    best
}

/// Spheres at vertices, cones on edges and slabs on faces of a membrane.
pub fn membrane_primitives(m: &MedialMembrane) -> Vec<MedialPrimitive> {
    let v = m.mesh.vertices();
    let r = &m.radii;
    let mut out: Vec<MedialPrimitive> = (0..v.len()).map(|i| MedialPrimitive::Sphere(v[i], r[i])).collect();
    for e in &m.mesh.topology().edges {
        out.push(MedialPrimitive::Cone([v[e[0]], v[e[1]]], [r[e[0]], r[e[1]]]));
    }
    for f in m.mesh.faces() {
        out.push(MedialPrimitive::Slab([v[f[0]], v[f[1]], v[f[2]]], [r[f[0]], r[f[1]], r[f[2]]]));
    }
    out
}

/// Envelope union `min` over all primitives at `p`, by brute force.
pub fn union_sdf(prims: &[MedialPrimitive], p: &Point3) -> f64 {
    prims.iter().map(|q| envelope_sdf(q, p)).fold(f64::INFINITY, f64::min)
}

/// Surface of the union of a membrane's envelopes, on a lattice with `n`
/// points along the longest axis.
///
/// Values are exact within a band of two cells around the surface; farther
/// out the field is clamped, which leaves the zero set unchanged.
pub fn reconstruct(m: &MedialMembrane, n: usize) -> Result<TriangleMesh> {
    if m.radii.iter().all(|r| *r == 0.0) {
        return Err(Error::Empty("all membrane radii are zero".into()));
    }
    let prims = membrane_primitives(m);
    let mut b = Aabb::empty();
    for p in &prims {
        b = b.union(&p.bounds());
    }
    let (res, bounds) = cubic_lattice(&b.inflated(0.1), n);
    let h = bounds.extent().x / (res[0] - 1) as f64;
    let band = 2.0 * h;
    let [nx, ny, nz] = res;
    let cell = |p: &Point3, a: usize, up: bool| -> usize {
        let t = (p[a] - bounds.min[a]) / h;
        let v = if up { t.ceil() } else { t.floor() };
        (v.max(0.0) as usize).min(res[a] - 1)
    };
    // slabs of z planes are filled independently, each primitive only
    // touching the planes its box spans
    let mut by_slab: Vec<Vec<usize>> = vec![Vec::new(); nz];
    for (i, q) in prims.iter().enumerate() {
        let qb = q.bounds().padded(band);
        for k in cell(&qb.min, 2, false)..=cell(&qb.max, 2, true) {
            by_slab[k].push(i);
        }
    }
    let mut values = vec![band as f32; nx * ny * nz];
    values.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
        let z = bounds.min.z + h * k as f64;
        // spheres first so deep interior cells are skipped for the rest
        let order = by_slab[k].iter().filter(|&&i| matches!(prims[i], MedialPrimitive::Sphere(..)));
        let rest = by_slab[k].iter().filter(|&&i| !matches!(prims[i], MedialPrimitive::Sphere(..)));
        for &i in order.chain(rest) {
            let q = &prims[i];
            let qb = q.bounds().padded(band);
            let (core, rmax) = q.core();
            for j in cell(&qb.min, 1, false)..=cell(&qb.max, 1, true) {
                for ii in cell(&qb.min, 0, false)..=cell(&qb.max, 0, true) {
                    let at = ii + nx * j;
                    if (slab[at] as f64) < -band {
                        continue;
                    }
                    let p = Point3::new(bounds.min.x + h * ii as f64, bounds.min.y + h * j as f64, z);
                    if core.distance_squared(&p).sqrt() - rmax >= slab[at] as f64 {
                        continue;
                    }
                    let v = envelope_sdf(q, &p).max(-1e30) as f32;
                    if v < slab[at] {
                        slab[at] = v;
                    }
                }
            }
        }
    });
    let grid = ScalarGrid::new(res, bounds, values)?;
    marching_cubes(&grid, 0.0)
}

/// Area-weighted samples of `mesh`.
fn surface_points(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Point3>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(mesh.sample_surface(&mut rng, n)?.0)
}

/// One-sided distances from `n` samples of `a` to the surface of `b`.
pub fn sample_distances(a: &TriangleMesh, b: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("distance between empty meshes".into()));
    }
    let index = TriangleIndex::build(b)?;
    Ok(surface_points(a, n, seed)?.par_iter().map(|p| index.distance(p)).collect())
}

/// `(cd, hd)`: half the sum of mean one-sided distances and the larger of
/// the maximum one-sided distances, from `n` surface samples per side.
pub fn chamfer_hausdorff(a: &TriangleMesh, b: &TriangleMesh, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let ab = sample_distances(a, b, n, seed)?;
    let ba = sample_distances(b, a, n, seed.wrapping_add(1))?;
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    let max = |d: &[f64]| d.iter().copied().fold(0.0, f64::max);
    Ok((0.5 * (mean(&ab) + mean(&ba)), max(&ab).max(max(&ba))))
}

/// `(cd, hd)` between a mesh and a reference point set: `n` surface samples
/// of `a` measured against the points, and every point measured against `a`.
pub fn cloud_chamfer_hausdorff(a: &TriangleMesh, points: &[Point3], n: usize, seed: u64) -> Result<(f64, f64)> {
    if n == 0 || points.is_empty() || a.is_empty() {
        return Err(Error::Empty("distance needs a nonempty mesh and point set".into()));
    }
    let index = NNIndex::build(points)?;
    let ab: Vec<f64> = surface_points(a, n, seed)?.par_iter().map(|p| index.nearest(p).1).collect();
    let tri = TriangleIndex::build(a)?;
    let ba: Vec<f64> = points.par_iter().map(|p| tri.distance(p)).collect();
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    let max = |d: &[f64]| d.iter().copied().fold(0.0, f64::max);
    Ok((0.5 * (mean(&ab) + mean(&ba)), max(&ab).max(max(&ba))))
}

/// Turning angles `θᵢ` and dual lengths `lᵢ` at the interior (or, when
/// closed, all) points of a chain.
fn turning(points: &[Point3], closed: bool) -> Result<Vec<(f64, f64)>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::invalid("a chain needs at least three points"));
    }
    let segs = if closed { n } else { n - 1 };
    for s in 0..segs {
        if (points[(s + 1) % n] - points[s]).norm() == 0.0 {
            return Err(Error::invalid(format!("duplicate consecutive points at {s}")));
        }
    }
    let range = if closed { 0..n } else { 1..n - 1 };
    Ok(range
        .map(|i| {
            let a = points[(i + n - 1) % n] - points[i];
            let b = points[(i + 1) % n] - points[i];
            let cos = a.dot(&b) / (a.norm() * b.norm());
            let theta = std::f64::consts::PI - cos.clamp(-1.0, 1.0).acos();
            (theta, 0.5 * (a.norm() + b.norm()))
        })
        .collect())
}

fn chain_length(points: &[Point3], closed: bool) -> f64 {
    let n = points.len();
    let segs = if closed { n } else { n - 1 };
    (0..segs).map(|s| (points[(s + 1) % n] - points[s]).norm()).sum()
}

/// Average curvature `(1/L) Σ lᵢ κᵢ` with discrete curvature
/// `κᵢ = θᵢ / lᵢ`, which equals total turning over length.
pub fn boundary_smoothness(points: &[Point3], closed: bool) -> Result<f64> {
    let t = turning(points, closed)?;
    let total: f64 = t.iter().map(|(theta, _)| theta).sum();
    Ok(total / chain_length(points, closed))
}

/// Average curvature over several chains: total turning over total length.
pub fn chains_smoothness(chains: &[(Vec<Point3>, bool)]) -> Result<Option<f64>> {
    let (mut turn, mut len) = (0.0, 0.0);
    for (pts, closed) in chains {
        if pts.len() < 3 {
            continue;
        }
        turn += turning(pts, *closed)?.iter().map(|(t, _)| t).sum::<f64>();
        len += chain_length(pts, *closed);
    }
    Ok((len > 0.0).then(|| turn / len))
}

/// Rim chains of a membrane as point sequences.
pub fn membrane_boundary_chains(m: &MedialMembrane) -> Vec<(Vec<Point3>, bool)> {
    detect_boundary(&m.mesh, DEFAULT_ANGLE_BAND).polylines(&m.mesh)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub model: String,
    /// Raw Chamfer distance.
    pub chamfer: f64,
    /// Raw Hausdorff distance.
    pub hausdorff: f64,
    /// Euler characteristic of the membrane.
    pub euler: i64,
    pub c_avg: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "model,cd,hd,ec,c_avg,n_samples,seed";

    /// Header and one row; distances are scaled by 10³.
    pub fn to_csv(&self) -> String {
        let c = self.c_avg.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{}\n{},{:.6},{:.6},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.model,
            self.chamfer * 1e3,
            self.hausdorff * 1e3,
            self.euler,
            c,
            self.n_samples,
            self.seed
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "model      {}", self.model).unwrap();
        writeln!(s, "CD         {:.6e}  (x1e3: {:.4})", self.chamfer, self.chamfer * 1e3).unwrap();
        writeln!(s, "HD         {:.6e}  (x1e3: {:.4})", self.hausdorff, self.hausdorff * 1e3).unwrap();
        writeln!(s, "EC         {}", self.euler).unwrap();
        match self.c_avg {
            Some(c) => writeln!(s, "C_avg      {c:.6}").unwrap(),
            None => writeln!(s, "C_avg      n/a (no boundary)").unwrap(),
        }
        writeln!(s, "samples    {} (seed {})", self.n_samples, self.seed).unwrap();
        s
    }
}

/// Reconstructs `m`, compares it with `reference` and summarizes.
pub fn evaluate(
    model: &str,
    m: &MedialMembrane,
    reference: &TriangleMesh,
    resolution: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MetricsReport> {
    let rec = reconstruct(m, resolution)?;
    let (cd, hd) = chamfer_hausdorff(&rec, reference, n_samples, seed)?;
    Ok(MetricsReport {
        model: model.to_string(),
        chamfer: cd,
        hausdorff: hd,
        euler: m.mesh.euler_characteristic(),
        c_avg: chains_smoothness(&membrane_boundary_chains(m))?,
        n_samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::primitives::icosphere;
    use crate::geom::{distance_to_segment, random_unit};
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    /// Signed distance to the hull by brute-force maximization of
    /// `n·p − h(n)` over dense directions, refined by local search.
    fn hull_distance_oracle(c: &[Point3], r: &[f64], p: &Point3) -> f64 {
        let f = |d: &Vector3| d.dot(&p.coords) - support(c, r, d);
        let n = 20_000;
        let golden = PI * (3.0 - 5f64.sqrt());
        let mut best = (f64::NEG_INFINITY, Vector3::z());
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            let d = Vector3::new(s * t.cos(), s * t.sin(), z);
            let v = f(&d);
            if v > best.0 {
                best = (v, d);
            }
        }
        // random local search copes with the ridges of the max-min
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut step = 0.05;
        while step > 1e-8 {
            let mut moved = false;
            for _ in 0..48 {
                let d = (best.1 + random_unit(&mut rng) * step).normalize();
                let v = f(&d);
                if v > best.0 {
                    best = (v, d);
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best.0
    }

    #[test]
    fn sphere_envelope_is_closed_form() {
        let s = MedialPrimitive::Sphere(Point3::origin(), 1.0);
        assert_eq!(envelope_sdf(&s, &Point3::new(2.0, 0.0, 0.0)), 1.0);
        assert_eq!(envelope_sdf(&s, &Point3::origin()), -1.0);
    }

    #[test]
    fn equal_radius_cone_is_a_capsule() {
        let a = Point3::new(-0.5, 0.1, 0.2);
        let b = Point3::new(0.7, -0.2, 0.4);
        let cone = MedialPrimitive::Cone([a, b], [0.3, 0.3]);
        let axis = (b - a).normalize();
        let side = axis.cross(&Vector3::z()).normalize();
        let mid = a + (b - a) * 0.5;
        assert!((envelope_sdf(&cone, &(mid + side * 0.4)) - 0.1).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = Point3::from(Vector3::from_fn(|_, _| rng.gen_range(-1.5..1.5)));
            let capsule = distance_to_segment(&p, &a, &b) - 0.3;
            assert!((envelope_sdf(&cone, &p) - capsule).abs() < 1e-12);
        }
    }

    #[test]
    fn contained_sphere_cone_reduces_to_the_big_sphere() {
        let cone = MedialPrimitive::Cone([Point3::origin(), Point3::new(0.1, 0.0, 0.0)], [1.0, 0.2]);
        let p = Point3::new(0.0, 3.0, 0.0);
        assert!((envelope_sdf(&cone, &p) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flat_slab_offset_along_normal() {
        let r = 0.25;
        let c = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let slab = MedialPrimitive::Slab(c, [r; 3]);
        let bary = Point3::from((c[0].coords + c[1].coords + c[2].coords) / 3.0);
        assert!((envelope_sdf(&slab, &(bary + Vector3::z() * (r + 0.2))) - 0.2).abs() < 1e-12);
        assert!((envelope_sdf(&slab, &bary) + r).abs() < 1e-12);
    }

    #[test]
    fn cone_and_slab_match_dense_direction_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut worst: f64 = 0.0;
        for trial in 0..1000 {
            let c: Vec<Point3> = (0..3)
                .map(|_| Point3::from(random_unit(&mut rng) * rng.gen_range(0.0..0.6)))
                .collect();
            let r: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..0.3)).collect();
            let prim = if trial % 2 == 0 {
                MedialPrimitive::Cone([c[0], c[1]], [r[0], r[1]])
            } else {
                MedialPrimitive::Slab([c[0], c[1], c[2]], [r[0], r[1], r[2]])
            };
            let k = if trial % 2 == 0 { 2 } else { 3 };
            let p = Point3::from(random_unit(&mut rng) * rng.gen_range(0.0..1.5));
            let v = envelope_sdf(&prim, &p);
            let oracle = hull_distance_oracle(&c[..k], &r[..k], &p);
            worst = worst.max((v - oracle).abs());
        }
        assert!(worst < 1e-3, "worst deviation {worst}");
    }

    #[test]
    fn envelope_never_exceeds_member_spheres() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let c: Vec<Point3> = (0..3).map(|_| Point3::from(random_unit(&mut rng) * 0.5)).collect();
            let r: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..0.3)).collect();
            let slab = MedialPrimitive::Slab([c[0], c[1], c[2]], [r[0], r[1], r[2]]);
            let p = Point3::from(random_unit(&mut rng) * rng.gen_range(0.0..1.0));
            let v = envelope_sdf(&slab, &p);
            for i in 0..3 {
                assert!(v <= (p - c[i]).norm() - r[i] + 1e-12);
            }
        }
    }

    #[test]
    fn single_sphere_reconstruction() {
        let mesh = TriangleMesh::new(vec![Point3::origin()], vec![]).unwrap();
        let m = MedialMembrane::new(mesh, vec![0.4], "t").unwrap();
        let rec = reconstruct(&m, 64).unwrap();
        let h = 0.88 / 63.0;
        for v in rec.vertices() {
            assert!(((v - Point3::origin()).norm() - 0.4).abs() < h);
        }
        assert_eq!(rec.euler_characteristic(), 2);
    }

    #[test]
    fn zero_radius_membrane_is_rejected() {
        let mesh = TriangleMesh::new(vec![Point3::origin()], vec![]).unwrap();
        let m = MedialMembrane::new(mesh, vec![0.0], "t").unwrap();
        assert!(matches!(reconstruct(&m, 16), Err(Error::Empty(_))));
    }

    #[test]
    fn distances_between_meshes() {
        let a = icosphere(1.0, 4);
        let (cd, hd) = chamfer_hausdorff(&a, &a, 2000, 1).unwrap();
        assert!(cd < 1e-12 && hd < 1e-12);
        let b = icosphere(1.1, 4);
        let (cd, hd) = chamfer_hausdorff(&a, &b, 5000, 2).unwrap();
        assert!((cd - 0.1).abs() < 0.005 && (hd - 0.1).abs() < 0.01, "{cd} {hd}");
        let t = Vector3::new(0.03, -0.02, 0.01);
        let moved = a.transformed(|p| p + t);
        let (_, hd) = chamfer_hausdorff(&a, &moved, 5000, 3).unwrap();
        assert!(hd <= t.norm() + 1e-9 && hd > 0.8 * t.norm(), "{hd}");
        assert!(chamfer_hausdorff(&a, &TriangleMesh::empty(), 10, 0).is_err());
    }

    fn polygon(n: usize, r: f64) -> Vec<Point3> {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                Point3::new(r * t.cos(), r * t.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn smoothness_calibration() {
        let c = boundary_smoothness(&polygon(256, 1.0), true).unwrap();
        assert!((c - 1.0).abs() < 0.01, "{c}");
        let line: Vec<Point3> = (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(boundary_smoothness(&line, false).unwrap(), 0.0);
        let square = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        assert_eq!(boundary_smoothness(&square, true).unwrap(), PI / 2.0);
        let dup = [Point3::origin(), Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(boundary_smoothness(&dup, false).is_err());
    }

    #[test]
    fn report_csv_shape() {
        let r = MetricsReport {
            model: "torus".into(),
            chamfer: 0.0012,
            hausdorff: 0.004,
            euler: 0,
            c_avg: None,
            n_samples: 100,
            seed: 7,
        };
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], MetricsReport::CSV_HEADER);
        assert_eq!(lines[1], "torus,1.200000,4.000000,0,,100,7");
        assert!(r.to_text().contains("C_avg      n/a"));
    }

    proptest! {
        #[test]
        fn smoothness_is_rigid_invariant_and_scales_inversely(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 4..12),
            angle in 0.0f64..6.0,
            shift in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
            scale in 0.2f64..5.0,
        ) {
            let chain: Vec<Point3> = pts.iter().map(|p| Point3::new(p.0, p.1, p.2)).collect();
            prop_assume!(chain.windows(2).all(|w| (w[1] - w[0]).norm() > 1e-3));
            prop_assume!((chain[0] - chain[chain.len() - 1]).norm() > 1e-3);
            let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
            let t = Vector3::new(shift.0, shift.1, shift.2);
            let moved: Vec<Point3> = chain.iter().map(|p| rot * p + t).collect();
            let scaled: Vec<Point3> = chain.iter().map(|p| Point3::from(p.coords * scale)).collect();
            for closed in [false, true] {
                let c = boundary_smoothness(&chain, closed).unwrap();
                prop_assert!((boundary_smoothness(&moved, closed).unwrap() - c).abs() < 1e-9 * (1.0 + c));
                prop_assert!((boundary_smoothness(&scaled, closed).unwrap() * scale - c).abs() < 1e-9 * (1.0 + c));
            }
        }

        #[test]
        fn chamfer_is_symmetric_and_below_hausdorff(dx in -0.2f64..0.2, s in 0.8f64..1.2) {
            let a = icosphere(1.0, 2);
            let b = icosphere(s, 2).transformed(|p| p + Vector3::new(dx, 0.0, 0.0));
            let (cd, hd) = chamfer_hausdorff(&a, &b, 300, 9).unwrap();
            prop_assert!(cd <= hd);
            // swapping the meshes swaps which side uses which seed
            let ab = sample_distances(&a, &b, 300, 9).unwrap();
            let ba = sample_distances(&b, &a, 300, 10).unwrap();
            let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
            prop_assert!((cd - 0.5 * (mean(&ab) + mean(&ba))).abs() < 1e-15);
        }
    }
}
