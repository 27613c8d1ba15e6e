use crate::error::{Error, Result};
use crate::geom::{distance_to_segment, primitives, Aabb, NNIndex, Point3, PointCloud, TriangleMesh, Vector3};
use rand::Rng;
use std::f64::consts::{PI, SQRT_2};

/// Medial field value reported where the exterior maximal ball is unbounded.
pub const EXTERIOR_MF_CAP: f64 = 10.0;

/// Solid shapes with closed-form distance and medial fields.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticShape {
    Sphere {
        center: Point3,
        radius: f64,
    },
    Box {
        center: Point3,
        half: Vector3,
    },
    /// `axis` is a unit vector; `major` is the core-circle radius.
    Torus {
        center: Point3,
        axis: Vector3,
        major: f64,
        minor: f64,
    },
    Capsule {
        a: Point3,
        b: Point3,
        radius: f64,
    },
}

fn frame(axis: &Vector3) -> (Vector3, Vector3) {
    let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    (u, v)
}

impl AnalyticShape {
    pub fn sphere(center: Point3, radius: f64) -> Result<Self> {
        positive(radius, "sphere radius")?;
        Ok(AnalyticShape::Sphere { center, radius })
    }

    pub fn cuboid(center: Point3, half: Vector3) -> Result<Self> {
        for a in 0..3 {
            positive(half[a], "box half-extent")?;
        }
        Ok(AnalyticShape::Box { center, half })
    }

    pub fn torus(center: Point3, axis: Vector3, major: f64, minor: f64) -> Result<Self> {
        positive(minor, "torus tube radius")?;
        if !(major > minor) {
            return Err(Error::invalid("torus needs major radius > tube radius"));
        }
        let len = axis.norm();
        if !(len > 1e-12) {
            return Err(Error::invalid("torus axis is zero"));
        }
        Ok(AnalyticShape::Torus {
            center,
            axis: axis / len,
            major,
            minor,
        })
    }

    pub fn capsule(a: Point3, b: Point3, radius: f64) -> Result<Self> {
        positive(radius, "capsule radius")?;
        Ok(AnalyticShape::Capsule { a, b, radius })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnalyticShape::Sphere { .. } => "sphere",
            AnalyticShape::Box { .. } => "box",
            AnalyticShape::Torus { .. } => "torus",
            AnalyticShape::Capsule { .. } => "capsule",
        }
    }

    /// Line in the scene-file syntax.
    pub fn to_scene_line(&self) -> String {
        match self {
            AnalyticShape::Sphere { center: c, radius } => {
                format!("sphere {} {} {} {}", c.x, c.y, c.z, radius)
            }
            AnalyticShape::Box { center: c, half: h } => {
                format!("box {} {} {} {} {} {}", c.x, c.y, c.z, h.x, h.y, h.z)
            }
            AnalyticShape::Torus {
                center: c,
                axis: a,
                major,
                minor,
            } => format!("torus {} {} {} {} {} {} {} {}", c.x, c.y, c.z, a.x, a.y, a.z, major, minor),
            AnalyticShape::Capsule { a, b, radius } => format!("capsule {} {} {} {} {} {} {}", a.x, a.y, a.z, b.x, b.y, b.z, radius),
        }
    }

    pub fn bounds(&self) -> Aabb {
        match self {
            AnalyticShape::Sphere { center, radius } => Aabb {
                min: center - Vector3::repeat(*radius),
                max: center + Vector3::repeat(*radius),
            },
            AnalyticShape::Box { center, half } => Aabb {
                min: center - half,
                max: center + half,
            },
            AnalyticShape::Torus {
                center,
                axis,
                major,
                minor,
            } => {
                // per-axis extent of a circle of radius `major` in the plane ⊥ axis
                let ext = Vector3::from_fn(|i, _| major * (1.0 - axis[i] * axis[i]).max(0.0).sqrt() + minor);
                Aabb {
                    min: center - ext,
                    max: center + ext,
                }
            }
            AnalyticShape::Capsule { a, b, radius } => {
                let mut bb = Aabb::from_points([a, b]);
                bb = bb.padded(*radius);
                bb
            }
        }
    }

    /// Image under `p ↦ scale·p + offset`.
    pub fn transformed(&self, scale: f64, offset: &Vector3) -> AnalyticShape {
        let map = |p: &Point3| Point3::from(p.coords * scale + offset);
        match self {
            AnalyticShape::Sphere { center, radius } => AnalyticShape::Sphere {
                center: map(center),
                radius: radius * scale,
            },
            AnalyticShape::Box { center, half } => AnalyticShape::Box {
                center: map(center),
                half: half * scale,
            },
            AnalyticShape::Torus {
                center,
                axis,
                major,
                minor,
            } => AnalyticShape::Torus {
                center: map(center),
                axis: *axis,
                major: major * scale,
                minor: minor * scale,
            },
            AnalyticShape::Capsule { a, b, radius } => AnalyticShape::Capsule {
                a: map(a),
                b: map(b),
                radius: radius * scale,
            },
        }
    }

    pub fn sdf(&self, p: &Point3) -> f64 {
        match self {
            AnalyticShape::Sphere { center, radius } => (p - center).norm() - radius,
            AnalyticShape::Box { center, half } => {
                let q = (p - center).abs() - half;
                let outside = q.sup(&Vector3::zeros()).norm();
                outside + q.max().min(0.0)
            }
            AnalyticShape::Torus {
                center,
                axis,
                major,
                minor,
            } => {
                let d = p - center;
                let z = d.dot(axis);
                let rho = (d - axis * z).norm();
                ((rho - major).powi(2) + z * z).sqrt() - minor
            }
            AnalyticShape::Capsule { a, b, radius } => distance_to_segment(p, a, b) - radius,
        }
    }

    /// Closed-form SDF gradient; arbitrary unit vector where undefined.
    pub fn sdf_gradient(&self, p: &Point3) -> Vector3 {
        let unit = |v: Vector3| {
            let n = v.norm();
            if n > 0.0 {
                v / n
            } else {
                Vector3::x()
            }
        };
        match self {
            AnalyticShape::Sphere { center, .. } => unit(p - center),
            AnalyticShape::Box { center, half } => {
                let d = p - center;
                let q = d.abs() - half;
                let sign = d.map(|x| if x < 0.0 { -1.0 } else { 1.0 });
                if q.max() > 0.0 {
                    let out = q.sup(&Vector3::zeros());
                    unit(out.component_mul(&sign))
                } else {
                    let a = q.imax();
                    let mut g = Vector3::zeros();
                    g[a] = sign[a];
                    g
                }
            }
            AnalyticShape::Torus { center, axis, major, .. } => {
                let d = p - center;
                let z = d.dot(axis);
                let radial = d - axis * z;
                let rho = radial.norm();
                let dir = if rho > 0.0 { radial / rho } else { frame(axis).0 };
                let core = dir * *major;
                unit(d - core)
            }
            AnalyticShape::Capsule { a, b, .. } => {
                let ab = b - a;
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 {
                    ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                unit(p - (a + ab * t))
            }
        }
    }

    /// Closed-form medial field: radius of the maximal ball reached by
    /// moving from `p` against the normal of its closest surface point.
    pub fn mf(&self, p: &Point3) -> f64 {
        let sdf = self.sdf(p);
        match self {
            AnalyticShape::Sphere { radius, .. } | AnalyticShape::Capsule { radius, .. } => {
                if sdf <= 0.0 {
                    *radius
                } else {
                    EXTERIOR_MF_CAP
                }
            }
            AnalyticShape::Box { center, half } => {
                if sdf > 0.0 {
                    return EXTERIOR_MF_CAP;
                }
                let d = p - center;
                let room = half - d.abs();
                let a = room.imin();
                let mut mf = half[a];
                for b in 0..3 {
                    if b != a {
                        mf = mf.min(room[b]);
                    }
                }
                mf
            }
            AnalyticShape::Torus {
                center,
                axis,
                major,
                minor,
            } => {
                if sdf <= 0.0 {
                    return *minor;
                }
                // outward ray from the core circle through p; finite only if
                // it heads toward the symmetry axis
                let d = p - center;
                let z = d.dot(axis);
                let radial = d - axis * z;
                let rho = radial.norm();
                if rho == 0.0 {
                    return (major * major + z * z).sqrt() - minor;
                }
                let dir_rho = (rho - major) / (sdf + minor);
                if dir_rho >= 0.0 {
                    return EXTERIOR_MF_CAP;
                }
                (major / -dir_rho - minor).min(EXTERIOR_MF_CAP)
            }
        }
    }

    pub fn qmdf(&self, p: &Point3) -> f64 {
        self.mf(p) - self.sdf(p).abs()
    }

    /// Points on the inner medial axis, spaced by about `spacing`.
    pub fn medial_axis_samples(&self, spacing: f64) -> Vec<Point3> {
        match self {
            AnalyticShape::Sphere { center, .. } => vec![*center],
            AnalyticShape::Capsule { a, b, .. } => {
                let n = (((b - a).norm() / spacing).ceil() as usize).max(1);
                (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
            }
            AnalyticShape::Torus { center, axis, major, .. } => {
                let (u, v) = frame(axis);
                let n = ((2.0 * PI * major / spacing).ceil() as usize).max(8);
                (0..n)
                    .map(|i| {
                        let t = 2.0 * PI * i as f64 / n as f64;
                        center + (u * t.cos() + v * t.sin()) * *major
                    })
                    .collect()
            }
            AnalyticShape::Box { center, half } => box_medial_samples(center, half, spacing),
        }
    }

    /// Triangulated boundary surface.
    pub fn surface_mesh(&self, resolution: usize) -> TriangleMesh {
        let res = resolution.max(4);
        match self {
            AnalyticShape::Sphere { center, radius } => {
                let level = (res as f64 / 8.0).log2().ceil().clamp(1.0, 7.0) as u32;
                primitives::icosphere(*radius, level).transformed(|p| p + center.coords)
            }
            AnalyticShape::Box { center, half } => subdivided_box(center, half, res),
            AnalyticShape::Torus {
                center,
                axis,
                major,
                minor,
            } => {
                let (u, v) = frame(axis);
                let nv = ((res as f64 * minor / major).ceil() as usize).max(8);
                let base = primitives::torus(*major, *minor, res, nv);
                base.transformed(|p| center + u * p.x + v * p.y + axis * p.z)
            }
            AnalyticShape::Capsule { a, b, radius } => capsule_mesh(a, b, *radius, res),
        }
    }

    /// Random surface samples with outward unit normals.
    pub fn sample_surface<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> PointCloud {
        let mut points = Vec::with_capacity(count);
        let mut normals = Vec::with_capacity(count);
        match self {
            AnalyticShape::Sphere { center, radius } => {
                for _ in 0..count {
                    let n = crate::geom::random_unit(rng);
                    points.push(center + n * *radius);
                    normals.push(n);
                }
            }
            AnalyticShape::Torus {
                center,
                axis,
                major,
                minor,
            } => {
                let (u, v) = frame(axis);
                while points.len() < count {
                    // rejection on the area element (R + r cos w)
                    let t = rng.gen_range(0.0..2.0 * PI);
                    let w = rng.gen_range(0.0..2.0 * PI);
                    if rng.gen::<f64>() * (major + minor) > major + minor * w.cos() {
                        continue;
                    }
                    let radial = u * t.cos() + v * t.sin();
                    let n = radial * w.cos() + axis * w.sin();
                    points.push(center + radial * *major + n * *minor);
                    normals.push(n);
                }
            }
            AnalyticShape::Box { .. } | AnalyticShape::Capsule { .. } => {
                let mesh = self.surface_mesh(64);
                let (pts, _) = mesh.sample_surface(rng, count).expect("nonzero area");
                for p in pts {
                    // snap onto the exact surface and use the exact normal
                    let g = self.sdf_gradient(&p);
                    let q = p - g * self.sdf(&p);
                    points.push(q);
                    normals.push(self.sdf_gradient(&(q - g * 1e-9)));
                }
            }
        }
        PointCloud::new(points, Some(normals)).expect("valid samples")
    }
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive, got {v}")))
    }
}

/// Distance from `p` to the inner medial axis of an analytic shape.
pub fn mdf_eval(shape: &AnalyticShape, p: &Point3) -> Result<f64> {
    Ok(MedialDistance::new(shape)?.eval(p))
}

/// Reusable medial-axis distance for one shape; boxes precompute a dense
/// sampling of their medial patches.
pub struct MedialDistance {
    shape: AnalyticShape,
    samples: Option<(NNIndex, f64)>,
}

impl MedialDistance {
    pub fn new(shape: &AnalyticShape) -> Result<Self> {
        let samples = match shape {
            AnalyticShape::Box { center, half } => {
                let probe = 0.02 * half.max();
                let n0 = box_medial_samples(center, half, probe).len() as f64;
                let spacing = probe * (n0 / 120_000.0).sqrt();
                let pts = box_medial_samples(center, half, spacing);
                Some((NNIndex::build(&pts)?, spacing))
            }
            _ => None,
        };
        Ok(MedialDistance {
            shape: shape.clone(),
            samples,
        })
    }

    /// Sampling spacing of the box medial patches; 0 for exact shapes.
    pub fn tolerance(&self) -> f64 {
        self.samples.as_ref().map_or(0.0, |(_, s)| 2.0 * s)
    }

    pub fn eval(&self, p: &Point3) -> f64 {
        match &self.shape {
            AnalyticShape::Sphere { center, .. } => (p - center).norm(),
            AnalyticShape::Capsule { a, b, .. } => distance_to_segment(p, a, b),
            AnalyticShape::Torus { center, axis, major, .. } => {
                let d = p - center;
                let z = d.dot(axis);
                let rho = (d - axis * z).norm();
                ((rho - major).powi(2) + z * z).sqrt()
            }
            AnalyticShape::Box { .. } => {
                let (index, _) = self.samples.as_ref().expect("box samples");
                index.nearest(p).1
            }
        }
    }
}

/// Dense samples of the box medial axis: bisector patches of adjacent
/// faces, plus the mid-plane of the thinnest axis pair.
fn box_medial_samples(center: &Point3, half: &Vector3, spacing: f64) -> Vec<Point3> {
    let mut out = Vec::new();
    let steps = |len: f64, s: f64| ((len / s).ceil() as usize).max(1);
    for a in 0..3 {
        for b in (a + 1)..3 {
            let c = 3 - a - b;
            let dmax = half[a].min(half[b]);
            let nd = steps(dmax * SQRT_2, spacing);
            for sa in [-1.0, 1.0] {
                for sb in [-1.0, 1.0] {
                    for i in 0..=nd {
                        let dist = dmax * i as f64 / nd as f64;
                        let reach = half[c] - dist;
                        if reach < 0.0 {
                            continue;
                        }
                        let nc = steps(2.0 * reach, spacing);
                        for j in 0..=nc {
                            let mut p = Vector3::zeros();
                            p[a] = sa * (half[a] - dist);
                            p[b] = sb * (half[b] - dist);
                            p[c] = -reach + 2.0 * reach * j as f64 / nc as f64;
                            out.push(center + p);
                        }
                    }
                }
            }
        }
    }
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let (wb, wc) = (half[b] - half[a], half[c] - half[a]);
        if wb < 0.0 || wc < 0.0 {
            continue;
        }
        let (nb, nc) = (steps(2.0 * wb, spacing), steps(2.0 * wc, spacing));
        for i in 0..=nb {
            for j in 0..=nc {
                let mut p = Vector3::zeros();
                p[b] = -wb + 2.0 * wb * i as f64 / nb as f64;
                p[c] = -wc + 2.0 * wc * j as f64 / nc as f64;
                out.push(center + p);
            }
        }
    }
    out
}

fn subdivided_box(center: &Point3, half: &Vector3, res: usize) -> TriangleMesh {
    let mut verts: Vec<Point3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut lookup = std::collections::HashMap::new();
    let l = half.max();
    let n: [i64; 3] = std::array::from_fn(|i| ((res as f64 * half[i] / l).ceil() as i64).max(1));
    let mut vid = |ijk: [i64; 3], verts: &mut Vec<Point3>| -> usize {
        *lookup.entry(ijk).or_insert_with(|| {
            let p = Vector3::from_fn(|a, _| -half[a] + 2.0 * half[a] * ijk[a] as f64 / n[a] as f64);
            verts.push(center + p);
            verts.len() - 1
        })
    };
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0i64, 1] {
            for i in 0..n[u] {
                for j in 0..n[v] {
                    let corner = |di: i64, dj: i64| {
                        let mut k = [0i64; 3];
                        k[axis] = side * n[axis];
                        k[u] = i + di;
                        k[v] = j + dj;
                        k
                    };
                    let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                    let ids: Vec<usize> = q.iter().map(|k| vid(*k, &mut verts)).collect();
                    // (u, v, axis) is right-handed; flip on the negative side
                    if side == 1 {
                        faces.push([ids[0], ids[1], ids[2]]);
                        faces.push([ids[0], ids[2], ids[3]]);
                    } else {
                        faces.push([ids[0], ids[2], ids[1]]);
                        faces.push([ids[0], ids[3], ids[2]]);
                    }
                }
            }
        }
    }
    TriangleMesh::new(verts, faces).expect("valid")
}

fn capsule_mesh(a: &Point3, b: &Point3, r: f64, res: usize) -> TriangleMesh {
    let ab = b - a;
    let len = ab.norm();
    let axis = if len > 0.0 { ab / len } else { Vector3::z() };
    let (u, v) = frame(&axis);
    let nu = res;
    let nh = (res / 4).max(2);
    // profile from south pole to north pole: hemisphere, cylinder, hemisphere
    let mut rings: Vec<(f64, f64)> = Vec::new();
    for i in 1..=nh {
        let t = -PI / 2.0 + PI / 2.0 * i as f64 / nh as f64;
        rings.push((r * t.sin(), r * t.cos()));
    }
    for i in 0..=nh {
        let t = PI / 2.0 * i as f64 / nh as f64;
        rings.push((len + r * t.sin(), r * t.cos()));
    }
    rings.pop();
    let mut verts = vec![a - axis * r];
    for &(h, rad) in &rings {
        for k in 0..nu {
            let t = 2.0 * PI * k as f64 / nu as f64;
            verts.push(a + axis * h + (u * t.cos() + v * t.sin()) * rad);
        }
    }
    verts.push(b + axis * r);
    let top = verts.len() - 1;
    let ring = |i: usize, k: usize| 1 + i * nu + (k % nu);
    let mut faces = Vec::new();
    for k in 0..nu {
        faces.push([0, ring(0, k + 1), ring(0, k)]);
    }
    for i in 0..rings.len() - 1 {
        for k in 0..nu {
            faces.push([ring(i, k), ring(i, k + 1), ring(i + 1, k + 1)]);
            faces.push([ring(i, k), ring(i + 1, k + 1), ring(i + 1, k)]);
        }
    }
    let last = rings.len() - 1;
    for k in 0..nu {
        faces.push([top, ring(last, k), ring(last, k + 1)]);
    }
    TriangleMesh::new(verts, faces).expect("valid")
}
