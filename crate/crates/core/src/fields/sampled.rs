use super::FieldProvider;
use crate::error::{Error, Result};
use crate::geom::{NNIndex, Point3, PointCloud, Vector3};
use sha2::{Digest, Sha256};
use std::sync::{Arc, OnceLock};

pub const MAX_BALL_ITERATIONS: usize = 30;
const BALL_TOLERANCE: f64 = 1e-7;
const MIN_RADIUS_CHANGE: f64 = 1e-9;

/// Signed distance surrogate `sign(n_q·(p−q))·‖p−q‖` from the nearest sample.
pub fn sampled_sdf(cloud: &PointCloud, index: &NNIndex, p: &Point3) -> Result<f64> {
    let normals = cloud.normals()?;
    let (i, d) = index.nearest(p);
    Ok(signed(normals[i].dot(&(p - cloud.points[i])), d))
}

fn signed(side: f64, d: f64) -> f64 {
    if side < 0.0 {
        -d
    } else {
        d
    }
}

/// Maximal empty ball touching `q` on the side opposite to `n`.
///
/// Starts with the scene diameter and shrinks the radius to the ball
/// through `q` and the sample that violates emptiness until the ball is
/// empty. Returns `(center, radius)` with `center = q − radius·n`.
pub fn shrinking_ball_medial(cloud: &PointCloud, index: &NNIndex, q: &Point3, n: &Vector3) -> Result<(Point3, f64)> {
    let diameter = cloud.bounds().diagonal().max(1e-12);
    shrink_ball(index, q, n, diameter)
}

fn shrink_ball(index: &NNIndex, q: &Point3, n: &Vector3, initial: f64) -> Result<(Point3, f64)> {
    let n = n.normalize();
    let mut r = initial;
    for _ in 0..MAX_BALL_ITERATIONS {
        let c = q - n * r;
        // nearest sample that is not q itself
        let mut nearest = None;
        let mut k = 2;
        while nearest.is_none() && k <= index.len().max(2) {
            nearest = index.knn(&c, k).into_iter().find(|&(i, _)| (index.point(i) - q).norm() > 1e-12);
            if k >= index.len() {
                break;
            }
            k *= 4;
        }
        let Some((i, d)) = nearest else {
            return Ok((c, r));
        };
        if d >= r - BALL_TOLERANCE {
            return Ok((c, r));
        }
        let x = index.point(i);
        let toward = (q - x).dot(&n);
        if toward <= 0.0 {
            return Ok((c, r));
        }
        let next = (q - x).norm_squared() / (2.0 * toward);
        if (r - next).abs() < MIN_RADIUS_CHANGE {
            return Ok((q - n * next, next));
        }
        r = next;
    }
    Err(Error::NoConvergence {
        iterations: MAX_BALL_ITERATIONS,
        radius: r,
    })
}

/// Medial radius at `p`: the shrinking ball at the nearest sample, grown on
/// the side of `p`.
pub fn sampled_mf(cloud: &PointCloud, index: &NNIndex, p: &Point3) -> Result<f64> {
    let normals = cloud.normals()?;
    let (i, _) = index.nearest(p);
    let q = cloud.points[i];
    let n = normals[i];
    let dir = if n.dot(&(p - q)) <= 0.0 { n } else { -n };
    shrinking_ball_medial(cloud, index, &q, &dir).map(|(_, r)| r)
}

/// Oriented cloud with its index and per-sample inner/outer ball radii,
/// computed on first use.
pub struct SampledFields {
    cloud: PointCloud,
    index: NNIndex,
    diameter: f64,
    inner: Vec<OnceLock<f64>>,
    outer: Vec<OnceLock<f64>>,
}

impl SampledFields {
    pub fn new(cloud: PointCloud) -> Result<Self> {
        cloud.normals()?;
        let index = NNIndex::build(&cloud.points)?;
        let n = cloud.len();
        Ok(SampledFields {
            diameter: cloud.bounds().diagonal().max(1e-12),
            cloud,
            index,
            inner: (0..n).map(|_| OnceLock::new()).collect(),
            outer: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn index(&self) -> &NNIndex {
        &self.index
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.cloud.points {
            for c in p.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for n in self.cloud.normals.iter().flatten() {
            for c in n.iter() {
                h.update(c.to_le_bytes());
            }
        }
        format!("{:x}", h.finalize())[..16].to_string()
    }

    fn normal(&self, i: usize) -> Vector3 {
        self.cloud.normals.as_ref().expect("checked at construction")[i]
    }

    pub fn sdf(&self, p: &Point3) -> f64 {
        let (i, d) = self.index.nearest(p);
        signed(self.normal(i).dot(&(p - self.cloud.points[i])), d)
    }

    pub fn mf(&self, p: &Point3) -> f64 {
        let (i, _) = self.index.nearest(p);
        let q = self.cloud.points[i];
        let n = self.normal(i);
        let inside = n.dot(&(p - q)) <= 0.0;
        let (slot, dir) = if inside { (&self.inner[i], n) } else { (&self.outer[i], -n) };
        *slot.get_or_init(|| match shrink_ball(&self.index, &q, &dir, self.diameter) {
            Ok((_, r)) => r,
            Err(Error::NoConvergence { radius, .. }) => radius,
            Err(_) => self.diameter,
        })
    }
}

pub(super) struct SampledSdf(pub Arc<SampledFields>);
pub(super) struct SampledMf(pub Arc<SampledFields>);

impl FieldProvider for SampledSdf {
    fn eval(&self, p: &Point3) -> f64 {
        self.0.sdf(p)
    }
}

impl FieldProvider for SampledMf {
    fn eval(&self, p: &Point3) -> f64 {
        self.0.mf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::AnalyticShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plane_cloud() -> PointCloud {
        let mut pts = Vec::new();
        for i in -50..=50 {
            for j in -50..=50 {
                pts.push(Point3::new(i as f64 * 0.02, j as f64 * 0.02, 0.0));
            }
        }
        let n = pts.len();
        PointCloud::new(pts, Some(vec![Vector3::z(); n])).unwrap()
    }

    #[test]
    fn plane_sdf_sign() {
        let c = plane_cloud();
        let idx = NNIndex::build(&c.points).unwrap();
        assert!((sampled_sdf(&c, &idx, &Point3::new(0.003, 0.001, 0.5)).unwrap() - 0.5).abs() < 0.02);
        assert!((sampled_sdf(&c, &idx, &Point3::new(0.0, 0.0, -0.5)).unwrap() + 0.5).abs() < 0.02);
        assert_eq!(sampled_sdf(&c, &idx, &c.points[77]).unwrap(), 0.0);
    }

    #[test]
    fn missing_normals_rejected() {
        let c = PointCloud::new(vec![Point3::origin()], None).unwrap();
        let idx = NNIndex::build(&c.points).unwrap();
        assert!(sampled_sdf(&c, &idx, &Point3::origin()).is_err());
        assert!(sampled_mf(&c, &idx, &Point3::origin()).is_err());
        assert!(SampledFields::new(c).is_err());
    }

    #[test]
    fn two_point_ball_is_exact() {
        let q = Point3::new(0.0, 0.0, 1.0);
        let n = Vector3::z();
        let r = 0.35;
        let c = PointCloud::new(vec![q, q - n * (2.0 * r)], Some(vec![n, -n])).unwrap();
        let idx = NNIndex::build(&c.points).unwrap();
        let (center, radius) = shrinking_ball_medial(&c, &idx, &q, &n).unwrap();
        assert!((radius - r).abs() < 1e-12);
        assert!((center - (q - n * r)).norm() < 1e-12);
    }

    #[test]
    fn sphere_ball_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = AnalyticShape::sphere(Point3::origin(), 1.0).unwrap();
        let mut c = s.sample_surface(&mut rng, 10_000);
        c.points[0] = Point3::new(1.0, 0.0, 0.0);
        c.normals.as_mut().unwrap()[0] = Vector3::x();
        let idx = NNIndex::build(&c.points).unwrap();
        let spacing = c.mean_spacing(&idx);
        let (center, radius) = shrinking_ball_medial(&c, &idx, &c.points[0], &Vector3::x()).unwrap();
        assert!(center.coords.norm() < 2.0 * spacing, "{center:?}");
        assert!((radius - 1.0).abs() < 2.0 * spacing);
        let f = SampledFields::new(c).unwrap();
        let mf = f.mf(&Point3::new(0.2, 0.1, -0.3));
        assert!((mf - 1.0).abs() < 2.0 * spacing);
    }

    #[test]
    fn slab_ball_is_half_gap() {
        let mut pts = Vec::new();
        let mut ns = Vec::new();
        for i in -40..=40 {
            for j in -40..=40 {
                let (x, y) = (i as f64 * 0.025, j as f64 * 0.025);
                pts.push(Point3::new(x, y, 0.2));
                ns.push(Vector3::z());
                pts.push(Point3::new(x + 0.0125, y + 0.0125, -0.2));
                ns.push(-Vector3::z());
            }
        }
        let c = PointCloud::new(pts, Some(ns)).unwrap();
        let idx = NNIndex::build(&c.points).unwrap();
        let q = Point3::new(0.0, 0.0, 0.2);
        let (_, r) = shrinking_ball_medial(&c, &idx, &q, &Vector3::z()).unwrap();
        assert!((r - 0.2).abs() < 0.01, "{r}");
        let mf = sampled_mf(&c, &idx, &Point3::new(0.01, 0.0, 0.1)).unwrap();
        assert!((mf - 0.2).abs() < 0.01);
    }

    #[test]
    fn torus_interior_mf_is_tube_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = AnalyticShape::torus(Point3::origin(), Vector3::z(), 1.0, 0.3).unwrap();
        let c = t.sample_surface(&mut rng, 20_000);
        let f = SampledFields::new(c).unwrap();
        let spacing = f.cloud().mean_spacing(f.index());
        for p in [
            Point3::new(1.0, 0.0, 0.1),
            Point3::new(-0.9, 0.2, 0.0),
            Point3::new(0.0, 1.15, -0.1),
        ] {
            assert!((f.mf(&p) - 0.3).abs() < 3.0 * spacing, "{}", f.mf(&p));
        }
        // on a sample: tangent maximal ball is still the tube
        let q = f.cloud().points[5];
        let on = f.mf(&q);
        assert!(on >= 0.0 && (on - 0.3).abs() < 3.0 * spacing);
    }
}
