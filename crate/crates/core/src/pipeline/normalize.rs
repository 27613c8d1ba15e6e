//! Uniform scaling of inputs into the unit box centered at the origin.

use crate::error::{Error, Result};
use crate::features::FeaturePointSet;
use crate::fields::AnalyticShape;
use crate::geom::{Aabb, Point3, PointCloud, TriangleMesh};
use crate::io::Geometry;
use crate::shrink::MedialMembrane;

/// `p ↦ (p − center)·scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub center: Point3,
    pub scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization {
            center: Point3::origin(),
            scale: 1.0,
        }
    }

    /// Map taking `bounds` into `[−0.5, 0.5]³` with its longest side spanning it.
    pub fn fit(bounds: &Aabb) -> Result<Self> {
        let longest = bounds.extent().max();
        if bounds.is_empty() || !(longest > 0.0) || !longest.is_finite() {
            return Err(Error::invalid("cannot normalize input with zero extent"));
        }
        Ok(Normalization {
            center: bounds.center(),
            scale: 1.0 / longest,
        })
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from((p - self.center) * self.scale)
    }

    pub fn invert(&self, p: &Point3) -> Point3 {
        self.center + p.coords / self.scale
    }

    pub fn apply_cloud(&self, c: &PointCloud) -> PointCloud {
        PointCloud {
            points: c.points.iter().map(|p| self.apply(p)).collect(),
            normals: c.normals.clone(),
        }
    }

    pub fn apply_mesh(&self, m: &TriangleMesh) -> TriangleMesh {
        m.transformed(|p| self.apply(p))
    }

    pub fn invert_mesh(&self, m: &TriangleMesh) -> TriangleMesh {
        m.transformed(|p| self.invert(p))
    }

    pub fn apply_shape(&self, s: &AnalyticShape) -> AnalyticShape {
        s.transformed(self.scale, &(-self.center.coords * self.scale))
    }

    pub fn invert_membrane(&self, m: &MedialMembrane) -> Result<MedialMembrane> {
        MedialMembrane::new(
            self.invert_mesh(&m.mesh),
            m.radii.iter().map(|r| r / self.scale).collect(),
            m.source.clone(),
        )
    }

    pub fn invert_features(&self, f: &FeaturePointSet) -> FeaturePointSet {
        FeaturePointSet {
            points: f.points.iter().map(|p| self.invert(p)).collect(),
            sources: f.sources.iter().map(|p| self.invert(p)).collect(),
            residuals: f.residuals.iter().map(|r| r / (self.scale * self.scale)).collect(),
        }
    }
}

/// Scales and centers geometry into the unit box.
pub fn normalize(geometry: Geometry) -> Result<(Geometry, Normalization)> {
    match geometry {
        Geometry::Mesh(m) => {
            if m.vertices().is_empty() {
                return Err(Error::invalid("cannot normalize an empty mesh"));
            }
            let n = Normalization::fit(&m.bounds())?;
            Ok((Geometry::Mesh(n.apply_mesh(&m)), n))
        }
        Geometry::Cloud(c) => {
            if c.is_empty() {
                return Err(Error::invalid("cannot normalize an empty cloud"));
            }
            let n = Normalization::fit(&c.bounds())?;
            Ok((Geometry::Cloud(n.apply_cloud(&c)), n))
        }
    }
}
