//! Field providers: signed distance (SDF), medial field (MF) and the
//! quasi-medial distance field Q-MDF = MF − |SDF|.

mod analytic;
mod sampled;
pub mod scene;

pub use analytic::{mdf_eval, AnalyticShape, MedialDistance, EXTERIOR_MF_CAP};
pub use sampled::{sampled_mf, sampled_sdf, shrinking_ball_medial, SampledFields, MAX_BALL_ITERATIONS};

use crate::geom::{Aabb, Point3, Vector3};
use std::sync::Arc;

/// Default central-difference step in unit-box coordinates.
pub const DEFAULT_GRADIENT_STEP: f64 = 1e-4;

/// A scalar field over ℝ³.
pub trait FieldProvider: Send + Sync {
    fn eval(&self, p: &Point3) -> f64;

    fn gradient(&self, p: &Point3) -> Vector3 {
        numeric_gradient(self, p, DEFAULT_GRADIENT_STEP)
    }

    fn eval_many(&self, points: &[Point3]) -> Vec<f64> {
        points.iter().map(|p| self.eval(p)).collect()
    }
}

impl<F: Fn(&Point3) -> f64 + Send + Sync> FieldProvider for F {
    fn eval(&self, p: &Point3) -> f64 {
        self(p)
    }
}

/// Central-difference gradient with step `h`.
pub fn numeric_gradient<F: FieldProvider + ?Sized>(f: &F, p: &Point3, h: f64) -> Vector3 {
    numeric_gradient_fn(|x| f.eval(x), p, h)
}

pub fn numeric_gradient_fn(f: impl Fn(&Point3) -> f64, p: &Point3, h: f64) -> Vector3 {
    assert!(h > 0.0, "gradient step must be positive");
    let mut g = Vector3::zeros();
    for a in 0..3 {
        let mut e = Vector3::zeros();
        e[a] = h;
        g[a] = (f(&(p + e)) - f(&(p - e))) / (2.0 * h);
    }
    g
}

/// Where a bundle's fields came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Analytic(AnalyticShape),
    /// Nearest-sample SDF and shrinking-ball MF over an oriented cloud.
    Sampled {
        points: usize,
        fingerprint: String,
    },
    /// Trained network, identified by a hash of its parameters.
    Neural {
        fingerprint: String,
    },
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::Analytic(_) => "analytic",
            Provenance::Sampled { .. } => "sampled",
            Provenance::Neural { .. } => "neural",
        }
    }

    /// Stable identity string used in cache keys and manifests.
    pub fn fingerprint(&self) -> String {
        match self {
            Provenance::Analytic(s) => format!("analytic:{}", s.to_scene_line()),
            Provenance::Sampled { points, fingerprint } => format!("sampled:{points}:{fingerprint}"),
            Provenance::Neural { fingerprint } => format!("neural:{fingerprint}"),
        }
    }
}

/// A paired SDF and MF over a bounded region.
#[derive(Clone)]
pub struct FieldBundle {
    pub sdf: Arc<dyn FieldProvider>,
    pub mf: Arc<dyn FieldProvider>,
    pub provenance: Provenance,
    /// Bounding box of the represented solid.
    pub bounds: Aabb,
    /// Evaluates both fields in one pass, when cheaper than two.
    pub joint: Option<Arc<JointEval>>,
}

/// Batched `(sdf, mf)` evaluation.
pub type JointEval = dyn Fn(&[Point3]) -> Vec<(f64, f64)> + Send + Sync;

impl std::fmt::Debug for FieldBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldBundle")
            .field("provenance", &self.provenance)
            .field("bounds", &self.bounds)
            .finish()
    }
}

struct AnalyticSdf(AnalyticShape);
struct AnalyticMf(AnalyticShape);

impl FieldProvider for AnalyticSdf {
    fn eval(&self, p: &Point3) -> f64 {
        self.0.sdf(p)
    }
    fn gradient(&self, p: &Point3) -> Vector3 {
        self.0.sdf_gradient(p)
    }
}

impl FieldProvider for AnalyticMf {
    fn eval(&self, p: &Point3) -> f64 {
        self.0.mf(p)
    }
}

impl FieldBundle {
    pub fn analytic(shape: AnalyticShape) -> Self {
        FieldBundle {
            bounds: shape.bounds(),
            sdf: Arc::new(AnalyticSdf(shape.clone())),
            mf: Arc::new(AnalyticMf(shape.clone())),
            provenance: Provenance::Analytic(shape),
            joint: None,
        }
    }

    pub fn sampled(fields: SampledFields) -> Self {
        let fields = Arc::new(fields);
        FieldBundle {
            bounds: fields.cloud().bounds(),
            provenance: Provenance::Sampled {
                points: fields.cloud().len(),
                fingerprint: fields.fingerprint(),
            },
            sdf: Arc::new(sampled::SampledSdf(fields.clone())),
            mf: Arc::new(sampled::SampledMf(fields)),
            joint: None,
        }
    }

    /// `(sdf, mf)` at every point.
    pub fn eval_pairs(&self, points: &[Point3]) -> Vec<(f64, f64)> {
        match &self.joint {
            Some(j) => j(points),
            None => self.sdf.eval_many(points).into_iter().zip(self.mf.eval_many(points)).collect(),
        }
    }

    pub fn qmdf(&self, p: &Point3) -> f64 {
        qmdf_eval(self, p)
    }

    /// The Q-MDF as a standalone provider.
    pub fn qmdf_field(&self) -> Qmdf {
        Qmdf(self.clone())
    }

    pub fn analytic_shape(&self) -> Option<&AnalyticShape> {
        match &self.provenance {
            Provenance::Analytic(s) => Some(s),
            _ => None,
        }
    }
}

/// `mf(p) − |sdf(p)|`.
pub fn qmdf_eval(bundle: &FieldBundle, p: &Point3) -> f64 {
    bundle.mf.eval(p) - bundle.sdf.eval(p).abs()
}

pub struct Qmdf(FieldBundle);

impl FieldProvider for Qmdf {
    fn eval(&self, p: &Point3) -> f64 {
        qmdf_eval(&self.0, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> Aabb {
        Aabb {
            min: Point3::new(-0.5, -0.5, -0.5),
            max: Point3::new(0.5, 0.5, 0.5),
        }
    }

    fn shapes() -> Vec<AnalyticShape> {
        vec![
            AnalyticShape::sphere(Point3::new(0.05, 0.0, -0.02), 0.4).unwrap(),
            AnalyticShape::torus(Point3::origin(), Vector3::new(0.2, 0.1, 1.0), 0.3, 0.1).unwrap(),
            AnalyticShape::capsule(Point3::new(-0.3, 0.0, 0.0), Point3::new(0.2, 0.1, 0.1), 0.15).unwrap(),
            AnalyticShape::cuboid(Point3::origin(), Vector3::new(0.4, 0.25, 0.15)).unwrap(),
        ]
    }

    #[test]
    fn qmdf_examples() {
        let s = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 1.0).unwrap());
        assert!((qmdf_eval(&s, &Point3::new(0.3, 0.0, 0.0)) - 0.3).abs() < 1e-15);
        let t = FieldBundle::analytic(AnalyticShape::torus(Point3::origin(), Vector3::z(), 1.0, 0.3).unwrap());
        assert!(qmdf_eval(&t, &Point3::new(0.0, 1.0, 0.0)).abs() < 1e-15);
        assert!((qmdf_eval(&t, &Point3::new(1.0, 0.0, 0.1)) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn numeric_gradient_examples() {
        let s = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 1.0).unwrap());
        let g = numeric_gradient(s.sdf.as_ref(), &Point3::new(0.5, 0.0, 0.0), 1e-4);
        assert!((g - Vector3::x()).norm() < 1e-8);
        let c = |_: &Point3| 1.0;
        assert_eq!(numeric_gradient(&c, &Point3::origin(), 1e-4), Vector3::zeros());
    }

    #[test]
    fn ball_identity() {
        let s = FieldBundle::analytic(AnalyticShape::sphere(Point3::new(0.1, 0.0, 0.0), 0.4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let p = Point3::new(0.1, 0.0, 0.0) + crate::geom::random_unit(&mut rng) * 0.39 * rand::Rng::gen::<f64>(&mut rng);
            assert!((s.qmdf(&p) - (p - Point3::new(0.1, 0.0, 0.0)).norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn mf_dominates_abs_sdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for shape in shapes() {
            for _ in 0..10_000 {
                let p = crate::geom::random_in_box(&mut rng, &unit_box());
                assert!(shape.mf(&p) >= shape.sdf(&p).abs() - 1e-9, "{} at {p:?}", shape.kind());
            }
        }
    }

    #[test]
    fn eikonal_and_orthogonality_off_medial_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for shape in shapes() {
            let bundle = FieldBundle::analytic(shape.clone());
            let medial = MedialDistance::new(&shape).unwrap();
            let mut checked = 0;
            while checked < 2000 {
                let p = crate::geom::random_in_box(&mut rng, &unit_box());
                if shape.sdf(&p).abs() < 0.02 || medial.eval(&p) < 0.02 + medial.tolerance() {
                    continue;
                }
                let gs = numeric_gradient(bundle.sdf.as_ref(), &p, 1e-5);
                if shape.sdf(&p) < 0.0 {
                    assert!((gs.norm() - 1.0).abs() < 1e-3, "{} eikonal at {p:?}", shape.kind());
                }
                let gm = numeric_gradient(bundle.mf.as_ref(), &p, 1e-5);
                let dot = if gm.norm() < 1e-9 {
                    0.0
                } else {
                    gs.normalize().dot(&gm.normalize())
                };
                assert!(dot.abs() < 1e-3, "{} ortho {dot} at {p:?}", shape.kind());
                checked += 1;
            }
        }
    }

    #[test]
    fn qmdf_vanishes_on_medial_axis() {
        for shape in shapes() {
            for p in shape.medial_axis_samples(0.05) {
                assert!(shape.qmdf(&p).abs() < 1e-9, "{}", shape.kind());
            }
        }
    }
}
