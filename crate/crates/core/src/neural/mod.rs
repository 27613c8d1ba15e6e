//! Joint training of a signed distance field and a medial field from an
//! unoriented point cloud with a small multi-headed perceptron.
//!
//! Gradients are computed by hand: a forward pass carries the input
//! Jacobian of every head next to the values, and a reverse pass through
//! both yields exact parameter gradients of losses that depend on `∇sdf`
//! and `∇mf`.

mod checkpoint;
mod loss;
mod mlp;

pub use checkpoint::Checkpoint;
pub use loss::{
    loss_and_gradient, loss_terms, loss_with_targets, medial_projection, projection_targets, Batch, JointField, JointSample, LossTerms,
    LossWeights,
};
pub use mlp::{Mlp, MlpOutput, HEADS};

use crate::error::{Error, Result};
use crate::fields::{FieldBundle, FieldProvider, Provenance};
use crate::geom::{random_in_box, Aabb, Point3, PointCloud, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    /// Softplus sharpness.
    pub beta: f64,
    pub steps: usize,
    /// Volume samples per step.
    pub batch_size: usize,
    /// The sample pool is split into this many fixed minibatches, visited
    /// in turn.
    pub batches_per_epoch: usize,
    pub learning_rate: f64,
    /// Learning rate reached at the last step by cosine decay.
    pub final_learning_rate: f64,
    pub seed: u64,
    pub weights: LossWeights,
    /// Share of volume samples drawn uniformly in the padded bounds; the
    /// rest are jittered surface points.
    pub uniform_fraction: f64,
    /// Jitter of near-surface samples relative to the bounds diagonal.
    pub near_surface_sigma: f64,
    /// Padding of the sampling box relative to the bounds extent.
    pub padding: f64,
    /// Sharp feature points pinned to the surface and medial axis.
    pub features: Vec<Point3>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![128; 4],
            beta: 100.0,
            steps: 20_000,
            batch_size: 4096,
            batches_per_epoch: 4,
            learning_rate: 1e-4,
            final_learning_rate: 1e-4,
            seed: 0,
            weights: LossWeights::default(),
            uniform_fraction: 0.5,
            near_surface_sigma: 0.02,
            padding: 0.1,
            features: Vec::new(),
        }
    }
}

impl TrainConfig {
    /// Smaller network and batches sized for a laptop CPU.
    pub fn desk() -> Self {
        TrainConfig {
            hidden: vec![64; 3],
            batch_size: 512,
            batches_per_epoch: 100,
            learning_rate: 5e-4,
            final_learning_rate: 1e-5,
            weights: LossWeights {
                max: 30.0,
                ..LossWeights::default()
            },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        let positive = [self.beta, self.learning_rate, self.final_learning_rate];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("softplus sharpness and learning rates must be positive"));
        }
        if !(0.0..=1.0).contains(&self.uniform_fraction) || !(self.near_surface_sigma >= 0.0) || !(self.padding >= 0.0) {
            return Err(Error::invalid("sampling parameters out of range"));
        }
        self.weights.validate()
    }

    pub fn learning_rate_at(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.learning_rate;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        let c = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        self.final_learning_rate + (self.learning_rate - self.final_learning_rate) * c
    }

    /// Flat `key=value` form, feature points excluded.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let w = &self.weights;
        let hidden: Vec<String> = self.hidden.iter().map(|n| n.to_string()).collect();
        [
            ("hidden", hidden.join(",")),
            ("beta", self.beta.to_string()),
            ("steps", self.steps.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("batches_per_epoch", self.batches_per_epoch.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("final_learning_rate", self.final_learning_rate.to_string()),
            ("seed", self.seed.to_string()),
            ("w_surface", w.surface.to_string()),
            ("w_eikonal", w.eikonal.to_string()),
            ("w_max", w.max.to_string()),
            ("w_ortho", w.ortho.to_string()),
            ("w_consis", w.consis.to_string()),
            ("w_sharp", w.sharp.to_string()),
            ("uniform_fraction", self.uniform_fraction.to_string()),
            ("near_surface_sigma", self.near_surface_sigma.to_string()),
            ("padding", self.padding.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Applies one `key=value` setting; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::invalid(format!("bad value {v:?} for {key}")))
        }
        let w = &mut self.weights;
        match key {
            "hidden" => self.hidden = value.split(',').map(|s| num::<usize>(key, s)).collect::<Result<_>>()?,
            "beta" => self.beta = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "batches_per_epoch" => self.batches_per_epoch = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "final_learning_rate" => self.final_learning_rate = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "w_surface" => w.surface = num(key, value)?,
            "w_eikonal" => w.eikonal = num(key, value)?,
            "w_max" => w.max = num(key, value)?,
            "w_ortho" => w.ortho = num(key, value)?,
            "w_consis" => w.consis = num(key, value)?,
            "w_sharp" => w.sharp = num(key, value)?,
            "uniform_fraction" => self.uniform_fraction = num(key, value)?,
            "near_surface_sigma" => self.near_surface_sigma = num(key, value)?,
            "padding" => self.padding = num(key, value)?,
            _ => return Err(Error::invalid(format!("unknown training setting {key:?}"))),
        }
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut c = TrainConfig::default();
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        Ok(c)
    }
}

/// One logged optimization step: losses before the update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub terms: LossTerms,
    pub total: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    /// Mean total loss over consecutive non-overlapping windows.
    pub fn window_means(&self, window: usize) -> Vec<f64> {
        assert!(window > 0);
        self.rows
            .chunks_exact(window)
            .map(|c| c.iter().map(|r| r.total).sum::<f64>() / window as f64)
            .collect()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "step,total,surface,eikonal,max,ortho,consis,sharp1,sharp2,lr")?;
        for r in &self.rows {
            let t = &r.terms;
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.step, r.total, t.surface, t.eikonal, t.max, t.ortho, t.consis, t.sharp1, t.sharp2, r.learning_rate
            )?;
        }
        Ok(())
    }
}

/// A trained network with the setup that produced it.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub mlp: Arc<Mlp>,
    pub config: TrainConfig,
    /// Bounds of the training cloud.
    pub bounds: Aabb,
    pub log: TrainLog,
}

impl TrainedModel {
    pub fn bundle(&self) -> FieldBundle {
        FieldBundle::neural(self.mlp.clone(), self.bounds)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            mlp: (*self.mlp).clone(),
            config: self.config.clone(),
            bounds: self.bounds,
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Fixed minibatches: a shuffled split of the cloud plus volume samples.
fn minibatches(cloud: &PointCloud, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Vec<Batch> {
    let bounds = cloud.bounds();
    let sample_box = bounds.inflated(config.padding);
    let sigma = config.near_surface_sigma * bounds.diagonal();
    let k = config.batches_per_epoch;
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(rng);
    let mut batches: Vec<Batch> = (0..k).map(|_| Batch::default()).collect();
    for (i, &idx) in order.iter().enumerate() {
        batches[i % k].surface.push(cloud.points[idx]);
    }
    let uniform = (config.batch_size as f64 * config.uniform_fraction).round() as usize;
    for b in &mut batches {
        for s in 0..config.batch_size {
            let p = if s < uniform {
                random_in_box(rng, &sample_box)
            } else {
                let q = cloud.points[rng.gen_range(0..cloud.len())];
                let d = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
                q + d * sigma
            };
            b.volume.push(p);
        }
        b.features = config.features.clone();
    }
    batches
}

/// Trains the joint network on `cloud` (normals are not used).
pub fn train_joint(cloud: &PointCloud, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    let bounds = cloud.bounds();
    let center = bounds.center();
    let radius = cloud.points.iter().map(|p| (p - center).norm()).sum::<f64>() / cloud.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mlp = Mlp::new(&config.hidden, config.beta, rng.gen(), &center, radius);
    let batches = minibatches(cloud, config, &mut rng);
    let mut adam = Adam::new(mlp.parameter_count());
    let mut log = TrainLog::default();
    for step in 0..config.steps {
        let batch = &batches[step % batches.len()];
        let (terms, grad) = loss_and_gradient(&mlp, batch, &config.weights)?;
        let total = terms.total(&config.weights);
        if !total.is_finite() || !terms.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step,
                last_good: Box::new(mlp),
            });
        }
        let lr = config.learning_rate_at(step);
        log.rows.push(LogRow {
            step,
            terms,
            total,
            learning_rate: lr,
        });
        adam.step(mlp.params_mut(), &grad, lr);
    }
    Ok(TrainedModel {
        mlp: Arc::new(mlp),
        config: config.clone(),
        bounds,
        log,
    })
}

/// Hex digest of a network's architecture and parameters.
pub fn fingerprint(mlp: &Mlp) -> String {
    let mut h = Sha256::new();
    for n in mlp.hidden() {
        h.update((*n as u64).to_le_bytes());
    }
    h.update(mlp.beta().to_le_bytes());
    for p in mlp.params() {
        h.update(p.to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

struct NeuralSdf(Arc<Mlp>);
struct NeuralMf(Arc<Mlp>);

impl FieldProvider for NeuralSdf {
    fn eval(&self, p: &Point3) -> f64 {
        self.0.eval(p).0
    }
    fn gradient(&self, p: &Point3) -> Vector3 {
        self.0.output(p).grad_sdf
    }
    fn eval_many(&self, points: &[Point3]) -> Vec<f64> {
        self.0.eval_many(points).into_iter().map(|v| v.0).collect()
    }
}

impl FieldProvider for NeuralMf {
    fn eval(&self, p: &Point3) -> f64 {
        self.0.eval(p).1
    }
    fn gradient(&self, p: &Point3) -> Vector3 {
        self.0.output(p).mf().1
    }
    fn eval_many(&self, points: &[Point3]) -> Vec<f64> {
        self.0.eval_many(points).into_iter().map(|v| v.1).collect()
    }
}

impl FieldBundle {
    /// Fields of a trained network over the bounds of its training cloud.
    pub fn neural(mlp: Arc<Mlp>, bounds: Aabb) -> Self {
        FieldBundle {
            provenance: Provenance::Neural {
                fingerprint: fingerprint(&mlp),
            },
            sdf: Arc::new(NeuralSdf(mlp.clone())),
            mf: Arc::new(NeuralMf(mlp.clone())),
            bounds,
            joint: Some(Arc::new(move |pts: &[Point3]| mlp.eval_many(pts))),
        }
    }
}

/// Settings as an ordered map, for manifests.
pub fn config_map(config: &TrainConfig) -> BTreeMap<String, String> {
    config.to_pairs().into_iter().collect()
}
