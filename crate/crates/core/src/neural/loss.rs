use super::mlp::{Mlp, HEADS, HEAD_MF_IN, HEAD_MF_OUT, HEAD_SDF};
use crate::error::{Error, Result};
use crate::fields::FieldBundle;
use crate::geom::{Point3, Vector3};
use nalgebra::DMatrix;

/// Sdf, medial field and their input gradients at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointSample {
    pub sdf: f64,
    pub grad_sdf: Vector3,
    pub mf: f64,
    pub grad_mf: Vector3,
}

/// Any paired sdf / medial field that the training losses can score.
pub trait JointField {
    fn sample(&self, p: &Point3) -> JointSample;
}

impl JointField for Mlp {
    fn sample(&self, p: &Point3) -> JointSample {
        let o = self.output(p);
        let (mf, grad_mf) = o.mf();
        JointSample {
            sdf: o.sdf,
            grad_sdf: o.grad_sdf,
            mf,
            grad_mf,
        }
    }
}

impl JointField for FieldBundle {
    fn sample(&self, p: &Point3) -> JointSample {
        JointSample {
            sdf: self.sdf.eval(p),
            grad_sdf: self.sdf.gradient(p),
            mf: self.mf.eval(p),
            grad_mf: self.mf.gradient(p),
        }
    }
}

/// Loss weights; the sdf term is `surface·mean sdf² + eikonal·mean (‖∇sdf‖−1)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub surface: f64,
    pub eikonal: f64,
    pub max: f64,
    pub ortho: f64,
    pub consis: f64,
    pub sharp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            surface: 1.0,
            eikonal: 0.1,
            max: 1.0,
            ortho: 0.5,
            consis: 1.0,
            sharp: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.surface, self.eikonal, self.max, self.ortho, self.consis, self.sharp];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("loss weights must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Points scored by one loss evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    /// Samples on the input surface.
    pub surface: Vec<Point3>,
    /// Samples spread over the volume around the shape.
    pub volume: Vec<Point3>,
    /// Sharp feature points.
    pub features: Vec<Point3>,
}

/// Unweighted loss components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub surface: f64,
    pub eikonal: f64,
    pub max: f64,
    pub ortho: f64,
    pub consis: f64,
    pub sharp1: f64,
    pub sharp2: f64,
}

impl LossTerms {
    /// Weighted sdf supervision.
    pub fn sdf(&self, w: &LossWeights) -> f64 {
        w.surface * self.surface + w.eikonal * self.eikonal
    }

    pub fn total(&self, w: &LossWeights) -> f64 {
        self.sdf(w) + w.max * self.max + w.ortho * self.ortho + w.consis * self.consis + w.sharp * (self.sharp1 + self.sharp2)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.surface,
            self.eikonal,
            self.max,
            self.ortho,
            self.consis,
            self.sharp1,
            self.sharp2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Projected medial point: `x` moved by `mf − |sdf|` along the sdf gradient,
/// away from the surface.
pub fn medial_projection(x: &Point3, sdf: f64, grad_sdf: &Vector3, mf: f64) -> Point3 {
    let n = grad_sdf.norm();
    if n == 0.0 || !n.is_finite() {
        return *x;
    }
    x + grad_sdf * (sdf.signum() * (mf - sdf.abs()) / n)
}

fn check(batch: &Batch) -> Result<()> {
    if batch.surface.is_empty() && batch.volume.is_empty() && batch.features.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    Ok(())
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Monte-Carlo loss components of any joint field.
pub fn loss_terms<F: JointField + ?Sized>(field: &F, batch: &Batch) -> Result<LossTerms> {
    check(batch)?;
    let mut t = LossTerms::default();
    let surf: f64 = batch.surface.iter().map(|p| field.sample(p).sdf.powi(2)).sum();
    t.surface = mean(surf, batch.surface.len());
    let (mut eik, mut max, mut ortho, mut consis) = (0.0, 0.0, 0.0, 0.0);
    for x in &batch.volume {
        let s = field.sample(x);
        eik += (s.grad_sdf.norm() - 1.0).powi(2);
        max += (s.sdf.abs() - s.mf).max(0.0).powi(2);
        ortho += s.grad_sdf.dot(&s.grad_mf).powi(2);
        let y = medial_projection(x, s.sdf, &s.grad_sdf, s.mf);
        consis += (field.sample(&y).sdf.abs() - s.mf).powi(2);
    }
    let n = batch.volume.len();
    t.eikonal = mean(eik, n);
    t.max = mean(max, n);
    t.ortho = mean(ortho, n);
    t.consis = mean(consis, n);
    for p in &batch.features {
        let s = field.sample(p);
        t.sharp1 += s.sdf.powi(2);
        t.sharp2 += s.mf.powi(2);
    }
    Ok(t)
}

/// Loss components and the gradient of the weighted total with respect to
/// the network parameters. Projected medial points are held fixed.
pub fn loss_and_gradient(mlp: &Mlp, batch: &Batch, weights: &LossWeights) -> Result<(LossTerms, Vec<f64>)> {
    let (terms, grad, _) = evaluate(mlp, batch, weights, None, true)?;
    Ok((terms, grad))
}

/// Projected medial points of the volume samples under the current network.
pub fn projection_targets(mlp: &Mlp, volume: &[Point3]) -> Vec<Point3> {
    volume
        .iter()
        .map(|x| {
            let s = mlp.sample(x);
            medial_projection(x, s.sdf, &s.grad_sdf, s.mf)
        })
        .collect()
}

/// Loss components with the projected medial points supplied by the caller.
pub fn loss_with_targets(mlp: &Mlp, batch: &Batch, weights: &LossWeights, targets: &[Point3]) -> Result<LossTerms> {
    Ok(evaluate(mlp, batch, weights, Some(targets), false)?.0)
}

fn mf_head(sdf: f64) -> usize {
    if sdf < 0.0 {
        HEAD_MF_IN
    } else {
        HEAD_MF_OUT
    }
}

fn evaluate(
    mlp: &Mlp,
    batch: &Batch,
    w: &LossWeights,
    targets: Option<&[Point3]>,
    want_grad: bool,
) -> Result<(LossTerms, Vec<f64>, Vec<Point3>)> {
    check(batch)?;
    let mut grad = if want_grad { vec![0.0; mlp.parameter_count()] } else { Vec::new() };
    let mut t = LossTerms::default();

    if !batch.surface.is_empty() {
        let n = batch.surface.len();
        let tape = mlp.forward(&batch.surface, false);
        let mut up = DMatrix::zeros(HEADS, tape.columns());
        for j in 0..n {
            let s = tape.value(HEAD_SDF, j);
            t.surface += s * s / n as f64;
            up[(HEAD_SDF, j)] = w.surface * 2.0 * s / n as f64;
        }
        if want_grad {
            mlp.backward(&tape, &up, &mut grad);
        }
    }

    let mut ys = Vec::new();
    if !batch.volume.is_empty() {
        let n = batch.volume.len();
        let inv = 1.0 / n as f64;
        let tape = mlp.forward(&batch.volume, true);
        let mut up = DMatrix::zeros(HEADS, tape.columns());
        let add_grad = |up: &mut DMatrix<f64>, head: usize, j: usize, g: Vector3| {
            for k in 0..3 {
                up[(head, n * (k + 1) + j)] += g[k];
            }
        };
        ys = match targets {
            Some(t) => {
                if t.len() != n {
                    return Err(Error::invalid("projection target count differs from volume samples"));
                }
                t.to_vec()
            }
            None => Vec::with_capacity(n),
        };
        let fill = ys.is_empty();
        for j in 0..n {
            let s = tape.value(HEAD_SDF, j);
            let gs = tape.grad(HEAD_SDF, j);
            let mh = mf_head(s);
            let m = tape.value(mh, j);
            let gm = tape.grad(mh, j);
            let gn = gs.norm();
            let e = gn - 1.0;
            t.eikonal += e * e * inv;
            if gn > 0.0 {
                add_grad(&mut up, HEAD_SDF, j, gs * (w.eikonal * 2.0 * e * inv / gn));
            }
            let r = s.abs() - m;
            if r > 0.0 {
                t.max += r * r * inv;
                up[(HEAD_SDF, j)] += w.max * 2.0 * r * s.signum() * inv;
                up[(mh, j)] -= w.max * 2.0 * r * inv;
            }
            let c = gs.dot(&gm);
            t.ortho += c * c * inv;
            add_grad(&mut up, HEAD_SDF, j, gm * (w.ortho * 2.0 * c * inv));
            add_grad(&mut up, mh, j, gs * (w.ortho * 2.0 * c * inv));
            if fill {
                ys.push(medial_projection(&batch.volume[j], s, &gs, m));
            }
        }
        let ty = mlp.forward(&ys, false);
        let mut up_y = DMatrix::zeros(HEADS, ty.columns());
        for j in 0..n {
            let s = tape.value(HEAD_SDF, j);
            let mh = mf_head(s);
            let sy = ty.value(HEAD_SDF, j);
            let d = sy.abs() - tape.value(mh, j);
            t.consis += d * d * inv;
            up_y[(HEAD_SDF, j)] = w.consis * 2.0 * d * sy.signum() * inv;
            up[(mh, j)] -= w.consis * 2.0 * d * inv;
        }
        if want_grad {
            mlp.backward(&tape, &up, &mut grad);
            mlp.backward(&ty, &up_y, &mut grad);
        }
    }

    if !batch.features.is_empty() {
        let tape = mlp.forward(&batch.features, false);
        let mut up = DMatrix::zeros(HEADS, tape.columns());
        for j in 0..batch.features.len() {
            let s = tape.value(HEAD_SDF, j);
            let mh = mf_head(s);
            let m = tape.value(mh, j);
            t.sharp1 += s * s;
            t.sharp2 += m * m;
            up[(HEAD_SDF, j)] = w.sharp * 2.0 * s;
            up[(mh, j)] = w.sharp * 2.0 * m;
        }
        if want_grad {
            mlp.backward(&tape, &up, &mut grad);
        }
    }
    Ok((t, grad, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::AnalyticShape;
    use crate::geom::{random_in_box, random_unit, Aabb};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ball_batch(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Batch {
        let surface = (0..n).map(|_| Point3::from(random_unit(rng) * radius)).collect();
        let volume = (0..n)
            .map(|_| Point3::from(random_unit(rng) * (radius * rng.gen::<f64>().cbrt() * 0.98 + 0.001)))
            .collect();
        Batch {
            surface,
            volume,
            features: Vec::new(),
        }
    }

    fn net(seed: u64) -> Mlp {
        let mut m = Mlp::new(&[12, 10], 8.0, seed, &Point3::origin(), 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in m.params_mut() {
            *v += rng.gen_range(-0.2..0.2);
        }
        m
    }

    #[test]
    fn analytic_sphere_minimizes_medial_terms() {
        let bundle = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 0.4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = loss_terms(&bundle, &ball_batch(&mut rng, 500, 0.4)).unwrap();
        assert!(t.max < 1e-6 && t.ortho < 1e-6 && t.consis < 1e-6, "{t:?}");
        assert!(t.surface < 1e-12);
        assert_eq!((t.sharp1, t.sharp2), (0.0, 0.0));
    }

    #[test]
    fn zero_medial_field_gives_mean_squared_sdf() {
        let shape = AnalyticShape::sphere(Point3::origin(), 1.0).unwrap();
        struct ZeroMf(AnalyticShape);
        impl JointField for ZeroMf {
            fn sample(&self, p: &Point3) -> JointSample {
                JointSample {
                    sdf: self.0.sdf(p),
                    grad_sdf: self.0.sdf_gradient(p),
                    mf: 0.0,
                    grad_mf: Vector3::zeros(),
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = ball_batch(&mut rng, 400, 1.0);
        let t = loss_terms(&ZeroMf(shape.clone()), &batch).unwrap();
        let expect = batch.volume.iter().map(|p| shape.sdf(p).powi(2)).sum::<f64>() / 400.0;
        assert!((t.max - expect).abs() < 1e-12);
        // uniform ball: E[(1 − ρ)²] with density 3ρ² is 1/10
        assert!((t.max - 0.1).abs() < 0.02);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let m = net(0);
        assert!(loss_terms(&m, &Batch::default()).is_err());
        assert!(loss_and_gradient(&m, &Batch::default(), &LossWeights::default()).is_err());
    }

    #[test]
    fn batched_terms_match_pointwise_terms() {
        let m = net(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut batch = ball_batch(&mut rng, 40, 0.4);
        let b = Aabb {
            min: Point3::new(-0.6, -0.6, -0.6),
            max: Point3::new(0.6, 0.6, 0.6),
        };
        batch.volume.extend((0..20).map(|_| random_in_box(&mut rng, &b)));
        batch.features = vec![Point3::new(0.4, 0.0, 0.0), Point3::new(0.0, 0.3, 0.1)];
        let a = loss_terms(&m, &batch).unwrap();
        let (b, _) = loss_and_gradient(&m, &batch, &LossWeights::default()).unwrap();
        for (x, y) in [
            (a.surface, b.surface),
            (a.eikonal, b.eikonal),
            (a.max, b.max),
            (a.ortho, b.ortho),
            (a.consis, b.consis),
            (a.sharp1, b.sharp1),
            (a.sharp2, b.sharp2),
        ] {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn no_features_means_no_sharp_loss() {
        let m = net(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (t, _) = loss_and_gradient(&m, &ball_batch(&mut rng, 10, 0.4), &LossWeights::default()).unwrap();
        assert_eq!((t.sharp1, t.sharp2), (0.0, 0.0));
    }

    #[test]
    fn projection_moves_away_from_surface() {
        let x = Point3::new(0.3, 0.0, 0.0);
        let g = Vector3::new(2.0, 0.0, 0.0);
        // inside the unit-ish ball: sdf −0.1, mf 0.4 → 0.3 deeper
        let y = medial_projection(&x, -0.1, &g, 0.4);
        assert!((y - Point3::origin()).norm() < 1e-12);
        let y = medial_projection(&x, 0.1, &g, 0.5);
        assert!((y.x - 0.7).abs() < 1e-12);
    }

    #[test]
    fn parameter_gradient_of_each_term_matches_central_differences() {
        let m = net(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut batch = ball_batch(&mut rng, 24, 0.4);
        batch.features = vec![Point3::new(0.3, 0.1, -0.1), Point3::new(-0.05, 0.2, 0.0)];
        let targets = projection_targets(&m, &batch.volume);
        let zero = LossWeights {
            surface: 0.0,
            eikonal: 0.0,
            max: 0.0,
            ortho: 0.0,
            consis: 0.0,
            sharp: 0.0,
        };
        let solos = [
            LossWeights { surface: 1.0, ..zero },
            LossWeights { eikonal: 1.0, ..zero },
            LossWeights { max: 1.0, ..zero },
            LossWeights { ortho: 1.0, ..zero },
            LossWeights { consis: 1.0, ..zero },
            LossWeights { sharp: 1.0, ..zero },
        ];
        let picks: Vec<usize> = (0..20).map(|_| rng.gen_range(0..m.parameter_count())).collect();
        for w in &solos {
            let (_, grad) = loss_and_gradient(&m, &batch, w).unwrap();
            let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1e-8);
            for &i in &picks {
                let h = 1e-6;
                let at = |d: f64| {
                    let mut q = m.clone();
                    q.params_mut()[i] += d;
                    loss_with_targets(&q, &batch, w, &targets).unwrap().total(w)
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                assert!((fd - grad[i]).abs() <= 1e-3 * scale, "{w:?} param {i}: {fd} vs {}", grad[i]);
            }
        }
    }
}
