use crate::geom::{Point3, Vector3};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Number of scalar heads: sdf, inside medial field, outside medial field.
pub const HEADS: usize = 3;
pub(crate) const HEAD_SDF: usize = 0;
pub(crate) const HEAD_MF_IN: usize = 1;
pub(crate) const HEAD_MF_OUT: usize = 2;

/// Shared softplus trunk with three linear heads.
///
/// Parameters are one flat vector: for every layer the column-major weight
/// matrix followed by its bias, the heads last.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    hidden: Vec<usize>,
    beta: f64,
    params: Vec<f64>,
}

/// Outputs of all heads and their input gradients at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlpOutput {
    pub sdf: f64,
    pub grad_sdf: Vector3,
    pub mf_inside: f64,
    pub grad_mf_inside: Vector3,
    pub mf_outside: f64,
    pub grad_mf_outside: Vector3,
}

impl MlpOutput {
    /// Medial field selected by the sign of the sdf.
    pub fn mf(&self) -> (f64, Vector3) {
        if self.sdf < 0.0 {
            (self.mf_inside, self.grad_mf_inside)
        } else {
            (self.mf_outside, self.grad_mf_outside)
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

struct LayerTape {
    input: DMatrix<f64>,
    z: DMatrix<f64>,
    tangent: Option<DMatrix<f64>>,
}

/// Forward activations kept for [`Mlp::backward`].
pub(crate) struct Tape {
    n: usize,
    tangents: bool,
    layers: Vec<LayerTape>,
    last: DMatrix<f64>,
    /// `HEADS × n` values, then (with tangents) three `HEADS × n` blocks of
    /// input-gradient components.
    pub out: DMatrix<f64>,
}

impl Tape {
    pub fn value(&self, head: usize, j: usize) -> f64 {
        self.out[(head, j)]
    }

    pub fn grad(&self, head: usize, j: usize) -> Vector3 {
        assert!(self.tangents);
        Vector3::from_fn(|k, _| self.out[(head, self.n * (k + 1) + j)])
    }

    pub fn columns(&self) -> usize {
        self.out.ncols()
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// Geometric initialization: the sdf head starts close to the distance
    /// to a sphere of radius `radius` around `center`.
    pub fn new(hidden: &[usize], beta: f64, seed: u64, center: &Point3, radius: f64) -> Self {
        assert!(
            !hidden.is_empty() && hidden.iter().all(|&n| n > 0),
            "hidden layers must be nonempty"
        );
        assert!(beta > 0.0, "softplus sharpness must be positive");
        let mut mlp = Mlp {
            hidden: hidden.to_vec(),
            beta,
            params: Vec::new(),
        };
        mlp.params = vec![0.0; mlp.parameter_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = mlp.layers();
        let (head, trunk) = layers.split_last().unwrap();
        for l in trunk {
            let normal = Normal::new(0.0, (2.0 / l.rows as f64).sqrt()).unwrap();
            for v in &mut mlp.params[l.w..l.w + l.rows * l.cols] {
                *v = normal.sample(&mut rng);
            }
        }
        // shift the first layer so the trunk sees coordinates relative to `center`
        let first = layers[0];
        for r in 0..first.rows {
            let mut s = 0.0;
            for c in 0..3 {
                s += mlp.params[first.w + c * first.rows + r] * center[c];
            }
            mlp.params[first.b + r] = -s;
        }
        let n = head.cols;
        let mean = (std::f64::consts::PI / n as f64).sqrt();
        let jitter = Normal::new(0.0, 1e-5).unwrap();
        let small = Normal::new(0.0, 1e-3 / (n as f64).sqrt()).unwrap();
        for c in 0..n {
            let at = |r: usize| head.w + c * head.rows + r;
            mlp.params[at(HEAD_SDF)] = mean + jitter.sample(&mut rng);
            mlp.params[at(HEAD_MF_IN)] = small.sample(&mut rng);
            mlp.params[at(HEAD_MF_OUT)] = small.sample(&mut rng);
        }
        // fit scale and offset of the sdf head to the sphere distance,
        // absorbing the softplus smoothing at small activations
        let probes: Vec<Point3> = (0..256)
            .map(|_| center + Vector3::from_fn(|_, _| rng.gen_range(-2.0 * radius..2.0 * radius)))
            .collect();
        let t = mlp.forward(&probes, false);
        let (mut sh, mut st, mut shh, mut sht) = (0.0, 0.0, 0.0, 0.0);
        for (j, p) in probes.iter().enumerate() {
            let h = t.value(HEAD_SDF, j);
            let target = (p - center).norm() - radius;
            sh += h;
            st += target;
            shh += h * h;
            sht += h * target;
        }
        let m = probes.len() as f64;
        let var = shh - sh * sh / m;
        let scale = if var > 1e-12 { (sht - sh * st / m) / var } else { 1.0 };
        for c in 0..n {
            mlp.params[head.w + c * head.rows + HEAD_SDF] *= scale;
        }
        mlp.params[head.b + HEAD_SDF] = (st - scale * sh) / m;
        mlp.params[head.b + HEAD_MF_IN] = radius;
        mlp.params[head.b + HEAD_MF_OUT] = radius;
        mlp
    }

    /// Network with the given architecture and parameter values.
    pub fn from_parts(hidden: Vec<usize>, beta: f64, params: Vec<f64>) -> Option<Self> {
        if hidden.is_empty() || hidden.contains(&0) || !(beta > 0.0) {
            return None;
        }
        let mlp = Mlp {
            hidden,
            beta,
            params: Vec::new(),
        };
        if params.len() != mlp.parameter_count() {
            return None;
        }
        Some(Mlp { params, ..mlp })
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().last().map_or(0, |l| l.b + l.rows)
    }

    fn layers(&self) -> Vec<Layer> {
        let mut out = Vec::with_capacity(self.hidden.len() + 1);
        let mut at = 0;
        let mut cols = 3;
        for &rows in self.hidden.iter().chain(std::iter::once(&HEADS)) {
            out.push(Layer {
                w: at,
                b: at + rows * cols,
                rows,
                cols,
            });
            at += rows * cols + rows;
            cols = rows;
        }
        out
    }

    fn weight(&self, l: &Layer) -> DMatrix<f64> {
        DMatrix::from_column_slice(l.rows, l.cols, &self.params[l.w..l.w + l.rows * l.cols])
    }

    /// Batched evaluation; with `tangents` the input gradients of every head
    /// are propagated alongside the values.
    pub(crate) fn forward(&self, points: &[Point3], tangents: bool) -> Tape {
        let n = points.len();
        let cols = if tangents { 4 * n } else { n };
        let mut a = DMatrix::zeros(3, cols);
        for (j, p) in points.iter().enumerate() {
            for k in 0..3 {
                a[(k, j)] = p[k];
                if tangents {
                    a[(k, n * (k + 1) + j)] = 1.0;
                }
            }
        }
        let layers = self.layers();
        let (head, trunk) = layers.split_last().unwrap();
        let mut tapes = Vec::with_capacity(trunk.len());
        for l in trunk {
            let pre = self.weight(l) * &a;
            let mut z = pre.columns(0, n).into_owned();
            for (r, mut row) in z.row_iter_mut().enumerate() {
                row.add_scalar_mut(self.params[l.b + r]);
            }
            let mut next = DMatrix::zeros(l.rows, cols);
            for j in 0..n {
                for r in 0..l.rows {
                    let t = self.beta * z[(r, j)];
                    next[(r, j)] = softplus(t) / self.beta;
                    if tangents {
                        let s = sigmoid(t);
                        for k in 0..3 {
                            let c = n * (k + 1) + j;
                            next[(r, c)] = pre[(r, c)] * s;
                        }
                    }
                }
            }
            tapes.push(LayerTape {
                input: a,
                z,
                tangent: tangents.then(|| pre.columns(n, 3 * n).into_owned()),
            });
            a = next;
        }
        let mut out = self.weight(head) * &a;
        for r in 0..HEADS {
            let bias = self.params[head.b + r];
            for j in 0..n {
                out[(r, j)] += bias;
            }
        }
        Tape {
            n,
            tangents,
            layers: tapes,
            last: a,
            out,
        }
    }

    /// Adds `∂/∂θ Σ upstream ⊙ tape.out` to `grad`.
    pub(crate) fn backward(&self, tape: &Tape, upstream: &DMatrix<f64>, grad: &mut [f64]) {
        assert_eq!(upstream.shape(), tape.out.shape());
        assert_eq!(grad.len(), self.params.len());
        let n = tape.n;
        let layers = self.layers();
        let (head, trunk) = layers.split_last().unwrap();
        let gw = upstream * tape.last.transpose();
        accumulate(&mut grad[head.w..head.b], gw.as_slice());
        for r in 0..HEADS {
            grad[head.b + r] += upstream.row(r).columns(0, n).sum();
        }
        let mut abar = self.weight(head).transpose() * upstream;
        for (i, l) in trunk.iter().enumerate().rev() {
            let t = &tape.layers[i];
            let mut pbar = DMatrix::zeros(l.rows, abar.ncols());
            for j in 0..n {
                for r in 0..l.rows {
                    let s = sigmoid(self.beta * t.z[(r, j)]);
                    let mut zbar = abar[(r, j)] * s;
                    if let Some(d) = &t.tangent {
                        let s2 = self.beta * s * (1.0 - s);
                        for k in 0..3 {
                            let c = n * (k + 1) + j;
                            zbar += abar[(r, c)] * d[(r, n * k + j)] * s2;
                            pbar[(r, c)] = abar[(r, c)] * s;
                        }
                    }
                    pbar[(r, j)] = zbar;
                }
            }
            let gw = &pbar * t.input.transpose();
            accumulate(&mut grad[l.w..l.b], gw.as_slice());
            for r in 0..l.rows {
                grad[l.b + r] += pbar.row(r).columns(0, n).sum();
            }
            if i > 0 {
                abar = self.weight(l).transpose() * pbar;
            }
        }
    }

    /// All head values and input gradients at `p`.
    pub fn output(&self, p: &Point3) -> MlpOutput {
        let t = self.forward(std::slice::from_ref(p), true);
        MlpOutput {
            sdf: t.value(HEAD_SDF, 0),
            grad_sdf: t.grad(HEAD_SDF, 0),
            mf_inside: t.value(HEAD_MF_IN, 0),
            grad_mf_inside: t.grad(HEAD_MF_IN, 0),
            mf_outside: t.value(HEAD_MF_OUT, 0),
            grad_mf_outside: t.grad(HEAD_MF_OUT, 0),
        }
    }

    /// `(sdf, mf)` with the medial head chosen by the sign of the sdf.
    pub fn eval(&self, p: &Point3) -> (f64, f64) {
        let t = self.forward(std::slice::from_ref(p), false);
        select(t.value(HEAD_SDF, 0), t.value(HEAD_MF_IN, 0), t.value(HEAD_MF_OUT, 0))
    }

    /// [`Mlp::eval`] over many points, in chunks.
    pub fn eval_many(&self, points: &[Point3]) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(4096) {
            let t = self.forward(chunk, false);
            for j in 0..chunk.len() {
                out.push(select(t.value(HEAD_SDF, j), t.value(HEAD_MF_IN, j), t.value(HEAD_MF_OUT, j)));
            }
        }
        out
    }
}

fn select(sdf: f64, inside: f64, outside: f64) -> (f64, f64) {
    (sdf, if sdf < 0.0 { inside } else { outside })
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
