//! Collapses an ε-cover onto the medial axis by minimising
//! `λ₁·|Vol| + λ₂·Σ w(v)‖π(v) − c(v)‖²`, where `c(v)` is the uniform
//! one-ring centroid and `w(v)` an inverse adjacent area.

use crate::error::{Error, Result};
use crate::fields::FieldBundle;
use crate::geom::{signed_volume, Point3, TriangleMesh, Vector3};
use rayon::prelude::*;

/// Regulariser in `w(v) = 1/(A(v) + δ)`.
pub const WEIGHT_DELTA: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkConfig {
    pub lambda_volume: f64,
    pub lambda_laplacian: f64,
    /// Upper bound on descent iterations.
    pub iterations: usize,
    pub initial_step: f64,
    pub max_halvings: usize,
    /// Iterations between weight updates.
    pub weight_refresh: usize,
    /// Target `|V_final| / |V_initial|`; a warning is logged above it.
    pub volume_ratio: f64,
    /// Stop once `|V| / |V_initial|` falls below this.
    pub stop_ratio: f64,
    /// Conjugate-gradient iterations for the smoothing preconditioner.
    pub cg_iterations: usize,
    /// Largest vertex move per iteration, in mean edge lengths.
    pub max_move: f64,
    /// Strength of the step smoothing relative to the mass term.
    pub smoothing: f64,
}

impl Default for ShrinkConfig {
    fn default() -> Self {
        ShrinkConfig {
            lambda_volume: 1.0,
            lambda_laplacian: 0.1,
            iterations: 3000,
            initial_step: 1e-2,
            max_halvings: 20,
            weight_refresh: 100,
            volume_ratio: 0.01,
            stop_ratio: 1e-9,
            cg_iterations: 40,
            max_move: 0.5,
            smoothing: 25.0,
        }
    }
}

impl ShrinkConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda_volume) || !ok(self.lambda_laplacian) {
            return Err(Error::invalid("shrink weights must be finite and nonnegative"));
        }
        if self.lambda_volume + self.lambda_laplacian <= 0.0 {
            return Err(Error::invalid("at least one shrink weight must be positive"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::invalid("shrink step must be positive"));
        }
        if self.weight_refresh == 0 {
            return Err(Error::invalid("weight refresh interval must be positive"));
        }
        if !(self.max_move > 0.0 && self.max_move.is_finite()) {
            return Err(Error::invalid("max_move must be positive"));
        }
        if !ok(self.stop_ratio) || !ok(self.volume_ratio) {
            return Err(Error::invalid("volume ratios must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Shrunk cover with per-vertex inscribed radii.
#[derive(Clone, Debug)]
pub struct MedialMembrane {
    pub mesh: TriangleMesh,
    pub radii: Vec<f64>,
    /// Fingerprint of the fields the radii came from.
    pub source: String,
}

impl MedialMembrane {
    pub fn new(mesh: TriangleMesh, radii: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if radii.len() != mesh.vertices().len() {
            return Err(Error::invalid("membrane needs one radius per vertex"));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("membrane radii must be finite and nonnegative"));
        }
        Ok(MedialMembrane {
            mesh,
            radii,
            source: source.into(),
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct ShrinkLog {
    /// Signed volume before the first and after every iteration.
    pub volumes: Vec<f64>,
    /// Energy after every iteration under the weights active at that time.
    pub energies: Vec<f64>,
    pub accepted: usize,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl ShrinkLog {
    pub fn initial_volume(&self) -> f64 {
        self.volumes.first().copied().unwrap_or(0.0)
    }

    pub fn final_volume(&self) -> f64 {
        self.volumes.last().copied().unwrap_or(0.0)
    }

    pub fn volume_ratio(&self) -> f64 {
        let v0 = self.initial_volume().abs();
        if v0 == 0.0 {
            0.0
        } else {
            self.final_volume().abs() / v0
        }
    }
}

/// `1/(A(v) + δ)` with `A(v)` the total area of faces touching `v`.
pub fn vertex_weights(mesh: &TriangleMesh) -> Vec<f64> {
    mesh.adjacent_areas().into_iter().map(|a| 1.0 / (a + WEIGHT_DELTA)).collect()
}

/// Weights used by the energy: [`vertex_weights`] times the mean adjacent
/// area, so a vertex of average area has weight 1 at any resolution.
pub fn energy_weights(mesh: &TriangleMesh) -> Vec<f64> {
    let areas = mesh.adjacent_areas();
    let mean = areas.iter().sum::<f64>() / areas.len().max(1) as f64;
    if mean == 0.0 {
        return vec![1.0; areas.len()];
    }
    areas.into_iter().map(|a| mean / (a + WEIGHT_DELTA)).collect()
}

/// `L y`: each vertex minus the mean of its one-ring.
fn umbrella(mesh: &TriangleMesh, y: &[Vector3]) -> Vec<Vector3> {
    let topo = mesh.topology();
    (0..y.len())
        .into_par_iter()
        .map(|v| {
            let ring = topo.neighbors(v);
            if ring.is_empty() {
                return Vector3::zeros();
            }
            ring.iter().map(|&u| y[v] - y[u]).sum::<Vector3>() / ring.len() as f64
        })
        .collect()
}

/// `Lᵀ z` for the umbrella operator on a symmetric adjacency.
fn umbrella_transpose(mesh: &TriangleMesh, z: &[Vector3]) -> Vec<Vector3> {
    let topo = mesh.topology();
    let scaled: Vec<Vector3> = (0..z.len())
        .map(|v| {
            let n = topo.neighbors(v).len();
            if n == 0 {
                Vector3::zeros()
            } else {
                z[v] / n as f64
            }
        })
        .collect();
    (0..z.len())
        .into_par_iter()
        .map(|x| {
            if topo.neighbors(x).is_empty() {
                return Vector3::zeros();
            }
            let mut out = z[x];
            for &v in topo.neighbors(x) {
                out -= scaled[v];
            }
            out
        })
        .collect()
}

fn coords(x: &[Point3]) -> Vec<Vector3> {
    x.iter().map(|p| p.coords).collect()
}

fn energy_with(mesh: &TriangleMesh, x: &[Point3], w: &[f64], cfg: &ShrinkConfig) -> f64 {
    let vol = signed_volume(x, mesh.faces()).abs();
    let lap: f64 = if cfg.lambda_laplacian == 0.0 {
        0.0
    } else {
        umbrella(mesh, &coords(x)).iter().zip(w).map(|(l, w)| w * l.norm_squared()).sum()
    };
    cfg.lambda_volume * vol + cfg.lambda_laplacian * lap
}

fn gradient_with(mesh: &TriangleMesh, x: &[Point3], w: &[f64], cfg: &ShrinkConfig) -> Vec<Vector3> {
    let topo = mesh.topology();
    let faces = mesh.faces();
    let vol = signed_volume(x, faces);
    let lam_v = cfg.lambda_volume * if vol == 0.0 { 0.0 } else { vol.signum() } / 6.0;
    let lap_grad = if cfg.lambda_laplacian == 0.0 {
        vec![Vector3::zeros(); x.len()]
    } else {
        let wl: Vec<Vector3> = umbrella(mesh, &coords(x))
            .iter()
            .zip(w)
            .map(|(l, w)| l * (2.0 * cfg.lambda_laplacian * w))
            .collect();
        umbrella_transpose(mesh, &wl)
    };
    (0..x.len())
        .into_par_iter()
        .map(|v| {
            let mut g = lap_grad[v];
            if lam_v != 0.0 {
                for &f in topo.vertex_faces(v) {
                    let [a, b, c] = faces[f];
                    let (p, q) = if a == v {
                        (b, c)
                    } else if b == v {
                        (c, a)
                    } else {
                        (a, b)
                    };
                    g += x[p].coords.cross(&x[q].coords) * lam_v;
                }
            }
            g
        })
        .collect()
}

/// Energy at `positions` with weights from the mesh's own geometry.
pub fn shrink_energy(mesh: &TriangleMesh, positions: &[Point3], config: &ShrinkConfig) -> f64 {
    assert_eq!(positions.len(), mesh.vertices().len());
    energy_with(mesh, positions, &energy_weights(mesh), config)
}

/// Exact gradient of [`shrink_energy`] with respect to `positions`.
pub fn shrink_energy_gradient(mesh: &TriangleMesh, positions: &[Point3], config: &ShrinkConfig) -> Vec<Vector3> {
    assert_eq!(positions.len(), mesh.vertices().len());
    gradient_with(mesh, positions, &energy_weights(mesh), config)
}

/// Preconditioner `P = diag(λ₁·A/ℓ) + K` with `K` a graph Laplacian whose
/// edge weights follow the local Laplacian stiffness; it spreads each step
/// over a few rings.
struct Metric<'a> {
    mesh: &'a TriangleMesh,
    edge_len: f64,
    mass: Vec<f64>,
    edge_weight: Vec<f64>,
    jacobi: Vec<f64>,
}

impl<'a> Metric<'a> {
    fn new(mesh: &'a TriangleMesh, verts: &[Point3], w: &[f64], cfg: &ShrinkConfig) -> Self {
        let topo = mesh.topology();
        let mut areas = vec![0.0; verts.len()];
        for f in mesh.faces() {
            let a = (verts[f[1]] - verts[f[0]]).cross(&(verts[f[2]] - verts[f[0]])).norm() / 2.0;
            for &v in f {
                areas[v] += a;
            }
        }
        let edge_len = topo.edges.iter().map(|&[a, b]| (verts[a] - verts[b]).norm()).sum::<f64>() / topo.edges.len().max(1) as f64;
        let mean_area = areas.iter().sum::<f64>() / areas.len().max(1) as f64;
        let scale = cfg.lambda_volume.max(1e-3) / edge_len.max(1e-12);
        let floor = 1e-9 * mean_area.max(1e-300);
        let mass: Vec<f64> = areas.iter().map(|a| scale * (a + floor)).collect();
        let mean_mass = mass.iter().sum::<f64>() / mass.len().max(1) as f64;
        // graph Laplacian eigenvalues reach about 12, LᵀWL's about 4w
        let base = cfg.smoothing * mean_mass;
        let stiff = 2.0 * cfg.lambda_laplacian / 3.0;
        let edge_weight: Vec<f64> = w.iter().map(|w| base / 2.0 + stiff * w).collect();
        let jacobi = (0..verts.len())
            .map(|v| {
                mass[v]
                    + topo
                        .neighbors(v)
                        .iter()
                        .map(|&u| (edge_weight[v] + edge_weight[u]) / 2.0)
                        .sum::<f64>()
            })
            .collect();
        Metric {
            mesh,
            edge_len,
            mass,
            edge_weight,
            jacobi,
        }
    }

    fn apply(&self, y: &[Vector3]) -> Vec<Vector3> {
        let topo = self.mesh.topology();
        (0..y.len())
            .into_par_iter()
            .map(|v| {
                let mut out = y[v] * self.mass[v];
                for &u in topo.neighbors(v) {
                    out += (y[v] - y[u]) * ((self.edge_weight[v] + self.edge_weight[u]) / 2.0);
                }
                out
            })
            .collect()
    }

    fn jacobi(&self, v: usize) -> f64 {
        self.jacobi[v]
    }

    /// Approximately solves `P d = g` per coordinate with Jacobi-preconditioned CG.
    fn solve(&self, g: &[Vector3], iterations: usize) -> Vec<Vector3> {
        let n = g.len();
        let dot = |a: &[Vector3], b: &[Vector3]| -> Vector3 { a.iter().zip(b).fold(Vector3::zeros(), |s, (x, y)| s + x.component_mul(y)) };
        let mut x = vec![Vector3::zeros(); n];
        let mut r = g.to_vec();
        let mut z: Vec<Vector3> = r.iter().enumerate().map(|(k, r)| r / self.jacobi(k)).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let r0 = dot(&r, &r).map(f64::sqrt);
        for _ in 0..iterations {
            let ap = self.apply(&p);
            let pap = dot(&p, &ap);
            let alpha = Vector3::from_fn(|i, _| if pap[i] > 0.0 { rz[i] / pap[i] } else { 0.0 });
            for k in 0..n {
                x[k] += p[k].component_mul(&alpha);
                r[k] -= ap[k].component_mul(&alpha);
            }
            let rn = dot(&r, &r).map(f64::sqrt);
            if (0..3).all(|i| rn[i] <= 1e-6 * r0[i]) {
                break;
            }
            for k in 0..n {
                z[k] = r[k] / self.jacobi(k);
            }
            let rz_new = dot(&r, &z);
            let beta = Vector3::from_fn(|i, _| if rz[i] > 0.0 { rz_new[i] / rz[i] } else { 0.0 });
            for k in 0..n {
                p[k] = z[k] + p[k].component_mul(&beta);
            }
            rz = rz_new;
        }
        x
    }
}

enum Search {
    Accepted { positions: Vec<Point3>, energy: f64, step: f64 },
    Rejected,
    NonFinite,
}

fn line_search(mesh: &TriangleMesh, x: &[Point3], d: &[Vector3], w: &[f64], cfg: &ShrinkConfig, e: f64, mut step: f64) -> Search {
    for _ in 0..=cfg.max_halvings {
        let trial: Vec<Point3> = x.iter().zip(d).map(|(p, d)| p - d * step).collect();
        let et = energy_with(mesh, &trial, w, cfg);
        if !et.is_finite() {
            return Search::NonFinite;
        }
        if et < e {
            return Search::Accepted {
                positions: trial,
                energy: et,
                step,
            };
        }
        step *= 0.5;
    }
    Search::Rejected
}

/// Moves cover vertices by preconditioned descent with backtracking, then
/// reads radii from the bundle's SDF.
pub fn shrink(cover: &TriangleMesh, bundle: &FieldBundle, config: &ShrinkConfig) -> Result<(MedialMembrane, ShrinkLog)> {
    config.validate()?;
    if cover.faces().is_empty() {
        return Err(Error::Empty("cannot shrink an empty cover".into()));
    }
    let mut log = ShrinkLog::default();
    let mut x = cover.vertices().to_vec();
    let mut current = cover.clone();
    let mut w = energy_weights(&current);
    let mut e = energy_with(&current, &x, &w, config);
    if !e.is_finite() {
        return Err(Error::Numerical("initial shrink energy is not finite".into()));
    }
    let v0 = signed_volume(&x, cover.faces()).abs();
    let mut step = config.initial_step;
    log.volumes.push(signed_volume(&x, cover.faces()));
    log.energies.push(e);
    for it in 0..config.iterations {
        if v0 > 0.0 && log.final_volume().abs() <= config.stop_ratio * v0 {
            break;
        }
        if it > 0 && it % config.weight_refresh == 0 {
            current = current.with_positions(x.clone())?;
            w = energy_weights(&current);
            e = energy_with(&current, &x, &w, config);
        }
        let g = gradient_with(&current, &x, &w, config);
        let metric = Metric::new(&current, &x, &w, config);
        let d = metric.solve(&g, config.cg_iterations);
        let longest = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if longest > 0.0 {
            step = step.min(config.max_move * metric.edge_len / longest);
        }
        log.iterations += 1;
        match line_search(&current, &x, &d, &w, config, e, step) {
            Search::Accepted {
                positions,
                energy,
                step: s,
            } => {
                assert!(energy < e, "accepted step must lower the energy");
                x = positions;
                e = energy;
                step = (s * 2.0).min(1e6);
                log.accepted += 1;
            }
            Search::Rejected => {
                log.warnings
                    .push(format!("no descent after {} halvings at iteration {it}", config.max_halvings));
                break;
            }
            Search::NonFinite => {
                log.warnings
                    .push(format!("non-finite energy at iteration {it}; keeping the last valid state"));
                break;
            }
        }
        log.volumes.push(signed_volume(&x, cover.faces()));
        log.energies.push(e);
    }
    let mesh = cover.with_positions(x)?;
    let radii = mesh.vertices().iter().map(|p| bundle.sdf.eval(p).abs()).collect();
    let membrane = MedialMembrane::new(mesh, radii, bundle.provenance.fingerprint())?;
    if log.volume_ratio() > config.volume_ratio {
        log.warnings.push(format!(
            "volume ratio {:.4} above target {}",
            log.volume_ratio(),
            config.volume_ratio
        ));
    }
    Ok((membrane, log))
}
