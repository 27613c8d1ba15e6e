//! Acceptance criteria, one line each. Pass names as arguments to run a subset:
//! `cargo test --test acceptance -- torus determinism`.

use medial::extract::{extract_cover, ExtractConfig};
use medial::features::qem_minimizer;
use medial::fields::{numeric_gradient_fn, qmdf_eval, AnalyticShape, FieldBundle, MedialDistance};
use medial::geom::{distance_to_segment, primitives, random_in_box, random_unit, Point3, PointCloud, TriangleIndex, TriangleMesh, Vector3};
use medial::metrics::{chains_smoothness, membrane_boundary_chains, reconstruct};
use medial::neural::{loss_and_gradient, loss_with_targets, projection_targets, train_joint, Batch, LossWeights, Mlp, TrainConfig};
use medial::pipeline::{run_pipeline, PipelineConfig};
use medial::shrink::{shrink, shrink_energy, shrink_energy_gradient, MedialMembrane, ShrinkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.1}s of {limit_s}s"))
}

fn ball_identity() -> Outcome {
    let c = Point3::new(0.1, -0.05, 0.02);
    let bundle = FieldBundle::analytic(AnalyticShape::sphere(c, 0.4).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let points: Vec<Point3> = (0..10_000)
        .map(|_| c + random_unit(&mut rng) * 0.4 * rng.gen::<f64>().cbrt())
        .collect();
    let t = Instant::now();
    let worst = points
        .iter()
        .map(|p| (qmdf_eval(&bundle, p) - (p - c).norm()).abs())
        .fold(0.0, f64::max);
    let (fast, time) = within(t.elapsed(), 1.0);
    check(worst < 1e-9 && fast, format!("max |Q-MDF - |p-c|| = {worst:.2e}, {time}"))
}

fn mf_axioms() -> Outcome {
    let shapes = [
        AnalyticShape::sphere(Point3::new(0.05, 0.0, -0.02), 0.4).unwrap(),
        AnalyticShape::torus(Point3::origin(), Vector3::new(0.2, 0.1, 1.0), 0.3, 0.1).unwrap(),
        AnalyticShape::capsule(Point3::new(-0.3, 0.0, 0.0), Point3::new(0.2, 0.1, 0.1), 0.15).unwrap(),
    ];
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut gap, mut dot, mut eik, mut n_dot, mut n_eik) = (0.0f64, 0.0f64, 0.0f64, 0, 0);
    for shape in &shapes {
        let medial = MedialDistance::new(shape).unwrap();
        let region = shape.bounds().inflated(0.2);
        for _ in 0..10_000 {
            let p = random_in_box(&mut rng, &region);
            let (s, m) = (shape.sdf(&p), shape.mf(&p));
            gap = gap.max(s.abs() - m);
            let to_axis = medial.eval(&p) - medial.tolerance();
            if to_axis <= 0.02 {
                continue;
            }
            let gs = numeric_gradient_fn(|q| shape.sdf(q), &p, 1e-6);
            eik = eik.max((gs.norm() - 1.0).abs());
            n_eik += 1;
            if s.abs() > 0.02 {
                let gm = numeric_gradient_fn(|q| shape.mf(q), &p, 1e-6);
                dot = dot.max(gs.dot(&gm).abs());
                n_dot += 1;
            }
        }
    }
    let (fast, time) = within(t.elapsed(), 10.0);
    check(
        gap <= 1e-9 && dot < 1e-3 && eik < 1e-3 && fast,
        format!("max(|sdf|-mf) = {gap:.1e}, max |∇sdf·∇mf| = {dot:.1e} ({n_dot} pts), max |‖∇sdf‖-1| = {eik:.1e} ({n_eik} pts), {time}"),
    )
}

fn extraction_topology() -> Outcome {
    let config = ExtractConfig {
        epsilon: 0.02,
        depth: 7,
        ..Default::default()
    };
    let torus = AnalyticShape::torus(Point3::origin(), Vector3::new(0.0, 0.3, 1.0), 0.385, 0.115).unwrap();
    let sphere = AnalyticShape::sphere(Point3::origin(), 0.45).unwrap();
    let t = Instant::now();
    let ec_t = extract_cover(&FieldBundle::analytic(torus), &config)
        .map_err(|e| e.to_string())?
        .euler_characteristic;
    let (fast_t, time_t) = within(t.elapsed(), 60.0);
    let t = Instant::now();
    let ec_s = extract_cover(&FieldBundle::analytic(sphere), &config)
        .map_err(|e| e.to_string())?
        .euler_characteristic;
    let (fast_s, time_s) = within(t.elapsed(), 60.0);
    check(
        ec_t == 0 && ec_s == 2 && fast_t && fast_s,
        format!("torus EC {ec_t} ({time_t}), sphere EC {ec_s} ({time_s})"),
    )
}

/// Largest energy increase between consecutive accepted steps that share
/// the same weights.
fn worst_energy_rise(energies: &[f64], refresh: usize) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..energies.len().saturating_sub(1) {
        if i > 0 && i % refresh == 0 {
            continue;
        }
        worst = worst.max(energies[i + 1] - energies[i]);
    }
    worst
}

fn shrink_convergence() -> Outcome {
    let bundle = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 0.4).unwrap());
    let config = ShrinkConfig {
        iterations: 3000,
        ..Default::default()
    };
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for eps in [0.05, 0.01, 0.005] {
        let cover = extract_cover(
            &bundle,
            &ExtractConfig {
                epsilon: eps,
                depth: 8,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let (_, log) = shrink(&cover.mesh, &bundle, &config).map_err(|e| e.to_string())?;
        let rise = worst_energy_rise(&log.energies, config.weight_refresh);
        ok &= log.volume_ratio() < 0.01 && rise <= 0.0;
        parts.push(format!("ε={eps}: |V|/|V0| = {:.1e}, max rise {rise:.1e}", log.volume_ratio()));
    }
    let (fast, time) = within(t.elapsed(), 300.0);
    check(ok && fast, format!("{}, {time}", parts.join("; ")))
}

fn circle_distance(p: &Point3, major: f64) -> f64 {
    let radial = (p.x * p.x + p.y * p.y).sqrt();
    ((radial - major).powi(2) + p.z * p.z).sqrt()
}

/// Runs the standard torus through the pipeline and returns its membrane in
/// the input frame with the extraction cell size.
fn torus_membrane(dir: &Path) -> Result<(MedialMembrane, f64), String> {
    let scene = dir.join("torus.scene");
    std::fs::write(&scene, "torus 0 0 0 0 0 1 0.385 0.115\n").map_err(|e| e.to_string())?;
    let mut c = PipelineConfig::default();
    for (k, v) in [("depth", "7"), ("epsilon", "0.01"), ("metrics", "false"), ("output_frame", "input")] {
        c.set(k, v).map_err(|e| e.to_string())?;
    }
    c.set("input", scene.to_str().unwrap()).map_err(|e| e.to_string())?;
    c.set("output", dir.join("torus_out").to_str().unwrap())
        .map_err(|e| e.to_string())?;
    let run = run_pipeline(&c).map_err(|e| e.to_string())?;
    let round = &run.rounds[0];
    let membrane = run.normalization.invert_membrane(&round.membrane).map_err(|e| e.to_string())?;
    Ok((membrane, round.cover.cell_size / run.normalization.scale))
}

fn medial_accuracy(dir: &Path) -> Outcome {
    let t = Instant::now();
    let (m, cell) = torus_membrane(dir)?;
    let v = m.mesh.vertices();
    let near = v.iter().filter(|p| circle_distance(p, 0.385) <= 2.0 * cell).count() as f64 / v.len() as f64;
    let radius_err = m.radii.iter().map(|r| (r - 0.115).abs()).sum::<f64>() / m.radii.len() as f64;
    let (fast, time) = within(t.elapsed(), 300.0);
    check(
        near >= 0.95 && radius_err < 0.02 && fast,
        format!(
            "{:.1}% of {} vertices within 2 cells ({cell:.4}), mean |radius - r| = {radius_err:.4}, {time}",
            100.0 * near,
            v.len()
        ),
    )
}

fn random_mesh(rng: &mut ChaCha8Rng) -> (TriangleMesh, Vec<Point3>) {
    let base = primitives::torus(1.0, 0.4, 10, 5);
    let mut jitter = |s: f64| Vector3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s));
    let rest = base.vertices().iter().map(|p| p + jitter(0.1)).collect();
    let mesh = base.with_positions(rest).unwrap();
    let x = mesh.vertices().iter().map(|p| p + jitter(0.1)).collect();
    (mesh, x)
}

fn shrink_gradient_error(mesh: &TriangleMesh, x: &[Point3], cfg: &ShrinkConfig) -> f64 {
    let g = shrink_energy_gradient(mesh, x, cfg);
    let h = 1e-6;
    let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-12);
    let mut worst: f64 = 0.0;
    for v in 0..x.len() {
        for a in 0..3 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[v][a] += h;
            xm[v][a] -= h;
            let fd = (shrink_energy(mesh, &xp, cfg) - shrink_energy(mesh, &xm, cfg)) / (2.0 * h);
            worst = worst.max((fd - g[v][a]).abs() / scale);
        }
    }
    worst
}

fn neural_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut m = Mlp::new(&[16, 12], 8.0, 3, &Point3::origin(), 0.4);
    for v in m.params_mut() {
        *v += rng.gen_range(-0.2..0.2);
    }
    let surface = (0..32).map(|_| Point3::from(random_unit(&mut rng) * 0.4)).collect();
    let volume = (0..32)
        .map(|_| Point3::from(random_unit(&mut rng) * 0.39 * rng.gen::<f64>().cbrt()))
        .collect();
    let batch = Batch {
        surface,
        volume,
        features: vec![Point3::new(0.3, 0.1, -0.1), Point3::new(-0.05, 0.2, 0.0)],
    };
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
    let mut worst: f64 = 0.0;
    for w in &solos {
        let (_, grad) = loss_and_gradient(&m, &batch, w).unwrap();
        let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1e-8);
        for _ in 0..20 {
            let i = rng.gen_range(0..m.parameter_count());
            let h = 1e-6;
            let at = |d: f64| {
                let mut q = m.clone();
                q.params_mut()[i] += d;
                loss_with_targets(&q, &batch, w, &targets).unwrap().total(w)
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / scale);
        }
    }
    worst
}

fn gradient_oracles() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut shrink_err: f64 = 0.0;
    for i in 0..10 {
        let (m, x) = random_mesh(&mut rng);
        assert_eq!(x.len(), 50);
        let cfg = ShrinkConfig {
            lambda_volume: [1.0, 0.0, 0.5][i % 3],
            lambda_laplacian: [0.1, 1.0, 2.0][i % 3],
            ..Default::default()
        };
        shrink_err = shrink_err.max(shrink_gradient_error(&m, &x, &cfg));
    }
    let neural_err = neural_gradient_error();
    let (fast, time) = within(t.elapsed(), 120.0);
    check(
        shrink_err < 1e-5 && neural_err < 1e-3 && fast,
        format!("shrink rel. error {shrink_err:.1e}, network rel. error {neural_err:.1e}, {time}"),
    )
}

/// Two-sided distance between a mesh and an analytic surface: mesh vertices
/// against the exact SDF, surface samples against the mesh.
fn analytic_hausdorff(mesh: &TriangleMesh, shape: &AnalyticShape, samples: usize) -> f64 {
    let one = mesh.vertices().iter().map(|p| shape.sdf(p).abs()).fold(0.0, f64::max);
    let index = TriangleIndex::build(mesh).unwrap();
    let cloud = shape.sample_surface(&mut ChaCha8Rng::seed_from_u64(15), samples);
    let two = cloud.points.iter().map(|p| index.distance(p)).fold(0.0, f64::max);
    one.max(two)
}

fn reconstruction_sanity(dir: &Path) -> Outcome {
    let t = Instant::now();
    let res = 128;
    let c = Point3::new(0.1, 0.0, -0.1);
    let single = MedialMembrane::new(TriangleMesh::new(vec![c], vec![]).unwrap(), vec![0.4], "test").unwrap();
    let ball = reconstruct(&single, res).map_err(|e| e.to_string())?;
    let ball_cell = 0.8 / (res - 1) as f64;
    let h_ball = analytic_hausdorff(&ball, &AnalyticShape::sphere(c, 0.4).unwrap(), 20_000);
    let (m, _) = torus_membrane(dir)?;
    let torus = reconstruct(&m, res).map_err(|e| e.to_string())?;
    let torus_cell = torus.bounds().extent().max() / (res - 1) as f64;
    let shape = AnalyticShape::torus(Point3::origin(), Vector3::z(), 0.385, 0.115).unwrap();
    let h_torus = analytic_hausdorff(&torus, &shape, 20_000);
    let (fast, time) = within(t.elapsed(), 120.0);
    check(
        h_ball < ball_cell && h_torus < 2.0 * torus_cell && fast,
        format!(
            "sphere Hausdorff {h_ball:.4} (cell {ball_cell:.4}), torus Hausdorff {h_torus:.4} (2 cells {:.4}), {time}",
            2.0 * torus_cell
        ),
    )
}

fn c_avg_calibration() -> Outcome {
    let gon: Vec<Point3> = (0..256)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 256.0;
            Point3::new(a.cos(), a.sin(), 0.0)
        })
        .collect();
    let line: Vec<Point3> = (0..10).map(|i| Point3::new(0.3 * i as f64, 0.1 * i as f64, 0.0)).collect();
    let square = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    let get = |chain: Vec<Point3>, closed: bool| {
        chains_smoothness(&[(chain, closed)])
            .map_err(|e| e.to_string())
            .map(|v| v.unwrap_or(f64::NAN))
    };
    let g = get(gon, true)?;
    let l = get(line, false)?;
    let s = get(square, true)?;
    check(
        (g - 1.0).abs() <= 0.01 && l == 0.0 && s == std::f64::consts::FRAC_PI_2,
        format!(
            "256-gon {g:.5}, collinear {l}, unit square {s} (π/2 = {})",
            std::f64::consts::FRAC_PI_2
        ),
    )
}

fn neural_desk_run() -> Outcome {
    let center = Point3::new(0.5, 0.5, 0.5);
    let shape = AnalyticShape::sphere(center, 0.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let train = shape.sample_surface(&mut rng, 2000);
    let held = shape.sample_surface(&mut rng, 1000);
    let cloud = PointCloud::new(train.points, None).unwrap();
    let mut config = TrainConfig::desk();
    config.steps = 20_000;
    let t = Instant::now();
    let model = train_joint(&cloud, &config).map_err(|e| e.to_string())?;
    let (fast, time) = within(t.elapsed(), 900.0);
    let bundle = model.bundle();
    let held_err = held.points.iter().map(|p| bundle.sdf.eval(p).abs()).sum::<f64>() / held.len() as f64;
    let q = qmdf_eval(&bundle, &center);
    let window = config.batches_per_epoch;
    let means = model.log.window_means(window);
    let rises = means.windows(2).filter(|w| w[1] > w[0]).count();
    check(
        held_err < 0.01 && q < 0.05 && rises == 0 && fast,
        format!(
            "held-out mean |sdf| {held_err:.5}, Q-MDF at center {q:.4}, {rises} rises over {} windows of {window} steps, {time}",
            means.len()
        ),
    )
}

fn box_edges(half: &Vector3) -> Vec<(Point3, Point3)> {
    let mut edges = Vec::new();
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for sb in [-1.0, 1.0] {
            for sc in [-1.0, 1.0] {
                let mut p = Vector3::zeros();
                p[b] = sb * half[b];
                p[c] = sc * half[c];
                let mut q = p;
                p[a] = -half[a];
                q[a] = half[a];
                edges.push((Point3::from(p), Point3::from(q)));
            }
        }
    }
    edges
}

fn qem_corner_error() -> f64 {
    let corner = Point3::new(0.3, -0.2, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (mut points, mut normals) = (Vec::new(), Vec::new());
    for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
        for _ in 0..10 {
            let mut off = Vector3::new(rng.gen_range(-0.1..0.0), rng.gen_range(-0.1..0.0), rng.gen_range(-0.1..0.0));
            off -= axis * axis.dot(&off);
            points.push(corner + off);
            normals.push(axis);
        }
    }
    let start = corner + Vector3::new(-0.03, -0.05, -0.02);
    (qem_minimizer(&start, &points, &normals, 1e-3) - corner).norm()
}

fn feature_consolidation(dir: &Path) -> Outcome {
    let t = Instant::now();
    let half = Vector3::new(0.5, 0.35, 0.25);
    let shape = AnalyticShape::cuboid(Point3::origin(), half).unwrap();
    let cloud = shape.sample_surface(&mut ChaCha8Rng::seed_from_u64(3), 20_000);
    let input = dir.join("box.xyz");
    medial::io::save_cloud(&input, &cloud).map_err(|e| e.to_string())?;
    let mut c = PipelineConfig::default();
    for (k, v) in [
        ("source", "sampled"),
        ("features", "true"),
        ("feature_rounds", "1"),
        ("metrics", "false"),
        ("depth", "6"),
        ("epsilon", "0.02"),
        ("shrink.iterations", "1000"),
    ] {
        c.set(k, v).map_err(|e| e.to_string())?;
    }
    c.set("input", input.to_str().unwrap()).map_err(|e| e.to_string())?;
    c.set("output", dir.join("box_out").to_str().unwrap()).map_err(|e| e.to_string())?;
    let run = run_pipeline(&c).map_err(|e| e.to_string())?;
    if run.rounds.len() < 2 {
        return Err(format!("only {} round(s) ran", run.rounds.len()));
    }
    let edges = box_edges(&(half * run.normalization.scale));
    let mean_edge_distance = |m: &MedialMembrane| {
        let pts: Vec<Point3> = membrane_boundary_chains(m).into_iter().flat_map(|(p, _)| p).collect();
        let sum: f64 = pts
            .iter()
            .map(|p| {
                edges
                    .iter()
                    .map(|(a, b)| distance_to_segment(p, a, b))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        sum / pts.len().max(1) as f64
    };
    let d0 = mean_edge_distance(&run.rounds[0].membrane);
    let d1 = mean_edge_distance(&run.rounds[1].membrane);
    let corner = qem_corner_error();
    let (fast, time) = within(t.elapsed(), 600.0);
    check(
        d1 < d0 && corner < 1e-6 && fast,
        format!(
            "boundary-to-edge distance {d0:.5} -> {d1:.5} with {} feature points, QEM corner error {corner:.1e}, {time}",
            run.rounds[0].features.len()
        ),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let t = Instant::now();
    let shape = AnalyticShape::torus(Point3::new(0.2, 0.1, 0.0), Vector3::new(0.1, 0.0, 1.0), 0.6, 0.2).unwrap();
    let cloud = shape.sample_surface(&mut ChaCha8Rng::seed_from_u64(4), 5000);
    let input = dir.join("ring.ply");
    medial::io::save_cloud(&input, &cloud).map_err(|e| e.to_string())?;
    let mut compared = Vec::new();
    for (source, epsilon) in [("sampled", "0.03"), ("neural", "0.3")] {
        let run = |name: &str| -> Result<std::path::PathBuf, String> {
            let mut c = PipelineConfig::default();
            for (k, v) in [
                ("source", source),
                ("seed", "21"),
                ("depth", "5"),
                ("epsilon", epsilon),
                ("shrink.iterations", "300"),
                ("metrics.resolution", "48"),
                ("metrics.samples", "3000"),
                ("train.profile", "desk"),
                ("train.steps", "150"),
                ("cache", "false"),
            ] {
                c.set(k, v).map_err(|e| e.to_string())?;
            }
            c.set("input", input.to_str().unwrap()).map_err(|e| e.to_string())?;
            c.set("output", dir.join(format!("{source}_{name}")).to_str().unwrap())
                .map_err(|e| e.to_string())?;
            Ok(run_pipeline(&c).map_err(|e| e.to_string())?.output)
        };
        let (a, b) = (run("a")?, run("b")?);
        for f in ["membrane.ma", "metrics.csv", "manifest.txt"] {
            let x = std::fs::read(a.join(f)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.join(f)).map_err(|e| e.to_string())?;
            if x != y {
                return Err(format!("{source}: {f} differs between runs"));
            }
            compared.push(format!("{source}/{f}"));
        }
    }
    check(
        true,
        format!(
            "{} files byte-identical ({}), {:.1}s",
            compared.len(),
            compared.join(", "),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let dir = tempfile::tempdir().expect("temporary directory");
    let d = dir.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("ball identity", Box::new(ball_identity)),
        ("mf axioms", Box::new(mf_axioms)),
        ("extraction topology", Box::new(extraction_topology)),
        ("shrink convergence", Box::new(shrink_convergence)),
        ("medial accuracy torus", Box::new(|| medial_accuracy(d))),
        ("gradient oracles", Box::new(gradient_oracles)),
        ("reconstruction sanity", Box::new(|| reconstruction_sanity(d))),
        ("c_avg calibration", Box::new(c_avg_calibration)),
        ("neural desk run", Box::new(neural_desk_run)),
        ("feature consolidation", Box::new(|| feature_consolidation(d))),
        ("determinism", Box::new(|| determinism(d))),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, run) in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run())) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
