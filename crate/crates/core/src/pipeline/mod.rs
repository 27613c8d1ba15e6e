//! End-to-end runs: load and normalize the input, build the fields, extract
//! and shrink the cover, optionally refine with feature points, evaluate,
//! and write every artifact plus a manifest.

mod config;
mod normalize;

pub use config::{Frame, PipelineConfig, SourceKind, TrainProfile};
pub use normalize::{normalize, Normalization};

use crate::error::{Error, Result};
use crate::extract::{cached_qmdf_grid, cover_from_grid, grid_cache_path, sample_qmdf_grid, Cover, ScalarGrid};
use crate::features::{consolidate, ConsolidationLog, FeatureConfig, FeaturePointSet};
use crate::fields::scene::read_scene;
use crate::fields::{AnalyticShape, FieldBundle, SampledFields};
use crate::geom::{NNIndex, PointCloud, TriangleMesh, Vector3};
use crate::io::{format_ma, format_obj, load_geometry, write_atomic, Geometry};
use crate::metrics::{chains_smoothness, chamfer_hausdorff, cloud_chamfer_hausdorff, membrane_boundary_chains, reconstruct, MetricsReport};
use crate::neural::{train_joint, TrainedModel};
use crate::shrink::{shrink, MedialMembrane, ShrinkLog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Env var naming the grid cache directory.
pub const CACHE_ENV: &str = "MEDIAL_CACHE_DIR";
/// Triangulation resolution of analytic reference surfaces.
pub const ANALYTIC_REFERENCE_RESOLUTION: usize = 256;

/// Input geometry before field construction.
#[derive(Clone, Debug)]
pub enum Input {
    Shape(AnalyticShape),
    Mesh(TriangleMesh),
    Cloud(PointCloud),
}

impl Input {
    pub fn kind(&self) -> &'static str {
        match self {
            Input::Shape(s) => s.kind(),
            Input::Mesh(_) => "mesh",
            Input::Cloud(_) => "cloud",
        }
    }
}

/// Loads a `.scene` file holding one analytic shape, an OBJ mesh, or a
/// PLY / XYZ cloud.
pub fn load_input(path: &Path) -> Result<Input> {
    let is_scene = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("scene"));
    if is_scene {
        let mut shapes = read_scene(path)?;
        if shapes.len() != 1 {
            return Err(Error::Unsupported(format!(
                "{} holds {} shapes; the medial field of a composition is not analytic",
                path.display(),
                shapes.len()
            )));
        }
        return Ok(Input::Shape(shapes.remove(0)));
    }
    Ok(match load_geometry(path)? {
        Geometry::Mesh(m) => Input::Mesh(m),
        Geometry::Cloud(c) => Input::Cloud(c),
    })
}

/// Normalizes an input, or leaves it alone with an identity record.
pub fn normalize_input(input: Input, enabled: bool) -> Result<(Input, Normalization)> {
    if !enabled {
        return Ok((input, Normalization::identity()));
    }
    Ok(match input {
        Input::Shape(s) => {
            let n = Normalization::fit(&s.bounds())?;
            (Input::Shape(n.apply_shape(&s)), n)
        }
        Input::Mesh(m) => match normalize(Geometry::Mesh(m))? {
            (Geometry::Mesh(m), n) => (Input::Mesh(m), n),
            _ => unreachable!(),
        },
        Input::Cloud(c) => match normalize(Geometry::Cloud(c))? {
            (Geometry::Cloud(c), n) => (Input::Cloud(c), n),
            _ => unreachable!(),
        },
    })
}

/// Area-weighted surface samples of a mesh with face normals.
pub fn sample_mesh<R: Rng + ?Sized>(mesh: &TriangleMesh, rng: &mut R, count: usize) -> Result<PointCloud> {
    let (points, normals) = mesh.sample_surface(rng, count)?;
    PointCloud::new(points, Some(normals))
}

/// Adds feature points to an oriented cloud, each with the normalized mean
/// normal of its `k` nearest samples (the bisector across a crease).
pub fn augment_cloud(cloud: &PointCloud, features: &FeaturePointSet, k: usize) -> Result<PointCloud> {
    let normals = cloud.normals()?;
    let index = NNIndex::build(&cloud.points)?;
    let mut points = cloud.points.clone();
    let mut out_normals = normals.to_vec();
    for p in &features.points {
        let n: Vector3 = index.knn(p, k).iter().map(|&(i, _)| normals[i]).sum();
        if n.norm() > 1e-6 {
            points.push(*p);
            out_normals.push(n.normalize());
        }
    }
    PointCloud::new(points, Some(out_normals))
}

/// Cloud normals from the sdf gradient, for clouds read without them.
fn normals_from_field(cloud: &PointCloud, bundle: &FieldBundle) -> Result<PointCloud> {
    let normals = cloud
        .points
        .iter()
        .map(|p| {
            let g = bundle.sdf.gradient(p);
            if g.norm() > 0.0 {
                g.normalize()
            } else {
                Vector3::z()
            }
        })
        .collect();
    PointCloud::new(cloud.points.clone(), Some(normals))
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name,
            source: Box::new(other),
        },
    })
}

/// One extraction and shrink pass.
#[derive(Clone, Debug)]
pub struct RoundSummary {
    pub cover: Cover,
    /// Membrane in the normalized frame.
    pub membrane: MedialMembrane,
    pub shrink: ShrinkLog,
    /// Feature points found on this round's membrane.
    pub features: FeaturePointSet,
    pub consolidation: Option<ConsolidationLog>,
    pub grid_cached: bool,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output: PathBuf,
    pub source: SourceKind,
    pub normalization: Normalization,
    pub rounds: Vec<RoundSummary>,
    pub metrics: Option<MetricsReport>,
}

/// Seeds drawn in order from the generator seeded with the global seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seeds {
    pub sampling: u64,
    pub training: u64,
    pub metrics: u64,
}

impl Seeds {
    pub fn derive(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Seeds {
            sampling: rng.gen(),
            training: rng.gen(),
            metrics: rng.gen(),
        }
    }
}

/// Deterministic `key=value` record of a run.
#[derive(Default)]
struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    fn put(&mut self, key: impl AsRef<str>, value: impl std::fmt::Display) {
        let value = value.to_string().replace('\n', " ");
        self.lines.push(format!("{}={}", key.as_ref(), value));
    }
}

/// Wall-clock and cache notes, kept apart from the manifest so manifests
/// of identical runs stay identical.
struct RunLog {
    lines: Vec<String>,
    start: Instant,
}

impl RunLog {
    fn timed<T>(&mut self, what: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.lines.push(format!("time {what} {:.3}s", t.elapsed().as_secs_f64()));
        r
    }
}

struct Writer<'a> {
    root: &'a Path,
    manifest: Manifest,
}

impl Writer<'_> {
    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(name), bytes)?;
        self.manifest
            .put(format!("artifact.{name}"), format!("{:x}", Sha256::digest(bytes)));
        Ok(())
    }
}

fn resolve_source(requested: SourceKind, input: &Input) -> Result<SourceKind> {
    Ok(match (requested, input) {
        (SourceKind::Auto, Input::Shape(_)) => SourceKind::Analytic,
        (SourceKind::Auto, _) => SourceKind::Neural,
        (SourceKind::Analytic, Input::Shape(_)) => SourceKind::Analytic,
        (SourceKind::Analytic, _) => {
            return Err(Error::invalid("the analytic source needs a .scene input"));
        }
        (s, _) => s,
    })
}

fn model_name(config: &PipelineConfig, input: &Input) -> String {
    config
        .input
        .as_ref()
        .and_then(|p| p.file_stem())
        .and_then(|s| s.to_str())
        .map(|s| s.replace(',', "_"))
        .unwrap_or_else(|| input.kind().to_string())
}

fn cache_dir(config: &PipelineConfig) -> PathBuf {
    config
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| config.output.join("cache"))
}

fn frame_membrane(m: &MedialMembrane, config: &PipelineConfig, n: &Normalization) -> Result<MedialMembrane> {
    match config.output_frame {
        Frame::Normalized => Ok(m.clone()),
        Frame::Input => n.invert_membrane(m),
    }
}

fn frame_mesh(m: &TriangleMesh, config: &PipelineConfig, n: &Normalization) -> TriangleMesh {
    match config.output_frame {
        Frame::Normalized => m.clone(),
        Frame::Input => n.invert_mesh(m),
    }
}

fn frame_features(f: &FeaturePointSet, config: &PipelineConfig, n: &Normalization) -> FeaturePointSet {
    match config.output_frame {
        Frame::Normalized => f.clone(),
        Frame::Input => n.invert_features(f),
    }
}

fn feature_text(f: &FeaturePointSet) -> Vec<u8> {
    let mut buf = Vec::new();
    f.write(&mut buf).expect("writing to memory");
    buf
}

/// What the run is measured against.
enum Reference {
    Mesh(TriangleMesh),
    Points(Vec<crate::geom::Point3>),
}

/// Runs every stage and writes the artifacts under `config.output`.
///
/// Layout: `roundN/{cover.obj, membrane.ma, features.txt, model.ckpt,
/// train_log.csv}` per pass, the final `cover.obj`, `membrane.ma`,
/// `features.txt`, `metrics.csv`, `metrics.txt`, the deterministic
/// `manifest.txt`, and `run.log` with timings. Errors name the failing
/// stage; artifacts written before it are kept.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    std::fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    let mut log = RunLog {
        lines: vec![format!("medial {}", env!("CARGO_PKG_VERSION"))],
        start: Instant::now(),
    };
    let result = run_stages(config, &mut log);
    match &result {
        Ok(_) => log.lines.push("status ok".into()),
        Err(e) => log.lines.push(format!("status failed: {e}")),
    }
    log.lines.push(format!("time total {:.3}s", log.start.elapsed().as_secs_f64()));
    let mut text = log.lines.join("\n");
    text.push('\n');
    write_atomic(&config.output.join("run.log"), text.as_bytes())?;
    result
}

fn run_stages(config: &PipelineConfig, log: &mut RunLog) -> Result<RunSummary> {
    stage("config", || config.validate())?;
    let seeds = Seeds::derive(config.seed);
    let mut w = Writer {
        root: &config.output,
        manifest: Manifest::default(),
    };
    let m = &mut w.manifest;
    m.put("medial.version", env!("CARGO_PKG_VERSION"));
    m.put("seed", config.seed);
    m.put("seed.sampling", seeds.sampling);
    m.put("seed.training", seeds.training);
    m.put("seed.metrics", seeds.metrics);
    for (k, v, explicit) in config.settings() {
        m.put(format!("{}.{k}", if explicit { "set" } else { "default" }), v);
    }

    let path = config.input.clone().expect("validated");
    let input = log.timed("load", || stage("load", || load_input(&path)))?;
    let (input, norm) = stage("normalize", || normalize_input(input, config.normalize))?;
    let source = resolve_source(config.source, &input)?;
    let m = &mut w.manifest;
    m.put("source", source.name());
    m.put("input.kind", input.kind());
    m.put(
        "normalization.center",
        format!("{} {} {}", norm.center.x, norm.center.y, norm.center.z),
    );
    m.put("normalization.scale", norm.scale);

    let mut rng = ChaCha8Rng::seed_from_u64(seeds.sampling);
    let cloud = stage("load", || -> Result<Option<PointCloud>> {
        Ok(match &input {
            Input::Shape(_) if source == SourceKind::Analytic && !config.features => None,
            Input::Shape(s) => Some(s.sample_surface(&mut rng, config.mesh_samples)),
            Input::Mesh(mesh) => Some(sample_mesh(mesh, &mut rng, config.mesh_samples)?),
            Input::Cloud(c) => Some(c.clone()),
        })
    })?;
    if let Some(c) = &cloud {
        w.manifest.put("cloud.points", c.len());
        w.manifest.put("cloud.normals", c.normals.is_some());
    }

    let mut train = config.train_config();
    train.seed = seeds.training;
    let rounds_max = if config.features { config.feature_rounds } else { 0 };
    let mut work_cloud = cloud.clone();
    let mut all = FeaturePointSet::default();
    let mut rounds: Vec<RoundSummary> = Vec::new();
    let mut halted = None;
    for round in 0..=rounds_max {
        let dir = format!("round{round}");
        let key = |k: &str| format!("round.{round}.{k}");
        let (bundle, model) = log.timed(&format!("{dir} fields"), || {
            stage("fields", || build_fields(source, &input, work_cloud.as_ref(), &train))
        })?;
        if let Some(model) = &model {
            w.emit(&format!("{dir}/model.ckpt"), &model.checkpoint().to_bytes())?;
            let mut csv = Vec::new();
            model.log.write_csv(&mut csv).map_err(|e| Error::io(&config.output, e))?;
            w.emit(&format!("{dir}/train_log.csv"), &csv)?;
            w.manifest.put(key("train.fingerprint"), crate::neural::fingerprint(&model.mlp));
            if let Some(last) = model.log.rows.last() {
                w.manifest.put(key("train.final_total"), last.total);
            }
        }
        w.manifest.put(key("fields"), bundle.provenance.fingerprint());

        let (grid, cached) = log.timed(&format!("{dir} grid"), || stage("extract", || qmdf_grid(&bundle, config)))?;
        log.lines.push(format!("{dir} grid cache {}", if cached { "hit" } else { "miss" }));
        let cover = stage("extract", || cover_from_grid(&grid, &config.extract))?;
        w.emit(
            &format!("{dir}/cover.obj"),
            format_obj(&frame_mesh(&cover.mesh, config, &norm)).as_bytes(),
        )?;
        let m = &mut w.manifest;
        m.put(key("cover.vertices"), cover.mesh.vertices().len());
        m.put(key("cover.faces"), cover.mesh.faces().len());
        m.put(key("cover.euler"), cover.euler_characteristic);
        m.put(key("cover.cell_size"), cover.cell_size);
        m.put(key("cover.dropped_components"), cover.dropped_components);
        for (i, warn) in cover.warnings.iter().enumerate() {
            m.put(key(&format!("cover.warning.{i}")), warn);
        }

        let (membrane, slog) = log.timed(&format!("{dir} shrink"), || {
            stage("shrink", || shrink(&cover.mesh, &bundle, &config.shrink))
        })?;
        w.emit(
            &format!("{dir}/membrane.ma"),
            format_ma(&frame_membrane(&membrane, config, &norm)?).as_bytes(),
        )?;
        let m = &mut w.manifest;
        m.put(key("shrink.iterations"), slog.iterations);
        m.put(key("shrink.accepted"), slog.accepted);
        m.put(key("shrink.volume_ratio"), slog.volume_ratio());
        m.put(key("membrane.euler"), membrane.mesh.euler_characteristic());
        for (i, warn) in slog.warnings.iter().enumerate() {
            m.put(key(&format!("shrink.warning.{i}")), warn);
        }

        let mut summary = RoundSummary {
            cover,
            membrane,
            shrink: slog,
            features: FeaturePointSet::default(),
            consolidation: None,
            grid_cached: cached,
        };
        let wants_features = config.features && (round < rounds_max || rounds_max == 0);
        if wants_features {
            let base = cloud.as_ref().expect("features need a cloud");
            let fcloud = if base.normals.is_some() {
                base.clone()
            } else {
                normals_from_field(base, &bundle)?
            };
            let fcfg = FeatureConfig {
                cell_size: summary.cover.cell_size,
                ..config.feature.clone()
            };
            let (found, clog) = log.timed(&format!("{dir} features"), || {
                stage("features", || consolidate(&summary.membrane, &bundle, &fcloud, &fcfg))
            })?;
            let spacing = fcloud.mean_spacing(&NNIndex::build(&fcloud.points)?);
            let added = all.merge(&found, 2.0 * spacing);
            w.emit(
                &format!("{dir}/features.txt"),
                &feature_text(&frame_features(&found, config, &norm)),
            )?;
            let m = &mut w.manifest;
            m.put(key("features.found"), found.len());
            m.put(key("features.added"), added);
            m.put(key("features.candidates"), clog.candidate_vertices);
            for (i, warn) in clog.warnings.iter().enumerate() {
                m.put(key(&format!("features.warning.{i}")), warn);
            }
            summary.features = found;
            summary.consolidation = Some(clog);
            if round < rounds_max {
                if added == 0 {
                    halted = Some("no new feature points");
                } else {
                    match source {
                        SourceKind::Sampled => {
                            work_cloud = Some(augment_cloud(base, &all, fcfg.qem_neighbors)?);
                        }
                        SourceKind::Neural => train.features = all.points.clone(),
                        _ => halted = Some("analytic fields do not depend on feature points"),
                    }
                }
            }
        }
        rounds.push(summary);
        if let Some(why) = halted {
            w.manifest.put("rounds.halted", why);
            break;
        }
    }
    w.manifest.put("rounds", rounds.len());

    let last = rounds.last().expect("at least one round");
    w.emit("cover.obj", format_obj(&frame_mesh(&last.cover.mesh, config, &norm)).as_bytes())?;
    w.emit("membrane.ma", format_ma(&frame_membrane(&last.membrane, config, &norm)?).as_bytes())?;
    if config.features {
        w.emit("features.txt", &feature_text(&frame_features(&all, config, &norm)))?;
    }

    let metrics = if config.metrics {
        let reference = match (&input, &cloud) {
            (Input::Shape(s), _) => Reference::Mesh(s.surface_mesh(ANALYTIC_REFERENCE_RESOLUTION)),
            (Input::Mesh(mesh), _) => Reference::Mesh(mesh.clone()),
            (Input::Cloud(_), Some(c)) => Reference::Points(c.points.clone()),
            (Input::Cloud(_), None) => unreachable!("cloud inputs keep their cloud"),
        };
        let name = model_name(config, &input);
        let report = log.timed("metrics", || {
            stage("metrics", || {
                evaluate_membrane(&name, &last.membrane, &reference, config, seeds.metrics)
            })
        })?;
        w.emit("metrics.csv", report.to_csv().as_bytes())?;
        w.emit("metrics.txt", report.to_text().as_bytes())?;
        Some(report)
    } else {
        None
    };

    let mut text = String::from("# medial run manifest\n");
    for line in &w.manifest.lines {
        writeln!(text, "{line}").unwrap();
    }
    write_atomic(&config.output.join("manifest.txt"), text.as_bytes())?;
    Ok(RunSummary {
        output: config.output.clone(),
        source,
        normalization: norm,
        rounds,
        metrics,
    })
}

fn evaluate_membrane(name: &str, m: &MedialMembrane, reference: &Reference, config: &PipelineConfig, seed: u64) -> Result<MetricsReport> {
    let rec = reconstruct(m, config.metrics_resolution)?;
    let (cd, hd) = match reference {
        Reference::Mesh(r) => chamfer_hausdorff(&rec, r, config.metrics_samples, seed)?,
        Reference::Points(p) => cloud_chamfer_hausdorff(&rec, p, config.metrics_samples, seed)?,
    };
    Ok(MetricsReport {
        model: name.to_string(),
        chamfer: cd,
        hausdorff: hd,
        euler: m.mesh.euler_characteristic(),
        c_avg: chains_smoothness(&membrane_boundary_chains(m))?,
        n_samples: config.metrics_samples,
        seed,
    })
}

/// Fields for one round; the trained model comes back for neural sources.
pub fn build_fields(
    source: SourceKind,
    input: &Input,
    cloud: Option<&PointCloud>,
    train: &crate::neural::TrainConfig,
) -> Result<(FieldBundle, Option<TrainedModel>)> {
    match (source, input) {
        (SourceKind::Analytic, Input::Shape(s)) => Ok((FieldBundle::analytic(s.clone()), None)),
        (SourceKind::Sampled, _) => {
            let cloud = cloud.ok_or_else(|| Error::invalid("the sampled source needs a point cloud"))?;
            if cloud.normals.is_none() {
                return Err(Error::invalid("the sampled source needs oriented normals"));
            }
            Ok((FieldBundle::sampled(SampledFields::new(cloud.clone())?), None))
        }
        (SourceKind::Neural, _) => {
            let cloud = cloud.ok_or_else(|| Error::invalid("training needs a point cloud"))?;
            let model = train_joint(cloud, train)?;
            Ok((model.bundle(), Some(model)))
        }
        _ => Err(Error::invalid(format!(
            "source {} does not fit a {} input",
            source.name(),
            input.kind()
        ))),
    }
}

/// Fields named by a file: a `.scene` shape, a `.ckpt` network, or an
/// oriented cloud (meshes are sampled with `samples` points from `seed`).
/// No normalization is applied.
pub fn load_fields(path: &Path, samples: usize, seed: u64) -> Result<FieldBundle> {
    let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
    if ext.as_deref() == Some("ckpt") {
        let c = crate::neural::Checkpoint::load(path)?;
        return Ok(FieldBundle::neural(std::sync::Arc::new(c.mlp), c.bounds));
    }
    let cloud = match load_input(path)? {
        Input::Shape(s) => return Ok(FieldBundle::analytic(s)),
        Input::Mesh(m) => sample_mesh(&m, &mut ChaCha8Rng::seed_from_u64(seed), samples)?,
        Input::Cloud(c) => c,
    };
    Ok(FieldBundle::sampled(SampledFields::new(cloud)?))
}

/// Q-MDF grid, read from or written to the cache directory.
fn qmdf_grid(bundle: &FieldBundle, config: &PipelineConfig) -> Result<(ScalarGrid, bool)> {
    let dir = cache_dir(config);
    if config.cache {
        return cached_qmdf_grid(bundle, &config.extract, &dir);
    }
    let grid = sample_qmdf_grid(bundle, &config.extract)?;
    let path = grid_cache_path(bundle, &config.extract, &dir);
    let mut bytes = Vec::new();
    grid.write(&mut bytes).map_err(|e| Error::io(&path, e))?;
    write_atomic(&path, &bytes)?;
    Ok((grid, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeaturePointSet;
    use crate::geom::Point3;

    #[test]
    fn seeds_are_fixed_by_the_global_seed() {
        assert_eq!(Seeds::derive(3), Seeds::derive(3));
        assert_ne!(Seeds::derive(3), Seeds::derive(4));
        let s = Seeds::derive(3);
        assert_ne!(s.sampling, s.training);
    }

    #[test]
    fn crease_points_get_bisector_normals() {
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 19.0;
            for j in 1..6 {
                let s = j as f64 * 0.05;
                points.push(Point3::new(t, s, 0.0));
                normals.push(Vector3::z());
                points.push(Point3::new(t, 0.0, s));
                normals.push(Vector3::y());
            }
        }
        let cloud = PointCloud::new(points, Some(normals)).unwrap();
        let f = FeaturePointSet {
            points: vec![Point3::new(0.5, 0.0, 0.0)],
            sources: vec![Point3::new(0.5, 0.0, 0.0)],
            residuals: vec![0.0],
        };
        let out = augment_cloud(&cloud, &f, 10).unwrap();
        assert_eq!(out.len(), cloud.len() + 1);
        let n = out.normals().unwrap()[cloud.len()];
        assert!((n - Vector3::new(0.0, 1.0, 1.0).normalize()).norm() < 1e-12);
    }

    #[test]
    fn scene_inputs_must_hold_one_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("two.scene");
        std::fs::write(&p, "sphere 0 0 0 1\nsphere 1 0 0 1\n").unwrap();
        assert!(matches!(load_input(&p), Err(Error::Unsupported(_))));
        std::fs::write(&p, "# ok\nsphere 0 0 0 1\n").unwrap();
        assert!(matches!(load_input(&p), Ok(Input::Shape(_))));
    }

    #[test]
    fn failures_name_their_stage() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("bad.obj");
        std::fs::write(&input, "v 0 0 0\nf 1 2 3\n").unwrap();
        let mut c = PipelineConfig::default();
        c.set("input", input.to_str().unwrap()).unwrap();
        c.set("output", dir.path().join("out").to_str().unwrap()).unwrap();
        let err = run_pipeline(&c).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "load", .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
        let log = std::fs::read_to_string(dir.path().join("out/run.log")).unwrap();
        assert!(log.contains("status failed"));
    }

    #[test]
    fn sphere_scene_runs_end_to_end_and_repeats_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let scene = dir.path().join("ball.scene");
        std::fs::write(&scene, "sphere 1 2 3 2\n").unwrap();
        let run = |name: &str| {
            let mut c = PipelineConfig::default();
            for (k, v) in [
                ("epsilon", "0.05"),
                ("depth", "5"),
                ("metrics.resolution", "32"),
                ("metrics.samples", "2000"),
            ] {
                c.set(k, v).unwrap();
            }
            c.set("input", scene.to_str().unwrap()).unwrap();
            c.set("output", dir.path().join(name).to_str().unwrap()).unwrap();
            run_pipeline(&c).unwrap()
        };
        let a = run("a");
        let b = run("b");
        assert_eq!(a.source, SourceKind::Analytic);
        assert_eq!(a.normalization.scale, 0.25);
        let m = &a.rounds[0].membrane;
        let far = m.mesh.vertices().iter().map(|p| p.coords.norm()).fold(0.0, f64::max);
        assert!(far < 0.05, "membrane reaches {far} from the center");
        for f in ["membrane.ma", "metrics.csv", "manifest.txt", "cover.obj"] {
            let x = std::fs::read(a.output.join(f)).unwrap();
            let y = std::fs::read(b.output.join(f)).unwrap();
            assert_eq!(x, y, "{f} differs");
        }
        let manifest = std::fs::read_to_string(a.output.join("manifest.txt")).unwrap();
        assert!(manifest.contains("set.epsilon=0.05"));
        assert!(manifest.contains("default.shrink.iterations=3000"));
        assert!(manifest.contains("default.train.steps="));
        assert!(manifest.contains("artifact.membrane.ma="));
        assert!(!manifest.contains("output=") && !manifest.contains("cache"));
    }
}
