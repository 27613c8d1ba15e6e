//! `medial`: command-line front end. Every stage reads and writes the
//! on-disk formats so stages compose; `pipeline` runs them all.
//!
//! Exit codes: 0 success, 1 other failure, 2 parse error, 3 numerical
//! failure, 4 empty result.

use clap::{Args, Parser, Subcommand};
use medial::extract::{cover_from_grid, sample_qmdf_grid, ExtractConfig, ScalarGrid};
use medial::features::{consolidate, mesh_feature_points, FeatureConfig};
use medial::fields::FieldBundle;
use medial::geom::PointCloud;
use medial::io::{load_geometry, load_membrane, save_membrane, save_mesh, write_atomic, Geometry};
use medial::metrics::{
    chains_smoothness, chamfer_hausdorff, cloud_chamfer_hausdorff, membrane_boundary_chains, reconstruct, MetricsReport,
};
use medial::neural::{train_joint, TrainConfig};
use medial::pipeline::{load_fields, load_input, run_pipeline, sample_mesh, Input, PipelineConfig, ANALYTIC_REFERENCE_RESOLUTION};
use medial::shrink::{shrink, ShrinkConfig};
use medial::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "medial", version, about = "Medial axis transforms from quasi-medial distance fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a joint sdf / medial field network on a point cloud or mesh.
    Fit(FitArgs),
    /// Sample the Q-MDF on a grid, or print field values at points.
    Field(FieldArgs),
    /// Extract the epsilon cover from a grid or from fields.
    Extract(ExtractArgs),
    /// Collapse a cover to a medial membrane.
    Shrink(ShrinkArgs),
    /// Compute feature points from a membrane, or the sharp edges of a mesh.
    Features(FeaturesArgs),
    /// Rebuild the surface described by a membrane.
    Reconstruct(ReconstructArgs),
    /// Compare a membrane's reconstruction with a reference.
    Metrics(MetricsArgs),
    /// Run every stage from a configuration.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct FieldSource {
    /// `.scene` shape, `.ckpt` network, or an oriented cloud / mesh.
    #[arg(long)]
    fields: PathBuf,
    /// Surface samples drawn when the fields come from a mesh.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FieldSource {
    fn load(&self) -> Result<FieldBundle> {
        load_fields(&self.fields, self.samples, self.seed)
    }
}

#[derive(Args)]
struct FitArgs {
    /// Point cloud (PLY / XYZ) or OBJ mesh.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Start from the small laptop-sized settings.
    #[arg(long)]
    desk: bool,
    /// Training setting as key=value, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    settings: Vec<String>,
    /// Write the per-step loss log as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    source: FieldSource,
    /// Grid file to write.
    #[arg(long, required_unless_present = "points")]
    output: Option<PathBuf>,
    /// Print `x y z sdf mf qmdf` for every point of this cloud instead.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    depth: u32,
    /// Sample the Q-MDF outside the solid too.
    #[arg(long)]
    no_mask: bool,
}

#[derive(Args)]
struct ExtractArgs {
    /// Previously sampled grid.
    #[arg(long, conflicts_with = "fields")]
    grid: Option<PathBuf>,
    #[arg(long)]
    fields: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.005)]
    epsilon: f64,
    #[arg(long, default_value_t = 8)]
    depth: u32,
    #[arg(long, default_value_t = 20)]
    min_component_faces: usize,
}

#[derive(Args)]
struct ShrinkArgs {
    #[arg(long)]
    cover: PathBuf,
    #[command(flatten)]
    source: FieldSource,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 3000)]
    iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda_volume: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda_laplacian: f64,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    output: PathBuf,
    /// Membrane to consolidate (needs --fields and --cloud).
    #[arg(long, conflicts_with = "mesh", requires_all = ["fields", "cloud"])]
    membrane: Option<PathBuf>,
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Oriented cloud for marching and plane fitting.
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Grid cell size of the extraction that produced the membrane.
    #[arg(long, default_value_t = 1.0 / 255.0)]
    cell_size: f64,
    /// Mesh whose sharp edges become feature points.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Dihedral threshold for mesh edges, degrees.
    #[arg(long, default_value_t = 30.0)]
    angle: f64,
    /// Spacing of points along mesh edges.
    #[arg(long, default_value_t = 0.01)]
    spacing: f64,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    membrane: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Lattice points along the longest axis.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    membrane: PathBuf,
    /// Reference mesh, cloud or `.scene` shape.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file to write; the text summary always goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Name in the CSV row; defaults to the membrane file stem.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Setting as key=value, repeatable; overrides the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    settings: Vec<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample grids afresh instead of reusing cached ones.
    #[arg(long)]
    no_cache: bool,
}

fn split_setting(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .ok_or_else(|| Error::invalid(format!("expected KEY=VALUE, got {s:?}")))
}

fn input_cloud(path: &Path, samples: usize, seed: u64) -> Result<PointCloud> {
    match load_input(path)? {
        Input::Cloud(c) => Ok(c),
        Input::Mesh(m) => sample_mesh(&m, &mut ChaCha8Rng::seed_from_u64(seed), samples),
        Input::Shape(s) => Ok(s.sample_surface(&mut ChaCha8Rng::seed_from_u64(seed), samples)),
    }
}

fn fit(a: &FitArgs) -> Result<()> {
    let mut config = if a.desk { TrainConfig::desk() } else { TrainConfig::default() };
    for s in &a.settings {
        let (k, v) = split_setting(s)?;
        config.set(k, v)?;
    }
    let cloud = input_cloud(&a.input, a.samples, config.seed)?;
    let model = train_joint(&cloud, &config)?;
    model.checkpoint().save(&a.output)?;
    if let Some(path) = &a.log {
        let mut csv = Vec::new();
        model.log.write_csv(&mut csv).map_err(|e| Error::io(path, e))?;
        write_atomic(path, &csv)?;
    }
    if let Some(last) = model.log.rows.last() {
        eprintln!("trained {} steps, final loss {:.6e}", model.log.rows.len(), last.total);
    }
    Ok(())
}

fn field(a: &FieldArgs) -> Result<()> {
    let bundle = a.source.load()?;
    if let Some(points) = &a.points {
        let cloud = input_cloud(points, a.source.samples, a.source.seed)?;
        let values = bundle.eval_pairs(&cloud.points);
        let mut out = String::new();
        for (p, (s, m)) in cloud.points.iter().zip(values) {
            out.push_str(&format!("{} {} {} {} {} {}\n", p.x, p.y, p.z, s, m, m - s.abs()));
        }
        print!("{out}");
        return Ok(());
    }
    let config = ExtractConfig {
        depth: a.depth,
        interior_mask: !a.no_mask,
        ..ExtractConfig::default()
    };
    let grid = sample_qmdf_grid(&bundle, &config)?;
    grid.save(a.output.as_ref().expect("required by clap"))?;
    let (lo, hi) = grid.min_max();
    eprintln!("grid {:?}, Q-MDF range [{lo:.5}, {hi:.5}]", grid.resolution());
    Ok(())
}

fn extract(a: &ExtractArgs) -> Result<()> {
    let config = ExtractConfig {
        epsilon: a.epsilon,
        depth: a.depth,
        min_component_faces: a.min_component_faces,
        ..ExtractConfig::default()
    };
    let grid = match (&a.grid, &a.fields) {
        (Some(g), _) => ScalarGrid::load(g)?,
        (None, Some(f)) => sample_qmdf_grid(&load_fields(f, a.samples, a.seed)?, &config)?,
        (None, None) => return Err(Error::invalid("give --grid or --fields")),
    };
    let cover = cover_from_grid(&grid, &config)?;
    for w in &cover.warnings {
        eprintln!("warning: {w}");
    }
    save_mesh(&a.output, &cover.mesh)?;
    eprintln!(
        "cover: {} vertices, {} faces, Euler characteristic {}",
        cover.mesh.vertices().len(),
        cover.mesh.faces().len(),
        cover.euler_characteristic
    );
    Ok(())
}

fn run_shrink(a: &ShrinkArgs) -> Result<()> {
    let cover = medial::io::load_mesh(&a.cover)?;
    let bundle = a.source.load()?;
    let config = ShrinkConfig {
        iterations: a.iterations,
        lambda_volume: a.lambda_volume,
        lambda_laplacian: a.lambda_laplacian,
        ..ShrinkConfig::default()
    };
    let (membrane, log) = shrink(&cover, &bundle, &config)?;
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    save_membrane(&a.output, &membrane)?;
    eprintln!("{} iterations, volume ratio {:.3e}", log.iterations, log.volume_ratio());
    Ok(())
}

fn features(a: &FeaturesArgs) -> Result<()> {
    let set = if let Some(mesh) = &a.mesh {
        mesh_feature_points(&medial::io::load_mesh(mesh)?, a.angle.to_radians(), a.spacing)?
    } else {
        let membrane = load_membrane(a.membrane.as_ref().ok_or_else(|| Error::invalid("give --membrane or --mesh"))?)?;
        let bundle = load_fields(a.fields.as_ref().expect("required by clap"), 100_000, 0)?;
        let cloud = match load_geometry(a.cloud.as_ref().expect("required by clap"))? {
            Geometry::Cloud(c) => c,
            Geometry::Mesh(_) => return Err(Error::invalid("--cloud must be a point cloud")),
        };
        let config = FeatureConfig {
            cell_size: a.cell_size,
            ..FeatureConfig::default()
        };
        let (set, log) = consolidate(&membrane, &bundle, &cloud, &config)?;
        for w in &log.warnings {
            eprintln!("warning: {w}");
        }
        set
    };
    set.save(&a.output)?;
    eprintln!("{} feature points", set.len());
    Ok(())
}

fn run_reconstruct(a: &ReconstructArgs) -> Result<()> {
    let mesh = reconstruct(&load_membrane(&a.membrane)?, a.resolution)?;
    save_mesh(&a.output, &mesh)
}

fn metrics(a: &MetricsArgs) -> Result<()> {
    let m = load_membrane(&a.membrane)?;
    let rec = reconstruct(&m, a.resolution)?;
    let (cd, hd) = match load_input(&a.reference)? {
        Input::Shape(s) => chamfer_hausdorff(&rec, &s.surface_mesh(ANALYTIC_REFERENCE_RESOLUTION), a.samples, a.seed)?,
        Input::Mesh(r) => chamfer_hausdorff(&rec, &r, a.samples, a.seed)?,
        Input::Cloud(c) => cloud_chamfer_hausdorff(&rec, &c.points, a.samples, a.seed)?,
    };
    let model = a
        .model
        .clone()
        .unwrap_or_else(|| a.membrane.file_stem().and_then(|s| s.to_str()).unwrap_or("membrane").to_string());
    let report = MetricsReport {
        model,
        chamfer: cd,
        hausdorff: hd,
        euler: m.mesh.euler_characteristic(),
        c_avg: chains_smoothness(&membrane_boundary_chains(&m))?,
        n_samples: a.samples,
        seed: a.seed,
    };
    print!("{}", report.to_text());
    if let Some(path) = &a.output {
        write_atomic(path, report.to_csv().as_bytes())?;
    }
    Ok(())
}

fn pipeline(a: &PipelineArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for s in &a.settings {
        let (k, v) = split_setting(s)?;
        config.set(k, v)?;
    }
    if let Some(p) = &a.input {
        config.set("input", &p.display().to_string())?;
    }
    if let Some(p) = &a.output {
        config.set("output", &p.display().to_string())?;
    }
    if let Some(s) = a.seed {
        config.set("seed", &s.to_string())?;
    }
    if a.no_cache {
        config.set("cache", "false")?;
    }
    let run = run_pipeline(&config)?;
    for (i, r) in run.rounds.iter().enumerate() {
        eprintln!(
            "round {i}: cover {} vertices (EC {}), membrane volume ratio {:.3e}, {} feature points",
            r.cover.mesh.vertices().len(),
            r.cover.euler_characteristic,
            r.shrink.volume_ratio(),
            r.features.len()
        );
    }
    if let Some(m) = &run.metrics {
        eprint!("{}", m.to_text());
    }
    eprintln!("artifacts in {}", run.output.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Field(a) => field(a),
        Command::Extract(a) => extract(a),
        Command::Shrink(a) => run_shrink(a),
        Command::Features(a) => features(a),
        Command::Reconstruct(a) => run_reconstruct(a),
        Command::Metrics(a) => metrics(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
