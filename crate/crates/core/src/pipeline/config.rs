//! Flat `key=value` pipeline configuration.

use crate::error::{Error, Result};
use crate::extract::ExtractConfig;
use crate::features::FeatureConfig;
use crate::neural::TrainConfig;
use crate::shrink::ShrinkConfig;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

/// Where the sdf / medial field pair comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    /// Analytic for scene inputs, neural otherwise.
    Auto,
    Analytic,
    Sampled,
    Neural,
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::Auto => "auto",
            SourceKind::Analytic => "analytic",
            SourceKind::Sampled => "sampled",
            SourceKind::Neural => "neural",
        }
    }

    fn parse(v: &str) -> Result<Self> {
        match v {
            "auto" => Ok(SourceKind::Auto),
            "analytic" => Ok(SourceKind::Analytic),
            "sampled" => Ok(SourceKind::Sampled),
            "neural" => Ok(SourceKind::Neural),
            _ => Err(Error::invalid(format!("unknown field source {v:?}"))),
        }
    }
}

/// Coordinate frame of written geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// The unit box the pipeline works in.
    Normalized,
    /// The coordinates of the input file.
    Input,
}

/// Base training settings before `train.*` overrides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainProfile {
    Full,
    Desk,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub source: SourceKind,
    pub output: PathBuf,
    pub seed: u64,
    pub normalize: bool,
    pub output_frame: Frame,
    /// Surface samples drawn from mesh and scene inputs.
    pub mesh_samples: usize,
    pub extract: ExtractConfig,
    pub shrink: ShrinkConfig,
    pub train_profile: TrainProfile,
    train_overrides: BTreeMap<String, String>,
    pub features: bool,
    pub feature_rounds: usize,
    pub feature: FeatureConfig,
    pub metrics: bool,
    pub metrics_resolution: usize,
    pub metrics_samples: usize,
    /// Reuse cached grids.
    pub cache: bool,
    pub cache_dir: Option<PathBuf>,
    explicit: BTreeSet<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            source: SourceKind::Auto,
            output: PathBuf::from("medial_out"),
            seed: 0,
            normalize: true,
            output_frame: Frame::Normalized,
            mesh_samples: 100_000,
            extract: ExtractConfig::default(),
            shrink: ShrinkConfig::default(),
            train_profile: TrainProfile::Full,
            train_overrides: BTreeMap::new(),
            features: false,
            feature_rounds: 1,
            feature: FeatureConfig::default(),
            metrics: true,
            metrics_resolution: 128,
            metrics_samples: 20_000,
            cache: true,
            cache_dir: None,
            explicit: BTreeSet::new(),
        }
    }
}

/// Keys that shape results, in manifest order. `train.*` keys follow
/// `train.profile`.
const KEYS: &[&str] = &[
    "input",
    "source",
    "seed",
    "normalize",
    "output_frame",
    "mesh_samples",
    "epsilon",
    "depth",
    "interior_mask",
    "min_component_faces",
    "shrink.lambda_volume",
    "shrink.lambda_laplacian",
    "shrink.iterations",
    "shrink.initial_step",
    "shrink.max_halvings",
    "shrink.weight_refresh",
    "shrink.volume_ratio",
    "shrink.stop_ratio",
    "shrink.cg_iterations",
    "shrink.max_move",
    "shrink.smoothing",
    "train.profile",
    "features",
    "feature_rounds",
    "feature.angle_band",
    "feature.candidate_cells",
    "feature.offset_cells",
    "feature.qem_neighbors",
    "feature.singular_clamp",
    "metrics",
    "metrics.resolution",
    "metrics.samples",
];

/// Keys that only affect where things go, left out of the manifest.
const LOCATION_KEYS: &[&str] = &["output", "cache", "cache_dir"];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::invalid(format!("bad value {v:?} for {key}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::invalid(format!("bad value {v:?} for {key}, expected true or false"))),
    }
}

impl PipelineConfig {
    /// Applies one setting and marks it as explicitly set.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if let Some(k) = key.strip_prefix("train.").filter(|k| *k != "profile") {
            if k == "seed" {
                return Err(Error::invalid("the training seed is derived from `seed`"));
            }
            TrainConfig::default().set(k, value)?;
            self.train_overrides.insert(k.to_string(), value.to_string());
            self.explicit.insert(key.to_string());
            return Ok(());
        }
        let s = &mut self.shrink;
        let e = &mut self.extract;
        let f = &mut self.feature;
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "source" => self.source = SourceKind::parse(value)?,
            "output" => self.output = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "normalize" => self.normalize = flag(key, value)?,
            "output_frame" => {
                self.output_frame = match value {
                    "normalized" => Frame::Normalized,
                    "input" => Frame::Input,
                    _ => return Err(Error::invalid(format!("bad value {value:?} for output_frame"))),
                }
            }
            "mesh_samples" => self.mesh_samples = num(key, value)?,
            "epsilon" => e.epsilon = num(key, value)?,
            "depth" => e.depth = num(key, value)?,
            "interior_mask" => e.interior_mask = flag(key, value)?,
            "min_component_faces" => e.min_component_faces = num(key, value)?,
            "shrink.lambda_volume" => s.lambda_volume = num(key, value)?,
            "shrink.lambda_laplacian" => s.lambda_laplacian = num(key, value)?,
            "shrink.iterations" => s.iterations = num(key, value)?,
            "shrink.initial_step" => s.initial_step = num(key, value)?,
            "shrink.max_halvings" => s.max_halvings = num(key, value)?,
            "shrink.weight_refresh" => s.weight_refresh = num(key, value)?,
            "shrink.volume_ratio" => s.volume_ratio = num(key, value)?,
            "shrink.stop_ratio" => s.stop_ratio = num(key, value)?,
            "shrink.cg_iterations" => s.cg_iterations = num(key, value)?,
            "shrink.max_move" => s.max_move = num(key, value)?,
            "shrink.smoothing" => s.smoothing = num(key, value)?,
            "train.profile" => {
                self.train_profile = match value {
                    "full" => TrainProfile::Full,
                    "desk" => TrainProfile::Desk,
                    _ => return Err(Error::invalid(format!("bad value {value:?} for train.profile"))),
                }
            }
            "features" => self.features = flag(key, value)?,
            "feature_rounds" => self.feature_rounds = num(key, value)?,
            "feature.angle_band" => f.angle_band = num(key, value)?,
            "feature.candidate_cells" => f.candidate_cells = num(key, value)?,
            "feature.offset_cells" => f.offset_cells = num(key, value)?,
            "feature.qem_neighbors" => f.qem_neighbors = num(key, value)?,
            "feature.singular_clamp" => f.singular_clamp = num(key, value)?,
            "metrics" => self.metrics = flag(key, value)?,
            "metrics.resolution" => self.metrics_resolution = num(key, value)?,
            "metrics.samples" => self.metrics_samples = num(key, value)?,
            "cache" => self.cache = flag(key, value)?,
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            _ => return Err(Error::invalid(format!("unknown setting {key:?}"))),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Current value of a setting in its `key=value` spelling.
    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(k) = key.strip_prefix("train.").filter(|k| *k != "profile") {
            return self.train_config().to_pairs().into_iter().find(|(n, _)| n == k).map(|(_, v)| v);
        }
        let s = &self.shrink;
        let e = &self.extract;
        let f = &self.feature;
        Some(match key {
            "input" => self.input.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "source" => self.source.name().into(),
            "output" => self.output.display().to_string(),
            "seed" => self.seed.to_string(),
            "normalize" => self.normalize.to_string(),
            "output_frame" => match self.output_frame {
                Frame::Normalized => "normalized".into(),
                Frame::Input => "input".into(),
            },
            "mesh_samples" => self.mesh_samples.to_string(),
            "epsilon" => e.epsilon.to_string(),
            "depth" => e.depth.to_string(),
            "interior_mask" => e.interior_mask.to_string(),
            "min_component_faces" => e.min_component_faces.to_string(),
            "shrink.lambda_volume" => s.lambda_volume.to_string(),
            "shrink.lambda_laplacian" => s.lambda_laplacian.to_string(),
            "shrink.iterations" => s.iterations.to_string(),
            "shrink.initial_step" => s.initial_step.to_string(),
            "shrink.max_halvings" => s.max_halvings.to_string(),
            "shrink.weight_refresh" => s.weight_refresh.to_string(),
            "shrink.volume_ratio" => s.volume_ratio.to_string(),
            "shrink.stop_ratio" => s.stop_ratio.to_string(),
            "shrink.cg_iterations" => s.cg_iterations.to_string(),
            "shrink.max_move" => s.max_move.to_string(),
            "shrink.smoothing" => s.smoothing.to_string(),
            "train.profile" => match self.train_profile {
                TrainProfile::Full => "full".into(),
                TrainProfile::Desk => "desk".into(),
            },
            "features" => self.features.to_string(),
            "feature_rounds" => self.feature_rounds.to_string(),
            "feature.angle_band" => f.angle_band.to_string(),
            "feature.candidate_cells" => f.candidate_cells.to_string(),
            "feature.offset_cells" => f.offset_cells.to_string(),
            "feature.qem_neighbors" => f.qem_neighbors.to_string(),
            "feature.singular_clamp" => f.singular_clamp.to_string(),
            "metrics" => self.metrics.to_string(),
            "metrics.resolution" => self.metrics_resolution.to_string(),
            "metrics.samples" => self.metrics_samples.to_string(),
            "cache" => self.cache.to_string(),
            "cache_dir" => self.cache_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            _ => return None,
        })
    }

    /// Training settings: the profile's base with `train.*` overrides applied.
    /// The seed is left at the base value; the pipeline derives its own.
    pub fn train_config(&self) -> TrainConfig {
        let mut c = match self.train_profile {
            TrainProfile::Full => TrainConfig::default(),
            TrainProfile::Desk => TrainConfig::desk(),
        };
        for (k, v) in &self.train_overrides {
            c.set(k, v).expect("validated when set");
        }
        c
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Every result-shaping setting with its value and whether it was set
    /// explicitly, in a fixed order.
    pub fn settings(&self) -> Vec<(String, String, bool)> {
        let mut out = Vec::new();
        for &k in KEYS {
            out.push((k.to_string(), self.get(k).unwrap_or_default(), self.is_explicit(k)));
            if k == "train.profile" {
                for (name, value) in self.train_config().to_pairs() {
                    if name == "seed" {
                        continue;
                    }
                    let key = format!("train.{name}");
                    let explicit = self.is_explicit(&key);
                    out.push((key, value, explicit));
                }
            }
        }
        out
    }

    /// Parses `key=value` lines; `#` starts a comment. `train.profile` is
    /// applied before other keys regardless of position.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let mut c = PipelineConfig::default();
        pairs.sort_by_key(|(_, k, _)| k != "train.profile");
        for (line, k, v) in pairs {
            c.set(&k, &v).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: e.to_string(),
            })?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Checks value ranges and that the input exists.
    pub fn validate(&self) -> Result<()> {
        let input = self.input.as_ref().ok_or_else(|| Error::invalid("no input given"))?;
        if !input.exists() {
            return Err(Error::invalid(format!("input {} does not exist", input.display())));
        }
        self.extract.validate()?;
        self.shrink.validate()?;
        self.train_config().validate()?;
        if self.features {
            FeatureConfig {
                cell_size: 1.0,
                ..self.feature.clone()
            }
            .validate()?;
        }
        if self.mesh_samples == 0 {
            return Err(Error::invalid("mesh_samples must be positive"));
        }
        if self.metrics && (self.metrics_resolution < 2 || self.metrics_samples == 0) {
            return Err(Error::invalid("metrics need a resolution of at least 2 and some samples"));
        }
        Ok(())
    }

    pub fn location_keys() -> &'static [&'static str] {
        LOCATION_KEYS
    }
}
