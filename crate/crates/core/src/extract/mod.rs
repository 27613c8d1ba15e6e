//! Grid sampling of the Q-MDF and extraction of the ε-cover, a closed
//! surface wrapped tightly around the inner medial axis.

mod grid;
mod marching;

pub use grid::{cubic_lattice, sample_grid, sample_grid_batched, sample_grid_with, ScalarGrid};
pub use marching::marching_cubes;

use crate::error::{Error, Result};
use crate::fields::FieldBundle;
use crate::geom::{Aabb, TriangleMesh};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Q-MDF value assigned outside the solid.
pub const INTERIOR_SENTINEL: f64 = 10.0;
/// Fractional padding of the solid's bounding box.
pub const BOUNDS_INFLATION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractConfig {
    pub epsilon: f64,
    /// Lattice has `2^depth` points along the longest axis.
    pub depth: u32,
    pub interior_mask: bool,
    pub min_component_faces: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            epsilon: 0.005,
            depth: 8,
            interior_mask: true,
            min_component_faces: 20,
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(1..=11).contains(&self.depth) {
            return Err(Error::invalid(format!("grid depth {} outside 1..=11", self.depth)));
        }
        Ok(())
    }

    pub fn lattice_points(&self) -> usize {
        (1usize << self.depth).max(2)
    }

    /// Hex digest identifying the sampled grid for a bundle.
    pub fn grid_key(&self, bundle: &FieldBundle) -> String {
        let mut h = Sha256::new();
        h.update(bundle.provenance.fingerprint().as_bytes());
        h.update(format!("|depth={}|mask={}", self.depth, self.interior_mask).as_bytes());
        for c in bundle.bounds.min.iter().chain(bundle.bounds.max.iter()) {
            h.update(c.to_le_bytes());
        }
        format!("{:x}", h.finalize())
    }
}

#[derive(Clone, Debug)]
pub struct Cover {
    pub mesh: TriangleMesh,
    pub euler_characteristic: i64,
    pub cell_size: f64,
    pub dropped_components: usize,
    pub warnings: Vec<String>,
}

/// Lattice used for a bundle: its bounds grown by 5% and snapped to cubic cells.
pub fn cover_lattice(bundle: &FieldBundle, config: &ExtractConfig) -> ([usize; 3], Aabb) {
    cubic_lattice(&bundle.bounds.inflated(BOUNDS_INFLATION), config.lattice_points())
}

/// Samples the (optionally interior-masked) Q-MDF on the cover lattice.
pub fn sample_qmdf_grid(bundle: &FieldBundle, config: &ExtractConfig) -> Result<ScalarGrid> {
    config.validate()?;
    let (res, bounds) = cover_lattice(bundle, config);
    let mask = config.interior_mask;
    sample_grid_batched(&bounds, res, |pts| {
        bundle
            .eval_pairs(pts)
            .into_iter()
            .map(|(s, m)| {
                if mask && s > 0.0 {
                    INTERIOR_SENTINEL
                } else {
                    (m - s.abs()).min(INTERIOR_SENTINEL)
                }
            })
            .collect()
    })
}

/// Like [`sample_qmdf_grid`] but reusing `dir/<key>.grid` when present.
pub fn cached_qmdf_grid(bundle: &FieldBundle, config: &ExtractConfig, dir: &Path) -> Result<(ScalarGrid, bool)> {
    let path = grid_cache_path(bundle, config, dir);
    if path.exists() {
        if let Ok(g) = ScalarGrid::load(&path) {
            if g.resolution() == cover_lattice(bundle, config).0 {
                return Ok((g, true));
            }
        }
    }
    let grid = sample_qmdf_grid(bundle, config)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = path.with_extension("grid.tmp");
    grid.save(&tmp)?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok((grid, false))
}

pub fn grid_cache_path(bundle: &FieldBundle, config: &ExtractConfig, dir: &Path) -> PathBuf {
    dir.join(format!("{}.grid", config.grid_key(bundle)))
}

/// Extracts the ε-cover of a bundle.
pub fn extract_cover(bundle: &FieldBundle, config: &ExtractConfig) -> Result<Cover> {
    let grid = sample_qmdf_grid(bundle, config)?;
    cover_from_grid(&grid, config)
}

/// ε-level set of a sampled Q-MDF grid with small components removed.
pub fn cover_from_grid(grid: &ScalarGrid, config: &ExtractConfig) -> Result<Cover> {
    config.validate()?;
    let cell = grid.cell_size();
    let mut warnings = Vec::new();
    if config.epsilon < cell {
        warnings.push(format!(
            "epsilon {} is below the grid cell size {cell:.4}; the band may break up",
            config.epsilon
        ));
    }
    let raw = marching_cubes(grid, config.epsilon)?;
    let comps = raw.components();
    let total = comps.len();
    let kept: Vec<usize> = comps
        .into_iter()
        .filter(|c| c.len() >= config.min_component_faces)
        .flatten()
        .collect();
    let mesh = if kept.len() == raw.faces().len() { raw } else { raw.subset(&kept) };
    if mesh.faces().is_empty() {
        let (lo, _) = grid.min_max();
        return Err(Error::Empty(format!(
            "epsilon cover is empty (minimum sampled Q-MDF {lo:.4}); try a larger epsilon"
        )));
    }
    let kept_components = mesh.components().len();
    Ok(Cover {
        euler_characteristic: mesh.euler_characteristic(),
        cell_size: cell,
        dropped_components: total - kept_components,
        mesh,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::AnalyticShape;
    use crate::geom::{Point3, Vector3};

    fn cfg(epsilon: f64, depth: u32) -> ExtractConfig {
        ExtractConfig {
            epsilon,
            depth,
            ..Default::default()
        }
    }

    #[test]
    fn sphere_cover_is_small_sphere() {
        let b = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 0.45).unwrap());
        let c = extract_cover(&b, &cfg(0.05, 6)).unwrap();
        assert_eq!(c.euler_characteristic, 2);
        for v in c.mesh.vertices() {
            assert!((v.coords.norm() - 0.05).abs() < 2.0 * c.cell_size);
        }
        assert!(c.mesh.contains_point(&Point3::origin()));
    }

    #[test]
    fn torus_cover_has_torus_topology() {
        let t = AnalyticShape::torus(Point3::origin(), Vector3::new(0.0, 0.3, 1.0), 0.385, 0.115).unwrap();
        let b = FieldBundle::analytic(t.clone());
        let c = extract_cover(&b, &cfg(0.02, 7)).unwrap();
        assert_eq!(c.euler_characteristic, 0);
        for v in c.mesh.vertices() {
            assert!((t.qmdf(v) - 0.02).abs() < 2.0 * c.cell_size);
        }
        let axis = t.medial_axis_samples(0.01);
        let inside = axis.iter().filter(|p| c.mesh.contains_point(p)).count();
        assert!(inside as f64 >= 0.99 * axis.len() as f64);
    }

    #[test]
    fn tiny_epsilon_is_reported_empty() {
        let b = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 0.45).unwrap());
        let e = extract_cover(&b, &cfg(1e-4, 4)).unwrap_err();
        assert!(matches!(e, Error::Empty(_)));
        assert!(e.to_string().contains("larger epsilon"));
    }

    #[test]
    fn warns_when_epsilon_below_cell() {
        let b = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 0.45).unwrap());
        let config = ExtractConfig {
            min_component_faces: 0,
            ..cfg(0.06, 4)
        };
        let c = extract_cover(&b, &config).unwrap();
        assert!(config.epsilon < c.cell_size);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(cfg(0.0, 6).validate().is_err());
        assert!(cfg(-1.0, 6).validate().is_err());
        assert!(cfg(f64::NAN, 6).validate().is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 0.45).unwrap());
        let c = cfg(0.05, 5);
        let (g1, hit1) = cached_qmdf_grid(&b, &c, dir.path()).unwrap();
        let (g2, hit2) = cached_qmdf_grid(&b, &c, dir.path()).unwrap();
        assert!(!hit1 && hit2);
        assert_eq!(g1, g2);
        let other = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 0.4).unwrap());
        assert_ne!(c.grid_key(&b), c.grid_key(&other));
    }

    #[test]
    fn masked_sphere_qmdf_grid() {
        let b = FieldBundle::analytic(AnalyticShape::sphere(Point3::origin(), 1.0).unwrap());
        let g = sample_qmdf_grid(&b, &cfg(0.05, 4)).unwrap();
        let (lo, hi) = g.min_max();
        assert_eq!(hi as f64, INTERIOR_SENTINEL);
        assert!(lo >= 0.0 && (lo as f64) < g.cell_size());
    }
}
