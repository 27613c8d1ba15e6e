//! Scene files: one analytic shape per line.
//!
//! ```text
//! sphere  cx cy cz r
//! torus   cx cy cz ax ay az R r
//! box     cx cy cz hx hy hz
//! capsule ax ay az bx by bz r
//! ```
//! Blank lines and lines starting with `#` are ignored.

use super::AnalyticShape;
use crate::error::{Error, Result};
use crate::geom::{Point3, Vector3};
use std::path::Path;

pub fn parse_scene(text: &str, path: &Path) -> Result<Vec<AnalyticShape>> {
    let mut shapes = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().unwrap_or_default();
        let nums: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("not a number: {t:?}"))))
            .collect::<Result<_>>()?;
        let want = match kind {
            "sphere" => 4,
            "torus" => 8,
            "box" => 6,
            "capsule" => 7,
            other => return Err(err(format!("unknown shape {other:?}"))),
        };
        if nums.len() != want {
            return Err(err(format!("{kind} takes {want} numbers, got {}", nums.len())));
        }
        let p = |i: usize| Point3::new(nums[i], nums[i + 1], nums[i + 2]);
        let v = |i: usize| Vector3::new(nums[i], nums[i + 1], nums[i + 2]);
        let shape = match kind {
            "sphere" => AnalyticShape::sphere(p(0), nums[3]),
            "torus" => AnalyticShape::torus(p(0), v(3), nums[6], nums[7]),
            "box" => AnalyticShape::cuboid(p(0), v(3)),
            _ => AnalyticShape::capsule(p(0), p(3), nums[6]),
        }
        .map_err(|e| err(e.to_string()))?;
        shapes.push(shape);
    }
    Ok(shapes)
}

pub fn read_scene(path: &Path) -> Result<Vec<AnalyticShape>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text, path)
}
