use crate::error::{Error, Result};
use crate::fields::FieldProvider;
use crate::geom::{Aabb, Point3, Vector3};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"MEDGRID1";

/// Field samples on a regular lattice, x varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    resolution: [usize; 3],
    bounds: Aabb,
    values: Vec<f32>,
}

impl ScalarGrid {
    pub fn new(resolution: [usize; 3], bounds: Aabb, values: Vec<f32>) -> Result<Self> {
        if resolution.iter().any(|&n| n < 2) {
            return Err(Error::invalid(format!("grid resolution {resolution:?} below 2")));
        }
        if values.len() != resolution[0] * resolution[1] * resolution[2] {
            return Err(Error::invalid("grid value count does not match resolution"));
        }
        if bounds.is_empty() || (0..3).any(|a| bounds.extent()[a] <= 0.0) {
            return Err(Error::invalid("grid bounds are empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid has non-finite values"));
        }
        Ok(ScalarGrid {
            resolution,
            bounds,
            values,
        })
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn spacing(&self) -> Vector3 {
        let e = self.bounds.extent();
        Vector3::new(
            e.x / (self.resolution[0] - 1) as f64,
            e.y / (self.resolution[1] - 1) as f64,
            e.z / (self.resolution[2] - 1) as f64,
        )
    }

    /// Largest lattice spacing.
    pub fn cell_size(&self) -> f64 {
        self.spacing().max()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        lattice_point(&self.bounds, &self.spacing(), i, j, k)
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for n in self.resolution {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for p in [self.bounds.min, self.bounds.max] {
            for c in p.iter() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        let bad = |m: &str| Error::invalid(format!("grid file: {m}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut res = [0usize; 3];
        for n in &mut res {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            *n = u32::from_le_bytes(b) as usize;
        }
        let mut c = [0f64; 6];
        for x in &mut c {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            *x = f64::from_le_bytes(b);
        }
        let count = res[0] * res[1] * res[2];
        let mut raw = vec![0u8; count * 4];
        r.read_exact(&mut raw).map_err(|_| bad("truncated values"))?;
        let values = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        let bounds = Aabb {
            min: Point3::new(c[0], c[1], c[2]),
            max: Point3::new(c[3], c[4], c[5]),
        };
        ScalarGrid::new(res, bounds, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ScalarGrid::read(&mut std::io::BufReader::new(file))
    }
}

fn lattice_point(bounds: &Aabb, h: &Vector3, i: usize, j: usize, k: usize) -> Point3 {
    Point3::new(
        bounds.min.x + h.x * i as f64,
        bounds.min.y + h.y * j as f64,
        bounds.min.z + h.z * k as f64,
    )
}

/// Cubic-cell lattice over `bounds` with `n` points along the longest
/// axis. The box is grown symmetrically so every axis is a whole number of
/// cells.
pub fn cubic_lattice(bounds: &Aabb, n: usize) -> ([usize; 3], Aabb) {
    let n = n.max(2);
    let ext = bounds.extent();
    let h = ext.max() / (n - 1) as f64;
    let mut res = [0usize; 3];
    let mut min = bounds.min;
    let mut max = bounds.max;
    for a in 0..3 {
        let cells = ((ext[a] / h).ceil() as usize).max(1);
        res[a] = cells + 1;
        let pad = (cells as f64 * h - ext[a]) / 2.0;
        min[a] -= pad;
        max[a] = min[a] + cells as f64 * h;
    }
    (res, Aabb { min, max })
}

/// Samples `field` at every lattice point.
pub fn sample_grid<F: FieldProvider + ?Sized>(field: &F, bounds: &Aabb, resolution: [usize; 3]) -> Result<ScalarGrid> {
    sample_grid_with(bounds, resolution, |p| field.eval(p))
}

pub fn sample_grid_with(bounds: &Aabb, resolution: [usize; 3], f: impl Fn(&Point3) -> f64 + Sync) -> Result<ScalarGrid> {
    sample_grid_batched(bounds, resolution, |pts| pts.iter().map(&f).collect())
}

/// Like [`sample_grid_with`] with `f` called once per z-slab of points.
pub fn sample_grid_batched(bounds: &Aabb, resolution: [usize; 3], f: impl Fn(&[Point3]) -> Vec<f64> + Sync) -> Result<ScalarGrid> {
    if resolution.iter().any(|&n| n < 2) {
        return Err(Error::invalid(format!("grid resolution {resolution:?} below 2")));
    }
    let [nx, ny, nz] = resolution;
    let e = bounds.extent();
    let h = Vector3::new(e.x / (nx - 1) as f64, e.y / (ny - 1) as f64, e.z / (nz - 1) as f64);
    let mut values = vec![0f32; nx * ny * nz];
    values.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
        let mut pts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                pts.push(lattice_point(bounds, &h, i, j, k));
            }
        }
        for (dst, v) in slab.iter_mut().zip(f(&pts)) {
            *dst = v as f32;
        }
    });
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("field is not finite at lattice index {bad}")));
    }
    ScalarGrid::new(resolution, *bounds, values)
}
