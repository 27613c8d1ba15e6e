//! Versioned little-endian binary checkpoint of a trained network.
//!
//! Layout: magic `MEDNET`, u16 version, u32 layer count and widths, f64
//! softplus sharpness, u64 seed, 6×f64 bounds, u32-prefixed UTF-8 training
//! settings (`key=value` lines), u32 feature count and 3×f64 per feature,
//! u64 parameter count and f64 parameters.

use super::{Mlp, TrainConfig};
use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 6] = b"MEDNET";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub mlp: Mlp,
    pub config: TrainConfig,
    pub bounds: Aabb,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::invalid(format!("corrupt checkpoint: {}", msg.into()))
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(bad("truncated"));
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn point(&mut self) -> Result<Point3> {
        Ok(Point3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let hidden = self.mlp.hidden();
        out.extend_from_slice(&(hidden.len() as u32).to_le_bytes());
        for &n in hidden {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.mlp.beta().to_le_bytes());
        out.extend_from_slice(&self.config.seed.to_le_bytes());
        for p in [self.bounds.min, self.bounds.max] {
            for c in p.iter() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        let text: String = self.config.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&(self.config.features.len() as u32).to_le_bytes());
        for p in &self.config.features {
            for c in p.iter() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        let params = self.mlp.params();
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for v in params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader(bytes);
        if r.take(6)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Unsupported(format!("checkpoint version {version}")));
        }
        let layers = r.u32()?;
        if layers == 0 || layers > 64 {
            return Err(bad("layer count"));
        }
        let hidden = (0..layers).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let beta = r.f64()?;
        let seed = r.u64()?;
        let bounds = Aabb {
            min: r.point()?,
            max: r.point()?,
        };
        let len = r.u32()?;
        let text = std::str::from_utf8(r.take(len)?).map_err(|_| bad("settings are not UTF-8"))?;
        let mut config = TrainConfig::default();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad("settings line"))?;
            config.set(k, v)?;
        }
        if config.seed != seed || config.hidden != hidden || config.beta.to_bits() != beta.to_bits() {
            return Err(bad("header disagrees with settings"));
        }
        let features = r.u32()?;
        config.features = (0..features).map(|_| r.point()).collect::<Result<_>>()?;
        let count = r.u64()? as usize;
        if count.checked_mul(8) != Some(r.0.len()) {
            return Err(bad("parameter count"));
        }
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let mlp = Mlp::from_parts(hidden, beta, params).ok_or_else(|| bad("architecture"))?;
        Ok(Checkpoint { mlp, config, bounds })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let config = TrainConfig {
            hidden: vec![5, 4],
            beta: 37.5,
            seed: 99,
            learning_rate: 3.3e-4,
            features: vec![Point3::new(0.1, -0.2, 0.3)],
            ..TrainConfig::desk()
        };
        let mlp = Mlp::new(&config.hidden, config.beta, 7, &Point3::new(0.5, 0.5, 0.5), 0.3);
        Checkpoint {
            mlp,
            config,
            bounds: Aabb {
                min: Point3::new(0.0, 0.1, 0.2),
                max: Point3::new(1.0, 0.9, 0.8),
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        c.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, c);
        for (a, b) in back.mlp.params().iter().zip(c.mlp.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.to_bytes(), c.to_bytes());
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(Checkpoint::from_bytes(&wrong).is_err());
        let mut version = bytes;
        version[6] = 9;
        assert!(matches!(Checkpoint::from_bytes(&version), Err(Error::Unsupported(_))));
    }
}
