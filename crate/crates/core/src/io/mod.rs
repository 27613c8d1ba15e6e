//! Readers and writers for OBJ meshes, ascii PLY and XYZ/XYZN clouds, and
//! `.ma` medial membranes.

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, TriangleMesh, Vector3};
use crate::shrink::MedialMembrane;
use std::fmt::Write as _;
use std::path::Path;

/// Input geometry as loaded from disk.
#[derive(Clone, Debug)]
pub enum Geometry {
    Mesh(TriangleMesh),
    Cloud(PointCloud),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Obj,
    Ply,
    Xyz,
    Ma,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Format> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "obj" => Ok(Format::Obj),
            "ply" => Ok(Format::Ply),
            "xyz" | "xyzn" | "pts" => Ok(Format::Xyz),
            "ma" => Ok(Format::Ma),
            _ => Err(Error::Unsupported(format!("unknown file type {}", path.display()))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    path: &'a Path,
}

impl Lines<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn floats(&self, line: usize, toks: &[&str], n: usize) -> Result<Vec<f64>> {
        if toks.len() < n {
            return Err(self.err(line, format!("expected {n} numbers")));
        }
        toks[..n]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(line, format!("bad number {t:?}")))
            })
            .collect()
    }
}

fn point(v: &[f64]) -> Point3 {
    Point3::new(v[0], v[1], v[2])
}

/// Parses ascii OBJ: `v` and `f` records, polygons fan-triangulated,
/// `a/b/c` index forms and negative indices accepted.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let l = Lines { path };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let toks: Vec<&str> = raw.split('#').next().unwrap().split_whitespace().collect();
        match toks.first() {
            Some(&"v") => vertices.push(point(&l.floats(line, &toks[1..], 3)?)),
            Some(&"f") => {
                let idx = toks[1..]
                    .iter()
                    .map(|t| {
                        let i: i64 = t
                            .split('/')
                            .next()
                            .unwrap()
                            .parse()
                            .map_err(|_| l.err(line, format!("bad face index {t:?}")))?;
                        let count = vertices.len() as i64;
                        let at = if i < 0 { count + i } else { i - 1 };
                        if at < 0 || at >= count {
                            return Err(l.err(line, format!("face index {i} out of range")));
                        }
                        Ok(at as usize)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(l.err(line, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn format_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in mesh.faces() {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    s
}

/// Parses whitespace rows of `x y z` or `x y z nx ny nz`.
pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let l = Lines { path };
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let toks: Vec<&str> = raw.split('#').next().unwrap().split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let w = *width.get_or_insert(if toks.len() >= 6 { 6 } else { 3 });
        if toks.len() != w {
            return Err(l.err(line, format!("expected {w} columns, found {}", toks.len())));
        }
        let v = l.floats(line, &toks, w)?;
        points.push(point(&v));
        if w == 6 {
            normals.push(Vector3::new(v[3], v[4], v[5]));
        }
    }
    let normals = (width == Some(6)).then_some(normals);
    PointCloud::new(points, normals)
}

pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut s = String::new();
    for (i, p) in cloud.points.iter().enumerate() {
        match &cloud.normals {
            Some(n) => writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, n[i].x, n[i].y, n[i].z),
            None => writeln!(s, "{} {} {}", p.x, p.y, p.z),
        }
        .unwrap();
    }
    s
}

/// Ascii PLY with a vertex element (x, y, z and optional nx, ny, nz) and
/// an optional face element of vertex index lists.
pub fn parse_ply(text: &str, path: &Path) -> Result<Geometry> {
    let l = Lines { path };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(l.err(1, "missing ply magic")),
    }
    let mut vertex_count = 0usize;
    let mut face_count = 0usize;
    let mut props: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut header_end = None;
    for (n, raw) in lines.by_ref() {
        let line = n + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => {}
            ["format", ..] => return Err(Error::Unsupported("binary PLY".into())),
            ["element", name, count] => {
                let c = count.parse().map_err(|_| l.err(line, "bad element count"))?;
                current = name.to_string();
                match *name {
                    "vertex" => vertex_count = c,
                    "face" => face_count = c,
                    _ if c == 0 => {}
                    _ => return Err(Error::Unsupported(format!("PLY element {name}"))),
                }
            }
            ["property", "list", ..] => {}
            ["property", _, name] if current == "vertex" => props.push(name.to_string()),
            ["end_header"] => {
                header_end = Some(line);
                break;
            }
            _ => {}
        }
    }
    if header_end.is_none() {
        return Err(l.err(text.lines().count(), "missing end_header"));
    }
    let col = |name: &str| props.iter().position(|p| p == name);
    let (Some(x), Some(y), Some(z)) = (col("x"), col("y"), col("z")) else {
        return Err(l.err(1, "vertex element lacks x, y, z"));
    };
    let nrm = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let mut body = lines.filter(|(_, s)| !s.trim().is_empty());
    let mut points = Vec::with_capacity(vertex_count);
    let mut normals = Vec::new();
    for _ in 0..vertex_count {
        let (n, raw) = body.next().ok_or_else(|| l.err(text.lines().count(), "missing vertex rows"))?;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let v = l.floats(n + 1, &toks, props.len())?;
        points.push(Point3::new(v[x], v[y], v[z]));
        if let Some([a, b, c]) = nrm {
            normals.push(Vector3::new(v[a], v[b], v[c]));
        }
    }
    let mut faces = Vec::with_capacity(face_count);
    for _ in 0..face_count {
        let (n, raw) = body.next().ok_or_else(|| l.err(text.lines().count(), "missing face rows"))?;
        let idx: Vec<usize> = raw
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| l.err(n + 1, format!("bad index {t:?}"))))
            .collect::<Result<_>>()?;
        let k = *idx.first().ok_or_else(|| l.err(n + 1, "empty face row"))?;
        if k < 3 || idx.len() != k + 1 || idx[1..].iter().any(|&i| i >= vertex_count) {
            return Err(l.err(n + 1, "malformed face"));
        }
        for j in 2..k {
            faces.push([idx[1], idx[j], idx[j + 1]]);
        }
    }
    if face_count > 0 {
        Ok(Geometry::Mesh(TriangleMesh::new(points, faces)?))
    } else {
        Ok(Geometry::Cloud(PointCloud::new(points, nrm.map(|_| normals))?))
    }
}

pub fn format_ply(cloud: &PointCloud) -> String {
    let mut s = String::from("ply\nformat ascii 1.0\n");
    writeln!(s, "element vertex {}", cloud.len()).unwrap();
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals.is_some() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    s.push_str("end_header\n");
    s.push_str(&format_xyz(cloud));
    s
}

/// `.ma` membrane: `v x y z r` rows, `f i j k` rows (0-based), `#` comments.
pub fn parse_ma(text: &str, path: &Path) -> Result<MedialMembrane> {
    let l = Lines { path };
    let mut vertices = Vec::new();
    let mut radii = Vec::new();
    let mut faces = Vec::new();
    let mut source = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if let Some(rest) = raw.trim().strip_prefix("# source ") {
            source = rest.trim().to_string();
        }
        let toks: Vec<&str> = raw.split('#').next().unwrap().split_whitespace().collect();
        match toks.first() {
            Some(&"v") => {
                let v = l.floats(line, &toks[1..], 4)?;
                if v[3] < 0.0 {
                    return Err(l.err(line, "negative radius"));
                }
                vertices.push(point(&v));
                radii.push(v[3]);
            }
            Some(&"f") => {
                if toks.len() != 4 {
                    return Err(l.err(line, "face needs three indices"));
                }
                let mut f = [0usize; 3];
                for k in 0..3 {
                    f[k] = toks[k + 1]
                        .parse()
                        .map_err(|_| l.err(line, format!("bad index {:?}", toks[k + 1])))?;
                }
                faces.push((line, f));
            }
            Some(t) => return Err(l.err(line, format!("unknown record {t:?}"))),
            None => {}
        }
    }
    for (line, f) in &faces {
        if f.iter().any(|&i| i >= vertices.len()) {
            return Err(l.err(*line, "face index out of range"));
        }
    }
    let mesh = TriangleMesh::new(vertices, faces.into_iter().map(|(_, f)| f).collect())?;
    MedialMembrane::new(mesh, radii, source)
}

pub fn format_ma(m: &MedialMembrane) -> String {
    let mut s = String::new();
    if !m.source.is_empty() {
        writeln!(s, "# source {}", m.source).unwrap();
    }
    for (v, r) in m.mesh.vertices().iter().zip(&m.radii) {
        writeln!(s, "v {} {} {} {}", v.x, v.y, v.z, r).unwrap();
    }
    for f in m.mesh.faces() {
        writeln!(s, "f {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}

/// Loads a mesh or cloud chosen by file extension.
pub fn load_geometry(path: &Path) -> Result<Geometry> {
    let text = read_text(path)?;
    match Format::from_path(path)? {
        Format::Obj => Ok(Geometry::Mesh(parse_obj(&text, path)?)),
        Format::Ply => parse_ply(&text, path),
        Format::Xyz => Ok(Geometry::Cloud(parse_xyz(&text, path)?)),
        Format::Ma => Err(Error::Unsupported("a membrane is not input geometry".into())),
    }
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    match load_geometry(path)? {
        Geometry::Mesh(m) => Ok(m),
        Geometry::Cloud(_) => Err(Error::invalid(format!("{} holds a point cloud, not a mesh", path.display()))),
    }
}

pub fn save_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    write_atomic(path, format_obj(mesh).as_bytes())
}

pub fn save_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let text = match Format::from_path(path)? {
        Format::Ply => format_ply(cloud),
        Format::Xyz => format_xyz(cloud),
        _ => return Err(Error::Unsupported(format!("cannot write a cloud as {}", path.display()))),
    };
    write_atomic(path, text.as_bytes())
}

pub fn load_membrane(path: &Path) -> Result<MedialMembrane> {
    parse_ma(&read_text(path)?, path)
}

pub fn save_membrane(path: &Path, m: &MedialMembrane) -> Result<()> {
    write_atomic(path, format_ma(m).as_bytes())
}
