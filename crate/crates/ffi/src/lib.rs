//! C ABI over the medial library.
//!
//! Objects are opaque handles returned through `out` pointers and released
//! with the matching `*_free`. Every fallible
//! function returns a [`MedialStatus`]; on failure the message is available
//! from [`medial_last_error`] on the same thread until the next call.
//! Functions never unwind across the boundary: a panic is reported as
//! [`MedialStatus::Panic`].

use medial::extract::{extract_cover, ExtractConfig};
use medial::fields::{AnalyticShape, FieldBundle};
use medial::geom::{Point3, TriangleMesh};
use medial::io::{load_membrane, load_mesh, save_membrane, save_mesh};
use medial::metrics::reconstruct;
use medial::pipeline::{load_fields, run_pipeline, PipelineConfig};
use medial::shrink::{shrink, MedialMembrane as Membrane, ShrinkConfig};
use medial::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MedialStatus {
    Ok = 0,
    InvalidArgument = 1,
    Parse = 2,
    Numerical = 3,
    Empty = 4,
    Io = 5,
    Unsupported = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Paired signed distance and medial fields.
pub struct MedialFields(FieldBundle);

/// Triangle mesh.
pub struct MedialMesh(TriangleMesh);

/// Medial membrane: a mesh with a radius per vertex.
pub struct MedialMembrane(Membrane);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MedialStatus {
    match e {
        Error::Parse { .. } => MedialStatus::Parse,
        Error::Numerical(_) | Error::NoConvergence { .. } | Error::Diverged { .. } => MedialStatus::Numerical,
        Error::Empty(_) => MedialStatus::Empty,
        Error::Io { .. } => MedialStatus::Io,
        Error::Unsupported(_) => MedialStatus::Unsupported,
        Error::InvalidInput(_) => MedialStatus::InvalidArgument,
        Error::Stage { source, .. } => status_of(source),
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MedialStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MedialStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed as {name}"));
            MedialStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            MedialStatus::InvalidArgument
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            MedialStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &'static str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{name} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{name} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn medial_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn medial_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fields from a `.scene` shape, a `.ckpt` network, or an oriented cloud or
/// mesh file (meshes are sampled with `samples` points drawn from `seed`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medial_fields_load(path: *const c_char, samples: usize, seed: u64, out: *mut *mut MedialFields) -> MedialStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        put(out, MedialFields(load_fields(&path, samples, seed)?))
    })
}

/// Exact fields of a sphere.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medial_fields_sphere(cx: f64, cy: f64, cz: f64, radius: f64, out: *mut *mut MedialFields) -> MedialStatus {
    guard(|| {
        let shape = AnalyticShape::sphere(Point3::new(cx, cy, cz), radius)?;
        put(out, MedialFields(FieldBundle::analytic(shape)))
    })
}

/// Evaluates the fields at `count` points given as packed `xyz` triples.
/// Either output array may be null; non-null ones receive `count` values.
/// `qmdf_out`, if non-null, receives `mf − |sdf|`.
///
/// # Safety
/// `points` must hold `3·count` doubles and each non-null output `count`.
#[no_mangle]
pub unsafe extern "C" fn medial_fields_eval(
    fields: *const MedialFields,
    points: *const f64,
    count: usize,
    sdf_out: *mut f64,
    mf_out: *mut f64,
    qmdf_out: *mut f64,
) -> MedialStatus {
    guard(|| {
        let fields = handle(fields, "fields")?;
        if count == 0 {
            return Ok(());
        }
        if points.is_null() {
            return Err(Failure::Null("points"));
        }
        let coords = std::slice::from_raw_parts(points, 3 * count);
        let pts: Vec<Point3> = coords.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
        for (i, (s, m)) in fields.0.eval_pairs(&pts).into_iter().enumerate() {
            if !sdf_out.is_null() {
                *sdf_out.add(i) = s;
            }
            if !mf_out.is_null() {
                *mf_out.add(i) = m;
            }
            if !qmdf_out.is_null() {
                *qmdf_out.add(i) = m - s.abs();
            }
        }
        Ok(())
    })
}

/// # Safety
/// `fields` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn medial_fields_free(fields: *mut MedialFields) {
    release(fields)
}

/// Reads an OBJ or PLY mesh.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medial_mesh_load(path: *const c_char, out: *mut *mut MedialMesh) -> MedialStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        put(out, MedialMesh(load_mesh(&path)?))
    })
}

/// Writes a mesh; the format follows the extension.
///
/// # Safety
/// `mesh` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn medial_mesh_save(mesh: *const MedialMesh, path: *const c_char) -> MedialStatus {
    guard(|| {
        let mesh = handle(mesh, "mesh")?;
        let path = path_arg(path, "path")?;
        Ok(save_mesh(&path, &mesh.0)?)
    })
}

/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn medial_mesh_vertex_count(mesh: *const MedialMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertices().len())
}

/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn medial_mesh_face_count(mesh: *const MedialMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.faces().len())
}

/// Copies vertex positions as packed `xyz` triples into `out`, which must
/// hold `3 · medial_mesh_vertex_count` doubles.
///
/// # Safety
/// `mesh` must be a live handle and `out` large enough.
#[no_mangle]
pub unsafe extern "C" fn medial_mesh_vertices(mesh: *const MedialMesh, out: *mut f64) -> MedialStatus {
    guard(|| {
        let mesh = handle(mesh, "mesh")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        for (i, v) in mesh.0.vertices().iter().enumerate() {
            *out.add(3 * i) = v.x;
            *out.add(3 * i + 1) = v.y;
            *out.add(3 * i + 2) = v.z;
        }
        Ok(())
    })
}

/// Copies triangle vertex indices into `out`, which must hold
/// `3 · medial_mesh_face_count` entries.
///
/// # Safety
/// `mesh` must be a live handle and `out` large enough.
#[no_mangle]
pub unsafe extern "C" fn medial_mesh_faces(mesh: *const MedialMesh, out: *mut u32) -> MedialStatus {
    guard(|| {
        let mesh = handle(mesh, "mesh")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        for (i, f) in mesh.0.faces().iter().enumerate() {
            for (j, &v) in f.iter().enumerate() {
                *out.add(3 * i + j) = u32::try_from(v).map_err(|_| Failure::Arg("vertex index exceeds u32".into()))?;
            }
        }
        Ok(())
    })
}

/// Euler characteristic `V − E + F`.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn medial_mesh_euler_characteristic(mesh: *const MedialMesh) -> i64 {
    mesh.as_ref().map_or(0, |m| m.0.euler_characteristic())
}

/// # Safety
/// `mesh` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn medial_mesh_free(mesh: *mut MedialMesh) {
    release(mesh)
}

/// Extracts the `epsilon` cover on a grid with `2^depth` points along the
/// longest axis.
///
/// # Safety
/// `fields` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medial_extract(fields: *const MedialFields, epsilon: f64, depth: u32, out: *mut *mut MedialMesh) -> MedialStatus {
    guard(|| {
        let fields = handle(fields, "fields")?;
        let config = ExtractConfig {
            epsilon,
            depth,
            ..ExtractConfig::default()
        };
        put(out, MedialMesh(extract_cover(&fields.0, &config)?.mesh))
    })
}

/// Collapses a cover to a membrane with at most `iterations` descent steps.
///
/// # Safety
/// `cover` and `fields` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medial_shrink(
    cover: *const MedialMesh,
    fields: *const MedialFields,
    iterations: usize,
    out: *mut *mut MedialMembrane,
) -> MedialStatus {
    guard(|| {
        let cover = handle(cover, "cover")?;
        let fields = handle(fields, "fields")?;
        let config = ShrinkConfig {
            iterations,
            ..ShrinkConfig::default()
        };
        let (membrane, _) = shrink(&cover.0, &fields.0, &config)?;
        put(out, MedialMembrane(membrane))
    })
}

/// Reads a `.ma` membrane.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medial_membrane_load(path: *const c_char, out: *mut *mut MedialMembrane) -> MedialStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        put(out, MedialMembrane(load_membrane(&path)?))
    })
}

/// Writes a `.ma` membrane.
///
/// # Safety
/// `membrane` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn medial_membrane_save(membrane: *const MedialMembrane, path: *const c_char) -> MedialStatus {
    guard(|| {
        let m = handle(membrane, "membrane")?;
        let path = path_arg(path, "path")?;
        Ok(save_membrane(&path, &m.0)?)
    })
}

/// # Safety
/// `membrane` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn medial_membrane_vertex_count(membrane: *const MedialMembrane) -> usize {
    membrane.as_ref().map_or(0, |m| m.0.radii.len())
}

/// Copies per-vertex radii into `out`, which must hold
/// `medial_membrane_vertex_count` doubles.
///
/// # Safety
/// `membrane` must be a live handle and `out` large enough.
#[no_mangle]
pub unsafe extern "C" fn medial_membrane_radii(membrane: *const MedialMembrane, out: *mut f64) -> MedialStatus {
    guard(|| {
        let m = handle(membrane, "membrane")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(m.0.radii.as_ptr(), out, m.0.radii.len());
        Ok(())
    })
}

/// The membrane's mesh as a new handle.
///
/// # Safety
/// `membrane` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medial_membrane_mesh(membrane: *const MedialMembrane, out: *mut *mut MedialMesh) -> MedialStatus {
    guard(|| {
        let m = handle(membrane, "membrane")?;
        put(out, MedialMesh(m.0.mesh.clone()))
    })
}

/// Surface enveloped by the membrane, on a lattice with `resolution`
/// points along the longest axis.
///
/// # Safety
/// `membrane` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medial_reconstruct(membrane: *const MedialMembrane, resolution: usize, out: *mut *mut MedialMesh) -> MedialStatus {
    guard(|| {
        let m = handle(membrane, "membrane")?;
        put(out, MedialMesh(reconstruct(&m.0, resolution)?))
    })
}

/// # Safety
/// `membrane` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn medial_membrane_free(membrane: *mut MedialMembrane) {
    release(membrane)
}

/// Runs the whole pipeline from configuration text (`key=value` lines),
/// writing artifacts to the configured output directory.
///
/// # Safety
/// `config` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn medial_pipeline_run(config: *const c_char) -> MedialStatus {
    guard(|| {
        let text = str_arg(config, "config")?;
        let config = PipelineConfig::parse(text, std::path::Path::new("<config>"))?;
        run_pipeline(&config)?;
        Ok(())
    })
}
