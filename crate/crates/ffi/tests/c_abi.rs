use medial_ffi::*;
use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

#[test]
fn sphere_roundtrip_through_handles() {
    unsafe {
        let mut fields = ptr::null_mut();
        assert_eq!(medial_fields_sphere(0.0, 0.0, 0.0, 0.4, &mut fields), MedialStatus::Ok);
        let pts = [0.0, 0.0, 0.0, 0.3, 0.0, 0.0];
        let (mut s, mut m, mut q) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        let st = medial_fields_eval(fields, pts.as_ptr(), 2, s.as_mut_ptr(), m.as_mut_ptr(), q.as_mut_ptr());
        assert_eq!(st, MedialStatus::Ok);
        assert!((s[0] + 0.4).abs() < 1e-12 && (s[1] + 0.1).abs() < 1e-12);
        assert!((q[1] - 0.3).abs() < 1e-12);

        let mut cover = ptr::null_mut();
        assert_eq!(medial_extract(fields, 0.05, 5, &mut cover), MedialStatus::Ok);
        assert_eq!(medial_mesh_euler_characteristic(cover), 2);
        let nv = medial_mesh_vertex_count(cover);
        let nf = medial_mesh_face_count(cover);
        let mut verts = vec![0.0; 3 * nv];
        let mut faces = vec![0u32; 3 * nf];
        assert_eq!(medial_mesh_vertices(cover, verts.as_mut_ptr()), MedialStatus::Ok);
        assert_eq!(medial_mesh_faces(cover, faces.as_mut_ptr()), MedialStatus::Ok);
        assert!(faces.iter().all(|&i| (i as usize) < nv));

        let mut membrane = ptr::null_mut();
        assert_eq!(medial_shrink(cover, fields, 300, &mut membrane), MedialStatus::Ok);
        let n = medial_membrane_vertex_count(membrane);
        let mut radii = vec![0.0; n];
        assert_eq!(medial_membrane_radii(membrane, radii.as_mut_ptr()), MedialStatus::Ok);
        assert!(radii.iter().all(|r| *r > 0.0 && *r <= 0.4 + 1e-9));

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.ma").to_str().unwrap()).unwrap();
        assert_eq!(medial_membrane_save(membrane, path.as_ptr()), MedialStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(medial_membrane_load(path.as_ptr(), &mut back), MedialStatus::Ok);
        assert_eq!(medial_membrane_vertex_count(back), n);

        medial_membrane_free(back);
        medial_membrane_free(membrane);
        medial_mesh_free(cover);
        medial_fields_free(fields);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut fields = ptr::null_mut();
        assert_eq!(
            medial_fields_sphere(0.0, 0.0, 0.0, -1.0, &mut fields),
            MedialStatus::InvalidArgument
        );
        assert!(fields.is_null());
        let msg = CStr::from_ptr(medial_last_error()).to_str().unwrap();
        assert!(!msg.is_empty());

        assert_eq!(medial_fields_load(ptr::null(), 0, 0, &mut fields), MedialStatus::NullPointer);
        assert_eq!(medial_mesh_vertex_count(ptr::null()), 0);

        let bad = CString::new("epsilon=oops\n").unwrap();
        assert_eq!(medial_pipeline_run(bad.as_ptr()), MedialStatus::Parse);
        medial_fields_free(ptr::null_mut());
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let lib = target_dir().join("libmedial_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
