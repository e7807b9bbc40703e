use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use tsg_core::ingest::save_cloud;
use tsg_core::model::{SemanticPoint, SemanticPointCloud};
use tsg_core::prompt::pseudo_encode;
use tsg_ffi::*;

const DIM: usize = 16;

fn c(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tsg_last_error_message()) }.to_string_lossy().into_owned()
}

/// 10 m by 2 m strip of terrain "path" plus its task file.
fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let e = pseudo_encode("path", DIM);
    let mut cloud = SemanticPointCloud::new(DIM);
    for i in 0..=40 {
        for j in 0..=8 {
            cloud
                .push(SemanticPoint::observed([i as f64 * 0.25, j as f64 * 0.25, 0.0], e.clone()))
                .unwrap();
        }
    }
    let cp = dir.join("strip.mspc");
    save_cloud(&cloud, &cp).unwrap();
    let tp = dir.join("task.json");
    std::fs::write(&tp, r#"{"task": "walk", "queries": [{"text": "path", "kind": "terrain"}]}"#).unwrap();
    (cp, tp)
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(tsg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn cosine_status_codes() {
    let a = [1.0f32, 0.0];
    let b = [0.0f32, 2.0];
    let z = [0.0f32, 0.0];
    let mut out = f64::NAN;
    unsafe {
        assert_eq!(tsg_cosine(a.as_ptr(), b.as_ptr(), 2, &mut out), TsgStatus::Ok);
        assert!(out.abs() < 1e-12);
        assert_eq!(tsg_cosine(a.as_ptr(), a.as_ptr(), 2, &mut out), TsgStatus::Ok);
        assert!((out - 1.0).abs() < 1e-12);
        assert_eq!(tsg_cosine(a.as_ptr(), z.as_ptr(), 2, &mut out), TsgStatus::Invalid);
        assert!(!last_error().is_empty());
        assert_eq!(tsg_cosine(ptr::null(), a.as_ptr(), 2, &mut out), TsgStatus::BadArgument);
        assert_eq!(tsg_cosine(a.as_ptr(), b.as_ptr(), 2, ptr::null_mut()), TsgStatus::BadArgument);
    }
}

#[test]
fn cloud_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (cp, _) = fixture(dir.path());
    unsafe {
        let mut cloud = ptr::null_mut();
        assert_eq!(tsg_cloud_load(c(&cp).as_ptr(), &mut cloud), TsgStatus::Ok);
        assert_eq!(tsg_cloud_len(cloud), 41 * 9);
        assert_eq!(tsg_cloud_dim(cloud), DIM);
        let copy = dir.path().join("copy.mspc");
        assert_eq!(tsg_cloud_save(cloud, c(&copy).as_ptr()), TsgStatus::Ok);
        assert_eq!(std::fs::read(&cp).unwrap(), std::fs::read(&copy).unwrap());

        // empty frame directory leaves the cloud untouched
        let frames = dir.path().join("frames");
        std::fs::create_dir(&frames).unwrap();
        let mut matched = 7usize;
        assert_eq!(tsg_cloud_fuse(cloud, c(&frames).as_ptr(), 0.25, 2, &mut matched), TsgStatus::Ok);
        assert_eq!(matched, 0);
        tsg_cloud_free(cloud);

        let bad = dir.path().join("bad.mspc");
        std::fs::write(&bad, b"garbage").unwrap();
        let mut cloud = ptr::null_mut();
        assert_eq!(tsg_cloud_load(c(&bad).as_ptr(), &mut cloud), TsgStatus::Invalid);
        assert!(cloud.is_null());
        assert!(last_error().contains("magic"));
        assert_eq!(tsg_cloud_load(c(&dir.path().join("none")).as_ptr(), &mut cloud), TsgStatus::Io);
        assert_eq!(tsg_cloud_load(ptr::null(), &mut cloud), TsgStatus::BadArgument);
        assert_eq!(tsg_cloud_len(ptr::null()), 0);
        tsg_cloud_free(ptr::null_mut());
    }
}

#[test]
fn graph_build_export_import() {
    let dir = tempfile::tempdir().unwrap();
    let (cp, tp) = fixture(dir.path());
    unsafe {
        let mut cloud = ptr::null_mut();
        assert_eq!(tsg_cloud_load(c(&cp).as_ptr(), &mut cloud), TsgStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(tsg_graph_build(cloud, c(&tp).as_ptr(), &mut g), TsgStatus::Ok);
        let mut n = TsgGraphCounts::default();
        assert_eq!(tsg_graph_counts(g, &mut n), TsgStatus::Ok);
        assert_eq!(n.points, 41 * 9);
        assert_eq!(n.place_graphs, 1);
        assert!(n.place_nodes >= 2);
        assert_eq!((n.objects, n.regions, n.attachments), (0, 0, 0));

        let mut terrain: *mut c_char = ptr::null_mut();
        let mut node = u32::MAX;
        let pos = [0.0, 1.0, 0.0];
        assert_eq!(tsg_graph_nearest_place(g, pos.as_ptr(), &mut terrain, &mut node), TsgStatus::Ok);
        assert_eq!(CStr::from_ptr(terrain).to_str().unwrap(), "path");
        assert!((node as usize) < n.place_nodes);
        tsg_string_free(terrain);

        let out = dir.path().join("g.json");
        assert_eq!(tsg_graph_export(g, c(&out).as_ptr(), false), TsgStatus::Ok);
        let mut json = ptr::null_mut();
        assert_eq!(tsg_graph_to_json(g, false, &mut json), TsgStatus::Ok);
        assert_eq!(CStr::from_ptr(json).to_bytes(), std::fs::read(&out).unwrap().as_slice());
        tsg_string_free(json);

        let mut back = ptr::null_mut();
        assert_eq!(tsg_graph_import(c(&out).as_ptr(), &mut back), TsgStatus::Ok);
        let mut m = TsgGraphCounts::default();
        assert_eq!(tsg_graph_counts(back, &mut m), TsgStatus::Ok);
        assert_eq!(m, n);
        tsg_graph_free(back);
        tsg_graph_free(g);
        tsg_cloud_free(cloud);
    }
}

#[test]
fn graph_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (cp, _) = fixture(dir.path());
    unsafe {
        let mut cloud = ptr::null_mut();
        assert_eq!(tsg_cloud_load(c(&cp).as_ptr(), &mut cloud), TsgStatus::Ok);
        let mut g = ptr::null_mut();

        let none = dir.path().join("none.json");
        std::fs::write(&none, r#"{"task": "t", "queries": []}"#).unwrap();
        assert_eq!(tsg_graph_build(cloud, c(&none).as_ptr(), &mut g), TsgStatus::Invalid);

        let miss = dir.path().join("miss.json");
        std::fs::write(&miss, r#"{"task": "t", "queries": [{"text": "image of a boat", "kind": "object"}]}"#)
            .unwrap();
        assert_eq!(tsg_graph_build(cloud, c(&miss).as_ptr(), &mut g), TsgStatus::EmptyResult);
        assert!(g.is_null());

        // objects but no terrain: nearest place has nothing to find
        let car = dir.path().join("car.json");
        std::fs::write(&car, r#"{"task": "t", "queries": [{"text": "path", "kind": "object", "threshold": 0.5}]}"#)
            .unwrap();
        assert_eq!(tsg_graph_build(cloud, c(&car).as_ptr(), &mut g), TsgStatus::Ok);
        let mut terrain = ptr::null_mut();
        let mut node = 0;
        let pos = [0.0; 3];
        assert_eq!(tsg_graph_nearest_place(g, pos.as_ptr(), &mut terrain, &mut node), TsgStatus::NotFound);
        assert!(terrain.is_null());
        tsg_graph_free(g);

        let v = dir.path().join("v.json");
        std::fs::write(&v, r#"{"version": "tsg/0"}"#).unwrap();
        assert_eq!(tsg_graph_import(c(&v).as_ptr(), &mut g), TsgStatus::Invalid);
        assert!(last_error().contains("tsg/0"));
        tsg_cloud_free(cloud);
    }
}

fn target_dir() -> PathBuf {
    // CARGO_TARGET_TMPDIR is <target>/tmp
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/tsg.h");
    assert!(header.exists(), "header not generated");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["tsg_cloud_load", "tsg_graph_build", "tsg_last_error_message", "TSG_STATUS_EMPTY_RESULT"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }

    let lib_dir = ["debug", "release"]
        .iter()
        .map(|p| target_dir().join(p))
        .find(|d| d.join("libtsg_ffi.so").exists());
    let Some(lib_dir) = lib_dir else {
        eprintln!("skipping C link check: libtsg_ffi.so not found");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let built = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .args(["-ltsg_ffi", "-lm", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .status();
    match built {
        Ok(s) => assert!(s.success(), "C smoke test failed to compile"),
        Err(e) => {
            eprintln!("skipping C link check: no C compiler ({e})");
            return;
        }
    }
    let (cp, tp) = fixture(dir.path());
    let run = Command::new(&exe).arg(&cp).arg(&tp).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
