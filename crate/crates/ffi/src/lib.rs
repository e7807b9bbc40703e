//! C ABI over `tsg-core`.
//!
//! Every call returns a [`TsgStatus`]; on failure the message is available from
//! [`tsg_last_error_message`] on the same thread. Handles are opaque and owned by
//! the caller, who releases them with the matching `_free` function. Strings
//! returned through out-parameters are released with [`tsg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use tsg_core::error::Error;
use tsg_core::fusion::{fuse_all, AssociationConfig};
use tsg_core::graph::{self, SceneGraph, TaskSpec};
use tsg_core::ingest::{self, load_camera, load_frames};
use tsg_core::model::{cosine_similarity, Embedding, SemanticPointCloud};

/// Result codes. Values 1 to 3 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsgStatus {
    Ok = 0,
    /// File could not be read or written.
    Io = 1,
    /// Malformed input, bad parameters, or a dimension mismatch.
    Invalid = 2,
    /// The task matched no point.
    EmptyResult = 3,
    /// The graph has no place nodes.
    NotFound = 4,
    /// A required pointer argument was null or a string was not UTF-8.
    BadArgument = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Opaque metric-semantic point cloud.
pub struct TsgCloud(SemanticPointCloud);

/// Opaque scene graph.
pub struct TsgSceneGraph(SceneGraph);

/// Element counts of a scene graph.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TsgGraphCounts {
    pub points: usize,
    pub objects: usize,
    pub place_graphs: usize,
    pub place_nodes: usize,
    pub place_edges: usize,
    pub regions: usize,
    pub attachments: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Fail {
    Core(Error),
    Arg(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> TsgStatus {
    match e {
        Error::NoPlaceNodes => TsgStatus::NotFound,
        _ => match e.exit_code() {
            1 => TsgStatus::Io,
            3 => TsgStatus::EmptyResult,
            _ => TsgStatus::Invalid,
        },
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TsgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TsgStatus::Ok
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            TsgStatus::BadArgument
        }
        Err(_) => {
            set_error("panic inside tsg");
            TsgStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Arg("null path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail::Arg("path is not UTF-8"))
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Arg("null output pointer"))
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Arg("null handle"))
}

fn c_string(s: &str) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail::Arg("string contains a NUL byte"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tsg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tsg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tsg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Cosine similarity of two raw vectors of length `len`.
///
/// # Safety
/// `a` and `b` must point to `len` readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsg_cosine(a: *const f32, b: *const f32, len: usize, out: *mut f64) -> TsgStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(Fail::Arg("null vector"));
        }
        let out = out_arg(out)?;
        let ea = Embedding::from_f32(std::slice::from_raw_parts(a, len))?;
        let eb = Embedding::from_f32(std::slice::from_raw_parts(b, len))?;
        *out = cosine_similarity(&ea, &eb)?;
        Ok(())
    })
}

/// Loads an MSPC1 cloud.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsg_cloud_load(path: *const c_char, out: *mut *mut TsgCloud) -> TsgStatus {
    guard(|| {
        let path = path_arg(path)?;
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let cloud = ingest::load_cloud(path)?;
        *out = Box::into_raw(Box::new(TsgCloud(cloud)));
        Ok(())
    })
}

/// Writes a cloud as MSPC1.
///
/// # Safety
/// `cloud` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tsg_cloud_save(cloud: *const TsgCloud, path: *const c_char) -> TsgStatus {
    guard(|| {
        let cloud = ref_arg(cloud)?;
        ingest::save_cloud(&cloud.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsg_cloud_len(cloud: *const TsgCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Embedding dimension; 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsg_cloud_dim(cloud: *const TsgCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.dim)
}

/// Fuses a frame directory into the cloud in place. `matched` (optional) receives
/// the number of scan points matched to the map.
///
/// # Safety
/// `cloud` must be a live handle; `frames_dir` a NUL-terminated string; `matched` null or writable.
#[no_mangle]
pub unsafe extern "C" fn tsg_cloud_fuse(
    cloud: *mut TsgCloud,
    frames_dir: *const c_char,
    match_radius: f64,
    interior_erosion: usize,
    matched: *mut usize,
) -> TsgStatus {
    guard(|| {
        let cloud = cloud.as_mut().ok_or(Fail::Arg("null handle"))?;
        let dir = path_arg(frames_dir)?;
        let cfg = AssociationConfig {
            match_radius,
            interior_erosion,
        };
        let mut frames = load_frames(&dir)?.peekable();
        let total = if frames.peek().is_none() {
            0
        } else {
            let camera = load_camera(&dir)?;
            fuse_all(&mut cloud.0, frames, &camera, &cfg, |_| {})?.matched
        };
        if let Some(m) = matched.as_mut() {
            *m = total;
        }
        Ok(())
    })
}

/// Releases a cloud. Null is ignored.
///
/// # Safety
/// `cloud` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tsg_cloud_free(cloud: *mut TsgCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Builds the scene graph of a cloud for a task file.
///
/// # Safety
/// `cloud` must be a live handle; `task_path` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsg_graph_build(
    cloud: *const TsgCloud,
    task_path: *const c_char,
    out: *mut *mut TsgSceneGraph,
) -> TsgStatus {
    guard(|| {
        let cloud = ref_arg(cloud)?;
        let path = path_arg(task_path)?;
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let task = TaskSpec::load(path, cloud.0.dim)?;
        let g = graph::build_scene_graph(&cloud.0, &task)?;
        *out = Box::into_raw(Box::new(TsgSceneGraph(g)));
        Ok(())
    })
}

/// Reads an exported graph.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsg_graph_import(path: *const c_char, out: *mut *mut TsgSceneGraph) -> TsgStatus {
    guard(|| {
        let path = path_arg(path)?;
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let g = graph::import(path)?;
        *out = Box::into_raw(Box::new(TsgSceneGraph(g)));
        Ok(())
    })
}

/// Writes a graph as JSON; `embed` inlines embeddings.
///
/// # Safety
/// `graph` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tsg_graph_export(graph: *const TsgSceneGraph, path: *const c_char, embed: bool) -> TsgStatus {
    guard(|| {
        let g = ref_arg(graph)?;
        graph::export(&g.0, path_arg(path)?, embed)?;
        Ok(())
    })
}

/// Serializes a graph to a new JSON string, released with [`tsg_string_free`].
///
/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsg_graph_to_json(graph: *const TsgSceneGraph, embed: bool, out: *mut *mut c_char) -> TsgStatus {
    guard(|| {
        let g = ref_arg(graph)?;
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        *out = c_string(&graph::to_json(&g.0, embed)?)?;
        Ok(())
    })
}

/// Element counts per layer.
///
/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsg_graph_counts(graph: *const TsgSceneGraph, out: *mut TsgGraphCounts) -> TsgStatus {
    guard(|| {
        let g = &ref_arg(graph)?.0;
        *out_arg(out)? = TsgGraphCounts {
            points: g.layer1.len(),
            objects: g.layer2.len(),
            place_graphs: g.layer3.len(),
            place_nodes: g.place_node_count(),
            place_edges: g.place_edge_count(),
            regions: g.layer4.len(),
            attachments: g.attachments.len(),
        };
        Ok(())
    })
}

/// Nearest place node to a position, compared in the plane. `terrain` receives a
/// new string released with [`tsg_string_free`].
///
/// # Safety
/// `graph` must be a live handle; `position` three readable doubles; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn tsg_graph_nearest_place(
    graph: *const TsgSceneGraph,
    position: *const f64,
    terrain: *mut *mut c_char,
    node: *mut u32,
) -> TsgStatus {
    guard(|| {
        let g = ref_arg(graph)?;
        if position.is_null() {
            return Err(Fail::Arg("null position"));
        }
        let terrain = out_arg(terrain)?;
        let node = out_arg(node)?;
        *terrain = ptr::null_mut();
        let p = std::slice::from_raw_parts(position, 3);
        let (t, id) = g.0.nearest_place(&[p[0], p[1], p[2]])?;
        *terrain = c_string(&t)?;
        *node = id;
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `graph` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tsg_graph_free(graph: *mut TsgSceneGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}
