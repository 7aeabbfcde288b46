//! C ABI for poseforge.
//!
//! Every function returns a [`PfStatus`]; on failure a message is available
//! from [`pf_last_error_message`] on the same thread. Handles returned
//! through out-pointers are owned by the caller and must be released with
//! the matching `*_free` function. Poses cross the boundary as row-major
//! 4x4 matrices in millimeters.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use poseforge::geometry::{
    compose, invert, project_world, CameraIntrinsics, GeometryError, HomogeneousPoint, RigidTransform, Vec3,
};
use poseforge::io::{export_pose, import_pose, load_mesh, load_workspace, save_workspace, DatasetError};
use poseforge::metrics::{add_metric, angular_distance, MetricsError};
use poseforge::render::{rasterize_with, RenderError, RenderOptions};
use poseforge::scene::{CameraSelect, MeshAsset, ObjectId, Scene, SceneError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidRotation = 3,
    BehindCamera = 4,
    Parse = 5,
    Io = 6,
    UnknownObject = 7,
    DuplicateObject = 8,
    Render = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfCamera {
    Original = 0,
    Scene = 1,
}

/// Row-major 4x4 rigid transform; the bottom row must be `0 0 0 1`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfTransform {
    pub m: [f64; 16],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfPixel {
    pub u: f64,
    pub v: f64,
}

/// Bytes allocated by the library; release with [`pf_buffer_free`].
#[repr(C)]
#[derive(Debug)]
pub struct PfBuffer {
    pub data: *mut u8,
    pub len: usize,
}

/// Opaque triangle mesh.
pub struct PfMesh(Arc<MeshAsset>);

/// Opaque scene: intrinsics, background and posed objects.
pub struct PfScene(Scene);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(PfStatus, String);

type FfiResult<T> = Result<T, Failure>;

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        let status = match e {
            GeometryError::BehindCamera { .. } => PfStatus::BehindCamera,
            GeometryError::InvalidRotation { .. } => PfStatus::InvalidRotation,
            _ => PfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SceneError> for Failure {
    fn from(e: SceneError) -> Self {
        let status = match &e {
            SceneError::UnknownObject(_) => PfStatus::UnknownObject,
            SceneError::DuplicateId(_) => PfStatus::DuplicateObject,
            SceneError::InvalidRotation(_) => PfStatus::InvalidRotation,
            SceneError::Geometry(GeometryError::BehindCamera { .. }) => PfStatus::BehindCamera,
            _ => PfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let status = match &e {
            DatasetError::Io(_) | DatasetError::Image(_) => PfStatus::Io,
            DatasetError::InvalidRotation(_) => PfStatus::InvalidRotation,
            DatasetError::Scene(SceneError::UnknownObject(_)) => PfStatus::UnknownObject,
            _ => PfStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure(PfStatus::InvalidArgument, e.to_string())
    }
}

impl From<RenderError> for Failure {
    fn from(e: RenderError) -> Self {
        Failure(PfStatus::Render, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn by_ref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn by_mut<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(PfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn transform(t: &PfTransform) -> FfiResult<RigidTransform> {
    Ok(RigidTransform::from_row_major(&t.m)?)
}

fn intrinsics(k: &PfIntrinsics) -> FfiResult<CameraIntrinsics> {
    Ok(CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height)?)
}

fn camera(c: PfCamera) -> CameraSelect {
    match c {
        PfCamera::Original => CameraSelect::Original,
        PfCamera::Scene => CameraSelect::Scene,
    }
}

/// Message for the last failed call on this thread; valid until the next
/// call into the library from the same thread. Never null.
#[no_mangle]
pub extern "C" fn pf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `k`, `m` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pf_project_world(
    k: *const PfIntrinsics,
    m: *const PfTransform,
    point: PfVec3,
    out: *mut PfPixel,
) -> PfStatus {
    guard(|| {
        let k = intrinsics(by_ref(k, "k")?)?;
        let m = transform(by_ref(m, "m")?)?;
        let px = project_world(&k, &m, HomogeneousPoint::point(point.x, point.y, point.z))?;
        *by_mut(out, "out")? = PfPixel { u: px.u, v: px.v };
        Ok(())
    })
}

/// `out = a · b` (apply `b` first).
///
/// # Safety
/// All pointers must be valid; `out` may alias an input.
#[no_mangle]
pub unsafe extern "C" fn pf_compose(a: *const PfTransform, b: *const PfTransform, out: *mut PfTransform) -> PfStatus {
    guard(|| {
        let r = compose(&transform(by_ref(a, "a")?)?, &transform(by_ref(b, "b")?)?);
        *by_mut(out, "out")? = PfTransform { m: r.to_row_major() };
        Ok(())
    })
}

/// # Safety
/// All pointers must be valid; `out` may alias `m`.
#[no_mangle]
pub unsafe extern "C" fn pf_invert(m: *const PfTransform, out: *mut PfTransform) -> PfStatus {
    guard(|| {
        let r = invert(&transform(by_ref(m, "m")?)?);
        *by_mut(out, "out")? = PfTransform { m: r.to_row_major() };
        Ok(())
    })
}

/// Rotation angle between the rotation parts of `a` and `b`, in degrees.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_angular_distance(a: *const PfTransform, b: *const PfTransform, out_deg: *mut f64) -> PfStatus {
    guard(|| {
        let a = transform(by_ref(a, "a")?)?;
        let b = transform(by_ref(b, "b")?)?;
        *by_mut(out_deg, "out_deg")? = angular_distance(&a.rotation, &b.rotation);
        Ok(())
    })
}

/// Mean vertex displacement of `mesh` between poses `a` and `b`, in mm.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_add_metric(
    mesh: *const PfMesh,
    a: *const PfTransform,
    b: *const PfTransform,
    out_mm: *mut f64,
) -> PfStatus {
    guard(|| {
        let mesh = by_ref(mesh, "mesh")?;
        let a = transform(by_ref(a, "a")?)?;
        let b = transform(by_ref(b, "b")?)?;
        *by_mut(out_mm, "out_mm")? = add_metric(&mesh.0, &a, &b)?;
        Ok(())
    })
}

/// Loads an ASCII PLY or OBJ file; the object id is the file stem.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_load(path: *const c_char, out: *mut *mut PfMesh) -> PfStatus {
    guard(|| {
        let path = string(path, "path")?;
        let out = by_mut(out, "out")?;
        let mesh = load_mesh(Path::new(path))?;
        *out = Box::into_raw(Box::new(PfMesh(Arc::new(mesh))));
        Ok(())
    })
}

/// Builds a mesh from `n_vertices` xyz triples and `n_triangles` index
/// triples.
///
/// # Safety
/// `vertices` must hold `3 * n_vertices` doubles, `triangles`
/// `3 * n_triangles` indices, `id` must be NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_from_arrays(
    id: *const c_char,
    vertices: *const f64,
    n_vertices: usize,
    triangles: *const u32,
    n_triangles: usize,
    out: *mut *mut PfMesh,
) -> PfStatus {
    guard(|| {
        let id = string(id, "id")?;
        let out = by_mut(out, "out")?;
        if (vertices.is_null() && n_vertices > 0) || (triangles.is_null() && n_triangles > 0) {
            return Err(null("vertex or triangle array"));
        }
        let v = if n_vertices == 0 { &[][..] } else { std::slice::from_raw_parts(vertices, 3 * n_vertices) };
        let t = if n_triangles == 0 { &[][..] } else { std::slice::from_raw_parts(triangles, 3 * n_triangles) };
        let verts = v.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let tris = t.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let mesh = MeshAsset::new(id, id, verts, tris)?;
        *out = Box::into_raw(Box::new(PfMesh(Arc::new(mesh))));
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_free(mesh: *mut PfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_vertex_count(mesh: *const PfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertices().len())
}

/// Empty scene over a mid-gray background of the intrinsics' size.
///
/// # Safety
/// `k` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pf_scene_new(k: *const PfIntrinsics, out: *mut *mut PfScene) -> PfStatus {
    guard(|| {
        let k = intrinsics(by_ref(k, "k")?)?;
        let out = by_mut(out, "out")?;
        *out = Box::into_raw(Box::new(PfScene(Scene::blank(k)?)));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pf_scene_load_workspace(path: *const c_char, out: *mut *mut PfScene) -> PfStatus {
    guard(|| {
        let path = string(path, "path")?;
        let out = by_mut(out, "out")?;
        *out = Box::into_raw(Box::new(PfScene(load_workspace(Path::new(path))?)));
        Ok(())
    })
}

/// # Safety
/// `scene` must be a valid handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_scene_save_workspace(scene: *const PfScene, path: *const c_char) -> PfStatus {
    guard(|| {
        let scene = by_ref(scene, "scene")?;
        save_workspace(&scene.0, Path::new(string(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `scene` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_scene_free(scene: *mut PfScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Adds `mesh` at the identity pose under the mesh's id. The scene keeps
/// its own reference; the caller still frees `mesh`.
///
/// # Safety
/// Both handles must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_scene_add_object(scene: *mut PfScene, mesh: *const PfMesh) -> PfStatus {
    guard(|| {
        let scene = by_mut(scene, "scene")?;
        let mesh = by_ref(mesh, "mesh")?;
        scene.0.add_object(Arc::clone(&mesh.0))?;
        Ok(())
    })
}

/// # Safety
/// `scene` must be valid, `id` NUL-terminated, `pose` valid.
#[no_mangle]
pub unsafe extern "C" fn pf_scene_set_pose(scene: *mut PfScene, id: *const c_char, pose: *const PfTransform) -> PfStatus {
    guard(|| {
        let scene = by_mut(scene, "scene")?;
        let id = ObjectId::new(string(id, "id")?);
        let pose = by_ref(pose, "pose")?;
        scene.0.set_pose_matrix(&id, std::array::from_fn(|r| std::array::from_fn(|c| pose.m[4 * r + c])))?;
        Ok(())
    })
}

/// # Safety
/// `scene` must be valid, `id` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pf_scene_get_pose(scene: *const PfScene, id: *const c_char, out: *mut PfTransform) -> PfStatus {
    guard(|| {
        let scene = by_ref(scene, "scene")?;
        let id = ObjectId::new(string(id, "id")?);
        let pose = scene.0.get_pose(&id)?;
        *by_mut(out, "out")? = PfTransform { m: pose.to_row_major() };
        Ok(())
    })
}

/// Renders the overlay as PNG bytes. `threads` 0 uses the default pool.
///
/// # Safety
/// `scene` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_scene_render_png(
    scene: *const PfScene,
    cam: PfCamera,
    threads: u32,
    out: *mut PfBuffer,
) -> PfStatus {
    guard(|| {
        let scene = by_ref(scene, "scene")?;
        let out = by_mut(out, "out")?;
        let opts = RenderOptions { threads: (threads > 0).then_some(threads as usize) };
        let frame = rasterize_with(&scene.0, camera(cam), &opts)?;
        let png = frame.image.to_png().map_err(|e| Failure(PfStatus::Render, e.to_string()))?;
        let boxed = png.into_boxed_slice();
        let len = boxed.len();
        *out = PfBuffer { data: Box::into_raw(boxed).cast(), len };
        Ok(())
    })
}

/// # Safety
/// `buf` must come from this library; freeing twice is undefined.
#[no_mangle]
pub unsafe extern "C" fn pf_buffer_free(buf: PfBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
}

/// Pose as four lines of eight-decimal text; free with [`pf_string_free`].
///
/// # Safety
/// `m` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_pose_export(m: *const PfTransform, out: *mut *mut c_char) -> PfStatus {
    guard(|| {
        let pose = transform(by_ref(m, "m")?)?;
        let out = by_mut(out, "out")?;
        *out = CString::new(export_pose(&pose)).expect("pose text has no NUL").into_raw();
        Ok(())
    })
}

/// Parses pose text (whitespace or comma separated), snapping slightly
/// drifted rotations back onto SO(3).
///
/// # Safety
/// `text` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pf_pose_import(text: *const c_char, out: *mut PfTransform) -> PfStatus {
    guard(|| {
        let pose = import_pose(string(text, "text")?)?;
        *by_mut(out, "out")? = PfTransform { m: pose.to_row_major() };
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
