//! Workspace documents: pretty-printed JSON with keys in alphabetical order
//! and shortest round-trip float formatting, so that saving a freshly loaded
//! workspace reproduces the file byte for byte.
//!
//! Mesh and background paths are stored relative to the workspace file when
//! they live below it. Meshes that were never read from disk are embedded.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{load_mesh, DatasetError};
use crate::geometry::{CameraIntrinsics, RigidTransform, Vec3};
use crate::imaging::{Rgb, RgbImage};
use crate::scene::{MeshAsset, ObjectId, Scene, SceneObject};

pub const WORKSPACE_VERSION: i64 = 1;

const BLANK_GRAY: Rgb = [128, 128, 128];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceDoc {
    background: Option<BackgroundRef>,
    intrinsics: IntrinsicsDoc,
    objects: Vec<ObjectDoc>,
    scene_camera: Vec<f64>,
    workspace_version: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsDoc {
    cx: f64,
    cy: f64,
    fx: f64,
    fy: f64,
    height: u32,
    width: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum BackgroundRef {
    Path(String),
    Inline { png_base64: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum MeshRef {
    Path(String),
    Inline(InlineMesh),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InlineMesh {
    name: String,
    triangles: Vec<[u32; 3]>,
    vertices: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MirrorDoc {
    x: bool,
    y: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    color: Rgb,
    id: String,
    mesh: MeshRef,
    mirror: MirrorDoc,
    opacity: f64,
    pose: Vec<f64>,
    spacing: [f64; 3],
    visible: bool,
}

fn relative_to(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned()
}

fn resolve(base: &Path, s: &str) -> PathBuf {
    let p = Path::new(s);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Serializes a scene; paths are made relative to `base_dir` where possible.
pub fn serialize_workspace(scene: &Scene, base_dir: &Path) -> Result<String, DatasetError> {
    let k = scene.intrinsics();
    let background = match &scene.background_path {
        Some(p) => Some(BackgroundRef::Path(relative_to(base_dir, p))),
        None => {
            let bg = scene.background();
            if bg.as_raw().chunks(3).all(|c| c == BLANK_GRAY) {
                None
            } else {
                let png = bg.to_png()?;
                Some(BackgroundRef::Inline {
                    png_base64: base64::engine::general_purpose::STANDARD.encode(png),
                })
            }
        }
    };
    let objects = scene
        .objects()
        .iter()
        .map(|o| ObjectDoc {
            color: o.color,
            id: o.id.0.clone(),
            mesh: match &o.mesh.source {
                Some(p) => MeshRef::Path(relative_to(base_dir, p)),
                None => MeshRef::Inline(InlineMesh {
                    name: o.mesh.name().to_owned(),
                    triangles: o.mesh.triangles().to_vec(),
                    vertices: o.mesh.vertices().iter().map(|v| v.to_array()).collect(),
                }),
            },
            mirror: MirrorDoc { x: o.mirror_x, y: o.mirror_y },
            opacity: o.opacity,
            pose: o.pose.to_row_major().to_vec(),
            spacing: o.spacing.to_array(),
            visible: o.visible,
        })
        .collect();
    let doc = WorkspaceDoc {
        background,
        intrinsics: IntrinsicsDoc { cx: k.cx, cy: k.cy, fx: k.fx, fy: k.fy, height: k.height, width: k.width },
        objects,
        scene_camera: scene.scene_camera.to_row_major().to_vec(),
        workspace_version: WORKSPACE_VERSION,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| DatasetError::parse("workspace", e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn pose16(v: &[f64], what: &str) -> Result<RigidTransform, DatasetError> {
    let arr: &[f64; 16] = v
        .try_into()
        .map_err(|_| DatasetError::parse("workspace", format!("{what} has {} values, expected 16", v.len())))?;
    RigidTransform::from_row_major(arr).map_err(|e| DatasetError::InvalidRotation(format!("{what}: {e}")))
}

pub fn deserialize_workspace(text: &str, base_dir: &Path) -> Result<Scene, DatasetError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| DatasetError::parse("workspace", e.to_string()))?;
    let version = value.get("workspace_version").and_then(serde_json::Value::as_i64);
    match version {
        Some(WORKSPACE_VERSION) => {}
        Some(found) => return Err(DatasetError::VersionMismatch { found, expected: WORKSPACE_VERSION }),
        None => return Err(DatasetError::parse("workspace", "missing integer workspace_version")),
    }
    let doc: WorkspaceDoc =
        serde_json::from_value(value).map_err(|e| DatasetError::parse("workspace", e.to_string()))?;
    let i = &doc.intrinsics;
    let k = CameraIntrinsics::new(i.fx, i.fy, i.cx, i.cy, i.width, i.height)
        .map_err(|e| DatasetError::parse("workspace", e.to_string()))?;
    let mut scene = match &doc.background {
        None => Scene::blank(k)?,
        Some(BackgroundRef::Path(p)) => {
            let path = resolve(base_dir, p);
            let mut s = Scene::new(k, RgbImage::load_png(&path)?)?;
            s.background_path = Some(path);
            s
        }
        Some(BackgroundRef::Inline { png_base64 }) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(png_base64)
                .map_err(|e| DatasetError::parse("workspace background", e.to_string()))?;
            Scene::new(k, RgbImage::decode_png(std::io::Cursor::new(bytes))?)?
        }
    };
    scene.scene_camera = pose16(&doc.scene_camera, "scene_camera")?;
    for o in doc.objects {
        let id = ObjectId(o.id);
        let mesh = match o.mesh {
            MeshRef::Path(p) => {
                let path = resolve(base_dir, &p);
                let m = load_mesh(&path)?;
                MeshAsset::new(id.clone(), m.name().to_owned(), m.vertices().to_vec(), m.triangles().to_vec())?
                    .with_source(path)
            }
            MeshRef::Inline(m) => MeshAsset::new(
                id.clone(),
                m.name,
                m.vertices.into_iter().map(Vec3::from).collect(),
                m.triangles,
            )?,
        };
        let pose = pose16(&o.pose, &format!("pose of {id}"))?;
        scene.insert_object(SceneObject {
            id,
            mesh: Arc::new(mesh),
            pose,
            color: o.color,
            opacity: o.opacity,
            visible: o.visible,
            mirror_x: o.mirror.x,
            mirror_y: o.mirror.y,
            spacing: Vec3::from(o.spacing),
        })?;
    }
    Ok(scene)
}

/// Writes atomically: a temporary file in the target directory is renamed
/// over `path`.
pub fn save_workspace(scene: &Scene, path: &Path) -> Result<(), DatasetError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let text = serialize_workspace(scene, dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| DatasetError::Io(e.error))?;
    Ok(())
}

pub fn load_workspace(path: &Path) -> Result<Scene, DatasetError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(path)?;
    deserialize_workspace(&text, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_from_axis_angle;
    use crate::io::write_ply;
    use crate::scene::DisplayUpdate;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 32.0, 24.0, 64, 48).unwrap()
    }

    fn tri(id: &str) -> MeshAsset {
        MeshAsset::new(id, id, vec![Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0), Vec3::new(0.0, 10.0, 0.0)], vec![[0, 1, 2]])
            .unwrap()
    }

    #[test]
    fn empty_scene_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = Scene::blank(k()).unwrap();
        let text = serialize_workspace(&scene, dir.path()).unwrap();
        let back = deserialize_workspace(&text, dir.path()).unwrap();
        assert_eq!(serialize_workspace(&back, dir.path()).unwrap(), text);
        assert!(text.contains("\"workspace_version\": 1"));
    }

    #[test]
    fn eight_objects_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut bg = RgbImage::new(64, 48, [10, 20, 30]);
        bg.put(3, 4, [200, 100, 0]);
        bg.save_png(&dir.path().join("bg.png")).unwrap();
        let mut scene = Scene::new(k(), bg).unwrap();
        scene.background_path = Some(dir.path().join("bg.png"));
        for i in 0..8 {
            let mesh = tri(&format!("m{i}"));
            let mesh = if i % 2 == 0 {
                let p = dir.path().join(format!("m{i}.ply"));
                std::fs::write(&p, write_ply(&mesh)).unwrap();
                load_mesh(&p).unwrap()
            } else {
                mesh
            };
            let id = scene.add_object(mesh).unwrap();
            let pose = RigidTransform::new(
                rotation_from_axis_angle(Vec3::new(1.0, f64::from(i), 0.5), 0.1 * f64::from(i) + 0.05).unwrap(),
                Vec3::new(f64::from(i) / 3.0, -1.0 / 7.0, 400.0 + f64::from(i)),
            );
            scene.set_pose(&id, pose).unwrap();
            scene
                .set_display(
                    &id,
                    &DisplayUpdate {
                        opacity: Some(0.1 * f64::from(i)),
                        mirror_x: Some(i % 3 == 0),
                        spacing: Some(Vec3::new(1.0, 1.5, 0.25)),
                        visible: Some(i != 5),
                        ..Default::default()
                    },
                )
                .unwrap();
        }
        scene.set_standard_view(crate::scene::StandardView::Left);
        let path = dir.path().join("ws.json");
        save_workspace(&scene, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_workspace(&path).unwrap();
        assert_eq!(loaded.objects().len(), 8);
        for (a, b) in loaded.objects().iter().zip(scene.objects()) {
            assert_eq!(a.pose, b.pose);
            assert_eq!(a.mesh.vertices(), b.mesh.vertices());
        }
        save_workspace(&loaded, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert!(String::from_utf8(first).unwrap().contains("\"bg.png\""));
    }

    #[test]
    fn future_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = serialize_workspace(&Scene::blank(k()).unwrap(), dir.path())
            .unwrap()
            .replace("\"workspace_version\": 1", "\"workspace_version\": 2");
        assert!(matches!(
            deserialize_workspace(&text, dir.path()),
            Err(DatasetError::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn malformed_documents() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(deserialize_workspace("{", dir.path()), Err(DatasetError::Parse { .. })));
        assert!(matches!(deserialize_workspace("{}", dir.path()), Err(DatasetError::Parse { .. })));
        let text = serialize_workspace(&Scene::blank(k()).unwrap(), dir.path()).unwrap();
        let bad = text.replace("\"scene_camera\": [\n    1.0", "\"scene_camera\": [\n    -1.0");
        assert!(matches!(deserialize_workspace(&bad, dir.path()), Err(DatasetError::InvalidRotation(_))));
    }
}
