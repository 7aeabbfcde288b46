//! Dataset sample layout:
//!
//! ```text
//! root/samples/<id>/image.png
//! root/samples/<id>/camera.txt      fx fy cx cy width height
//!                                   [unit multiplier, default 1.0]
//! root/samples/<id>/objects/<name>.ply|.obj
//! root/samples/<id>/gt/<name>.txt   4×4 pose, optional
//! ```
//!
//! The unit multiplier converts dataset units to millimeters and is applied
//! to mesh vertices and ground-truth translations.

use std::path::{Path, PathBuf};

use super::pose::{parse_pose_full, write_pose_full};
use super::{load_mesh, write_ply, DatasetError};
use crate::geometry::{CameraIntrinsics, RigidTransform};
use crate::imaging::{self, RgbImage};
use crate::scene::MeshAsset;

pub const SAMPLES_DIR: &str = "samples";

#[derive(Debug, Clone, PartialEq)]
pub struct SampleObject {
    pub name: String,
    pub mesh_path: PathBuf,
    pub ground_truth: Option<RigidTransform>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub id: String,
    pub image_path: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub unit_scale: f64,
    pub objects: Vec<SampleObject>,
}

impl DatasetSample {
    /// Loads an object's mesh, converted to millimeters.
    pub fn load_mesh(&self, object: &SampleObject) -> Result<MeshAsset, DatasetError> {
        Ok(load_mesh(&object.mesh_path)?.scaled(self.unit_scale))
    }
}

/// Sample ids under `root/samples`, sorted.
pub fn list_samples(root: &Path) -> Result<Vec<String>, DatasetError> {
    let dir = root.join(SAMPLES_DIR);
    let entries = std::fs::read_dir(&dir)
        .map_err(|e| DatasetError::Layout(format!("{}: {e}", dir.display())))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            if let Some(name) = entry.file_name().to_str() {
                ids.push(name.to_owned());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn load_sample(root: &Path, id: &str) -> Result<DatasetSample, DatasetError> {
    let dir = root.join(SAMPLES_DIR).join(id);
    if !dir.is_dir() {
        return Err(DatasetError::Layout(format!("{} is not a directory", dir.display())));
    }
    let camera_path = dir.join("camera.txt");
    let camera_text = std::fs::read_to_string(&camera_path)
        .map_err(|e| DatasetError::Layout(format!("{}: {e}", camera_path.display())))?;
    let (intrinsics, unit_scale) = parse_camera(&camera_text, &camera_path.display().to_string())?;

    let image_path = dir.join("image.png");
    if !image_path.is_file() {
        return Err(DatasetError::Layout(format!("{} is missing", image_path.display())));
    }
    let dims = imaging::png_dimensions(&image_path)?;
    if dims != (intrinsics.width, intrinsics.height) {
        return Err(DatasetError::Layout(format!(
            "{} is {}x{}, camera.txt says {}x{}",
            image_path.display(),
            dims.0,
            dims.1,
            intrinsics.width,
            intrinsics.height
        )));
    }

    let objects_dir = dir.join("objects");
    let mut mesh_paths: Vec<PathBuf> = std::fs::read_dir(&objects_dir)
        .map_err(|e| DatasetError::Layout(format!("{}: {e}", objects_dir.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("ply") | Some("obj")
            )
        })
        .collect();
    mesh_paths.sort();
    if mesh_paths.is_empty() {
        return Err(DatasetError::Layout(format!("{} holds no meshes", objects_dir.display())));
    }

    let mut objects = Vec::with_capacity(mesh_paths.len());
    for mesh_path in mesh_paths {
        let name = mesh_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| DatasetError::Layout(format!("bad mesh file name {}", mesh_path.display())))?
            .to_owned();
        let gt_path = dir.join("gt").join(format!("{name}.txt"));
        let ground_truth = if gt_path.is_file() {
            let text = std::fs::read_to_string(&gt_path)?;
            let mut pose = parse_pose_full(&text, &gt_path.display().to_string())?;
            if unit_scale != 1.0 {
                pose.translation = pose.translation * unit_scale;
            }
            Some(pose)
        } else {
            None
        };
        objects.push(SampleObject { name, mesh_path, ground_truth });
    }

    Ok(DatasetSample { id: id.to_owned(), image_path, intrinsics, unit_scale, objects })
}

/// Parses `camera.txt` contents into intrinsics and the unit multiplier.
pub fn parse_camera(text: &str, context: &str) -> Result<(CameraIntrinsics, f64), DatasetError> {
    let err = |msg: String| DatasetError::parse(context, msg);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let first = lines.next().ok_or_else(|| err("empty camera file".into()))?;
    let t: Vec<&str> = first.split_whitespace().collect();
    if t.len() != 6 {
        return Err(err(format!("expected 'fx fy cx cy width height', got {} values", t.len())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
    let dim = |s: &str| s.parse::<u32>().map_err(|_| err(format!("bad image dimension {s:?}")));
    let k = CameraIntrinsics::new(num(t[0])?, num(t[1])?, num(t[2])?, num(t[3])?, dim(t[4])?, dim(t[5])?)
        .map_err(|e| err(e.to_string()))?;
    let unit = match lines.next() {
        Some(l) => {
            let u = num(l)?;
            if !(u > 0.0 && u.is_finite()) {
                return Err(err(format!("unit multiplier must be positive, got {u}")));
            }
            u
        }
        None => 1.0,
    };
    Ok((k, unit))
}

/// Writes a sample in the layout above. Ground-truth poses are written at
/// full precision; meshes as ASCII PLY.
pub fn write_sample(
    root: &Path,
    id: &str,
    image: &RgbImage,
    intrinsics: &CameraIntrinsics,
    objects: &[(&MeshAsset, Option<RigidTransform>)],
) -> Result<PathBuf, DatasetError> {
    let dir = root.join(SAMPLES_DIR).join(id);
    std::fs::create_dir_all(dir.join("objects"))?;
    image.save_png(&dir.join("image.png"))?;
    let k = intrinsics;
    std::fs::write(
        dir.join("camera.txt"),
        format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, k.width, k.height),
    )?;
    for (mesh, gt) in objects {
        let name = mesh.id().as_str();
        std::fs::write(dir.join("objects").join(format!("{name}.ply")), write_ply(mesh))?;
        if let Some(pose) = gt {
            std::fs::create_dir_all(dir.join("gt"))?;
            std::fs::write(dir.join("gt").join(format!("{name}.txt")), write_pose_full(pose))?;
        }
    }
    Ok(dir)
}
