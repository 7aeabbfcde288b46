//! The annotation scene: background image, intrinsics, posed meshes and the
//! two cameras (the fixed original camera and a free scene camera).

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    self, Axis, CameraIntrinsics, GeometryError, Mat4, PixelCoord, RigidTransform, RotationMatrix, Vec3,
};
use crate::imaging::{Rgb, RgbImage};

/// Geometry closer to the camera than this (mm) is clipped.
pub const NEAR_PLANE: f64 = 1.0;

/// Distinct display colors, assigned round-robin as objects are added.
pub const PALETTE: [Rgb; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [170, 110, 40],
];

/// Standard views sit this many bounding-sphere radii from the scene center.
pub const VIEW_DISTANCE_RADII: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("object id {0} already exists")]
    DuplicateId(ObjectId),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("pixel ({u}, {v}) outside the {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("background is {actual:?}, intrinsics expect {expected:?}")]
    BackgroundSize { expected: (u32, u32), actual: (u32, u32) },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl SceneError {
    fn from_pose_error(e: GeometryError) -> Self {
        match e {
            GeometryError::InvalidRotation { reason } => SceneError::InvalidRotation(reason),
            other => SceneError::Geometry(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Triangle mesh in model coordinates (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct MeshAsset {
    id: ObjectId,
    name: String,
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    /// File the mesh was read from, if any. Needed to save workspaces.
    pub source: Option<PathBuf>,
    /// Per-axis spacing carried by the source data, if it declared one.
    pub spacing: Option<Vec3>,
}

impl MeshAsset {
    pub fn new(
        id: impl Into<ObjectId>,
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self, SceneError> {
        if triangles.is_empty() {
            return Err(SceneError::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(SceneError::InvalidMesh(format!("vertex {i} is not finite")));
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(SceneError::InvalidMesh(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        Ok(Self {
            id: id.into(),
            name: name.into(),
            vertices,
            triangles,
            source: None,
            spacing: None,
        })
    }

    pub fn with_source(mut self, path: impl Into<PathBuf>) -> Self {
        self.source = Some(path.into());
        self
    }

    pub fn id(&self) -> &ObjectId {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn centroid(&self) -> Vec3 {
        if self.vertices.is_empty() {
            return Vec3::ZERO;
        }
        let sum = self.vertices.iter().fold(Vec3::ZERO, |acc, v| acc + *v);
        sum * (1.0 / self.vertices.len() as f64)
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| (lo.min(*v), hi.max(*v))))
    }

    /// Multiplies every vertex by `factor` (unit conversion).
    pub fn scaled(mut self, factor: f64) -> Self {
        if factor != 1.0 {
            for v in &mut self.vertices {
                *v = *v * factor;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: ObjectId,
    pub mesh: Arc<MeshAsset>,
    pub pose: RigidTransform,
    pub color: Rgb,
    pub opacity: f64,
    pub visible: bool,
    pub mirror_x: bool,
    pub mirror_y: bool,
    pub spacing: Vec3,
}

impl SceneObject {
    /// Model-frame point that mirroring and gestures pivot on: the mesh
    /// centroid after spacing.
    pub fn pivot(&self) -> Vec3 {
        self.mesh.centroid().scale(self.spacing)
    }
}

/// `pose · mirror · diag(spacing)`, applied to model-frame vertices.
pub fn effective_model_transform(obj: &SceneObject) -> Mat4 {
    effective_transform_with_pose(obj, &obj.pose)
}

pub(crate) fn effective_transform_with_pose(obj: &SceneObject, pose: &RigidTransform) -> Mat4 {
    let unit = obj.spacing == Vec3::splat(1.0);
    if unit && !obj.mirror_x && !obj.mirror_y {
        return pose.to_mat4();
    }
    let mut m = pose.to_mat4();
    let center = obj.pivot();
    if obj.mirror_x {
        m = geometry::mirror_matrix(&m, Axis::X, center);
    }
    if obj.mirror_y {
        m = geometry::mirror_matrix(&m, Axis::Y, center);
    }
    if !unit {
        m = m.mul(&Mat4::diagonal(obj.spacing));
    }
    m
}

/// Partial display update; `None` fields are left untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplayUpdate {
    pub visible: Option<bool>,
    pub opacity: Option<f64>,
    pub color: Option<Rgb>,
    pub mirror_x: Option<bool>,
    pub mirror_y: Option<bool>,
    pub spacing: Option<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraSelect {
    Scene,
    #[default]
    Original,
}

impl std::str::FromStr for CameraSelect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scene" => Ok(Self::Scene),
            "original" => Ok(Self::Original),
            other => Err(format!("unknown camera {other:?} (expected scene|original)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardView {
    Front,
    Back,
    Left,
    Right,
    Top,
    Bottom,
    ResetToOriginal,
}

#[derive(Debug, Clone)]
pub struct Scene {
    intrinsics: CameraIntrinsics,
    background: Arc<RgbImage>,
    pub background_path: Option<PathBuf>,
    objects: Vec<SceneObject>,
    pub scene_camera: RigidTransform,
}

impl Scene {
    pub fn new(intrinsics: CameraIntrinsics, background: RgbImage) -> Result<Self, SceneError> {
        intrinsics.validate()?;
        let expected = (intrinsics.width, intrinsics.height);
        let actual = (background.width(), background.height());
        if expected != actual {
            return Err(SceneError::BackgroundSize { expected, actual });
        }
        Ok(Self {
            intrinsics,
            background: Arc::new(background),
            background_path: None,
            objects: Vec::new(),
            scene_camera: RigidTransform::IDENTITY,
        })
    }

    /// Scene over a uniform mid-gray background.
    pub fn blank(intrinsics: CameraIntrinsics) -> Result<Self, SceneError> {
        let bg = RgbImage::new(intrinsics.width, intrinsics.height, [128, 128, 128]);
        Self::new(intrinsics, bg)
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn background(&self) -> &RgbImage {
        &self.background
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn object(&self, id: &ObjectId) -> Result<&SceneObject, SceneError> {
        self.objects
            .iter()
            .find(|o| &o.id == id)
            .ok_or_else(|| SceneError::UnknownObject(id.clone()))
    }

    fn object_mut(&mut self, id: &ObjectId) -> Result<&mut SceneObject, SceneError> {
        self.objects
            .iter_mut()
            .find(|o| &o.id == id)
            .ok_or_else(|| SceneError::UnknownObject(id.clone()))
    }

    pub fn index_of(&self, id: &ObjectId) -> Option<usize> {
        self.objects.iter().position(|o| &o.id == id)
    }

    /// The original camera is the identity: poses already live in its frame.
    pub fn original_camera(&self) -> RigidTransform {
        RigidTransform::IDENTITY
    }

    pub fn camera_pose(&self, camera: CameraSelect) -> RigidTransform {
        match camera {
            CameraSelect::Original => self.original_camera(),
            CameraSelect::Scene => self.scene_camera,
        }
    }

    /// Appends the mesh at the identity pose with the next palette color.
    pub fn add_object(&mut self, mesh: impl Into<Arc<MeshAsset>>) -> Result<ObjectId, SceneError> {
        let mesh = mesh.into();
        let id = mesh.id().clone();
        if self.index_of(&id).is_some() {
            return Err(SceneError::DuplicateId(id));
        }
        let color = PALETTE[self.objects.len() % PALETTE.len()];
        let spacing = mesh.spacing.unwrap_or(Vec3::splat(1.0));
        self.objects.push(SceneObject {
            id: id.clone(),
            mesh,
            pose: RigidTransform::IDENTITY,
            color,
            opacity: 1.0,
            visible: true,
            mirror_x: false,
            mirror_y: false,
            spacing,
        });
        Ok(id)
    }

    /// Inserts a fully specified object (used when restoring workspaces).
    pub fn insert_object(&mut self, obj: SceneObject) -> Result<(), SceneError> {
        if self.index_of(&obj.id).is_some() {
            return Err(SceneError::DuplicateId(obj.id));
        }
        validate_display(obj.opacity, obj.spacing)?;
        check_pose(&obj.pose)?;
        self.objects.push(obj);
        Ok(())
    }

    pub fn remove_object(&mut self, id: &ObjectId) -> Result<SceneObject, SceneError> {
        let i = self.index_of(id).ok_or_else(|| SceneError::UnknownObject(id.clone()))?;
        Ok(self.objects.remove(i))
    }

    pub fn get_pose(&self, id: &ObjectId) -> Result<RigidTransform, SceneError> {
        Ok(self.object(id)?.pose)
    }

    pub fn set_pose(&mut self, id: &ObjectId, pose: RigidTransform) -> Result<(), SceneError> {
        check_pose(&pose)?;
        self.object_mut(id)?.pose = pose;
        Ok(())
    }

    /// Sets a pose from a raw row-major 4×4, validating the rotation block.
    pub fn set_pose_matrix(&mut self, id: &ObjectId, m: [[f64; 4]; 4]) -> Result<(), SceneError> {
        self.object(id)?;
        let pose = RigidTransform::from_matrix(m).map_err(SceneError::from_pose_error)?;
        self.set_pose(id, pose)
    }

    pub fn set_display(&mut self, id: &ObjectId, update: &DisplayUpdate) -> Result<(), SceneError> {
        let obj = self.object(id)?;
        let opacity = update.opacity.unwrap_or(obj.opacity);
        let spacing = update.spacing.unwrap_or(obj.spacing);
        validate_display(opacity, spacing)?;
        let obj = self.object_mut(id)?;
        obj.opacity = opacity;
        obj.spacing = spacing;
        if let Some(v) = update.visible {
            obj.visible = v;
        }
        if let Some(c) = update.color {
            obj.color = c;
        }
        if let Some(m) = update.mirror_x {
            obj.mirror_x = m;
        }
        if let Some(m) = update.mirror_y {
            obj.mirror_y = m;
        }
        Ok(())
    }

    /// Nearest visible surface along the ray through `pixel`.
    pub fn pick_object(&self, pixel: PixelCoord, camera: CameraSelect) -> Result<Option<ObjectId>, SceneError> {
        let k = &self.intrinsics;
        let inside = pixel.u >= 0.0
            && pixel.v >= 0.0
            && pixel.u < f64::from(k.width)
            && pixel.v < f64::from(k.height);
        if !inside {
            return Err(SceneError::OutOfBounds {
                u: pixel.u,
                v: pixel.v,
                width: k.width,
                height: k.height,
            });
        }
        let dir = k.back_project(pixel);
        let view = self.camera_pose(camera).to_mat4();
        let mut best: Option<(f64, usize)> = None;
        for (idx, obj) in self.objects.iter().enumerate() {
            if !obj.visible {
                continue;
            }
            let m = view.mul(&effective_model_transform(obj));
            let cam: Vec<Vec3> = obj.mesh.vertices().iter().map(|v| m.transform_point(*v)).collect();
            for t in obj.mesh.triangles() {
                let tri = [cam[t[0] as usize], cam[t[1] as usize], cam[t[2] as usize]];
                if let Some(depth) = ray_triangle_depth(dir, &tri) {
                    if depth >= NEAR_PLANE && best.is_none_or(|(d, _)| depth < d) {
                        best = Some((depth, idx));
                    }
                }
            }
        }
        Ok(best.map(|(_, i)| self.objects[i].id.clone()))
    }

    /// Axis-aligned bounds of every visible object, in the original camera
    /// frame.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut acc: Option<(Vec3, Vec3)> = None;
        for obj in self.objects.iter().filter(|o| o.visible) {
            let m = effective_model_transform(obj);
            for v in obj.mesh.vertices() {
                let p = m.transform_point(*v);
                acc = Some(match acc {
                    None => (p, p),
                    Some((lo, hi)) => (lo.min(p), hi.max(p)),
                });
            }
        }
        acc
    }

    pub fn set_standard_view(&mut self, view: StandardView) {
        self.scene_camera = self.standard_view_pose(view);
    }

    /// Camera pose for a one-click view, framing the visible objects. With no
    /// objects the framing falls back to a sphere of radius `fx/2` centered
    /// `fx` mm down the optical axis.
    pub fn standard_view_pose(&self, view: StandardView) -> RigidTransform {
        let (center, radius) = match self.bounds() {
            Some((lo, hi)) => ((lo + hi) * 0.5, ((hi - lo) * 0.5).norm()),
            None => (Vec3::new(0.0, 0.0, self.intrinsics.fx), self.intrinsics.fx * 0.5),
        };
        let radius = if radius > 0.0 { radius } else { 1.0 };
        let distance = VIEW_DISTANCE_RADII * radius;
        // (viewing direction, image-down direction) in the original frame.
        let (forward, down) = match view {
            StandardView::ResetToOriginal => return self.original_camera(),
            StandardView::Front => (Vec3::Z, Vec3::Y),
            StandardView::Back => (-Vec3::Z, Vec3::Y),
            StandardView::Left => (Vec3::X, Vec3::Y),
            StandardView::Right => (-Vec3::X, Vec3::Y),
            StandardView::Top => (Vec3::Y, Vec3::Z),
            StandardView::Bottom => (-Vec3::Y, -Vec3::Z),
        };
        look_at(center - forward * distance, forward, down)
    }
}

/// World→camera transform for a camera at `eye` looking along `forward`
/// with `down` as the image-down hint.
pub fn look_at(eye: Vec3, forward: Vec3, down: Vec3) -> RigidTransform {
    let f = forward.normalized();
    let right = down.cross(f).normalized();
    let d = f.cross(right);
    let rotation = RotationMatrix::from_rows([right.to_array(), d.to_array(), f.to_array()])
        .expect("look_at basis is orthonormal")
        .reorthonormalize_if_drifted();
    RigidTransform::new(rotation, -rotation.apply(eye))
}

fn check_pose(pose: &RigidTransform) -> Result<(), SceneError> {
    RotationMatrix::from_rows(pose.rotation.rows()).map_err(SceneError::from_pose_error)?;
    if !pose.translation.is_finite() {
        return Err(GeometryError::NonFinite { what: "translation" }.into());
    }
    Ok(())
}

fn validate_display(opacity: f64, spacing: Vec3) -> Result<(), SceneError> {
    if !(0.0..=1.0).contains(&opacity) {
        return Err(SceneError::OutOfRange { field: "opacity", value: opacity });
    }
    for v in spacing.to_array() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SceneError::OutOfRange { field: "spacing", value: v });
        }
    }
    Ok(())
}

/// Möller–Trumbore against a ray from the camera origin; returns the hit's
/// camera-frame depth. `dir` must have `z = 1`.
pub(crate) fn ray_triangle_depth(dir: Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = -tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > 0.0).then_some(t * dir.z)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::rotation_from_axis_angle;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 32.0, 32.0, 64, 64).unwrap()
    }

    pub(crate) fn cube(id: &str, half: f64) -> MeshAsset {
        let h = half;
        let v = vec![
            Vec3::new(-h, -h, -h),
            Vec3::new(h, -h, -h),
            Vec3::new(h, h, -h),
            Vec3::new(-h, h, -h),
            Vec3::new(-h, -h, h),
            Vec3::new(h, -h, h),
            Vec3::new(h, h, h),
            Vec3::new(-h, h, h),
        ];
        let t = vec![
            [0, 1, 2], [0, 2, 3], [4, 6, 5], [4, 7, 6], [0, 4, 5], [0, 5, 1],
            [3, 2, 6], [3, 6, 7], [0, 3, 7], [0, 7, 4], [1, 5, 6], [1, 6, 2],
        ];
        MeshAsset::new(id, id, v, t).unwrap()
    }

    #[test]
    fn add_object_starts_at_identity() {
        let mut s = Scene::blank(k()).unwrap();
        let id = s.add_object(cube("a", 10.0)).unwrap();
        assert_eq!(s.objects().len(), 1);
        assert_eq!(s.get_pose(&id).unwrap(), RigidTransform::IDENTITY);
        let o = s.object(&id).unwrap();
        assert_eq!((o.opacity, o.visible), (1.0, true));
    }

    #[test]
    fn eight_objects_get_distinct_colors() {
        let mut s = Scene::blank(k()).unwrap();
        for i in 0..8 {
            s.add_object(cube(&format!("m{i}"), 5.0)).unwrap();
        }
        let mut colors: Vec<Rgb> = s.objects().iter().map(|o| o.color).collect();
        colors.sort();
        colors.dedup();
        assert_eq!(colors.len(), 8);
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut s = Scene::blank(k()).unwrap();
        s.add_object(cube("a", 1.0)).unwrap();
        assert_eq!(s.add_object(cube("a", 2.0)), Err(SceneError::DuplicateId("a".into())));
    }

    #[test]
    fn pose_set_get_is_exact() {
        let mut s = Scene::blank(k()).unwrap();
        let id = s.add_object(cube("a", 1.0)).unwrap();
        let m = RigidTransform::new(
            rotation_from_axis_angle(Vec3::new(0.1, 0.2, 0.3), 2.2).unwrap(),
            Vec3::new(1.0 / 3.0, -7.25, 512.125),
        );
        s.set_pose(&id, m).unwrap();
        assert_eq!(s.get_pose(&id).unwrap(), m);
        let mut bad = RigidTransform::IDENTITY.to_matrix();
        bad[0][0] = -1.0;
        assert!(matches!(s.set_pose_matrix(&id, bad), Err(SceneError::InvalidRotation(_))));
        assert!(matches!(
            s.set_pose(&"zz".into(), m),
            Err(SceneError::UnknownObject(_))
        ));
    }

    #[test]
    fn display_updates() {
        let mut s = Scene::blank(k()).unwrap();
        let id = s.add_object(cube("a", 1.0)).unwrap();
        s.set_display(&id, &DisplayUpdate { opacity: Some(0.5), ..Default::default() }).unwrap();
        assert_eq!(s.object(&id).unwrap().opacity, 0.5);
        let err = s.set_display(&id, &DisplayUpdate { opacity: Some(1.5), visible: Some(false), ..Default::default() });
        assert!(matches!(err, Err(SceneError::OutOfRange { .. })));
        // Rejected updates are atomic.
        assert!(s.object(&id).unwrap().visible);
        let err = s.set_display(&id, &DisplayUpdate { spacing: Some(Vec3::new(1.0, 0.0, 1.0)), ..Default::default() });
        assert!(matches!(err, Err(SceneError::OutOfRange { .. })));
    }

    #[test]
    fn spacing_doubles_z_extent() {
        let mut s = Scene::blank(k()).unwrap();
        let id = s.add_object(cube("a", 10.0)).unwrap();
        s.set_pose(&id, RigidTransform::from_translation(Vec3::new(0.0, 0.0, 300.0))).unwrap();
        let (lo, hi) = s.bounds().unwrap();
        let base = hi - lo;
        s.set_display(&id, &DisplayUpdate { spacing: Some(Vec3::new(1.0, 1.0, 2.0)), ..Default::default() })
            .unwrap();
        let (lo, hi) = s.bounds().unwrap();
        let ext = hi - lo;
        assert!((ext.z - 2.0 * base.z).abs() < 1e-9);
        assert!((ext.x - base.x).abs() < 1e-9);
    }

    #[test]
    fn effective_transform_defaults_and_scale() {
        let mut s = Scene::blank(k()).unwrap();
        let id = s.add_object(cube("a", 1.0)).unwrap();
        let pose = RigidTransform::new(RotationMatrix::rot_y(0.3), Vec3::new(1.0, 2.0, 3.0));
        s.set_pose(&id, pose).unwrap();
        assert_eq!(effective_model_transform(s.object(&id).unwrap()), pose.to_mat4());
        s.set_pose(&id, RigidTransform::IDENTITY).unwrap();
        s.set_display(&id, &DisplayUpdate { spacing: Some(Vec3::splat(2.0)), ..Default::default() }).unwrap();
        let m = effective_model_transform(s.object(&id).unwrap());
        assert_eq!(m, Mat4::diagonal(Vec3::splat(2.0)));
    }

    #[test]
    fn mirror_toggle_twice_restores_transform() {
        let mut s = Scene::blank(k()).unwrap();
        let id = s.add_object(cube("a", 1.0)).unwrap();
        let pose = RigidTransform::new(RotationMatrix::rot_x(0.7), Vec3::new(0.0, 0.0, 50.0));
        s.set_pose(&id, pose).unwrap();
        let on = DisplayUpdate { mirror_x: Some(true), ..Default::default() };
        let off = DisplayUpdate { mirror_x: Some(false), ..Default::default() };
        s.set_display(&id, &on).unwrap();
        let mirrored = effective_model_transform(s.object(&id).unwrap());
        assert!(mirrored.max_abs_diff(&pose.to_mat4()) > 0.5);
        s.set_display(&id, &off).unwrap();
        assert_eq!(effective_model_transform(s.object(&id).unwrap()), pose.to_mat4());
    }

    #[test]
    fn pick_empty_and_out_of_bounds() {
        let s = Scene::blank(k()).unwrap();
        assert_eq!(s.pick_object(PixelCoord::new(10.5, 10.5), CameraSelect::Original).unwrap(), None);
        assert!(matches!(
            s.pick_object(PixelCoord::new(64.0, 1.0), CameraSelect::Original),
            Err(SceneError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn pick_nearer_of_two() {
        let mut s = Scene::blank(k()).unwrap();
        let far = s.add_object(cube("far", 30.0)).unwrap();
        let near = s.add_object(cube("near", 10.0)).unwrap();
        s.set_pose(&far, RigidTransform::from_translation(Vec3::new(0.0, 0.0, 600.0))).unwrap();
        s.set_pose(&near, RigidTransform::from_translation(Vec3::new(0.0, 0.0, 400.0))).unwrap();
        let center = PixelCoord::new(32.5, 32.5);
        assert_eq!(s.pick_object(center, CameraSelect::Original).unwrap(), Some(near.clone()));
        // Outside the near cube's footprint but inside the far one.
        assert_eq!(s.pick_object(PixelCoord::new(50.5, 32.5), CameraSelect::Original).unwrap(), Some(far));
        s.set_display(&near, &DisplayUpdate { visible: Some(false), ..Default::default() }).unwrap();
        assert_eq!(s.pick_object(center, CameraSelect::Original).unwrap(), Some("far".into()));
    }

    #[test]
    fn standard_views() {
        let mut s = Scene::blank(k()).unwrap();
        let id = s.add_object(cube("a", 10.0)).unwrap();
        s.set_pose(&id, RigidTransform::from_translation(Vec3::new(5.0, -5.0, 300.0))).unwrap();
        s.set_standard_view(StandardView::Top);
        let top = s.scene_camera;
        s.set_standard_view(StandardView::Top);
        assert_eq!(s.scene_camera, top);
        // The optical axis of the top view points along +Y (image-down is +Y
        // in the original frame) and passes through the bbox center.
        let (lo, hi) = s.bounds().unwrap();
        let center = (lo + hi) * 0.5;
        let c = top.apply_point(center);
        assert!(c.x.abs() < 1e-9 && c.y.abs() < 1e-9 && c.z > 0.0);
        let axis = top.rotation.row(2);
        assert!((axis - Vec3::Y).norm() < 1e-12);
        s.set_standard_view(StandardView::ResetToOriginal);
        assert_eq!(s.scene_camera, RigidTransform::IDENTITY);
        for v in [StandardView::Front, StandardView::Back, StandardView::Left, StandardView::Right, StandardView::Bottom] {
            let p = s.standard_view_pose(v).apply_point(center);
            assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9 && p.z > 0.0, "{v:?}");
        }
    }

    #[test]
    fn mesh_validation() {
        assert!(MeshAsset::new("m", "m", vec![Vec3::ZERO; 3], vec![]).is_err());
        assert!(MeshAsset::new("m", "m", vec![Vec3::ZERO; 3], vec![[0, 1, 3]]).is_err());
        assert!(MeshAsset::new("m", "m", vec![Vec3::new(f64::NAN, 0.0, 0.0); 3], vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn background_size_checked() {
        let bg = RgbImage::new(10, 10, [0, 0, 0]);
        assert!(matches!(Scene::new(k(), bg), Err(SceneError::BackgroundSize { .. })));
    }
}
