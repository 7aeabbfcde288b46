//! Pinhole image formation and rigid-body algebra.
//!
//! Conventions used throughout the crate:
//!
//! - camera frame: +Z forward, +X right, +Y down; image origin top-left
//! - all lengths are millimeters
//! - a pose `M = [R | t]` maps model/world points into the camera frame
//!
//! Intrinsics are stored as `fx, fy, cx, cy`; the 4×4 homogeneous form is
//! available through [`CameraIntrinsics::to_matrix`] but is never needed on
//! the hot path.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum per-entry deviation of `RᵀR` from identity (and of `det R` from 1)
/// accepted for a rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Drift above which composed rotations are re-orthonormalized.
pub const ORTHONORMAL_DRIFT: f64 = 1e-12;

/// Upper bound on `width · height` accepted by [`CameraIntrinsics`].
pub const MAX_IMAGE_PIXELS: u64 = 1 << 26;

/// Scroll gain for depth gestures, per notch.
pub const DEPTH_GAIN_PER_NOTCH: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("rotation axis is degenerate (|axis| = {norm:e})")]
    DegenerateAxis { norm: f64 },
    #[error("matrix is not a proper rotation: {reason}")]
    InvalidRotation { reason: String },
    #[error("invalid intrinsics: {reason}")]
    InvalidIntrinsics { reason: String },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    /// Component-wise product.
    pub fn scale(self, s: Vec3) -> Vec3 {
        Vec3::new(self.x * s.x, self.y * s.y, self.z * s.z)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn point(self) -> HomogeneousPoint {
        HomogeneousPoint::point(self.x, self.y, self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A point (`w = 1`) or direction (`w = 0`) in homogeneous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl HomogeneousPoint {
    pub const fn point(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, w: 1.0 }
    }

    pub const fn direction(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, w: 0.0 }
    }

    pub fn xyz(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// Pixel position after the perspective divide. `u` grows rightward and `v`
/// downward; values outside the image are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// A proper rotation, stored row-major as `r1..r9`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct RotationMatrix([[f64; 3]; 3]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Validates `RᵀR = I` and `det R = +1` within [`ROTATION_TOLERANCE`].
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::from_rows_with_tolerance(rows, ROTATION_TOLERANCE)
    }

    pub fn from_rows_with_tolerance(
        rows: [[f64; 3]; 3],
        tolerance: f64,
    ) -> Result<Self, GeometryError> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { what: "rotation" });
        }
        let r = RotationMatrix(rows);
        let det = r.determinant();
        if (det - 1.0).abs() > tolerance {
            return Err(GeometryError::InvalidRotation {
                reason: format!("det(R) = {det}"),
            });
        }
        let drift = r.orthonormality_error();
        if drift > tolerance {
            return Err(GeometryError::InvalidRotation {
                reason: format!("max |RᵀR - I| = {drift:e}"),
            });
        }
        Ok(r)
    }

    /// Accepts any matrix with positive determinant that is orthonormal
    /// within `tolerance`, then snaps it back onto SO(3) by Gram–Schmidt.
    pub fn orthonormalized(rows: [[f64; 3]; 3], tolerance: f64) -> Result<Self, GeometryError> {
        let raw = Self::from_rows_with_tolerance(rows, tolerance)?;
        Ok(raw.reorthonormalize_if_drifted())
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.0
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from(self.0[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn transpose(&self) -> RotationMatrix {
        let m = &self.0;
        RotationMatrix([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.0)
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// Matrix product `self · other`, without re-orthonormalization.
    pub fn mul_raw(&self, other: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(mat3_mul(&self.0, &other.0))
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let p = mat3_mul(&self.transpose().0, &self.0);
        let mut err = 0.0f64;
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((v - target).abs());
            }
        }
        err
    }

    pub fn reorthonormalize_if_drifted(self) -> RotationMatrix {
        if self.orthonormality_error() > ORTHONORMAL_DRIFT {
            self.gram_schmidt()
        } else {
            self
        }
    }

    /// Gram–Schmidt over the rows; the third row is rebuilt as `r0 × r1` so the
    /// result is right-handed.
    pub fn gram_schmidt(&self) -> RotationMatrix {
        let r0 = self.row(0).normalized();
        let r1 = self.row(1);
        let r1 = (r1 - r0 * r0.dot(r1)).normalized();
        let r2 = r0.cross(r1);
        RotationMatrix([r0.to_array(), r1.to_array(), r2.to_array()])
    }

    pub fn rot_x(angle: f64) -> RotationMatrix {
        let (s, c) = angle.sin_cos();
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(angle: f64) -> RotationMatrix {
        let (s, c) = angle.sin_cos();
        RotationMatrix([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(angle: f64) -> RotationMatrix {
        let (s, c) = angle.sin_cos();
        RotationMatrix([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }
}

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TryFrom<[[f64; 3]; 3]> for RotationMatrix {
    type Error = GeometryError;
    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        RotationMatrix::from_rows(rows)
    }
}

impl From<RotationMatrix> for [[f64; 3]; 3] {
    fn from(r: RotationMatrix) -> Self {
        r.0
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn mat3_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

/// Rodrigues' formula. `axis` need not be unit length.
pub fn rotation_from_axis_angle(axis: Vec3, angle: f64) -> Result<RotationMatrix, GeometryError> {
    let norm = axis.norm();
    if !(norm >= 1e-12) {
        return Err(GeometryError::DegenerateAxis { norm });
    }
    if !angle.is_finite() {
        return Err(GeometryError::NonFinite { what: "angle" });
    }
    let k = axis * (1.0 / norm);
    let (s, c) = angle.sin_cos();
    let v = 1.0 - c;
    let rows = [
        [
            c + k.x * k.x * v,
            k.x * k.y * v - k.z * s,
            k.x * k.z * v + k.y * s,
        ],
        [
            k.y * k.x * v + k.z * s,
            c + k.y * k.y * v,
            k.y * k.z * v - k.x * s,
        ],
        [
            k.z * k.x * v - k.y * s,
            k.z * k.y * v + k.x * s,
            c + k.z * k.z * v,
        ],
    ];
    Ok(RotationMatrix(rows).reorthonormalize_if_drifted())
}

/// `M = [R | t]`, the rigid map from model/world coordinates to the camera.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: RotationMatrix::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(RotationMatrix::IDENTITY, t)
    }

    /// Reads a row-major 4×4. The bottom row must be `[0 0 0 1]`.
    pub fn from_matrix(m: [[f64; 4]; 4]) -> Result<Self, GeometryError> {
        Self::from_matrix_with_tolerance(m, ROTATION_TOLERANCE)
    }

    pub fn from_matrix_with_tolerance(m: [[f64; 4]; 4], tolerance: f64) -> Result<Self, GeometryError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { what: "transform" });
        }
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(GeometryError::InvalidRotation {
                reason: format!("bottom row is {:?}, expected [0, 0, 0, 1]", m[3]),
            });
        }
        let rows = [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ];
        let rotation = RotationMatrix::from_rows_with_tolerance(rows, tolerance)?;
        Ok(Self::new(rotation, Vec3::new(m[0][3], m[1][3], m[2][3])))
    }

    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.rows();
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn to_mat4(&self) -> Mat4 {
        Mat4(self.to_matrix())
    }

    /// Row-major 16 values.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix();
        let mut out = [0.0; 16];
        for (i, row) in m.iter().enumerate() {
            out[i * 4..i * 4 + 4].copy_from_slice(row);
        }
        out
    }

    pub fn from_row_major(v: &[f64; 16]) -> Result<Self, GeometryError> {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row.copy_from_slice(&v[i * 4..i * 4 + 4]);
        }
        Self::from_matrix(m)
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    pub fn apply_direction(&self, d: Vec3) -> Vec3 {
        self.rotation.apply(d)
    }

    /// Largest absolute entry-wise difference of the 4×4 forms.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        self.to_row_major()
            .iter()
            .zip(other.to_row_major().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `a ∘ b`: the transform that applies `b` first, then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    let rotation = a.rotation.mul_raw(&b.rotation).reorthonormalize_if_drifted();
    let translation = a.rotation.apply(b.translation) + a.translation;
    RigidTransform::new(rotation, translation)
}

/// `[Rᵀ | −Rᵀt]`.
pub fn invert(m: &RigidTransform) -> RigidTransform {
    let rt = m.rotation.transpose();
    RigidTransform::new(rt, -rt.apply(m.translation))
}

/// `P_c = M · P_w`. Points keep `w = 1`, directions keep `w = 0`.
pub fn world_to_camera(m: &RigidTransform, p: HomogeneousPoint) -> HomogeneousPoint {
    let r = m.rotation.apply(p.xyz());
    let t = m.translation;
    HomogeneousPoint {
        x: r.x + t.x * p.w,
        y: r.y + t.y * p.w,
        z: r.z + t.z * p.w,
        w: p.w,
    }
}

/// Intrinsic parameters of a pinhole camera plus the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |reason: String| Err(GeometryError::InvalidIntrinsics { reason });
        if ![self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite { what: "intrinsics" });
        }
        if self.width == 0 || self.height == 0 || u64::from(self.width) * u64::from(self.height) > MAX_IMAGE_PIXELS {
            return bad(format!("image size {}x{}", self.width, self.height));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return bad(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        if !(0.0..f64::from(self.width)).contains(&self.cx) || !(0.0..f64::from(self.height)).contains(&self.cy) {
            return bad(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            ));
        }
        Ok(())
    }

    /// The homogeneous 4×4 `K` with rows `[fx 0 cx 0]`, `[0 fy cy 0]`,
    /// `[0 0 1 0]`, `[0 0 0 1]`.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        [
            [self.fx, 0.0, self.cx, 0.0],
            [0.0, self.fy, self.cy, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    /// Unit-depth ray direction through a pixel position.
    pub fn back_project(&self, px: PixelCoord) -> Vec3 {
        Vec3::new((px.u - self.cx) / self.fx, (px.v - self.cy) / self.fy, 1.0)
    }
}

/// Perspective projection of a camera-frame point.
pub fn project(k: &CameraIntrinsics, p_c: HomogeneousPoint) -> Result<PixelCoord, GeometryError> {
    project_xyz(k, p_c.xyz())
}

pub(crate) fn project_xyz(k: &CameraIntrinsics, p: Vec3) -> Result<PixelCoord, GeometryError> {
    if !(p.z > 0.0) {
        return Err(GeometryError::BehindCamera { z: p.z });
    }
    Ok(PixelCoord::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// `project(k, world_to_camera(m, p_w))`.
pub fn project_world(
    k: &CameraIntrinsics,
    m: &RigidTransform,
    p_w: HomogeneousPoint,
) -> Result<PixelCoord, GeometryError> {
    project(k, world_to_camera(m, p_w))
}

/// Arcball-style rotation about `pivot` (a model-frame point, usually the
/// mesh centroid). A drag of `d` pixels turns the object by `2π·d/width`
/// about the in-image axis perpendicular to the drag; a purely horizontal
/// drag rotates about camera-up.
pub fn trackball_rotate(
    current: &RigidTransform,
    drag_start: PixelCoord,
    drag_end: PixelCoord,
    pivot: Vec3,
    k: &CameraIntrinsics,
) -> Result<RigidTransform, GeometryError> {
    let du = drag_end.u - drag_start.u;
    let dv = drag_end.v - drag_start.v;
    if du == 0.0 && dv == 0.0 {
        return Ok(*current);
    }
    let pivot_cam = current.apply_point(pivot);
    if !(pivot_cam.z > 0.0) {
        return Err(GeometryError::BehindCamera { z: pivot_cam.z });
    }
    let drag = Vec3::new(du, dv, 0.0);
    let axis = drag.cross(Vec3::Z);
    let angle = std::f64::consts::TAU * drag.norm() / f64::from(k.width);
    let spin = rotation_from_axis_angle(axis, angle)?;
    let rotation = spin.mul_raw(&current.rotation).reorthonormalize_if_drifted();
    let translation = spin.apply(current.translation - pivot_cam) + pivot_cam;
    Ok(RigidTransform::new(rotation, translation))
}

/// Moves the object parallel to the image plane so that the projection of
/// the model origin follows the drag.
pub fn translate_in_view(
    current: &RigidTransform,
    drag_start: PixelCoord,
    drag_end: PixelCoord,
    k: &CameraIntrinsics,
) -> Result<RigidTransform, GeometryError> {
    translate_in_view_about(current, drag_start, drag_end, Vec3::ZERO, k)
}

/// Like [`translate_in_view`], anchored on an arbitrary model-frame point.
pub fn translate_in_view_about(
    current: &RigidTransform,
    drag_start: PixelCoord,
    drag_end: PixelCoord,
    anchor: Vec3,
    k: &CameraIntrinsics,
) -> Result<RigidTransform, GeometryError> {
    let du = drag_end.u - drag_start.u;
    let dv = drag_end.v - drag_start.v;
    if du == 0.0 && dv == 0.0 {
        return Ok(*current);
    }
    let z = current.apply_point(anchor).z;
    if !(z > 0.0) {
        return Err(GeometryError::BehindCamera { z });
    }
    let shift = Vec3::new(du * z / k.fx, dv * z / k.fy, 0.0);
    Ok(RigidTransform::new(current.rotation, current.translation + shift))
}

/// Scroll-to-depth: scales the anchor's camera-frame position by
/// `exp(notches · DEPTH_GAIN_PER_NOTCH)`, which leaves its projection fixed.
pub fn scale_depth(
    current: &RigidTransform,
    notches: f64,
    anchor: Vec3,
) -> Result<RigidTransform, GeometryError> {
    if notches == 0.0 {
        return Ok(*current);
    }
    let p = current.apply_point(anchor);
    if !(p.z > 0.0) {
        return Err(GeometryError::BehindCamera { z: p.z });
    }
    let factor = (notches * DEPTH_GAIN_PER_NOTCH).exp();
    if !factor.is_finite() {
        return Err(GeometryError::NonFinite { what: "depth factor" });
    }
    Ok(RigidTransform::new(current.rotation, current.translation + p * (factor - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// General row-major 4×4, used where reflections or scales leave SE(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [[f64; 4]; 4]);

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]);

    pub fn diagonal(d: Vec3) -> Mat4 {
        let mut m = Mat4::IDENTITY;
        m.0[0][0] = d.x;
        m.0[1][1] = d.y;
        m.0[2][2] = d.z;
        m
    }

    pub fn translation(t: Vec3) -> Mat4 {
        let mut m = Mat4::IDENTITY;
        m.0[0][3] = t.x;
        m.0[1][3] = t.y;
        m.0[2][3] = t.z;
        m
    }

    /// Reflection across the plane through `center` whose normal is `axis`.
    pub fn reflection(axis: Axis, center: Vec3) -> Mat4 {
        let d = match axis {
            Axis::X => Vec3::new(-1.0, 1.0, 1.0),
            Axis::Y => Vec3::new(1.0, -1.0, 1.0),
            Axis::Z => Vec3::new(1.0, 1.0, -1.0),
        };
        // T(c) · S · T(−c) folds to S with translation c − S·c.
        let mut m = Mat4::diagonal(d);
        let shift = center - center.scale(d);
        m.0[0][3] = shift.x;
        m.0[1][3] = shift.y;
        m.0[2][3] = shift.z;
        m
    }

    pub fn mul(&self, o: &Mat4) -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat4(out)
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    pub fn max_abs_diff(&self, o: &Mat4) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(o.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<RigidTransform> for Mat4 {
    fn from(m: RigidTransform) -> Self {
        m.to_mat4()
    }
}

/// `m · reflect(axis, mesh_center)`: mirrors model geometry before posing it.
pub fn mirror_transform(m: &RigidTransform, axis: Axis, mesh_center: Vec3) -> Mat4 {
    mirror_matrix(&m.to_mat4(), axis, mesh_center)
}

/// Same as [`mirror_transform`] for an already-mirrored (non-rigid) matrix, so
/// mirroring can be applied repeatedly.
pub fn mirror_matrix(m: &Mat4, axis: Axis, mesh_center: Vec3) -> Mat4 {
    m.mul(&Mat4::reflection(axis, mesh_center))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn k640() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn sample_pose() -> RigidTransform {
        let r = rotation_from_axis_angle(Vec3::new(0.3, -0.5, 0.8), 1.1).unwrap();
        RigidTransform::new(r, Vec3::new(12.0, -7.5, 480.0))
    }

    #[test]
    fn compose_identity() {
        let i = RigidTransform::IDENTITY;
        assert_eq!(compose(&i, &i), i);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let m = sample_pose();
        assert!(compose(&m, &invert(&m)).max_abs_diff(&RigidTransform::IDENTITY) < 1e-9);
        assert!(compose(&invert(&m), &m).max_abs_diff(&RigidTransform::IDENTITY) < 1e-9);
    }

    #[test]
    fn quarter_turns_compose_to_half_turn() {
        let q = RigidTransform::new(RotationMatrix::rot_z(FRAC_PI_2), Vec3::ZERO);
        let half = compose(&q, &q);
        let expected = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        for (a, b) in half.rotation.rows().iter().flatten().zip(expected.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn invert_pure_translation() {
        let m = RigidTransform::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let inv = invert(&m);
        assert_eq!(inv.rotation, RotationMatrix::IDENTITY);
        assert_eq!(inv.translation, Vec3::new(-1.0, -2.0, -3.0));
        assert_eq!(invert(&RigidTransform::IDENTITY), RigidTransform::IDENTITY);
    }

    #[test]
    fn double_inverse() {
        let m = sample_pose();
        assert!(invert(&invert(&m)).max_abs_diff(&m) < 1e-9);
    }

    #[test]
    fn world_to_camera_examples() {
        let p = HomogeneousPoint::point(1.0, 2.0, 3.0);
        assert_eq!(world_to_camera(&RigidTransform::IDENTITY, p), p);
        let m = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 10.0));
        let q = world_to_camera(&m, HomogeneousPoint::point(0.0, 0.0, 0.0));
        assert_eq!(q, HomogeneousPoint::point(0.0, 0.0, 10.0));
    }

    #[test]
    fn project_examples() {
        let k = k640();
        let c = project(&k, HomogeneousPoint::point(0.0, 0.0, 500.0)).unwrap();
        assert_eq!(c, PixelCoord::new(320.0, 240.0));
        let p = project(&k, HomogeneousPoint::point(50.0, 0.0, 500.0)).unwrap();
        assert_eq!(p, PixelCoord::new(420.0, 240.0));
        assert!(matches!(
            project(&k, HomogeneousPoint::point(0.0, 0.0, -1.0)),
            Err(GeometryError::BehindCamera { .. })
        ));
        assert!(matches!(
            project(&k, HomogeneousPoint::point(1.0, 1.0, 0.0)),
            Err(GeometryError::BehindCamera { .. })
        ));
    }

    #[test]
    fn project_world_identity_maps_axis_to_principal_point() {
        let k = k640();
        let px = project_world(&k, &RigidTransform::IDENTITY, HomogeneousPoint::point(0.0, 0.0, 500.0)).unwrap();
        assert_eq!(px, PixelCoord::new(k.cx, k.cy));
    }

    #[test]
    fn object_in_front_of_camera_lands_in_image() {
        // Object 40 mm right, 25 mm up, tilted, 600 mm away.
        let k = k640();
        let m = RigidTransform::new(
            rotation_from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.4).unwrap(),
            Vec3::new(40.0, -25.0, 600.0),
        );
        let px = project_world(&k, &m, HomogeneousPoint::point(10.0, 10.0, 10.0)).unwrap();
        assert!(px.u >= 0.0 && px.u < 640.0 && px.v >= 0.0 && px.v < 480.0, "{px:?}");
    }

    #[test]
    fn axis_angle_examples() {
        let r = rotation_from_axis_angle(Vec3::new(0.0, 0.6, 0.8), 0.0).unwrap();
        assert_eq!(r, RotationMatrix::IDENTITY);
        let half = rotation_from_axis_angle(Vec3::Z, PI).unwrap();
        let expected = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        for (a, b) in half.rows().iter().flatten().zip(expected.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            rotation_from_axis_angle(Vec3::new(1e-13, 0.0, 0.0), 1.0),
            Err(GeometryError::DegenerateAxis { .. })
        ));
    }

    #[test]
    fn axis_angle_trace() {
        for i in 0..50 {
            let angle = -3.0 + 0.12 * f64::from(i);
            let r = rotation_from_axis_angle(Vec3::new(0.2, 1.0, -0.4), angle).unwrap();
            assert!((r.trace() - (1.0 + 2.0 * angle.cos())).abs() < 1e-9);
            assert!((r.determinant() - 1.0).abs() < 1e-9);
            assert!(r.orthonormality_error() < 1e-9);
        }
    }

    #[test]
    fn rotation_validation_rejects_reflection() {
        let reflect = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            RotationMatrix::from_rows(reflect),
            Err(GeometryError::InvalidRotation { .. })
        ));
        let skewed = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(RotationMatrix::from_rows(skewed).is_err());
    }

    #[test]
    fn from_matrix_checks_bottom_row() {
        let mut m = RigidTransform::IDENTITY.to_matrix();
        m[3][0] = 0.5;
        assert!(RigidTransform::from_matrix(m).is_err());
    }

    #[test]
    fn gram_schmidt_repairs_drift() {
        let r = rotation_from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.9).unwrap();
        let mut rows = r.rows();
        rows[0][1] += 1e-7;
        rows[2][2] -= 1e-7;
        let fixed = RotationMatrix::orthonormalized(rows, 1e-6).unwrap();
        assert!(fixed.orthonormality_error() < 1e-14);
        assert!((fixed.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trackball_null_drag_is_exact() {
        let m = sample_pose();
        let p = PixelCoord::new(100.0, 100.0);
        assert_eq!(trackball_rotate(&m, p, p, Vec3::ZERO, &k640()).unwrap(), m);
    }

    #[test]
    fn trackball_horizontal_drag_angle_and_inverse() {
        let k = k640();
        let m = sample_pose();
        let pivot = Vec3::new(5.0, 5.0, 5.0);
        let a = PixelCoord::new(300.0, 200.0);
        let b = PixelCoord::new(364.0, 200.0);
        let r = trackball_rotate(&m, a, b, pivot, &k).unwrap();
        let delta = r.rotation.mul_raw(&m.rotation.transpose());
        let expected_angle = std::f64::consts::TAU * 64.0 / 640.0;
        let angle = ((delta.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        assert!((angle - expected_angle).abs() < 1e-9);
        // Axis is camera-up (−Y).
        let up = rotation_from_axis_angle(-Vec3::Y, expected_angle).unwrap();
        for (x, y) in delta.rows().iter().flatten().zip(up.rows().iter().flatten()) {
            assert!((x - y).abs() < 1e-9);
        }
        let back = trackball_rotate(&r, b, a, pivot, &k).unwrap();
        assert!(back.max_abs_diff(&m) < 1e-6);
        let before = m.apply_point(pivot);
        let after = r.apply_point(pivot);
        assert!((before - after).norm() < 1e-9);
    }

    #[test]
    fn trackball_pivot_behind_camera() {
        let m = RigidTransform::IDENTITY;
        let r = trackball_rotate(&m, PixelCoord::new(0.0, 0.0), PixelCoord::new(4.0, 0.0), Vec3::ZERO, &k640());
        assert!(matches!(r, Err(GeometryError::BehindCamera { .. })));
    }

    #[test]
    fn translate_ten_pixels_at_500mm() {
        let k = k640();
        let m = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 500.0));
        let moved = translate_in_view(&m, PixelCoord::new(10.0, 10.0), PixelCoord::new(20.0, 10.0), &k).unwrap();
        assert!((moved.translation.x - 5.0).abs() < 1e-12);
        assert_eq!(moved.translation.z, 500.0);
        let back = translate_in_view(&moved, PixelCoord::new(20.0, 10.0), PixelCoord::new(10.0, 10.0), &k).unwrap();
        assert!(back.max_abs_diff(&m) < 1e-6);
        let same = translate_in_view(&m, PixelCoord::new(3.0, 3.0), PixelCoord::new(3.0, 3.0), &k).unwrap();
        assert_eq!(same, m);
    }

    #[test]
    fn translate_moves_anchor_projection_by_drag() {
        let k = k640();
        let m = sample_pose();
        let anchor = Vec3::new(10.0, -20.0, 30.0);
        let before = project(&k, m.apply_point(anchor).point()).unwrap();
        let moved = translate_in_view_about(&m, PixelCoord::new(0.0, 0.0), PixelCoord::new(-33.0, 17.5), anchor, &k).unwrap();
        let after = project(&k, moved.apply_point(anchor).point()).unwrap();
        assert!((after.u - before.u + 33.0).abs() < 0.5);
        assert!((after.v - before.v - 17.5).abs() < 0.5);
        assert!((moved.apply_point(anchor).z - m.apply_point(anchor).z).abs() < 1e-9);
    }

    #[test]
    fn depth_scroll_keeps_projection() {
        let k = k640();
        let m = sample_pose();
        let anchor = Vec3::new(3.0, 4.0, 5.0);
        let before = project(&k, m.apply_point(anchor).point()).unwrap();
        let scrolled = scale_depth(&m, 3.0, anchor).unwrap();
        let after = project(&k, scrolled.apply_point(anchor).point()).unwrap();
        assert!((after.u - before.u).abs() < 0.5 && (after.v - before.v).abs() < 0.5);
        let ratio = scrolled.apply_point(anchor).z / m.apply_point(anchor).z;
        assert!((ratio - (3.0 * DEPTH_GAIN_PER_NOTCH).exp()).abs() < 1e-12);
    }

    #[test]
    fn mirror_is_an_involution() {
        let m = sample_pose();
        let c = Vec3::new(1.0, 2.0, 3.0);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let once = mirror_transform(&m, axis, c);
            let twice = mirror_matrix(&once, axis, c);
            assert!(twice.max_abs_diff(&m.to_mat4()) < 1e-9);
        }
    }

    #[test]
    fn mirror_x_about_origin() {
        let s = mirror_transform(&RigidTransform::IDENTITY, Axis::X, Vec3::ZERO);
        assert_eq!(s.transform_point(Vec3::X), Vec3::new(-1.0, 0.0, 0.0));
        let shifted = Mat4::reflection(Axis::X, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(shifted.transform_point(Vec3::X), Vec3::new(3.0, 0.0, 0.0));
    }
}
