//! Pose-error metrics: geodesic rotation angle, translation distance, and
//! ADD (mean model-point displacement).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RigidTransform, RotationMatrix, Vec3};
use crate::scene::MeshAsset;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("mesh has no vertices")]
    EmptyMesh,
}

/// Rotation angle of `r1ᵀ·r2`, in radians.
///
/// Equivalent to `arccos((tr(r1ᵀr2) − 1) / 2)` but evaluated as
/// `atan2(‖skew‖, tr − 1)`: the arccos form loses half the significant
/// digits near 0° and 180°, where `(tr − 1)/2` rounds onto ±1.
pub fn angular_distance_rad(r1: &RotationMatrix, r2: &RotationMatrix) -> f64 {
    let a = r1.rows();
    let b = r2.rows();
    // q = r1ᵀ · r2
    let q = |i: usize, j: usize| a[0][i] * b[0][j] + a[1][i] * b[1][j] + a[2][i] * b[2][j];
    let cos2 = q(0, 0) + q(1, 1) + q(2, 2) - 1.0;
    let sx = q(2, 1) - q(1, 2);
    let sy = q(0, 2) - q(2, 0);
    let sz = q(1, 0) - q(0, 1);
    let sin2 = (sx * sx + sy * sy + sz * sz).sqrt();
    sin2.atan2(cos2)
}

/// Geodesic distance between two rotations in degrees, in `[0, 180]`.
pub fn angular_distance(r1: &RotationMatrix, r2: &RotationMatrix) -> f64 {
    angular_distance_rad(r1, r2).to_degrees().min(180.0)
}

pub fn euclidean_distance(t1: Vec3, t2: Vec3) -> f64 {
    (t1 - t2).norm()
}

/// `(1/N) Σ ‖(R₁vᵢ + t₁) − (R₂vᵢ + t₂)‖` over every mesh vertex.
pub fn add_metric(mesh: &MeshAsset, p1: &RigidTransform, p2: &RigidTransform) -> Result<f64, MetricsError> {
    add_points(mesh.vertices(), p1, p2)
}

pub fn add_points(points: &[Vec3], p1: &RigidTransform, p2: &RigidTransform) -> Result<f64, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    let sum: f64 = points
        .iter()
        .map(|v| (p1.apply_point(*v) - p2.apply_point(*v)).norm())
        .sum();
    Ok(sum / points.len() as f64)
}

/// ADD over a uniform stride of at most `max_points` vertices.
pub fn add_metric_subsampled(
    mesh: &MeshAsset,
    p1: &RigidTransform,
    p2: &RigidTransform,
    max_points: usize,
) -> Result<f64, MetricsError> {
    let n = mesh.vertices().len();
    if max_points == 0 || n <= max_points {
        return add_metric(mesh, p1, p2);
    }
    let stride = n.div_ceil(max_points);
    let pts: Vec<Vec3> = mesh.vertices().iter().step_by(stride).copied().collect();
    add_points(&pts, p1, p2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseErrors {
    /// Degrees.
    pub angular: f64,
    /// Millimeters.
    pub euclidean: f64,
    /// Millimeters.
    pub add: f64,
}

pub fn pose_errors(mesh: &MeshAsset, annotated: &RigidTransform, gt: &RigidTransform) -> Result<PoseErrors, MetricsError> {
    Ok(PoseErrors {
        angular: angular_distance(&annotated.rotation, &gt.rotation),
        euclidean: euclidean_distance(annotated.translation, gt.translation),
        add: add_metric(mesh, annotated, gt)?,
    })
}
