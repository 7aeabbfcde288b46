#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use poseforge::geometry::{CameraIntrinsics, RigidTransform, RotationMatrix, Vec3};
use poseforge::scene::MeshAsset;
use rand::Rng;

/// Uniform random rotation from a uniform unit quaternion (Shoemake).
pub fn random_rotation<R: Rng>(rng: &mut R) -> RotationMatrix {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (a * (TAU * u2).sin(), a * (TAU * u2).cos(), b * (TAU * u3).sin(), b * (TAU * u3).cos());
    quaternion_rotation(w, x, y, z)
}

pub fn quaternion_rotation(w: f64, x: f64, y: f64, z: f64) -> RotationMatrix {
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    let rows = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    RotationMatrix::orthonormalized(rows, 1e-9).expect("quaternion gives a rotation")
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

pub fn random_pose<R: Rng>(rng: &mut R, z_range: std::ops::Range<f64>) -> RigidTransform {
    RigidTransform::new(
        random_rotation(rng),
        Vec3::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), rng.gen_range(z_range)),
    )
}

pub fn random_intrinsics<R: Rng>(rng: &mut R) -> CameraIntrinsics {
    let w = rng.gen_range(64..1280);
    let h = rng.gen_range(48..960);
    CameraIntrinsics::new(
        rng.gen_range(200.0..2000.0),
        rng.gen_range(200.0..2000.0),
        rng.gen_range(0.0..f64::from(w)),
        rng.gen_range(0.0..f64::from(h)),
        w,
        h,
    )
    .unwrap()
}

pub fn na_rotation(r: &RotationMatrix) -> Matrix3<f64> {
    let m = r.rows();
    Matrix3::from_fn(|i, j| m[i][j])
}

pub fn na_pose(p: &RigidTransform) -> Matrix4<f64> {
    let m = p.to_matrix();
    Matrix4::from_fn(|i, j| m[i][j])
}

/// Pixel of a world point through the dense `K·[R|t]` product.
pub fn dense_projection(k: &CameraIntrinsics, m: &RigidTransform, p: Vec3) -> (f64, f64) {
    let kk = nalgebra::Matrix3x4::new(k.fx, 0.0, k.cx, 0.0, 0.0, k.fy, k.cy, 0.0, 0.0, 0.0, 1.0, 0.0);
    let h = kk * na_pose(m) * Vector4::new(p.x, p.y, p.z, 1.0);
    (h.x / h.z, h.y / h.z)
}

/// Rotation angle of `r1ᵀ·r2` in degrees via nalgebra's axis-angle.
pub fn oracle_angle_deg(r1: &RotationMatrix, r2: &RotationMatrix) -> f64 {
    let q = na_rotation(r1).transpose() * na_rotation(r2);
    let rot = nalgebra::Rotation3::from_matrix_unchecked(q);
    rot.angle().to_degrees()
}

pub fn oracle_add(vertices: &[Vec3], a: &RigidTransform, b: &RigidTransform) -> f64 {
    let (ma, mb) = (na_pose(a), na_pose(b));
    let sum: f64 = vertices
        .iter()
        .map(|v| {
            let h = Vector4::new(v.x, v.y, v.z, 1.0);
            ((ma * h) - (mb * h)).xyz().norm()
        })
        .sum();
    sum / vertices.len() as f64
}

pub fn oracle_mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Sorts ascending (stable) and keeps the first ⌈0.9·n⌉.
pub fn oracle_trim(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let keep = (v.len() as f64 * 0.9).ceil() as usize;
    s.truncate(keep);
    s
}

pub fn cube(id: &str, half: f64) -> MeshAsset {
    let h = half;
    let v: Vec<Vec3> = (0..8)
        .map(|i| Vec3::new(if i & 1 == 0 { -h } else { h }, if i & 2 == 0 { -h } else { h }, if i & 4 == 0 { -h } else { h }))
        .collect();
    let t = vec![
        [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5], [0, 4, 5], [0, 5, 1],
        [2, 3, 7], [2, 7, 6], [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
    ];
    MeshAsset::new(id, id, v, t).unwrap()
}

pub fn tetrahedron(id: &str) -> MeshAsset {
    MeshAsset::new(
        id,
        id,
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(60.0, 0.0, 0.0), Vec3::new(0.0, 45.0, 0.0), Vec3::new(5.0, 5.0, 80.0)],
        vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
    )
    .unwrap()
}

/// UV sphere with `rings` latitude bands and `segments` longitude slices.
pub fn uv_sphere(id: &str, radius: f64, rings: u32, segments: u32) -> MeshAsset {
    let mut v = vec![Vec3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let th = PI * f64::from(r) / f64::from(rings);
        for s in 0..segments {
            let ph = TAU * f64::from(s) / f64::from(segments);
            v.push(Vec3::new(radius * th.sin() * ph.cos(), radius * th.sin() * ph.sin(), radius * th.cos()));
        }
    }
    v.push(Vec3::new(0.0, 0.0, -radius));
    let bottom = v.len() as u32 - 1;
    let idx = |r: u32, s: u32| 1 + (r - 1) * segments + s % segments;
    let mut t = Vec::new();
    for s in 0..segments {
        t.push([0, idx(1, s), idx(1, s + 1)]);
        t.push([bottom, idx(rings - 1, s + 1), idx(rings - 1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            t.push([idx(r, s), idx(r + 1, s), idx(r + 1, s + 1)]);
            t.push([idx(r, s), idx(r + 1, s + 1), idx(r, s + 1)]);
        }
    }
    MeshAsset::new(id, id, v, t).unwrap()
}

/// Depth `t` along `dir` (with `dir.z = 1`, the camera z) where the ray
/// from the origin meets the triangle, edges included.
pub fn ray_hit(dir: Vector3<f64>, a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> Option<f64> {
    // Solve a + u(b−a) + v(c−a) = t·dir.
    let m = Matrix3::from_columns(&[b - a, c - a, -dir]);
    let x = m.try_inverse()? * (-a);
    let (u, v, t) = (x.x, x.y, x.z);
    (u >= 0.0 && v >= 0.0 && u + v <= 1.0).then_some(t)
}
