//! Plain-text 4×4 pose matrices.
//!
//! The clipboard form is four lines of four space-separated values with eight
//! digits after the decimal point. Ground-truth files use the same layout with
//! shortest round-trip formatting so they reload bit-exactly.

use std::fmt::Write as _;

use super::DatasetError;
use crate::geometry::{GeometryError, RigidTransform, RotationMatrix, Vec3};

/// Orthonormality slack accepted on import before snapping back onto SO(3).
pub const IMPORT_ORTHONORMAL_TOLERANCE: f64 = 1e-6;

const EXPORT_DECIMALS: usize = 8;

pub fn export_pose(pose: &RigidTransform) -> String {
    let mut out = String::with_capacity(4 * 4 * 14);
    for row in pose.to_matrix() {
        let cells: Vec<String> = row.iter().map(|v| fixed(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

fn fixed(v: f64) -> String {
    let s = format!("{:.*}", EXPORT_DECIMALS, v + 0.0);
    // -0.00000000 reads back fine but looks odd on a clipboard.
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_owned()
    } else {
        s
    }
}

/// Full-precision variant of [`export_pose`].
pub fn write_pose_full(pose: &RigidTransform) -> String {
    let mut out = String::new();
    for row in pose.to_matrix() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

/// Parses pose text, re-orthonormalizing the rotation when it has drifted.
pub fn import_pose(text: &str) -> Result<RigidTransform, DatasetError> {
    parse_pose(text, "pose text")
}

/// Same as [`import_pose`] with a caller-provided context for messages.
pub fn parse_pose_full(text: &str, context: &str) -> Result<RigidTransform, DatasetError> {
    parse_pose(text, context)
}

fn parse_pose(text: &str, context: &str) -> Result<RigidTransform, DatasetError> {
    let err = |msg: String| DatasetError::parse(context, msg);
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if rows.len() != 4 {
        return Err(err(format!("expected 4 rows, found {}", rows.len())));
    }
    let mut m = [[0.0f64; 4]; 4];
    for (i, line) in rows.iter().enumerate() {
        let vals: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
        if vals.len() != 4 {
            return Err(err(format!("row {} has {} values, expected 4", i + 1, vals.len())));
        }
        for (j, t) in vals.iter().enumerate() {
            let v: f64 = t.parse().map_err(|_| err(format!("bad number {t:?}")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value {t:?}")));
            }
            m[i][j] = v;
        }
    }
    let bottom = m[3];
    let expected = [0.0, 0.0, 0.0, 1.0];
    if bottom.iter().zip(expected).any(|(a, b)| (a - b).abs() > 1e-7) {
        return Err(err(format!("bottom row {bottom:?} is not [0 0 0 1]")));
    }
    let rows3 = [
        [m[0][0], m[0][1], m[0][2]],
        [m[1][0], m[1][1], m[1][2]],
        [m[2][0], m[2][1], m[2][2]],
    ];
    let rotation = RotationMatrix::orthonormalized(rows3, IMPORT_ORTHONORMAL_TOLERANCE).map_err(|e| match e {
        GeometryError::InvalidRotation { reason } => DatasetError::InvalidRotation(reason),
        other => err(other.to_string()),
    })?;
    Ok(RigidTransform::new(rotation, Vec3::new(m[0][3], m[1][3], m[2][3])))
}
