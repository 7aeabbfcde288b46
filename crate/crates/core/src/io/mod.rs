//! Files on disk: meshes, dataset samples, pose text and workspaces.

mod dataset;
mod mesh;
mod pose;
mod workspace;

use thiserror::Error;

use crate::imaging::ImageError;
use crate::scene::SceneError;

pub use dataset::{list_samples, load_sample, parse_camera, write_sample, DatasetSample, SampleObject, SAMPLES_DIR};
pub use mesh::{load_mesh, parse_obj, parse_ply, write_ply};
pub use pose::{export_pose, import_pose, parse_pose_full, write_pose_full, IMPORT_ORTHONORMAL_TOLERANCE};
pub use workspace::{
    deserialize_workspace, load_workspace, save_workspace, serialize_workspace, WORKSPACE_VERSION,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{context}: {msg}")]
    Parse { context: String, msg: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("dataset layout: {0}")]
    Layout(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("workspace version {found} is not supported (expected {expected})")]
    VersionMismatch { found: i64, expected: i64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl DatasetError {
    pub(crate) fn parse(context: impl Into<String>, msg: impl Into<String>) -> Self {
        DatasetError::Parse { context: context.into(), msg: msg.into() }
    }
}
