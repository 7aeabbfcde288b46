//! Annotation sessions and the local socket service that hosts them.
//!
//! A [`Session`] owns one live scene and is the only writer to it; every
//! accepted command produces the next revision. Readers render immutable
//! snapshots addressed by revision.

mod protocol;
mod server;
mod session;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::io::DatasetError;
use crate::render::RenderError;
use crate::scene::{ObjectId, SceneError};

pub use protocol::{read_message, write_message, Client, Envelope, MessageKind, MAX_MESSAGE_BYTES};
pub use server::{default_port, Server, ServerConfig, ServerHandle, DEFAULT_PORT, PORT_ENV};
pub use session::{
    load_scene, render_snapshot, start_session, AnnotationRecordView, Clock, Command, HistoryEntry, ManualClock,
    ObjectPose, Session, SessionConfig, StateDelta, SystemClock, TaggedFrame, SNAPSHOT_DEPTH,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("dataset layout: {0}")]
    Layout(String),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("pivot is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("every trial in the plan has been confirmed")]
    SessionComplete,
    #[error("revision {requested} is no longer retained (current {current})")]
    RevisionUnavailable { requested: u64, current: u64 },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("remote error {code}: {message}")]
    Remote { code: String, message: String },
    #[error(transparent)]
    Geometry(GeometryError),
    #[error(transparent)]
    Scene(SceneError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    /// Stable machine-readable code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Layout(_) => "layout",
            ServiceError::UnknownObject(_) => "unknown_object",
            ServiceError::InvalidCommand(_) => "invalid_command",
            ServiceError::BehindCamera { .. } => "behind_camera",
            ServiceError::SessionComplete => "session_complete",
            ServiceError::RevisionUnavailable { .. } => "revision_unavailable",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::Protocol(_) => "protocol",
            ServiceError::Remote { .. } => "remote",
            ServiceError::Geometry(_) => "geometry",
            ServiceError::Scene(_) => "scene",
            ServiceError::Dataset(_) => "dataset",
            ServiceError::Render(_) => "render",
            ServiceError::Io(_) => "io",
        }
    }
}

impl From<GeometryError> for ServiceError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::BehindCamera { z } => ServiceError::BehindCamera { z },
            other => ServiceError::Geometry(other),
        }
    }
}

impl From<SceneError> for ServiceError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::UnknownObject(id) => ServiceError::UnknownObject(id),
            SceneError::Geometry(g) => g.into(),
            other => ServiceError::Scene(other),
        }
    }
}
