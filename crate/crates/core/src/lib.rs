//! Interactive 6D pose annotation: pinhole projection of posed meshes over
//! an image, headless overlay rendering, annotation sessions, and the
//! pose-error metrics and study aggregation used to evaluate annotations.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod imaging;
pub mod io;
pub mod render;
pub mod scene;
pub mod metrics;
pub mod study;
pub mod service;
