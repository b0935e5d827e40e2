//! Per-joint decomposed motion prior for video pose estimation.

pub mod camera;
pub mod error;
pub mod gradcore;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod rot3;
pub mod skeleton;
pub mod synthmotion;

pub use error::{Error, Result};
