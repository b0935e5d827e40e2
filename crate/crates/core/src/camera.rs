//! Weak-perspective camera and the pinhole projection used for 2D
//! supervision. The extrinsic rotation is always identity.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FOCAL: f64 = 5000.0;
pub const DEFAULT_RES: f64 = 224.0;

/// Points closer than this to the camera plane are rejected.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakCamera {
    pub s: f64,
    pub tx: f64,
    pub ty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal: f64,
    pub res: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { focal: DEFAULT_FOCAL, res: DEFAULT_RES }
    }
}

impl CameraIntrinsics {
    pub fn new(focal: f64, res: f64) -> Result<Self> {
        if !(focal > 0.0) || !(res > 0.0) {
            return Err(Error::Config(format!("intrinsics need focal > 0 and res > 0, got {focal}, {res}")));
        }
        Ok(Self { focal, res })
    }

    pub fn principal_point(&self) -> f64 {
        self.res / 2.0
    }

    /// Weak camera scale that places the root at depth `tz`.
    pub fn scale_for_depth(&self, tz: f64) -> f64 {
        2.0 * self.focal / (self.res * tz)
    }
}

/// Root translation `[t_x, t_y, 2f / (res·s)]`.
pub fn recover_translation(cam: &WeakCamera, intr: &CameraIntrinsics) -> Result<Vector3<f64>> {
    if !(cam.s > 0.0) {
        return Err(Error::NonPositiveScale(cam.s));
    }
    Ok(Vector3::new(cam.tx, cam.ty, 2.0 * intr.focal / (intr.res * cam.s)))
}

/// Pinhole projection of `points + trans` to pixel coordinates.
pub fn project(points: &[Vector3<f64>], intr: &CameraIntrinsics, trans: &Vector3<f64>) -> Result<Vec<Vector2<f64>>> {
    let c = intr.principal_point();
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let q = p + trans;
            if !(q.z > MIN_DEPTH) {
                return Err(Error::BehindCamera { index, z: q.z });
            }
            Ok(Vector2::new(intr.focal * q.x / q.z + c, intr.focal * q.y / q.z + c))
        })
        .collect()
}
