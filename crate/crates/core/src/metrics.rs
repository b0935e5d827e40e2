//! Accuracy and smoothness metrics on 3D joint trajectories (millimeters):
//! MPJPE, PA-MPJPE (per-frame similarity Procrustes), acceleration and
//! acceleration error.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue floor under which a frame's scatter is treated as
/// rank-deficient (collinear).
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    /// `positions[t][j]`, millimeters.
    pub positions: Vec<Vec<Vector3<f64>>>,
    pub frame_rate: f64,
}

impl JointTrajectory {
    pub fn new(positions: Vec<Vec<Vector3<f64>>>, frame_rate: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::ShapeMismatch("trajectory needs at least one frame".into()));
        }
        let j = positions[0].len();
        if positions.iter().any(|f| f.len() != j) {
            return Err(Error::ShapeMismatch("ragged joint count across frames".into()));
        }
        if positions.iter().flatten().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::ShapeMismatch("trajectory has non-finite entries".into()));
        }
        Ok(Self { positions, frame_rate })
    }

    /// Converts meter-valued keypoints to a millimeter trajectory.
    pub fn from_meters<F: AsRef<[Vector3<f64>]>>(frames: &[F], frame_rate: f64) -> Result<Self> {
        Self::new(frames.iter().map(|f| f.as_ref().iter().map(|p| p * 1000.0).collect()).collect(), frame_rate)
    }

    pub fn num_frames(&self) -> usize {
        self.positions.len()
    }

    pub fn num_joints(&self) -> usize {
        self.positions[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mpjpe: f64,
    pub pa_mpjpe: f64,
    pub acc: f64,
    pub acc_err: f64,
}

fn check_same_shape(a: &JointTrajectory, b: &JointTrajectory) -> Result<()> {
    if a.num_frames() != b.num_frames() || a.num_joints() != b.num_joints() {
        return Err(Error::ShapeMismatch(format!(
            "trajectories differ: {}x{} vs {}x{}",
            a.num_frames(),
            a.num_joints(),
            b.num_frames(),
            b.num_joints()
        )));
    }
    Ok(())
}

pub fn mpjpe(pred: &JointTrajectory, gt: &JointTrajectory) -> Result<f64> {
    check_same_shape(pred, gt)?;
    let mut sum = 0.0;
    for (fp, fg) in pred.positions.iter().zip(&gt.positions) {
        for (p, g) in fp.iter().zip(fg) {
            sum += (p - g).norm();
        }
    }
    Ok(sum / (pred.num_frames() * pred.num_joints()) as f64)
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / points.len() as f64
}

fn is_collinear(centered: &[Vector3<f64>]) -> bool {
    let scatter = centered.iter().fold(Matrix3::zeros(), |acc, p| acc + p * p.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(scatter).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    !(ev[0] > 0.0) || ev[1] <= COLLINEAR_TOL * ev[0]
}

/// Similarity transform `(scale, rotation, translation)` minimizing
/// `Σ‖scale·R·x + t − y‖²` (Umeyama).
pub fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Option<(f64, Matrix3<f64>, Vector3<f64>)> {
    if src.len() != dst.len() || src.len() < 3 {
        return None;
    }
    let mu_s = centroid(src);
    let mu_d = centroid(dst);
    let sc: Vec<_> = src.iter().map(|p| p - mu_s).collect();
    let dc: Vec<_> = dst.iter().map(|p| p - mu_d).collect();
    if is_collinear(&sc) || is_collinear(&dc) {
        return None;
    }
    let n = src.len() as f64;
    let var_s = sc.iter().map(|p| p.norm_squared()).sum::<f64>() / n;
    let cov = sc.iter().zip(&dc).fold(Matrix3::zeros(), |acc, (s, d)| acc + d * s.transpose()) / n;
    let svd = cov.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut signs = Vector3::new(1.0, 1.0, 1.0);
    if (u.determinant() * v_t.determinant()) < 0.0 {
        signs.z = -1.0;
    }
    let rot = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = svd.singular_values.component_mul(&signs).sum() / var_s;
    let t = mu_d - rot * mu_s * scale;
    Some((scale, rot, t))
}

/// Per-frame similarity alignment of `pred` onto `gt`.
pub fn procrustes_align(pred: &JointTrajectory, gt: &JointTrajectory) -> Result<JointTrajectory> {
    check_same_shape(pred, gt)?;
    let mut out = Vec::with_capacity(pred.num_frames());
    for (t, (fp, fg)) in pred.positions.iter().zip(&gt.positions).enumerate() {
        let (s, r, tr) = umeyama(fp, fg).ok_or(Error::DegenerateFrame(t))?;
        out.push(fp.iter().map(|p| r * p * s + tr).collect());
    }
    Ok(JointTrajectory { positions: out, frame_rate: pred.frame_rate })
}

pub fn pa_mpjpe(pred: &JointTrajectory, gt: &JointTrajectory) -> Result<f64> {
    mpjpe(&procrustes_align(pred, gt)?, gt)
}

fn second_difference(traj: &JointTrajectory, t: usize, j: usize) -> Vector3<f64> {
    let x = &traj.positions;
    x[t + 1][j] - x[t][j] * 2.0 + x[t - 1][j]
}

fn check_len(traj: &JointTrajectory) -> Result<()> {
    if traj.num_frames() < 3 {
        return Err(Error::TooShort { need: 3, got: traj.num_frames() });
    }
    Ok(())
}

/// Mean second-difference magnitude, mm/frame².
pub fn acceleration(traj: &JointTrajectory) -> Result<f64> {
    check_len(traj)?;
    let (nt, nj) = (traj.num_frames(), traj.num_joints());
    let mut sum = 0.0;
    for t in 1..nt - 1 {
        for j in 0..nj {
            sum += second_difference(traj, t, j).norm();
        }
    }
    Ok(sum / ((nt - 2) * nj) as f64)
}

/// Mean magnitude of the difference between second differences, mm/frame².
pub fn acceleration_error(pred: &JointTrajectory, gt: &JointTrajectory) -> Result<f64> {
    check_same_shape(pred, gt)?;
    check_len(pred)?;
    let (nt, nj) = (pred.num_frames(), pred.num_joints());
    let mut sum = 0.0;
    for t in 1..nt - 1 {
        for j in 0..nj {
            sum += (second_difference(pred, t, j) - second_difference(gt, t, j)).norm();
        }
    }
    Ok(sum / ((nt - 2) * nj) as f64)
}

pub fn report(pred: &JointTrajectory, gt: &JointTrajectory) -> Result<MetricReport> {
    Ok(MetricReport {
        mpjpe: mpjpe(pred, gt)?,
        pa_mpjpe: pa_mpjpe(pred, gt)?,
        acc: acceleration(pred)?,
        acc_err: acceleration_error(pred, gt)?,
    })
}
