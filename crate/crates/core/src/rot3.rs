//! Rotation representations for a single joint: the continuous 6D form
//! (first two columns of a rotation matrix, unnormalized), rotation
//! matrices, and axis-angle vectors.
//!
//! All math is `f64`. The 6D to matrix map is Gram-Schmidt on the two
//! columns followed by a cross product; the matrix to axis-angle map is
//! the SO(3) logarithm with dedicated branches near 0 and near pi.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Degeneracy threshold for 6D inputs: minimum column norm and maximum
/// `|cos|` distance from parallel.
pub const EPS_DEGENERATE: f64 = 1e-8;

/// Switchover width for the small-angle and near-pi branches of the log map.
pub const LOG_BRANCH_DELTA: f64 = 1e-6;

const TAYLOR_EXP_THRESHOLD: f64 = 1e-8;

/// Two (unnormalized) columns of a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSixD {
    pub a0: Vector3<f64>,
    pub a1: Vector3<f64>,
}

impl RotationSixD {
    pub fn new(a0: Vector3<f64>, a1: Vector3<f64>) -> Self {
        Self { a0, a1 }
    }

    /// Builds from the flat layout `[a0.x, a0.y, a0.z, a1.x, a1.y, a1.z]`.
    pub fn from_slice(v: &[f64]) -> Self {
        assert_eq!(v.len(), 6, "6D rotation needs exactly 6 scalars");
        Self {
            a0: Vector3::new(v[0], v[1], v[2]),
            a1: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a0.x, self.a0.y, self.a0.z, self.a1.x, self.a1.y, self.a1.z]
    }

    pub fn identity() -> Self {
        Self::new(Vector3::x(), Vector3::y())
    }

    /// Checks the non-degeneracy invariant.
    pub fn validate(&self) -> Result<()> {
        let n0 = self.a0.norm();
        let n1 = self.a1.norm();
        if !(n0 >= EPS_DEGENERATE) {
            return Err(Error::DegenerateSixD(format!("first column norm {n0:e}")));
        }
        if !(n1 >= EPS_DEGENERATE) {
            return Err(Error::DegenerateSixD(format!("second column norm {n1:e}")));
        }
        let cos = self.a0.dot(&self.a1) / (n0 * n1);
        if !(cos.abs() <= 1.0 - EPS_DEGENERATE) {
            return Err(Error::DegenerateSixD(format!("columns nearly parallel (cos = {cos})")));
        }
        Ok(())
    }
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat(pub Matrix3<f64>);

impl RotMat {
    pub fn identity() -> Self {
        RotMat(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    /// Whether the matrix passes the orthonormality and determinant checks
    /// at the given tolerance.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.orthonormality_error() < tol && (self.det() - 1.0).abs() <= tol
    }

    /// Row-major flattening.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(v: &[f64]) -> Self {
        assert_eq!(v.len(), 9);
        RotMat(Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]))
    }

    pub fn mul(&self, other: &RotMat) -> RotMat {
        RotMat(self.0 * other.0)
    }
}

/// Axis-angle rotation vector; magnitude is the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle(pub Vector3<f64>);

impl AxisAngle {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        AxisAngle(Vector3::new(x, y, z))
    }

    pub fn zero() -> Self {
        AxisAngle(Vector3::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

/// Gram-Schmidt the two columns, complete with their cross product.
pub fn sixd_to_rotmat(x: &RotationSixD) -> Result<RotMat> {
    x.validate()?;
    let b0 = x.a0 / x.a0.norm();
    let u1 = x.a1 - b0.dot(&x.a1) * b0;
    let b1 = u1 / u1.norm();
    let b2 = b0.cross(&b1);
    Ok(RotMat(Matrix3::from_columns(&[b0, b1, b2])))
}

pub fn rotmat_to_sixd(r: &RotMat) -> RotationSixD {
    RotationSixD::new(r.0.column(0).into_owned(), r.0.column(1).into_owned())
}

/// Rotation angle from the trace, `arccos((tr(R) − 1) / 2)`, with the
/// argument clamped to `[-1, 1]`.
pub fn rotation_angle(r: &RotMat) -> f64 {
    let c = ((r.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos()
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `vee((R − Rᵀ) / 2)`, which equals `sin(θ)·k`.
fn skew_part(r: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (r[(2, 1)] - r[(1, 2)]),
        0.5 * (r[(0, 2)] - r[(2, 0)]),
        0.5 * (r[(1, 0)] - r[(0, 1)]),
    )
}

/// SO(3) logarithm.
///
/// The angle is computed with `atan2(‖skew‖, cos)` rather than the bare
/// arccos, which loses half the significant digits next to 0 and pi; the
/// two agree with [`rotation_angle`] to within that roundoff.
pub fn rotmat_to_axis_angle(r: &RotMat) -> AxisAngle {
    let m = &r.0;
    let s = skew_part(m);
    let sin = s.norm();
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = sin.atan2(cos);

    if theta < LOG_BRANCH_DELTA {
        // θ/sinθ ≈ 1 + θ²/6
        return AxisAngle(s * (1.0 + theta * theta / 6.0));
    }
    if theta > std::f64::consts::PI - LOG_BRANCH_DELTA {
        // Symmetric part is cosθ·I + (1 − cosθ)·kkᵀ; pick its best-conditioned column.
        let sym = (m + m.transpose()) * 0.5;
        let kkt = (sym - Matrix3::identity() * cos) / (1.0 - cos);
        let (mut best, mut best_val) = (0, kkt[(0, 0)]);
        for i in 1..3 {
            if kkt[(i, i)] > best_val {
                best = i;
                best_val = kkt[(i, i)];
            }
        }
        let mut axis = kkt.column(best).into_owned();
        axis /= axis.norm();
        if axis.dot(&s) < 0.0 {
            axis = -axis;
        }
        return AxisAngle(axis * theta);
    }
    AxisAngle(s * (theta / sin))
}

/// Rodrigues' formula, `I + sinθ·[k]× + (1 − cosθ)·[k]×²`.
pub fn axis_angle_to_rotmat(v: &AxisAngle) -> RotMat {
    let theta = v.0.norm();
    if theta < TAYLOR_EXP_THRESHOLD {
        return RotMat(Matrix3::identity() + skew(&v.0));
    }
    let k = v.0 / theta;
    let kx = skew(&k);
    RotMat(Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos()))
}
