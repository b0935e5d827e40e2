//! A skeleton-only linear body model with the 24-joint SMPL topology.
//!
//! The rest skeleton is z-up, +x toward the body's left and +y forward,
//! in meters. Shape coefficients displace each bone linearly:
//! `bone_j(β) = rest_offset_j + shape_basis_j · β`.

use nalgebra::{SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::rot3::{axis_angle_to_rotmat, AxisAngle, RotMat};

pub const NUM_JOINTS: usize = 24;
pub const NUM_BETAS: usize = 10;

/// SMPL joint order.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

pub const SMPL_PARENTS: [i32; NUM_JOINTS] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

/// Rest bone offsets from the parent joint, meters.
const REST_OFFSETS: [[f64; 3]; NUM_JOINTS] = [
    [0.0, 0.0, 0.0],
    [0.09, 0.0, -0.08],
    [-0.09, 0.0, -0.08],
    [0.0, 0.0, 0.11],
    [0.0, 0.0, -0.42],
    [0.0, 0.0, -0.42],
    [0.0, 0.0, 0.13],
    [0.0, 0.0, -0.42],
    [0.0, 0.0, -0.42],
    [0.0, 0.0, 0.05],
    [0.0, 0.12, -0.06],
    [0.0, 0.12, -0.06],
    [0.0, 0.0, 0.22],
    [0.07, 0.0, 0.15],
    [-0.07, 0.0, 0.15],
    [0.0, 0.02, 0.15],
    [0.12, 0.0, 0.02],
    [-0.12, 0.0, 0.02],
    [0.26, 0.0, 0.0],
    [-0.26, 0.0, 0.0],
    [0.25, 0.0, 0.0],
    [-0.25, 0.0, 0.0],
    [0.08, 0.0, 0.0],
    [-0.08, 0.0, 0.0],
];

const LEG_JOINTS: [usize; 4] = [4, 5, 7, 8];

pub type ShapeBasis = SMatrix<f64, 3, NUM_BETAS>;

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTree {
    pub parent: [i32; NUM_JOINTS],
    pub rest_offset: [Vector3<f64>; NUM_JOINTS],
    pub shape_basis: [ShapeBasis; NUM_JOINTS],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    pub beta: [f64; NUM_BETAS],
}

impl ShapeParams {
    pub fn zero() -> Self {
        Self { beta: [0.0; NUM_BETAS] }
    }

    pub fn as_vector(&self) -> SMatrix<f64, NUM_BETAS, 1> {
        SMatrix::from_column_slice(&self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFrame {
    pub joints: [AxisAngle; NUM_JOINTS],
    pub trans: Vector3<f64>,
}

impl PoseFrame {
    pub fn rest() -> Self {
        Self { joints: [AxisAngle::zero(); NUM_JOINTS], trans: Vector3::zeros() }
    }

    pub fn rotmats(&self) -> [RotMat; NUM_JOINTS] {
        std::array::from_fn(|j| axis_angle_to_rotmat(&self.joints[j]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub frames: Vec<PoseFrame>,
    pub shape: ShapeParams,
    pub frame_rate: f64,
}

impl MotionSequence {
    pub fn new(frames: Vec<PoseFrame>, shape: ShapeParams, frame_rate: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::ShapeMismatch("motion sequence needs at least one frame".into()));
        }
        if !(frame_rate > 0.0) {
            return Err(Error::ShapeMismatch(format!("frame rate must be positive, got {frame_rate}")));
        }
        Ok(Self { frames, shape, frame_rate })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Deterministic small values for the frozen shape directions 2..10.
fn frozen_direction(joint: usize, axis: usize, component: usize) -> f64 {
    let seed = (joint * 37 + axis * 11 + component * 5 + 1) as f64;
    0.004 * (seed * 12.9898).sin()
}

pub fn default_tree() -> KinematicTree {
    let rest_offset: [Vector3<f64>; NUM_JOINTS] =
        std::array::from_fn(|j| Vector3::from(REST_OFFSETS[j]));
    let shape_basis = std::array::from_fn(|j| {
        let mut b = ShapeBasis::zeros();
        if j == 0 {
            return b;
        }
        // component 0: every bone +5% per unit
        b.set_column(0, &(rest_offset[j] * 0.05));
        // component 1: leg bones +5% per unit
        if LEG_JOINTS.contains(&j) {
            b.set_column(1, &(rest_offset[j] * 0.05));
        }
        for c in 2..NUM_BETAS {
            for a in 0..3 {
                b[(a, c)] = frozen_direction(j, a, c);
            }
        }
        b
    });
    KinematicTree { parent: SMPL_PARENTS, rest_offset, shape_basis }
}

impl KinematicTree {
    pub fn parent_of(&self, j: usize) -> Option<usize> {
        usize::try_from(self.parent[j]).ok()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        (0..NUM_JOINTS)
            .map(|mut j| {
                let mut d = 0;
                while let Some(p) = self.parent_of(j) {
                    j = p;
                    d += 1;
                }
                d
            })
            .max()
            .unwrap_or(0)
    }

    /// Bone vector of joint `j` under shape `shape`, in the parent's frame.
    pub fn bone(&self, j: usize, shape: &ShapeParams) -> Vector3<f64> {
        self.rest_offset[j] + self.shape_basis[j] * shape.as_vector()
    }

    /// Checks the topology invariants: single root at 0, parents precede
    /// children (hence acyclic), nonzero non-root offsets.
    pub fn validate(&self) -> Result<()> {
        if self.parent[0] != -1 {
            return Err(Error::ShapeMismatch("joint 0 must be the root".into()));
        }
        for j in 1..NUM_JOINTS {
            let p = self.parent[j];
            if p < 0 || p as usize >= j {
                return Err(Error::ShapeMismatch(format!("joint {j} has invalid parent {p}")));
            }
            if self.rest_offset[j].norm() == 0.0 {
                return Err(Error::ShapeMismatch(format!("joint {j} has a zero rest offset")));
            }
        }
        Ok(())
    }
}

/// Forward kinematics from per-joint local rotation matrices.
pub fn forward_kinematics_rotmats(
    tree: &KinematicTree,
    rotmats: &[RotMat; NUM_JOINTS],
    shape: &ShapeParams,
    trans: &Vector3<f64>,
) -> [Vector3<f64>; NUM_JOINTS] {
    let mut global = [RotMat::identity(); NUM_JOINTS];
    let mut pos = [Vector3::zeros(); NUM_JOINTS];
    global[0] = rotmats[0];
    pos[0] = *trans;
    for j in 1..NUM_JOINTS {
        let p = tree.parent[j] as usize;
        pos[j] = pos[p] + global[p].0 * tree.bone(j, shape);
        global[j] = global[p].mul(&rotmats[j]);
    }
    pos
}

pub fn forward_kinematics(
    tree: &KinematicTree,
    frame: &PoseFrame,
    shape: &ShapeParams,
) -> [Vector3<f64>; NUM_JOINTS] {
    forward_kinematics_rotmats(tree, &frame.rotmats(), shape, &frame.trans)
}

pub fn sequence_keypoints(tree: &KinematicTree, seq: &MotionSequence) -> Vec<[Vector3<f64>; NUM_JOINTS]> {
    seq.frames.iter().map(|f| forward_kinematics(tree, f, &seq.shape)).collect()
}
