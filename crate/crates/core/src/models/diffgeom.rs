//! Tape versions of the 6D → matrix map, forward kinematics and the
//! pinhole projection, so losses on keypoints reach the pose heads.

use crate::camera::MIN_DEPTH;
use crate::error::{Error, Result};
use crate::gradcore::{Tape, Var};
use crate::rot3::RotationSixD;
use crate::skeleton::{KinematicTree, NUM_BETAS, NUM_JOINTS};

/// Row-major 3×3 positions of the first two columns: `[R00, R10, R20, R01, R11, R21]`.
pub const SIXD_FROM_ROWMAJOR: [usize; 6] = [0, 3, 6, 1, 4, 7];

/// Column-stacked `[b0 | b1 | b2]` (27 → 9 after concat) to row-major.
const COLUMNS_TO_ROWMAJOR: [usize; 9] = [0, 3, 6, 1, 4, 7, 2, 5, 8];

/// Differentiable Gram-Schmidt 6D → row-major rotation matrix. Rejects
/// degenerate inputs with the same rule as [`crate::rot3::sixd_to_rotmat`].
pub fn sixd_to_rotmat(tape: &mut Tape, x: Var) -> Result<Var> {
    let vals = tape.value(x);
    if vals.len() != 6 {
        return Err(Error::ShapeMismatch(format!("6D rotation has {} entries", vals.len())));
    }
    // non-finite inputs flow through as NaN and surface as a non-finite loss
    if vals.iter().all(|v| v.is_finite()) {
        RotationSixD::from_slice(vals).validate()?;
    }
    let a0 = tape.slice(x, 0, 3)?;
    let a1 = tape.slice(x, 3, 3)?;
    let b0 = tape.normalize(a0);
    let d = tape.dot(b0, a1)?;
    let proj = tape.scale_by(b0, d)?;
    let u1 = tape.sub(a1, proj)?;
    let b1 = tape.normalize(u1);
    let b2 = tape.cross(b0, b1)?;
    let cols = tape.concat(&[b0, b1, b2]);
    tape.gather(cols, &COLUMNS_TO_ROWMAJOR)
}

/// 6D view of a row-major rotation matrix node.
pub fn rotmat_to_sixd(tape: &mut Tape, r: Var) -> Result<Var> {
    tape.gather(r, &SIXD_FROM_ROWMAJOR)
}

/// Per-joint bone vectors `rest_offset_j + shape_basis_j · β` for a
/// 10-vector `beta` node. Index 0 (root) is unused and left as `None`.
pub fn bone_vectors(tape: &mut Tape, tree: &KinematicTree, beta: Var) -> Result<Vec<Option<Var>>> {
    if tape.value(beta).len() != NUM_BETAS {
        return Err(Error::ShapeMismatch("beta must have 10 entries".into()));
    }
    let mut out = vec![None];
    for j in 1..NUM_JOINTS {
        let basis = &tree.shape_basis[j];
        let rows: Vec<f64> = (0..3).flat_map(|r| (0..NUM_BETAS).map(move |c| basis[(r, c)])).collect();
        let lin = tape.const_matvec(&rows, 3, beta)?;
        let rest = tree.rest_offset[j];
        out.push(Some(tape.add_const(lin, &[rest.x, rest.y, rest.z])?));
    }
    Ok(out)
}

/// Root-relative joint positions (root at the origin) for one frame of
/// local rotation matrices.
pub fn forward_kinematics(
    tape: &mut Tape,
    tree: &KinematicTree,
    rotmats: &[Var],
    bones: &[Option<Var>],
    origin: Var,
) -> Result<Vec<Var>> {
    if rotmats.len() != NUM_JOINTS || bones.len() != NUM_JOINTS {
        return Err(Error::ShapeMismatch("forward kinematics needs 24 joints".into()));
    }
    let has_children: Vec<bool> = (0..NUM_JOINTS).map(|j| tree.parent.iter().any(|&p| p == j as i32)).collect();
    let mut global: Vec<Option<Var>> = vec![None; NUM_JOINTS];
    let mut pos = Vec::with_capacity(NUM_JOINTS);
    global[0] = Some(rotmats[0]);
    pos.push(origin);
    for j in 1..NUM_JOINTS {
        let p = tree.parent[j] as usize;
        let gp = global[p].expect("parents precede children");
        let bone = bones[j].expect("non-root bone");
        let offset = tape.matvec3(gp, bone)?;
        pos.push(tape.add(pos[p], offset)?);
        if has_children[j] {
            global[j] = Some(tape.matmul3(gp, rotmats[j])?);
        }
    }
    Ok(pos)
}

/// Pinhole projection of `point + trans` to normalized image coordinates
/// `(pixel − res/2) / (res/2)`.
pub fn project_normalized(tape: &mut Tape, point: Var, trans: Var, focal: f64, res: f64) -> Result<Var> {
    let q = tape.add(point, trans)?;
    let z = tape.value(q)[2];
    if z <= MIN_DEPTH {
        return Err(Error::BehindCamera { index: 0, z });
    }
    tape.pinhole(q, focal / (res / 2.0))
}
