//! Generator and discriminator objectives.

use serde::Serialize;

use super::config::LossWeights;
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::gradcore::{mse, ParamStore, Tape, Var};
use crate::models::diffgeom;
use crate::models::{GeneratorVars, MotionDiscriminator, SIXD_DIM};
use crate::rot3::rotmat_to_sixd;
use crate::skeleton::{KinematicTree, NUM_JOINTS};
use crate::synthmotion::TrainingClip;

/// Supervision for one clip, flattened in frame-major, joint-minor order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTargets {
    /// Root-relative keypoints, meters, `T·24·3`.
    pub keypoints_3d: Vec<f64>,
    /// Keypoints in normalized image coordinates, `T·24·2`.
    pub keypoints_2d: Vec<f64>,
    /// Row-major local rotation matrices, `T·24·9`.
    pub rotmats: Vec<f64>,
    pub beta: Vec<f64>,
    pub frames: usize,
}

impl ClipTargets {
    pub fn from_clip(clip: &TrainingClip) -> Self {
        let c = clip.intrinsics.principal_point();
        Self {
            keypoints_3d: clip.gt_keypoints_3d.iter().flatten().flat_map(|p| [p.x, p.y, p.z]).collect(),
            keypoints_2d: clip.gt_keypoints_2d.iter().flatten().flat_map(|p| [(p.x - c) / c, (p.y - c) / c]).collect(),
            rotmats: clip.gt_motion.frames.iter().flat_map(|f| f.rotmats()).flat_map(|r| r.to_row_major()).collect(),
            beta: clip.gt_motion.shape.beta.to_vec(),
            frames: clip.len(),
        }
    }
}

/// One value per generator loss term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossTerms {
    pub l_3d: f64,
    pub l_2d: f64,
    pub smpl_pose: f64,
    pub smpl_beta: f64,
    pub adv: f64,
    pub reg: f64,
}

impl LossTerms {
    pub const NAMES: [&'static str; 6] = ["l_3d", "l_2d", "smpl_pose", "smpl_beta", "adv", "reg"];

    pub fn values(&self) -> [f64; 6] {
        [self.l_3d, self.l_2d, self.smpl_pose, self.smpl_beta, self.adv, self.reg]
    }

    /// First term that is not finite.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        Self::NAMES.iter().zip(self.values()).find(|(_, v)| !v.is_finite()).map(|(n, _)| *n)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub unweighted: LossTerms,
    pub weighted: LossTerms,
    pub total: f64,
}

/// `Σ_i ‖f̃_i − f_i‖_F / (J·T)` where joint `i`'s matrix stacks its `T`
/// feature vectors. Inputs are indexed `[t][i]`.
pub fn feature_regularizer(tape: &mut Tape, features: &[Vec<Var>], tilde: &[Vec<Var>]) -> Result<Var> {
    let frames = features.len();
    if frames == 0 || tilde.len() != frames {
        return Err(Error::ShapeMismatch("feature and fused-feature windows differ".into()));
    }
    let joints = features[0].len();
    if features.iter().chain(tilde).any(|f| f.len() != joints) || joints == 0 {
        return Err(Error::ShapeMismatch("feature joint counts differ".into()));
    }
    let mut norms = Vec::with_capacity(joints);
    for i in 0..joints {
        let mut diffs = Vec::with_capacity(frames);
        for t in 0..frames {
            diffs.push(tape.sub(tilde[t][i], features[t][i])?);
        }
        let stacked = tape.concat(&diffs);
        norms.push(tape.norm(stacked));
    }
    let total = tape.sum_vars(&norms)?;
    Ok(tape.scale(total, 1.0 / (joints * frames) as f64))
}

/// Same quantity on plain values.
pub fn feature_regularizer_value(features: &[Vec<Vec<f64>>], tilde: &[Vec<Vec<f64>>]) -> f64 {
    let frames = features.len();
    let joints = features.first().map_or(0, |f| f.len());
    if frames == 0 || joints == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..joints {
        let mut sq = 0.0;
        for t in 0..frames {
            for (a, b) in tilde[t][i].iter().zip(&features[t][i]) {
                sq += (a - b) * (a - b);
            }
        }
        total += sq.sqrt();
    }
    total / (joints * frames) as f64
}

/// Per-frame 144-vectors of the 6D view of each joint's rotation matrix.
pub fn pose_frames_from_rotmats(tape: &mut Tape, rotmats: &[Vec<Var>]) -> Result<Vec<Var>> {
    rotmats
        .iter()
        .map(|frame| {
            let parts = frame.iter().map(|r| diffgeom::rotmat_to_sixd(tape, *r)).collect::<Result<Vec<_>>>()?;
            Ok(tape.concat(&parts))
        })
        .collect()
}

/// Plain 6D view of a motion, `[t][j][6]`.
pub fn sixd_sequence(frames: &[crate::skeleton::PoseFrame]) -> Vec<[[f64; SIXD_DIM]; NUM_JOINTS]> {
    frames.iter().map(|f| f.rotmats().map(|r| rotmat_to_sixd(&r).to_array())).collect()
}

/// `(x − c)²` as a scalar node.
fn squared_offset(tape: &mut Tape, x: Var, c: f64) -> Result<Var> {
    let d = tape.add_const(x, &[-c])?;
    Ok(tape.sum_squares(d))
}

/// Unweighted generator terms for one clip, as tape nodes in
/// [`LossTerms::NAMES`] order. The regularizer is only recorded when
/// `with_reg` holds.
#[allow(clippy::too_many_arguments)]
pub fn generator_terms(
    tape: &mut Tape,
    store: &ParamStore,
    tree: &KinematicTree,
    intr: &CameraIntrinsics,
    vars: &GeneratorVars,
    target: &ClipTargets,
    disc: &MotionDiscriminator,
    with_reg: bool,
) -> Result<[Option<Var>; 6]> {
    let frames = vars.rotmats.len();
    if frames != target.frames {
        return Err(Error::ShapeMismatch(format!("prediction has {frames} frames, target {}", target.frames)));
    }
    let bones = diffgeom::bone_vectors(tape, tree, vars.beta)?;
    let origin = tape.input(vec![0.0; 3]);
    let mut points = Vec::with_capacity(frames * NUM_JOINTS);
    let mut projected = Vec::with_capacity(frames * NUM_JOINTS);
    for t in 0..frames {
        let pos = diffgeom::forward_kinematics(tape, tree, &vars.rotmats[t], &bones, origin)?;
        for p in pos {
            projected.push(diffgeom::project_normalized(tape, p, vars.trans[t], intr.focal, intr.res)?);
            points.push(p);
        }
    }
    let pred3d = tape.concat(&points);
    let gt3d = tape.input(target.keypoints_3d.clone());
    let l_3d = mse(tape, pred3d, gt3d)?;

    let pred2d = tape.concat(&projected);
    let gt2d = tape.input(target.keypoints_2d.clone());
    let l_2d = mse(tape, pred2d, gt2d)?;

    let all_rot: Vec<Var> = vars.rotmats.iter().flatten().copied().collect();
    let pred_rot = tape.concat(&all_rot);
    let gt_rot = tape.input(target.rotmats.clone());
    let pose = mse(tape, pred_rot, gt_rot)?;

    let gt_beta = tape.input(target.beta.clone());
    let beta = mse(tape, vars.beta, gt_beta)?;

    let fake = pose_frames_from_rotmats(tape, &vars.rotmats)?;
    let score = disc.forward(tape, store, &fake)?;
    let adv = squared_offset(tape, score, 1.0)?;

    let reg = if with_reg { Some(feature_regularizer(tape, &vars.features, &vars.tilde_features)?) } else { None };
    Ok([Some(l_3d), Some(l_2d), Some(pose), Some(beta), Some(adv), reg])
}

/// Batch generator loss: each term averaged over clips, weighted, then
/// summed. Returns the total node and its breakdown. The regularizer joins
/// the graph only when `with_reg` holds and its weight is non-zero;
/// otherwise its unweighted value is still reported, computed off-graph.
#[allow(clippy::too_many_arguments)]
pub fn generator_loss(
    tape: &mut Tape,
    store: &ParamStore,
    tree: &KinematicTree,
    intr: &CameraIntrinsics,
    batch: &[(&GeneratorVars, &ClipTargets)],
    disc: &MotionDiscriminator,
    w: &LossWeights,
    with_reg: bool,
) -> Result<(Var, LossBreakdown)> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let reg_on_graph = with_reg && w.w_reg != 0.0;
    let mut per_term: [Vec<Var>; 6] = Default::default();
    let mut reg_off_graph = 0.0;
    for (vars, target) in batch {
        let terms = generator_terms(tape, store, tree, intr, vars, target, disc, reg_on_graph)?;
        for (k, t) in terms.iter().enumerate() {
            if let Some(t) = t {
                per_term[k].push(*t);
            }
        }
        if !reg_on_graph {
            let f: Vec<Vec<Vec<f64>>> =
                vars.features.iter().map(|fr| fr.iter().map(|v| tape.value(*v).to_vec()).collect()).collect();
            let ft: Vec<Vec<Vec<f64>>> =
                vars.tilde_features.iter().map(|fr| fr.iter().map(|v| tape.value(*v).to_vec()).collect()).collect();
            reg_off_graph += feature_regularizer_value(&f, &ft);
        }
    }
    let inv_b = 1.0 / batch.len() as f64;
    let lambdas = [w.w_3d, w.w_2d, w.w_smpl_pose, w.w_smpl_beta, w.w_adv, w.w_reg];
    let mut unweighted = [0.0; 6];
    let mut weighted = [0.0; 6];
    let mut weighted_vars = Vec::with_capacity(6);
    for k in 0..6 {
        if per_term[k].is_empty() {
            unweighted[k] = reg_off_graph * inv_b;
            continue;
        }
        let s = tape.sum_vars(&per_term[k])?;
        let mean = tape.scale(s, inv_b);
        let wv = tape.scale(mean, lambdas[k]);
        unweighted[k] = tape.scalar(mean);
        weighted[k] = tape.scalar(wv);
        weighted_vars.push(wv);
    }
    let total = tape.sum_vars(&weighted_vars)?;
    let terms = |v: [f64; 6]| LossTerms { l_3d: v[0], l_2d: v[1], smpl_pose: v[2], smpl_beta: v[3], adv: v[4], reg: v[5] };
    let breakdown = LossBreakdown { unweighted: terms(unweighted), weighted: terms(weighted), total: tape.scalar(total) };
    Ok((total, breakdown))
}

/// Least-squares discriminator objective
/// `mean (D(real) − 1)² + mean D(fake)²`. With `literal` the real and fake
/// roles are exchanged. Sequences are per-frame 144-vectors already on the
/// tape as constants, so nothing flows back to the generator.
pub fn discriminator_loss(
    tape: &mut Tape,
    store: &ParamStore,
    disc: &MotionDiscriminator,
    real: &[Vec<Var>],
    fake: &[Vec<Var>],
    literal: bool,
) -> Result<Var> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::ShapeMismatch("discriminator loss needs real and fake sequences".into()));
    }
    let (ones, zeros) = if literal { (fake, real) } else { (real, fake) };
    let mut one_terms = Vec::with_capacity(ones.len());
    for seq in ones {
        let s = disc.forward(tape, store, seq)?;
        one_terms.push(squared_offset(tape, s, 1.0)?);
    }
    let mut zero_terms = Vec::with_capacity(zeros.len());
    for seq in zeros {
        let s = disc.forward(tape, store, seq)?;
        zero_terms.push(tape.sum_squares(s));
    }
    let a = tape.sum_vars(&one_terms)?;
    let a = tape.scale(a, 1.0 / ones.len() as f64);
    let b = tape.sum_vars(&zero_terms)?;
    let b = tape.scale(b, 1.0 / zeros.len() as f64);
    tape.add(a, b)
}
