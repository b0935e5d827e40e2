//! Video pose generator with one independent temporal encoder per joint.
//!
//! Per joint `i` and frame `t`:
//!
//! ```text
//! f_i(t)  = tanh(E_i · obs_i(t))                 observation encoder, 3 → 128
//! c_i(t)  = tanh(C_i · obs_i(t))                 camera/shape features, 3 → 32
//! f̃_i(t) = L_i · GRU²_i(f_i(1..t))              2-layer GRU (hidden 64), 64 → 128
//! θ̃_i(t) = W_i · f̃_i(t)                         6D pose head
//! ```
//!
//! and per frame `c(t) = [c_0(t) … c_23(t)]`, `c_w(t) = W_c c(t)`,
//! `β = mean_t W_β c(t)`. In frame-wise mode the GRU stack is skipped and
//! `f̃ = f`.

use nalgebra::Vector3;
use rand::Rng;

use super::diffgeom;
use super::{ObsFrame, FEATURE_DIM, HIDDEN_DIM, CAM_DIM, OBS_DIM, SIXD_DIM};
use crate::camera::{recover_translation, CameraIntrinsics, WeakCamera};
use crate::error::{Error, Result};
use crate::gradcore::{gru_step, GruCell, Linear, ParamId, ParamStore, Tape, Var};
use crate::rot3::{rotmat_to_axis_angle, rotmat_to_sixd, AxisAngle, RotMat};
use crate::skeleton::{ShapeParams, NUM_BETAS, NUM_JOINTS};

/// Initial weak-camera scale carried by the camera head's bias.
pub const CAM_SCALE_INIT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    /// Insert the per-joint GRU encoders; `false` is the frame-wise baseline.
    pub temporal: bool,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointBranch {
    pub feat: Linear,
    pub cam: Linear,
    pub gru: Option<[GruCell; 2]>,
    pub lift: Option<Linear>,
    pub head: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub joints: Vec<JointBranch>,
    pub w_beta: Linear,
    pub w_cam: Linear,
}

/// Plain-valued per-frame, per-joint features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    /// `[t][j]`, each of length 128.
    pub joint_features: Vec<Vec<Vec<f64>>>,
    /// `[t][j]`, each of length 32.
    pub cam_shape_features: Vec<Vec<Vec<f64>>>,
}

/// Tape handles for a feature volume.
#[derive(Debug, Clone)]
pub struct FeatureVars {
    pub joint: Vec<Vec<Var>>,
    pub cam: Vec<Vec<Var>>,
}

/// Tape handles for everything the generator produces.
#[derive(Debug, Clone)]
pub struct GeneratorVars {
    pub features: Vec<Vec<Var>>,
    pub tilde_features: Vec<Vec<Var>>,
    pub pose6d: Vec<Vec<Var>>,
    pub rotmats: Vec<Vec<Var>>,
    pub weak_cam: Vec<Var>,
    pub trans: Vec<Var>,
    pub beta: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOutput {
    pub pose6d: Vec<[[f64; SIXD_DIM]; NUM_JOINTS]>,
    pub pose_rotmats: Vec<[RotMat; NUM_JOINTS]>,
    pub pose_axis_angle: Vec<[AxisAngle; NUM_JOINTS]>,
    pub weak_cam: Vec<WeakCamera>,
    pub shape: ShapeParams,
    pub trans: Vec<Vector3<f64>>,
    pub tilde_features: Vec<Vec<Vec<f64>>>,
}

impl GeneratorOutput {
    /// 6D view of the orthonormalized rotations, `[t][j][6]`.
    pub fn pose6d_from_rotmats(&self) -> Vec<[[f64; SIXD_DIM]; NUM_JOINTS]> {
        self.pose_rotmats.iter().map(|f| f.map(|r| rotmat_to_sixd(&r).to_array())).collect()
    }
}

pub fn joint_prefix(j: usize) -> String {
    format!("gen.j{j:02}")
}

impl Generator {
    /// Registers all generator parameters under `gen.`. Encoders, heads and
    /// the camera/shape regressors are created before the GRU stacks, so the
    /// frame-wise and temporal variants share their initial values for the
    /// common blocks given the same seed.
    pub fn new<R: Rng>(config: GeneratorConfig, store: &mut ParamStore, rng: &mut R) -> Self {
        let mut joints = Vec::with_capacity(NUM_JOINTS);
        for j in 0..NUM_JOINTS {
            let p = joint_prefix(j);
            let feat = Linear::new(store, &format!("{p}.enc_feat"), OBS_DIM, FEATURE_DIM, rng);
            let cam = Linear::new(store, &format!("{p}.enc_cam"), OBS_DIM, CAM_DIM, rng);
            let head = Linear::new(store, &format!("{p}.head"), FEATURE_DIM, SIXD_DIM, rng);
            store.get_mut(head.b).values.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
            joints.push(JointBranch { feat, cam, gru: None, lift: None, head });
        }
        let w_beta = Linear::new(store, "gen.w_beta", NUM_JOINTS * CAM_DIM, NUM_BETAS, rng);
        let w_cam = Linear::new(store, "gen.w_cam", NUM_JOINTS * CAM_DIM, 3, rng);
        store.get_mut(w_cam.b).values.copy_from_slice(&[CAM_SCALE_INIT, 0.0, 0.0]);
        if config.temporal {
            for (j, branch) in joints.iter_mut().enumerate() {
                let p = joint_prefix(j);
                let g1 = GruCell::new(store, &format!("{p}.gru1"), FEATURE_DIM, HIDDEN_DIM, rng);
                let g2 = GruCell::new(store, &format!("{p}.gru2"), HIDDEN_DIM, HIDDEN_DIM, rng);
                branch.gru = Some([g1, g2]);
                branch.lift = Some(Linear::new(store, &format!("{p}.lift"), HIDDEN_DIM, FEATURE_DIM, rng));
            }
        }
        Self { config, joints, w_beta, w_cam }
    }

    /// Every parameter reachable from joint `j`'s encoder, temporal stack and head.
    pub fn joint_params(&self, j: usize) -> Vec<ParamId> {
        let b = &self.joints[j];
        let mut ids = vec![b.feat.w, b.feat.b, b.cam.w, b.cam.b, b.head.w, b.head.b];
        if let Some(g) = &b.gru {
            ids.extend(g[0].params());
            ids.extend(g[1].params());
        }
        if let Some(l) = &b.lift {
            ids.extend(l.params());
        }
        ids
    }

    /// Per-joint observation encoder. Pixel coordinates are first mapped
    /// to `(pixel − res/2) / (res/2)`; confidence passes through.
    pub fn encode_observations(&self, tape: &mut Tape, store: &ParamStore, obs: &[ObsFrame]) -> Result<FeatureVars> {
        let c = self.config.intrinsics.res / 2.0;
        let mut joint = Vec::with_capacity(obs.len());
        let mut cam = Vec::with_capacity(obs.len());
        for frame in obs {
            let mut fj = Vec::with_capacity(NUM_JOINTS);
            let mut cj = Vec::with_capacity(NUM_JOINTS);
            for (branch, o) in self.joints.iter().zip(frame) {
                let x = tape.input(vec![(o[0] - c) / c, (o[1] - c) / c, o[2]]);
                let f = branch.feat.forward(tape, store, x)?;
                fj.push(tape.tanh(f));
                let k = branch.cam.forward(tape, store, x)?;
                cj.push(tape.tanh(k));
            }
            joint.push(fj);
            cam.push(cj);
        }
        Ok(FeatureVars { joint, cam })
    }

    /// Places a plain feature volume on the tape as constants.
    pub fn feature_inputs(&self, tape: &mut Tape, fv: &FeatureVolume) -> Result<FeatureVars> {
        if fv.joint_features.len() != fv.cam_shape_features.len() {
            return Err(Error::ShapeMismatch("feature volume frame counts differ".into()));
        }
        let mut joint = Vec::new();
        let mut cam = Vec::new();
        for (fj, cj) in fv.joint_features.iter().zip(&fv.cam_shape_features) {
            if fj.len() != NUM_JOINTS || cj.len() != NUM_JOINTS {
                return Err(Error::ShapeMismatch("feature volume needs 24 joints per frame".into()));
            }
            if fj.iter().any(|f| f.len() != FEATURE_DIM) || cj.iter().any(|f| f.len() != CAM_DIM) {
                return Err(Error::ShapeMismatch("feature volume has wrong feature width".into()));
            }
            joint.push(fj.iter().map(|f| tape.input(f.clone())).collect());
            cam.push(cj.iter().map(|f| tape.input(f.clone())).collect());
        }
        Ok(FeatureVars { joint, cam })
    }

    pub fn forward_features(&self, tape: &mut Tape, store: &ParamStore, fv: &FeatureVars) -> Result<GeneratorVars> {
        let frames = fv.joint.len();
        if frames == 0 {
            return Err(Error::ShapeMismatch("empty window".into()));
        }

        // temporal branch, joint by joint
        let mut tilde = vec![Vec::with_capacity(NUM_JOINTS); frames];
        for (j, branch) in self.joints.iter().enumerate() {
            match (&branch.gru, &branch.lift) {
                (Some([g1, g2]), Some(lift)) => {
                    let mut h1 = tape.input(vec![0.0; HIDDEN_DIM]);
                    let mut h2 = tape.input(vec![0.0; HIDDEN_DIM]);
                    for t in 0..frames {
                        h1 = gru_step(tape, store, g1, fv.joint[t][j], h1)?;
                        h2 = gru_step(tape, store, g2, h1, h2)?;
                        tilde[t].push(lift.forward(tape, store, h2)?);
                    }
                }
                _ => {
                    for t in 0..frames {
                        tilde[t].push(fv.joint[t][j]);
                    }
                }
            }
        }

        let mut pose6d = Vec::with_capacity(frames);
        let mut rotmats = Vec::with_capacity(frames);
        for tilde_t in &tilde {
            let mut p6 = Vec::with_capacity(NUM_JOINTS);
            let mut rm = Vec::with_capacity(NUM_JOINTS);
            for (branch, &ft) in self.joints.iter().zip(tilde_t) {
                let x = branch.head.forward(tape, store, ft)?;
                rm.push(diffgeom::sixd_to_rotmat(tape, x)?);
                p6.push(x);
            }
            pose6d.push(p6);
            rotmats.push(rm);
        }

        let intr = self.config.intrinsics;
        let tz_scale = 2.0 * intr.focal / intr.res;
        let mut weak_cam = Vec::with_capacity(frames);
        let mut trans = Vec::with_capacity(frames);
        let mut betas = Vec::with_capacity(frames);
        for cam_t in &fv.cam {
            let c = tape.concat(cam_t);
            let cw = self.w_cam.forward(tape, store, c)?;
            let s = tape.value(cw)[0];
            if !(s > 0.0) {
                return Err(Error::NonPositiveScale(s));
            }
            let s_var = tape.slice(cw, 0, 1)?;
            let inv = tape.recip(s_var);
            let tz = tape.scale(inv, tz_scale);
            let txy = tape.slice(cw, 1, 2)?;
            trans.push(tape.concat(&[txy, tz]));
            weak_cam.push(cw);
            betas.push(self.w_beta.forward(tape, store, c)?);
        }
        let beta_sum = tape.sum_vars(&betas)?;
        let beta = tape.scale(beta_sum, 1.0 / frames as f64);

        Ok(GeneratorVars {
            features: fv.joint.clone(),
            tilde_features: tilde,
            pose6d,
            rotmats,
            weak_cam,
            trans,
            beta,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, obs: &[ObsFrame]) -> Result<GeneratorVars> {
        let fv = self.encode_observations(tape, store, obs)?;
        self.forward_features(tape, store, &fv)
    }

    /// Reads plain values out of a recorded forward pass.
    pub fn output(&self, tape: &Tape, vars: &GeneratorVars) -> Result<GeneratorOutput> {
        let intr = self.config.intrinsics;
        let frames = vars.pose6d.len();
        let mut out = GeneratorOutput {
            pose6d: Vec::with_capacity(frames),
            pose_rotmats: Vec::with_capacity(frames),
            pose_axis_angle: Vec::with_capacity(frames),
            weak_cam: Vec::with_capacity(frames),
            shape: ShapeParams { beta: tape.value(vars.beta).try_into().expect("10 betas") },
            trans: Vec::with_capacity(frames),
            tilde_features: Vec::with_capacity(frames),
        };
        for t in 0..frames {
            let p6: [[f64; SIXD_DIM]; NUM_JOINTS] =
                std::array::from_fn(|j| tape.value(vars.pose6d[t][j]).try_into().expect("6D"));
            let rm: [RotMat; NUM_JOINTS] = std::array::from_fn(|j| RotMat::from_row_major(tape.value(vars.rotmats[t][j])));
            out.pose_axis_angle.push(std::array::from_fn(|j| rotmat_to_axis_angle(&rm[j])));
            out.pose6d.push(p6);
            out.pose_rotmats.push(rm);
            let cw = tape.value(vars.weak_cam[t]);
            let cam = WeakCamera { s: cw[0], tx: cw[1], ty: cw[2] };
            out.trans.push(recover_translation(&cam, &intr)?);
            out.weak_cam.push(cam);
            out.tilde_features.push(vars.tilde_features[t].iter().map(|v| tape.value(*v).to_vec()).collect());
        }
        Ok(out)
    }

    /// Forward pass on a throwaway tape.
    pub fn predict(&self, store: &ParamStore, obs: &[ObsFrame]) -> Result<GeneratorOutput> {
        let mut tape = Tape::new();
        let vars = self.forward(&mut tape, store, obs)?;
        self.output(&tape, &vars)
    }

    pub fn arch_manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "model": "generator",
            "joints": NUM_JOINTS,
            "obs_dim": OBS_DIM,
            "feature_dim": FEATURE_DIM,
            "hidden_dim": HIDDEN_DIM,
            "cam_dim": CAM_DIM,
            "temporal": self.config.temporal,
            "focal": self.config.intrinsics.focal,
            "res": self.config.intrinsics.res,
        })
    }
}
