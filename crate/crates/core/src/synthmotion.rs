//! Seeded synthetic motion: three sinusoidal motion families, paired
//! noisy-observation clips, and train/eval/real-motion splits.
//!
//! A joint's local rotation at frame `t` is
//! `axis_j · amplitude_j · sin(2π·freq_j·t / fps + phase_j)` about a fixed
//! anatomical axis. The root additionally carries a fixed base
//! orientation, a quarter turn about camera x, which stands the z-up
//! skeleton upright in camera coordinates (y down, z forward).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::camera::{project, recover_translation, CameraIntrinsics, WeakCamera};
use crate::error::{Error, Result};
use crate::models::ObsFrame;
use crate::rot3::{axis_angle_to_rotmat, rotmat_to_axis_angle, AxisAngle};
use crate::skeleton::{
    default_tree, forward_kinematics, KinematicTree, MotionSequence, PoseFrame, ShapeParams, NUM_BETAS, NUM_JOINTS,
};

pub const DEFAULT_WINDOW: usize = 16;
pub const DEFAULT_FPS: f64 = 25.0;
pub const DEFAULT_NOISE_PX: f64 = 3.0;
pub const DEFAULT_REAL_POOL: usize = 256;

/// Local rotation axis per joint (x: left-right, y: forward, z: up).
pub const ANATOMICAL_AXES: [[f64; 3]; NUM_JOINTS] = [
    [0.0, 0.0, 1.0], // pelvis: yaw
    [1.0, 0.0, 0.0], // hips flex about x
    [1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0], // spine bends forward
    [1.0, 0.0, 0.0], // knees
    [1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0], // ankles
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0], // upper spine twists
    [1.0, 0.0, 0.0], // feet
    [1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0], // neck nods
    [0.0, 1.0, 0.0], // collars shrug about y
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0], // head turns
    [0.0, 0.0, 1.0], // shoulders swing about z
    [0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0], // elbows
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0], // wrists
    [0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0], // hands
    [0.0, 1.0, 0.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionFamily {
    WalkLike,
    WaveLike,
    IdleSway,
}

impl MotionFamily {
    pub const ALL: [MotionFamily; 3] = [MotionFamily::WalkLike, MotionFamily::WaveLike, MotionFamily::IdleSway];

    /// Template `(amplitude, phase)` per joint and the base frequency in Hz.
    fn template(self) -> ([f64; NUM_JOINTS], [f64; NUM_JOINTS], f64) {
        let mut amp = [0.0; NUM_JOINTS];
        let mut phase = [0.0; NUM_JOINTS];
        match self {
            MotionFamily::WalkLike => {
                let set = |amp: &mut [f64; NUM_JOINTS], phase: &mut [f64; NUM_JOINTS], j: usize, a: f64, p: f64| {
                    amp[j] = a;
                    phase[j] = p;
                };
                set(&mut amp, &mut phase, 0, 0.08, 0.0);
                set(&mut amp, &mut phase, 1, 0.45, 0.0);
                set(&mut amp, &mut phase, 2, 0.45, PI);
                set(&mut amp, &mut phase, 4, 0.5, -FRAC_PI_2);
                set(&mut amp, &mut phase, 5, 0.5, FRAC_PI_2);
                set(&mut amp, &mut phase, 7, 0.2, 0.0);
                set(&mut amp, &mut phase, 8, 0.2, PI);
                set(&mut amp, &mut phase, 3, 0.05, 0.0);
                set(&mut amp, &mut phase, 9, 0.08, PI);
                set(&mut amp, &mut phase, 16, 0.35, PI);
                set(&mut amp, &mut phase, 17, 0.35, 0.0);
                set(&mut amp, &mut phase, 18, 0.3, PI);
                set(&mut amp, &mut phase, 19, 0.3, 0.0);
                set(&mut amp, &mut phase, 15, 0.05, 0.3);
                (amp, phase, 1.0)
            }
            MotionFamily::WaveLike => {
                amp[13] = 0.05;
                amp[14] = 0.25;
                amp[17] = 0.8;
                amp[19] = 0.6;
                phase[19] = FRAC_PI_2;
                amp[21] = 0.3;
                phase[21] = PI;
                amp[3] = 0.04;
                amp[15] = 0.1;
                phase[15] = 0.5;
                amp[0] = 0.05;
                (amp, phase, 1.5)
            }
            MotionFamily::IdleSway => {
                for (j, a) in amp.iter_mut().enumerate() {
                    *a = 0.04 + 0.02 * ((j % 4) as f64);
                }
                for (j, p) in phase.iter_mut().enumerate() {
                    *p = 0.4 * j as f64;
                }
                amp[0] = 0.1;
                (amp, phase, 0.4)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionFamily::WalkLike => "walk-like",
            MotionFamily::WaveLike => "wave-like",
            MotionFamily::IdleSway => "idle-sway",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionFamilyConfig {
    pub family: MotionFamily,
    /// Radians, each ≤ π/2.
    pub amplitude: [f64; NUM_JOINTS],
    /// Hz, each in `(0, frame_rate/4]`.
    pub frequency: [f64; NUM_JOINTS],
    /// Radians.
    pub phase: [f64; NUM_JOINTS],
    pub frame_rate: f64,
    /// Root speed along camera x for walk-like motion, m/s.
    pub root_velocity: f64,
    pub seed: u64,
}

impl MotionFamilyConfig {
    /// Template for `family` with seeded amplitude, tempo and phase jitter.
    pub fn random(family: MotionFamily, frame_rate: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (amp, phase, base_freq) = family.template();
        let amp_scale = rng.random_range(0.8..1.2);
        let freq = base_freq * rng.random_range(0.8..1.2);
        let global_phase = rng.random_range(0.0..TAU);
        let amplitude = std::array::from_fn(|j| (amp[j] * amp_scale).min(FRAC_PI_2));
        let phase = std::array::from_fn(|j| phase[j] + global_phase + rng.random_range(-0.2..0.2));
        let root_velocity = match family {
            MotionFamily::WalkLike => rng.random_range(-0.5..0.5),
            _ => 0.0,
        };
        Self {
            family,
            amplitude,
            frequency: [freq.min(frame_rate / 4.0); NUM_JOINTS],
            phase,
            frame_rate,
            root_velocity,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0) {
            return Err(Error::Config("frame rate must be positive".into()));
        }
        for j in 0..NUM_JOINTS {
            if !(self.amplitude[j].abs() <= FRAC_PI_2) {
                return Err(Error::Config(format!("joint {j}: amplitude above pi/2")));
            }
            let f = self.frequency[j];
            if !(f > 0.0 && f <= self.frame_rate / 4.0) {
                return Err(Error::Config(format!("joint {j}: frequency {f} outside (0, fps/4]")));
            }
        }
        Ok(())
    }
}

/// Fixed orientation that maps the z-up skeleton to camera coordinates.
pub fn base_orientation() -> AxisAngle {
    AxisAngle::new(FRAC_PI_2, 0.0, 0.0)
}

/// Joint `j`'s driven angle at frame `t`.
pub fn joint_angle(cfg: &MotionFamilyConfig, j: usize, t: usize) -> f64 {
    cfg.amplitude[j] * (TAU * cfg.frequency[j] * t as f64 / cfg.frame_rate + cfg.phase[j]).sin()
}

/// Poses only; root translation is left at zero (see [`synthesize_clip`]).
pub fn sample_motion(cfg: &MotionFamilyConfig, frames: usize) -> Result<MotionSequence> {
    cfg.validate()?;
    let base = axis_angle_to_rotmat(&base_orientation());
    let shape = ShapeParams::zero();
    let seq = (0..frames)
        .map(|t| {
            let mut f = PoseFrame::rest();
            for j in 0..NUM_JOINTS {
                let axis = Vector3::from(ANATOMICAL_AXES[j]);
                f.joints[j] = AxisAngle(axis * joint_angle(cfg, j, t));
            }
            f.joints[0] = rotmat_to_axis_angle(&base.mul(&axis_angle_to_rotmat(&f.joints[0])));
            f
        })
        .collect();
    MotionSequence::new(seq, shape, cfg.frame_rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingClip {
    /// Pose, camera-space root translation and shape.
    pub gt_motion: MotionSequence,
    pub gt_weak_cam: Vec<WeakCamera>,
    /// Root-relative joint positions, meters.
    pub gt_keypoints_3d: Vec<[Vector3<f64>; NUM_JOINTS]>,
    /// Pixels.
    pub gt_keypoints_2d: Vec<[Vector2<f64>; NUM_JOINTS]>,
    pub observations: Vec<ObsFrame>,
    pub intrinsics: CameraIntrinsics,
    pub seed: u64,
}

impl TrainingClip {
    pub fn len(&self) -> usize {
        self.gt_motion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt_motion.is_empty()
    }
}

/// Root-relative keypoints of a sequence (translation ignored).
pub fn root_relative_keypoints(tree: &KinematicTree, seq: &MotionSequence) -> Vec<[Vector3<f64>; NUM_JOINTS]> {
    seq.frames
        .iter()
        .map(|f| {
            let mut rel = *f;
            rel.trans = Vector3::zeros();
            forward_kinematics(tree, &rel, &seq.shape)
        })
        .collect()
}

/// Observation `(u + ε_u, v + ε_v, exp(−‖ε‖²/2σ²))` with `ε ~ N(0, σ²)`.
pub fn observe(kp2d: &[[Vector2<f64>; NUM_JOINTS]], noise_px: f64, rng: &mut impl Rng) -> Result<Vec<ObsFrame>> {
    if !(noise_px >= 0.0) {
        return Err(Error::Config(format!("noise must be non-negative, got {noise_px}")));
    }
    let normal = if noise_px > 0.0 { Some(Normal::new(0.0, noise_px).expect("valid sigma")) } else { None };
    Ok(kp2d
        .iter()
        .map(|frame| {
            std::array::from_fn(|j| {
                let p = frame[j];
                match &normal {
                    Some(n) => {
                        let (eu, ev): (f64, f64) = (n.sample(rng), n.sample(rng));
                        let conf = (-(eu * eu + ev * ev) / (2.0 * noise_px * noise_px)).exp();
                        [p.x + eu, p.y + ev, conf]
                    }
                    None => [p.x, p.y, 1.0],
                }
            })
        })
        .collect())
}

/// Builds one paired clip. Body shape and a ground-truth weak camera are
/// drawn from `seed`; the camera's translation drifts at the family's root
/// velocity.
pub fn synthesize_clip(
    cfg: &MotionFamilyConfig,
    frames: usize,
    intr: &CameraIntrinsics,
    noise_px: f64,
    seed: u64,
) -> Result<TrainingClip> {
    let tree = default_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut motion = sample_motion(cfg, frames)?;
    motion.shape = ShapeParams { beta: std::array::from_fn(|_| rng.random_range(-1.0..1.0)) };
    let s = rng.random_range(0.9..1.1);
    let tx0 = rng.random_range(-0.1..0.1);
    let ty0 = rng.random_range(-0.1..0.1);
    let dx = cfg.root_velocity / cfg.frame_rate;
    let mut cams = Vec::with_capacity(frames);
    for (t, f) in motion.frames.iter_mut().enumerate() {
        let cam = WeakCamera { s, tx: tx0 + dx * t as f64, ty: ty0 };
        f.trans = recover_translation(&cam, intr)?;
        cams.push(cam);
    }
    let kp3d = root_relative_keypoints(&tree, &motion);
    let mut kp2d = Vec::with_capacity(frames);
    for (pts, f) in kp3d.iter().zip(&motion.frames) {
        let uv = project(pts, intr, &f.trans)?;
        kp2d.push(std::array::from_fn(|j| uv[j]));
    }
    let observations = observe(&kp2d, noise_px, &mut rng)?;
    Ok(TrainingClip {
        gt_motion: motion,
        gt_weak_cam: cams,
        gt_keypoints_3d: kp3d,
        gt_keypoints_2d: kp2d,
        observations,
        intrinsics: *intr,
        seed,
    })
}

/// SplitMix64 mix of `(base, stream, index)`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_CLIPS: u64 = 1;
const STREAM_REAL: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub n_clips: usize,
    pub split_seed: u64,
    pub window: usize,
    pub frame_rate: f64,
    pub noise_px: f64,
    pub intrinsics: CameraIntrinsics,
    pub real_pool: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_clips: 80,
            split_seed: 0,
            window: DEFAULT_WINDOW,
            frame_rate: DEFAULT_FPS,
            noise_px: DEFAULT_NOISE_PX,
            intrinsics: CameraIntrinsics::default(),
            real_pool: DEFAULT_REAL_POOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<TrainingClip>,
    pub eval: Vec<TrainingClip>,
    /// Motion-only sequences standing in for a mocap corpus.
    pub real_pool: Vec<MotionSequence>,
}

fn family_for(seed: u64) -> MotionFamily {
    MotionFamily::ALL[(seed % 3) as usize]
}

/// Draws `n_clips` paired clips (80% train, 20% eval) plus a real-motion
/// pool from a separate seed stream.
pub fn make_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    if cfg.n_clips < 2 {
        return Err(Error::Config(format!("need at least 2 clips, got {}", cfg.n_clips)));
    }
    let n_train = cfg.n_clips * 4 / 5;
    let clip = |k: usize| -> Result<TrainingClip> {
        let seed = derive_seed(cfg.split_seed, STREAM_CLIPS, k as u64);
        let fam = MotionFamilyConfig::random(family_for(seed), cfg.frame_rate, seed);
        synthesize_clip(&fam, cfg.window, &cfg.intrinsics, cfg.noise_px, seed)
    };
    let all = (0..cfg.n_clips).map(clip).collect::<Result<Vec<_>>>()?;
    let (train, eval) = all.split_at(n_train);
    let real_pool = (0..cfg.real_pool)
        .map(|k| {
            let seed = derive_seed(cfg.split_seed, STREAM_REAL, k as u64);
            sample_motion(&MotionFamilyConfig::random(family_for(seed), cfg.frame_rate, seed), cfg.window)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { train: train.to_vec(), eval: eval.to_vec(), real_pool })
}

/// Draws random shape coefficients for a motion-only sequence.
pub fn random_shape(rng: &mut impl Rng) -> ShapeParams {
    ShapeParams { beta: [0.0; NUM_BETAS].map(|_| rng.random_range(-1.0..1.0)) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rot3::RotMat;

    #[test]
    fn zero_amplitude_is_constant_rest() {
        let mut cfg = MotionFamilyConfig::random(MotionFamily::WalkLike, 25.0, 1);
        cfg.amplitude = [0.0; NUM_JOINTS];
        let seq = sample_motion(&cfg, 10).unwrap();
        assert_eq!(seq.len(), 10);
        assert!(seq.frames.iter().all(|f| f == &seq.frames[0]));
        assert!(seq.frames[0].joints[1..].iter().all(|a| a.0 == Vector3::zeros()));
    }

    #[test]
    fn one_hz_at_25fps_repeats_every_25_frames() {
        let mut cfg = MotionFamilyConfig::random(MotionFamily::WalkLike, 25.0, 3);
        cfg.frequency = [1.0; NUM_JOINTS];
        let seq = sample_motion(&cfg, 60).unwrap();
        for t in 0..30 {
            for j in 0..NUM_JOINTS {
                let a = seq.frames[t].joints[j].0;
                let b = seq.frames[t + 25].joints[j].0;
                assert!((a - b).norm() < 1e-9, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn acceleration_within_chain_envelope() {
        let tree = default_tree();
        for fam in MotionFamily::ALL {
            let cfg = MotionFamilyConfig::random(fam, 25.0, 17);
            let seq = sample_motion(&cfg, 40).unwrap();
            let kp = root_relative_keypoints(&tree, &seq);
            let omega: Vec<f64> = cfg.frequency.iter().map(|f| TAU * f / cfg.frame_rate).collect();
            let vel: f64 = (0..NUM_JOINTS).map(|j| cfg.amplitude[j] * omega[j]).sum();
            let acc: f64 = (0..NUM_JOINTS).map(|j| cfg.amplitude[j] * omega[j] * omega[j]).sum();
            let max_chain = 2.0;
            let bound = max_chain * (acc + 2.0 * vel * vel);
            for t in 1..39 {
                for j in 0..NUM_JOINTS {
                    let a = (kp[t + 1][j] - kp[t][j] * 2.0 + kp[t - 1][j]).norm();
                    assert!(a.is_finite() && a <= bound, "{} t={t} j={j}: {a} > {bound}", fam.name());
                }
            }
        }
    }

    #[test]
    fn generated_poses_are_valid() {
        for (k, fam) in MotionFamily::ALL.iter().enumerate() {
            let cfg = MotionFamilyConfig::random(*fam, 25.0, k as u64);
            cfg.validate().unwrap();
            let seq = sample_motion(&cfg, 16).unwrap();
            for f in &seq.frames {
                for a in &f.joints {
                    assert!(a.angle() <= PI + 1e-9);
                    assert!(axis_angle_to_rotmat(a).is_valid(1e-9));
                }
            }
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = MotionFamilyConfig::random(MotionFamily::IdleSway, 25.0, 0);
        cfg.frequency[3] = 7.0;
        assert!(sample_motion(&cfg, 4).is_err());
        let mut cfg = MotionFamilyConfig::random(MotionFamily::IdleSway, 25.0, 0);
        cfg.amplitude[2] = 2.0;
        assert!(sample_motion(&cfg, 4).is_err());
    }

    #[test]
    fn noiseless_clip_observes_ground_truth() {
        let cfg = MotionFamilyConfig::random(MotionFamily::WaveLike, 25.0, 8);
        let clip = synthesize_clip(&cfg, 16, &CameraIntrinsics::default(), 0.0, 8).unwrap();
        for (o, g) in clip.observations.iter().zip(&clip.gt_keypoints_2d) {
            for j in 0..NUM_JOINTS {
                assert_eq!([o[j][0], o[j][1], o[j][2]], [g[j].x, g[j].y, 1.0]);
            }
        }
    }

    #[test]
    fn clip_is_self_consistent() {
        let intr = CameraIntrinsics::default();
        let cfg = MotionFamilyConfig::random(MotionFamily::WalkLike, 25.0, 4);
        let clip = synthesize_clip(&cfg, 16, &intr, 3.0, 4).unwrap();
        for t in 0..16 {
            let trans = clip.gt_motion.frames[t].trans;
            let uv = project(&clip.gt_keypoints_3d[t], &intr, &trans).unwrap();
            for j in 0..NUM_JOINTS {
                assert!((uv[j] - clip.gt_keypoints_2d[t][j]).norm() < 1e-9);
            }
            assert_eq!(recover_translation(&clip.gt_weak_cam[t], &intr).unwrap(), trans);
        }
        // the whole body stays in front of the camera and roughly in frame
        assert!(clip.gt_keypoints_2d.iter().flatten().all(|p| p.x > -50.0 && p.x < 274.0 && p.y > -50.0 && p.y < 274.0));
    }

    #[test]
    fn root_stands_upright() {
        let seq = sample_motion(&MotionFamilyConfig::random(MotionFamily::IdleSway, 25.0, 2), 1).unwrap();
        let kp = root_relative_keypoints(&default_tree(), &seq);
        // head above (smaller camera y than) the feet
        assert!(kp[0][15].y < kp[0][10].y - 1.0);
        let r: RotMat = axis_angle_to_rotmat(&base_orientation());
        assert!((r.0 * Vector3::z() - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn observation_noise_std_matches_sigma() {
        let kp = vec![[Vector2::new(100.0, 50.0); NUM_JOINTS]; 420];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let obs = observe(&kp, 3.0, &mut rng).unwrap();
        let devs: Vec<f64> = obs.iter().flatten().flat_map(|o| [o[0] - 100.0, o[1] - 50.0]).collect();
        assert!(devs.len() >= 10_000);
        let var = devs.iter().map(|d| d * d).sum::<f64>() / devs.len() as f64;
        assert!((var.sqrt() - 3.0).abs() / 3.0 < 0.05);
        assert!(observe(&kp, -1.0, &mut rng).is_err());
    }

    #[test]
    fn dataset_split_and_determinism() {
        let cfg = DatasetConfig { n_clips: 10, real_pool: 6, ..Default::default() };
        let a = make_dataset(&cfg).unwrap();
        assert_eq!((a.train.len(), a.eval.len()), (8, 2));
        assert_eq!(a.real_pool.len(), 6);
        let b = make_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        let train: Vec<u64> = a.train.iter().map(|c| c.seed).collect();
        assert!(a.eval.iter().all(|c| !train.contains(&c.seed)));
        assert!(make_dataset(&DatasetConfig { n_clips: 1, ..cfg }).is_err());
    }

    #[test]
    fn real_pool_seeds_disjoint_from_eval() {
        let cfg = DatasetConfig { n_clips: 50, ..Default::default() };
        let eval: Vec<u64> = (40..50).map(|k| derive_seed(cfg.split_seed, STREAM_CLIPS, k)).collect();
        let real: Vec<u64> = (0..cfg.real_pool as u64).map(|k| derive_seed(cfg.split_seed, STREAM_REAL, k)).collect();
        assert!(real.iter().all(|s| !eval.contains(s)));
    }
}
