//! Central finite differences against the analytic gradients of the full
//! generator and discriminator losses, one sampled parameter block per
//! component.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{TrainConfig, Variant};
use super::losses::{discriminator_loss, generator_loss, sixd_sequence, ClipTargets};
use super::train::Model;
use crate::error::Result;
use crate::gradcore::{ParamId, ParamStore, Tape};
use crate::models::discriminator::pose_inputs;
use crate::skeleton::default_tree;
use crate::synthmotion::{sample_motion, synthesize_clip, MotionFamily, MotionFamilyConfig, TrainingClip};

pub const FD_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;
/// Gradient magnitudes below this are compared in absolute terms. The
/// checked losses are O(100), so central-difference roundoff alone is
/// about `ε·|L|/h ≈ 5e-9`; components far below 1e-3 cannot be resolved
/// to 1e-5 relative accuracy.
pub const MAGNITUDE_FLOOR: f64 = 1e-3;
const ENTRIES_PER_BLOCK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub loss: &'static str,
    pub component: &'static str,
    pub block: String,
    pub entries: usize,
    pub max_rel_err: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Compares `d loss / d block` at a few entries: half chosen at random,
/// half the largest analytic components.
pub fn check_block(
    store: &mut ParamStore,
    id: ParamId,
    analytic: &[f64],
    rng: &mut impl Rng,
    loss: &mut dyn FnMut(&ParamStore) -> Result<f64>,
) -> Result<(usize, f64)> {
    let n = analytic.len();
    let mut idx: Vec<usize> = (0..ENTRIES_PER_BLOCK / 2).map(|_| rng.random_range(0..n)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| analytic[*b].abs().total_cmp(&analytic[*a].abs()));
    idx.extend(order.into_iter().take(ENTRIES_PER_BLOCK / 2));
    idx.sort_unstable();
    idx.dedup();
    let mut worst: f64 = 0.0;
    for &i in &idx {
        let orig = store.get(id).values[i];
        store.get_mut(id).values[i] = orig + FD_STEP;
        let up = loss(store)?;
        store.get_mut(id).values[i] = orig - FD_STEP;
        let down = loss(store)?;
        store.get_mut(id).values[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok((idx.len(), worst))
}

fn small_clip(seed: u64, frames: usize) -> Result<TrainingClip> {
    let cfg = MotionFamilyConfig::random(MotionFamily::WalkLike, 25.0, seed);
    synthesize_clip(&cfg, frames, &crate::camera::CameraIntrinsics::default(), 3.0, seed)
}

const GENERATOR_BLOCKS: &[(&str, &str)] = &[
    ("observation encoder", "gen.j04.enc_feat.w"),
    ("camera/shape encoder", "gen.j04.enc_cam.w"),
    ("gru layer 1", "gen.j04.gru1.w_n"),
    ("gru layer 2", "gen.j04.gru2.u_z"),
    ("lift", "gen.j04.lift.w"),
    ("pose head", "gen.j04.head.w"),
    ("root pose head", "gen.j00.head.b"),
    ("shape regressor", "gen.w_beta.w"),
    ("camera regressor", "gen.w_cam.w"),
    ("discriminator", "disc.layer1.w"),
];

const DISCRIMINATOR_BLOCKS: &[(&str, &str)] = &[
    ("discriminator layer 1", "disc.layer1.w"),
    ("discriminator layer 2", "disc.layer2.w"),
    ("discriminator attention", "disc.attention.w"),
    ("discriminator output", "disc.output.b"),
];

/// Runs the suite on a small temporal model with the regularizer active.
pub fn run_gradient_checks(seed: u64) -> Result<Vec<GradCheck>> {
    let frames = 4;
    let cfg = TrainConfig { seed, window: frames, variant: Variant::SepTReg, ..TrainConfig::default() };
    let Model { generator, discriminator, mut store } = Model::new(&cfg);
    let tree = default_tree();
    let clips = [small_clip(seed, frames)?, small_clip(seed + 1, frames)?];
    let targets: Vec<ClipTargets> = clips.iter().map(ClipTargets::from_clip).collect();
    let intr = cfg.intrinsics;
    let weights = cfg.weights;

    let gen_loss = |s: &ParamStore| -> Result<(Tape, crate::gradcore::Var)> {
        let mut tape = Tape::new();
        let v0 = generator.forward(&mut tape, s, &clips[0].observations)?;
        let v1 = generator.forward(&mut tape, s, &clips[1].observations)?;
        let batch = [(&v0, &targets[0]), (&v1, &targets[1])];
        let (total, _) = generator_loss(&mut tape, s, &tree, &intr, &batch, &discriminator, &weights, true)?;
        Ok((tape, total))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut results = Vec::new();

    store.zero_grad();
    let (mut tape, total) = gen_loss(&store)?;
    tape.backward(total, &mut store)?;
    for (component, name) in GENERATOR_BLOCKS {
        let id = store.id_of(name).expect("known block");
        let analytic = store.get(id).grad.clone();
        let mut f = |s: &ParamStore| -> Result<f64> {
            let (tape, v) = gen_loss(s)?;
            Ok(tape.scalar(v))
        };
        let (entries, err) = check_block(&mut store, id, &analytic, &mut rng, &mut f)?;
        results.push(GradCheck { loss: "generator", component, block: name.to_string(), entries, max_rel_err: err });
    }

    // discriminator loss on a real motion and the current generator output
    let fake = generator.predict(&store, &clips[0].observations)?.pose6d_from_rotmats();
    let real_cfg = MotionFamilyConfig::random(MotionFamily::WaveLike, 25.0, seed + 7);
    let real = sixd_sequence(&sample_motion(&real_cfg, frames)?.frames);
    let disc_loss = |s: &ParamStore| -> Result<(Tape, crate::gradcore::Var)> {
        let mut tape = Tape::new();
        let r = pose_inputs(&mut tape, &real);
        let f = pose_inputs(&mut tape, &fake);
        let loss = discriminator_loss(&mut tape, s, &discriminator, &[r], &[f], false)?;
        Ok((tape, loss))
    };
    store.zero_grad();
    let (mut tape, loss) = disc_loss(&store)?;
    tape.backward(loss, &mut store)?;
    for (component, name) in DISCRIMINATOR_BLOCKS {
        let id = store.id_of(name).expect("known block");
        let analytic = store.get(id).grad.clone();
        let mut f = |s: &ParamStore| -> Result<f64> {
            let (tape, v) = disc_loss(s)?;
            Ok(tape.scalar(v))
        };
        let (entries, err) = check_block(&mut store, id, &analytic, &mut rng, &mut f)?;
        results.push(GradCheck { loss: "discriminator", component, block: name.to_string(), entries, max_rel_err: err });
    }
    // nothing from the discriminator loss reaches the generator
    let leaked = store.ids_with_prefix("gen.").iter().any(|id| store.get(*id).grad.iter().any(|g| *g != 0.0));
    results.push(GradCheck {
        loss: "discriminator",
        component: "generator detachment",
        block: "gen.*".into(),
        entries: store.ids_with_prefix("gen.").len(),
        max_rel_err: if leaked { f64::INFINITY } else { 0.0 },
    });
    Ok(results)
}
