//! Adversarial training loop, evaluation and the three-way ablation.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{TrainConfig, Variant};
use super::losses::{discriminator_loss, generator_loss, sixd_sequence, ClipTargets, LossBreakdown};
use crate::error::{Error, Result};
use crate::gradcore::{AdamState, ParamId, ParamStore, Tape};
use crate::metrics::{report, JointTrajectory, MetricReport};
use crate::models::discriminator::pose_inputs;
use crate::models::{Generator, GeneratorConfig, MotionDiscriminator, SIXD_DIM};
use crate::skeleton::{default_tree, forward_kinematics_rotmats, KinematicTree, NUM_JOINTS};
use crate::synthmotion::{derive_seed, make_dataset, Dataset, TrainingClip};

const STREAM_GEN_INIT: u64 = 10;
const STREAM_DISC_INIT: u64 = 11;
const STREAM_BATCHES: u64 = 12;

type SixDSeq = Vec<[[f64; SIXD_DIM]; NUM_JOINTS]>;

/// Generator and discriminator sharing one parameter store (`gen.*` and
/// `disc.*` blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub generator: Generator,
    pub discriminator: MotionDiscriminator,
    pub store: ParamStore,
}

impl Model {
    /// Generator and discriminator draw from separate seed streams, so the
    /// discriminator and the generator blocks common to all variants start
    /// identical across variants.
    pub fn new(cfg: &TrainConfig) -> Self {
        let mut store = ParamStore::new();
        let mut g_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_GEN_INIT, 0));
        let mut d_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_DISC_INIT, 0));
        let gcfg = GeneratorConfig { temporal: cfg.variant.temporal(), intrinsics: cfg.intrinsics };
        let generator = Generator::new(gcfg, &mut store, &mut g_rng);
        let discriminator = MotionDiscriminator::new(&mut store, &mut d_rng);
        Self { generator, discriminator, store }
    }

    pub fn generator_params(&self) -> Vec<ParamId> {
        self.store.ids_with_prefix("gen.")
    }

    pub fn discriminator_params(&self) -> Vec<ParamId> {
        self.store.ids_with_prefix("disc.")
    }

    pub fn arch_manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "generator": self.generator.arch_manifest(),
            "discriminator": { "input": crate::models::discriminator::DISC_INPUT, "hidden": crate::models::discriminator::DISC_HIDDEN },
        })
    }

    /// Rebuilds a model from a checkpoint's manifest and values.
    pub fn from_checkpoint(manifest: &crate::gradcore::checkpoint::CheckpointManifest, values: &ParamStore) -> Result<Self> {
        let g = &manifest.arch["generator"];
        let temporal = g["temporal"].as_bool().ok_or_else(|| Error::Format("manifest lacks generator.temporal".into()))?;
        let focal = g["focal"].as_f64().ok_or_else(|| Error::Format("manifest lacks generator.focal".into()))?;
        let res = g["res"].as_f64().ok_or_else(|| Error::Format("manifest lacks generator.res".into()))?;
        let cfg = TrainConfig {
            variant: if temporal { Variant::SepT } else { Variant::Baseline },
            intrinsics: crate::camera::CameraIntrinsics::new(focal, res)?,
            seed: manifest.seed,
            ..TrainConfig::default()
        };
        let mut model = Self::new(&cfg);
        model.store.load_values_from(values)?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub generator: LossBreakdown,
    pub discriminator: Option<f64>,
}

pub struct Trainer<'a> {
    pub cfg: TrainConfig,
    pub model: Model,
    pub iteration: usize,
    data: &'a Dataset,
    targets: Vec<ClipTargets>,
    real: Vec<SixDSeq>,
    tree: KinematicTree,
    gen_opt: AdamState,
    disc_opt: AdamState,
    rng: ChaCha8Rng,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &TrainConfig, data: &'a Dataset) -> Result<Self> {
        cfg.validate()?;
        if data.train.is_empty() || data.real_pool.is_empty() {
            return Err(Error::Config("training needs train clips and real motions".into()));
        }
        let model = Model::new(cfg);
        let gen_opt = AdamState::new(cfg.adam(), &model.store, model.generator_params());
        let disc_opt = AdamState::new(cfg.adam(), &model.store, model.discriminator_params());
        Ok(Self {
            cfg: cfg.clone(),
            targets: data.train.iter().map(ClipTargets::from_clip).collect(),
            real: data.real_pool.iter().map(|m| sixd_sequence(&m.frames)).collect(),
            tree: default_tree(),
            gen_opt,
            disc_opt,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_BATCHES, 0)),
            model,
            iteration: 0,
            data,
        })
    }

    /// One iteration (1-based numbering): generator step always,
    /// discriminator step when the iteration is a multiple of the cadence.
    pub fn step(&mut self) -> Result<IterationLog> {
        let k = self.iteration + 1;
        let cfg = &self.cfg;
        let batch: Vec<usize> = (0..cfg.batch_size).map(|_| self.rng.random_range(0..self.data.train.len())).collect();

        let model = &mut self.model;
        let mut tape = Tape::new();
        let mut outs = Vec::with_capacity(batch.len());
        for &i in &batch {
            outs.push(model.generator.forward(&mut tape, &model.store, &self.data.train[i].observations)?);
        }
        let pairs: Vec<_> = outs.iter().zip(batch.iter().map(|&i| &self.targets[i])).collect();
        let (total, breakdown) = generator_loss(
            &mut tape,
            &model.store,
            &self.tree,
            &cfg.intrinsics,
            &pairs,
            &model.discriminator,
            &cfg.weights,
            cfg.variant.reg(),
        )?;
        if let Some(term) = breakdown.unweighted.first_non_finite() {
            return Err(Error::NonFiniteLoss { iteration: k, term: term.to_string() });
        }
        if !breakdown.total.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: k, term: "total".into() });
        }
        let fakes: Vec<SixDSeq> = outs
            .iter()
            .map(|v| {
                v.rotmats
                    .iter()
                    .map(|frame| std::array::from_fn(|j| sixd_of_rowmajor(tape.value(frame[j]))))
                    .collect()
            })
            .collect();
        tape.backward(total, &mut model.store)?;
        let disc_ids = self.disc_opt.params().to_vec();
        model.store.zero_grad_of(&disc_ids);
        self.gen_opt.adam_step(&mut model.store);

        let mut disc_value = None;
        if k % cfg.disc_update_every == 0 {
            let reals: Vec<&SixDSeq> =
                (0..cfg.batch_size).map(|_| &self.real[self.rng.random_range(0..self.real.len())]).collect();
            let mut tape = Tape::new();
            let real_vars: Vec<_> = reals.iter().map(|s| pose_inputs(&mut tape, s)).collect();
            let fake_vars: Vec<_> = fakes.iter().map(|s| pose_inputs(&mut tape, s)).collect();
            let loss = discriminator_loss(&mut tape, &model.store, &model.discriminator, &real_vars, &fake_vars, cfg.lsgan_literal)?;
            let v = tape.scalar(loss);
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss { iteration: k, term: "discriminator".into() });
            }
            tape.backward(loss, &mut model.store)?;
            self.disc_opt.adam_step(&mut model.store);
            disc_value = Some(v);
        }
        self.iteration = k;
        Ok(IterationLog { iteration: k, generator: breakdown, discriminator: disc_value })
    }
}

fn sixd_of_rowmajor(r: &[f64]) -> [f64; SIXD_DIM] {
    crate::models::diffgeom::SIXD_FROM_ROWMAJOR.map(|i| r[i])
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub curves: Vec<IterationLog>,
}

pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg, data)?;
    let mut curves = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        curves.push(trainer.step()?);
    }
    Ok(TrainOutcome { model: trainer.model, curves })
}

/// Root-relative predicted keypoints in meters.
pub fn predict_keypoints(model: &Model, clip: &TrainingClip) -> Result<Vec<[Vector3<f64>; NUM_JOINTS]>> {
    let out = model.generator.predict(&model.store, &clip.observations)?;
    let tree = default_tree();
    Ok(out
        .pose_rotmats
        .iter()
        .map(|r| forward_kinematics_rotmats(&tree, r, &out.shape, &Vector3::zeros()))
        .collect())
}

/// Back-projects each observed pixel at its true depth: what the noisy 2D
/// observations alone give with an oracle for depth and root position.
pub fn observation_oracle(clip: &TrainingClip) -> Vec<[Vector3<f64>; NUM_JOINTS]> {
    let c = clip.intrinsics.principal_point();
    let f = clip.intrinsics.focal;
    clip.observations
        .iter()
        .zip(&clip.gt_keypoints_3d)
        .zip(&clip.gt_motion.frames)
        .map(|((obs, gt), frame)| {
            std::array::from_fn(|j| {
                let z = gt[j].z + frame.trans.z;
                Vector3::new((obs[j][0] - c) * z / f, (obs[j][1] - c) * z / f, z) - frame.trans
            })
        })
        .collect()
}

fn mean_report(reports: &[MetricReport]) -> MetricReport {
    let n = reports.len() as f64;
    let sum = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    MetricReport { mpjpe: sum(|r| r.mpjpe), pa_mpjpe: sum(|r| r.pa_mpjpe), acc: sum(|r| r.acc), acc_err: sum(|r| r.acc_err) }
}

/// Metrics of `pred` against `gt`, both `[t][j]` in meters.
pub fn clip_report(pred: &[[Vector3<f64>; NUM_JOINTS]], gt: &[[Vector3<f64>; NUM_JOINTS]], fps: f64) -> Result<MetricReport> {
    report(&JointTrajectory::from_meters(pred, fps)?, &JointTrajectory::from_meters(gt, fps)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    /// Per-clip metrics averaged over clips, millimeters.
    pub metrics: MetricReport,
    pub observation_oracle: MetricReport,
    pub clips: usize,
}

pub fn evaluate(model: &Model, clips: &[TrainingClip]) -> Result<Evaluation> {
    if clips.is_empty() {
        return Err(Error::Config("no evaluation clips".into()));
    }
    let mut learned = Vec::with_capacity(clips.len());
    let mut oracle = Vec::with_capacity(clips.len());
    for clip in clips {
        let fps = clip.gt_motion.frame_rate;
        learned.push(clip_report(&predict_keypoints(model, clip)?, &clip.gt_keypoints_3d, fps)?);
        oracle.push(clip_report(&observation_oracle(clip), &clip.gt_keypoints_3d, fps)?);
    }
    Ok(Evaluation { metrics: mean_report(&learned), observation_oracle: mean_report(&oracle), clips: clips.len() })
}

/// Everything needed to reproduce one variant's numbers.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub variant: Variant,
    pub seed: u64,
    pub config_hash: String,
    pub eval_data_hash: String,
    pub iterations: usize,
    pub mpjpe: f64,
    pub pa_mpjpe: f64,
    pub acc: f64,
    pub acc_err: f64,
    pub observation_oracle: MetricReport,
    pub final_losses: LossBreakdown,
    pub final_discriminator_loss: Option<f64>,
    pub config: std::collections::BTreeMap<&'static str, String>,
}

pub struct VariantRun {
    pub report: ExperimentReport,
    pub outcome: TrainOutcome,
}

/// SHA-256 over the serialized evaluation clips.
pub fn eval_data_hash(clips: &[TrainingClip]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for c in clips {
        h.update(super::formats::write_motion(&c.gt_motion).as_bytes());
        h.update(super::formats::write_observations(c).as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains and evaluates one variant on `data`.
pub fn run_variant(cfg: &TrainConfig, data: &Dataset) -> Result<VariantRun> {
    let outcome = train(cfg, data)?;
    let eval = evaluate(&outcome.model, &data.eval)?;
    let last = outcome.curves.last();
    let report = ExperimentReport {
        variant: cfg.variant,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        eval_data_hash: eval_data_hash(&data.eval),
        iterations: cfg.iterations,
        mpjpe: eval.metrics.mpjpe,
        pa_mpjpe: eval.metrics.pa_mpjpe,
        acc: eval.metrics.acc,
        acc_err: eval.metrics.acc_err,
        observation_oracle: eval.observation_oracle,
        final_losses: last.map(|l| l.generator).unwrap_or_default(),
        final_discriminator_loss: outcome.curves.iter().rev().find_map(|l| l.discriminator),
        config: cfg.entries(),
    };
    Ok(VariantRun { report, outcome })
}

/// Runs the frame-wise baseline, +sep.t and +sep.t+L_reg on one dataset,
/// in table order. Variants run on separate threads when `parallel`.
pub fn run_ablation(base: &TrainConfig, parallel: bool) -> Result<Vec<VariantRun>> {
    base.validate()?;
    let data = make_dataset(&base.dataset())?;
    let cfgs: Vec<TrainConfig> = Variant::ALL.iter().map(|v| base.with_variant(*v)).collect();
    if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = cfgs.iter().map(|c| s.spawn(|| run_variant(c, &data))).collect();
            handles.into_iter().map(|h| h.join().expect("variant thread panicked")).collect()
        })
    } else {
        cfgs.iter().map(|c| run_variant(c, &data)).collect()
    }
}

/// Fixed-width comparison table, one row per variant.
pub fn ablation_table(reports: &[&ExperimentReport]) -> String {
    let mut s = format!("{:<14} {:>10} {:>10} {:>10} {:>10}\n", "variant", "MPJPE", "PA-MPJPE", "ACC", "ACC-ERR");
    for r in reports {
        s.push_str(&format!(
            "{:<14} {:>10.3} {:>10.3} {:>10.3} {:>10.3}\n",
            r.variant.label(),
            r.mpjpe,
            r.pa_mpjpe,
            r.acc,
            r.acc_err
        ));
    }
    s
}
