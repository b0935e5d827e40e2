//! Text formats for motions, observations and loss curves, and the
//! on-disk dataset layout.
//!
//! Motion file:
//!
//! ```text
//! MSEQ v1 T=<n> J=24 fps=<r>
//! <72 axis-angle values> <3 translation values>     one line per frame
//! BETA <10 values>
//! ```
//!
//! Observation file:
//!
//! ```text
//! OBS v1 T=<n> J=24 focal=<f> res=<r> seed=<k>
//! <24×(u v conf)>                                   one line per frame
//! GT2D <24×(u v)>                                   one line per frame
//! CAM <s> <tx> <ty>                                 one line per frame
//! ```
//!
//! Numbers are written with 17 significant digits, so values round-trip
//! exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};

use super::losses::LossTerms;
use super::train::{ablation_table, ExperimentReport, IterationLog, VariantRun};
use crate::camera::{CameraIntrinsics, WeakCamera};
use crate::error::{Error, Result};
use crate::models::ObsFrame;
use crate::rot3::AxisAngle;
use crate::skeleton::{default_tree, MotionSequence, PoseFrame, ShapeParams, NUM_BETAS, NUM_JOINTS};
use crate::synthmotion::{root_relative_keypoints, Dataset, TrainingClip};

fn num(out: &mut String, v: f64) {
    if !out.is_empty() && !out.ends_with('\n') && !out.ends_with(' ') {
        out.push(' ');
    }
    let _ = write!(out, "{v:.16e}");
}

fn parse_nums(line: &str, expect: usize, what: &str) -> Result<Vec<f64>> {
    let v = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Format(format!("{what}: bad number {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != expect {
        return Err(Error::Format(format!("{what}: expected {expect} values, got {}", v.len())));
    }
    Ok(v)
}

/// Parses `key=value` header fields after the magic words.
fn header_field<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    header
        .split_whitespace()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| Error::Format(format!("header lacks {key}=")))
}

fn header_num<T: std::str::FromStr>(header: &str, key: &str) -> Result<T> {
    header_field(header, key)?.parse().map_err(|_| Error::Format(format!("header field {key} is malformed")))
}

pub fn write_motion(seq: &MotionSequence) -> String {
    let mut s = format!("MSEQ v1 T={} J={NUM_JOINTS} fps={}\n", seq.len(), seq.frame_rate);
    for f in &seq.frames {
        let mut line = String::new();
        for a in &f.joints {
            for v in a.0.iter() {
                num(&mut line, *v);
            }
        }
        for v in f.trans.iter() {
            num(&mut line, *v);
        }
        s.push_str(&line);
        s.push('\n');
    }
    s.push_str("BETA");
    for b in seq.shape.beta {
        let _ = write!(s, " {b:.16e}");
    }
    s.push('\n');
    s
}

pub fn parse_motion(text: &str) -> Result<MotionSequence> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty motion file".into()))?;
    if !header.starts_with("MSEQ v1 ") {
        return Err(Error::Format("missing MSEQ v1 header".into()));
    }
    let frames: usize = header_num(header, "T")?;
    let joints: usize = header_num(header, "J")?;
    let fps: f64 = header_num(header, "fps")?;
    if joints != NUM_JOINTS {
        return Err(Error::Format(format!("expected J={NUM_JOINTS}, got {joints}")));
    }
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let line = lines.next().ok_or_else(|| Error::Format(format!("motion ends before frame {t}")))?;
        let v = parse_nums(line, NUM_JOINTS * 3 + 3, "motion frame")?;
        let mut f = PoseFrame::rest();
        for j in 0..NUM_JOINTS {
            f.joints[j] = AxisAngle::new(v[3 * j], v[3 * j + 1], v[3 * j + 2]);
        }
        let o = NUM_JOINTS * 3;
        f.trans = Vector3::new(v[o], v[o + 1], v[o + 2]);
        out.push(f);
    }
    let beta_line = lines.next().ok_or_else(|| Error::Format("missing BETA line".into()))?;
    let rest = beta_line.strip_prefix("BETA").ok_or_else(|| Error::Format("missing BETA line".into()))?;
    let beta = parse_nums(rest, NUM_BETAS, "BETA")?;
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::Format("trailing content after BETA".into()));
    }
    MotionSequence::new(out, ShapeParams { beta: beta.try_into().expect("10 betas") }, fps)
}

pub fn write_observations(clip: &TrainingClip) -> String {
    let intr = clip.intrinsics;
    let mut s = format!(
        "OBS v1 T={} J={NUM_JOINTS} focal={} res={} seed={}\n",
        clip.len(),
        intr.focal,
        intr.res,
        clip.seed
    );
    for o in &clip.observations {
        let mut line = String::new();
        for v in o.iter().flatten() {
            num(&mut line, *v);
        }
        s.push_str(&line);
        s.push('\n');
    }
    for g in &clip.gt_keypoints_2d {
        s.push_str("GT2D");
        for p in g {
            let _ = write!(s, " {:.16e} {:.16e}", p.x, p.y);
        }
        s.push('\n');
    }
    for c in &clip.gt_weak_cam {
        let _ = writeln!(s, "CAM {:.16e} {:.16e} {:.16e}", c.s, c.tx, c.ty);
    }
    s
}

/// Rebuilds a clip from its motion and observation files. 3D keypoints
/// are recomputed from the motion.
pub fn parse_clip(motion: &str, observations: &str) -> Result<TrainingClip> {
    let gt_motion = parse_motion(motion)?;
    let mut lines = observations.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty observation file".into()))?;
    if !header.starts_with("OBS v1 ") {
        return Err(Error::Format("missing OBS v1 header".into()));
    }
    let frames: usize = header_num(header, "T")?;
    if frames != gt_motion.len() {
        return Err(Error::Format(format!("observations have {frames} frames, motion {}", gt_motion.len())));
    }
    if header_num::<usize>(header, "J")? != NUM_JOINTS {
        return Err(Error::Format(format!("expected J={NUM_JOINTS}")));
    }
    let intrinsics = CameraIntrinsics::new(header_num(header, "focal")?, header_num(header, "res")?)?;
    let seed: u64 = header_num(header, "seed")?;
    let mut obs: Vec<ObsFrame> = Vec::with_capacity(frames);
    for _ in 0..frames {
        let v = parse_nums(lines.next().unwrap_or(""), NUM_JOINTS * 3, "observation frame")?;
        obs.push(std::array::from_fn(|j| [v[3 * j], v[3 * j + 1], v[3 * j + 2]]));
    }
    let mut kp2d = Vec::with_capacity(frames);
    for _ in 0..frames {
        let line = lines.next().and_then(|l| l.strip_prefix("GT2D")).ok_or_else(|| Error::Format("missing GT2D line".into()))?;
        let v = parse_nums(line, NUM_JOINTS * 2, "GT2D")?;
        kp2d.push(std::array::from_fn(|j| Vector2::new(v[2 * j], v[2 * j + 1])));
    }
    let mut cams = Vec::with_capacity(frames);
    for _ in 0..frames {
        let line = lines.next().and_then(|l| l.strip_prefix("CAM")).ok_or_else(|| Error::Format("missing CAM line".into()))?;
        let v = parse_nums(line, 3, "CAM")?;
        cams.push(WeakCamera { s: v[0], tx: v[1], ty: v[2] });
    }
    let gt_keypoints_3d = root_relative_keypoints(&default_tree(), &gt_motion);
    Ok(TrainingClip {
        gt_motion,
        gt_weak_cam: cams,
        gt_keypoints_3d,
        gt_keypoints_2d: kp2d,
        observations: obs,
        intrinsics,
        seed,
    })
}

fn clip_stem(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("clip_{k:04}"))
}

pub fn write_clips(dir: &Path, clips: &[TrainingClip]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, c) in clips.iter().enumerate() {
        let stem = clip_stem(dir, k);
        std::fs::write(stem.with_extension("mseq"), write_motion(&c.gt_motion))?;
        std::fs::write(stem.with_extension("obs"), write_observations(c))?;
    }
    Ok(())
}

/// Reads `clip_NNNN.{mseq,obs}` pairs in index order.
pub fn read_clips(dir: &Path) -> Result<Vec<TrainingClip>> {
    let mut clips = Vec::new();
    loop {
        let stem = clip_stem(dir, clips.len());
        let m = stem.with_extension("mseq");
        if !m.exists() {
            break;
        }
        let motion = std::fs::read_to_string(&m)?;
        let obs = std::fs::read_to_string(stem.with_extension("obs"))?;
        clips.push(parse_clip(&motion, &obs)?);
    }
    Ok(clips)
}

/// `DIR/train`, `DIR/eval` (paired clips) and `DIR/real` (motions only).
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    write_clips(&dir.join("train"), &data.train)?;
    write_clips(&dir.join("eval"), &data.eval)?;
    let real = dir.join("real");
    std::fs::create_dir_all(&real)?;
    for (k, m) in data.real_pool.iter().enumerate() {
        std::fs::write(real.join(format!("motion_{k:04}.mseq")), write_motion(m))?;
    }
    Ok(())
}

/// Evaluation clips under `dir/eval`, or directly in `dir`.
pub fn read_eval_clips(dir: &Path) -> Result<Vec<TrainingClip>> {
    let sub = dir.join("eval");
    let clips = if sub.is_dir() { read_clips(&sub)? } else { read_clips(dir)? };
    if clips.is_empty() {
        return Err(Error::Io(format!("no clips found under {}", dir.display())));
    }
    Ok(clips)
}

/// One row per iteration: weighted generator terms, total, and the
/// discriminator loss (empty on iterations without an update).
pub fn curves_csv(curves: &[IterationLog]) -> String {
    let mut s = String::from("iteration");
    for n in LossTerms::NAMES {
        let _ = write!(s, ",{n}");
    }
    s.push_str(",total,discriminator\n");
    for l in curves {
        let _ = write!(s, "{}", l.iteration);
        for v in l.generator.weighted.values() {
            let _ = write!(s, ",{v:e}");
        }
        let _ = write!(s, ",{:e},", l.generator.total);
        if let Some(d) = l.discriminator {
            let _ = write!(s, "{d:e}");
        }
        s.push('\n');
    }
    s
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const REPORT_FILE: &str = "report.json";
pub const CURVES_FILE: &str = "curves.csv";

/// Checkpoint manifest architecture: the model's own description plus the
/// variant and configuration hash it was trained under.
pub fn run_manifest(run: &VariantRun) -> serde_json::Value {
    let mut arch = run.outcome.model.arch_manifest();
    arch["variant"] = serde_json::Value::from(run.report.variant.name());
    arch["config_hash"] = serde_json::Value::from(run.report.config_hash.clone());
    arch
}

pub fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes checkpoint, report and loss curves of one trained variant.
pub fn write_run(dir: &Path, run: &VariantRun) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let model = &run.outcome.model;
    crate::gradcore::checkpoint::save(
        &dir.join(CHECKPOINT_FILE),
        &model.store,
        run.report.seed,
        run.report.iterations as u64,
        run_manifest(run),
    )?;
    std::fs::write(dir.join(REPORT_FILE), to_json(&run.report)?)?;
    std::fs::write(dir.join(CURVES_FILE), curves_csv(&run.outcome.curves))?;
    Ok(())
}

/// One subdirectory per variant, plus `ablation.json` and `table.txt`.
pub fn write_ablation(dir: &Path, runs: &[VariantRun]) -> Result<()> {
    for run in runs {
        write_run(&dir.join(run.report.variant.name()), run)?;
    }
    let reports: Vec<&ExperimentReport> = runs.iter().map(|r| &r.report).collect();
    std::fs::write(dir.join("ablation.json"), to_json(&reports)?)?;
    std::fs::write(dir.join("table.txt"), ablation_table(&reports))?;
    Ok(())
}
