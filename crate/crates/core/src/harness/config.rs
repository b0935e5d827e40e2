//! Flat `key = value` configuration. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::gradcore::AdamConfig;
use crate::synthmotion::DatasetConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossWeights {
    pub w_3d: f64,
    pub w_2d: f64,
    pub w_smpl_pose: f64,
    pub w_smpl_beta: f64,
    pub w_reg: f64,
    pub w_adv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_3d: 300.0, w_2d: 300.0, w_smpl_pose: 60.0, w_smpl_beta: 0.06, w_reg: 60.0, w_adv: 2.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_3d, self.w_2d, self.w_smpl_pose, self.w_smpl_beta, self.w_reg, self.w_adv];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// The three rows of the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "sep_t")]
    SepT,
    #[serde(rename = "sep_t_reg")]
    SepTReg,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::SepT, Variant::SepTReg];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::SepT => "sep_t",
            Variant::SepTReg => "sep_t_reg",
        }
    }

    /// Row label in the comparison table.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "frame-wise",
            Variant::SepT => "+sep.t",
            Variant::SepTReg => "+sep.t+L_reg",
        }
    }

    pub fn temporal(self) -> bool {
        self != Variant::Baseline
    }

    pub fn reg(self) -> bool {
        self == Variant::SepTReg
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "sep_t" => Ok(Variant::SepT),
            "sep_t_reg" => Ok(Variant::SepTReg),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub window: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub disc_update_every: usize,
    /// Model initialization and batch sampling.
    pub seed: u64,
    /// Dataset draw; follows `seed` when unset.
    pub data_seed: Option<u64>,
    pub variant: Variant,
    pub lsgan_literal: bool,
    pub weights: LossWeights,
    pub lr: f64,
    pub weight_decay: f64,
    pub clips: usize,
    pub noise_px: f64,
    pub fps: f64,
    pub real_pool: usize,
    pub intrinsics: CameraIntrinsics,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 16,
            batch_size: 1,
            iterations: 1500,
            disc_update_every: 5,
            seed: 0,
            data_seed: None,
            variant: Variant::SepTReg,
            lsgan_literal: false,
            weights: LossWeights::default(),
            lr: 1e-4,
            weight_decay: 1e-4,
            clips: 80,
            noise_px: 3.0,
            fps: 25.0,
            real_pool: 256,
            intrinsics: CameraIntrinsics::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "window",
    "batch_size",
    "iterations",
    "disc_update_every",
    "seed",
    "data_seed",
    "variant",
    "lsgan_literal",
    "lambda_3d",
    "lambda_2d",
    "lambda_smpl_pose",
    "lambda_smpl_beta",
    "lambda_reg",
    "lambda_adv",
    "lr",
    "weight_decay",
    "clips",
    "noise_px",
    "fps",
    "real_pool",
    "focal",
    "res",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

impl TrainConfig {
    pub fn with_variant(&self, variant: Variant) -> Self {
        Self { variant, ..self.clone() }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, weight_decay: self.weight_decay, ..AdamConfig::default() }
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            n_clips: self.clips,
            split_seed: self.data_seed(),
            window: self.window,
            frame_rate: self.fps,
            noise_px: self.noise_px,
            intrinsics: self.intrinsics,
            real_pool: self.real_pool,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.disc_update_every < 1 {
            return Err(Error::Config("disc_update_every must be at least 1".into()));
        }
        if self.window < 3 {
            return Err(Error::Config("window must be at least 3 frames".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("lr must be positive and weight_decay non-negative".into()));
        }
        if self.real_pool < 1 {
            return Err(Error::Config("real_pool must be at least 1".into()));
        }
        CameraIntrinsics::new(self.intrinsics.focal, self.intrinsics.res)?;
        self.weights.validate()
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "window" => self.window = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "iterations" => self.iterations = parse_value(key, value)?,
            "disc_update_every" => self.disc_update_every = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "data_seed" => self.data_seed = Some(parse_value(key, value)?),
            "variant" => self.variant = value.parse()?,
            "lsgan_literal" => self.lsgan_literal = parse_value(key, value)?,
            "lambda_3d" => self.weights.w_3d = parse_value(key, value)?,
            "lambda_2d" => self.weights.w_2d = parse_value(key, value)?,
            "lambda_smpl_pose" => self.weights.w_smpl_pose = parse_value(key, value)?,
            "lambda_smpl_beta" => self.weights.w_smpl_beta = parse_value(key, value)?,
            "lambda_reg" => self.weights.w_reg = parse_value(key, value)?,
            "lambda_adv" => self.weights.w_adv = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "weight_decay" => self.weight_decay = parse_value(key, value)?,
            "clips" => self.clips = parse_value(key, value)?,
            "noise_px" => self.noise_px = parse_value(key, value)?,
            "fps" => self.fps = parse_value(key, value)?,
            "real_pool" => self.real_pool = parse_value(key, value)?,
            "focal" => self.intrinsics.focal = parse_value(key, value)?,
            "res" => self.intrinsics.res = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", n + 1)));
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key with its effective value, sorted by key.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let w = &self.weights;
        let mut m = BTreeMap::new();
        for &k in KEYS {
            let v = match k {
                "window" => self.window.to_string(),
                "batch_size" => self.batch_size.to_string(),
                "iterations" => self.iterations.to_string(),
                "disc_update_every" => self.disc_update_every.to_string(),
                "seed" => self.seed.to_string(),
                "data_seed" => self.data_seed().to_string(),
                "variant" => self.variant.to_string(),
                "lsgan_literal" => self.lsgan_literal.to_string(),
                "lambda_3d" => w.w_3d.to_string(),
                "lambda_2d" => w.w_2d.to_string(),
                "lambda_smpl_pose" => w.w_smpl_pose.to_string(),
                "lambda_smpl_beta" => w.w_smpl_beta.to_string(),
                "lambda_reg" => w.w_reg.to_string(),
                "lambda_adv" => w.w_adv.to_string(),
                "lr" => self.lr.to_string(),
                "weight_decay" => self.weight_decay.to_string(),
                "clips" => self.clips.to_string(),
                "noise_px" => self.noise_px.to_string(),
                "fps" => self.fps.to_string(),
                "real_pool" => self.real_pool.to_string(),
                "focal" => self.intrinsics.focal.to_string(),
                "res" => self.intrinsics.res.to_string(),
                _ => unreachable!(),
            };
            m.insert(k, v);
        }
        m
    }

    /// Canonical text: one sorted `key = value` line per key. Parses back
    /// to an equal config.
    pub fn to_canonical_string(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_canonical_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_weights() {
        let w = LossWeights::default();
        assert_eq!((w.w_3d, w.w_2d, w.w_smpl_pose, w.w_smpl_beta, w.w_reg, w.w_adv), (300.0, 300.0, 60.0, 0.06, 60.0, 2.0));
        let c = TrainConfig::default();
        assert_eq!((c.window, c.disc_update_every), (16, 5));
        assert_eq!((c.lr, c.weight_decay), (1e-4, 1e-4));
    }

    #[test]
    fn parse_overrides_and_comments() {
        let c = TrainConfig::parse("# demo\nseed = 7\n\niterations=12  # short\nvariant = baseline\nfocal = 1000\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.iterations, 12);
        assert_eq!(c.variant, Variant::Baseline);
        assert_eq!(c.intrinsics.focal, 1000.0);
        assert_eq!(c.data_seed(), 7);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        assert!(matches!(TrainConfig::parse("learning_rate = 1"), Err(Error::Config(_))));
        assert!(TrainConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(TrainConfig::parse("seed 1").is_err());
        assert!(TrainConfig::parse("seed = x").is_err());
        assert!(TrainConfig::parse("disc_update_every = 0").is_err());
        assert!(TrainConfig::parse("lambda_reg = -1").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = TrainConfig::parse("seed = 3\nlambda_adv = 0.5\nvariant = sep_t").unwrap();
        let back = TrainConfig::parse(&c.to_canonical_string()).unwrap();
        assert_eq!(back.to_canonical_string(), c.to_canonical_string());
        assert_eq!(back.hash(), c.hash());
        assert_ne!(c.hash(), TrainConfig::default().hash());
    }
}
