//! Motion discriminator: a per-frame MLP over the 24 joints' 6D poses,
//! softmax attention pooling over time, and a scalar head.

use rand::Rng;

use super::SIXD_DIM;
use crate::error::{Error, Result};
use crate::gradcore::{Linear, ParamId, ParamStore, Tape, Var};
use crate::skeleton::NUM_JOINTS;

pub const DISC_HIDDEN: usize = 256;
pub const DISC_INPUT: usize = NUM_JOINTS * SIXD_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDiscriminator {
    pub layer1: Linear,
    pub layer2: Linear,
    pub attention: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    Attention,
    /// Forces equal weights `1/T`; used to isolate the attention path.
    Uniform,
}

impl MotionDiscriminator {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R) -> Self {
        Self {
            layer1: Linear::new(store, "disc.layer1", DISC_INPUT, DISC_HIDDEN, rng),
            layer2: Linear::new(store, "disc.layer2", DISC_HIDDEN, DISC_HIDDEN, rng),
            attention: Linear::new(store, "disc.attention", DISC_HIDDEN, 1, rng),
            output: Linear::new(store, "disc.output", DISC_HIDDEN, 1, rng),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        [self.layer1, self.layer2, self.attention, self.output].iter().flat_map(|l| l.params()).collect()
    }

    /// Scores a sequence of per-frame poses, each a 144-vector of the 24
    /// joints' 6D rotations. Returns the scalar score and the attention
    /// weights node.
    pub fn forward_with(&self, tape: &mut Tape, store: &ParamStore, frames: &[Var], pooling: Pooling) -> Result<(Var, Var)> {
        if frames.is_empty() {
            return Err(Error::ShapeMismatch("discriminator needs at least one frame".into()));
        }
        if let Some(f) = frames.iter().find(|f| tape.value(**f).len() != DISC_INPUT) {
            return Err(Error::ShapeMismatch(format!("frame pose has {} entries, expected {DISC_INPUT}", tape.value(*f).len())));
        }
        let mut embed = Vec::with_capacity(frames.len());
        let mut scores = Vec::with_capacity(frames.len());
        for &x in frames {
            let h1 = self.layer1.forward(tape, store, x)?;
            let h1 = tape.tanh(h1);
            let h2 = self.layer2.forward(tape, store, h1)?;
            let h2 = tape.tanh(h2);
            scores.push(self.attention.forward(tape, store, h2)?);
            embed.push(h2);
        }
        let weights = match pooling {
            Pooling::Attention => {
                let s = tape.concat(&scores);
                tape.softmax(s)
            }
            Pooling::Uniform => tape.input(vec![1.0 / frames.len() as f64; frames.len()]),
        };
        let mut weighted = Vec::with_capacity(frames.len());
        for (t, e) in embed.iter().enumerate() {
            let w = tape.slice(weights, t, 1)?;
            weighted.push(tape.scale_by(*e, w)?);
        }
        let pooled = tape.sum_vars(&weighted)?;
        let out = self.output.forward(tape, store, pooled)?;
        Ok((out, weights))
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, frames: &[Var]) -> Result<Var> {
        Ok(self.forward_with(tape, store, frames, Pooling::Attention)?.0)
    }

    /// Scores a plain sequence `[t][j][6]`.
    pub fn score(&self, store: &ParamStore, pose_seq: &[[[f64; SIXD_DIM]; NUM_JOINTS]]) -> Result<f64> {
        let mut tape = Tape::new();
        let frames = pose_inputs(&mut tape, pose_seq);
        let out = self.forward(&mut tape, store, &frames)?;
        Ok(tape.scalar(out))
    }
}

/// Flattens `[t][j][6]` poses into per-frame constant inputs.
pub fn pose_inputs(tape: &mut Tape, pose_seq: &[[[f64; SIXD_DIM]; NUM_JOINTS]]) -> Vec<Var> {
    pose_seq.iter().map(|f| tape.input(f.iter().flatten().copied().collect())).collect()
}
