pub mod diffgeom;
pub mod discriminator;
pub mod generator;

pub use discriminator::{MotionDiscriminator, Pooling};
pub use generator::{FeatureVars, FeatureVolume, Generator, GeneratorConfig, GeneratorOutput, GeneratorVars};

use crate::skeleton::NUM_JOINTS;

pub const OBS_DIM: usize = 3;
pub const FEATURE_DIM: usize = 128;
pub const HIDDEN_DIM: usize = 64;
pub const CAM_DIM: usize = 32;
pub const SIXD_DIM: usize = 6;

/// One frame of per-joint observations: pixel `u`, pixel `v`, confidence.
pub type ObsFrame = [[f64; OBS_DIM]; NUM_JOINTS];
