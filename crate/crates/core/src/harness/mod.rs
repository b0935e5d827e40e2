//! Training, evaluation, ablation and the on-disk formats around them.

pub mod config;
pub mod formats;
pub mod gradcheck;
pub mod losses;
pub mod train;

pub use config::{LossWeights, TrainConfig, Variant};
pub use losses::{discriminator_loss, generator_loss, ClipTargets, LossBreakdown, LossTerms};
pub use train::{evaluate, run_ablation, run_variant, train, Evaluation, ExperimentReport, Model, Trainer};
