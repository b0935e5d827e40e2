//! Differentiable building blocks: a vector-level reverse-mode tape,
//! parameter storage, dense and GRU layers, Adam, and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod params;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use layers::{gru_step, linear_forward, mse, GruCell, Linear};
pub use params::{ParamBlock, ParamId, ParamStore};
pub use tape::{Tape, Var};
