use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Dense affine layer `W x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Registers `{prefix}.w` (uniform init) and `{prefix}.b` (zeros).
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let w = store.add_uniform(format!("{prefix}.w"), out_dim, in_dim, rng);
        let b = store.add_zeros(format!("{prefix}.b"), out_dim, 1);
        Self { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        linear_forward(tape, store, self.w, self.b, x)
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }
}

pub fn linear_forward(tape: &mut Tape, store: &ParamStore, w: ParamId, b: ParamId, x: Var) -> Result<Var> {
    tape.linear(store, w, Some(b), x)
}

/// One GRU layer.
///
/// ```text
/// z = σ(W_z x + U_z h + b_z)
/// r = σ(W_r x + U_r h + b_r)
/// n = tanh(W_n x + r ⊙ (U_n h) + b_n)
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_n: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_n: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_n: ParamId,
}

impl GruCell {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let w_z = store.add_uniform(format!("{prefix}.w_z"), hidden_dim, input_dim, rng);
        let w_r = store.add_uniform(format!("{prefix}.w_r"), hidden_dim, input_dim, rng);
        let w_n = store.add_uniform(format!("{prefix}.w_n"), hidden_dim, input_dim, rng);
        let u_z = store.add_uniform(format!("{prefix}.u_z"), hidden_dim, hidden_dim, rng);
        let u_r = store.add_uniform(format!("{prefix}.u_r"), hidden_dim, hidden_dim, rng);
        let u_n = store.add_uniform(format!("{prefix}.u_n"), hidden_dim, hidden_dim, rng);
        let b_z = store.add_zeros(format!("{prefix}.b_z"), hidden_dim, 1);
        let b_r = store.add_zeros(format!("{prefix}.b_r"), hidden_dim, 1);
        let b_n = store.add_zeros(format!("{prefix}.b_n"), hidden_dim, 1);
        Self { input_dim, hidden_dim, w_z, w_r, w_n, u_z, u_r, u_n, b_z, b_r, b_n }
    }

    pub fn params(&self) -> [ParamId; 9] {
        [self.w_z, self.w_r, self.w_n, self.u_z, self.u_r, self.u_n, self.b_z, self.b_r, self.b_n]
    }
}

pub fn gru_step(tape: &mut Tape, store: &ParamStore, cell: &GruCell, x: Var, h_prev: Var) -> Result<Var> {
    if tape.value(x).len() != cell.input_dim || tape.value(h_prev).len() != cell.hidden_dim {
        return Err(Error::ShapeMismatch(format!(
            "gru expects input {} / hidden {}, got {} / {}",
            cell.input_dim,
            cell.hidden_dim,
            tape.value(x).len(),
            tape.value(h_prev).len()
        )));
    }
    let xz = tape.linear(store, cell.w_z, Some(cell.b_z), x)?;
    let hz = tape.linear(store, cell.u_z, None, h_prev)?;
    let z_pre = tape.add(xz, hz)?;
    let z = tape.sigmoid(z_pre);

    let xr = tape.linear(store, cell.w_r, Some(cell.b_r), x)?;
    let hr = tape.linear(store, cell.u_r, None, h_prev)?;
    let r_pre = tape.add(xr, hr)?;
    let r = tape.sigmoid(r_pre);

    let xn = tape.linear(store, cell.w_n, Some(cell.b_n), x)?;
    let hn = tape.linear(store, cell.u_n, None, h_prev)?;
    let gated = tape.mul(r, hn)?;
    let n_pre = tape.add(xn, gated)?;
    let n = tape.tanh(n_pre);

    // (1 − z)·n + z·h = n + z·(h − n)
    let diff = tape.sub(h_prev, n)?;
    let zd = tape.mul(z, diff)?;
    tape.add(n, zd)
}

/// Mean of squared entry differences.
pub fn mse(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let n = tape.value(a).len();
    if n == 0 {
        return Err(Error::ShapeMismatch("mse of empty tensors".into()));
    }
    let d = tape.sub(a, b)?;
    let s = tape.sum_squares(d);
    Ok(tape.scale(s, 1.0 / n as f64))
}
