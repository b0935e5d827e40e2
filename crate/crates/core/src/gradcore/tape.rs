//! Reverse-mode differentiation over a linear recording of vector-valued
//! operations.
//!
//! Every node holds a dense `Vec<f64>`; scalars are length-1 vectors and
//! 3×3 matrices are row-major length-9 vectors. Parameters live in a
//! [`ParamStore`] outside the tape and are referenced by id, so the same
//! weights can be read by many nodes without copying. A recording is
//! single-use: [`Tape::backward`] consumes it.

use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Linear { w: ParamId, b: Option<ParamId>, x: Var },
    ConstMatVec { m: Box<[f64]>, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddConst(Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Recip(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Gather(Var, Box<[usize]>),
    SumVars(Vec<Var>),
    Sum(Var),
    SumSquares(Var),
    Norm(Var),
    Dot(Var, Var),
    Normalize(Var),
    Cross(Var, Var),
    MatMul3(Var, Var),
    MatVec3(Var, Var),
    Pinhole { x: Var, focal: f64 },
    Softmax(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Dot product over two interleaved 4-lane accumulators. The lane layout
/// fixes the summation order, so the AVX path returns bit-identical results
/// to the portable one.
#[inline(always)]
fn dot_portable(a: &[f64], b: &[f64]) -> f64 {
    let mut lo = [0.0f64; 4];
    let mut hi = [0.0f64; 4];
    let (ca, ra) = a.as_chunks::<8>();
    let (cb, rb) = b.as_chunks::<8>();
    for (x, y) in ca.iter().zip(cb) {
        for k in 0..4 {
            lo[k] += x[k] * y[k];
            hi[k] += x[k + 4] * y[k + 4];
        }
    }
    let t = [lo[0] + hi[0], lo[1] + hi[1], lo[2] + hi[2], lo[3] + hi[3]];
    let mut s = (t[0] + t[2]) + (t[1] + t[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
fn dot_avx(a: &[f64], b: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    let (ca, ra) = a.as_chunks::<8>();
    let (cb, rb) = b.as_chunks::<8>();
    // SAFETY: every load reads 4 in-bounds f64 from an 8-element chunk.
    unsafe {
        let mut lo = _mm256_setzero_pd();
        let mut hi = _mm256_setzero_pd();
        for (x, y) in ca.iter().zip(cb) {
            lo = _mm256_add_pd(lo, _mm256_mul_pd(_mm256_loadu_pd(x.as_ptr()), _mm256_loadu_pd(y.as_ptr())));
            hi = _mm256_add_pd(hi, _mm256_mul_pd(_mm256_loadu_pd(x.as_ptr().add(4)), _mm256_loadu_pd(y.as_ptr().add(4))));
        }
        let mut t = [0.0f64; 4];
        _mm256_storeu_pd(t.as_mut_ptr(), _mm256_add_pd(lo, hi));
        let mut s = (t[0] + t[2]) + (t[1] + t[3]);
        for (x, y) in ra.iter().zip(rb) {
            s += x * y;
        }
        s
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: AVX support was checked just above.
        return unsafe { dot_avx(a, b) };
    }
    dot_portable(a, b)
}

#[inline(always)]
fn axpy_portable(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
fn axpy_avx(alpha: f64, x: &[f64], y: &mut [f64]) {
    axpy_portable(alpha, x, y)
}

/// `y += α·x`, elementwise, so every code path rounds identically.
#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: AVX support was checked just above.
        return unsafe { axpy_avx(alpha, x, y) };
    }
    axpy_portable(alpha, x, y)
}

fn accumulate(grads: &mut [Vec<f64>], v: Var, len: usize) -> &mut Vec<f64> {
    let g = &mut grads[v.0];
    if g.is_empty() {
        g.resize(len, 0.0);
    }
    g
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "node is not a scalar");
        val[0]
    }

    fn dim(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.dim(a) != self.dim(b) {
            return Err(Error::ShapeMismatch(format!("{what}: {} vs {}", self.dim(a), self.dim(b))));
        }
        Ok(())
    }

    /// Constant input; gradients stop here.
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Input)
    }

    /// Reads a whole parameter block as a vector.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).values.clone(), Op::Param(id))
    }

    /// `W x + b` with `W` a `rows × cols` block.
    pub fn linear(&mut self, store: &ParamStore, w: ParamId, b: Option<ParamId>, x: Var) -> Result<Var> {
        let wb = store.get(w);
        let xv = &self.nodes[x.0].value;
        if wb.cols != xv.len() {
            return Err(Error::ShapeMismatch(format!("{}: expects input {}, got {}", wb.name, wb.cols, xv.len())));
        }
        let mut y: Vec<f64> = match b {
            Some(b) => {
                let bb = store.get(b);
                if bb.len() != wb.rows {
                    return Err(Error::ShapeMismatch(format!("{}: bias length {} vs {} rows", bb.name, bb.len(), wb.rows)));
                }
                bb.values.clone()
            }
            None => vec![0.0; wb.rows],
        };
        for (r, yr) in y.iter_mut().enumerate() {
            *yr += dot(&wb.values[r * wb.cols..(r + 1) * wb.cols], xv);
        }
        Ok(self.push(y, Op::Linear { w, b, x }))
    }

    /// Constant `rows × cols` matrix (row-major) times a variable.
    pub fn const_matvec(&mut self, m: &[f64], rows: usize, x: Var) -> Result<Var> {
        let cols = self.dim(x);
        if m.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("const matrix {} entries vs {rows}x{cols}", m.len())));
        }
        let xv = &self.nodes[x.0].value;
        let y = (0..rows).map(|r| dot(&m[r * cols..(r + 1) * cols], xv)).collect();
        Ok(self.push(y, Op::ConstMatVec { m: m.into(), x }))
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op, what: &str) -> Result<Var> {
        self.check_same(a, b, what)?;
        let y = self.value(a).iter().zip(self.value(b)).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(y, op))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let y = self.value(a).iter().map(|x| f(*x)).collect();
        self.push(y, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b), "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    pub fn add_const(&mut self, a: Var, c: &[f64]) -> Result<Var> {
        if c.len() != self.dim(a) {
            return Err(Error::ShapeMismatch(format!("add_const: {} vs {}", self.dim(a), c.len())));
        }
        let y = self.value(a).iter().zip(c).map(|(x, c)| x + c).collect();
        Ok(self.push(y, Op::AddConst(a)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.map(a, |x| x * k, Op::Scale(a, k))
    }

    /// Vector times a scalar node.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.dim(s) != 1 {
            return Err(Error::ShapeMismatch("scale_by needs a scalar".into()));
        }
        let k = self.scalar(s);
        Ok(self.map(a, |x| x * k, Op::ScaleBy(a, s)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.map(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    /// Elementwise `1/x`.
    pub fn recip(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / x, Op::Recip(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut y = Vec::with_capacity(parts.iter().map(|p| self.dim(*p)).sum());
        for p in parts {
            y.extend_from_slice(self.value(*p));
        }
        self.push(y, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        if start + len > self.dim(a) {
            return Err(Error::ShapeMismatch(format!("slice {start}..{} of {}", start + len, self.dim(a))));
        }
        let y = self.value(a)[start..start + len].to_vec();
        Ok(self.push(y, Op::Slice(a, start)))
    }

    /// `y[i] = a[idx[i]]`.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let n = self.dim(a);
        if let Some(bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::ShapeMismatch(format!("gather index {bad} out of {n}")));
        }
        let src = self.value(a);
        let y = idx.iter().map(|&i| src[i]).collect();
        Ok(self.push(y, Op::Gather(a, idx.into())))
    }

    /// Elementwise sum of same-length vectors.
    pub fn sum_vars(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::ShapeMismatch("sum of nothing".into()))?;
        let mut y = self.value(first).to_vec();
        for p in &parts[1..] {
            self.check_same(first, *p, "sum_vars")?;
            for (a, b) in y.iter_mut().zip(self.value(*p)) {
                *a += b;
            }
        }
        Ok(self.push(y, Op::SumVars(parts.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(vec![s], Op::Sum(a))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = dot(self.value(a), self.value(a));
        self.push(vec![s], Op::SumSquares(a))
    }

    /// Euclidean norm; its gradient at the origin is taken as zero.
    pub fn norm(&mut self, a: Var) -> Var {
        let s = dot(self.value(a), self.value(a)).sqrt();
        self.push(vec![s], Op::Norm(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "dot")?;
        let s = dot(self.value(a), self.value(b));
        Ok(self.push(vec![s], Op::Dot(a, b)))
    }

    /// `a / ‖a‖`. Callers guarantee a nonzero norm.
    pub fn normalize(&mut self, a: Var) -> Var {
        let n = dot(self.value(a), self.value(a)).sqrt();
        self.map(a, |x| x / n, Op::Normalize(a))
    }

    pub fn cross(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dim(a) != 3 || self.dim(b) != 3 {
            return Err(Error::ShapeMismatch("cross needs 3-vectors".into()));
        }
        let (x, y) = (self.value(a), self.value(b));
        let c = vec![x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]];
        Ok(self.push(c, Op::Cross(a, b)))
    }

    /// Product of two row-major 3×3 matrices.
    pub fn matmul3(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dim(a) != 9 || self.dim(b) != 9 {
            return Err(Error::ShapeMismatch("matmul3 needs 3x3 operands".into()));
        }
        let (x, y) = (self.value(a), self.value(b));
        let mut c = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                c[i * 3 + j] = x[i * 3] * y[j] + x[i * 3 + 1] * y[3 + j] + x[i * 3 + 2] * y[6 + j];
            }
        }
        Ok(self.push(c, Op::MatMul3(a, b)))
    }

    /// Row-major 3×3 matrix times a 3-vector.
    pub fn matvec3(&mut self, m: Var, v: Var) -> Result<Var> {
        if self.dim(m) != 9 || self.dim(v) != 3 {
            return Err(Error::ShapeMismatch("matvec3 needs a 3x3 and a 3-vector".into()));
        }
        let (a, x) = (self.value(m), self.value(v));
        let y = (0..3).map(|i| a[i * 3] * x[0] + a[i * 3 + 1] * x[1] + a[i * 3 + 2] * x[2]).collect();
        Ok(self.push(y, Op::MatVec3(m, v)))
    }

    /// `(f·x/z, f·y/z)` for a camera-space point.
    pub fn pinhole(&mut self, x: Var, focal: f64) -> Result<Var> {
        if self.dim(x) != 3 {
            return Err(Error::ShapeMismatch("pinhole needs a 3-vector".into()));
        }
        let p = self.value(x);
        let y = vec![focal * p[0] / p[2], focal * p[1] / p[2]];
        Ok(self.push(y, Op::Pinhole { x, focal }))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let y = e.into_iter().map(|x| x / z).collect();
        self.push(y, Op::Softmax(a))
    }

    /// Propagates `d loss / d node` back through the recording and adds
    /// the parameter gradients into `store`. Gradients accumulate: calling
    /// this on two recordings without zeroing sums their contributions.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        if self.dim(loss) != 1 {
            return Err(Error::ShapeMismatch("backward needs a scalar loss".into()));
        }
        self.consumed = true;
        let n = loss.0 + 1;
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); n];
        grads[loss.0] = vec![1.0];

        for i in (0..n).rev() {
            let g = std::mem::take(&mut grads[i]);
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            let val = &node.value;
            let nodes = &self.nodes;
            let v = |x: &Var| -> &[f64] { &nodes[x.0].value };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let pg = &mut store.get_mut(*id).grad;
                    axpy(1.0, &g, pg);
                }
                Op::Linear { w, b, x } => {
                    let xv = v(x);
                    let (rows, cols) = (store.get(*w).rows, store.get(*w).cols);
                    {
                        let gx = accumulate(&mut grads, *x, cols);
                        let wv = &store.get(*w).values;
                        for r in 0..rows {
                            if g[r] != 0.0 {
                                axpy(g[r], &wv[r * cols..(r + 1) * cols], gx);
                            }
                        }
                    }
                    let wg = &mut store.get_mut(*w).grad;
                    for r in 0..rows {
                        if g[r] != 0.0 {
                            axpy(g[r], xv, &mut wg[r * cols..(r + 1) * cols]);
                        }
                    }
                    if let Some(b) = b {
                        axpy(1.0, &g, &mut store.get_mut(*b).grad);
                    }
                }
                Op::ConstMatVec { m, x } => {
                    let cols = v(x).len();
                    let gx = accumulate(&mut grads, *x, cols);
                    for (r, gr) in g.iter().enumerate() {
                        axpy(*gr, &m[r * cols..(r + 1) * cols], gx);
                    }
                }
                Op::Add(a, b) => {
                    axpy(1.0, &g, accumulate(&mut grads, *a, g.len()));
                    axpy(1.0, &g, accumulate(&mut grads, *b, g.len()));
                }
                Op::Sub(a, b) => {
                    axpy(1.0, &g, accumulate(&mut grads, *a, g.len()));
                    axpy(-1.0, &g, accumulate(&mut grads, *b, g.len()));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (v(a), v(b));
                    let ga = accumulate(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * bv[k];
                    }
                    let gb = accumulate(&mut grads, *b, g.len());
                    for k in 0..g.len() {
                        gb[k] += g[k] * av[k];
                    }
                }
                Op::AddConst(a) => axpy(1.0, &g, accumulate(&mut grads, *a, g.len())),
                Op::Scale(a, k) => axpy(*k, &g, accumulate(&mut grads, *a, g.len())),
                Op::ScaleBy(a, s) => {
                    let k = v(s)[0];
                    let d = dot(&g, v(a));
                    axpy(k, &g, accumulate(&mut grads, *a, g.len()));
                    accumulate(&mut grads, *s, 1)[0] += d;
                }
                Op::Sigmoid(a) => {
                    let ga = accumulate(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * val[k] * (1.0 - val[k]);
                    }
                }
                Op::Tanh(a) => {
                    let ga = accumulate(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * (1.0 - val[k] * val[k]);
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    let av = v(a);
                    let ga = accumulate(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += if av[k] > 0.0 { g[k] } else { slope * g[k] };
                    }
                }
                Op::Recip(a) => {
                    let ga = accumulate(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] -= g[k] * val[k] * val[k];
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = v(p).len();
                        axpy(1.0, &g[off..off + len], accumulate(&mut grads, *p, len));
                        off += len;
                    }
                }
                Op::Slice(a, start) => {
                    let len = v(a).len();
                    let ga = accumulate(&mut grads, *a, len);
                    axpy(1.0, &g, &mut ga[*start..*start + g.len()]);
                }
                Op::Gather(a, idx) => {
                    let len = v(a).len();
                    let ga = accumulate(&mut grads, *a, len);
                    for (k, &i) in idx.iter().enumerate() {
                        ga[i] += g[k];
                    }
                }
                Op::SumVars(parts) => {
                    for p in parts {
                        axpy(1.0, &g, accumulate(&mut grads, *p, g.len()));
                    }
                }
                Op::Sum(a) => {
                    let len = v(a).len();
                    accumulate(&mut grads, *a, len).iter_mut().for_each(|x| *x += g[0]);
                }
                Op::SumSquares(a) => {
                    let av = v(a);
                    axpy(2.0 * g[0], av, accumulate(&mut grads, *a, av.len()));
                }
                Op::Norm(a) => {
                    let av = v(a);
                    if val[0] > 0.0 {
                        axpy(g[0] / val[0], av, accumulate(&mut grads, *a, av.len()));
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (v(a), v(b));
                    axpy(g[0], bv, accumulate(&mut grads, *a, av.len()));
                    axpy(g[0], av, accumulate(&mut grads, *b, bv.len()));
                }
                Op::Normalize(a) => {
                    let av = v(a);
                    let n = dot(av, av).sqrt();
                    let proj = dot(val, &g);
                    let ga = accumulate(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += (g[k] - val[k] * proj) / n;
                    }
                }
                Op::Cross(a, b) => {
                    let (x, y) = (v(a).to_vec(), v(b).to_vec());
                    let cross = |p: &[f64], q: &[f64]| {
                        [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]]
                    };
                    // d(a×b)·g: da = b × g, db = g × a
                    let da = cross(&y, &g);
                    let db = cross(&g, &x);
                    axpy(1.0, &da, accumulate(&mut grads, *a, 3));
                    axpy(1.0, &db, accumulate(&mut grads, *b, 3));
                }
                Op::MatMul3(a, b) => {
                    let (x, y) = (v(a).to_vec(), v(b).to_vec());
                    let ga = accumulate(&mut grads, *a, 9);
                    for i in 0..3 {
                        for k in 0..3 {
                            ga[i * 3 + k] += (0..3).map(|j| g[i * 3 + j] * y[k * 3 + j]).sum::<f64>();
                        }
                    }
                    let gb = accumulate(&mut grads, *b, 9);
                    for k in 0..3 {
                        for j in 0..3 {
                            gb[k * 3 + j] += (0..3).map(|i| x[i * 3 + k] * g[i * 3 + j]).sum::<f64>();
                        }
                    }
                }
                Op::MatVec3(m, x) => {
                    let (a, xv) = (v(m).to_vec(), v(x).to_vec());
                    let gm = accumulate(&mut grads, *m, 9);
                    for i in 0..3 {
                        for j in 0..3 {
                            gm[i * 3 + j] += g[i] * xv[j];
                        }
                    }
                    let gx = accumulate(&mut grads, *x, 3);
                    for j in 0..3 {
                        gx[j] += (0..3).map(|i| a[i * 3 + j] * g[i]).sum::<f64>();
                    }
                }
                Op::Pinhole { x, focal } => {
                    let p = v(x);
                    let z = p[2];
                    let d = [
                        focal * g[0] / z,
                        focal * g[1] / z,
                        -focal * (p[0] * g[0] + p[1] * g[1]) / (z * z),
                    ];
                    axpy(1.0, &d, accumulate(&mut grads, *x, 3));
                }
                Op::Softmax(a) => {
                    let s = dot(val, &g);
                    let ga = accumulate(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += val[k] * (g[k] - s);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference check of every input entry of a scalar function
    /// built on the tape from a single input vector.
    fn check_input_grad(x0: &[f64], build: impl Fn(&mut Tape, Var) -> Var) {
        let mut store = ParamStore::new();
        let xid = store.add("x", 1, x0.len(), x0.to_vec());
        let mut tape = Tape::new();
        let x = tape.param(&store, xid);
        let loss = build(&mut tape, x);
        tape.backward(loss, &mut store).unwrap();
        let analytic = store.get(xid).grad.clone();
        let h = 1e-6;
        for k in 0..x0.len() {
            let eval = |delta: f64| {
                let mut xs = x0.to_vec();
                xs[k] += delta;
                let mut t = Tape::new();
                let xv = t.input(xs);
                let l = build(&mut t, xv);
                t.scalar(l)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let err = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-3);
            assert!(err < 1e-6, "entry {k}: fd {fd} vs analytic {}", analytic[k]);
        }
    }

    #[test]
    fn elementwise_ops_grad() {
        let x0 = [0.3, -0.7, 1.1, 0.05];
        check_input_grad(&x0, |t, x| {
            let s = t.sigmoid(x);
            let h = t.tanh(x);
            let m = t.mul(s, h).unwrap();
            let r = t.leaky_relu(m, 0.2);
            let q = t.sub(r, x).unwrap();
            let sm = t.softmax(q);
            let w = t.input(vec![1.0, -2.0, 0.5, 3.0]);
            let d = t.dot(sm, w).unwrap();
            let n = t.norm(x);
            let c = t.scale_by(x, n).unwrap();
            let ss = t.sum_squares(c);
            let both = t.concat(&[d, ss]);
            t.sum(both)
        });
    }

    #[test]
    fn geometry_ops_grad() {
        let x0 = [0.9, 0.2, -0.1, 0.3, 1.2, 0.4, 0.2, -0.3, 4.0];
        check_input_grad(&x0, |t, x| {
            let a = t.slice(x, 0, 3).unwrap();
            let b = t.slice(x, 3, 3).unwrap();
            let p = t.slice(x, 6, 3).unwrap();
            let na = t.normalize(a);
            let c = t.cross(na, b).unwrap();
            let m = t.concat(&[na, b, c]);
            let mt = t.gather(m, &[0, 3, 6, 1, 4, 7, 2, 5, 8]).unwrap();
            let mm = t.matmul3(m, mt).unwrap();
            let y = t.matvec3(mm, p).unwrap();
            let pz = t.add_const(y, &[0.0, 0.0, 30.0]).unwrap();
            let uv = t.pinhole(pz, 50.0).unwrap();
            let r = t.recip(p);
            let all = t.concat(&[uv, r]);
            t.sum_squares(all)
        });
    }

    #[test]
    fn linear_grad_and_const_matvec() {
        let mut store = ParamStore::new();
        let w = store.add("w", 2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]);
        let b = store.add("b", 2, 1, vec![0.01, -0.02]);
        let mut tape = Tape::new();
        let x = tape.input(vec![1.0, 2.0, 3.0]);
        let y = tape.linear(&store, w, Some(b), x).unwrap();
        let s = tape.sum(y);
        tape.backward(s, &mut store).unwrap();
        // d sum(Wx + b)/dW = outer(1, x)
        assert_eq!(store.get(w).grad, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert_eq!(store.get(b).grad, vec![1.0, 1.0]);

        check_input_grad(&[0.5, -1.5], |t, x| {
            let y = t.const_matvec(&[1.0, 2.0, -3.0, 0.5, 0.0, 4.0], 3, x).unwrap();
            let vs = [y, y];
            let z = t.sum_vars(&vs).unwrap();
            let q = t.scale(z, 0.5);
            t.sum_squares(q)
        });
    }

    #[test]
    fn backward_twice_is_an_error() {
        let mut store = ParamStore::new();
        let p = store.add("p", 1, 1, vec![2.0]);
        let mut tape = Tape::new();
        let x = tape.param(&store, p);
        let l = tape.sum_squares(x);
        tape.backward(l, &mut store).unwrap();
        assert_eq!(tape.backward(l, &mut store), Err(Error::GraphConsumed));
        assert_eq!(store.get(p).grad, vec![4.0]);
    }

    #[test]
    fn gradients_accumulate_across_recordings() {
        let mut store = ParamStore::new();
        let p = store.add("p", 1, 1, vec![3.0]);
        for _ in 0..2 {
            let mut tape = Tape::new();
            let x = tape.param(&store, p);
            let l = tape.sum(x);
            tape.backward(l, &mut store).unwrap();
        }
        assert_eq!(store.get(p).grad, vec![2.0]);
    }

    #[test]
    fn unused_param_grad_untouched() {
        let mut store = ParamStore::new();
        let used = store.add("used", 1, 2, vec![1.0, 2.0]);
        let unused = store.add("unused", 1, 2, vec![5.0, 6.0]);
        let mut tape = Tape::new();
        let x = tape.param(&store, used);
        let _ = tape.param(&store, unused);
        let l = tape.sum(x);
        tape.backward(l, &mut store).unwrap();
        assert_eq!(store.get(unused).grad, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_errors() {
        let mut store = ParamStore::new();
        let w = store.add_zeros("w", 2, 3);
        let mut tape = Tape::new();
        let x = tape.input(vec![1.0, 2.0]);
        assert!(tape.linear(&store, w, None, x).is_err());
        let y = tape.input(vec![1.0, 2.0, 3.0]);
        assert!(tape.add(x, y).is_err());
        assert!(tape.cross(x, y).is_err());
        let nonscalar = tape.add(y, y).unwrap();
        assert!(tape.backward(nonscalar, &mut store).is_err());
    }
}
