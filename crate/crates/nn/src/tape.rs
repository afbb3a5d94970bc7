//! Operation recording and the reverse pass.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{gemm, Tensor};
use crate::{NnError, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a specific [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    idx: usize,
    tape: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    Mae,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    OneMinus(usize),
    Relu(usize),
    Sigmoid(usize),
    Tanh(usize),
    SliceCols { src: usize, start: usize },
    Reshape(usize),
    Dropout { src: usize, mask: Vec<f64> },
    Conv1d(Box<ConvCache>),
    Loss { pred: usize, target: Vec<f64>, kind: LossKind },
    Sum(usize),
}

#[derive(Debug)]
struct ConvCache {
    x: usize,
    w: usize,
    /// im2col matrix, `(batch * len_out) x (kernel * c_in)`.
    cols: Vec<f64>,
    batch: usize,
    len_in: usize,
    len_out: usize,
    c_in: usize,
    kernel: usize,
    pad_left: usize,
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records one forward pass. Nodes are appended in evaluation order, so
/// reverse insertion order is a reverse topological order.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    param_nodes: Vec<(ParamId, usize)>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, expected: &[usize], got: &[usize]) -> NnError {
    NnError::ShapeMismatch {
        op,
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            param_nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Which side of every non-differentiable point the recorded pass sits
    /// on: the sign of each ReLU input and of each MAE residual.
    pub fn kink_signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(ia) => sig.extend(self.nodes[*ia].value.data().iter().map(|&x| x > 0.0)),
                Op::Loss {
                    pred,
                    target,
                    kind: LossKind::Mae,
                } => sig.extend(self.nodes[*pred].value.data().iter().zip(target).map(|(p, t)| p > t)),
                _ => {}
            }
        }
        sig
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id {
            return Err(NnError::DetachedTape);
        }
        Ok(v.idx)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(NnError::NonFinite(name));
        }
        self.nodes.push(Node { value, op });
        Ok(Var {
            idx: self.nodes.len() - 1,
            tape: self.id,
        })
    }

    pub fn value(&self, v: Var) -> Result<&Tensor> {
        Ok(&self.nodes[self.idx(v)?].value)
    }

    pub fn shape(&self, v: Var) -> Result<&[usize]> {
        Ok(self.value(v)?.shape())
    }

    /// Input with no gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push("constant", value, Op::Constant)
    }

    /// Records a parameter once per tape; later calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&(_, idx)) = self.param_nodes.iter().find(|(p, _)| *p == id) {
            return Ok(Var { idx, tape: self.id });
        }
        let v = self.push("param", store.get(id).clone(), Op::Param(id))?;
        self.param_nodes.push((id, v.idx));
        Ok(v)
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (av, bv) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if av.shape().len() != 2 || bv.shape().len() != 2 || av.shape()[1] != bv.shape()[0] {
            return Err(mismatch("matmul", av.shape(), bv.shape()));
        }
        let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, av.data(), false, bv.data(), false, 0.0, &mut out);
        self.push("matmul", Tensor::new(vec![m, n], out)?, Op::MatMul(ia, ib))
    }

    /// Adds `bias` (shape `[n]`) to every row of `a` (last axis `n`).
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(bias)?);
        let (av, bv) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let (_, cols) = av.rows_cols();
        if bv.shape() != [cols] {
            return Err(mismatch("add_bias", &[cols], bv.shape()));
        }
        let mut out = av.clone();
        for row in out.data_mut().chunks_mut(cols) {
            for (o, b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        self.push("add_bias", out, Op::AddBias(ia, ib))
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: fn(f64, f64) -> f64) -> Result<(usize, usize, Tensor)> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (av, bv) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if av.shape() != bv.shape() {
            return Err(mismatch(name, av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok((ia, ib, Tensor::new(av.shape().to_vec(), data)?))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib, t) = self.binary("add", a, b, |x, y| x + y)?;
        self.push("add", t, Op::Add(ia, ib))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib, t) = self.binary("sub", a, b, |x, y| x - y)?;
        self.push("sub", t, Op::Sub(ia, ib))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib, t) = self.binary("mul", a, b, |x, y| x * y)?;
        self.push("mul", t, Op::Mul(ia, ib))
    }

    fn unary(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: fn(usize) -> Op) -> Result<Var> {
        let ia = self.idx(a)?;
        let av = &self.nodes[ia].value;
        let data = av.data().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        self.push(name, t, op(ia))
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        self.unary("one_minus", a, |x| 1.0 - x, Op::OneMinus)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, f64::tanh, Op::Tanh)
    }

    /// Columns `start..end` of a 2-D value.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let av = &self.nodes[ia].value;
        if av.shape().len() != 2 || start >= end || end > av.shape()[1] {
            return Err(mismatch("slice_cols", &[start, end], av.shape()));
        }
        let (rows, cols) = (av.shape()[0], av.shape()[1]);
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&av.data()[r * cols + start..r * cols + end]);
        }
        let t = Tensor::new(vec![rows, end - start], data)?;
        self.push("slice_cols", t, Op::SliceCols { src: ia, start })
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let ia = self.idx(a)?;
        let av = &self.nodes[ia].value;
        if shape.iter().product::<usize>() != av.len() {
            return Err(mismatch("reshape", shape, av.shape()));
        }
        let t = av.clone().reshaped(shape.to_vec());
        self.push("reshape", t, Op::Reshape(ia))
    }

    /// Multiplies by a fixed mask (the caller draws and scales it).
    pub fn dropout_mask(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        let ia = self.idx(a)?;
        let av = &self.nodes[ia].value;
        if mask.len() != av.len() {
            return Err(mismatch("dropout", av.shape(), &[mask.len()]));
        }
        let data = av.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        self.push("dropout", t, Op::Dropout { src: ia, mask })
    }

    /// Cross-correlation of channels-last `x: [batch, len, c_in]` with
    /// `w: [kernel, c_in, c_out]`, zero-padded by `pad` on each side.
    pub fn conv1d(&mut self, x: Var, w: Var, pad: (usize, usize)) -> Result<Var> {
        let (ix, iw) = (self.idx(x)?, self.idx(w)?);
        let (xv, wv) = (&self.nodes[ix].value, &self.nodes[iw].value);
        if xv.shape().len() != 3 || wv.shape().len() != 3 || xv.shape()[2] != wv.shape()[1] {
            return Err(mismatch("conv1d", xv.shape(), wv.shape()));
        }
        let (batch, len_in, c_in) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let (kernel, c_out) = (wv.shape()[0], wv.shape()[2]);
        let padded = len_in + pad.0 + pad.1;
        if padded < kernel {
            return Err(mismatch("conv1d", &[kernel], &[padded]));
        }
        let len_out = padded - kernel + 1;
        let kc = kernel * c_in;
        let mut cols = vec![0.0; batch * len_out * kc];
        for b in 0..batch {
            for t in 0..len_out {
                let row = &mut cols[(b * len_out + t) * kc..(b * len_out + t + 1) * kc];
                for k in 0..kernel {
                    let pos = (t + k) as isize - pad.0 as isize;
                    if pos >= 0 && (pos as usize) < len_in {
                        let src = (b * len_in + pos as usize) * c_in;
                        row[k * c_in..(k + 1) * c_in].copy_from_slice(&xv.data()[src..src + c_in]);
                    }
                }
            }
        }
        let mut out = vec![0.0; batch * len_out * c_out];
        gemm(batch * len_out, kc, c_out, &cols, false, wv.data(), false, 0.0, &mut out);
        let t = Tensor::new(vec![batch, len_out, c_out], out)?;
        let cache = ConvCache {
            x: ix,
            w: iw,
            cols,
            batch,
            len_in,
            len_out,
            c_in,
            kernel,
            pad_left: pad.0,
        };
        self.push("conv1d", t, Op::Conv1d(Box::new(cache)))
    }

    /// Mean squared or absolute error against a constant target.
    pub fn loss(&mut self, kind: LossKind, pred: Var, target: &Tensor) -> Result<Var> {
        let ip = self.idx(pred)?;
        let pv = &self.nodes[ip].value;
        if pv.shape() != target.shape() {
            return Err(mismatch("loss", pv.shape(), target.shape()));
        }
        let n = pv.len().max(1) as f64;
        let total: f64 = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| match kind {
                LossKind::Mse => (p - t) * (p - t),
                LossKind::Mae => (p - t).abs(),
            })
            .sum();
        let op = Op::Loss {
            pred: ip,
            target: target.data().to_vec(),
            kind,
        };
        self.push("loss", Tensor::scalar(total / n), op)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let s = self.nodes[ia].value.data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(ia))
    }

    /// Gradients of a scalar `loss` with respect to every parameter in
    /// `store` (zeros for parameters not reached).
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        let il = self.idx(loss)?;
        let shape = self.nodes[il].value.shape();
        if self.nodes[il].value.len() != 1 {
            return Err(NnError::NotScalar(shape.to_vec()));
        }
        self.backward_from(loss, Tensor::new(shape.to_vec(), vec![1.0])?, store)
    }

    /// Reverse pass seeded with an arbitrary upstream gradient for `out`.
    pub fn backward_from(&self, out: Var, upstream: Tensor, store: &ParamStore) -> Result<Gradients> {
        let io = self.idx(out)?;
        if upstream.shape() != self.nodes[io].value.shape() {
            return Err(mismatch("backward", self.nodes[io].value.shape(), upstream.shape()));
        }
        let mut result = Gradients::zeros_like(store);
        let mut grads: Vec<Option<Tensor>> = (0..=io).map(|_| None).collect();
        grads[io] = Some(upstream);

        for i in (0..=io).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    if id.0 >= store.len() || store.get(*id).shape() != g.shape() {
                        return Err(NnError::InvalidParameter(format!("parameter {} not in store", id.0)));
                    }
                    result.get_mut(*id).add_assign(&g);
                }
                Op::MatMul(ia, ib) => {
                    let (av, bv) = (&self.nodes[*ia].value, &self.nodes[*ib].value);
                    let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, bv.data(), true, 0.0, &mut da);
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, av.data(), true, g.data(), false, 0.0, &mut db);
                    accumulate(&mut grads, *ia, Tensor::new(vec![m, k], da)?);
                    accumulate(&mut grads, *ib, Tensor::new(vec![k, n], db)?);
                }
                Op::AddBias(ia, ib) => {
                    let n = self.nodes[*ib].value.len();
                    let mut db = vec![0.0; n];
                    for row in g.data().chunks(n) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *ib, Tensor::new(vec![n], db)?);
                    accumulate(&mut grads, *ia, g);
                }
                Op::Add(ia, ib) => {
                    accumulate(&mut grads, *ib, g.clone());
                    accumulate(&mut grads, *ia, g);
                }
                Op::Sub(ia, ib) => {
                    accumulate(&mut grads, *ib, map(&g, |x| -x));
                    accumulate(&mut grads, *ia, g);
                }
                Op::Mul(ia, ib) => {
                    let (av, bv) = (&self.nodes[*ia].value, &self.nodes[*ib].value);
                    accumulate(&mut grads, *ia, zip(&g, bv, |g, b| g * b));
                    accumulate(&mut grads, *ib, zip(&g, av, |g, a| g * a));
                }
                Op::OneMinus(ia) => accumulate(&mut grads, *ia, map(&g, |x| -x)),
                Op::Relu(ia) => {
                    let xv = &self.nodes[*ia].value;
                    accumulate(&mut grads, *ia, zip(&g, xv, |g, x| if x > 0.0 { g } else { 0.0 }));
                }
                Op::Sigmoid(ia) => accumulate(&mut grads, *ia, zip(&g, &node.value, |g, y| g * y * (1.0 - y))),
                Op::Tanh(ia) => accumulate(&mut grads, *ia, zip(&g, &node.value, |g, y| g * (1.0 - y * y))),
                Op::SliceCols { src, start } => {
                    let sv = &self.nodes[*src].value;
                    let (rows, cols) = (sv.shape()[0], sv.shape()[1]);
                    let width = node.value.shape()[1];
                    let mut d = Tensor::zeros(sv.shape());
                    for r in 0..rows {
                        d.data_mut()[r * cols + start..r * cols + start + width]
                            .copy_from_slice(&g.data()[r * width..(r + 1) * width]);
                    }
                    accumulate(&mut grads, *src, d);
                }
                Op::Reshape(ia) => {
                    let shape = self.nodes[*ia].value.shape().to_vec();
                    accumulate(&mut grads, *ia, g.reshaped(shape));
                }
                Op::Dropout { src, mask } => {
                    let d = g.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                    accumulate(&mut grads, *src, Tensor::new(g.shape().to_vec(), d)?);
                }
                Op::Conv1d(c) => {
                    let wv = &self.nodes[c.w].value;
                    let c_out = wv.shape()[2];
                    let kc = c.kernel * c.c_in;
                    let rows = c.batch * c.len_out;
                    let mut dw = vec![0.0; kc * c_out];
                    gemm(kc, rows, c_out, &c.cols, true, g.data(), false, 0.0, &mut dw);
                    let mut dcols = vec![0.0; rows * kc];
                    gemm(rows, c_out, kc, g.data(), false, wv.data(), true, 0.0, &mut dcols);
                    let mut dx = Tensor::zeros(&[c.batch, c.len_in, c.c_in]);
                    let dxd = dx.data_mut();
                    for b in 0..c.batch {
                        for t in 0..c.len_out {
                            let row = &dcols[(b * c.len_out + t) * kc..(b * c.len_out + t + 1) * kc];
                            for k in 0..c.kernel {
                                let pos = (t + k) as isize - c.pad_left as isize;
                                if pos >= 0 && (pos as usize) < c.len_in {
                                    let dst = (b * c.len_in + pos as usize) * c.c_in;
                                    for ch in 0..c.c_in {
                                        dxd[dst + ch] += row[k * c.c_in + ch];
                                    }
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, c.w, Tensor::new(wv.shape().to_vec(), dw)?);
                    accumulate(&mut grads, c.x, dx);
                }
                Op::Loss { pred, target, kind } => {
                    let pv = &self.nodes[*pred].value;
                    let scale = g.data()[0] / pv.len().max(1) as f64;
                    let d = pv
                        .data()
                        .iter()
                        .zip(target)
                        .map(|(p, t)| match kind {
                            LossKind::Mse => 2.0 * (p - t) * scale,
                            LossKind::Mae if p > t => scale,
                            LossKind::Mae if p < t => -scale,
                            LossKind::Mae => 0.0,
                        })
                        .collect();
                    accumulate(&mut grads, *pred, Tensor::new(pv.shape().to_vec(), d)?);
                }
                Op::Sum(ia) => {
                    let shape = self.nodes[*ia].value.shape();
                    accumulate(&mut grads, *ia, Tensor::full(shape, g.data()[0]));
                }
            }
        }
        Ok(result)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], idx: usize, g: Tensor) {
    match &mut grads[idx] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn map(g: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = g.data().iter().map(|&x| f(x)).collect();
    Tensor::new(g.shape().to_vec(), data).expect("same shape")
}

fn zip(g: &Tensor, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g.data().iter().zip(other.data()).map(|(&a, &b)| f(a, b)).collect();
    Tensor::new(g.shape().to_vec(), data).expect("same shape")
}
