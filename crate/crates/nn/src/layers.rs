//! Layers holding parameter ids into a [`ParamStore`].

use rand::Rng;

use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::{NnError, Result};

fn uniform(rng: &mut impl Rng, shape: &[usize], limit: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// He-uniform limit for ReLU-fed layers.
fn fan_in_limit(fan_in: usize) -> f64 {
    (6.0 / fan_in.max(1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Self::Relu => tape.relu(x),
            Self::Sigmoid => tape.sigmoid(x),
            Self::Tanh => tape.tanh(x),
            Self::Linear => Ok(x),
        }
    }
}

/// `y = x W + b` with `W: [input, units]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub units: usize,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, units: usize, rng: &mut impl Rng) -> Self {
        let w = store.add(format!("{name}.w"), uniform(rng, &[input, units], fan_in_limit(input)));
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[units]));
        Self { w, b, input, units }
    }

    /// `x: [batch, input] -> [batch, units]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w)?;
        let b = tape.param(store, self.b)?;
        let y = tape.matmul(x, w)?;
        tape.add_bias(y, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvPadding {
    /// No padding; output is `kernel - 1` samples shorter.
    Valid,
    /// Zero padding that keeps the length (extra sample on the right for
    /// even kernels).
    Same,
}

/// Channels-last 1-D convolution, `W: [kernel, c_in, c_out]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub kernel: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub padding: ConvPadding,
}

impl Conv1d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        kernel: usize,
        c_in: usize,
        c_out: usize,
        padding: ConvPadding,
        rng: &mut impl Rng,
    ) -> Self {
        let limit = fan_in_limit(kernel * c_in);
        let w = store.add(format!("{name}.w"), uniform(rng, &[kernel, c_in, c_out], limit));
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[c_out]));
        Self {
            w,
            b,
            kernel,
            c_in,
            c_out,
            padding,
        }
    }

    pub fn output_len(&self, len: usize) -> usize {
        match self.padding {
            ConvPadding::Same => len,
            ConvPadding::Valid => (len + 1).saturating_sub(self.kernel),
        }
    }

    /// `x: [batch, len, c_in] -> [batch, output_len, c_out]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let pad = match self.padding {
            ConvPadding::Valid => (0, 0),
            ConvPadding::Same => ((self.kernel - 1) / 2, self.kernel - 1 - (self.kernel - 1) / 2),
        };
        let w = tape.param(store, self.w)?;
        let b = tape.param(store, self.b)?;
        let y = tape.conv1d(x, w, pad)?;
        tape.add_bias(y, b)
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 - p)` in training,
/// evaluation is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    p: f64,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::InvalidParameter(format!("dropout probability {p} outside [0, 1)")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Training mode when `rng` is given.
    pub fn forward<R: Rng>(&self, tape: &mut Tape, x: Var, rng: Option<&mut R>) -> Result<Var> {
        let Some(rng) = rng else { return Ok(x) };
        if self.p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - self.p);
        let n = tape.value(x)?.len();
        let mask = (0..n).map(|_| if rng.random::<f64>() < self.p { 0.0 } else { keep }).collect();
        tape.dropout_mask(x, mask)
    }
}

fn recurrent_limit(hidden: usize) -> f64 {
    1.0 / (hidden.max(1) as f64).sqrt()
}

fn zero_state(tape: &mut Tape, batch: usize, hidden: usize) -> Result<Var> {
    tape.constant(Tensor::zeros(&[batch, hidden]))
}

/// Gated recurrent unit. Gate columns are ordered update, reset, candidate:
/// `z = s(x Wz + h Uz + bz)`, `r = s(x Wr + h Ur + br)`,
/// `n = tanh(x Wn + (r * h) Un + bn)`, `h' = (1 - z) * n + z * h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GruCell {
    pub w: ParamId,
    pub u_zr: ParamId,
    pub u_n: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let limit = recurrent_limit(hidden);
        Self {
            w: store.add(format!("{name}.w"), uniform(rng, &[input, 3 * hidden], limit)),
            u_zr: store.add(format!("{name}.u_zr"), uniform(rng, &[hidden, 2 * hidden], limit)),
            u_n: store.add(format!("{name}.u_n"), uniform(rng, &[hidden, hidden], limit)),
            b: store.add(format!("{name}.b"), Tensor::zeros(&[3 * hidden])),
            input,
            hidden,
        }
    }

    pub fn step(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Result<Var> {
        let hd = self.hidden;
        let w = tape.param(store, self.w)?;
        let u_zr = tape.param(store, self.u_zr)?;
        let u_n = tape.param(store, self.u_n)?;
        let b = tape.param(store, self.b)?;
        let xw = tape.matmul(x, w)?;
        let xw = tape.add_bias(xw, b)?;
        let hu = tape.matmul(h, u_zr)?;
        let xz = tape.slice_cols(xw, 0, hd)?;
        let hz = tape.slice_cols(hu, 0, hd)?;
        let z = tape.add(xz, hz)?;
        let z = tape.sigmoid(z)?;
        let xr = tape.slice_cols(xw, hd, 2 * hd)?;
        let hr = tape.slice_cols(hu, hd, 2 * hd)?;
        let r = tape.add(xr, hr)?;
        let r = tape.sigmoid(r)?;
        let rh = tape.mul(r, h)?;
        let rhu = tape.matmul(rh, u_n)?;
        let xn = tape.slice_cols(xw, 2 * hd, 3 * hd)?;
        let n = tape.add(xn, rhu)?;
        let n = tape.tanh(n)?;
        let keep_new = tape.one_minus(z)?;
        let a = tape.mul(keep_new, n)?;
        let c = tape.mul(z, h)?;
        tape.add(a, c)
    }

    /// Runs over `inputs` (each `[batch, input]`) from a zero state and
    /// returns every hidden state.
    pub fn run(&self, tape: &mut Tape, store: &ParamStore, inputs: &[Var]) -> Result<Vec<Var>> {
        let batch = match inputs.first() {
            Some(&x) => tape.shape(x)?[0],
            None => return Ok(Vec::new()),
        };
        let mut h = zero_state(tape, batch, self.hidden)?;
        let mut out = Vec::with_capacity(inputs.len());
        for &x in inputs {
            h = self.step(tape, store, x, h)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Long short-term memory cell. Gate columns are ordered input, forget,
/// cell candidate, output; `c' = f * c + i * g`, `h' = o * tanh(c')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmCell {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let limit = recurrent_limit(hidden);
        Self {
            w: store.add(format!("{name}.w"), uniform(rng, &[input, 4 * hidden], limit)),
            u: store.add(format!("{name}.u"), uniform(rng, &[hidden, 4 * hidden], limit)),
            b: store.add(format!("{name}.b"), Tensor::zeros(&[4 * hidden])),
            input,
            hidden,
        }
    }

    pub fn step(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hd = self.hidden;
        let w = tape.param(store, self.w)?;
        let u = tape.param(store, self.u)?;
        let b = tape.param(store, self.b)?;
        let xw = tape.matmul(x, w)?;
        let hu = tape.matmul(h, u)?;
        let gates = tape.add(xw, hu)?;
        let gates = tape.add_bias(gates, b)?;
        let i = tape.slice_cols(gates, 0, hd)?;
        let i = tape.sigmoid(i)?;
        let f = tape.slice_cols(gates, hd, 2 * hd)?;
        let f = tape.sigmoid(f)?;
        let g = tape.slice_cols(gates, 2 * hd, 3 * hd)?;
        let g = tape.tanh(g)?;
        let o = tape.slice_cols(gates, 3 * hd, 4 * hd)?;
        let o = tape.sigmoid(o)?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c = tape.add(fc, ig)?;
        let tc = tape.tanh(c)?;
        let h = tape.mul(o, tc)?;
        Ok((h, c))
    }

    /// Runs over `inputs` from zero states and returns every hidden state.
    pub fn run(&self, tape: &mut Tape, store: &ParamStore, inputs: &[Var]) -> Result<Vec<Var>> {
        let batch = match inputs.first() {
            Some(&x) => tape.shape(x)?[0],
            None => return Ok(Vec::new()),
        };
        let mut h = zero_state(tape, batch, self.hidden)?;
        let mut c = zero_state(tape, batch, self.hidden)?;
        let mut out = Vec::with_capacity(inputs.len());
        for &x in inputs {
            (h, c) = self.step(tape, store, x, h, c)?;
            out.push(h);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_dense() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Dense::new(&mut store, "d", 3, 3, &mut rng);
        *store.get_mut(d.w) = Tensor::new(vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 3], vec![4.0, -5.0, 6.0]).unwrap()).unwrap();
        let y = d.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y).unwrap().data(), &[4.0, -5.0, 6.0]);
    }

    #[test]
    fn eval_dropout_is_identity() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[2, 5], 3.0)).unwrap();
        for p in [0.0, 0.3, 0.9] {
            let y = Dropout::new(p).unwrap().forward::<ChaCha8Rng>(&mut tape, x, None).unwrap();
            assert_eq!(y, x);
        }
        assert!(Dropout::new(1.0).is_err());
    }

    #[test]
    fn initialization_is_seeded() {
        let build = |seed| {
            let mut store = ParamStore::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            GruCell::new(&mut store, "g", 2, 4, &mut rng);
            store
        };
        assert_eq!(build(5), build(5));
        assert_ne!(build(5), build(6));
        let s = build(5);
        assert!(s.tensors()[0].data().iter().all(|v| v.abs() <= 0.5));
        assert!(s.tensors()[3].data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn same_conv_keeps_length() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in [1, 2, 5] {
            let c = Conv1d::new(&mut store, "c", k, 1, 3, ConvPadding::Same, &mut rng);
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::full(&[2, 7, 1], 1.0)).unwrap();
            let y = c.forward(&mut tape, &store, x).unwrap();
            assert_eq!(tape.shape(y).unwrap(), &[2, 7, 3]);
        }
    }
}
