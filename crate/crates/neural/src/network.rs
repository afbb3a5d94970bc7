//! Family topologies, forward passes and prediction.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nilm_core::model::output_series;
use nilm_core::series::is_gap;
use nilm_core::{make_windows, trailing_windows, Family, Padding, PowerSeries, Scaler};
use nilm_nn::{Conv1d, ConvPadding, Dense, Dropout, GruCell, LossKind, LstmCell, OptimizerKind, ParamStore, Tape, Tensor, Var};

use crate::overlap::overlap_average;
use crate::spec::NetworkSpec;
use crate::{NeuralError, Result};

const CONV_KERNEL: usize = 5;
const CONV1_CHANNELS: usize = 16;
const CONV2_CHANNELS: usize = 32;
const PREDICT_BATCH: usize = 256;

/// Where the input window sits relative to the predicted sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowAlignment {
    /// Anchor at offset `window / 2`.
    Centered,
    /// Anchor is the last cell.
    Trailing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    /// One value per window, for the anchor sample.
    Point,
    /// One value per window cell.
    Sequence,
}

#[derive(Debug, Clone, PartialEq)]
enum Arch {
    Dense { hidden: Vec<Dense>, out: Dense },
    Gru { cells: Vec<GruCell>, head: Dense },
    Lstm { cells: Vec<LstmCell>, head: Dense },
    Conv { c1: Conv1d, c2: Conv1d, dense: Dense, out: Dense },
}

/// A network for one target appliance, with the train-split scalers once
/// trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    store: ParamStore,
    arch: Arch,
    target: String,
    pub(crate) input_scaler: Option<Scaler>,
    pub(crate) target_scaler: Option<Scaler>,
}

/// Builds an untrained network; parameters are drawn from `spec.seed`.
pub fn build_network(spec: &NetworkSpec, target: &str) -> Result<Network> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut store = ParamStore::new();
    let (w, h) = (spec.window, spec.hidden);
    let arch = match spec.family {
        Family::Fcnn => {
            let mut hidden = Vec::new();
            let mut input = w;
            for i in 0..spec.num_layers {
                hidden.push(Dense::new(&mut store, &format!("dense{i}"), input, h, &mut rng));
                input = h;
            }
            let out = Dense::new(&mut store, "out", input, 1, &mut rng);
            Arch::Dense { hidden, out }
        }
        Family::Dae => {
            // Encoder, bottleneck of width hidden/4, mirrored decoder.
            let encoder = spec.num_layers / 2;
            let decoder = (spec.num_layers - 1) / 2;
            let mut widths = vec![h; encoder];
            widths.push((h / 4).max(1));
            widths.extend(std::iter::repeat_n(h, decoder));
            let mut hidden = Vec::new();
            let mut input = w;
            for (i, &units) in widths.iter().enumerate() {
                hidden.push(Dense::new(&mut store, &format!("dense{i}"), input, units, &mut rng));
                input = units;
            }
            let out = Dense::new(&mut store, "out", input, w, &mut rng);
            Arch::Dense { hidden, out }
        }
        Family::RnnGru | Family::WindowGru => {
            let n = if spec.family == Family::WindowGru { 1 } else { spec.recurrent_layers() };
            let cells = (0..n)
                .map(|i| GruCell::new(&mut store, &format!("gru{i}"), if i == 0 { 1 } else { h }, h, &mut rng))
                .collect();
            let head = Dense::new(&mut store, "out", h, 1, &mut rng);
            Arch::Gru { cells, head }
        }
        Family::Lstm => {
            let cells = (0..spec.recurrent_layers())
                .map(|i| LstmCell::new(&mut store, &format!("lstm{i}"), if i == 0 { 1 } else { h }, h, &mut rng))
                .collect();
            let head = Dense::new(&mut store, "out", h, 1, &mut rng);
            Arch::Lstm { cells, head }
        }
        Family::Seq2point | Family::Seq2seq => {
            let c1 = Conv1d::new(&mut store, "conv1", CONV_KERNEL, 1, CONV1_CHANNELS, ConvPadding::Same, &mut rng);
            let c2 = Conv1d::new(
                &mut store,
                "conv2",
                CONV_KERNEL,
                CONV1_CHANNELS,
                CONV2_CHANNELS,
                ConvPadding::Same,
                &mut rng,
            );
            let dense = Dense::new(&mut store, "dense", w * CONV2_CHANNELS, h, &mut rng);
            let out_width = if spec.family == Family::Seq2point { 1 } else { w };
            let out = Dense::new(&mut store, "out", h, out_width, &mut rng);
            Arch::Conv { c1, c2, dense, out }
        }
        other => return Err(NeuralError::InvalidSpec(format!("`{other}` is not a neural family"))),
    };
    Ok(Network {
        spec: spec.clone(),
        store,
        arch,
        target: target.to_string(),
        input_scaler: None,
        target_scaler: None,
    })
}

impl Network {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_params(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn scalers(&self) -> Option<(Scaler, Scaler)> {
        self.input_scaler.zip(self.target_scaler)
    }

    pub fn set_scalers(&mut self, input: Scaler, target: Scaler) {
        self.input_scaler = Some(input);
        self.target_scaler = Some(target);
    }

    pub fn alignment(&self) -> WindowAlignment {
        match self.spec.family {
            Family::RnnGru | Family::Lstm | Family::WindowGru => WindowAlignment::Trailing,
            _ => WindowAlignment::Centered,
        }
    }

    pub fn output_kind(&self) -> OutputKind {
        match self.spec.family {
            Family::Dae | Family::Seq2seq => OutputKind::Sequence,
            _ => OutputKind::Point,
        }
    }

    pub fn output_width(&self) -> usize {
        match self.output_kind() {
            OutputKind::Point => 1,
            OutputKind::Sequence => self.spec.window,
        }
    }

    /// Offset of the anchor sample inside a window.
    pub fn anchor_offset(&self) -> usize {
        match self.alignment() {
            WindowAlignment::Centered => self.spec.window / 2,
            WindowAlignment::Trailing => self.spec.window - 1,
        }
    }

    /// `x: [batch, window]` (standardized) to `[batch, output_width]`.
    /// Dropout is active only when `rng` is given.
    pub fn forward(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        x: Var,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let drop = Dropout::new(self.spec.dropout)?;
        let batch = tape.shape(x)?[0];
        let w = self.spec.window;
        let out = match &self.arch {
            Arch::Dense { hidden, out } => {
                let mut h = x;
                for d in hidden {
                    h = d.forward(tape, store, h)?;
                    h = tape.relu(h)?;
                    h = drop.forward(tape, h, rng.as_deref_mut())?;
                }
                out.forward(tape, store, h)?
            }
            Arch::Gru { cells, head } => {
                let mut seq = steps(tape, x, w)?;
                for (i, cell) in cells.iter().enumerate() {
                    seq = cell.run(tape, store, &seq)?;
                    if i + 1 < cells.len() {
                        seq = seq
                            .into_iter()
                            .map(|h| drop.forward(tape, h, rng.as_deref_mut()))
                            .collect::<nilm_nn::Result<_>>()?;
                    }
                }
                head.forward(tape, store, *seq.last().expect("window >= 1"))?
            }
            Arch::Lstm { cells, head } => {
                let mut seq = steps(tape, x, w)?;
                for (i, cell) in cells.iter().enumerate() {
                    seq = cell.run(tape, store, &seq)?;
                    if i + 1 < cells.len() {
                        seq = seq
                            .into_iter()
                            .map(|h| drop.forward(tape, h, rng.as_deref_mut()))
                            .collect::<nilm_nn::Result<_>>()?;
                    }
                }
                head.forward(tape, store, *seq.last().expect("window >= 1"))?
            }
            Arch::Conv { c1, c2, dense, out } => {
                let h = tape.reshape(x, &[batch, w, 1])?;
                let h = c1.forward(tape, store, h)?;
                let h = tape.relu(h)?;
                let h = c2.forward(tape, store, h)?;
                let h = tape.relu(h)?;
                let h = tape.reshape(h, &[batch, w * CONV2_CHANNELS])?;
                let h = dense.forward(tape, store, h)?;
                let h = tape.relu(h)?;
                let h = drop.forward(tape, h, rng.as_deref_mut())?;
                out.forward(tape, store, h)?
            }
        };
        Ok(out)
    }

    /// Evaluation-mode loss of `store` on one batch; used for gradient checks.
    pub fn eval_loss(&self, store: &ParamStore, tape: &mut Tape, x: &Tensor, y: &Tensor, loss: LossKind) -> Result<Var> {
        let xv = tape.constant(x.clone())?;
        let out = self.forward(store, tape, xv, None)?;
        Ok(tape.loss(loss, out, y)?)
    }

    /// Standardized-space outputs for every window, in evaluation mode.
    pub(crate) fn predict_windows(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let w = self.spec.window;
        let n = rows.len() / w;
        let mut out = Vec::with_capacity(n * self.output_width());
        for start in (0..n).step_by(PREDICT_BATCH) {
            let end = (start + PREDICT_BATCH).min(n);
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(vec![end - start, w], rows[start * w..end * w].to_vec())?)?;
            let y = self.forward(&self.store, &mut tape, x, None)?;
            out.extend_from_slice(tape.value(y)?.data());
        }
        Ok(out)
    }

    /// Windows over a standardized array with stride 1 (or `stride`).
    pub(crate) fn windows(&self, values: &[f64], stride: usize) -> Result<nilm_core::Windows> {
        Ok(match self.alignment() {
            WindowAlignment::Centered => make_windows(values, self.spec.window, stride, Padding::Edge)?,
            WindowAlignment::Trailing => trailing_windows(values, self.spec.window, stride, Padding::Edge)?,
        })
    }

    /// Predicts the target appliance in watts on the grid of `aggregate`.
    pub fn predict_series(&self, aggregate: &PowerSeries) -> Result<PowerSeries> {
        let (input, target) = self.scalers().ok_or(NeuralError::MissingScaler)?;
        let z: Vec<f64> = aggregate
            .values()
            .iter()
            .map(|&v| if is_gap(v) { 0.0 } else { input.transform(v) })
            .collect();
        let windows = self.windows(&z, 1)?;
        let raw = self.predict_windows(&windows.data)?;
        let standardized = match self.output_kind() {
            OutputKind::Point => raw,
            OutputKind::Sequence => {
                let offset = self.anchor_offset() as i64;
                let starts: Vec<i64> = windows.anchors.iter().map(|&a| a as i64 - offset).collect();
                overlap_average(&raw, self.spec.window, &starts, z.len())?
            }
        };
        Ok(output_series(aggregate, &self.target, target.inverse_all(&standardized))?)
    }

    /// Writes the spec, scalers and parameters as text.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let s = &self.spec;
        writeln!(w, "{FORMAT_HEADER}")?;
        writeln!(w, "family {}", s.family)?;
        writeln!(w, "target {}", self.target)?;
        writeln!(w, "window {}", s.window)?;
        writeln!(w, "num_layers {}", s.num_layers)?;
        writeln!(w, "hidden {}", s.hidden)?;
        writeln!(w, "dropout {}", s.dropout)?;
        writeln!(w, "optimizer {}", optimizer_name(s.optimizer))?;
        writeln!(w, "learning_rate {}", s.learning_rate)?;
        writeln!(w, "loss {}", loss_name(s.loss))?;
        writeln!(w, "epochs {}", s.epochs)?;
        writeln!(w, "batch_size {}", s.batch_size)?;
        writeln!(w, "seed {}", s.seed)?;
        writeln!(w, "train_stride {}", s.train_stride)?;
        if let Some((i, t)) = self.scalers() {
            writeln!(w, "input_scaler {} {}", i.mean, i.std)?;
            writeln!(w, "target_scaler {} {}", t.mean, t.std)?;
        }
        writeln!(w, "params")?;
        self.store.write_text(w)
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let bad = |m: String| NeuralError::Format(m);
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of file".into()))?
                .map_err(|e| bad(e.to_string()))
        };
        if next()?.trim() != FORMAT_HEADER {
            return Err(bad("unsupported header".into()));
        }
        let mut fields = std::collections::BTreeMap::new();
        loop {
            let line = next()?;
            if line.trim() == "params" {
                break;
            }
            let (k, v) = line.split_once(' ').ok_or_else(|| bad(format!("malformed line `{line}`")))?;
            fields.insert(k.to_string(), v.trim().to_string());
        }
        let get = |k: &str| fields.get(k).cloned().ok_or_else(|| bad(format!("missing `{k}`")));
        fn num<T: std::str::FromStr>(k: &str, v: String) -> Result<T> {
            v.parse().map_err(|_| NeuralError::Format(format!("bad value for `{k}`")))
        }
        let family: Family = get("family")?.parse().map_err(|_| bad("unknown family".into()))?;
        let mut spec = NetworkSpec::new(family);
        spec.window = num("window", get("window")?)?;
        spec.num_layers = num("num_layers", get("num_layers")?)?;
        spec.hidden = num("hidden", get("hidden")?)?;
        spec.dropout = num("dropout", get("dropout")?)?;
        spec.optimizer = parse_optimizer(&get("optimizer")?).ok_or_else(|| bad("unknown optimizer".into()))?;
        spec.learning_rate = num("learning_rate", get("learning_rate")?)?;
        spec.loss = parse_loss(&get("loss")?).ok_or_else(|| bad("unknown loss".into()))?;
        spec.epochs = num("epochs", get("epochs")?)?;
        spec.batch_size = num("batch_size", get("batch_size")?)?;
        spec.seed = num("seed", get("seed")?)?;
        spec.train_stride = num("train_stride", get("train_stride")?)?;
        let mut net = build_network(&spec, &get("target")?)?;
        let scaler = |k: &str| -> Result<Option<Scaler>> {
            let Some(v) = fields.get(k) else { return Ok(None) };
            let parts: Vec<&str> = v.split_whitespace().collect();
            match parts.as_slice() {
                [m, s] => Ok(Some(Scaler {
                    mean: num(k, m.to_string())?,
                    std: num(k, s.to_string())?,
                })),
                _ => Err(bad(format!("bad value for `{k}`"))),
            }
        };
        net.input_scaler = scaler("input_scaler")?;
        net.target_scaler = scaler("target_scaler")?;
        let rest: String = std::iter::from_fn(|| next().ok()).map(|l| l + "\n").collect();
        let store = ParamStore::read_text(rest.as_bytes())?;
        let shapes = |s: &ParamStore| s.tensors().iter().map(|t| t.shape().to_vec()).collect::<Vec<_>>();
        if shapes(&store) != shapes(&net.store) {
            return Err(bad("parameter shapes do not match the spec".into()));
        }
        net.store = store;
        Ok(net)
    }
}

const FORMAT_HEADER: &str = "nilm-network v1";

pub(crate) fn optimizer_name(k: OptimizerKind) -> &'static str {
    match k {
        OptimizerKind::Adam => "adam",
        OptimizerKind::Nadam => "nadam",
    }
}

pub(crate) fn parse_optimizer(s: &str) -> Option<OptimizerKind> {
    match s {
        "adam" => Some(OptimizerKind::Adam),
        "nadam" => Some(OptimizerKind::Nadam),
        _ => None,
    }
}

pub(crate) fn loss_name(k: LossKind) -> &'static str {
    match k {
        LossKind::Mse => "mse",
        LossKind::Mae => "mae",
    }
}

pub(crate) fn parse_loss(s: &str) -> Option<LossKind> {
    match s {
        "mse" => Some(LossKind::Mse),
        "mae" => Some(LossKind::Mae),
        _ => None,
    }
}

/// Splits `[batch, window]` into `window` inputs of shape `[batch, 1]`.
fn steps(tape: &mut Tape, x: Var, window: usize) -> Result<Vec<Var>> {
    (0..window).map(|t| Ok(tape.slice_cols(x, t, t + 1)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_parameters() {
        for f in Family::ALL.into_iter().filter(|f| f.is_neural()) {
            let mut spec = NetworkSpec::new(f);
            spec.window = 10;
            spec.hidden = 8;
            spec.seed = 3;
            assert_eq!(build_network(&spec, "a").unwrap(), build_network(&spec, "a").unwrap());
        }
    }

    #[test]
    fn deeper_fcnn_and_dae_have_more_parameters() {
        for f in [Family::Fcnn, Family::Dae] {
            let count = |layers| {
                let mut spec = NetworkSpec::new(f);
                spec.num_layers = layers;
                build_network(&spec, "a").unwrap().num_params()
            };
            assert!(count(5) < count(6) && count(6) < count(7), "{f}");
        }
    }

    #[test]
    fn seq2point_head_is_scalar() {
        let mut spec = NetworkSpec::new(Family::Seq2point);
        spec.window = 20;
        let net = build_network(&spec, "a").unwrap();
        assert_eq!(net.output_width(), 1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[3, 20])).unwrap();
        let y = net.forward(net.store(), &mut tape, x, None).unwrap();
        assert_eq!(tape.shape(y).unwrap(), &[3, 1]);
    }

    #[test]
    fn untrained_network_cannot_predict() {
        let net = build_network(&NetworkSpec::new(Family::Fcnn), "a").unwrap();
        let agg = PowerSeries::new("aggregate", 0, 60, vec![1.0; 100]).unwrap();
        assert_eq!(net.predict_series(&agg).unwrap_err(), NeuralError::MissingScaler);
    }

    #[test]
    fn non_neural_family_rejected() {
        assert!(build_network(&NetworkSpec::new(Family::Co), "a").is_err());
        let mut spec = NetworkSpec::new(Family::Fcnn);
        spec.epochs = 0;
        assert!(build_network(&spec, "a").is_err());
    }
}
