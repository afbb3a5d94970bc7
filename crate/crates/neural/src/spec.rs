use nilm_core::Family;
use nilm_nn::{LossKind, OptimizerKind};

use crate::{NeuralError, Result};

/// Architecture and training settings for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub family: Family,
    /// Window size, or sequence length for the recurrent families.
    pub window: usize,
    /// Dense depth for fcnn and dae; stacked cells for rnn_gru / lstm
    /// (capped at 2); unused by the other families.
    pub num_layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Train on every `train_stride`-th window only.
    pub train_stride: usize,
}

pub const MAX_RECURRENT_LAYERS: usize = 2;

impl NetworkSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            window: 50,
            num_layers: 5,
            hidden: 64,
            dropout: 0.2,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            loss: LossKind::Mse,
            epochs: 20,
            batch_size: 64,
            seed: 0,
            train_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NeuralError::InvalidSpec(m));
        if !self.family.is_neural() {
            return bad(format!("`{}` is not a neural family", self.family));
        }
        if self.window < 1 {
            return bad("window must be >= 1".into());
        }
        if self.num_layers < 1 || self.hidden < 1 {
            return bad("num_layers and hidden must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size < 1 || self.train_stride < 1 {
            return bad("batch_size and train_stride must be >= 1".into());
        }
        Ok(())
    }

    pub(crate) fn recurrent_layers(&self) -> usize {
        self.num_layers.min(MAX_RECURRENT_LAYERS)
    }
}
