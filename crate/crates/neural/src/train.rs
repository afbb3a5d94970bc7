use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nilm_core::{mae, AlignedDataset, Scaler};
use nilm_nn::{clip_global_norm, Optimizer, Tape, Tensor};

use crate::network::{build_network, Network, OutputKind};
use crate::spec::NetworkSpec;
use crate::{NeuralError, Result};

const CLIP_NORM: f64 = 10.0;

/// Per-epoch mean training loss (standardized units) and validation MAE
/// (watts).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub train_loss: Vec<f64>,
    pub val_mae: Vec<f64>,
}

/// Trains a fresh network for `target` for exactly `spec.epochs` epochs.
/// Scalers are fitted on `train` only.
pub fn train(spec: &NetworkSpec, train: &AlignedDataset, val: &AlignedDataset, target: &str) -> Result<(Network, TrainingHistory)> {
    let mut net = build_network(spec, target)?;
    let train_target = train
        .appliance(target)
        .ok_or_else(|| NeuralError::UnknownTarget(target.to_string()))?;
    let val_target = val
        .appliance(target)
        .ok_or_else(|| NeuralError::UnknownTarget(target.to_string()))?;
    if train.len() < 2 {
        return Err(NeuralError::EmptyTraining);
    }
    let input_scaler = Scaler::fit(train.aggregate().values())?;
    let target_scaler = Scaler::fit(train_target.values())?;
    net.set_scalers(input_scaler, target_scaler);

    let x_all = input_scaler.transform_all(train.aggregate().values());
    let y_all = target_scaler.transform_all(train_target.values());
    let inputs = net.windows(&x_all, spec.train_stride)?;
    let targets: Vec<f64> = match net.output_kind() {
        OutputKind::Point => inputs.anchors.iter().map(|&a| y_all[a]).collect(),
        OutputKind::Sequence => net.windows(&y_all, spec.train_stride)?.data,
    };
    let rows = inputs.rows();
    let (w, out_w) = (spec.window, net.output_width());

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut optimizer = Optimizer::new(spec.optimizer, spec.learning_rate, net.store());
    let mut history = TrainingHistory::default();
    let mut order: Vec<usize> = (0..rows).collect();

    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(spec.batch_size).enumerate() {
            let mut xb = Vec::with_capacity(batch.len() * w);
            let mut yb = Vec::with_capacity(batch.len() * out_w);
            for &r in batch {
                xb.extend_from_slice(inputs.row(r));
                yb.extend_from_slice(&targets[r * out_w..(r + 1) * out_w]);
            }
            let y = Tensor::new(vec![batch.len(), out_w], yb)?;
            let mut tape = Tape::new();
            let step = (|| -> Result<_> {
                let x = tape.constant(Tensor::new(vec![batch.len(), w], xb)?)?;
                let out = net.forward(net.store(), &mut tape, x, Some(&mut rng))?;
                let loss = tape.loss(spec.loss, out, &y)?;
                let value = tape.value(loss)?.data()[0];
                Ok((value, tape.backward(loss, net.store())?))
            })();
            let (value, mut grads) = match step {
                Ok(v) => v,
                Err(NeuralError::Nn(nilm_nn::NnError::NonFinite(_))) => {
                    return Err(NeuralError::NonFiniteLoss { epoch, batch: b })
                }
                Err(e) => return Err(e),
            };
            if !clip_global_norm(&mut grads, CLIP_NORM).is_finite() {
                return Err(NeuralError::NonFiniteLoss { epoch, batch: b });
            }
            optimizer.step(net.store_mut(), &grads)?;
            total += value * batch.len() as f64;
        }
        history.train_loss.push(total / rows as f64);
        let pred = net.predict_series(val.aggregate())?;
        history.val_mae.push(mae(val_target.values(), pred.values())?);
    }
    Ok((net, history))
}
