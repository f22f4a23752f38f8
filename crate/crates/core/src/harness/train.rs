use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::metrics::{mean_iou, IOU_THRESHOLD};
use crate::data::{Lcg, Partition, Sample};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::nn::{adam_step, bce_loss, bce_loss_backward, AdamState, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 64, lr: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub model: String,
    pub scale: String,
    pub partition_seed: u64,
    /// Mean of per-image IoUs over the test split.
    pub test_iou: f64,
    /// Sample-weighted mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

fn lookup<'a>(dataset: &'a [Sample], ids: &[String]) -> Result<Vec<&'a Sample>> {
    let index: HashMap<&str, &Sample> = dataset.iter().map(|s| (s.id.as_str(), s)).collect();
    ids.iter()
        .map(|id| index.get(id.as_str()).copied().ok_or_else(|| Error::Argument(format!("unknown sample id {id}"))))
        .collect()
}

fn stack_batch(samples: &[&Sample]) -> Result<(Tensor, Tensor)> {
    let images: Vec<Tensor> = samples.iter().map(|s| s.image.clone()).collect();
    let masks: Vec<Tensor> = samples.iter().map(|s| s.mask.clone()).collect();
    Ok((Tensor::stack(&images)?, Tensor::stack(&masks)?))
}

/// Mean per-image IoU of `model` on `samples`, evaluated in chunks of
/// `batch_size`.
pub fn evaluate(model: &Model, samples: &[&Sample], batch_size: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty split".into()));
    }
    let mut total = 0.0;
    for chunk in samples.chunks(batch_size.max(1)) {
        let (x, y) = stack_batch(chunk)?;
        total += mean_iou(&model.forward(&x)?, &y, IOU_THRESHOLD)? * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Adam + BCE over the partition's train split, reshuffled every epoch by an
/// [`Lcg`] seeded with the partition seed; returns the test-split IoU.
pub fn train(model: &mut Model, partition: &Partition, dataset: &[Sample], cfg: &TrainConfig) -> Result<RunResult> {
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.lr.is_nan() || cfg.lr <= 0.0 {
        return Err(Error::Config(format!("invalid training settings {cfg:?}")));
    }
    let train_set = lookup(dataset, &partition.train_ids)?;
    let test_set = lookup(dataset, &partition.test_ids)?;
    if train_set.is_empty() {
        return Err(Error::Argument("empty train split".into()));
    }
    let batch_size = if cfg.batch_size > train_set.len() {
        log::warn!(
            "batch size {} exceeds the {}-sample train split; using one batch per epoch",
            cfg.batch_size,
            train_set.len()
        );
        train_set.len()
    } else {
        cfg.batch_size
    };

    let mut states: Vec<AdamState> =
        model.params().iter().map(|(_, _, t)| AdamState::with_lr(t.len(), cfg.lr)).collect();
    let mut rng = Lcg::new(partition.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut weighted = 0.0;
        for chunk in order.chunks(batch_size) {
            let samples: Vec<&Sample> = chunk.iter().map(|&i| train_set[i]).collect();
            let (x, y) = stack_batch(&samples)?;
            let tape = model.forward_with_tape(&x)?;
            let loss = bce_loss(tape.output(), &y)?;
            let dloss = bce_loss_backward(tape.output(), &y)?;
            model.zero_grad();
            model.backward(&tape, &dloss)?;
            for ((_, _, p), state) in model.params_mut().into_iter().zip(states.iter_mut()) {
                let grad = p.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]);
                adam_step(p.data_mut(), &grad, state)?;
            }
            weighted += loss * chunk.len() as f64;
        }
        let mean = weighted / train_set.len() as f64;
        log::info!("{} seed {} epoch {}: loss {mean:.5}", model.config().tag(), partition.seed, epoch + 1);
        epoch_losses.push(mean);
    }

    let test_iou = evaluate(model, &test_set, batch_size)?;
    Ok(RunResult {
        model: model.config().variant.tag().to_string(),
        scale: model.config().scale.tag().to_string(),
        partition_seed: partition.seed,
        test_iou,
        epoch_losses,
    })
}
