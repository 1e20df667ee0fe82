use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::exec;
use crate::experiments::metrics::{ConfusionCounts, MetricsReport};
use crate::layers::{Layer, Mode};
use crate::model::Model;
use crate::numerics::{argmax_rows, softmax_cross_entropy, Scalar, SeededRng, Tensor};

/// One labeled multichannel sequence, stored time-major (`[steps × channels]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub values: Vec<f32>,
    pub steps: usize,
    pub channels: usize,
    pub label: usize,
}

impl Sample {
    pub fn new(values: Vec<f32>, steps: usize, channels: usize, label: usize) -> Result<Self> {
        if values.len() != steps * channels || steps == 0 || channels == 0 {
            return Err(Error::InvalidTensor(format!(
                "sample with {} values cannot be {steps}×{channels}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            steps,
            channels,
            label,
        })
    }
}

/// Stacks samples into a `[T, B, C]` batch.
pub fn assemble_batch<T: Scalar>(samples: &[&Sample]) -> Result<(Tensor<T>, Vec<usize>)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::NoData("empty batch".into()))?;
    let (steps, ch) = (first.steps, first.channels);
    if let Some(bad) = samples.iter().find(|s| s.steps != steps || s.channels != ch) {
        return Err(Error::ShapeMismatch {
            op: "assemble_batch",
            left: vec![steps, ch],
            right: vec![bad.steps, bad.channels],
        });
    }
    let b = samples.len();
    let mut data = vec![T::zero(); steps * b * ch];
    for (bi, s) in samples.iter().enumerate() {
        for t in 0..steps {
            let src = &s.values[t * ch..(t + 1) * ch];
            let dst = &mut data[(t * b + bi) * ch..(t * b + bi + 1) * ch];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d = T::from_f64_lossy(v as f64);
            }
        }
    }
    let labels = samples.iter().map(|s| s.label).collect();
    Ok((Tensor::new(vec![steps, b, ch], data)?, labels))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpochSelection {
    BestValidationAccuracy,
    Last,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub recurrent_clip: f64,
    pub shuffle: bool,
    pub epoch_selection: EpochSelection,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 4e-4,
            batch_size: 30,
            epochs: 100,
            seed: 0,
            recurrent_clip: 1.0,
            shuffle: true,
            epoch_selection: EpochSelection::BestValidationAccuracy,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("batch_size and epochs must be at least 1"));
        }
        if !(self.recurrent_clip > 0.0) {
            return Err(Error::config("recurrent_clip must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_sensitivity: Option<f64>,
    pub val_specificity: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loss: f64,
    pub predictions: Vec<usize>,
    pub counts: ConfusionCounts,
}

impl Evaluation {
    pub fn metrics(&self) -> Result<MetricsReport> {
        MetricsReport::from_counts(self.counts)
    }
}

/// Eval-mode loss and predictions; batches are scored in parallel and
/// reduced in batch order.
pub fn evaluate<T: Scalar>(model: &Model<T>, samples: &[Sample], batch_size: usize) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::NoData("evaluation set is empty".into()));
    }
    let bs = batch_size.max(1);
    let batches = samples.len().div_ceil(bs);
    let results = exec::map_range(batches, |k| -> Result<(f64, Vec<usize>)> {
        let chunk: Vec<&Sample> = samples[k * bs..((k + 1) * bs).min(samples.len())]
            .iter()
            .collect();
        let (x, labels) = assemble_batch::<T>(&chunk)?;
        let logits = model.predict(&x)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        Ok((loss.as_f64() * chunk.len() as f64, argmax_rows(&logits)))
    });
    let mut total = 0.0;
    let mut predictions = Vec::with_capacity(samples.len());
    for r in results {
        let (l, p) = r?;
        total += l;
        predictions.extend(p);
    }
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    Ok(Evaluation {
        loss: total / samples.len() as f64,
        counts: ConfusionCounts::from_predictions(&predictions, &labels),
        predictions,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: Model<T>,
    pub history: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub optimizer_steps: u64,
}

/// Mini-batch training. The ragged tail of each shuffled epoch is dropped.
pub fn train<T: Scalar>(
    mut model: Model<T>,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let per_epoch = train_set.len() / config.batch_size;
    if per_epoch == 0 {
        return Err(Error::NoData(format!(
            "{} training samples cannot fill one batch of {}",
            train_set.len(),
            config.batch_size
        )));
    }
    if config.epoch_selection == EpochSelection::BestValidationAccuracy && val_set.is_empty() {
        return Err(Error::NoData("best-validation selection needs a validation set".into()));
    }
    for layer in model.layers_mut() {
        if let Layer::IndRnn(p) = layer {
            p.recurrent_clip = config.recurrent_clip;
        }
    }
    model.clip_recurrent();

    let mut rng = SeededRng::new(config.seed).derive_named("shuffle");
    let mut optimizer = Optimizer::for_model(config.optimizer, &model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Model<T>)> = None;

    for epoch in 1..=config.epochs {
        if config.shuffle {
            rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        for (bi, idx) in order.chunks_exact(config.batch_size).enumerate() {
            let batch_no = bi + 1;
            let batch: Vec<&Sample> = idx.iter().map(|&i| &train_set[i]).collect();
            let (x, labels) = assemble_batch::<T>(&batch)?;
            let wrap = |e: Error| Error::Training {
                epoch,
                batch: batch_no,
                source: Box::new(e),
            };
            let (logits, cache) = model.forward(&x, Mode::Train).map_err(wrap)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels).map_err(wrap)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_no });
            }
            let grads = model.backward(&cache, &dlogits).map_err(wrap)?;
            model.commit_running_stats(&cache);
            optimizer
                .step_model(&mut model, &grads, config.learning_rate)
                .map_err(wrap)?;
            loss_sum += loss.as_f64();
        }

        let record = if val_set.is_empty() {
            EpochRecord {
                epoch,
                train_loss: loss_sum / per_epoch as f64,
                val_loss: f64::NAN,
                val_accuracy: f64::NAN,
                val_sensitivity: None,
                val_specificity: None,
            }
        } else {
            let eval = evaluate(&model, val_set, config.batch_size)?;
            let m = eval.metrics()?;
            EpochRecord {
                epoch,
                train_loss: loss_sum / per_epoch as f64,
                val_loss: eval.loss,
                val_accuracy: m.accuracy,
                val_sensitivity: m.sensitivity,
                val_specificity: m.specificity,
            }
        };
        log::debug!(
            "epoch {epoch}: train_loss {:.4} val_loss {:.4} val_acc {:.4}",
            record.train_loss,
            record.val_loss,
            record.val_accuracy
        );
        if config.epoch_selection == EpochSelection::BestValidationAccuracy
            && best.as_ref().is_none_or(|(acc, _, _)| record.val_accuracy > *acc)
        {
            best = Some((record.val_accuracy, epoch, model.clone()));
        }
        history.push(record);
    }

    let steps = optimizer.steps_taken();
    let (model, selected_epoch) = match best {
        Some((_, epoch, m)) => (m, epoch),
        None => (model, config.epochs),
    };
    Ok(TrainOutcome {
        model,
        history,
        selected_epoch,
        optimizer_steps: steps,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// `epoch,train_loss,val_loss,val_accuracy,val_sensitivity,val_specificity`
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_accuracy,val_sensitivity,val_specificity\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{},{}",
            r.epoch,
            r.train_loss,
            r.val_loss,
            r.val_accuracy,
            opt(r.val_sensitivity),
            opt(r.val_specificity)
        );
    }
    s
}
