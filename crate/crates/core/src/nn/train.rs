//! Plain minibatch SGD with categorical cross-entropy.
//!
//! Training is deterministic for a fixed seed and dataset order: the epoch
//! shuffle and every dropout mask come from one seeded stream, and per-sample
//! gradients are accumulated in batch order even when computed in parallel.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::audio::{canonicalize, enumerate_windows, load_wav};
use crate::error::{Error, Result};
use crate::features::log_mel_snippet;
use crate::manifest::{CorpusManifest, Split};
use crate::nn::layers::dropout_mask;
use crate::nn::model::{snippet_tensor, CnnModel, Gradients};
use crate::nn::tensor::{Real, Tensor};

/// Hyperparameters for [`sgd_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Step size; zero is allowed and leaves parameters unchanged.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Dropout rate between the two dense layers during training.
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 30,
            seed: 42,
            dropout_rate: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} must lie in [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// One labeled training input.
#[derive(Debug, Clone)]
pub struct TrainSample<T> {
    pub input: Tensor<T>,
    pub label: usize,
}

/// Metrics recorded after each epoch. Train numbers come from the training
/// pass itself (dropout active); validation accuracy is inference-mode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Trains the model in place, returning per-epoch metrics.
///
/// Updates are `theta -= lr * mean(batch gradients)`. A non-finite loss
/// aborts with [`Error::Diverged`] naming the epoch and step.
pub fn sgd_train<T: Real>(
    model: &mut CnnModel<T>,
    train: &[TrainSample<T>],
    val: &[TrainSample<T>],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    for (what, set) in [("train", train), ("validation", val)] {
        if let Some(s) = set.iter().find(|s| s.label >= model.arch.num_classes) {
            return Err(Error::Config(format!(
                "{what} label {} out of range for {} classes",
                s.label, model.arch.num_classes
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;

        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let masks: Vec<Option<Vec<bool>>> = batch
                .iter()
                .map(|_| {
                    (cfg.dropout_rate > 0.0).then(|| {
                        dropout_mask(model.arch.dense1_units, cfg.dropout_rate, &mut rng)
                    })
                })
                .collect();

            let results: Result<Vec<(T, bool, Gradients<T>)>> = batch
                .par_iter()
                .zip(&masks)
                .map(|(&idx, mask)| {
                    let sample = &train[idx];
                    let dropout = mask.as_ref().map(|m| (m.as_slice(), cfg.dropout_rate));
                    let cache = model.forward(&sample.input, dropout)?;
                    let predicted = argmax(&cache.logits);
                    let (loss, grads) = model.backward(&cache, sample.label)?;
                    Ok((loss, predicted == sample.label, grads))
                })
                .collect();

            let mut acc = Gradients::zeros_like(model);
            for (loss, hit, grads) in results? {
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, step });
                }
                loss_sum += loss.as_f64();
                correct += hit as usize;
                acc.add(&grads);
            }
            model.apply_gradients(&acc, T::of(cfg.learning_rate / batch.len() as f64));
            let exploded = model
                .params()
                .iter()
                .any(|p| p.data().iter().any(|v| !v.is_finite()));
            if exploded {
                return Err(Error::Diverged { epoch, step });
            }
        }

        let val_correct: usize = val
            .par_iter()
            .map(|s| {
                let cache = model.forward(&s.input, None)?;
                Ok(usize::from(argmax(&cache.logits) == s.label))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();

        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            val_acc: if val.is_empty() {
                f64::NAN
            } else {
                val_correct as f64 / val.len() as f64
            },
        });
    }
    Ok(history)
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Loads every clip of a manifest split and converts each 1 s window into a
/// labeled sample, in manifest order then window order.
pub fn snippet_dataset<T: Real>(
    manifest: &CorpusManifest,
    split: Split,
    hop: f64,
) -> Result<Vec<TrainSample<T>>> {
    let entries: Vec<_> = manifest.split_entries(split).collect();
    let per_clip: Result<Vec<Vec<TrainSample<T>>>> = entries
        .par_iter()
        .map(|entry| {
            let clip = canonicalize(load_wav(&entry.path)?);
            let windows = enumerate_windows(&clip, hop)?;
            windows
                .iter()
                .map(|w| {
                    let snippet = log_mel_snippet(&clip, w)?;
                    Ok(TrainSample {
                        input: snippet_tensor(&snippet),
                        label: entry.speaker,
                    })
                })
                .collect()
        })
        .collect();
    Ok(per_clip?.into_iter().flatten().collect())
}
