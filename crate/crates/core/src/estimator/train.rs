use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{EstimatorModel, Prepared, TrainExample};
use super::EstimatorError;
use crate::stats::spearman;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub grad_accumulation: usize,
    pub epochs: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            grad_accumulation: 2,
            epochs: 10,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(EstimatorError::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.grad_accumulation == 0 {
            return Err(EstimatorError::InvalidArgument(
                "batch size and gradient accumulation must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// MSE over the whole training set after the epoch.
    pub train_mse: f64,
    pub valid_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_train_mse: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based); `None` when the final
    /// parameters were kept for lack of a validation score.
    pub best_epoch: Option<usize>,
}

/// Sums minibatch gradients and hands back their mean.
#[derive(Debug, Clone)]
pub struct GradientAccumulator {
    sum: Vec<f64>,
    count: usize,
}

impl GradientAccumulator {
    pub fn new(num_params: usize) -> Self {
        GradientAccumulator {
            sum: vec![0.0; num_params],
            count: 0,
        }
    }

    pub fn add(&mut self, gradient: &[f64]) {
        for (s, g) in self.sum.iter_mut().zip(gradient) {
            *s += g;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Mean of the accumulated gradients, or `None` if nothing was added.
    /// Resets the accumulator.
    pub fn take_mean(&mut self) -> Option<Vec<f64>> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let mean = self.sum.iter().map(|s| s / n).collect();
        self.sum.iter_mut().for_each(|s| *s = 0.0);
        self.count = 0;
        Some(mean)
    }
}

fn validation_spearman(model: &EstimatorModel, valid: &[TrainExample]) -> Option<f64> {
    if valid.len() < 2 {
        return None;
    }
    let mut preds = Vec::with_capacity(valid.len());
    for ex in valid {
        let reference = if model.mode().needs_reference() {
            ex.reference.as_ref()
        } else {
            None
        };
        preds.push(model.score_embeddings(&ex.src, &ex.mt, reference, false).ok()?.score);
    }
    let targets: Vec<f64> = valid.iter().map(|e| e.target).collect();
    spearman(&preds, &targets).ok()
}

/// Minibatch gradient descent on mean squared error. Returns the model with
/// the best validation Spearman (or the final one if validation never yields
/// a score), with parameters rounded to f32.
pub fn train(
    initial: &EstimatorModel,
    train_set: &[TrainExample],
    valid: &[TrainExample],
    config: &TrainConfig,
) -> Result<(EstimatorModel, TrainHistory), EstimatorError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(EstimatorError::EmptyTrainingSet);
    }
    for (index, ex) in train_set.iter().chain(valid).enumerate() {
        if !(0.0..=1.0).contains(&ex.target) {
            return Err(EstimatorError::InvalidTarget {
                index,
                value: ex.target,
            });
        }
    }
    let mut model = initial.clone();
    model.train_config = config.clone();
    let prepared = train_set
        .iter()
        .map(|e| model.prepare(e))
        .collect::<Result<Vec<Prepared>, _>>()?;
    for ex in valid {
        model.prepare(ex)?;
    }
    let all: Vec<&Prepared> = prepared.iter().collect();
    let initial_train_mse = model.prepared_loss(&all);
    let mut history = TrainHistory {
        initial_train_mse,
        epochs: Vec::new(),
        best_epoch: None,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let n_params = model.params().len();
    let mut grad = vec![0.0; n_params];
    let mut acc = GradientAccumulator::new(n_params);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &prepared[i]).collect();
            let loss = model.prepared_loss_and_gradient(&batch, &mut grad);
            if !loss.is_finite() {
                return Err(EstimatorError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            acc.add(&grad);
            if acc.count() == config.grad_accumulation {
                let step = acc.take_mean().expect("non-empty");
                model.apply_gradient(&step, config.learning_rate);
            }
        }
        if let Some(step) = acc.take_mean() {
            model.apply_gradient(&step, config.learning_rate);
        }
        let train_mse = model.prepared_loss(&all);
        if !train_mse.is_finite() {
            return Err(EstimatorError::NonFiniteLoss {
                epoch,
                batch: order.len().div_ceil(config.batch_size),
            });
        }
        let valid_spearman = validation_spearman(&model, valid);
        log::info!("epoch {epoch}: train mse {train_mse:.6}, valid spearman {valid_spearman:?}");
        if let Some(rho) = valid_spearman {
            if best.as_ref().is_none_or(|(b, _)| rho > *b) {
                best = Some((rho, model.params().to_vec()));
                history.best_epoch = Some(epoch);
            }
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_mse,
            valid_spearman,
        });
    }
    if let Some((_, params)) = best {
        model.params_mut().copy_from_slice(&params);
    }
    model.quantize();
    Ok((model, history))
}
