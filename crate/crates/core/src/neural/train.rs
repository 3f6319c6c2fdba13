use super::{adam_step, AdamState, LossBreakdown, MlpModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::NormalizedData;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// A differentiable batch loss over network outputs.
pub trait Objective: Sync {
    /// Batch-mean loss and its gradient with respect to `outputs`.
    fn evaluate(&self, outputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(LossBreakdown, Array2<f64>)>;
}

/// Mean squared error over every output entry.
#[derive(Debug, Clone, Copy, Default)]
pub struct MseObjective;

impl Objective for MseObjective {
    fn evaluate(&self, outputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(LossBreakdown, Array2<f64>)> {
        if outputs.dim() != targets.dim() {
            return Err(Error::contract("output and target shapes differ"));
        }
        let diff = &outputs - &targets;
        let n = diff.len() as f64;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / n;
        let breakdown = LossBreakdown {
            total: loss,
            d: loss,
            p: 0.0,
            c: 0.0,
        };
        Ok((breakdown, diff * (2.0 / n)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1e-5..=1e-1).contains(&self.learning_rate) {
            return Err(Error::contract(format!("learning rate {} outside [1e-5, 1e-1]", self.learning_rate)));
        }
        if !(4..=128).contains(&self.batch_size) {
            return Err(Error::contract(format!("batch size {} outside [4, 128]", self.batch_size)));
        }
        if self.max_epochs == 0 {
            return Err(Error::contract("max_epochs must be positive"));
        }
        Ok(())
    }
}

/// Stops after `patience` consecutive epochs without strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    /// 1-based epoch of the best value, 0 before the first observation.
    pub best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records the metric of `epoch`; returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, value: f64) -> bool {
        if value < self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full training-set loss at the end of each epoch.
    pub epoch_losses: Vec<LossBreakdown>,
    /// Validation MAE in normalised target space.
    pub epoch_val_mae: Vec<f64>,
    /// 1-based.
    pub best_epoch: usize,
    pub wall_time_s: f64,
    /// Forward-pass time per validation sample, seconds.
    pub inference_time_s: f64,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.epoch_losses.len()
    }

    pub fn best_val_mae(&self) -> f64 {
        self.epoch_val_mae[self.best_epoch - 1]
    }
}

pub(crate) fn mean_abs_error(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let n = a.len() as f64;
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n
}

const SHUFFLE_DOMAIN: u64 = 0x5348;

/// Mini-batch Adam with per-epoch reshuffling and early stopping on the
/// validation MAE. Returns the best-epoch snapshot.
pub fn train(
    mut model: MlpModel,
    train_data: &NormalizedData,
    val_data: &NormalizedData,
    cfg: &TrainConfig,
    objective: &dyn Objective,
) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::contract("training and validation sets must be non-empty"));
    }
    for d in [train_data, val_data] {
        if d.inputs.ncols() != model.input_dim() || d.targets.ncols() != model.output_dim() {
            return Err(Error::contract("dataset width does not match the model"));
        }
    }
    let start = Instant::now();
    let n = train_data.len();
    let mut adam = AdamState::new(&model);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut epoch_losses = Vec::new();
    let mut epoch_val_mae = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.seed, &[SHUFFLE_DOMAIN, epoch as u64]));
        for batch in order.chunks(cfg.batch_size) {
            let x = train_data.inputs.select(Axis(0), batch);
            let t = train_data.targets.select(Axis(0), batch);
            let cache = model.forward_cached(x.view())?;
            let (loss, grad) = objective.evaluate(cache.output().view(), t.view())?;
            if !loss.total.is_finite() {
                return Err(Error::Training(format!("non-finite loss in epoch {epoch}")));
            }
            let grads = model.backward(&cache, grad.view())?;
            adam_step(&mut model, &grads, &mut adam, cfg.learning_rate);
        }
        let out = model.forward(train_data.inputs.view())?;
        let (loss, _) = objective.evaluate(out.view(), train_data.targets.view())?;
        let val_out = model.forward(val_data.inputs.view())?;
        let val_mae = mean_abs_error(val_out.view(), val_data.targets.view());
        if !loss.total.is_finite() || !val_mae.is_finite() {
            return Err(Error::Training(format!("training diverged in epoch {epoch}")));
        }
        epoch_losses.push(loss);
        epoch_val_mae.push(val_mae);
        if stopper.observe(epoch, val_mae) {
            best = model.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let _ = best.forward(val_data.inputs.view())?;
    let inference_time_s = t0.elapsed().as_secs_f64() / val_data.len() as f64;
    log::debug!(
        "trained {} epochs, best epoch {} (val MAE {:.4e})",
        epoch_losses.len(),
        stopper.best_epoch,
        stopper.best
    );
    Ok((
        best,
        TrainReport {
            epoch_losses,
            epoch_val_mae,
            best_epoch: stopper.best_epoch,
            wall_time_s,
            inference_time_s,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_improvement_never_stops() {
        let mut s = EarlyStopping::new(20);
        for e in 1..=100 {
            assert!(s.observe(e, 1.0 / e as f64));
            assert!(!s.should_stop());
        }
        assert_eq!(s.best_epoch, 100);
    }

    #[test]
    fn plateau_after_epoch_three_stops_at_23() {
        let mut s = EarlyStopping::new(20);
        let mut stopped = None;
        for e in 1..=100 {
            let v = if e <= 3 { 1.0 / e as f64 } else { 1.0 / 3.0 };
            s.observe(e, v);
            if s.should_stop() {
                stopped = Some(e);
                break;
            }
        }
        assert_eq!(stopped, Some(23));
        assert_eq!(s.best_epoch, 3);
    }

    #[test]
    fn config_ranges() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { learning_rate: 0.2, ..ok }.validate().is_err());
        assert!(TrainConfig { batch_size: 2, ..ok }.validate().is_err());
        assert!(TrainConfig { batch_size: 129, ..ok }.validate().is_err());
    }
}
