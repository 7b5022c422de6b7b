//! Full-batch training with Adam and best-validation checkpoint selection.

use serde::{Deserialize, Serialize};

use super::network::{loss_and_gradients, predict, ModelInputs, ModelParams};
use crate::error::{FairgeError, Result};
use crate::linalg::Matrix;

/// Adam with coupled (L2) weight decay: the decay term is added to the
/// gradient before the moment updates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors
            .iter()
            .map(|t| Matrix::zeros(t.value.rows(), t.value.cols()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Matrix]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((tensor, g), (m, v)) in params
            .tensors
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let w = tensor.value.data_mut();
            for (k, wk) in w.iter_mut().enumerate() {
                let gk = g.data()[k] + self.weight_decay * *wk;
                let mk = &mut m.data_mut()[k];
                *mk = self.beta1 * *mk + (1.0 - self.beta1) * gk;
                let vk = &mut v.data_mut()[k];
                *vk = self.beta2 * *vk + (1.0 - self.beta2) * gk * gk;
                let m_hat = m.data()[k] / bc1;
                let v_hat = v.data()[k] / bc2;
                *wk -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose (pre-update) parameters were returned.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Hyper-parameters consumed by [`train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

fn fraction_correct(pred: &[u8], labels: &[u8], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().filter(|&&i| pred[i] == labels[i]).count() as f64 / idx.len() as f64
}

/// Trains `params` in place. Every epoch evaluates the loss and validation
/// accuracy of the current parameters, remembers them if the validation
/// accuracy strictly improves, then takes one Adam step. The best snapshot
/// is written back at the end.
pub fn train(
    params: &mut ModelParams,
    inputs: &ModelInputs,
    labels: &[u8],
    train_idx: &[usize],
    val_idx: &[usize],
    opts: &TrainOptions,
) -> Result<TrainHistory> {
    if opts.epochs == 0 {
        return Err(FairgeError::InvalidArgument("epochs must be at least 1".into()));
    }
    if let Some(&i) = train_idx.iter().chain(val_idx).find(|&&i| i >= labels.len()) {
        return Err(FairgeError::InvalidArgument(format!("node {i} out of range")));
    }
    let mut adam = Adam::new(params, opts.lr, opts.weight_decay);
    let mut best: Option<(usize, f64, ModelParams)> = None;
    let mut epochs = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let (loss, grads, logits) = loss_and_gradients(params, inputs, labels, train_idx, 1.0)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(FairgeError::Divergence { epoch, loss });
        }
        let val_accuracy = fraction_correct(&predict(&logits), labels, val_idx);
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|b| val_accuracy > b.1) {
            best = Some((epoch, val_accuracy, params.clone()));
        }
        adam.step(params, &grads);
        if !params.is_finite() {
            return Err(FairgeError::Divergence { epoch, loss: f64::NAN });
        }
        log::debug!("epoch {epoch}: loss {loss:.6}, val acc {val_accuracy:.4}");
    }
    let (best_epoch, best_val_accuracy, snapshot) = best.expect("at least one epoch");
    *params = snapshot;
    Ok(TrainHistory {
        epochs,
        best_epoch,
        best_val_accuracy,
    })
}
