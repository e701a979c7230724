//! Sequence-regression kernel: LSTM layers, fully connected head, MSE
//! loss, exact gradients via backpropagation through time, Adam, and a
//! cosine warm-up learning-rate schedule.
//!
//! The kernel is deliberately small and dependency-free: plain `Vec<f64>`
//! parameter blocks, explicit loops, and a seeded generator make every
//! training run bit-reproducible in single-threaded mode.

mod adam;
mod lstm;
mod schedule;
mod train;

pub mod grad_check;

pub use adam::{adam_step, AdamState};
pub use lstm::{
    head_forward, lstm_forward, GradientBundle, HeadParams, LstmLayerParams, SequenceNet,
};
pub use schedule::{cosine_warmup_lr, resolved_warmup_steps};
pub use train::{train, EpochLoss};

use thiserror::Error;

/// Architecture of one sequence regressor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub lstm_layers: usize,
    pub head_units: usize,
    pub output_dim: usize,
    pub window_len: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let counts = [
            ("input_dim", self.input_dim),
            ("hidden_units", self.hidden_units),
            ("lstm_layers", self.lstm_layers),
            ("head_units", self.head_units),
            ("output_dim", self.output_dim),
            ("window_len", self.window_len),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(NnError::BadConfig(format!("{name} must be at least 1")));
            }
        }
        if self.output_dim > 2 {
            return Err(NnError::BadConfig(
                "output_dim must be 1 (emissions) or 2 (features)".to_string(),
            ));
        }
        Ok(())
    }
}

/// Optimization settings. `warmup_steps = None` resolves to 5% of the
/// total step count. `threads = 1` is the deterministic default; larger
/// values change floating-point summation order within a batch only.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub warmup_steps: Option<usize>,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub forget_bias_init: f64,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            base_lr: 1e-3,
            warmup_steps: None,
            batch_size: 64,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            forget_bias_init: 1.0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(NnError::BadConfig("betas must lie in (0, 1)".to_string()));
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(NnError::BadConfig("eps must be positive".to_string()));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(NnError::BadConfig("base_lr must be positive".to_string()));
        }
        if self.batch_size < 1 {
            return Err(NnError::BadConfig(
                "batch_size must be at least 1".to_string(),
            ));
        }
        if self.threads < 1 {
            return Err(NnError::BadConfig("threads must be at least 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("{what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite loss on batch {batch}")]
    NonFiniteLoss { batch: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Exact analytic gradients of the batch MSE via backpropagation through
/// time, accumulated over the whole window for every parameter.
pub fn backward(
    net: &SequenceNet,
    windows: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<GradientBundle, NnError> {
    let (_, grads) = net.batch_loss_and_grad(windows, targets)?;
    Ok(grads)
}

/// Mean of squared differences over all elements.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64, NnError> {
    if pred.len() != target.len() {
        return Err(NnError::ShapeMismatch {
            what: "mse_loss operands",
            expected: target.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(NnError::ShapeMismatch {
            what: "mse_loss operands",
            expected: 1,
            found: 0,
        });
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_basic_cases() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[1.0], &[4.0]).unwrap(), 9.0);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig {
            input_dim: 3,
            hidden_units: 32,
            lstm_layers: 1,
            head_units: 32,
            output_dim: 1,
            window_len: 10,
            seed: 0,
        };
        assert!(cfg.validate().is_ok());
        cfg.output_dim = 3;
        assert!(cfg.validate().is_err());
        cfg.output_dim = 0;
        assert!(cfg.validate().is_err());

        let mut tcfg = TrainConfig::default();
        assert!(tcfg.validate().is_ok());
        tcfg.beta2 = 1.0;
        assert!(tcfg.validate().is_err());
    }
}
