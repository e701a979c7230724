//! Cosine learning-rate schedule with linear warm-up.

use super::{NnError, TrainConfig};

/// Warm-up length: the configured value, or 5% of the total step count
/// (at least 1) when unset.
pub fn resolved_warmup_steps(cfg: &TrainConfig, total_steps: usize) -> usize {
    cfg.warmup_steps
        .unwrap_or_else(|| (total_steps / 20).max(1))
}

/// Learning rate at `step` (0-based) of `total_steps`.
///
/// Warm-up ramps linearly so the last warm-up step reaches `base_lr`;
/// afterwards the rate follows half a cosine down to ~0 at the final step.
pub fn cosine_warmup_lr(
    step: usize,
    total_steps: usize,
    cfg: &TrainConfig,
) -> Result<f64, NnError> {
    let warmup = resolved_warmup_steps(cfg, total_steps);
    if total_steps <= warmup {
        return Err(NnError::BadConfig(format!(
            "total steps ({total_steps}) must exceed warmup steps ({warmup})"
        )));
    }
    if step >= total_steps {
        return Err(NnError::BadConfig(format!(
            "step {step} out of range for {total_steps} total steps"
        )));
    }
    if step < warmup {
        return Ok(cfg.base_lr * (step + 1) as f64 / warmup as f64);
    }
    let progress = (step - warmup) as f64 / (total_steps - warmup) as f64;
    Ok(cfg.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(warmup: usize) -> TrainConfig {
        TrainConfig {
            base_lr: 1e-3,
            warmup_steps: Some(warmup),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn warmup_endpoint_reaches_base_lr() {
        let c = cfg(10);
        let lr = cosine_warmup_lr(9, 100, &c).unwrap();
        assert!((lr - 1e-3).abs() < 1e-18);
        // ramp is linear
        let lr0 = cosine_warmup_lr(0, 100, &c).unwrap();
        assert!((lr0 - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn decay_midpoint_is_half_base() {
        let c = cfg(10);
        // midpoint of the decay segment: step - warmup = 45 of 90
        let lr = cosine_warmup_lr(55, 100, &c).unwrap();
        assert!((lr - 0.5e-3).abs() < 1e-15);
    }

    #[test]
    fn last_step_is_nearly_zero() {
        let c = cfg(10);
        let lr = cosine_warmup_lr(99, 100, &c).unwrap();
        // cos at 89/90 of pi is close to -1
        assert!(lr < 2e-6);
        assert!(lr > 0.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        let c = cfg(100);
        assert!(cosine_warmup_lr(0, 100, &c).is_err());
        let c = cfg(5);
        assert!(cosine_warmup_lr(100, 100, &c).is_err());
    }

    #[test]
    fn default_warmup_is_five_percent() {
        let c = TrainConfig::default();
        assert_eq!(resolved_warmup_steps(&c, 1000), 50);
        assert_eq!(resolved_warmup_steps(&c, 10), 1);
    }
}
