//! Central finite-difference gradient verification.
//!
//! The numerical gradient perturbs every parameter of a cloned network
//! and re-evaluates the forward-only batch loss, so it shares no code
//! path with the analytic BPTT accumulation it checks.

use super::lstm::{GradientBundle, SequenceNet};
use super::NnError;

/// Numerical gradient of the batch MSE by central differences with
/// half-step `h`.
pub fn numerical_gradient(
    net: &SequenceNet,
    windows: &[Vec<f64>],
    targets: &[Vec<f64>],
    h: f64,
) -> Result<GradientBundle, NnError> {
    let mut grads = GradientBundle::zeros_like(net);
    let n_blocks = net.blocks().len();
    for block_idx in 0..n_blocks {
        let block_len = net.blocks()[block_idx].len();
        for k in 0..block_len {
            let mut plus = net.clone();
            plus.blocks_mut()[block_idx][k] += h;
            let mut minus = net.clone();
            minus.blocks_mut()[block_idx][k] -= h;
            let lp = plus.batch_loss(windows, targets)?;
            let lm = minus.batch_loss(windows, targets)?;
            grads.blocks_mut()[block_idx][k] = (lp - lm) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Conventional small-magnitude floor for [`max_relative_error`]: central
/// differences at h = 1e-5 on unit-scale losses carry ~1e-11 of absolute
/// roundoff, so components below this magnitude cannot support a
/// relative comparison and are bounded absolutely instead.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Worst relative disagreement between two gradient bundles.
///
/// Components where both gradients are below `floor` in magnitude are
/// compared absolutely against `floor`.
pub fn max_relative_error(analytic: &GradientBundle, numeric: &GradientBundle, floor: f64) -> f64 {
    let mut worst = 0.0f64;
    for (a_block, n_block) in analytic.blocks().iter().zip(numeric.blocks()) {
        for (a, n) in a_block.iter().zip(n_block) {
            let scale = a.abs().max(n.abs());
            let err = if scale < floor {
                (a - n).abs() / floor
            } else {
                (a - n).abs() / scale
            };
            worst = worst.max(err);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;
    use crate::rng::SplitMix64;

    #[test]
    fn analytic_matches_central_differences() {
        for seed in [1u64, 2, 3] {
            let cfg = ModelConfig {
                input_dim: 3,
                hidden_units: 4,
                lstm_layers: 2,
                head_units: 4,
                output_dim: 2,
                window_len: 10,
                seed,
            };
            let net = SequenceNet::init(&cfg).unwrap();
            let mut rng = SplitMix64::new(100 + seed);
            let windows: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..30).map(|_| rng.next_f64()).collect())
                .collect();
            let targets: Vec<Vec<f64>> = (0..3)
                .map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
                .collect();
            let (_, analytic) = net.batch_loss_and_grad(&windows, &targets).unwrap();
            let numeric = numerical_gradient(&net, &windows, &targets, 1e-5).unwrap();
            let err = max_relative_error(&analytic, &numeric, GRAD_CHECK_FLOOR);
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }
}
