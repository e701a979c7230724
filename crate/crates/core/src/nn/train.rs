//! Mini-batch training loop: seeded shuffling, cosine warm-up, Adam.

use super::adam::{adam_step, AdamState};
use super::lstm::{GradientBundle, SequenceNet};
use super::schedule::{cosine_warmup_lr, resolved_warmup_steps};
use super::{ModelConfig, NnError, TrainConfig};
use crate::rng::SplitMix64;

/// Borrowed (windows, targets) validation pair.
pub type ValSet<'a> = (&'a [Vec<f64>], &'a [Vec<f64>]);

/// One row of the loss history, in scaled target space. `val_mse` is
/// absent when no validation set was supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

/// Trains a sequence regressor on pre-scaled windows.
///
/// Deterministic given the model seed in single-threaded mode; with
/// `threads > 1` the per-batch gradient is accumulated in fixed chunk
/// order, so results stay reproducible for a fixed thread count but may
/// differ from the single-threaded sum in the last bits.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    windows: &[Vec<f64>],
    targets: &[Vec<f64>],
    val: Option<ValSet<'_>>,
) -> Result<(SequenceNet, Vec<EpochLoss>), NnError> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if windows.len() != targets.len() {
        return Err(NnError::ShapeMismatch {
            what: "training targets",
            expected: windows.len(),
            found: targets.len(),
        });
    }
    if windows.is_empty() {
        return Err(NnError::BadConfig("no training windows".to_string()));
    }

    let net = SequenceNet::init_with_forget_bias(model_cfg, train_cfg.forget_bias_init)?;
    let mut net = net;
    let mut history = Vec::with_capacity(train_cfg.epochs);
    if train_cfg.epochs == 0 {
        return Ok((net, history));
    }

    let n = windows.len();
    let batches_per_epoch = n.div_ceil(train_cfg.batch_size);
    let total_steps = train_cfg.epochs * batches_per_epoch;
    let warmup = resolved_warmup_steps(train_cfg, total_steps);
    if total_steps <= warmup {
        return Err(NnError::BadConfig(format!(
            "schedule needs more than {warmup} steps, got {total_steps}"
        )));
    }

    let mut state = AdamState::new(&net);
    // Shuffle stream is separate from the weight-init stream so the two
    // can never alias.
    let mut shuffle_rng = SplitMix64::new(model_cfg.seed ^ 0xD1B5_4A32_D192_ED03);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;

    for epoch in 0..train_cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut sse_weighted = 0.0;
        for chunk in order.chunks(train_cfg.batch_size) {
            let batch_windows: Vec<Vec<f64>> = chunk.iter().map(|&i| windows[i].clone()).collect();
            let batch_targets: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
            let (loss, grads) =
                batch_gradient(&net, &batch_windows, &batch_targets, train_cfg.threads)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged { epoch });
            }
            sse_weighted += loss * chunk.len() as f64;
            let lr = cosine_warmup_lr(step, total_steps, train_cfg)?;
            adam_step(&mut net, &grads, &mut state, train_cfg, lr);
            step += 1;
        }
        let train_mse = sse_weighted / n as f64;
        let val_mse = match val {
            Some((vw, vt)) if !vw.is_empty() => Some(net.batch_loss(vw, vt)?),
            _ => None,
        };
        if !train_mse.is_finite() {
            return Err(NnError::Diverged { epoch });
        }
        history.push(EpochLoss {
            epoch,
            train_mse,
            val_mse,
        });
    }
    Ok((net, history))
}

fn batch_gradient(
    net: &SequenceNet,
    windows: &[Vec<f64>],
    targets: &[Vec<f64>],
    threads: usize,
) -> Result<(f64, GradientBundle), NnError> {
    if threads <= 1 || windows.len() < 2 * threads {
        return net.batch_loss_and_grad(windows, targets);
    }
    // Data-parallel accumulation: each chunk contributes a partial sum of
    // per-sample gradients of the *batch* loss; chunk results merge in
    // chunk-index order. The per-sample normalization uses the full batch
    // size, so partials add up to the sequential gradient modulo float
    // association.
    let chunk_len = windows.len().div_ceil(threads);
    let batch_size = windows.len();
    let parts: Vec<Result<(f64, GradientBundle), NnError>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (wch, tch) in windows.chunks(chunk_len).zip(targets.chunks(chunk_len)) {
            handles.push(scope.spawn(move || partial_gradient(net, wch, tch, batch_size)));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut total = GradientBundle::zeros_like(net);
    let mut loss_sum = 0.0;
    for part in parts {
        let (sse, grads) = part?;
        loss_sum += sse;
        total.add_assign(&grads);
    }
    Ok((
        loss_sum / (batch_size * net.config.output_dim) as f64,
        total,
    ))
}

/// Gradient of the batch loss restricted to a sample chunk; returns the
/// chunk's raw squared-error sum so the caller can finish the mean.
fn partial_gradient(
    net: &SequenceNet,
    windows: &[Vec<f64>],
    targets: &[Vec<f64>],
    batch_size: usize,
) -> Result<(f64, GradientBundle), NnError> {
    // Reuse the full-batch path on the chunk, then rescale: the chunk
    // gradient of (1/(c*out)) sum equals (c/B) times the desired
    // contribution to the (1/(B*out)) batch mean.
    let (chunk_mse, mut grads) = net.batch_loss_and_grad(windows, targets)?;
    let scale = windows.len() as f64 / batch_size as f64;
    for block in grads.blocks_mut() {
        for v in block.iter_mut() {
            *v *= scale;
        }
    }
    Ok((
        chunk_mse * (windows.len() * net.config.output_dim) as f64,
        grads,
    ))
}
