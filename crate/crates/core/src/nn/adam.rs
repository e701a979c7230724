//! Adam with bias correction over the network's flat parameter order.

use super::{GradientBundle, SequenceNet, TrainConfig};

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &SequenceNet) -> AdamState {
        let n = net.param_count();
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One Adam update in place. Moments align with the canonical block
/// order of [`SequenceNet::blocks_mut`].
pub fn adam_step(
    net: &mut SequenceNet,
    grads: &GradientBundle,
    state: &mut AdamState,
    cfg: &TrainConfig,
    lr: f64,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let mut offset = 0;
    let grad_blocks = grads.blocks();
    for (block_idx, params) in net.blocks_mut().into_iter().enumerate() {
        let g = grad_blocks[block_idx];
        for (k, p) in params.iter_mut().enumerate() {
            let idx = offset + k;
            let gk = g[k];
            state.m[idx] = cfg.beta1 * state.m[idx] + (1.0 - cfg.beta1) * gk;
            state.v[idx] = cfg.beta2 * state.v[idx] + (1.0 - cfg.beta2) * gk * gk;
            let m_hat = state.m[idx] / bc1;
            let v_hat = state.v[idx] / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        offset += g.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;

    fn tiny_net() -> SequenceNet {
        let cfg = ModelConfig {
            input_dim: 1,
            hidden_units: 1,
            lstm_layers: 1,
            head_units: 1,
            output_dim: 1,
            window_len: 2,
            seed: 0,
        };
        SequenceNet::init(&cfg).unwrap()
    }

    fn unit_grads(net: &SequenceNet, value: f64) -> GradientBundle {
        let mut g = GradientBundle::zeros_like(net);
        for block in g.blocks_mut() {
            for v in block.iter_mut() {
                *v = value;
            }
        }
        g
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = v_hat = g on step one, so the update is lr / (1 + eps/|g|) ~ lr.
        let mut net = tiny_net();
        let before: Vec<f64> = net.blocks().iter().flat_map(|b| b.to_vec()).collect();
        let grads = unit_grads(&net, 1.0);
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::default();
        adam_step(&mut net, &grads, &mut state, &cfg, 1e-3);
        let after: Vec<f64> = net.blocks().iter().flat_map(|b| b.to_vec()).collect();
        for (b, a) in before.iter().zip(&after) {
            let delta = b - a;
            assert!((delta - 1e-3).abs() < 1e-9, "delta {delta}");
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_grad_leaves_params_unchanged() {
        // With zero moments and a zero gradient, m_hat is exactly 0 and
        // the parameters do not move.
        let mut net = tiny_net();
        let before: Vec<f64> = net.blocks().iter().flat_map(|b| b.to_vec()).collect();
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::default();
        let zeros = unit_grads(&net, 0.0);
        adam_step(&mut net, &zeros, &mut state, &cfg, 1e-3);
        let after: Vec<f64> = net.blocks().iter().flat_map(|b| b.to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn zero_grad_decays_existing_moments() {
        let mut net = tiny_net();
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::default();
        let ones = unit_grads(&net, 1.0);
        let zeros = unit_grads(&net, 0.0);
        adam_step(&mut net, &ones, &mut state, &cfg, 1e-3);
        let m_before = state.m.clone();
        adam_step(&mut net, &zeros, &mut state, &cfg, 1e-3);
        for (m0, m1) in m_before.iter().zip(&state.m) {
            assert!(m1.abs() < m0.abs());
        }
    }

    #[test]
    fn equal_grads_update_identically() {
        let mut net = tiny_net();
        let grads = unit_grads(&net, 0.37);
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::default();
        let before: Vec<f64> = net.blocks().iter().flat_map(|b| b.to_vec()).collect();
        adam_step(&mut net, &grads, &mut state, &cfg, 2e-3);
        let after: Vec<f64> = net.blocks().iter().flat_map(|b| b.to_vec()).collect();
        let deltas: Vec<f64> = before.iter().zip(&after).map(|(b, a)| b - a).collect();
        for d in &deltas {
            assert!((d - deltas[0]).abs() < 1e-15);
        }
    }
}
