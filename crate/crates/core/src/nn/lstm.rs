//! LSTM + fully connected network with exact BPTT gradients.
//!
//! Gate blocks are stacked row-major in the order input, forget, cell,
//! output. Hidden and cell states start at zero for every window.

use super::{ModelConfig, NnError};
use crate::rng::SplitMix64;

/// Parameters of one LSTM layer: input weights (4h x d), recurrent
/// weights (4h x h) and one bias block (4h).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Fully connected head: linear, ReLU, linear.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub hidden: usize,
    pub head_units: usize,
    pub output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Complete network: stacked LSTM layers plus head.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceNet {
    pub config: ModelConfig,
    pub layers: Vec<LstmLayerParams>,
    pub head: HeadParams,
}

/// Gradients, shape-congruent with [`SequenceNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGrads>,
    pub head: HeadGrads,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(net: &SequenceNet) -> GradientBundle {
        GradientBundle {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    w_ih: vec![0.0; l.w_ih.len()],
                    w_hh: vec![0.0; l.w_hh.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            head: HeadGrads {
                w1: vec![0.0; net.head.w1.len()],
                b1: vec![0.0; net.head.b1.len()],
                w2: vec![0.0; net.head.w2.len()],
                b2: vec![0.0; net.head.b2.len()],
            },
        }
    }

    /// Parameter blocks in the canonical order shared with
    /// [`SequenceNet::blocks_mut`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(&l.w_ih);
            out.push(&l.w_hh);
            out.push(&l.bias);
        }
        out.push(&self.head.w1);
        out.push(&self.head.b1);
        out.push(&self.head.w2);
        out.push(&self.head.b2);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.w_ih.as_mut_slice());
            out.push(l.w_hh.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out.push(self.head.w1.as_mut_slice());
        out.push(self.head.b1.as_mut_slice());
        out.push(self.head.w2.as_mut_slice());
        out.push(self.head.b2.as_mut_slice());
        out
    }

    pub fn add_assign(&mut self, other: &GradientBundle) {
        for (mine, theirs) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out = W x, W row-major (rows x cols).
fn matvec(w: &[f64], x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out[r] = acc;
    }
}

/// out += W^T v.
fn matvec_t_acc(w: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), cols);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let vr = v[r];
        for (o, wi) in out.iter_mut().zip(row) {
            *o += wi * vr;
        }
    }
}

/// W += v (x) x  (outer product accumulate).
fn outer_acc(w: &mut [f64], v: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, vr) in v.iter().enumerate() {
        let row = &mut w[r * cols..(r + 1) * cols];
        for (wi, xi) in row.iter_mut().zip(x) {
            *wi += vr * xi;
        }
    }
}

/// Per-timestep forward cache of one layer.
struct LayerCache {
    // all h-sized per timestep
    i: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    o: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    // layer input per timestep (d-sized)
    x: Vec<Vec<f64>>,
}

impl SequenceNet {
    /// Seeded initialization: weights uniform in [-1/sqrt(h), 1/sqrt(h)],
    /// biases zero except the forget-gate block.
    pub fn init(config: &ModelConfig) -> Result<SequenceNet, NnError> {
        SequenceNet::init_with_forget_bias(config, 1.0)
    }

    pub fn init_with_forget_bias(
        config: &ModelConfig,
        forget_bias: f64,
    ) -> Result<SequenceNet, NnError> {
        config.validate()?;
        let h = config.hidden_units;
        let bound = 1.0 / (h as f64).sqrt();
        let mut rng = SplitMix64::new(config.seed);
        let mut uniform_block =
            |len: usize| -> Vec<f64> { (0..len).map(|_| rng.uniform(-bound, bound)).collect() };

        let mut layers = Vec::with_capacity(config.lstm_layers);
        for l in 0..config.lstm_layers {
            let d = if l == 0 { config.input_dim } else { h };
            let w_ih = uniform_block(4 * h * d);
            let w_hh = uniform_block(4 * h * h);
            let mut bias = vec![0.0; 4 * h];
            for b in bias[h..2 * h].iter_mut() {
                *b = forget_bias;
            }
            layers.push(LstmLayerParams {
                input_dim: d,
                hidden: h,
                w_ih,
                w_hh,
                bias,
            });
        }
        let head = HeadParams {
            hidden: h,
            head_units: config.head_units,
            output_dim: config.output_dim,
            w1: uniform_block(config.head_units * h),
            b1: vec![0.0; config.head_units],
            w2: uniform_block(config.output_dim * config.head_units),
            b2: vec![0.0; config.output_dim],
        };
        Ok(SequenceNet {
            config: config.clone(),
            layers,
            head,
        })
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(&l.w_ih);
            out.push(&l.w_hh);
            out.push(&l.bias);
        }
        out.push(&self.head.w1);
        out.push(&self.head.b1);
        out.push(&self.head.w2);
        out.push(&self.head.b2);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.w_ih.as_mut_slice());
            out.push(l.w_hh.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out.push(self.head.w1.as_mut_slice());
        out.push(self.head.b1.as_mut_slice());
        out.push(self.head.w2.as_mut_slice());
        out.push(self.head.b2.as_mut_slice());
        out
    }

    fn check_window(&self, window: &[f64]) -> Result<(), NnError> {
        let expected = self.config.window_len * self.config.input_dim;
        if window.len() != expected {
            return Err(NnError::ShapeMismatch {
                what: "window",
                expected,
                found: window.len(),
            });
        }
        Ok(())
    }

    /// Runs the LSTM stack over one window and returns the full hidden
    /// sequence of the top layer; the last element is the final hidden
    /// state consumed by the head.
    pub fn lstm_hidden_sequence(&self, window: &[f64]) -> Result<Vec<Vec<f64>>, NnError> {
        self.check_window(window)?;
        let steps = self.config.window_len;
        let h = self.config.hidden_units;
        let mut inputs: Vec<Vec<f64>> = (0..steps)
            .map(|t| window[t * self.config.input_dim..(t + 1) * self.config.input_dim].to_vec())
            .collect();
        for layer in &self.layers {
            let d = layer.input_dim;
            let mut hidden = vec![0.0; h];
            let mut cell = vec![0.0; h];
            let mut z = vec![0.0; 4 * h];
            let mut zr = vec![0.0; 4 * h];
            let mut outputs = Vec::with_capacity(steps);
            for x in &inputs {
                matvec(&layer.w_ih, x, 4 * h, d, &mut z);
                matvec(&layer.w_hh, &hidden, 4 * h, h, &mut zr);
                for k in 0..4 * h {
                    z[k] += zr[k] + layer.bias[k];
                }
                for k in 0..h {
                    let i = sigmoid(z[k]);
                    let f = sigmoid(z[h + k]);
                    let g = z[2 * h + k].tanh();
                    let o = sigmoid(z[3 * h + k]);
                    cell[k] = f * cell[k] + i * g;
                    hidden[k] = o * cell[k].tanh();
                }
                outputs.push(hidden.clone());
            }
            inputs = outputs;
        }
        Ok(inputs)
    }

    /// Full forward pass: LSTM stack, then the head on the final hidden
    /// state. Deterministic given parameters.
    pub fn forward(&self, window: &[f64]) -> Result<Vec<f64>, NnError> {
        let hidden_seq = self.lstm_hidden_sequence(window)?;
        let last = hidden_seq.last().expect("window_len >= 1");
        Ok(head_forward(&self.head, last))
    }

    fn forward_cached(&self, window: &[f64]) -> (Vec<LayerCache>, Vec<f64>) {
        let steps = self.config.window_len;
        let h = self.config.hidden_units;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut inputs: Vec<Vec<f64>> = (0..steps)
            .map(|t| window[t * self.config.input_dim..(t + 1) * self.config.input_dim].to_vec())
            .collect();
        for layer in &self.layers {
            let d = layer.input_dim;
            let mut cache = LayerCache {
                i: Vec::with_capacity(steps),
                f: Vec::with_capacity(steps),
                g: Vec::with_capacity(steps),
                o: Vec::with_capacity(steps),
                c: Vec::with_capacity(steps),
                tanh_c: Vec::with_capacity(steps),
                h: Vec::with_capacity(steps),
                x: std::mem::take(&mut inputs),
            };
            let mut hidden = vec![0.0; h];
            let mut cell = vec![0.0; h];
            let mut z = vec![0.0; 4 * h];
            let mut zr = vec![0.0; 4 * h];
            for x in &cache.x {
                matvec(&layer.w_ih, x, 4 * h, d, &mut z);
                matvec(&layer.w_hh, &hidden, 4 * h, h, &mut zr);
                for k in 0..4 * h {
                    z[k] += zr[k] + layer.bias[k];
                }
                let mut it = vec![0.0; h];
                let mut ft = vec![0.0; h];
                let mut gt = vec![0.0; h];
                let mut ot = vec![0.0; h];
                let mut tc = vec![0.0; h];
                for k in 0..h {
                    it[k] = sigmoid(z[k]);
                    ft[k] = sigmoid(z[h + k]);
                    gt[k] = z[2 * h + k].tanh();
                    ot[k] = sigmoid(z[3 * h + k]);
                    cell[k] = ft[k] * cell[k] + it[k] * gt[k];
                    tc[k] = cell[k].tanh();
                    hidden[k] = ot[k] * tc[k];
                }
                cache.i.push(it);
                cache.f.push(ft);
                cache.g.push(gt);
                cache.o.push(ot);
                cache.c.push(cell.clone());
                cache.tanh_c.push(tc);
                cache.h.push(hidden.clone());
            }
            inputs = cache.h.clone();
            caches.push(cache);
        }
        let last = inputs.last().expect("window_len >= 1");
        let output = head_forward(&self.head, last);
        (caches, output)
    }

    /// Exact gradients of the batch MSE with respect to every parameter,
    /// accumulated over the batch by backpropagation through time.
    /// Returns (batch mse, gradients).
    pub fn batch_loss_and_grad(
        &self,
        windows: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<(f64, GradientBundle), NnError> {
        self.check_batch(windows, targets)?;
        let mut grads = GradientBundle::zeros_like(self);
        let mut loss_sum = 0.0;
        let denom = (windows.len() * self.config.output_dim) as f64;
        for (window, target) in windows.iter().zip(targets) {
            let (caches, pred) = self.forward_cached(window);
            let mut dy = vec![0.0; pred.len()];
            for k in 0..pred.len() {
                let diff = pred[k] - target[k];
                loss_sum += diff * diff;
                dy[k] = 2.0 * diff / denom;
            }
            self.backward_sample(&caches, &dy, &mut grads);
        }
        Ok((loss_sum / denom, grads))
    }

    /// Forward-only batch MSE.
    pub fn batch_loss(&self, windows: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, NnError> {
        self.check_batch(windows, targets)?;
        let denom = (windows.len() * self.config.output_dim) as f64;
        let mut loss_sum = 0.0;
        for (window, target) in windows.iter().zip(targets) {
            let pred = self.forward(window)?;
            for k in 0..pred.len() {
                let diff = pred[k] - target[k];
                loss_sum += diff * diff;
            }
        }
        Ok(loss_sum / denom)
    }

    fn check_batch(&self, windows: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(), NnError> {
        if windows.len() != targets.len() {
            return Err(NnError::ShapeMismatch {
                what: "batch targets",
                expected: windows.len(),
                found: targets.len(),
            });
        }
        if windows.is_empty() {
            return Err(NnError::ShapeMismatch {
                what: "batch",
                expected: 1,
                found: 0,
            });
        }
        for w in windows {
            self.check_window(w)?;
        }
        for t in targets {
            if t.len() != self.config.output_dim {
                return Err(NnError::ShapeMismatch {
                    what: "target",
                    expected: self.config.output_dim,
                    found: t.len(),
                });
            }
        }
        Ok(())
    }

    fn backward_sample(&self, caches: &[LayerCache], dy: &[f64], grads: &mut GradientBundle) {
        let h = self.config.hidden_units;
        let steps = self.config.window_len;
        let head = &self.head;

        // Head backward on the final hidden state of the top layer.
        let top = caches.last().expect("at least one layer");
        let h_last = &top.h[steps - 1];
        let mut a1 = vec![0.0; head.head_units];
        matvec(&head.w1, h_last, head.head_units, h, &mut a1);
        for (a, b) in a1.iter_mut().zip(&head.b1) {
            *a += b;
        }
        let relu: Vec<f64> = a1.iter().map(|v| v.max(0.0)).collect();

        let hg = &mut grads.head;
        outer_acc(&mut hg.w2, dy, &relu);
        for (b, d) in hg.b2.iter_mut().zip(dy) {
            *b += d;
        }
        let mut dr = vec![0.0; head.head_units];
        matvec_t_acc(&head.w2, dy, head.output_dim, head.head_units, &mut dr);
        let da1: Vec<f64> = dr
            .iter()
            .zip(&a1)
            .map(|(d, a)| if *a > 0.0 { *d } else { 0.0 })
            .collect();
        outer_acc(&mut hg.w1, &da1, h_last);
        for (b, d) in hg.b1.iter_mut().zip(&da1) {
            *b += d;
        }
        let mut dh_top = vec![0.0; h];
        matvec_t_acc(&head.w1, &da1, head.head_units, h, &mut dh_top);

        // dh injections per timestep for the layer being processed; the
        // top layer only receives the head gradient at the final step.
        let mut inject: Vec<Vec<f64>> = vec![vec![0.0; h]; steps];
        inject[steps - 1] = dh_top;

        for (layer_idx, layer) in self.layers.iter().enumerate().rev() {
            let cache = &caches[layer_idx];
            let lg = &mut grads.layers[layer_idx];
            let d_in = layer.input_dim;
            let mut next_inject: Vec<Vec<f64>> = if layer_idx > 0 {
                vec![vec![0.0; h]; steps]
            } else {
                Vec::new()
            };

            let mut dh = vec![0.0; h];
            let mut dc = vec![0.0; h];
            let mut dz = vec![0.0; 4 * h];
            for t in (0..steps).rev() {
                for k in 0..h {
                    dh[k] += inject[t][k];
                }
                let (i, f, g, o) = (&cache.i[t], &cache.f[t], &cache.g[t], &cache.o[t]);
                let tc = &cache.tanh_c[t];
                for k in 0..h {
                    let do_k = dh[k] * tc[k];
                    let dc_k = dc[k] + dh[k] * o[k] * (1.0 - tc[k] * tc[k]);
                    let di_k = dc_k * g[k];
                    let dg_k = dc_k * i[k];
                    let c_prev = if t == 0 { 0.0 } else { cache.c[t - 1][k] };
                    let df_k = dc_k * c_prev;
                    dz[k] = di_k * i[k] * (1.0 - i[k]);
                    dz[h + k] = df_k * f[k] * (1.0 - f[k]);
                    dz[2 * h + k] = dg_k * (1.0 - g[k] * g[k]);
                    dz[3 * h + k] = do_k * o[k] * (1.0 - o[k]);
                    dc[k] = dc_k * f[k];
                }
                outer_acc(&mut lg.w_ih, &dz, &cache.x[t]);
                if t > 0 {
                    outer_acc(&mut lg.w_hh, &dz, &cache.h[t - 1]);
                }
                for (b, d) in lg.bias.iter_mut().zip(&dz) {
                    *b += d;
                }
                if layer_idx > 0 {
                    matvec_t_acc(&layer.w_ih, &dz, 4 * h, d_in, &mut next_inject[t]);
                }
                // dh flowing to t-1 through the recurrent weights
                for v in dh.iter_mut() {
                    *v = 0.0;
                }
                if t > 0 {
                    matvec_t_acc(&layer.w_hh, &dz, 4 * h, h, &mut dh);
                }
            }
            if layer_idx > 0 {
                inject = next_inject;
            }
        }
    }
}

/// Standard LSTM recurrence over a window; free-function form of
/// [`SequenceNet::lstm_hidden_sequence`]. Returns (hidden sequence of the
/// top layer, final hidden state).
pub fn lstm_forward(
    net: &SequenceNet,
    window: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<f64>), NnError> {
    let seq = net.lstm_hidden_sequence(window)?;
    let last = seq.last().expect("window_len >= 1").clone();
    Ok((seq, last))
}

/// linear -> ReLU -> linear on a final hidden state.
pub fn head_forward(head: &HeadParams, hidden: &[f64]) -> Vec<f64> {
    debug_assert_eq!(hidden.len(), head.hidden);
    let mut a1 = vec![0.0; head.head_units];
    matvec(&head.w1, hidden, head.head_units, head.hidden, &mut a1);
    for (a, b) in a1.iter_mut().zip(&head.b1) {
        *a += b;
    }
    for a in a1.iter_mut() {
        *a = a.max(0.0);
    }
    let mut out = vec![0.0; head.output_dim];
    matvec(&head.w2, &a1, head.output_dim, head.head_units, &mut out);
    for (o, b) in out.iter_mut().zip(&head.b2) {
        *o += b;
    }
    out
}
