//! A small fully connected network with ReLU hidden layers, a scalar linear
//! output, inverted dropout and an Adam optimizer.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

/// Weights stored input-major: `weights[k * out_dim + o]` connects input `k`
/// to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn uniform<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Layer {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        Layer {
            in_dim,
            out_dim,
            weights: (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
            bias: (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
        }
    }

    fn zeros_like(&self) -> Layer {
        Layer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn accumulate_sparse(&self, input: &[(u32, f64)], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for &(k, x) in input {
            let row = &self.weights[k as usize * self.out_dim..][..self.out_dim];
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }

    fn accumulate_dense(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (k, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.weights[k * self.out_dim..][..self.out_dim];
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Gradients with the same shapes as the network, plus which first-layer
/// input rows received any gradient.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    touched: Vec<bool>,
    touched_list: Vec<usize>,
}

impl Gradients {
    pub fn new(net: &Mlp) -> Gradients {
        Gradients {
            layers: net.layers.iter().map(Layer::zeros_like).collect(),
            touched: vec![false; net.input_dim()],
            touched_list: Vec::new(),
        }
    }

    /// Resets to zero, clearing only first-layer rows that were written.
    pub fn clear(&mut self) {
        let first = &mut self.layers[0];
        for &k in &self.touched_list {
            first.weights[k * first.out_dim..][..first.out_dim].fill(0.0);
            self.touched[k] = false;
        }
        self.touched_list.clear();
        first.bias.fill(0.0);
        for layer in &mut self.layers[1..] {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
    }
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// Post-activation (and post-dropout) outputs of each hidden layer.
    hidden: Vec<Vec<f64>>,
    /// Dropout multipliers per hidden unit (0 or 1/(1−p)); empty when off.
    masks: Vec<Vec<f64>>,
    output: f64,
}

impl Mlp {
    /// Network `input_dim → hidden[0] → … → 1` with seeded uniform fan-in init.
    pub fn new<R: Rng>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Mlp {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Mlp {
            layers: dims.windows(2).map(|w| Layer::uniform(w[0], w[1], rng)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Checks that layer shapes chain to a scalar and every weight is finite.
    pub fn validate(&self) -> Result<(), String> {
        if self.layers.is_empty() {
            return Err("network has no layers".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(format!("layer {i} has inconsistent parameter lengths"));
            }
            if i > 0 && self.layers[i - 1].out_dim != l.in_dim {
                return Err(format!("layer {i} input does not match layer {} output", i - 1));
            }
            if l.weights.iter().chain(&l.bias).any(|w| !w.is_finite()) {
                return Err(format!("layer {i} has non-finite parameters"));
            }
        }
        if self.layers.last().map(|l| l.out_dim) != Some(1) {
            return Err("final layer must have one output".into());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|w| w.is_finite()))
    }

    /// Inference forward pass; dropout is never applied.
    pub fn forward(&self, input: &[(u32, f64)]) -> f64 {
        let mut trace = Trace::default();
        self.run(input, None, &mut trace)
    }

    /// Forward pass recording activations for [`Mlp::backward`], sampling a
    /// dropout mask when `dropout > 0`.
    pub fn forward_train(&self, input: &[(u32, f64)], dropout: f64, rng: &mut dyn RngCore, trace: &mut Trace) -> f64 {
        if dropout > 0.0 {
            self.run(input, Some((dropout, rng)), trace)
        } else {
            self.run(input, None, trace)
        }
    }

    fn run(&self, input: &[(u32, f64)], mut dropout_rng: Option<(f64, &mut dyn RngCore)>, trace: &mut Trace) -> f64 {
        let dropout = dropout_rng.as_ref().map_or(0.0, |(p, _)| *p);
        let hidden_layers = self.layers.len() - 1;
        trace.hidden.resize(hidden_layers, Vec::new());
        trace
            .masks
            .resize(if dropout > 0.0 { hidden_layers } else { 0 }, Vec::new());
        let keep = 1.0 / (1.0 - dropout);
        for l in 0..hidden_layers {
            let layer = &self.layers[l];
            let mut out = std::mem::take(&mut trace.hidden[l]);
            out.resize(layer.out_dim, 0.0);
            if l == 0 {
                layer.accumulate_sparse(input, &mut out);
            } else {
                layer.accumulate_dense(&trace.hidden[l - 1], &mut out);
            }
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
            if let Some((_, rng)) = dropout_rng.as_mut() {
                let mask = &mut trace.masks[l];
                mask.clear();
                mask.extend((0..layer.out_dim).map(|_| if rng.gen::<f64>() < dropout { 0.0 } else { keep }));
                for (v, m) in out.iter_mut().zip(mask.iter()) {
                    *v *= m;
                }
            }
            trace.hidden[l] = out;
        }
        let last = self.layers.last().expect("at least one layer");
        let mut out = [0.0];
        if hidden_layers == 0 {
            last.accumulate_sparse(input, &mut out);
        } else {
            last.accumulate_dense(&trace.hidden[hidden_layers - 1], &mut out);
        }
        trace.output = out[0];
        out[0]
    }

    /// Adds the gradient of a loss with `d loss / d output = grad_out` for the
    /// sample recorded in `trace`.
    pub fn backward(&self, input: &[(u32, f64)], trace: &Trace, grad_out: f64, grads: &mut Gradients) {
        let n = self.layers.len();
        let mut delta = vec![grad_out];
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            for (gb, d) in g.bias.iter_mut().zip(&delta) {
                *gb += d;
            }
            if l == 0 {
                for &(k, x) in input {
                    let k = k as usize;
                    let row = &mut g.weights[k * layer.out_dim..][..layer.out_dim];
                    for (gw, d) in row.iter_mut().zip(&delta) {
                        *gw += x * d;
                    }
                    if !grads.touched[k] {
                        grads.touched[k] = true;
                        grads.touched_list.push(k);
                    }
                }
                break;
            }
            let prev = &trace.hidden[l - 1];
            let mut next_delta = vec![0.0; layer.in_dim];
            for (k, &a) in prev.iter().enumerate() {
                let wrow = &layer.weights[k * layer.out_dim..][..layer.out_dim];
                if a != 0.0 {
                    let grow = &mut g.weights[k * layer.out_dim..][..layer.out_dim];
                    for (gw, d) in grow.iter_mut().zip(&delta) {
                        *gw += a * d;
                    }
                    // Active ReLU unit: propagate, scaled by its dropout mask.
                    let mut s: f64 = wrow.iter().zip(&delta).map(|(w, d)| w * d).sum();
                    if let Some(mask) = trace.masks.get(l - 1) {
                        s *= mask[k];
                    }
                    next_delta[k] = s;
                }
            }
            delta = next_delta;
        }
    }

    /// Mean squared error over `(input, target)` samples and its gradient,
    /// without dropout.
    pub fn mse_and_gradient(&self, samples: &[(Vec<(u32, f64)>, f64)]) -> (f64, Gradients) {
        let mut grads = Gradients::new(self);
        let mut trace = Trace::default();
        let n = samples.len() as f64;
        let mut loss = 0.0;
        for (x, t) in samples {
            let y = self.run(x, None, &mut trace);
            let e = y - t;
            loss += e * e / n;
            self.backward(x, &trace, 2.0 * e / n, &mut grads);
        }
        (loss, grads)
    }
}

/// Adam with bias correction, updating every parameter each step.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: net.layers.iter().map(Layer::zeros_like).collect(),
            v: net.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        };
        for l in 0..net.layers.len() {
            let (p, g) = (&mut net.layers[l], &grads.layers[l]);
            let (m, v) = (&mut self.m[l], &mut self.v[l]);
            update(&mut p.weights, &g.weights, &mut m.weights, &mut v.weights);
            update(&mut p.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_computed_forward() {
        // 3 -> 2 -> 1
        let net = Mlp {
            layers: vec![
                Layer {
                    in_dim: 3,
                    out_dim: 2,
                    weights: vec![1.0, -1.0, 0.5, 2.0, -1.0, 0.0],
                    bias: vec![0.1, -0.2],
                },
                Layer {
                    in_dim: 2,
                    out_dim: 1,
                    weights: vec![2.0, -3.0],
                    bias: vec![0.25],
                },
            ],
        };
        // x = (1, 2, 3): z1 = 0.1 + 1 + 1 − 3 = −0.9 → 0; z2 = −0.2 − 1 + 4 + 0 = 2.8
        let y = net.forward(&[(0, 1.0), (1, 2.0), (2, 3.0)]);
        assert!((y - (0.25 - 3.0 * 2.8)).abs() < 1e-12);
        assert_eq!(net.validate(), Ok(()));
    }

    #[test]
    fn zero_final_layer_outputs_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(5, &[4], &mut rng);
        let last = net.layers.last_mut().unwrap();
        last.weights.fill(0.0);
        last.bias[0] = 0.75;
        assert_eq!(net.forward(&[]), 0.75);
        assert_eq!(net.forward(&[(2, 9.0)]), 0.75);
    }

    #[test]
    fn inference_is_repeatable() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(10, &[8, 6], &mut rng);
        let x = vec![(1, 0.5), (7, -2.0)];
        assert_eq!(net.forward(&x).to_bits(), net.forward(&x).to_bits());
    }

    #[test]
    fn gradient_clear_resets_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(6, &[4], &mut rng);
        let (_, mut g) = net.mse_and_gradient(&[(vec![(1, 1.0), (4, -1.0)], 3.0)]);
        g.clear();
        assert!(g
            .layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|&w| w == 0.0)));
    }

    #[test]
    fn adam_fits_single_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Mlp::new(4, &[8], &mut rng);
        let mut opt = Adam::new(&net, 1e-2);
        let samples = vec![(vec![(0, 1.0), (3, 2.0)], 1.5)];
        for _ in 0..500 {
            let (_, g) = net.mse_and_gradient(&samples);
            opt.step(&mut net, &g);
        }
        let (loss, _) = net.mse_and_gradient(&samples);
        assert!(loss < 1e-8, "loss {loss}");
    }
}
