//! Fully connected feed-forward network with a scalar linear output.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (`out × in`, row-major) followed by the bias vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{glorot_bound, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fcnn {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

pub struct FcnnWorkspace {
    /// Post-activation outputs per layer, input included.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Fcnn {
    pub fn param_count(layer_sizes: &[usize]) -> usize {
        layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(layer_sizes: Vec<usize>, activation: Activation) -> Self {
        let n = Self::param_count(&layer_sizes);
        Fcnn {
            layer_sizes,
            activation,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(layer_sizes: Vec<usize>, activation: Activation, rng: &mut R) -> Self {
        let mut net = Self::zeros(layer_sizes, activation);
        let mut off = 0;
        for w in net.layer_sizes.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = glorot_bound(fan_in, fan_out);
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-bound..=bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offsets of (weights, biases) for layer `l`.
    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_layers());
        let mut off = 0;
        for w in self.layer_sizes.windows(2) {
            out.push((off, off + w[0] * w[1]));
            off += w[0] * w[1] + w[1];
        }
        out
    }

    fn forward_into(&self, x: &[f64], acts: &mut [Vec<f64>]) {
        acts[0].copy_from_slice(x);
        let last = self.n_layers() - 1;
        for (l, (w_off, b_off)) in self.offsets().into_iter().enumerate() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (prev, rest) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            for o in 0..n_out {
                let row = &self.params[w_off + o * n_in..w_off + (o + 1) * n_in];
                let mut s = self.params[b_off + o];
                for (w, v) in row.iter().zip(input.iter()) {
                    s += w * v;
                }
                out[o] = if l == last { s } else { self.activation.apply(s) };
            }
        }
    }
}

impl Network for Fcnn {
    type Workspace = FcnnWorkspace;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    fn workspace(&self) -> FcnnWorkspace {
        FcnnWorkspace {
            acts: self.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: self.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn forward(&self, x: &[f64], ws: &mut FcnnWorkspace) -> f64 {
        self.forward_into(x, &mut ws.acts);
        ws.acts[self.n_layers()][0]
    }

    fn backward(&self, _x: &[f64], d_out: f64, grad: &mut [f64], ws: &mut FcnnWorkspace) {
        let layers = self.n_layers();
        let offsets = self.offsets();
        ws.deltas[layers][0] = d_out;
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (w_off, b_off) = offsets[l];
            let (lower, upper) = ws.deltas.split_at_mut(l + 1);
            let delta = &upper[0];
            let input = &ws.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                grad[b_off + o] += d;
                if d != 0.0 {
                    let g = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                    for (gi, v) in g.iter_mut().zip(input.iter()) {
                        *gi += d * v;
                    }
                }
            }
            if l > 0 {
                let below = &mut lower[l];
                below.iter_mut().for_each(|v| *v = 0.0);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &self.params[w_off + o * n_in..w_off + (o + 1) * n_in];
                    for (b, w) in below.iter_mut().zip(row) {
                        *b += d * w;
                    }
                }
                for (b, &a) in below.iter_mut().zip(input.iter()) {
                    *b *= self.activation.derivative_from_output(a);
                }
            }
        }
    }
}
