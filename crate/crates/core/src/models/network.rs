//! Shared machinery for the gradient-trained models: the [`Network`]
//! abstraction, the Adam training loop with early stopping, and
//! finite-difference gradient checking.

use rand::seq::SliceRandom;

use super::{EpochLoss, ModelError, TrainConfig};
use crate::rng::seeded;

/// A scalar-output model with a flat parameter vector.
pub trait Network {
    type Workspace;

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn input_len(&self) -> usize;
    fn workspace(&self) -> Self::Workspace;
    fn forward(&self, x: &[f64], ws: &mut Self::Workspace) -> f64;
    /// Adds `d_out · ∂ŷ/∂θ` into `grad`. `ws` must hold the state left by
    /// `forward(x, ws)`.
    fn backward(&self, x: &[f64], d_out: f64, grad: &mut [f64], ws: &mut Self::Workspace);
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Mean squared error of `net` over normalized samples.
pub fn mse<N: Network>(net: &N, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let mut ws = net.workspace();
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let e = net.forward(x, &mut ws) - y;
            e * e
        })
        .sum();
    total / xs.len() as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Mini-batch Adam on squared error with seeded shuffling and early
/// stopping on validation loss. On return `net` holds the parameters of
/// the best validation epoch.
pub fn train<N: Network>(
    net: &mut N,
    train_x: &[Vec<f64>],
    train_y: &[f64],
    val_x: &[Vec<f64>],
    val_y: &[f64],
    cfg: &TrainConfig,
    shuffle_seed: u64,
) -> Result<(Vec<EpochLoss>, usize), ModelError> {
    let n_params = net.params().len();
    let mut rng = seeded(shuffle_seed);
    let mut adam = Adam::new(n_params);
    let mut grad = vec![0.0; n_params];
    let mut ws = net.workspace();
    let mut order: Vec<usize> = (0..train_x.len()).collect();

    let mut history = Vec::new();
    let mut best_params = net.params().to_vec();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut train_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let y_hat = net.forward(&train_x[i], &mut ws);
                let err = y_hat - train_y[i];
                train_sum += err * err;
                net.backward(&train_x[i], scale * err, &mut grad, &mut ws);
            }
            adam.step(net.params_mut(), &grad, cfg);
        }
        let train_loss = train_sum / train_x.len() as f64;
        let val_loss = mse(net, val_x, val_y);
        if !val_loss.is_finite() {
            return Err(ModelError::Diverged {
                last_finite_epoch: epoch.checked_sub(1),
            });
        }
        history.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params.copy_from_slice(net.params());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    net.params_mut().copy_from_slice(&best_params);
    Ok((history, best_epoch))
}

/// Largest relative difference between the analytic gradient of the
/// squared loss `(ŷ − y)²` and its central finite difference.
pub fn max_relative_grad_error<N: Network>(net: &mut N, x: &[f64], y: f64, epsilon: f64) -> f64 {
    let mut ws = net.workspace();
    let mut analytic = vec![0.0; net.params().len()];
    let y_hat = net.forward(x, &mut ws);
    net.backward(x, 2.0 * (y_hat - y), &mut analytic, &mut ws);

    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + epsilon;
        let up = (net.forward(x, &mut ws) - y).powi(2);
        net.params_mut()[i] = orig - epsilon;
        let down = (net.forward(x, &mut ws) - y).powi(2);
        net.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}
