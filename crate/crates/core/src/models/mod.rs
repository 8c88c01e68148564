//! Trainable predictors over windowed samples.
//!
//! All three kinds see z-scored inputs and targets from the set's
//! [`Normalizer`]; [`TrainedModel::predict`] maps back to original units.

mod fcnn;
mod gru;
mod linalg;
mod network;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, seeded};
use crate::windowing::{Normalizer, WindowError, WindowSpec, WindowedSample, WindowedSet};

pub use fcnn::{Activation, Fcnn};
pub use gru::Gru;
pub use linalg::cholesky_solve;
pub use network::Network;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training diverged: validation loss became non-finite (last finite epoch: {last_finite_epoch:?})")]
    Diverged { last_finite_epoch: Option<usize> },
    #[error("ridge normal equations are singular; use lambda > 0")]
    Singular,
    #[error("input shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
}

/// Which predictor to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelKind {
    Ridge { lambda: f64 },
    /// Hidden layer widths; input and output layers are implied.
    Fcnn { hidden: Vec<usize>, activation: Activation },
    Gru { hidden_size: usize },
}

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-2;

impl ModelKind {
    pub fn ridge() -> Self {
        ModelKind::Ridge {
            lambda: DEFAULT_RIDGE_LAMBDA,
        }
    }

    pub fn fcnn() -> Self {
        ModelKind::Fcnn {
            hidden: vec![64, 32],
            activation: Activation::Relu,
        }
    }

    pub fn gru() -> Self {
        ModelKind::Gru { hidden_size: 32 }
    }

    /// Parses `ridge`, `fcnn` or `gru` into the default configuration.
    pub fn parse(name: &str) -> Result<Self, ModelError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "ridge" | "linear" => Ok(Self::ridge()),
            "fcnn" | "mlp" => Ok(Self::fcnn()),
            "gru" => Ok(Self::gru()),
            other => Err(ModelError::Invalid(format!(
                "unknown model kind {other:?} (expected ridge, fcnn or gru)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Ridge { .. } => "ridge",
            ModelKind::Fcnn { .. } => "fcnn",
            ModelKind::Gru { .. } => "gru",
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelKind::Ridge { lambda } if !(*lambda >= 0.0) || !lambda.is_finite() => {
                Err(ModelError::Invalid(format!("ridge lambda must be >= 0, got {lambda}")))
            }
            ModelKind::Fcnn { hidden, .. } if hidden.iter().any(|&w| w == 0) => {
                Err(ModelError::Invalid("fcnn hidden widths must be >= 1".into()))
            }
            ModelKind::Gru { hidden_size: 0 } => Err(ModelError::Invalid("gru hidden_size must be >= 1".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 42,
            learning_rate: 1e-3,
            max_epochs: 200,
            batch_size: 64,
            patience: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::Invalid("learning_rate must be > 0".into()));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(ModelError::Invalid(
                "patience, batch_size and max_epochs must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Mean squared error on normalized targets after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Fitted parameters of one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Net {
    /// `weights` over the normalized flattened input, then `intercept`.
    Ridge { weights: Vec<f64>, intercept: f64 },
    Fcnn(Fcnn),
    Gru(Gru),
}

impl Net {
    fn input_len(&self) -> usize {
        match self {
            Net::Ridge { weights, .. } => weights.len(),
            Net::Fcnn(n) => n.input_len(),
            Net::Gru(n) => n.input_len(),
        }
    }

    /// Normalized output for a normalized input.
    fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Net::Ridge { weights, intercept } => {
                intercept + weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
            }
            Net::Fcnn(n) => n.forward(z, &mut n.workspace()),
            Net::Gru(n) => n.forward(z, &mut n.workspace()),
        }
    }

    fn eval_many(&self, zs: &[Vec<f64>]) -> Vec<f64> {
        match self {
            Net::Ridge { .. } => zs.iter().map(|z| self.eval(z)).collect(),
            Net::Fcnn(n) => {
                let mut ws = n.workspace();
                zs.iter().map(|z| n.forward(z, &mut ws)).collect()
            }
            Net::Gru(n) => {
                let mut ws = n.workspace();
                zs.iter().map(|z| n.forward(z, &mut ws)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub spec: WindowSpec,
    pub config: TrainConfig,
    pub normalizer: Normalizer,
    pub net: Net,
    pub history: Vec<EpochLoss>,
    pub best_epoch: usize,
}

fn normalize_split(
    samples: &[WindowedSample],
    norm: &Normalizer,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), ModelError> {
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for s in samples {
        xs.push(norm.apply_input(&s.input)?);
        ys.push(norm.apply_target(s.target));
    }
    Ok((xs, ys))
}

fn mean_sq(net: &Net, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let preds = net.eval_many(xs);
    preds.iter().zip(ys).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / ys.len() as f64
}

/// Solves `(XᵀX + λ·D) w = Xᵀy` with an appended intercept column, where
/// `D` is the identity except for a zero on the intercept. Returns the
/// weights followed by the intercept.
pub fn ridge_solve(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> Result<Vec<f64>, ModelError> {
    let (gram, rhs) = ridge_system(xs, ys, lambda);
    cholesky_solve(&gram, &rhs, rhs.len()).ok_or(ModelError::Singular)
}

/// The penalized normal-equation matrix and right-hand side solved by
/// [`ridge_solve`].
pub fn ridge_system(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let d = xs.first().map_or(0, Vec::len) + 1;
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut row = vec![1.0; d];
    for (x, &y) in xs.iter().zip(ys) {
        row[..d - 1].copy_from_slice(x);
        for i in 0..d {
            let ri = row[i];
            rhs[i] += ri * y;
            for j in 0..=i {
                gram[i * d + j] += ri * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[j * d + i] = gram[i * d + j];
        }
        if i < d - 1 {
            gram[i * d + i] += lambda;
        }
    }
    (gram, rhs)
}

/// Fits `kind` on the train split, early-stopping on validation.
pub fn fit(set: &WindowedSet, kind: &ModelKind, config: &TrainConfig) -> Result<TrainedModel, ModelError> {
    kind.validate()?;
    config.validate()?;
    if set.train.is_empty() {
        return Err(ModelError::EmptySplit("train"));
    }
    if set.val.is_empty() {
        return Err(ModelError::EmptySplit("validation"));
    }
    let norm = &set.normalizer;
    let (train_x, train_y) = normalize_split(&set.train, norm)?;
    let (val_x, val_y) = normalize_split(&set.val, norm)?;
    let spec = &set.spec;
    let init_seed = derive_seed(config.seed, 0);
    let shuffle_seed = derive_seed(config.seed, 1);

    let (net, history, best_epoch) = match kind {
        ModelKind::Ridge { lambda } => {
            let mut w = ridge_solve(&train_x, &train_y, *lambda)?;
            let intercept = w.pop().unwrap_or(0.0);
            let net = Net::Ridge { weights: w, intercept };
            let loss = EpochLoss {
                epoch: 0,
                train_loss: mean_sq(&net, &train_x, &train_y),
                val_loss: mean_sq(&net, &val_x, &val_y),
            };
            if !loss.val_loss.is_finite() {
                return Err(ModelError::Diverged { last_finite_epoch: None });
            }
            (net, vec![loss], 0)
        }
        ModelKind::Fcnn { hidden, activation } => {
            let mut sizes = vec![spec.input_len()];
            sizes.extend(hidden);
            sizes.push(1);
            let mut net = Fcnn::init(sizes, *activation, &mut seeded(init_seed));
            let (h, best) = network::train(&mut net, &train_x, &train_y, &val_x, &val_y, config, shuffle_seed)?;
            (Net::Fcnn(net), h, best)
        }
        ModelKind::Gru { hidden_size } => {
            let mut net = Gru::init(
                spec.n_features(),
                *hidden_size,
                spec.past_steps,
                &mut seeded(init_seed),
            );
            let (h, best) = network::train(&mut net, &train_x, &train_y, &val_x, &val_y, config, shuffle_seed)?;
            (Net::Gru(net), h, best)
        }
    };
    Ok(TrainedModel {
        kind: kind.clone(),
        spec: spec.clone(),
        config: config.clone(),
        normalizer: norm.clone(),
        net,
        history,
        best_epoch,
    })
}

impl TrainedModel {
    pub fn input_len(&self) -> usize {
        self.net.input_len()
    }

    /// Prediction in original target units for one flattened step-major
    /// input window.
    pub fn predict(&self, input: &[f64]) -> Result<f64, ModelError> {
        let z = self.normalized_input(input)?;
        Ok(self.normalizer.invert_target(self.net.eval(&z)))
    }

    pub fn predict_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let zs = inputs
            .iter()
            .map(|x| self.normalized_input(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .net
            .eval_many(&zs)
            .into_iter()
            .map(|z| self.normalizer.invert_target(z))
            .collect())
    }

    pub fn predict_samples(&self, samples: &[WindowedSample]) -> Result<Vec<f64>, ModelError> {
        let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.input.clone()).collect();
        self.predict_batch(&inputs)
    }

    fn normalized_input(&self, input: &[f64]) -> Result<Vec<f64>, ModelError> {
        let expected = self.input_len();
        if input.len() != expected {
            return Err(ModelError::Shape {
                expected,
                actual: input.len(),
            });
        }
        Ok(self.normalizer.apply_input(input)?)
    }

    /// Ridge weights and intercept mapped back to original units, so that
    /// `ŷ = b + Σ w_k x_k` on raw flattened inputs. `None` for networks.
    pub fn linear_coefficients(&self) -> Option<(Vec<f64>, f64)> {
        let Net::Ridge { weights, intercept } = &self.net else {
            return None;
        };
        let n = &self.normalizer;
        let f = n.n_features();
        let mut raw = Vec::with_capacity(weights.len());
        let mut b = *intercept;
        for (k, w) in weights.iter().enumerate() {
            raw.push(w * n.target_std / n.input_std[k % f]);
            b -= w * n.input_mean[k % f] / n.input_std[k % f];
        }
        Some((raw, b * n.target_std + n.target_mean))
    }

    /// Lowest validation loss in the history.
    pub fn best_val_loss(&self) -> f64 {
        self.history.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: TrainedModel = serde_json::from_str(text)?;
        m.check_shapes()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_shapes(&self) -> Result<(), ModelError> {
        let want = self.spec.input_len();
        let expected_params = match &self.net {
            Net::Ridge { weights, .. } => (weights.len(), weights.len()),
            Net::Fcnn(n) => (n.params.len(), Fcnn::param_count(&n.layer_sizes)),
            Net::Gru(n) => (n.params.len(), Gru::param_count(n.input_size, n.hidden_size)),
        };
        if expected_params.0 != expected_params.1 {
            return Err(ModelError::Shape {
                expected: expected_params.1,
                actual: expected_params.0,
            });
        }
        if self.net.input_len() != want {
            return Err(ModelError::Shape {
                expected: want,
                actual: self.net.input_len(),
            });
        }
        if self.normalizer.n_features() != self.spec.n_features() {
            return Err(ModelError::Invalid("normalizer does not match window spec".into()));
        }
        Ok(())
    }
}

/// Architecture for [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum GradArch {
    /// Full layer sizes, input first, ending in 1.
    Fcnn { layer_sizes: Vec<usize>, activation: Activation },
    Gru { input_size: usize, hidden_size: usize, seq_len: usize },
}

/// Max relative error between analytic and central finite-difference
/// gradients of `(ŷ − y)²` for a randomly initialised network.
pub fn grad_check(arch: &GradArch, x: &[f64], y: f64, epsilon: f64, seed: u64) -> Result<f64, ModelError> {
    let mut rng = seeded(seed);
    match arch {
        GradArch::Fcnn {
            layer_sizes,
            activation,
        } => {
            if layer_sizes.len() < 2 || *layer_sizes.last().unwrap() != 1 {
                return Err(ModelError::Invalid("fcnn layer sizes must end in 1".into()));
            }
            if x.len() != layer_sizes[0] {
                return Err(ModelError::Shape {
                    expected: layer_sizes[0],
                    actual: x.len(),
                });
            }
            let mut net = Fcnn::init(layer_sizes.clone(), *activation, &mut rng);
            // nonzero biases so every parameter gets exercised
            randomize_biases(&mut net.params, &mut rng);
            Ok(network::max_relative_grad_error(&mut net, x, y, epsilon))
        }
        GradArch::Gru {
            input_size,
            hidden_size,
            seq_len,
        } => {
            if x.len() != input_size * seq_len {
                return Err(ModelError::Shape {
                    expected: input_size * seq_len,
                    actual: x.len(),
                });
            }
            let mut net = Gru::init(*input_size, *hidden_size, *seq_len, &mut rng);
            randomize_biases(&mut net.params, &mut rng);
            Ok(network::max_relative_grad_error(&mut net, x, y, epsilon))
        }
    }
}

fn randomize_biases<R: rand::Rng>(params: &mut [f64], rng: &mut R) {
    for p in params.iter_mut().filter(|p| **p == 0.0) {
        *p = rng.random_range(-0.1..0.1);
    }
}
