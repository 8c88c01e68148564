//! Chronological splitting and sliding-window sample construction.
//!
//! The raw series is cut into train/validation/test segments first and
//! windows are built inside each segment, so no window ever spans two
//! splits. Sample `i` of a segment starting at row `s` uses rows
//! `[s+i, s+i+P)` as input and row `s+i+P+H−1` as its target.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{FeatureTable, TableError};

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("invalid window: {0}")]
    InvalidSpec(String),
    #[error("series too short: {got} rows, need at least {min} for this window")]
    SeriesTooShort { min: usize, got: usize },
    #[error("need at least 2 training samples to fit a normalizer, got {0}")]
    TooFewSamples(usize),
    #[error("feature {0:?} has zero variance on the training split")]
    ZeroVariance(String),
    #[error("column {column:?} has a non-finite value at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("input has {got} values, not a multiple of {features} features")]
    InputShape { features: usize, got: usize },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("csv: {0}")]
    Csv(String),
}

/// Sliding-window layout: `past_steps` rows of `input_features` predict
/// `target_feature` `horizon_steps` rows after the last input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub past_steps: usize,
    pub horizon_steps: usize,
    pub input_features: Vec<String>,
    pub target_feature: String,
}

impl WindowSpec {
    pub fn new(
        past_steps: usize,
        horizon_steps: usize,
        input_features: Vec<String>,
        target_feature: impl Into<String>,
    ) -> Result<Self, WindowError> {
        let spec = WindowSpec {
            past_steps,
            horizon_steps,
            input_features,
            target_feature: target_feature.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.horizon_steps < 1 {
            return Err(WindowError::InvalidSpec("horizon must be at least 1 step".into()));
        }
        if self.past_steps < self.horizon_steps {
            return Err(WindowError::InvalidSpec(format!(
                "past steps ({}) must be >= horizon steps ({})",
                self.past_steps, self.horizon_steps
            )));
        }
        if self.input_features.is_empty() {
            return Err(WindowError::InvalidSpec("no input features".into()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.input_features.len()
    }

    /// Length of a flattened input (`P·F`).
    pub fn input_len(&self) -> usize {
        self.past_steps * self.input_features.len()
    }

    /// Rows consumed by one sample.
    pub fn span(&self) -> usize {
        self.past_steps + self.horizon_steps
    }
}

/// Integer split weights, 8:1:1 by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 8,
            val: 1,
            test: 1,
        }
    }
}

/// Row ranges of the three contiguous segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Cuts `n` rows at `⌊n·a/(a+b+c)⌋` and `⌊n·(a+b)/(a+b+c)⌋`. The series
/// must hold at least ten full windows.
pub fn split_series(n: usize, spec: &WindowSpec, ratios: SplitRatios) -> Result<SplitBounds, WindowError> {
    spec.validate()?;
    let min = 10 * spec.span();
    if n < min {
        return Err(WindowError::SeriesTooShort { min, got: n });
    }
    Ok(split_rows(n, ratios))
}

/// The flooring rule of [`split_series`] without the length check.
pub fn split_rows(n: usize, ratios: SplitRatios) -> SplitBounds {
    let total = ratios.train + ratios.val + ratios.test;
    let cut1 = n * ratios.train / total;
    let cut2 = n * (ratios.train + ratios.val) / total;
    SplitBounds {
        train: 0..cut1,
        val: cut1..cut2,
        test: cut2..n,
    }
}

/// One supervised example. `input` is step-major: the `F` features of the
/// oldest row first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    pub input: Vec<f64>,
    pub target: f64,
    /// Table row of the target.
    pub t_index: usize,
}

/// Number of windows in a segment of `len` rows.
pub fn window_count(len: usize, spec: &WindowSpec) -> usize {
    (len + 1).saturating_sub(spec.span())
}

/// Windows over `rows` of `table`, stride 1. A segment shorter than `P+H`
/// yields no samples.
pub fn make_windows(
    table: &FeatureTable,
    rows: Range<usize>,
    spec: &WindowSpec,
) -> Result<Vec<WindowedSample>, WindowError> {
    let inputs: Vec<&[f64]> = spec
        .input_features
        .iter()
        .map(|n| table.column(n))
        .collect::<Result<_, _>>()?;
    let target = table.column(&spec.target_feature)?;
    for (name, col) in spec
        .input_features
        .iter()
        .zip(&inputs)
        .chain(std::iter::once((&spec.target_feature, &target)))
    {
        if let Some(off) = col[rows.clone()].iter().position(|v| !v.is_finite()) {
            return Err(WindowError::NonFinite {
                column: name.clone(),
                row: rows.start + off,
            });
        }
    }

    let count = window_count(rows.len(), spec);
    let p = spec.past_steps;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let start = rows.start + i;
        let mut input = Vec::with_capacity(spec.input_len());
        for row in start..start + p {
            input.extend(inputs.iter().map(|c| c[row]));
        }
        let t_index = start + p + spec.horizon_steps - 1;
        out.push(WindowedSample {
            input,
            target: target[t_index],
            t_index,
        });
    }
    Ok(out)
}

/// Per-feature z-score statistics fit on training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub feature_names: Vec<String>,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_name: String,
    pub target_mean: f64,
    pub target_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Normalizer {
    /// Statistics over every input entry (all window positions) and every
    /// target of `samples`.
    pub fn fit(samples: &[WindowedSample], spec: &WindowSpec) -> Result<Self, WindowError> {
        if samples.len() < 2 {
            return Err(WindowError::TooFewSamples(samples.len()));
        }
        let f = spec.n_features();
        let mut input_mean = Vec::with_capacity(f);
        let mut input_std = Vec::with_capacity(f);
        for j in 0..f {
            let it = samples
                .iter()
                .flat_map(move |s| s.input.iter().skip(j).step_by(f).copied());
            let (m, sd) = mean_std(it);
            if !(sd > 0.0) {
                return Err(WindowError::ZeroVariance(spec.input_features[j].clone()));
            }
            input_mean.push(m);
            input_std.push(sd);
        }
        let (target_mean, target_std) = mean_std(samples.iter().map(|s| s.target));
        if !(target_std > 0.0) {
            return Err(WindowError::ZeroVariance(spec.target_feature.clone()));
        }
        Ok(Normalizer {
            feature_names: spec.input_features.clone(),
            input_mean,
            input_std,
            target_name: spec.target_feature.clone(),
            target_mean,
            target_std,
        })
    }

    pub fn n_features(&self) -> usize {
        self.input_mean.len()
    }

    /// z-scores a flattened step-major input.
    pub fn apply_input(&self, input: &[f64]) -> Result<Vec<f64>, WindowError> {
        let f = self.n_features();
        if input.len() % f != 0 {
            return Err(WindowError::InputShape {
                features: f,
                got: input.len(),
            });
        }
        Ok(input
            .iter()
            .enumerate()
            .map(|(k, &v)| (v - self.input_mean[k % f]) / self.input_std[k % f])
            .collect())
    }

    pub fn invert_input(&self, z: &[f64]) -> Vec<f64> {
        let f = self.n_features();
        z.iter()
            .enumerate()
            .map(|(k, &v)| v * self.input_std[k % f] + self.input_mean[k % f])
            .collect()
    }

    pub fn apply_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    pub fn invert_target(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }
}

/// Train/validation/test samples plus the train-fitted normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSet {
    pub spec: WindowSpec,
    pub bounds: SplitBounds,
    pub train: Vec<WindowedSample>,
    pub val: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
    pub normalizer: Normalizer,
}

impl WindowedSet {
    /// Split, window each segment, and fit the normalizer on train.
    pub fn build(table: &FeatureTable, spec: &WindowSpec, ratios: SplitRatios) -> Result<Self, WindowError> {
        let bounds = split_series(table.len(), spec, ratios)?;
        let train = make_windows(table, bounds.train.clone(), spec)?;
        let val = make_windows(table, bounds.val.clone(), spec)?;
        let test = make_windows(table, bounds.test.clone(), spec)?;
        let normalizer = Normalizer::fit(&train, spec)?;
        Ok(WindowedSet {
            spec: spec.clone(),
            bounds,
            train,
            val,
            test,
            normalizer,
        })
    }

    /// Writes one row per sample: split, t_index, flattened inputs, target.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), WindowError> {
        let csv_err = |e: csv::Error| WindowError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["split".to_string(), "t_index".to_string()];
        for step in 0..self.spec.past_steps {
            for f in &self.spec.input_features {
                header.push(format!("{f}[t-{}]", self.spec.past_steps - 1 - step));
            }
        }
        header.push(format!("{}[t+{}]", self.spec.target_feature, self.spec.horizon_steps));
        w.write_record(&header).map_err(csv_err)?;
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for s in set {
                let mut row = vec![name.to_string(), s.t_index.to_string()];
                row.extend(s.input.iter().map(|v| v.to_string()));
                row.push(s.target.to_string());
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| WindowError::Csv(e.to_string()))?;
        Ok(())
    }
}
