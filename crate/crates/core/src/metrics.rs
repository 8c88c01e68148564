//! Forecast evaluation metrics.
//!
//! All metrics are computed in a single pass over the paired vectors.
//! MAPE skips targets whose magnitude is below [`MAPE_ZERO_CUTOFF`] and
//! reports how many were skipped; SMAPE uses the symmetric denominator
//! `(|y| + |ŷ|) / 2` and treats `0/0` as a zero error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Targets with `|y| <= MAPE_ZERO_CUTOFF` are excluded from MAPE.
pub const MAPE_ZERO_CUTOFF: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {truth} true values vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("cannot evaluate an empty prediction set")]
    Empty,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
}

/// Summary of forecast accuracy over `n` paired values.
///
/// `mae` and `rmse` are in target units, `mape` and `smape` in percent.
/// `mape` is `None` when every target was excluded; `r2` is `None` when
/// the true values are constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mape: Option<f64>,
    pub mape_excluded: usize,
    pub smape: f64,
    pub r2: Option<f64>,
}

/// Metric names in report order.
pub const METRIC_NAMES: [&str; 5] = ["MAE", "RMSE", "MAPE", "SMAPE", "R2"];

impl MetricReport {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 5] {
        [
            Some(self.mae),
            Some(self.rmse),
            self.mape,
            Some(self.smape),
            self.r2,
        ]
    }

    /// Rescales the unit-bearing metrics (MAE, RMSE), e.g. watts to megawatts.
    pub fn rescaled(&self, factor: f64) -> MetricReport {
        MetricReport {
            mae: self.mae * factor,
            rmse: self.rmse * factor,
            ..self.clone()
        }
    }
}

pub fn evaluate(y_true: &[f64], y_pred: &[f64]) -> Result<MetricReport, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(index) = y_true
        .iter()
        .zip(y_pred)
        .position(|(a, b)| !a.is_finite() || !b.is_finite())
    {
        return Err(MetricsError::NonFinite { index });
    }

    let n = y_true.len();
    let nf = n as f64;
    let mean_true = y_true.iter().sum::<f64>() / nf;

    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ape_sum = 0.0;
    let mut ape_count = 0usize;
    let mut sape_sum = 0.0;
    let mut ss_tot = 0.0;
    for (&y, &p) in y_true.iter().zip(y_pred) {
        let err = y - p;
        abs_sum += err.abs();
        sq_sum += err * err;
        if y.abs() > MAPE_ZERO_CUTOFF {
            ape_sum += (err / y).abs();
            ape_count += 1;
        }
        let denom = (y.abs() + p.abs()) / 2.0;
        if denom > 0.0 {
            sape_sum += err.abs() / denom;
        }
        let dev = y - mean_true;
        ss_tot += dev * dev;
    }

    Ok(MetricReport {
        n,
        mae: abs_sum / nf,
        rmse: (sq_sum / nf).sqrt(),
        mape: (ape_count > 0).then(|| ape_sum / ape_count as f64 * 100.0),
        mape_excluded: n - ape_count,
        smape: sape_sum / nf * 100.0,
        r2: (ss_tot > 0.0).then(|| 1.0 - sq_sum / ss_tot),
    })
}
