//! Window sweep, the nine feature-combination cases and the speed-output
//! vs power-output comparison.
//!
//! Every case works on a [`FeatureTable`] built by [`case_table`]: the
//! measured 3.8 m columns plus 100 m speeds, 100 m gusts and turbine power
//! derived from them. Speed-target cases are additionally scored in power
//! space by pushing both predicted and true speeds through the power curve.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::error::{model_kind, window_kind, ErrorKind};
use crate::ingest::{Field, SeriesDataset};
use crate::metrics::{evaluate, MetricReport, MetricsError};
use crate::models::{fit, ModelError, ModelKind, TrainConfig, TrainedModel};
use crate::physics::Turbine;
use crate::rng::derive_seed;
use crate::table::{FeatureTable, TableError};
use crate::windowing::{SplitRatios, WindowError, WindowSpec, WindowedSample, WindowedSet};

pub const WSPD_LOW: &str = "WSPD_3.8m";
pub const WSPD_HUB: &str = "WSPD_100m";
pub const GST_LOW: &str = "GST_3.8m";
pub const GST_HUB: &str = "GST_100m";
pub const PRES: &str = "PRES";
pub const ATMP: &str = "ATMP";
pub const WTMP: &str = "WTMP";
pub const POWER: &str = "POWER";

/// Every column of a case table, in order.
pub const CASE_COLUMNS: [&str; 8] = [WSPD_LOW, WSPD_HUB, GST_LOW, GST_HUB, PRES, ATMP, WTMP, POWER];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("case {case} ({kind}): {source}")]
    Case {
        case: u8,
        kind: String,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("improvement statistic needs both speed-output and power-output results{0}")]
    MissingGroup(String),
    #[error("persistence baseline needs the target {0:?} among the inputs")]
    NoPersistence(String),
    #[error("unknown case {0} (expected 1-9)")]
    UnknownCase(u8),
}

impl ExperimentError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ExperimentError::Window(e) => window_kind(e),
            ExperimentError::Model(e) => model_kind(e),
            ExperimentError::Metrics(MetricsError::NonFinite { .. }) => ErrorKind::Numeric,
            ExperimentError::Metrics(_) | ExperimentError::Table(_) | ExperimentError::MissingGroup(_) => {
                ErrorKind::Data
            }
            ExperimentError::Case { source, .. } => source.kind(),
            ExperimentError::NoPersistence(_) | ExperimentError::UnknownCase(_) => ErrorKind::Usage,
        }
    }
}

/// Builds the case table: measured 3.8 m speed and gust, both carried to
/// hub height, pressure, temperatures and turbine power.
pub fn case_table(ds: &SeriesDataset, turbine: &Turbine) -> Result<FeatureTable, TableError> {
    let wspd = ds.column(Field::Wspd);
    let gst = ds.column(Field::Gst);
    let wspd_hub: Vec<f64> = wspd.iter().map(|&v| turbine.hub_speed(v)).collect();
    let gst_hub: Vec<f64> = gst.iter().map(|&v| turbine.hub_speed(v)).collect();
    let power: Vec<f64> = wspd_hub.iter().map(|&v| turbine.power(v)).collect();
    let mut t = FeatureTable::new();
    t.push(WSPD_LOW, wspd)?;
    t.push(WSPD_HUB, wspd_hub)?;
    t.push(GST_LOW, gst)?;
    t.push(GST_HUB, gst_hub)?;
    t.push(PRES, ds.column(Field::Pres))?;
    t.push(ATMP, ds.column(Field::Atmp))?;
    t.push(WTMP, ds.column(Field::Wtmp))?;
    t.push(POWER, power)?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseSpec {
    pub id: u8,
    pub mode: u8,
    pub inputs: Vec<String>,
    pub target: String,
}

impl CaseSpec {
    fn new(id: u8, mode: u8, inputs: &[&str], target: &str) -> Self {
        CaseSpec {
            id,
            mode,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            target: target.to_string(),
        }
    }

    pub fn label(&self) -> String {
        format!("C{}", self.id)
    }

    pub fn targets_speed(&self) -> bool {
        self.target != POWER
    }
}

/// The nine cases. Mode 1 forecasts a series from itself, mode 2 forecasts
/// power from power plus speeds, mode 3 forecasts from the selected
/// meteorological features.
pub fn enumerate_cases() -> Vec<CaseSpec> {
    let met_low = [WSPD_LOW, GST_LOW, PRES, ATMP, WTMP];
    let met_hub = [WSPD_HUB, GST_HUB, PRES, ATMP, WTMP];
    let mut met_power = met_low.to_vec();
    met_power.push(POWER);
    vec![
        CaseSpec::new(1, 1, &[WSPD_LOW], WSPD_LOW),
        CaseSpec::new(2, 1, &[WSPD_HUB], WSPD_HUB),
        CaseSpec::new(3, 1, &[POWER], POWER),
        CaseSpec::new(4, 2, &[POWER, WSPD_LOW], POWER),
        CaseSpec::new(5, 2, &[POWER, WSPD_HUB], POWER),
        CaseSpec::new(6, 2, &[POWER, WSPD_LOW, WSPD_HUB], POWER),
        CaseSpec::new(7, 3, &met_low, WSPD_LOW),
        CaseSpec::new(8, 3, &met_hub, WSPD_HUB),
        CaseSpec::new(9, 3, &met_power, POWER),
    ]
}

pub fn case_by_id(id: u8) -> Result<CaseSpec, ExperimentError> {
    enumerate_cases()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or(ExperimentError::UnknownCase(id))
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub past_steps: usize,
    pub horizon_steps: usize,
    pub ratios: SplitRatios,
    pub train: TrainConfig,
    pub turbine: Turbine,
}

impl ExperimentConfig {
    pub fn new(turbine: Turbine) -> Self {
        ExperimentConfig {
            past_steps: 18,
            horizon_steps: 1,
            ratios: SplitRatios::default(),
            train: TrainConfig::default(),
            turbine,
        }
    }
}

/// Seed for one matrix cell. It depends on the model kind only, so cases
/// that differ by a column scaling see the same initialisation and
/// shuffling.
pub fn cell_seed(master: u64, kind: &ModelKind) -> u64 {
    let stream = match kind {
        ModelKind::Ridge { .. } => 0,
        ModelKind::Fcnn { .. } => 1,
        ModelKind::Gru { .. } => 2,
    };
    derive_seed(master, stream)
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case: CaseSpec,
    pub kind: ModelKind,
    pub seed: u64,
    /// In target units: m/s for speeds, W for power.
    pub native: MetricReport,
    /// In W.
    pub power: MetricReport,
    pub model: Arc<TrainedModel>,
    pub wall_time: Duration,
}

fn speed_to_power(turbine: &Turbine, target: &str, v: f64) -> f64 {
    let v = v.max(0.0);
    if target == WSPD_LOW {
        turbine.power_from_anemometer(v)
    } else {
        turbine.power(v)
    }
}

/// Trains `kind` on one case and scores it on the test split.
pub fn run_case(
    table: &FeatureTable,
    case: &CaseSpec,
    kind: &ModelKind,
    config: &ExperimentConfig,
) -> Result<CaseResult, ExperimentError> {
    let wrap = |e: ExperimentError| ExperimentError::Case {
        case: case.id,
        kind: kind.label().to_string(),
        source: Box::new(e),
    };
    let start = Instant::now();
    let seed = config.train.seed;
    let inner = || -> Result<(MetricReport, MetricReport, TrainedModel), ExperimentError> {
        let spec = WindowSpec::new(
            config.past_steps,
            config.horizon_steps,
            case.inputs.clone(),
            case.target.clone(),
        )?;
        let set = WindowedSet::build(table, &spec, config.ratios)?;
        let model = fit(&set, kind, &config.train)?;
        let pred = model.predict_samples(&set.test)?;
        let truth: Vec<f64> = set.test.iter().map(|s| s.target).collect();
        let native = evaluate(&truth, &pred)?;
        let power = if case.targets_speed() {
            let t = &config.turbine;
            let tp: Vec<f64> = truth.iter().map(|&v| speed_to_power(t, &case.target, v)).collect();
            let pp: Vec<f64> = pred.iter().map(|&v| speed_to_power(t, &case.target, v)).collect();
            evaluate(&tp, &pp)?
        } else {
            native.clone()
        };
        Ok((native, power, model))
    };
    let (native, power, model) = inner().map_err(wrap)?;
    Ok(CaseResult {
        case: case.clone(),
        kind: kind.clone(),
        seed,
        native,
        power,
        model: Arc::new(model),
        wall_time: start.elapsed(),
    })
}

/// One cell of the experiment matrix; failures are kept, not fatal.
#[derive(Debug)]
pub struct MatrixCell {
    pub case: CaseSpec,
    pub kind: ModelKind,
    pub outcome: Result<CaseResult, ExperimentError>,
}

/// Runs every (case, kind) pair, ordered by case then kind. Cells run in
/// parallel; each is seeded from `config.train.seed` via [`cell_seed`].
pub fn run_matrix(
    table: &FeatureTable,
    kinds: &[ModelKind],
    cases: &[CaseSpec],
    config: &ExperimentConfig,
) -> Vec<MatrixCell> {
    let cells: Vec<(&CaseSpec, &ModelKind)> = cases
        .iter()
        .flat_map(|c| kinds.iter().map(move |k| (c, k)))
        .collect();
    cells
        .par_iter()
        .map(|&(case, kind)| {
            let mut cfg = config.clone();
            cfg.train.seed = cell_seed(config.train.seed, kind);
            MatrixCell {
                case: case.clone(),
                kind: kind.clone(),
                outcome: run_case(table, case, kind, &cfg),
            }
        })
        .collect()
}

pub const SWEEP_PAST_STEPS: [usize; 5] = [6, 18, 36, 72, 144];
pub const SWEEP_HORIZON_STEPS: [usize; 5] = [1, 3, 6, 18, 36];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepOutcome {
    Done { report: MetricReport, persistence: MetricReport },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub past_steps: usize,
    pub horizon_steps: usize,
    #[serde(flatten)]
    pub outcome: SweepOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: String,
    pub target: String,
    pub inputs: Vec<String>,
    pub cells: Vec<SweepCell>,
}

/// Valid (past, horizon) pairs of the grids: past ≥ horizon.
pub fn sweep_pairs(past: &[usize], horizon: &[usize]) -> Vec<(usize, usize)> {
    past.iter()
        .flat_map(|&p| horizon.iter().filter(move |&&h| p >= h).map(move |&h| (p, h)))
        .collect()
}

/// Scores `kind` on the validation split for each valid window pair. Cells
/// whose series is too short are marked skipped; other errors abort.
pub fn window_sweep(
    table: &FeatureTable,
    inputs: &[String],
    target: &str,
    kind: &ModelKind,
    pairs: &[(usize, usize)],
    config: &ExperimentConfig,
) -> Result<SweepResult, ExperimentError> {
    let cells = pairs
        .par_iter()
        .map(|&(p, h)| -> Result<SweepCell, ExperimentError> {
            let spec = WindowSpec::new(p, h, inputs.to_vec(), target)?;
            let set = match WindowedSet::build(table, &spec, config.ratios) {
                Ok(s) => s,
                Err(e @ WindowError::SeriesTooShort { .. }) => {
                    return Ok(SweepCell {
                        past_steps: p,
                        horizon_steps: h,
                        outcome: SweepOutcome::Skipped { reason: e.to_string() },
                    })
                }
                Err(e) => return Err(e.into()),
            };
            let mut train = config.train.clone();
            train.seed = cell_seed(config.train.seed, kind);
            let model = fit(&set, kind, &train)?;
            let pred = model.predict_samples(&set.val)?;
            let truth: Vec<f64> = set.val.iter().map(|s| s.target).collect();
            Ok(SweepCell {
                past_steps: p,
                horizon_steps: h,
                outcome: SweepOutcome::Done {
                    report: evaluate(&truth, &pred)?,
                    persistence: persistence_report(&set, &set.val)?,
                },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult {
        kind: kind.label().to_string(),
        target: target.to_string(),
        inputs: inputs.to_vec(),
        cells,
    })
}

/// Persistence forecast: the last observed target value in each window.
pub fn persistence_forecast(spec: &WindowSpec, samples: &[WindowedSample]) -> Result<Vec<f64>, ExperimentError> {
    let j = spec
        .input_features
        .iter()
        .position(|f| *f == spec.target_feature)
        .ok_or_else(|| ExperimentError::NoPersistence(spec.target_feature.clone()))?;
    let last = (spec.past_steps - 1) * spec.n_features() + j;
    Ok(samples.iter().map(|s| s.input[last]).collect())
}

pub fn persistence_report(set: &WindowedSet, samples: &[WindowedSample]) -> Result<MetricReport, ExperimentError> {
    let pred = persistence_forecast(&set.spec, samples)?;
    let truth: Vec<f64> = samples.iter().map(|s| s.target).collect();
    Ok(evaluate(&truth, &pred)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    /// Model kind, or `"pooled"`.
    pub kind: String,
    /// Mean power-space RMSE (W) of the speed-output cases.
    pub speed_output_rmse: f64,
    /// Mean power-space RMSE (W) of the power-output cases.
    pub power_output_rmse: f64,
    pub speed_cases: usize,
    pub power_cases: usize,
    /// `100·(E_power − E_speed)/E_power`.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementStat {
    pub per_kind: Vec<Improvement>,
    pub pooled: Improvement,
}

fn improvement_of(kind: String, results: &[&CaseResult]) -> Result<Improvement, ExperimentError> {
    let mean = |speed: bool| -> (f64, usize) {
        let v: Vec<f64> = results
            .iter()
            .filter(|r| r.case.targets_speed() == speed)
            .map(|r| r.power.rmse)
            .collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let (e_speed, ns) = mean(true);
    let (e_power, np) = mean(false);
    if ns == 0 || np == 0 {
        return Err(ExperimentError::MissingGroup(format!(" (kind {kind})")));
    }
    Ok(Improvement {
        kind,
        speed_output_rmse: e_speed,
        power_output_rmse: e_power,
        speed_cases: ns,
        power_cases: np,
        percent: 100.0 * (e_power - e_speed) / e_power,
    })
}

/// Percent by which speed-output cases beat power-output cases in
/// power-space RMSE, per model kind (in first-seen order) and pooled.
pub fn improvement_stat(results: &[CaseResult]) -> Result<ImprovementStat, ExperimentError> {
    let mut kinds: Vec<&str> = Vec::new();
    for r in results {
        if !kinds.contains(&r.kind.label()) {
            kinds.push(r.kind.label());
        }
    }
    let all: Vec<&CaseResult> = results.iter().collect();
    let pooled = improvement_of("pooled".into(), &all)?;
    let per_kind = kinds
        .into_iter()
        .filter_map(|k| {
            let group: Vec<&CaseResult> = results.iter().filter(|r| r.kind.label() == k).collect();
            improvement_of(k.to_string(), &group).ok()
        })
        .collect();
    Ok(ImprovementStat { per_kind, pooled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::synthetic_series;
    use crate::physics::TurbineSpec;

    #[test]
    fn case_composition() {
        let cases = enumerate_cases();
        assert_eq!(cases.len(), 9);
        for c in cases.iter().filter(|c| c.mode == 2) {
            assert_eq!(c.target, POWER);
        }
        for c in cases.iter().filter(|c| c.mode < 3) {
            assert!(c.inputs.contains(&c.target));
        }
        let c7 = &cases[6];
        let c9 = &cases[8];
        assert!(c7.inputs.iter().all(|f| c9.inputs.contains(f)));
        assert!(c9.inputs.iter().any(|f| f == POWER));
    }

    #[test]
    fn sweep_grid_respects_past_ge_horizon() {
        let pairs = sweep_pairs(&SWEEP_PAST_STEPS, &SWEEP_HORIZON_STEPS);
        let brute = SWEEP_PAST_STEPS
            .iter()
            .map(|p| SWEEP_HORIZON_STEPS.iter().filter(|h| *h <= p).count())
            .sum::<usize>();
        assert_eq!(pairs.len(), brute);
        assert!(pairs.iter().all(|(p, h)| p >= h));
    }

    #[test]
    fn improvement_formula() {
        let ds = synthetic_series(2000, 3);
        let turbine = Turbine::new(TurbineSpec::default()).unwrap();
        let table = case_table(&ds, &turbine).unwrap();
        let mut cfg = ExperimentConfig::new(turbine);
        cfg.past_steps = 6;
        let cases = enumerate_cases();
        let r1 = run_case(&table, &cases[0], &ModelKind::ridge(), &cfg).unwrap();
        let r3 = run_case(&table, &cases[2], &ModelKind::ridge(), &cfg).unwrap();
        let mut a = r1.clone();
        let mut b = r3.clone();
        a.power.rmse = 0.9;
        b.power.rmse = 1.0;
        let stat = improvement_stat(&[a.clone(), b.clone()]).unwrap();
        assert!((stat.pooled.percent - 10.0).abs() < 1e-12);
        a.power.rmse = 1.0;
        let stat = improvement_stat(&[a.clone(), b]).unwrap();
        assert_eq!(stat.pooled.percent, 0.0);
        assert!(improvement_stat(&[a]).is_err());
    }
}
