//! Correlation analysis, random-forest impurity importance and feature
//! selection.
//!
//! Importance follows the usual mean-decrease-in-impurity definition: every
//! split node credits its feature with the drop in summed squared error
//! `SSE(parent) − SSE(left) − SSE(right)`, and a feature's weight is its
//! credited total over all trees divided by the total over all features.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Field, SeriesDataset};
use crate::rng::{derive_seed, seeded};
use crate::table::{FeatureTable, TableError};

#[derive(Debug, Error, PartialEq)]
pub enum FeaturesError {
    #[error("need at least 2 complete rows for correlation, got {0}")]
    InsufficientRows(usize),
    #[error("sample matrix has {rows} rows but target has {targets}")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("need at least {min} samples to grow a forest, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("forest needs at least one tree")]
    NoTrees,
    #[error("feature {0:?} is not among the candidates")]
    UnknownFeature(String),
    #[error("importance vector has {got} entries, expected {expected}")]
    ImportanceLength { expected: usize, got: usize },
    #[error(transparent)]
    Table(#[from] TableError),
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

/// Pearson r of two equal-length slices; `None` when either has zero
/// variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetric matrix of Pearson coefficients.
///
/// Entries involving a zero-variance feature are NaN and the feature is
/// listed in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub undefined: Vec<String>,
    pub rows_used: usize,
}

impl CorrelationMatrix {
    /// Correlations over rows where every named column is finite (listwise
    /// deletion).
    pub fn from_columns(names: &[String], columns: &[&[f64]]) -> Result<Self, FeaturesError> {
        let n = columns.first().map_or(0, |c| c.len());
        let keep: Vec<usize> = (0..n)
            .filter(|&i| columns.iter().all(|c| c[i].is_finite()))
            .collect();
        if keep.len() < 2 {
            return Err(FeaturesError::InsufficientRows(keep.len()));
        }
        let cols: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| keep.iter().map(|&i| c[i]).collect())
            .collect();
        let k = cols.len();
        let constant: Vec<bool> = cols.iter().map(|c| c.iter().all(|&v| v == c[0])).collect();
        let mut values = vec![vec![0.0; k]; k];
        for i in 0..k {
            values[i][i] = 1.0;
            for j in (i + 1)..k {
                let r = if constant[i] || constant[j] {
                    f64::NAN
                } else {
                    pearson(&cols[i], &cols[j]).unwrap_or(f64::NAN)
                };
                values[i][j] = r;
                values[j][i] = r;
            }
        }
        let undefined = names
            .iter()
            .zip(&constant)
            .filter(|(_, &c)| c)
            .map(|(n, _)| n.clone())
            .collect();
        Ok(CorrelationMatrix {
            names: names.to_vec(),
            values,
            undefined,
            rows_used: keep.len(),
        })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.values[self.index_of(a)?][self.index_of(b)?])
    }
}

/// Correlation matrix over the named fields of a dataset, skipping rows in
/// which any of them is missing.
pub fn pearson_matrix(ds: &SeriesDataset, fields: &[Field]) -> Result<CorrelationMatrix, FeaturesError> {
    let names: Vec<String> = fields.iter().map(|f| f.name().to_string()).collect();
    let cols: Vec<Vec<f64>> = fields.iter().map(|&f| ds.column(f)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    CorrelationMatrix::from_columns(&names, &refs)
}

/// Same as [`pearson_matrix`] over arbitrary table columns.
pub fn pearson_matrix_table(table: &FeatureTable, names: &[&str]) -> Result<CorrelationMatrix, FeaturesError> {
    let owned: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let refs = names
        .iter()
        .map(|n| table.column(n))
        .collect::<Result<Vec<_>, _>>()?;
    CorrelationMatrix::from_columns(&owned, &refs)
}

// ---------------------------------------------------------------------------
// Regression forest
// ---------------------------------------------------------------------------

/// Relative gain difference below which two splits are treated as equal.
pub const SPLIT_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// ⌈√F⌉ candidates per split.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 12,
            min_samples_split: 10,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Drop in summed squared error achieved by this split.
        gain: f64,
        /// Candidate features whose best split tied `gain`; importance is
        /// shared equally among them.
        tied: Vec<usize>,
        samples: usize,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                TreeNode::Leaf { value, .. } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Summed split gain credited to each feature.
    pub fn feature_gains(&self, n_features: usize) -> Vec<f64> {
        let mut g = vec![0.0; n_features];
        for node in &self.nodes {
            if let TreeNode::Split { gain, ref tied, .. } = *node {
                for &f in tied {
                    g[f] += gain / tied.len() as f64;
                }
            }
        }
        g
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct TreeBuilder<'a, R: Rng> {
    columns: &'a [Vec<f64>],
    y: &'a [f64],
    config: &'a ForestConfig,
    n_candidates: usize,
    rng: R,
    nodes: Vec<TreeNode>,
    order: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    tied: Vec<usize>,
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: mean, samples: n });

        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        if depth >= self.config.max_depth || n < self.config.min_samples_split.max(2) || pure {
            return id;
        }
        let Some(BestSplit {
            feature,
            threshold,
            gain,
            tied,
        }) = self.best_split(idx, mean)
        else {
            return id;
        };

        // partition: x <= threshold to the left
        let col = &self.columns[feature];
        let mut split = 0;
        for k in 0..n {
            if col[idx[k]] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            gain,
            tied,
            samples: n,
            left,
            right,
        };
        id
    }

    /// Best split over a random feature subset, or `None` if no split
    /// reduces the error. Among features tied for the best gain the lowest
    /// index is used.
    fn best_split(&mut self, idx: &[usize], mean: f64) -> Option<BestSplit> {
        let n_features = self.columns.len();
        let mut candidates: Vec<usize> = if self.n_candidates >= n_features {
            (0..n_features).collect()
        } else {
            sample(&mut self.rng, n_features, self.n_candidates).into_vec()
        };
        candidates.sort_unstable();

        let n = idx.len() as f64;
        let total: f64 = idx.iter().map(|&i| self.y[i] - mean).sum();
        let parent_term = total * total / n;
        // gains closer than this count as ties: two features inducing the
        // same partition differ only by rounding
        let node_sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        let tol = SPLIT_TIE_TOLERANCE * node_sse;
        let mut per_feature: Vec<(usize, f64, f64)> = Vec::with_capacity(candidates.len());
        for j in candidates {
            let mut best: Option<(usize, f64, f64)> = None;
            let col = &self.columns[j];
            self.order.clear();
            self.order.extend(idx.iter().map(|&i| (col[i], self.y[i] - mean)));
            self.order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for k in 0..self.order.len() - 1 {
                left_sum += self.order[k].1;
                let (a, b) = (self.order[k].0, self.order[k + 1].0);
                if a == b {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent_term;
                if gain > best.map_or(0.0, |b| b.2) + tol {
                    let mut thr = a + (b - a) / 2.0;
                    if thr >= b {
                        thr = a;
                    }
                    best = Some((j, thr, gain));
                }
            }
            per_feature.extend(best);
        }
        let top = per_feature.iter().map(|b| b.2).fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<(usize, f64, f64)> = per_feature
            .into_iter()
            .filter(|b| b.2 >= top - tol)
            .collect();
        let &(feature, threshold, gain) = tied.first()?;
        Some(BestSplit {
            feature,
            threshold,
            gain,
            tied: tied.iter().map(|b| b.0).collect(),
        })
    }
}

/// Grows one tree on the rows listed in `idx` (which may repeat).
fn grow_tree<R: Rng>(
    columns: &[Vec<f64>],
    y: &[f64],
    idx: &mut [usize],
    config: &ForestConfig,
    rng: R,
) -> RegressionTree {
    let mut b = TreeBuilder {
        columns,
        y,
        config,
        n_candidates: config.max_features.resolve(columns.len()),
        rng,
        nodes: Vec::new(),
        order: Vec::with_capacity(idx.len()),
    };
    b.build(idx, 0);
    RegressionTree { nodes: b.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub config: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
    pub per_feature_gain: Vec<f64>,
    /// Sum of all split gains over all trees.
    pub total_split_gain: f64,
    /// Out-of-bag R², when bootstrapping left rows out of every tree.
    pub oob_r2: Option<f64>,
}

impl RegressionForest {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Fits a forest of regression trees on row-major samples `x`.
///
/// Tree `t` draws from its own generator seeded by `derive_seed(seed, t)`,
/// so the result does not depend on how trees are scheduled.
pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[f64],
    config: &ForestConfig,
    seed: u64,
) -> Result<RegressionForest, FeaturesError> {
    if config.n_trees == 0 {
        return Err(FeaturesError::NoTrees);
    }
    if x.len() != y.len() {
        return Err(FeaturesError::ShapeMismatch {
            rows: x.len(),
            targets: y.len(),
        });
    }
    let min = config.min_samples_split.max(2);
    if y.len() < min {
        return Err(FeaturesError::TooFewSamples { min, got: y.len() });
    }
    let n_features = x[0].len();
    if let Some((row, r)) = x.iter().enumerate().find(|(_, r)| r.len() != n_features) {
        return Err(FeaturesError::RaggedRow {
            row,
            expected: n_features,
            got: r.len(),
        });
    }
    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|j| x.iter().map(|r| r[j]).collect())
        .collect();
    let n = y.len();

    let fitted: Vec<(RegressionTree, Vec<bool>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(derive_seed(seed, t as u64));
            let mut in_bag = vec![!config.bootstrap; n];
            let mut idx: Vec<usize> = if config.bootstrap {
                (0..n)
                    .map(|_| {
                        let i = rng.random_range(0..n);
                        in_bag[i] = true;
                        i
                    })
                    .collect()
            } else {
                (0..n).collect()
            };
            let tree = grow_tree(&columns, y, &mut idx, config, rng);
            (tree, in_bag)
        })
        .collect();

    let mut per_feature_gain = vec![0.0; n_features];
    for (tree, _) in &fitted {
        for (acc, g) in per_feature_gain.iter_mut().zip(tree.feature_gains(n_features)) {
            *acc += g;
        }
    }
    let total_split_gain = per_feature_gain.iter().sum();

    let oob_r2 = if config.bootstrap {
        let mut sum = vec![0.0; n];
        let mut count = vec![0usize; n];
        for (tree, in_bag) in &fitted {
            for i in (0..n).filter(|&i| !in_bag[i]) {
                sum[i] += tree.predict(&x[i]);
                count[i] += 1;
            }
        }
        let rows: Vec<usize> = (0..n).filter(|&i| count[i] > 0).collect();
        let truth: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let pred: Vec<f64> = rows.iter().map(|&i| sum[i] / count[i] as f64).collect();
        crate::metrics::evaluate(&truth, &pred).ok().and_then(|r| r.r2)
    } else {
        None
    };

    Ok(RegressionForest {
        config: config.clone(),
        n_features,
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
        per_feature_gain,
        total_split_gain,
        oob_r2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub weights: Vec<f64>,
    /// No tree split at all; `weights` is uniform.
    pub degenerate: bool,
}

/// Normalised impurity importance per feature.
pub fn importance(forest: &RegressionForest) -> FeatureImportance {
    let f = forest.n_features;
    if forest.total_split_gain <= 0.0 {
        return FeatureImportance {
            weights: vec![1.0 / f as f64; f],
            degenerate: true,
        };
    }
    FeatureImportance {
        weights: forest
            .per_feature_gain
            .iter()
            .map(|g| g / forest.total_split_gain)
            .collect(),
        degenerate: false,
    }
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    LowCorrelation,
    Redundant,
    LowImportance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub target: String,
    /// Features with |r| to the target below this are dropped.
    pub low_correlation: f64,
    /// Non-target features linked by |r| above this form a redundant block;
    /// the least important member of each block is dropped.
    pub redundancy: f64,
    pub min_importance: Option<f64>,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            target: Field::Wspd.name().to_string(),
            low_correlation: 0.1,
            redundancy: 0.85,
            min_importance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// Kept features in candidate order.
    pub kept: Vec<String>,
    pub dropped: BTreeMap<String, DropReason>,
}

/// Applies the correlation, redundancy and (optional) importance rules.
/// `importances` is aligned with `corr.names`.
pub fn select_features(
    corr: &CorrelationMatrix,
    importances: &[f64],
    policy: &SelectionPolicy,
) -> Result<FeatureSelection, FeaturesError> {
    let k = corr.names.len();
    if importances.len() != k {
        return Err(FeaturesError::ImportanceLength {
            expected: k,
            got: importances.len(),
        });
    }
    let target = corr
        .index_of(&policy.target)
        .ok_or_else(|| FeaturesError::UnknownFeature(policy.target.clone()))?;

    let mut dropped: BTreeMap<usize, DropReason> = BTreeMap::new();
    for i in (0..k).filter(|&i| i != target) {
        let r = corr.values[i][target];
        if r.is_nan() || r.abs() < policy.low_correlation {
            dropped.insert(i, DropReason::LowCorrelation);
        }
    }

    let alive: Vec<usize> = (0..k)
        .filter(|&i| i != target && !dropped.contains_key(&i))
        .collect();
    let mut seen = vec![false; k];
    for &start in &alive {
        if seen[start] {
            continue;
        }
        let mut block = vec![start];
        seen[start] = true;
        let mut cursor = 0;
        while cursor < block.len() {
            let a = block[cursor];
            cursor += 1;
            for &b in &alive {
                if !seen[b] && corr.values[a][b].abs() > policy.redundancy {
                    seen[b] = true;
                    block.push(b);
                }
            }
        }
        if block.len() >= 2 {
            block.sort_unstable();
            let weakest = block
                .iter()
                .copied()
                .min_by(|&a, &b| importances[a].total_cmp(&importances[b]))
                .expect("block is non-empty");
            dropped.insert(weakest, DropReason::Redundant);
        }
    }

    if let Some(min) = policy.min_importance {
        let candidates: Vec<usize> = (0..k)
            .filter(|&i| i != target && !dropped.contains_key(&i))
            .collect();
        for i in candidates {
            if importances[i] < min {
                dropped.insert(i, DropReason::LowImportance);
            }
        }
    }

    Ok(FeatureSelection {
        kept: (0..k)
            .filter(|i| !dropped.contains_key(i))
            .map(|i| corr.names[i].clone())
            .collect(),
        dropped: dropped
            .into_iter()
            .map(|(i, r)| (corr.names[i].clone(), r))
            .collect(),
    })
}

/// Everything the selection step produced for one table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureAnalysis {
    pub correlation: CorrelationMatrix,
    /// Aligned with `correlation.names`.
    pub importance: FeatureImportance,
    pub oob_r2: Option<f64>,
    pub selection: FeatureSelection,
}

/// Correlations over `candidates`, a forest predicting the target
/// `horizon` rows ahead from every candidate at the current row, and the
/// selection rules. Rows with any non-finite value are skipped.
pub fn analyze(
    table: &FeatureTable,
    candidates: &[&str],
    policy: &SelectionPolicy,
    forest: &ForestConfig,
    horizon: usize,
    seed: u64,
) -> Result<FeatureAnalysis, FeaturesError> {
    if !candidates.contains(&policy.target.as_str()) {
        return Err(FeaturesError::UnknownFeature(policy.target.clone()));
    }
    let correlation = pearson_matrix_table(table, candidates)?;
    let cols: Vec<&[f64]> = candidates
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_, _>>()?;
    let target = table.column(&policy.target)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in 0..table.len().saturating_sub(horizon) {
        let row: Vec<f64> = cols.iter().map(|c| c[t]).collect();
        let next = target[t + horizon];
        if next.is_finite() && row.iter().all(|v| v.is_finite()) {
            x.push(row);
            y.push(next);
        }
    }
    let fitted = fit_forest(&x, &y, forest, seed)?;
    let importance = importance(&fitted);
    let selection = select_features(&correlation, &importance.weights, policy)?;
    Ok(FeatureAnalysis {
        correlation,
        importance,
        oob_r2: fitted.oob_r2,
        selection,
    })
}
