//! Strata from auxiliary features.
//!
//! A stratum is one cell of the partition obtained by discretizing `d`
//! selected features into `M` equally frequent bins each (`M` is the arity).
//! Thresholds are empirical quantiles of the fitting data, so on that data
//! each bin holds close to `N/M` rows. Samples map to one of `M^d` strata via
//! little-endian mixed-radix encoding of their per-feature bins, and stratum
//! probabilities are estimated with optional Laplace smoothing so that no
//! stratum keeps probability zero.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Absolute tolerance on the sum of a stratum distribution.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StrataError {
    #[error("feature matrix needs at least one row and one column")]
    EmptyMatrix,
    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in feature `{feature}` at row {row}")]
    NonFinite { feature: String, row: usize },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("requested {requested} features but the matrix has {available}")]
    TooManyFeatures { requested: usize, available: usize },
    #[error("feature selection needs d >= 1")]
    ZeroFeatures,
    #[error("correlation score has {got} entries, expected {expected}")]
    ScoreLength { got: usize, expected: usize },
    #[error("arity must be at least 2, got {0}")]
    ArityTooSmall(usize),
    #[error("feature `{feature}`: {rows} rows is fewer than arity {arity}")]
    TooFewRows {
        feature: String,
        rows: usize,
        arity: usize,
    },
    #[error("degenerate feature `{0}`: fewer distinct quantiles than the arity")]
    DegenerateFeature(String),
    #[error("{arity}^{features} strata exceed the addressable stratum space")]
    StratumSpaceTooLarge { arity: usize, features: usize },
    #[error(
        "discretizer parts disagree: {features} features, {indices} source indices, \
         {thresholds} threshold lists"
    )]
    DiscretizerShape {
        features: usize,
        indices: usize,
        thresholds: usize,
    },
    #[error("thresholds for feature `{0}` are not strictly ascending")]
    UnorderedThresholds(String),
    #[error("feature row has {got} values but feature index {index} is needed")]
    MissingFeature { index: usize, got: usize },
    #[error("stratum index {index} out of range for {count} strata")]
    StratumOutOfRange { index: usize, count: usize },
    #[error(
        "stratum {0} unobserved with smoothing alpha = 0; \
         every stratum must keep positive probability"
    )]
    EmptyStratum(usize),
    #[error("smoothing alpha must be a non-negative finite number, got {0}")]
    InvalidAlpha(f64),
    #[error("stratum count must be at least 1")]
    ZeroStrata,
    #[error("probabilities sum to {sum:e}, expected 1 within {SIMPLEX_TOLERANCE:e}")]
    NotASimplex { sum: f64 },
    #[error("stratum {index} has invalid probability {value}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("csv record {record}: {message}")]
    MalformedCsv { record: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Rectangular matrix of named real-valued features, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, StrataError> {
        if feature_names.is_empty() || rows.is_empty() {
            return Err(StrataError::EmptyMatrix);
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.clone()) {
                return Err(StrataError::DuplicateFeature(name.clone()));
            }
        }
        let expected = feature_names.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != expected {
                return Err(StrataError::RaggedRow {
                    row: r,
                    got: row.len(),
                    expected,
                });
            }
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(StrataError::NonFinite {
                        feature: feature_names[c].clone(),
                        row: r,
                    });
                }
            }
        }
        Ok(Self {
            feature_names,
            rows,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Result<usize, StrataError> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| StrataError::UnknownFeature(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, StrataError> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// A feature matrix read from CSV together with sample ids and optional
/// class labels.
///
/// CSV layout: first column is the sample id, an optional named column holds
/// the class label, every remaining column is a real-valued feature.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub sample_ids: Vec<String>,
    pub labels: Option<Vec<String>>,
    pub matrix: FeatureMatrix,
}

impl FeatureTable {
    pub fn read_csv(
        path: impl AsRef<Path>,
        label_column: Option<&str>,
    ) -> Result<Self, StrataError> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.len() < 2 {
            return Err(StrataError::EmptyMatrix);
        }
        let label_idx = match label_column {
            Some(name) => Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| StrataError::UnknownFeature(name.to_string()))?,
            ),
            None => None,
        };
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, h)| h.to_string())
            .collect();

        let mut sample_ids = Vec::new();
        let mut labels = label_idx.map(|_| Vec::new());
        let mut rows = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(StrataError::MalformedCsv {
                    record: r + 1,
                    message: format!("expected {} columns, got {}", headers.len(), record.len()),
                });
            }
            sample_ids.push(record[0].to_string());
            let mut row = Vec::with_capacity(feature_names.len());
            for (i, field) in record.iter().enumerate() {
                if i == 0 {
                    continue;
                }
                if Some(i) == label_idx {
                    labels.as_mut().unwrap().push(field.to_string());
                    continue;
                }
                row.push(field.parse().map_err(|e| StrataError::MalformedCsv {
                    record: r + 1,
                    message: format!("bad value in `{}`: {e}", &headers[i]),
                })?);
            }
            rows.push(row);
        }
        Ok(Self {
            sample_ids,
            labels,
            matrix: FeatureMatrix::new(feature_names, rows)?,
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), StrataError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string()];
        if self.labels.is_some() {
            header.push("class".to_string());
        }
        header.extend(self.matrix.feature_names().iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.matrix.rows().iter().enumerate() {
            let mut record = vec![self.sample_ids[i].clone()];
            if let Some(labels) = &self.labels {
                record.push(labels[i].clone());
            }
            record.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How the `d` stratification features are chosen.
///
/// Nothing forces one choice, so the caller decides; `Explicit` keeps the
/// experimenter deliberate, `MaxAbsCorrelation` picks the features most
/// correlated (in absolute value) with a provided per-row score.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionStrategy {
    Explicit(Vec<String>),
    FirstD,
    MaxAbsCorrelation { score: Vec<f64> },
    Random { seed: u64 },
}

/// Selects exactly `d` distinct feature names, deterministically given the
/// strategy (and seed, for `Random`).
pub fn select_features(
    features: &FeatureMatrix,
    d: usize,
    strategy: &SelectionStrategy,
) -> Result<Vec<String>, StrataError> {
    if d == 0 {
        return Err(StrataError::ZeroFeatures);
    }
    if d > features.n_features() {
        return Err(StrataError::TooManyFeatures {
            requested: d,
            available: features.n_features(),
        });
    }
    match strategy {
        SelectionStrategy::Explicit(names) => {
            if names.len() < d {
                return Err(StrataError::TooManyFeatures {
                    requested: d,
                    available: names.len(),
                });
            }
            let take = &names[..d];
            let mut seen = HashSet::new();
            for name in take {
                features.column_index(name)?;
                if !seen.insert(name.clone()) {
                    return Err(StrataError::DuplicateFeature(name.clone()));
                }
            }
            Ok(take.to_vec())
        }
        SelectionStrategy::FirstD => Ok(features.feature_names()[..d].to_vec()),
        SelectionStrategy::MaxAbsCorrelation { score } => {
            if score.len() != features.n_rows() {
                return Err(StrataError::ScoreLength {
                    got: score.len(),
                    expected: features.n_rows(),
                });
            }
            let mut scored: Vec<(usize, f64)> = (0..features.n_features())
                .map(|c| {
                    let column: Vec<f64> = features.rows().iter().map(|r| r[c]).collect();
                    (c, abs_pearson(&column, score))
                })
                .collect();
            // Highest |correlation| first; column order breaks ties.
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let mut picked: Vec<usize> = scored[..d].iter().map(|(c, _)| *c).collect();
            picked.sort_unstable();
            Ok(picked
                .into_iter()
                .map(|c| features.feature_names()[c].clone())
                .collect())
        }
        SelectionStrategy::Random { seed } => {
            let mut rng = rng::seeded(*seed);
            let mut picked =
                rand::seq::index::sample(&mut rng, features.n_features(), d).into_vec();
            picked.sort_unstable();
            Ok(picked
                .into_iter()
                .map(|c| features.feature_names()[c].clone())
                .collect())
        }
    }
}

/// |Pearson correlation|; 0 when either side has zero variance.
fn abs_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    (cov / (var_a * var_b).sqrt()).abs()
}

/// Quantile discretizer: `d` selected features, each split into `arity`
/// equally frequent bins by `arity - 1` ascending thresholds.
///
/// Values equal to a threshold fall in the lower bin. The stratum index is
/// the little-endian mixed-radix encoding `sum_j bin_j * arity^j`.
///
/// A fitted discretizer is immutable; sharing it across threads for
/// assignment is safe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscretizer")]
pub struct Discretizer {
    selected_features: Vec<String>,
    source_indices: Vec<usize>,
    thresholds: Vec<Vec<f64>>,
    arity: usize,
}

#[derive(Deserialize)]
struct RawDiscretizer {
    selected_features: Vec<String>,
    source_indices: Vec<usize>,
    thresholds: Vec<Vec<f64>>,
    arity: usize,
}

impl TryFrom<RawDiscretizer> for Discretizer {
    type Error = StrataError;

    fn try_from(raw: RawDiscretizer) -> Result<Self, StrataError> {
        Discretizer::from_thresholds(
            raw.selected_features,
            raw.source_indices,
            raw.thresholds,
            raw.arity,
        )
    }
}

impl Discretizer {
    /// Builds a discretizer from explicit thresholds. `source_indices` map
    /// each selected feature to its column in the full feature rows handed
    /// to [`Discretizer::assign`].
    pub fn from_thresholds(
        selected_features: Vec<String>,
        source_indices: Vec<usize>,
        thresholds: Vec<Vec<f64>>,
        arity: usize,
    ) -> Result<Self, StrataError> {
        if arity < 2 {
            return Err(StrataError::ArityTooSmall(arity));
        }
        if selected_features.is_empty() {
            return Err(StrataError::ZeroFeatures);
        }
        if selected_features.len() != source_indices.len()
            || selected_features.len() != thresholds.len()
        {
            return Err(StrataError::DiscretizerShape {
                features: selected_features.len(),
                indices: source_indices.len(),
                thresholds: thresholds.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &selected_features {
            if !seen.insert(name.clone()) {
                return Err(StrataError::DuplicateFeature(name.clone()));
            }
        }
        for (name, cuts) in selected_features.iter().zip(&thresholds) {
            if cuts.len() != arity - 1 {
                return Err(StrataError::DegenerateFeature(name.clone()));
            }
            if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(StrataError::UnorderedThresholds(name.clone()));
            }
        }
        arity.checked_pow(selected_features.len() as u32).ok_or(
            StrataError::StratumSpaceTooLarge {
                arity,
                features: selected_features.len(),
            },
        )?;
        Ok(Self {
            selected_features,
            source_indices,
            thresholds,
            arity,
        })
    }

    pub fn selected_features(&self) -> &[String] {
        &self.selected_features
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn feature_count(&self) -> usize {
        self.selected_features.len()
    }

    /// `arity ^ d`.
    pub fn stratum_count(&self) -> usize {
        self.arity.pow(self.selected_features.len() as u32)
    }

    /// Bin of `value`: the number of thresholds strictly below it, so a value
    /// equal to a threshold falls in the lower bin.
    fn bin(cuts: &[f64], value: f64) -> usize {
        cuts.partition_point(|t| *t < value)
    }

    /// Stratum of a full feature row (layout of the fitting matrix).
    pub fn assign(&self, full_row: &[f64]) -> Result<usize, StrataError> {
        let mut index = 0;
        let mut radix = 1;
        for (&col, cuts) in self.source_indices.iter().zip(&self.thresholds) {
            let value = *full_row.get(col).ok_or(StrataError::MissingFeature {
                index: col,
                got: full_row.len(),
            })?;
            index += Self::bin(cuts, value) * radix;
            radix *= self.arity;
        }
        Ok(index)
    }

    /// Stratum of a row holding just the selected features, in selection
    /// order.
    pub fn assign_selected(&self, values: &[f64]) -> Result<usize, StrataError> {
        if values.len() != self.selected_features.len() {
            return Err(StrataError::MissingFeature {
                index: self.selected_features.len() - 1,
                got: values.len(),
            });
        }
        let mut index = 0;
        let mut radix = 1;
        for (&value, cuts) in values.iter().zip(&self.thresholds) {
            index += Self::bin(cuts, value) * radix;
            radix *= self.arity;
        }
        Ok(index)
    }

    /// Strata for every row of a matrix, resolving features by name (the
    /// matrix may have a different column order than the fitting data).
    pub fn assign_matrix(&self, features: &FeatureMatrix) -> Result<Vec<usize>, StrataError> {
        let cols: Vec<usize> = self
            .selected_features
            .iter()
            .map(|name| features.column_index(name))
            .collect::<Result<_, _>>()?;
        Ok(features
            .rows()
            .iter()
            .map(|row| {
                let mut index = 0;
                let mut radix = 1;
                for (&col, cuts) in cols.iter().zip(&self.thresholds) {
                    index += Self::bin(cuts, row[col]) * radix;
                    radix *= self.arity;
                }
                index
            })
            .collect())
    }

    /// JSON form carrying feature names, thresholds and arity.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("discretizer serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, StrataError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, StrataError> {
        let mut buf = String::new();
        File::open(path)?.read_to_string(&mut buf)?;
        Self::from_json(&buf)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), StrataError> {
        Ok(File::create(path)?.write_all(self.to_json().as_bytes())?)
    }
}

/// Fits equally frequent bins: per selected feature the thresholds are the
/// empirical quantiles at `k/arity`, `k = 1..arity-1`, taken as order
/// statistics of the fitting column.
///
/// Features with fewer distinct quantiles than the arity are rejected rather
/// than silently merged: a merged bin would change the stratum count and
/// corrupt downstream plan arithmetic.
pub fn fit_quantile_bins(
    features: &FeatureMatrix,
    selected: &[String],
    arity: usize,
) -> Result<Discretizer, StrataError> {
    if arity < 2 {
        return Err(StrataError::ArityTooSmall(arity));
    }
    let n = features.n_rows();
    let mut source_indices = Vec::with_capacity(selected.len());
    let mut thresholds = Vec::with_capacity(selected.len());
    for name in selected {
        let col = features.column_index(name)?;
        source_indices.push(col);
        if n < arity {
            return Err(StrataError::TooFewRows {
                feature: name.clone(),
                rows: n,
                arity,
            });
        }
        let mut values: Vec<f64> = features.rows().iter().map(|r| r[col]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let distinct = 1 + values.windows(2).filter(|w| w[0] < w[1]).count();
        if distinct < arity {
            return Err(StrataError::DegenerateFeature(name.clone()));
        }
        let cuts: Vec<f64> = (1..arity)
            .map(|k| values[(k * n).div_ceil(arity) - 1])
            .collect();
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(StrataError::DegenerateFeature(name.clone()));
        }
        thresholds.push(cuts);
    }
    Discretizer::from_thresholds(selected.to_vec(), source_indices, thresholds, arity)
}

/// Whether a stratum distribution describes the reference (target) side or
/// the model side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionSource {
    Reference,
    Model,
}

/// Probabilities over the `M^d` strata.
///
/// Entries are non-negative and sum to 1; the smoothing estimator
/// [`estimate_stratum_probs`] additionally guarantees strictly positive
/// entries, which stratified rejection requires on the model side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStratumDistribution")]
pub struct StratumDistribution {
    probs: Vec<f64>,
    source: DistributionSource,
    sample_count: usize,
}

#[derive(Deserialize)]
struct RawStratumDistribution {
    probs: Vec<f64>,
    source: DistributionSource,
    sample_count: usize,
}

impl TryFrom<RawStratumDistribution> for StratumDistribution {
    type Error = StrataError;

    fn try_from(raw: RawStratumDistribution) -> Result<Self, StrataError> {
        StratumDistribution::new(raw.probs, raw.source, raw.sample_count)
    }
}

impl StratumDistribution {
    pub fn new(
        probs: Vec<f64>,
        source: DistributionSource,
        sample_count: usize,
    ) -> Result<Self, StrataError> {
        if probs.is_empty() {
            return Err(StrataError::ZeroStrata);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(StrataError::InvalidProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(StrataError::NotASimplex { sum });
        }
        Ok(Self {
            probs,
            source,
            sample_count,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn source(&self) -> DistributionSource {
        self.source
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stratum distribution serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, StrataError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, StrataError> {
        let mut buf = String::new();
        File::open(path)?.read_to_string(&mut buf)?;
        Self::from_json(&buf)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), StrataError> {
        Ok(File::create(path)?.write_all(self.to_json().as_bytes())?)
    }
}

/// Estimates stratum probabilities from assignments with Laplace smoothing:
/// `probs[i] = (count_i + alpha) / (N + alpha * stratum_count)`.
///
/// With `alpha = 0` every stratum must be observed; an unobserved stratum
/// would get probability 0, which the rejection plan cannot divide by.
pub fn estimate_stratum_probs(
    assignments: &[usize],
    stratum_count: usize,
    alpha: f64,
    source: DistributionSource,
) -> Result<StratumDistribution, StrataError> {
    if stratum_count == 0 {
        return Err(StrataError::ZeroStrata);
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(StrataError::InvalidAlpha(alpha));
    }
    let mut counts = vec![0usize; stratum_count];
    for &index in assignments {
        if index >= stratum_count {
            return Err(StrataError::StratumOutOfRange {
                index,
                count: stratum_count,
            });
        }
        counts[index] += 1;
    }
    if alpha == 0.0 {
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(StrataError::EmptyStratum(empty));
        }
    }
    let n = assignments.len() as f64;
    let denom = n + alpha * stratum_count as f64;
    let probs = counts.iter().map(|&c| (c as f64 + alpha) / denom).collect();
    StratumDistribution::new(probs, source, assignments.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(names: &[&str], rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::new(
            names.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn column_matrix(name: &str, values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(
            vec![name.to_string()],
            values.iter().map(|&v| vec![v]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn explicit_selection_passes_through() {
        let m = matrix(&["e1", "e2", "e3"], &[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let strategy = SelectionStrategy::Explicit(vec!["e1".into(), "e2".into()]);
        assert_eq!(
            select_features(&m, 2, &strategy).unwrap(),
            vec!["e1".to_string(), "e2".to_string()]
        );

        let unknown = SelectionStrategy::Explicit(vec!["e1".into(), "nope".into()]);
        match select_features(&m, 2, &unknown) {
            Err(StrataError::UnknownFeature(name)) => assert_eq!(name, "nope"),
            other => panic!("expected unknown feature, got {other:?}"),
        }
    }

    #[test]
    fn first_d_takes_a_prefix() {
        let m = matrix(
            &["a", "b", "c", "d"],
            &[&[0.0, 0.0, 0.0, 0.0], &[1.0, 1.0, 1.0, 1.0]],
        );
        assert_eq!(
            select_features(&m, 3, &SelectionStrategy::FirstD).unwrap(),
            vec!["a".to_string(), "b".to_string(), "c".to_string()]
        );
        assert!(matches!(
            select_features(&m, 5, &SelectionStrategy::FirstD),
            Err(StrataError::TooManyFeatures { .. })
        ));
    }

    #[test]
    fn correlation_selection_finds_planted_columns() {
        // 128 binary columns; the score is built from four of them, so an
        // exhaustive correlation scan is the oracle.
        let n = 400;
        let cols = 128;
        let planted = [5usize, 17, 63, 100];
        let mut rng = crate::rng::seeded(99);
        let mut rows = vec![vec![0.0f64; cols]; n];
        for row in rows.iter_mut() {
            for v in row.iter_mut() {
                *v = if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 };
            }
        }
        let score: Vec<f64> = rows
            .iter()
            .map(|row| {
                let signal: f64 = planted.iter().map(|&c| row[c]).sum();
                signal + 0.05 * rng.random::<f64>()
            })
            .collect();
        let names: Vec<String> = (0..cols).map(|c| format!("v{c}")).collect();
        let m = FeatureMatrix::new(names.clone(), rows.clone()).unwrap();

        // Oracle: independent scan.
        let mut oracle: Vec<(usize, f64)> = (0..cols)
            .map(|c| {
                let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
                (c, abs_pearson(&col, &score))
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let mut expected: Vec<usize> = oracle[..4].iter().map(|(c, _)| *c).collect();
        expected.sort_unstable();
        assert_eq!(expected, planted.to_vec(), "oracle should find the plant");

        let strategy = SelectionStrategy::MaxAbsCorrelation { score };
        let picked = select_features(&m, 4, &strategy).unwrap();
        let expected_names: Vec<String> = expected.iter().map(|&c| names[c].clone()).collect();
        assert_eq!(picked, expected_names);
    }

    #[test]
    fn random_selection_is_deterministic_per_seed() {
        let m = matrix(
            &["a", "b", "c", "d", "e"],
            &[&[0.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]],
        );
        let s42 = SelectionStrategy::Random { seed: 42 };
        let first = select_features(&m, 2, &s42).unwrap();
        assert_eq!(first, select_features(&m, 2, &s42).unwrap());
        assert_eq!(first.len(), 2);
        assert_ne!(first[0], first[1]);
    }

    #[test]
    fn quantile_bins_split_one_to_nine() {
        // Oracle: sort and split; 1..9 with arity 3 gives bins
        // {1,2,3}, {4,5,6}, {7,8,9} and thresholds 3 and 6.
        let m = column_matrix("x", &[5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0]);
        let disc = fit_quantile_bins(&m, &["x".to_string()], 3).unwrap();
        assert_eq!(disc.thresholds, vec![vec![3.0, 6.0]]);
        for v in [1.0, 2.0, 3.0] {
            assert_eq!(disc.assign(&[v]).unwrap(), 0);
        }
        for v in [4.0, 5.0, 6.0] {
            assert_eq!(disc.assign(&[v]).unwrap(), 1);
        }
        for v in [7.0, 8.0, 9.0] {
            assert_eq!(disc.assign(&[v]).unwrap(), 2);
        }
    }

    #[test]
    fn median_split_balances_within_one() {
        let values: Vec<f64> = (0..17).map(|i| i as f64 * 1.3 - 4.0).collect();
        let m = column_matrix("x", &values);
        let disc = fit_quantile_bins(&m, &["x".to_string()], 2).unwrap();
        let counts = values.iter().fold([0usize; 2], |mut acc, &v| {
            acc[disc.assign(&[v]).unwrap()] += 1;
            acc
        });
        let ideal = values.len() as f64 / 2.0;
        for c in counts {
            assert!((c as f64 - ideal).abs() <= 1.0, "{counts:?}");
        }
    }

    #[test]
    fn constant_column_is_degenerate() {
        let m = column_matrix("flat", &[2.0; 10]);
        match fit_quantile_bins(&m, &["flat".to_string()], 2) {
            Err(StrataError::DegenerateFeature(name)) => assert_eq!(name, "flat"),
            other => panic!("expected degenerate feature, got {other:?}"),
        }
    }

    #[test]
    fn tie_heavy_column_fails_instead_of_merging() {
        let m = column_matrix("x", &[1.0, 1.0, 1.0, 1.0, 2.0, 3.0]);
        assert!(matches!(
            fit_quantile_bins(&m, &["x".to_string()], 3),
            Err(StrataError::DegenerateFeature(_))
        ));
    }

    #[test]
    fn mixed_radix_index_is_little_endian() {
        // d = 2, arity 3, bins (2, 1) -> index 2 + 3 * 1 = 5.
        let disc = Discretizer::from_thresholds(
            vec!["a".into(), "b".into()],
            vec![0, 1],
            vec![vec![10.0, 20.0], vec![10.0, 20.0]],
            3,
        )
        .unwrap();
        // First feature in bin 2 (value above both cuts), second in bin 1.
        assert_eq!(disc.assign(&[25.0, 15.0]).unwrap(), 5);
        assert_eq!(disc.assign_selected(&[25.0, 15.0]).unwrap(), 5);
        assert_eq!(disc.stratum_count(), 9);
    }

    #[test]
    fn boundary_values_fall_in_the_lower_bin() {
        let disc =
            Discretizer::from_thresholds(vec!["x".into()], vec![0], vec![vec![10.0, 20.0]], 3)
                .unwrap();
        assert_eq!(disc.assign(&[5.0]).unwrap(), 0);
        assert_eq!(disc.assign(&[10.0]).unwrap(), 0);
        assert_eq!(disc.assign(&[10.000001]).unwrap(), 1);
        assert_eq!(disc.assign(&[20.0]).unwrap(), 1);
        assert_eq!(disc.assign(&[21.0]).unwrap(), 2);
    }

    #[test]
    fn missing_feature_errors() {
        let disc = Discretizer::from_thresholds(
            vec!["a".into(), "b".into()],
            vec![0, 3],
            vec![vec![1.0], vec![1.0]],
            2,
        )
        .unwrap();
        assert!(matches!(
            disc.assign(&[0.5, 0.5]),
            Err(StrataError::MissingFeature { .. })
        ));
        let m = matrix(&["a", "c"], &[&[0.0, 0.0]]);
        assert!(matches!(
            disc.assign_matrix(&m),
            Err(StrataError::UnknownFeature(_))
        ));
    }

    #[test]
    fn estimator_examples() {
        let d = estimate_stratum_probs(&[0, 0, 1, 1], 2, 0.0, DistributionSource::Model).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);

        let d = estimate_stratum_probs(&[0, 0, 0, 1], 3, 1.0, DistributionSource::Model).unwrap();
        assert_eq!(d.probs(), &[4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]);

        assert!(matches!(
            estimate_stratum_probs(&[1, 1, 1, 1], 2, 0.0, DistributionSource::Model),
            Err(StrataError::EmptyStratum(0))
        ));
    }

    #[test]
    fn discretizer_json_round_trip() {
        let m = matrix(
            &["a", "b"],
            &[&[1.0, 9.0], &[2.0, 8.0], &[3.0, 7.0], &[4.0, 6.0]],
        );
        let disc = fit_quantile_bins(&m, &["b".to_string(), "a".to_string()], 2).unwrap();
        let back = Discretizer::from_json(&disc.to_json()).unwrap();
        assert_eq!(back, disc);
    }

    #[test]
    fn feature_table_round_trip_with_labels() {
        let dir = std::env::temp_dir().join(format!("restrata-strata-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("features.csv");
        let table = FeatureTable {
            sample_ids: vec!["s0".into(), "s1".into()],
            labels: Some(vec!["A".into(), "B".into()]),
            matrix: matrix(&["f0", "f1"], &[&[0.25, -1.0], &[0.75, 2.0]]),
        };
        table.write_csv(&path).unwrap();
        let back = FeatureTable::read_csv(&path, Some("class")).unwrap();
        assert_eq!(back.sample_ids, table.sample_ids);
        assert_eq!(back.labels, table.labels);
        assert_eq!(back.matrix, table.matrix);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        // The "equally frequent" contract: occupancy within +-1 of n/arity
        // when values are distinct.
        #[test]
        fn fitted_bins_are_equally_frequent(
            seed in 0u64..500,
            n in 6usize..120,
            arity in 2usize..6,
        ) {
            prop_assume!(n >= arity);
            let mut rng = crate::rng::seeded(seed);
            let mut values: Vec<f64> = Vec::with_capacity(n);
            let mut seen = std::collections::HashSet::new();
            while values.len() < n {
                let v: i64 = rng.random_range(-1_000_000..1_000_000);
                if seen.insert(v) {
                    values.push(v as f64 / 1000.0);
                }
            }
            let m = FeatureMatrix::new(
                vec!["x".into()],
                values.iter().map(|&v| vec![v]).collect(),
            ).unwrap();
            let disc = fit_quantile_bins(&m, &["x".to_string()], arity).unwrap();
            let mut counts = vec![0usize; arity];
            for &v in &values {
                counts[disc.assign(&[v]).unwrap()] += 1;
            }
            let ideal = n as f64 / arity as f64;
            for (bin, &c) in counts.iter().enumerate() {
                prop_assert!(
                    (c as f64 - ideal).abs() <= 1.0,
                    "bin {} holds {} of {} rows (arity {})", bin, c, n, arity
                );
            }
        }

        #[test]
        fn assignment_is_total_over_complete_rows(
            value in -1e9..1e9f64,
            cuts in prop::collection::btree_set(-1_000_000i64..1_000_000, 1..5),
        ) {
            let cuts: Vec<f64> = cuts.into_iter().map(|c| c as f64).collect();
            let arity = cuts.len() + 1;
            let disc = Discretizer::from_thresholds(
                vec!["x".into()], vec![0], vec![cuts], arity,
            ).unwrap();
            let stratum = disc.assign(&[value]).unwrap();
            prop_assert!(stratum < disc.stratum_count());
        }

        #[test]
        fn smoothing_yields_positive_simplex(
            assignments in prop::collection::vec(0usize..6, 1..200),
            alpha in 0.1..5.0f64,
        ) {
            let d = estimate_stratum_probs(&assignments, 6, alpha, DistributionSource::Model)
                .unwrap();
            prop_assert!(d.probs().iter().all(|&p| p > 0.0));
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
