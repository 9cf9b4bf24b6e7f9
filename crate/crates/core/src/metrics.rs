//! Class frequencies and the diversity-loss metric.
//!
//! The diversity loss of an observed frequency vector `f'` against a target
//! vector `f` is
//!
//! ```text
//! delta = 1 - min over { i : f_i > 0 } of f'_i / f_i
//! ```
//!
//! `delta = 0` when every target frequency is reached and `delta = 1` when a
//! class with positive target frequency has disappeared. Classes with zero
//! target frequency are excluded from the minimum and reported separately.
//!
//! Everything here is a pure function over immutable inputs; concurrent use
//! needs no coordination.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on the sum of a frequency vector.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples")]
    NoSamples,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate class id `{0}`")]
    DuplicateClassId(String),
    #[error("{classes} class ids but {values} values")]
    LengthMismatch { classes: usize, values: usize },
    #[error("frequencies sum to {sum:e}, expected 1 within {SIMPLEX_TOLERANCE:e}")]
    NotASimplex { sum: f64 },
    #[error("class `{class}` has invalid frequency {value}")]
    InvalidFrequency { class: String, value: f64 },
    #[error("frequency vector is empty")]
    Empty,
    #[error("target and observed vectors have different class ids")]
    ClassSetMismatch,
    #[error("target has no class with positive frequency")]
    AllZeroTarget,
    #[error("no loss to repair")]
    NoLossToRepair,
    #[error("cannot renormalize: values sum to {0}")]
    ZeroSum(f64),
    #[error("csv record {record}: {message}")]
    MalformedCsv { record: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Target or observed class frequencies on the probability simplex.
///
/// Invariants: values are non-negative, sum to 1 within
/// [`SIMPLEX_TOLERANCE`], and class ids are unique. Inputs are never
/// renormalized silently; use [`FrequencyVector::renormalized`] when the
/// caller explicitly wants that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrequencyVector")]
pub struct FrequencyVector {
    #[serde(rename = "classes")]
    class_ids: Vec<String>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawFrequencyVector {
    classes: Vec<String>,
    values: Vec<f64>,
}

impl TryFrom<RawFrequencyVector> for FrequencyVector {
    type Error = MetricsError;

    fn try_from(raw: RawFrequencyVector) -> Result<Self, MetricsError> {
        FrequencyVector::new(raw.classes, raw.values)
    }
}

impl FrequencyVector {
    pub fn new(class_ids: Vec<String>, values: Vec<f64>) -> Result<Self, MetricsError> {
        if class_ids.is_empty() {
            return Err(MetricsError::Empty);
        }
        if class_ids.len() != values.len() {
            return Err(MetricsError::LengthMismatch {
                classes: class_ids.len(),
                values: values.len(),
            });
        }
        let mut seen = HashMap::new();
        for id in &class_ids {
            if seen.insert(id.clone(), ()).is_some() {
                return Err(MetricsError::DuplicateClassId(id.clone()));
            }
        }
        for (id, &v) in class_ids.iter().zip(&values) {
            if !v.is_finite() || v < 0.0 {
                return Err(MetricsError::InvalidFrequency {
                    class: id.clone(),
                    value: v,
                });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(MetricsError::NotASimplex { sum });
        }
        Ok(Self { class_ids, values })
    }

    /// Builds a frequency vector by renormalizing non-negative raw values.
    /// This is the only place renormalization happens; `new` rejects inputs
    /// off the simplex.
    pub fn renormalized(class_ids: Vec<String>, raw: Vec<f64>) -> Result<Self, MetricsError> {
        let sum: f64 = raw.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(MetricsError::ZeroSum(sum));
        }
        let values = raw.iter().map(|v| v / sum).collect();
        Self::new(class_ids, values)
    }

    /// Frequencies from per-class sample counts.
    pub fn from_counts(class_ids: Vec<String>, counts: &[usize]) -> Result<Self, MetricsError> {
        if class_ids.len() != counts.len() {
            return Err(MetricsError::LengthMismatch {
                classes: class_ids.len(),
                values: counts.len(),
            });
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(MetricsError::NoSamples);
        }
        let values = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(class_ids, values)
    }

    pub fn uniform(class_ids: Vec<String>) -> Result<Self, MetricsError> {
        let n = class_ids.len();
        if n == 0 {
            return Err(MetricsError::Empty);
        }
        let values = vec![1.0 / n as f64; n];
        Self::new(class_ids, values)
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_of(&self, class_id: &str) -> Option<f64> {
        self.class_ids
            .iter()
            .position(|c| c == class_id)
            .map(|i| self.values[i])
    }

    /// JSON form `{"classes": [...], "values": [...]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("frequency vector serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, MetricsError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let mut buf = String::new();
        File::open(path)?.read_to_string(&mut buf)?;
        Self::from_json(&buf)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        Ok(File::create(path)?.write_all(self.to_json().as_bytes())?)
    }

    /// Two-column CSV `class,frequency`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["class", "frequency"])?;
        for (id, v) in self.class_ids.iter().zip(&self.values) {
            w.write_record([id.as_str(), &format!("{v}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let mut r = csv::Reader::from_path(path)?;
        let mut class_ids = Vec::new();
        let mut values = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(MetricsError::MalformedCsv {
                    record: i + 1,
                    message: format!("expected 2 columns, got {}", record.len()),
                });
            }
            class_ids.push(record[0].to_string());
            values.push(record[1].parse().map_err(|e| MetricsError::MalformedCsv {
                record: i + 1,
                message: format!("bad frequency: {e}"),
            })?);
        }
        Self::new(class_ids, values)
    }
}

/// Result of comparing observed frequencies against a target.
#[derive(Debug, Clone, Serialize)]
pub struct DiversityLoss {
    /// `1 - min over supported classes of observed/target`.
    pub delta: f64,
    /// Class attaining the minimum ratio (first on ties).
    pub worst_class: String,
    /// `observed/target` per class with positive target frequency, in class
    /// order.
    pub per_class_ratio: Vec<f64>,
    /// Classes with zero target frequency, excluded from the minimum.
    pub zero_target_classes: Vec<String>,
}

/// Empirical class frequencies of a labeled sample.
///
/// Classes from `class_ids` that never occur get frequency 0; labels outside
/// `class_ids` are an error.
pub fn class_frequencies<S: AsRef<str>, C: AsRef<str>>(
    labeled_samples: &[S],
    class_ids: &[C],
) -> Result<FrequencyVector, MetricsError> {
    if labeled_samples.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let index: HashMap<&str, usize> = class_ids
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_ref(), i))
        .collect();
    let mut counts = vec![0usize; class_ids.len()];
    for label in labeled_samples {
        let label = label.as_ref();
        match index.get(label) {
            Some(&i) => counts[i] += 1,
            None => return Err(MetricsError::UnknownLabel(label.to_string())),
        }
    }
    FrequencyVector::from_counts(
        class_ids.iter().map(|c| c.as_ref().to_string()).collect(),
        &counts,
    )
}

/// Diversity loss of `observed` against `target`.
///
/// Requires the same class ids in the same order. Classes with zero target
/// frequency are excluded from the minimum and listed in
/// [`DiversityLoss::zero_target_classes`].
pub fn diversity_loss(
    target: &FrequencyVector,
    observed: &FrequencyVector,
) -> Result<DiversityLoss, MetricsError> {
    if target.class_ids != observed.class_ids {
        return Err(MetricsError::ClassSetMismatch);
    }
    let mut per_class_ratio = Vec::new();
    let mut zero_target_classes = Vec::new();
    let mut min_ratio = f64::INFINITY;
    let mut worst_class = None;
    for ((id, &t), &o) in target
        .class_ids
        .iter()
        .zip(&target.values)
        .zip(&observed.values)
    {
        if t > 0.0 {
            let ratio = o / t;
            if ratio < min_ratio {
                min_ratio = ratio;
                worst_class = Some(id.clone());
            }
            per_class_ratio.push(ratio);
        } else {
            zero_target_classes.push(id.clone());
        }
    }
    let worst_class = worst_class.ok_or(MetricsError::AllZeroTarget)?;
    // On the simplex the target-weighted mean of the ratios is at most 1, so
    // the minimum is too (up to rounding).
    debug_assert!(min_ratio <= 1.0 + 1e-6, "minimum ratio {min_ratio} > 1");
    let delta = (1.0 - min_ratio).clamp(0.0, 1.0);
    Ok(DiversityLoss {
        delta,
        worst_class,
        per_class_ratio,
        zero_target_classes,
    })
}

/// Percentage of the diversity loss left after a repair.
///
/// May exceed 100 when the repair was detrimental.
pub fn remaining_dl_percent(dl_before: f64, dl_after: f64) -> Result<f64, MetricsError> {
    if dl_before.is_nan() || dl_before <= 0.0 {
        return Err(MetricsError::NoLossToRepair);
    }
    Ok(100.0 * dl_after / dl_before)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn fv(ids: &[&str], values: &[f64]) -> FrequencyVector {
        FrequencyVector::new(ids.iter().map(|s| s.to_string()).collect(), values.to_vec()).unwrap()
    }

    #[test]
    fn counts_four_samples() {
        let f = class_frequencies(&["A", "A", "B", "C"], &["A", "B", "C", "D"]).unwrap();
        assert_eq!(f.values(), &[0.5, 0.25, 0.25, 0.0]);
    }

    #[test]
    fn degenerate_single_class() {
        let labels = vec!["A"; 100];
        let f = class_frequencies(&labels, &["A", "B"]).unwrap();
        assert_eq!(f.values(), &[1.0, 0.0]);
    }

    #[test]
    fn empty_samples_and_unknown_labels_error() {
        let none: [&str; 0] = [];
        assert!(matches!(
            class_frequencies(&none, &["A"]),
            Err(MetricsError::NoSamples)
        ));
        match class_frequencies(&["A", "X"], &["A", "B"]) {
            Err(MetricsError::UnknownLabel(l)) => assert_eq!(l, "X"),
            other => panic!("expected unknown label, got {other:?}"),
        }
    }

    #[test]
    fn estimates_match_targets_within_three_sigma() {
        // Four classes at 17.8 / 52.2 / 17.5 / 12.4 percent.
        let target = [0.178, 0.522, 0.175, 0.124];
        let ids = ["a", "b", "c", "d"];
        let n = 1000;
        let mut rng = rng::seeded(20_240_601);
        let cum: Vec<f64> = target
            .iter()
            .scan(0.0, |acc, f| {
                *acc += f;
                Some(*acc)
            })
            .collect();
        let labels: Vec<&str> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let k = cum.partition_point(|c| *c <= u).min(3);
                ids[k]
            })
            .collect();
        let f = class_frequencies(&labels, &ids).unwrap();
        for (i, (&est, &t)) in f.values().iter().zip(&target).enumerate() {
            let sigma = (t * (1.0 - t) / n as f64).sqrt();
            assert!(
                (est - t).abs() <= 3.0 * sigma,
                "class {i}: {est} vs {t} (3 sigma = {})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn identical_vectors_have_zero_loss() {
        let f = fv(&["a", "b", "c", "d"], &[0.25, 0.25, 0.25, 0.25]);
        let dl = diversity_loss(&f, &f).unwrap();
        assert_eq!(dl.delta, 0.0);
    }

    #[test]
    fn vanished_class_gives_full_loss() {
        let target = fv(&["white", "black"], &[0.9536, 0.0464]);
        let observed = fv(&["white", "black"], &[1.0, 0.0]);
        let dl = diversity_loss(&target, &observed).unwrap();
        assert_eq!(dl.delta, 1.0);
        assert_eq!(dl.worst_class, "black");
    }

    #[test]
    fn worked_two_class_example() {
        // Independent oracle: explicit per-class ratio loop.
        let target = [0.5, 0.5];
        let observed = [0.8, 0.2];
        let mut min_ratio = f64::INFINITY;
        for (t, o) in target.iter().zip(&observed) {
            if *t > 0.0 {
                min_ratio = min_ratio.min(o / t);
            }
        }
        assert_eq!(1.0 - min_ratio, 0.6);

        let dl = diversity_loss(&fv(&["a", "b"], &target), &fv(&["a", "b"], &observed)).unwrap();
        assert_eq!(dl.delta, 0.6);
        assert_eq!(dl.worst_class, "b");
        assert_eq!(dl.per_class_ratio, vec![1.6, 0.4]);
    }

    #[test]
    fn zero_target_classes_are_reported_not_scored() {
        let target = fv(&["a", "b", "c"], &[0.5, 0.5, 0.0]);
        let observed = fv(&["a", "b", "c"], &[0.5, 0.4, 0.1]);
        let dl = diversity_loss(&target, &observed).unwrap();
        assert_eq!(dl.zero_target_classes, vec!["c".to_string()]);
        assert_eq!(dl.per_class_ratio.len(), 2);
        assert!((dl.delta - 0.2).abs() < 1e-12);
    }

    #[test]
    fn mismatched_class_sets_error() {
        let a = fv(&["a", "b"], &[0.5, 0.5]);
        let b = fv(&["a", "c"], &[0.5, 0.5]);
        assert!(matches!(
            diversity_loss(&a, &b),
            Err(MetricsError::ClassSetMismatch)
        ));
    }

    #[test]
    fn remaining_percent_examples() {
        assert_eq!(remaining_dl_percent(0.5, 0.25).unwrap(), 50.0);
        let got = remaining_dl_percent(0.442, 0.442 * 0.53266).unwrap();
        assert!((got - 53.266).abs() < 1e-9, "{got}");
        assert_eq!(remaining_dl_percent(0.1, 0.12).unwrap(), 120.0);
        assert!(matches!(
            remaining_dl_percent(0.0, 0.1),
            Err(MetricsError::NoLossToRepair)
        ));
    }

    #[test]
    fn simplex_validation() {
        let err = FrequencyVector::new(vec!["a".into(), "b".into()], vec![0.5, 0.6]);
        assert!(matches!(err, Err(MetricsError::NotASimplex { .. })));
        let err = FrequencyVector::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]);
        assert!(matches!(err, Err(MetricsError::DuplicateClassId(_))));
        let ok = FrequencyVector::renormalized(vec!["a".into(), "b".into()], vec![2.0, 6.0]);
        assert_eq!(ok.unwrap().values(), &[0.25, 0.75]);
    }

    #[test]
    fn json_and_csv_round_trip() {
        let f = fv(&["a", "b"], &[0.25, 0.75]);
        let back = FrequencyVector::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        assert!(f.to_json().contains("\"classes\""));

        let dir = std::env::temp_dir().join(format!("restrata-metrics-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("freq.csv");
        f.write_csv(&path).unwrap();
        let back = FrequencyVector::read_csv(&path).unwrap();
        assert_eq!(back, f);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn monte_carlo_delta_is_consistent() {
        // Empirical delta at N = 1e5 approaches the analytic one.
        let ids = ["a", "b", "c", "d"];
        let target = [0.18, 0.52, 0.175, 0.125];
        let observed = [0.09, 0.70, 0.13, 0.08];
        let analytic = diversity_loss(&fv(&ids, &target), &fv(&ids, &observed))
            .unwrap()
            .delta;

        let n = 100_000usize;
        let mut rng = rng::seeded(7);
        let cum: Vec<f64> = observed
            .iter()
            .scan(0.0, |acc, f| {
                *acc += f;
                Some(*acc)
            })
            .collect();
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let u: f64 = rng.random();
            counts[cum.partition_point(|c| *c <= u).min(3)] += 1;
        }
        let empirical =
            FrequencyVector::from_counts(ids.iter().map(|s| s.to_string()).collect(), &counts)
                .unwrap();
        let mc = diversity_loss(&fv(&ids, &target), &empirical)
            .unwrap()
            .delta;
        assert!((mc - analytic).abs() <= 0.02, "{mc} vs {analytic}");
    }

    fn simplex_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3..1.0f64, n).prop_map(|raw| {
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        })
    }

    proptest! {
        #[test]
        fn delta_of_self_is_zero(values in simplex_strategy(5)) {
            let ids: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
            let f = FrequencyVector::new(ids, values).unwrap();
            let dl = diversity_loss(&f, &f).unwrap();
            prop_assert!(dl.delta.abs() < 1e-12);
        }

        #[test]
        fn delta_is_one_when_a_supported_class_vanishes(
            values in simplex_strategy(4),
            gone in 0usize..4,
        ) {
            let ids: Vec<String> = (0..4).map(|i| format!("c{i}")).collect();
            let target = FrequencyVector::new(ids.clone(), values.clone()).unwrap();
            let mut raw = values;
            raw[gone] = 0.0;
            let observed = FrequencyVector::renormalized(ids, raw).unwrap();
            let dl = diversity_loss(&target, &observed).unwrap();
            prop_assert_eq!(dl.delta, 1.0);
        }

        #[test]
        fn delta_is_permutation_invariant(
            target in simplex_strategy(6),
            observed in simplex_strategy(6),
            seed in 0u64..1000,
        ) {
            let ids: Vec<String> = (0..6).map(|i| format!("c{i}")).collect();
            let mut perm: Vec<usize> = (0..6).collect();
            // Fisher-Yates with the crate's seeded stream.
            let mut rng = rng::seeded(seed);
            for i in (1..6).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let apply = |v: &[f64]| -> Vec<f64> { perm.iter().map(|&i| v[i]).collect() };
            let apply_ids = |v: &[String]| -> Vec<String> { perm.iter().map(|&i| v[i].clone()).collect() };

            let base = diversity_loss(
                &FrequencyVector::new(ids.clone(), target.clone()).unwrap(),
                &FrequencyVector::new(ids.clone(), observed.clone()).unwrap(),
            ).unwrap();
            let permuted = diversity_loss(
                &FrequencyVector::new(apply_ids(&ids), apply(&target)).unwrap(),
                &FrequencyVector::new(apply_ids(&ids), apply(&observed)).unwrap(),
            ).unwrap();
            prop_assert_eq!(base.delta, permuted.delta);
        }

        #[test]
        fn min_ratio_never_exceeds_one(
            target in simplex_strategy(5),
            observed in simplex_strategy(5),
        ) {
            let ids: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
            let dl = diversity_loss(
                &FrequencyVector::new(ids.clone(), target).unwrap(),
                &FrequencyVector::new(ids, observed).unwrap(),
            ).unwrap();
            prop_assert!(dl.per_class_ratio.iter().cloned().fold(f64::INFINITY, f64::min) <= 1.0 + 1e-9);
            prop_assert!((0.0..=1.0).contains(&dl.delta));
        }
    }
}
