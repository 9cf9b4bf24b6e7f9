//! Synthetic populations with controllable diversity loss.
//!
//! A [`PopulationSpec`] describes classes with target frequencies, Gaussian
//! auxiliary features whose informativeness about the class is set per
//! feature by `rho` (0 = independent of the class, 1 = fully class-determined
//! means), and a quality score whose per-class mean rises with class
//! frequency. A [`CollapsedModelSpec`] degrades it: model class probabilities
//! are proportional to `f^(1+gamma)`, so rare classes shrink and `gamma = 0`
//! leaves the population untouched.
//!
//! Samplers draw through an explicit latent vector (class coordinate,
//! feature noises, quality noise), which is what lets [`OptimizedSampler`]
//! mimic quality-chasing wrappers around a fixed generator: best-of-budget
//! keeps the luckiest of independent draws, the discrete (1+1) scheme
//! redraws single latent coordinates from their priors, and the gaussian
//! (1+1)-ES random-walks the latent space, ignoring the prior after
//! initialization. Stronger quality pressure shifts mass toward the
//! highest-quality (biggest) class, which is exactly the degradation the
//! rejection machinery is meant to repair.
//!
//! Class labels ride along behind an access-counting gate so tests can prove
//! the unsupervised contract: repairs never read them.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{FrequencyVector, MetricsError};
use crate::moo::ScalarOptimizer;
use crate::rejection::{Draw, Generator};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("spec needs at least one feature")]
    NoFeatures,
    #[error("class {class} has {got} feature means, expected {expected}")]
    MeanLength {
        class: usize,
        got: usize,
        expected: usize,
    },
    #[error("{got} mean vectors for {classes} classes")]
    ClassCountMismatch { got: usize, classes: usize },
    #[error("feature {feature}: rho {value} outside [0, 1]")]
    RhoRange { feature: usize, value: f64 },
    #[error("feature {feature}: spread {value} must be positive and finite")]
    SpreadRange { feature: usize, value: f64 },
    #[error("{field} must be finite")]
    NonFinite { field: &'static str },
    #[error("collapse gamma must be finite and >= 0, got {0}")]
    GammaRange(f64),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Quality score model: class `c` has mean `base + frequency_gain * f_c`
/// plus Gaussian noise. A positive gain encodes the usual situation that
/// the most frequent class scores best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    pub base: f64,
    pub frequency_gain: f64,
    pub noise: f64,
}

/// Ground-truth synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub class_ids: Vec<String>,
    /// Target class frequencies (a simplex vector).
    pub target_frequencies: Vec<f64>,
    /// Per class, the feature mean vector (length = feature count).
    pub class_feature_means: Vec<Vec<f64>>,
    /// Shared per-feature standard deviation.
    pub feature_spread: Vec<f64>,
    /// Per-feature class correlation in [0, 1].
    pub feature_rho: Vec<f64>,
    pub quality: QualityModel,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        // Simplex and id uniqueness checks ride on FrequencyVector.
        FrequencyVector::new(self.class_ids.clone(), self.target_frequencies.clone())?;
        let feature_count = self.feature_spread.len();
        if feature_count == 0 {
            return Err(SynthError::NoFeatures);
        }
        if self.class_feature_means.len() != self.class_ids.len() {
            return Err(SynthError::ClassCountMismatch {
                got: self.class_feature_means.len(),
                classes: self.class_ids.len(),
            });
        }
        for (class, means) in self.class_feature_means.iter().enumerate() {
            if means.len() != feature_count {
                return Err(SynthError::MeanLength {
                    class,
                    got: means.len(),
                    expected: feature_count,
                });
            }
            if means.iter().any(|m| !m.is_finite()) {
                return Err(SynthError::NonFinite {
                    field: "class_feature_means",
                });
            }
        }
        if self.feature_rho.len() != feature_count {
            return Err(SynthError::MeanLength {
                class: 0,
                got: self.feature_rho.len(),
                expected: feature_count,
            });
        }
        for (feature, &rho) in self.feature_rho.iter().enumerate() {
            if !rho.is_finite() || !(0.0..=1.0).contains(&rho) {
                return Err(SynthError::RhoRange {
                    feature,
                    value: rho,
                });
            }
        }
        for (feature, &spread) in self.feature_spread.iter().enumerate() {
            if !spread.is_finite() || spread <= 0.0 {
                return Err(SynthError::SpreadRange {
                    feature,
                    value: spread,
                });
            }
        }
        if !self.quality.base.is_finite()
            || !self.quality.frequency_gain.is_finite()
            || !self.quality.noise.is_finite()
            || self.quality.noise < 0.0
        {
            return Err(SynthError::NonFinite { field: "quality" });
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.class_ids.len()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_spread.len()
    }

    pub fn target_frequency_vector(&self) -> Result<FrequencyVector, SynthError> {
        Ok(FrequencyVector::new(
            self.class_ids.clone(),
            self.target_frequencies.clone(),
        )?)
    }

    pub fn class_quality_mean(&self, class: usize) -> f64 {
        self.quality.base + self.quality.frequency_gain * self.target_frequencies[class]
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let mut buf = String::new();
        File::open(path)?.read_to_string(&mut buf)?;
        let spec: Self = serde_json::from_str(&buf)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), SynthError> {
        let json = serde_json::to_string_pretty(self)?;
        File::create(path)?.write_all(json.as_bytes())?;
        Ok(())
    }
}

/// A population whose class probabilities have collapsed toward the mode:
/// model frequencies are proportional to `f^(1+gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapsedModelSpec {
    pub base: PopulationSpec,
    pub gamma: f64,
}

impl CollapsedModelSpec {
    pub fn new(base: PopulationSpec, gamma: f64) -> Result<Self, SynthError> {
        base.validate()?;
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(SynthError::GammaRange(gamma));
        }
        Ok(Self { base, gamma })
    }

    /// The collapsed class frequencies, analytically. `gamma = 0` returns
    /// the targets unchanged.
    pub fn model_frequencies(&self) -> Vec<f64> {
        if self.gamma == 0.0 {
            return self.base.target_frequencies.clone();
        }
        let powered: Vec<f64> = self
            .base
            .target_frequencies
            .iter()
            .map(|f| f.powf(1.0 + self.gamma))
            .collect();
        let sum: f64 = powered.iter().sum();
        powered.into_iter().map(|v| v / sum).collect()
    }

    pub fn model_frequency_vector(&self) -> Result<FrequencyVector, SynthError> {
        Ok(FrequencyVector::new(
            self.base.class_ids.clone(),
            self.model_frequencies(),
        )?)
    }
}

/// Class label attached to a sample, readable only through an
/// access-counting gate shared with the originating sampler.
#[derive(Debug)]
pub struct HiddenLabel {
    class: usize,
    reads: Arc<AtomicUsize>,
}

impl HiddenLabel {
    /// Reveals the class index for evaluation, counting the access.
    pub fn reveal(&self) -> usize {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.class
    }
}

/// One synthetic sample: auxiliary features, a quality score, and the
/// hidden class label.
#[derive(Debug)]
pub struct Sample {
    pub features: Vec<f64>,
    pub quality: f64,
    label: HiddenLabel,
}

impl Sample {
    /// Evaluation-only access to the class index; every call is counted on
    /// the sampler that produced the sample.
    pub fn reveal_class(&self) -> usize {
        self.label.reveal()
    }
}

/// Latent coordinates of one draw. The realized sample is a deterministic
/// function of these, which is what the optimizing wrappers exploit.
#[derive(Debug, Clone)]
struct Latent {
    class_u: f64,
    feature_eps: Vec<f64>,
    quality_eps: f64,
}

/// Draws samples from a (possibly collapsed) population spec.
///
/// Samplers are stateful only through the stream handed to
/// [`PopulationSampler::sample`] (plus the label-reveal counter); instances
/// are cheap and independent.
pub struct PopulationSampler {
    class_ids: Vec<String>,
    cumulative: Vec<f64>,
    frequencies: Vec<f64>,
    class_feature_means: Vec<Vec<f64>>,
    feature_spread: Vec<f64>,
    feature_rho: Vec<f64>,
    quality: QualityModel,
    target_frequencies: Vec<f64>,
    expose_class_feature: bool,
    label_reads: Arc<AtomicUsize>,
}

impl PopulationSampler {
    /// Sampler at the spec's target frequencies.
    pub fn new(spec: &PopulationSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        Ok(Self::from_parts(spec, spec.target_frequencies.clone()))
    }

    /// Sampler at the collapsed model frequencies.
    pub fn collapsed(spec: &CollapsedModelSpec) -> Result<Self, SynthError> {
        spec.base.validate()?;
        if !spec.gamma.is_finite() || spec.gamma < 0.0 {
            return Err(SynthError::GammaRange(spec.gamma));
        }
        Ok(Self::from_parts(&spec.base, spec.model_frequencies()))
    }

    fn from_parts(spec: &PopulationSpec, frequencies: Vec<f64>) -> Self {
        let cumulative = frequencies
            .iter()
            .scan(0.0, |acc, f| {
                *acc += f;
                Some(*acc)
            })
            .collect();
        Self {
            class_ids: spec.class_ids.clone(),
            cumulative,
            frequencies,
            class_feature_means: spec.class_feature_means.clone(),
            feature_spread: spec.feature_spread.clone(),
            feature_rho: spec.feature_rho.clone(),
            quality: spec.quality.clone(),
            target_frequencies: spec.target_frequencies.clone(),
            expose_class_feature: false,
            label_reads: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Appends the class index as a final feature column, making the strata
    /// able to coincide with the classes. This is the supervised limit, for
    /// experiments that need it; it deliberately breaks the unsupervised
    /// contract.
    pub fn with_class_feature(mut self) -> Self {
        self.expose_class_feature = true;
        self
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    /// Class frequencies this sampler draws from (collapsed ones for a
    /// collapsed spec).
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.feature_spread.len())
            .map(|i| format!("f{i}"))
            .collect();
        if self.expose_class_feature {
            names.push("class_index".to_string());
        }
        names
    }

    /// Total number of hidden-label reveals across samples drawn from this
    /// sampler.
    pub fn label_reads(&self) -> usize {
        self.label_reads.load(Ordering::Relaxed)
    }

    fn class_of(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|c| *c <= u)
            .min(self.class_ids.len() - 1)
    }

    fn sample_latent(&self, rng: &mut ChaCha8Rng) -> Latent {
        Latent {
            class_u: rng.random(),
            feature_eps: (0..self.feature_spread.len())
                .map(|_| StandardNormal.sample(rng))
                .collect(),
            quality_eps: StandardNormal.sample(rng),
        }
    }

    /// Deterministic realization of a latent vector.
    fn realize(&self, latent: &Latent) -> Sample {
        let class = self.class_of(latent.class_u);
        let means = &self.class_feature_means[class];
        let mut features: Vec<f64> = latent
            .feature_eps
            .iter()
            .enumerate()
            .map(|(f, eps)| self.feature_rho[f] * means[f] + self.feature_spread[f] * eps)
            .collect();
        if self.expose_class_feature {
            features.push(class as f64);
        }
        let quality = self.quality.base
            + self.quality.frequency_gain * self.target_frequencies[class]
            + self.quality.noise * latent.quality_eps;
        Sample {
            features,
            quality,
            label: HiddenLabel {
                class,
                reads: Arc::clone(&self.label_reads),
            },
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Sample {
        let latent = self.sample_latent(rng);
        self.realize(&latent)
    }
}

impl Generator for &PopulationSampler {
    type Item = Sample;

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Draw<Sample> {
        let sample = self.sample(rng);
        let features = sample.features.clone();
        Draw {
            item: sample,
            features,
        }
    }
}

/// Best-of-budget quality selection over independent draws. `budget = 1` is
/// the identity wrapper.
pub fn quality_biased_draw(
    base: &PopulationSampler,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Sample, SynthError> {
    if budget == 0 {
        return Err(SynthError::ZeroBudget);
    }
    let mut best = base.sample_latent(rng);
    let mut best_quality = base.realize(&best).quality;
    for _ in 1..budget {
        let latent = base.sample_latent(rng);
        let quality = base.realize(&latent).quality;
        if quality > best_quality {
            best = latent;
            best_quality = quality;
        }
    }
    Ok(base.realize(&best))
}

/// A sampler whose every draw is the outcome of a small quality optimization in
/// latent space, mirroring quality-chasing wrappers around a fixed
/// generator.
pub struct OptimizedSampler {
    base: PopulationSampler,
    algorithm: ScalarOptimizer,
    budget: usize,
}

impl OptimizedSampler {
    pub fn new(
        base: PopulationSampler,
        algorithm: ScalarOptimizer,
        budget: usize,
    ) -> Result<Self, SynthError> {
        if budget == 0 {
            return Err(SynthError::ZeroBudget);
        }
        Ok(Self {
            base,
            algorithm,
            budget,
        })
    }

    pub fn base(&self) -> &PopulationSampler {
        &self.base
    }

    pub fn algorithm(&self) -> ScalarOptimizer {
        self.algorithm
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.base.feature_names()
    }

    pub fn label_reads(&self) -> usize {
        self.base.label_reads()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Sample {
        match self.algorithm {
            ScalarOptimizer::RandomSearch => {
                quality_biased_draw(&self.base, self.budget, rng).expect("budget validated")
            }
            ScalarOptimizer::DiscreteOnePlusOne => {
                let mut current = self.base.sample_latent(rng);
                let mut current_quality = self.base.realize(&current).quality;
                let coords = current.feature_eps.len() + 2;
                for _ in 1..self.budget {
                    let mut next = current.clone();
                    // Redraw one latent coordinate from its prior marginal.
                    match rng.random_range(0..coords) {
                        0 => next.class_u = rng.random(),
                        j if j <= next.feature_eps.len() => {
                            next.feature_eps[j - 1] = StandardNormal.sample(rng);
                        }
                        _ => next.quality_eps = StandardNormal.sample(rng),
                    }
                    let quality = self.base.realize(&next).quality;
                    if quality >= current_quality {
                        current = next;
                        current_quality = quality;
                    }
                }
                self.base.realize(&current)
            }
            ScalarOptimizer::GaussianOnePlusOne => {
                let mut current = self.base.sample_latent(rng);
                let mut current_quality = self.base.realize(&current).quality;
                let mut sigma = 0.3f64;
                for _ in 1..self.budget {
                    let mut next = current.clone();
                    let step: f64 = StandardNormal.sample(rng);
                    next.class_u = (next.class_u + sigma * step).clamp(0.0, 1.0);
                    for eps in next.feature_eps.iter_mut() {
                        let step: f64 = StandardNormal.sample(rng);
                        *eps += sigma * step;
                    }
                    let step: f64 = StandardNormal.sample(rng);
                    next.quality_eps += sigma * step;
                    let quality = self.base.realize(&next).quality;
                    if quality > current_quality {
                        current = next;
                        current_quality = quality;
                        sigma *= (0.25f64).exp();
                    } else {
                        sigma *= (-0.0625f64).exp();
                    }
                }
                self.base.realize(&current)
            }
        }
    }
}

impl Generator for &OptimizedSampler {
    type Item = Sample;

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Draw<Sample> {
        let sample = self.sample(rng);
        let features = sample.features.clone();
        Draw {
            item: sample,
            features,
        }
    }
}

/// First candidate whose hidden label matches the requested class, by index.
/// `Some` means the request succeeded.
pub fn oracle_user(candidate_labels: &[usize], desired_class: usize) -> Option<usize> {
    candidate_labels
        .iter()
        .position(|&label| label == desired_class)
}

/// Writes samples in the strata CSV layout (`id, f0..`) plus a separate
/// labels file (`id, class`); revealing the labels here is the evaluation
/// export, and is counted as such.
pub fn export_dataset(
    samples: &[Sample],
    class_ids: &[String],
    feature_names: &[String],
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(), SynthError> {
    let mut features = csv::Writer::from_path(features_path)?;
    let mut header = vec!["id".to_string()];
    header.extend(feature_names.iter().cloned());
    features.write_record(&header)?;
    let mut labels = csv::Writer::from_path(labels_path)?;
    labels.write_record(["id", "class"])?;
    for (i, sample) in samples.iter().enumerate() {
        let id = format!("s{i}");
        let mut record = vec![id.clone()];
        record.extend(sample.features.iter().map(|v| format!("{v}")));
        features.write_record(&record)?;
        labels.write_record([id, class_ids[sample.reveal_class()].clone()])?;
    }
    features.flush()?;
    labels.flush()?;
    Ok(())
}
