//! Stratified rejection reweighting.
//!
//! Given target stratum probabilities `p` and model stratum probabilities
//! `p'`, any sampler can be wrapped in a rejection loop whose accepted output
//! hits stratum `i` with probability `p_i`: draw, find the stratum, keep the
//! draw with probability `(p_i / p'_i) / max_j (p_j / p'_j)` and otherwise
//! draw again. Storing the acceptance probability (rather than its
//! complement) avoids recomputing the maximum on every draw; the algebra is
//! identical.
//!
//! The expected acceptance probability is `1 / max_ratio`, so the number of
//! draws per accepted sample is geometric with mean `max_ratio`.
//!
//! Plans and discretizers are immutable and freely shareable. Each sampling
//! loop owns its generator and random stream; parallel batches must take
//! independent substreams (see [`crate::rng`]), never a shared one.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strata::{Discretizer, DistributionSource, StrataError, StratumDistribution};

/// Default bound on draws per accepted sample; an unbounded loop has no
/// place in a library.
pub const DEFAULT_MAX_TRIALS: usize = 10_000;

#[derive(Debug, Error)]
pub enum RejectionError {
    #[error("target has {target} strata but model has {model}")]
    LengthMismatch { target: usize, model: usize },
    #[error(
        "model stratum {index} has probability 0; stratified rejection divides by the \
         model probability, so every stratum must have positive model probability \
         (estimate with smoothing)"
    )]
    ZeroModelProbability { index: usize },
    #[error("plan covers {plan} strata but the discretizer produces {discretizer}")]
    PlanMismatch { plan: usize, discretizer: usize },
    #[error("max_trials must be at least 1")]
    ZeroMaxTrials,
    #[error(
        "no acceptance within {trials} draws; the target/model stratum probabilities \
         may be badly mismatched or miscalibrated"
    )]
    MaxTrialsExhausted { trials: usize },
    #[error(transparent)]
    Strata(#[from] StrataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Per-stratum acceptance probabilities for the rejection loop.
///
/// `accept[i] = (p_i / p'_i) / max_ratio` with `max_ratio = max_j p_j / p'_j`.
/// Strata with target probability 0 are excluded outright (`accept = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanJson", into = "PlanJson")]
pub struct ReweightPlan {
    target: StratumDistribution,
    model: StratumDistribution,
    accept: Vec<f64>,
    max_ratio: f64,
}

/// Wire form `{target: [...], model: [...], accept: [...], max_ratio: r}`.
#[derive(Clone, Serialize, Deserialize)]
struct PlanJson {
    target: Vec<f64>,
    model: Vec<f64>,
    accept: Vec<f64>,
    max_ratio: f64,
}

impl From<ReweightPlan> for PlanJson {
    fn from(plan: ReweightPlan) -> Self {
        Self {
            target: plan.target.probs().to_vec(),
            model: plan.model.probs().to_vec(),
            accept: plan.accept,
            max_ratio: plan.max_ratio,
        }
    }
}

impl TryFrom<PlanJson> for ReweightPlan {
    type Error = RejectionError;

    fn try_from(json: PlanJson) -> Result<Self, RejectionError> {
        let target = StratumDistribution::new(json.target, DistributionSource::Reference, 0)?;
        let model = StratumDistribution::new(json.model, DistributionSource::Model, 0)?;
        ReweightPlan::build(&target, &model)
    }
}

impl ReweightPlan {
    /// Builds the plan from target (`p`) and model (`p'`) stratum
    /// probabilities. Every model probability must be positive.
    pub fn build(
        target: &StratumDistribution,
        model: &StratumDistribution,
    ) -> Result<Self, RejectionError> {
        if target.len() != model.len() {
            return Err(RejectionError::LengthMismatch {
                target: target.len(),
                model: model.len(),
            });
        }
        if let Some(index) = model.probs().iter().position(|&p| p <= 0.0) {
            return Err(RejectionError::ZeroModelProbability { index });
        }
        let ratios: Vec<f64> = target
            .probs()
            .iter()
            .zip(model.probs())
            .map(|(&p, &q)| p / q)
            .collect();
        let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        debug_assert!(max_ratio > 0.0);
        let accept = ratios.iter().map(|r| r / max_ratio).collect();
        Ok(Self {
            target: target.clone(),
            model: model.clone(),
            accept,
            max_ratio,
        })
    }

    pub fn target(&self) -> &StratumDistribution {
        &self.target
    }

    pub fn model(&self) -> &StratumDistribution {
        &self.model
    }

    /// Acceptance probability per stratum; the largest ratio accepts with
    /// probability exactly 1.
    pub fn accept_probabilities(&self) -> &[f64] {
        &self.accept
    }

    pub fn stratum_count(&self) -> usize {
        self.accept.len()
    }

    pub fn max_ratio(&self) -> f64 {
        self.max_ratio
    }

    /// Probability that a single model draw is accepted: `1 / max_ratio`.
    pub fn expected_acceptance(&self) -> f64 {
        1.0 / self.max_ratio
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, RejectionError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, RejectionError> {
        let mut buf = String::new();
        File::open(path)?.read_to_string(&mut buf)?;
        Self::from_json(&buf)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), RejectionError> {
        Ok(File::create(path)?.write_all(self.to_json().as_bytes())?)
    }
}

/// One draw from a generator: an opaque item plus the auxiliary feature row
/// the strata are computed from.
#[derive(Debug, Clone)]
pub struct Draw<T> {
    pub item: T,
    pub features: Vec<f64>,
}

/// A black-box sample source.
///
/// Draws must be independent given the seeded stream. The rejection loop
/// reads only the feature row; whatever hidden evaluation data the item
/// carries (class labels, say) stays untouched.
pub trait Generator {
    type Item;

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Draw<Self::Item>;
}

impl<T, F> Generator for F
where
    F: FnMut(&mut ChaCha8Rng) -> Draw<T>,
{
    type Item = T;

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Draw<T> {
        self(rng)
    }
}

/// An accepted sample together with its stratum and the number of draws it
/// took.
#[derive(Debug, Clone)]
pub struct Accepted<T> {
    pub item: T,
    pub features: Vec<f64>,
    pub stratum: usize,
    pub trials: usize,
}

/// A batch of accepted samples and the total draws spent producing it.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub accepted: Vec<Accepted<T>>,
    pub total_trials: usize,
}

/// Draws from `generator` until one sample survives the stratified rejection
/// test, or `max_trials` draws have been spent.
pub fn sample_one<G: Generator>(
    generator: &mut G,
    discretizer: &Discretizer,
    plan: &ReweightPlan,
    rng: &mut ChaCha8Rng,
    max_trials: usize,
) -> Result<Accepted<G::Item>, RejectionError> {
    if max_trials == 0 {
        return Err(RejectionError::ZeroMaxTrials);
    }
    if plan.stratum_count() != discretizer.stratum_count() {
        return Err(RejectionError::PlanMismatch {
            plan: plan.stratum_count(),
            discretizer: discretizer.stratum_count(),
        });
    }
    for trial in 1..=max_trials {
        let draw = generator.draw(rng);
        let stratum = discretizer.assign(&draw.features)?;
        if rng.random::<f64>() < plan.accept_probabilities()[stratum] {
            return Ok(Accepted {
                item: draw.item,
                features: draw.features,
                stratum,
                trials: trial,
            });
        }
    }
    Err(RejectionError::MaxTrialsExhausted { trials: max_trials })
}

/// `n` accepted samples; deterministic given the stream.
pub fn sample_batch<G: Generator>(
    generator: &mut G,
    discretizer: &Discretizer,
    plan: &ReweightPlan,
    rng: &mut ChaCha8Rng,
    n: usize,
    max_trials: usize,
) -> Result<Batch<G::Item>, RejectionError> {
    let mut accepted = Vec::with_capacity(n);
    let mut total_trials = 0;
    for _ in 0..n {
        let sample = sample_one(generator, discretizer, plan, rng, max_trials)?;
        total_trials += sample.trials;
        accepted.push(sample);
    }
    Ok(Batch {
        accepted,
        total_trials,
    })
}
