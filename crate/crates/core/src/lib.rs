//! Diversity-loss measurement and repair for black-box generative samplers.
//!
//! A generative sampler that under-represents rare classes (mode collapse,
//! fairness drift) can be repaired without retraining and without access to
//! the sensitive class labels. This crate provides the pieces:
//!
//! * [`metrics`]: class frequencies and the diversity-loss metric.
//! * [`strata`]: quantile discretization of auxiliary features into strata.
//! * [`rejection`]: stratified rejection reweighting around any sampler.
//! * [`analysis`]: exact algebra for when reweighting helps or hurts.
//! * [`moo`]: multi-objective candidate generation (weighted single runs,
//!   Pareto fronts).
//! * [`subset`]: representative-subset selection (hypervolume, covering
//!   criteria) from a candidate set.
//! * [`synthgen`]: synthetic populations with controllable collapse and
//!   quality bias, for experiments and calibration studies.
//!
//! All randomness flows through seeded [`rand_chacha::ChaCha8Rng`] streams
//! (see [`rng`]); identical seeds give identical results.
//!
//! The short version, on a sampler that over-produces one of two strata:
//!
//! ```
//! use rand::Rng;
//! use restrata::rejection::{sample_batch, Draw, ReweightPlan};
//! use restrata::strata::{Discretizer, DistributionSource, StratumDistribution};
//!
//! let target = StratumDistribution::new(vec![0.5, 0.5], DistributionSource::Reference, 0)?;
//! let model = StratumDistribution::new(vec![0.8, 0.2], DistributionSource::Model, 0)?;
//! let plan = ReweightPlan::build(&target, &model)?;
//!
//! let disc = Discretizer::from_thresholds(vec!["u".into()], vec![0], vec![vec![0.8]], 2)?;
//! let mut sampler = |rng: &mut rand_chacha::ChaCha8Rng| Draw {
//!     item: (),
//!     features: vec![rng.random::<f64>()],
//! };
//! let mut rng = restrata::rng::seeded(7);
//! let batch = sample_batch(&mut sampler, &disc, &plan, &mut rng, 2_000, 10_000)?;
//! let low = batch.accepted.iter().filter(|s| s.stratum == 0).count() as f64 / 2_000.0;
//! assert!((low - 0.5).abs() < 0.05);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analysis;
pub mod metrics;
pub mod moo;
pub mod rejection;
pub mod rng;
pub mod strata;
pub mod subset;
pub mod synthgen;

pub use analysis::{DetrimentReport, StratumComposition};
pub use metrics::{DiversityLoss, FrequencyVector};
pub use moo::{Candidate, CandidateSet, MultiObjectiveProblem, ScalarOptimizer};
pub use rejection::{Generator, ReweightPlan};
pub use strata::{Discretizer, FeatureMatrix, StratumDistribution};
pub use subset::{SubsetMethod, SubsetRequest, SubsetSelection};
pub use synthgen::{CollapsedModelSpec, PopulationSampler, PopulationSpec};
