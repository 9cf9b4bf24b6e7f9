//! Multi-objective candidate generation.
//!
//! Candidates carry a domain point `x` and a loss vector `F(x)`
//! (minimization everywhere; negate objectives that should be maximized).
//! Generation is deliberately simple: `k` independent scalar runs, each
//! minimizing `w·F(x)` for weights `w` drawn uniformly on the simplex, with
//! budgeted random search or a (1+1)-style optimizer behind each run. The
//! interesting questions live in how candidates are *selected*, not in
//! optimizer sophistication.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum MooError {
    #[error("loss vectors have lengths {0} and {1}")]
    LossLengthMismatch(usize, usize),
    #[error("candidate set is empty")]
    EmptySet,
    #[error("candidate {index} has {got} losses, expected {expected}")]
    LossDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("candidate {index} has a non-finite loss")]
    NonFiniteLoss { index: usize },
    #[error("candidate {index} has a non-finite domain coordinate")]
    NonFiniteDomain { index: usize },
    #[error("a problem needs at least 2 objectives, got {0}")]
    TooFewObjectives(usize),
    #[error("dimension {dim}: lower bound {low} exceeds upper bound {high}")]
    InvalidBounds { dim: usize, low: f64, high: f64 },
    #[error("point has {got} coordinates, expected {expected}")]
    PointDimension { got: usize, expected: usize },
    #[error("objective {index} returned a non-finite value")]
    NonFiniteObjective { index: usize },
    #[error("weights must be a simplex vector of length {expected}")]
    InvalidWeights { expected: usize },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("k must be at least 1")]
    ZeroRuns,
    #[error("run {run_id} failed: {source}")]
    RunFailed {
        run_id: usize,
        source: Box<MooError>,
    },
    #[error("csv record {record}: {message}")]
    MalformedCsv { record: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A domain point with its loss vector (minimization convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub x: Vec<f64>,
    pub losses: Vec<f64>,
    pub run_id: usize,
}

/// A homogeneous collection of candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidateSet")]
pub struct CandidateSet {
    candidates: Vec<Candidate>,
    objective_count: usize,
}

#[derive(Deserialize)]
struct RawCandidateSet {
    candidates: Vec<Candidate>,
    objective_count: usize,
}

impl TryFrom<RawCandidateSet> for CandidateSet {
    type Error = MooError;

    fn try_from(raw: RawCandidateSet) -> Result<Self, MooError> {
        CandidateSet::new(raw.candidates, raw.objective_count)
    }
}

impl CandidateSet {
    pub fn new(candidates: Vec<Candidate>, objective_count: usize) -> Result<Self, MooError> {
        for (index, c) in candidates.iter().enumerate() {
            if c.losses.len() != objective_count {
                return Err(MooError::LossDimension {
                    index,
                    got: c.losses.len(),
                    expected: objective_count,
                });
            }
            if c.losses.iter().any(|v| !v.is_finite()) {
                return Err(MooError::NonFiniteLoss { index });
            }
            if c.x.iter().any(|v| !v.is_finite()) {
                return Err(MooError::NonFiniteDomain { index });
            }
        }
        Ok(Self {
            candidates,
            objective_count,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn objective_count(&self) -> usize {
        self.objective_count
    }

    /// CSV with columns `run_id, x1..xD, f1..fN`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), MooError> {
        let dim = self.candidates.first().map_or(0, |c| c.x.len());
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["run_id".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend((1..=self.objective_count).map(|i| format!("f{i}")));
        w.write_record(&header)?;
        for c in &self.candidates {
            let mut record = vec![format!("{}", c.run_id)];
            record.extend(c.x.iter().map(|v| format!("{v}")));
            record.extend(c.losses.iter().map(|v| format!("{v}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, MooError> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let dim = headers.iter().filter(|h| h.starts_with('x')).count();
        let objective_count = headers.iter().filter(|h| h.starts_with('f')).count();
        let mut candidates = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let parse = |field: &str| -> Result<f64, MooError> {
                field.parse().map_err(|e| MooError::MalformedCsv {
                    record: i + 1,
                    message: format!("bad number: {e}"),
                })
            };
            if record.len() != 1 + dim + objective_count {
                return Err(MooError::MalformedCsv {
                    record: i + 1,
                    message: format!("expected {} fields", 1 + dim + objective_count),
                });
            }
            let run_id = record[0].parse().map_err(|e| MooError::MalformedCsv {
                record: i + 1,
                message: format!("bad run_id: {e}"),
            })?;
            let x = record
                .iter()
                .skip(1)
                .take(dim)
                .map(parse)
                .collect::<Result<_, _>>()?;
            let losses = record
                .iter()
                .skip(1 + dim)
                .map(parse)
                .collect::<Result<_, _>>()?;
            candidates.push(Candidate { x, losses, run_id });
        }
        Self::new(candidates, objective_count)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("candidate set serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, MooError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, MooError> {
        let mut buf = String::new();
        File::open(path)?.read_to_string(&mut buf)?;
        Self::from_json(&buf)
    }
}

/// Strict Pareto dominance under minimization: `a` is nowhere worse and
/// somewhere strictly better than `b`.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, MooError> {
    if a.len() != b.len() {
        return Err(MooError::LossLengthMismatch(a.len(), b.len()));
    }
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly_better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly_better = true;
        }
    }
    strictly_better
}

/// The non-dominated candidates, in their original order. Candidates with
/// identical loss vectors are all retained; dropping them would bias subset
/// selectors downstream.
pub fn pareto_front(set: &CandidateSet) -> Result<CandidateSet, MooError> {
    if set.is_empty() {
        return Err(MooError::EmptySet);
    }
    let kept: Vec<Candidate> = set
        .candidates
        .iter()
        .filter(|c| {
            !set.candidates
                .iter()
                .any(|other| dominates_unchecked(&other.losses, &c.losses))
        })
        .cloned()
        .collect();
    CandidateSet::new(kept, set.objective_count)
}

/// Objective evaluator: a deterministic function of the domain point.
pub type Objective = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Sampler over the domain used to seed and (for prior-based optimizers)
/// drive the search.
pub type PriorSampler = Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

/// `N >= 2` objectives over a box-bounded domain with a prior sampler
/// (uniform in the box unless overridden).
pub struct MultiObjectiveProblem {
    objectives: Vec<Objective>,
    bounds: Vec<(f64, f64)>,
    prior: PriorSampler,
}

impl fmt::Debug for MultiObjectiveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiObjectiveProblem")
            .field("objectives", &self.objectives.len())
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl MultiObjectiveProblem {
    pub fn new(objectives: Vec<Objective>, bounds: Vec<(f64, f64)>) -> Result<Self, MooError> {
        if objectives.len() < 2 {
            return Err(MooError::TooFewObjectives(objectives.len()));
        }
        for (dim, &(low, high)) in bounds.iter().enumerate() {
            if !low.is_finite() || !high.is_finite() || low > high {
                return Err(MooError::InvalidBounds { dim, low, high });
            }
        }
        let uniform_bounds = bounds.clone();
        Ok(Self {
            objectives,
            bounds,
            prior: Box::new(move |rng| {
                uniform_bounds
                    .iter()
                    .map(|&(low, high)| rng.random_range(low..=high))
                    .collect()
            }),
        })
    }

    pub fn with_prior(mut self, prior: PriorSampler) -> Self {
        self.prior = prior;
        self
    }

    pub fn objective_count(&self) -> usize {
        self.objectives.len()
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (self.prior)(rng)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, MooError> {
        if x.len() != self.bounds.len() {
            return Err(MooError::PointDimension {
                got: x.len(),
                expected: self.bounds.len(),
            });
        }
        self.objectives
            .iter()
            .enumerate()
            .map(|(index, f)| {
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(MooError::NonFiniteObjective { index })
                }
            })
            .collect()
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, &(low, high)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(low, high);
        }
    }
}

/// The built-in scalar optimizers.
///
/// Random search draws from the prior at every step; the discrete (1+1)
/// scheme redraws single coordinates from the prior's marginals; the
/// gaussian (1+1)-ES takes one prior draw and then ignores the prior,
/// adapting its step size by the one-fifth success rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarOptimizer {
    RandomSearch,
    DiscreteOnePlusOne,
    GaussianOnePlusOne,
}

impl fmt::Display for ScalarOptimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::RandomSearch => "random-search",
            Self::DiscreteOnePlusOne => "discrete-one-plus-one",
            Self::GaussianOnePlusOne => "gaussian-one-plus-one",
        };
        f.write_str(name)
    }
}

/// Every point a scalar run evaluated, plus the winner's index.
#[derive(Debug, Clone)]
pub struct ScalarRun {
    pub evaluations: Vec<Candidate>,
    pub winner: usize,
}

impl ScalarRun {
    pub fn winner(&self) -> &Candidate {
        &self.evaluations[self.winner]
    }
}

fn validate_weights(weights: &[f64], expected: usize) -> Result<(), MooError> {
    if weights.len() != expected
        || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(MooError::InvalidWeights { expected });
    }
    Ok(())
}

/// Runs one scalar optimization of `w·F(x)` and keeps the whole evaluation
/// trace (the front of a run lives in its trace, not just its winner).
pub fn run_scalar(
    problem: &MultiObjectiveProblem,
    weights: &[f64],
    optimizer: ScalarOptimizer,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ScalarRun, MooError> {
    validate_weights(weights, problem.objective_count())?;
    if budget == 0 {
        return Err(MooError::ZeroBudget);
    }
    let scalar = |losses: &[f64]| -> f64 { weights.iter().zip(losses).map(|(w, l)| w * l).sum() };
    let mut evaluations: Vec<Candidate> = Vec::with_capacity(budget);
    let mut record = |x: Vec<f64>, problem: &MultiObjectiveProblem| -> Result<f64, MooError> {
        let losses = problem.evaluate(&x)?;
        let value = scalar(&losses);
        evaluations.push(Candidate {
            x,
            losses,
            run_id: 0,
        });
        Ok(value)
    };

    match optimizer {
        ScalarOptimizer::RandomSearch => {
            for _ in 0..budget {
                let x = problem.sample_prior(rng);
                record(x, problem)?;
            }
        }
        ScalarOptimizer::DiscreteOnePlusOne => {
            let mut current = problem.sample_prior(rng);
            let mut current_value = record(current.clone(), problem)?;
            let dim = current.len().max(1);
            for _ in 1..budget {
                let fresh = problem.sample_prior(rng);
                let mut next = current.clone();
                let mut mutated = false;
                for j in 0..next.len() {
                    if rng.random::<f64>() < 1.0 / dim as f64 {
                        next[j] = fresh[j];
                        mutated = true;
                    }
                }
                if !mutated && !next.is_empty() {
                    let j = rng.random_range(0..next.len());
                    next[j] = fresh[j];
                }
                let value = record(next.clone(), problem)?;
                if value <= current_value {
                    current = next;
                    current_value = value;
                }
            }
        }
        ScalarOptimizer::GaussianOnePlusOne => {
            let mut current = problem.sample_prior(rng);
            let mut current_value = record(current.clone(), problem)?;
            let widths: Vec<f64> = problem
                .bounds
                .iter()
                .map(|&(low, high)| (high - low).max(f64::MIN_POSITIVE))
                .collect();
            let mut sigma = 0.3f64;
            let normal = rand_distr::StandardNormal;
            for _ in 1..budget {
                let mut next = current.clone();
                for (v, width) in next.iter_mut().zip(&widths) {
                    let step: f64 = rand_distr::Distribution::sample(&normal, rng);
                    *v += sigma * width * step;
                }
                problem.clamp(&mut next);
                let value = record(next.clone(), problem)?;
                if value < current_value {
                    current = next;
                    current_value = value;
                    sigma *= (0.25f64).exp();
                } else {
                    sigma *= (-0.0625f64).exp();
                }
            }
        }
    }

    let winner = evaluations
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| scalar(&a.losses).partial_cmp(&scalar(&b.losses)).unwrap())
        .map(|(i, _)| i)
        .expect("at least one evaluation");
    Ok(ScalarRun {
        evaluations,
        winner,
    })
}

/// Best-of-budget minimizer of `w·F(x)`.
pub fn optimize_scalar(
    problem: &MultiObjectiveProblem,
    weights: &[f64],
    optimizer: ScalarOptimizer,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Candidate, MooError> {
    Ok(run_scalar(problem, weights, optimizer, budget, rng)?
        .winner()
        .clone())
}

/// Uniform sample from the probability simplex (normalized exponentials).
pub fn sample_simplex_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Multiple single runs: `k` independent scalar optimizations, each with its
/// own random simplex weights and substream (`seed` + run id), returning the
/// `k` run winners tagged by run.
pub fn msr_generate(
    problem: &MultiObjectiveProblem,
    k: usize,
    optimizer: ScalarOptimizer,
    budget: usize,
    seed: u64,
) -> Result<CandidateSet, MooError> {
    Ok(msr_generate_with_trace(problem, k, optimizer, budget, seed)?.0)
}

/// As [`msr_generate`], additionally returning every evaluated point across
/// the `k` runs (winners first element, trace second).
pub fn msr_generate_with_trace(
    problem: &MultiObjectiveProblem,
    k: usize,
    optimizer: ScalarOptimizer,
    budget: usize,
    seed: u64,
) -> Result<(CandidateSet, CandidateSet), MooError> {
    if k == 0 {
        return Err(MooError::ZeroRuns);
    }
    let mut winners = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k * budget);
    for run_id in 0..k {
        let mut run_rng = rng::substream(seed, run_id as u64);
        let weights = sample_simplex_weights(&mut run_rng, problem.objective_count());
        let run =
            run_scalar(problem, &weights, optimizer, budget, &mut run_rng).map_err(|source| {
                MooError::RunFailed {
                    run_id,
                    source: Box::new(source),
                }
            })?;
        let mut winner = run.winner().clone();
        winner.run_id = run_id;
        winners.push(winner);
        trace.extend(run.evaluations.into_iter().map(|mut c| {
            c.run_id = run_id;
            c
        }));
    }
    let n = problem.objective_count();
    Ok((CandidateSet::new(winners, n)?, CandidateSet::new(trace, n)?))
}
