//! Experiment and tool configurations, loaded from JSON.
//!
//! Seeds are always explicit; nothing in the harness ever seeds from the
//! clock. Paths inside a config are resolved relative to the config file's
//! directory and must exist at load time.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use restrata::moo::ScalarOptimizer;
use restrata::strata::DistributionSource;
use restrata::subset::SubsetMethod;

use crate::error::HarnessError;
use crate::problems::ProblemId;

/// Candidate selectors in the user-assisted pipeline: the run winners as-is,
/// or one of the subset methods over the generated pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorId {
    MsrPassthrough,
    Random,
    Hv,
    Igd,
    Cov,
    Eps,
    DomainCovering,
}

impl SelectorId {
    pub fn subset_method(self) -> Option<SubsetMethod> {
        match self {
            Self::MsrPassthrough => None,
            Self::Random => Some(SubsetMethod::Random),
            Self::Hv => Some(SubsetMethod::Hv),
            Self::Igd => Some(SubsetMethod::Igd),
            Self::Cov => Some(SubsetMethod::Cov),
            Self::Eps => Some(SubsetMethod::Eps),
            Self::DomainCovering => Some(SubsetMethod::DomainCovering),
        }
    }
}

impl fmt::Display for SelectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::MsrPassthrough => "msr-passthrough",
            Self::Random => "random",
            Self::Hv => "hv",
            Self::Igd => "igd",
            Self::Cov => "cov",
            Self::Eps => "eps",
            Self::DomainCovering => "domain-covering",
        };
        f.write_str(name)
    }
}

/// Which sampler provides the target frequencies and reference strata of a
/// context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Base,
    Collapsed,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Base => "base",
            Self::Collapsed => "collapsed",
        })
    }
}

/// Feature-selection strategy named in configs. Experiments resolve
/// `max_abs_correlation` against the sample quality score; the `calibrate`
/// tool requires `score_column` to name a CSV column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SelectionSpec {
    Explicit { features: Vec<String> },
    FirstD,
    MaxAbsCorrelation { score_column: Option<String> },
    Random { seed: u64 },
}

fn default_max_trials() -> usize {
    restrata::rejection::DEFAULT_MAX_TRIALS
}

fn default_alpha() -> f64 {
    1.0
}

/// Strata parameters swept over a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrataSweep {
    pub d: Vec<usize>,
    pub arity: Vec<usize>,
    pub selection: SelectionSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Strata parameters for a single configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrataSingle {
    pub d: usize,
    pub arity: usize,
    pub selection: SelectionSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Reweighting experiment: a context grid of
/// baselines x optimizers x budgets, swept over strata shapes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReweightConfig {
    pub population_spec: PathBuf,
    pub collapse_gamma: f64,
    pub seeds: Vec<u64>,
    pub calibration_samples: usize,
    pub evaluation_samples: usize,
    pub baselines: Vec<BaselineKind>,
    pub optimizers: Vec<ScalarOptimizer>,
    pub budgets: Vec<usize>,
    pub strata: StrataSweep,
    #[serde(default = "default_max_trials")]
    pub max_trials: usize,
}

/// User-assisted generation experiment: algorithms x selectors, scored by
/// an oracle user looking for one class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserAssistedConfig {
    pub problem: ProblemId,
    pub algorithms: Vec<ScalarOptimizer>,
    pub selectors: Vec<SelectorId>,
    /// Scalar runs per request; the pool holds every evaluation.
    pub runs: usize,
    /// Candidates shown to the oracle user.
    pub k: usize,
    pub budget: usize,
    pub requests: usize,
    pub desired_class: String,
    pub seeds: Vec<u64>,
    /// Required when `hv` is among the selectors.
    pub reference_point: Option<Vec<f64>>,
}

/// Quality-bias experiment: diversity loss against the optimization budget,
/// with and without reweighting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityBiasConfig {
    pub population_spec: PathBuf,
    pub collapse_gamma: f64,
    pub budgets: Vec<usize>,
    pub algorithm: ScalarOptimizer,
    pub seeds: Vec<u64>,
    pub calibration_samples: usize,
    pub evaluation_samples: usize,
    pub strata: StrataSingle,
    #[serde(default = "default_max_trials")]
    pub max_trials: usize,
}

/// Random-instance census of the detriment conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetrimentCensusConfig {
    pub instances: usize,
    pub strata: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Reweight(ReweightConfig),
    UserAssisted(UserAssistedConfig),
    QualityBias(QualityBiasConfig),
    DetrimentCensus(DetrimentCensusConfig),
}

impl ExperimentConfig {
    pub fn id(&self) -> &'static str {
        match self {
            Self::Reweight(_) => "reweight",
            Self::UserAssisted(_) => "user_assisted",
            Self::QualityBias(_) => "quality_bias",
            Self::DetrimentCensus(_) => "detriment_census",
        }
    }

    /// Loads, resolves referenced paths against the config's directory, and
    /// validates.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        let mut config: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base)?;
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<(), HarnessError> {
        let resolve = |p: &mut PathBuf| -> Result<(), HarnessError> {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(HarnessError::config(format!(
                    "referenced file does not exist: {}",
                    p.display()
                )));
            }
            Ok(())
        };
        match self {
            Self::Reweight(c) => resolve(&mut c.population_spec),
            Self::QualityBias(c) => resolve(&mut c.population_spec),
            Self::UserAssisted(_) | Self::DetrimentCensus(_) => Ok(()),
        }
    }

    /// Replaces the seed list (the `--seed` flag).
    pub fn override_seed(&mut self, seed: u64) {
        let seeds = match self {
            Self::Reweight(c) => &mut c.seeds,
            Self::UserAssisted(c) => &mut c.seeds,
            Self::QualityBias(c) => &mut c.seeds,
            Self::DetrimentCensus(c) => &mut c.seeds,
        };
        *seeds = vec![seed];
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let nonempty = |what: &str, empty: bool| {
            if empty {
                Err(HarnessError::config(format!("{what} must not be empty")))
            } else {
                Ok(())
            }
        };
        let positive = |what: &str, v: usize| {
            if v == 0 {
                Err(HarnessError::config(format!("{what} must be at least 1")))
            } else {
                Ok(())
            }
        };
        match self {
            Self::Reweight(c) => {
                nonempty("seeds", c.seeds.is_empty())?;
                nonempty("baselines", c.baselines.is_empty())?;
                nonempty("optimizers", c.optimizers.is_empty())?;
                nonempty("budgets", c.budgets.is_empty())?;
                nonempty("strata.d", c.strata.d.is_empty())?;
                nonempty("strata.arity", c.strata.arity.is_empty())?;
                for &d in &c.strata.d {
                    positive("strata.d entries", d)?;
                }
                for &arity in &c.strata.arity {
                    if arity < 2 {
                        return Err(HarnessError::config("strata.arity entries must be >= 2"));
                    }
                }
                positive("calibration_samples", c.calibration_samples)?;
                positive("evaluation_samples", c.evaluation_samples)?;
                positive("max_trials", c.max_trials)?;
                for &b in &c.budgets {
                    positive("budget", b)?;
                }
                if !c.collapse_gamma.is_finite() || c.collapse_gamma < 0.0 {
                    return Err(HarnessError::config("collapse_gamma must be >= 0"));
                }
                if c.strata.alpha.is_nan() || c.strata.alpha < 0.0 {
                    return Err(HarnessError::config("strata.alpha must be >= 0"));
                }
                Ok(())
            }
            Self::UserAssisted(c) => {
                nonempty("seeds", c.seeds.is_empty())?;
                nonempty("algorithms", c.algorithms.is_empty())?;
                nonempty("selectors", c.selectors.is_empty())?;
                positive("runs", c.runs)?;
                positive("k", c.k)?;
                positive("budget", c.budget)?;
                positive("requests", c.requests)?;
                if c.selectors.contains(&SelectorId::Hv) && c.reference_point.is_none() {
                    return Err(HarnessError::config(
                        "the hv selector needs a reference_point",
                    ));
                }
                Ok(())
            }
            Self::QualityBias(c) => {
                nonempty("seeds", c.seeds.is_empty())?;
                nonempty("budgets", c.budgets.is_empty())?;
                positive("calibration_samples", c.calibration_samples)?;
                positive("evaluation_samples", c.evaluation_samples)?;
                positive("strata.d", c.strata.d)?;
                if c.strata.arity < 2 {
                    return Err(HarnessError::config("strata.arity must be >= 2"));
                }
                positive("max_trials", c.max_trials)?;
                for &b in &c.budgets {
                    positive("budget", b)?;
                }
                if !c.collapse_gamma.is_finite() || c.collapse_gamma < 0.0 {
                    return Err(HarnessError::config("collapse_gamma must be >= 0"));
                }
                Ok(())
            }
            Self::DetrimentCensus(c) => {
                nonempty("seeds", c.seeds.is_empty())?;
                positive("instances", c.instances)?;
                if c.strata < 2 {
                    return Err(HarnessError::config("strata must be at least 2"));
                }
                Ok(())
            }
        }
    }
}

/// `calibrate`: fit strata on a feature CSV and estimate its stratum
/// distribution. When `discretizer` points at an existing discretizer JSON,
/// fitting is skipped and that discretizer assigns the rows instead: this
/// is how a reference dataset is estimated on the model's strata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateConfig {
    pub features_csv: PathBuf,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub discretizer: Option<PathBuf>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub arity: Option<usize>,
    #[serde(default)]
    pub selection: Option<SelectionSpec>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub source: DistributionSource,
}

/// `plan`: build a reweighting plan from two stratum-distribution files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanConfig {
    pub target_probs: PathBuf,
    pub model_probs: PathBuf,
}

/// `sample`: run the rejection loop around a synthetic sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleConfig {
    pub population_spec: PathBuf,
    #[serde(default)]
    pub collapse_gamma: Option<f64>,
    #[serde(default)]
    pub algorithm: Option<ScalarOptimizer>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub expose_class_feature: bool,
    pub discretizer: PathBuf,
    pub plan: PathBuf,
    pub samples: usize,
    #[serde(default = "default_max_trials")]
    pub max_trials: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// `evaluate`: diversity loss of observed frequencies against a target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub target: PathBuf,
    pub observed: PathBuf,
}

/// `select`: subset selection over a candidate file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectConfig {
    pub candidates: PathBuf,
    pub method: SubsetMethod,
    pub m: usize,
    #[serde(default)]
    pub reference_point: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Loads any tool config, resolving its paths against the config directory.
pub fn load_tool_config<C: serde::de::DeserializeOwned>(
    path: &Path,
    paths: impl FnOnce(&mut C) -> Vec<&mut PathBuf>,
) -> Result<C, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    let mut config: C = serde_json::from_str(&text)
        .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for p in paths(&mut config) {
        if p.is_relative() {
            *p = base.join(&*p);
        }
        if !p.exists() {
            return Err(HarnessError::config(format!(
                "referenced file does not exist: {}",
                p.display()
            )));
        }
    }
    Ok(config)
}
