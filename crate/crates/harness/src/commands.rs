//! The stand-alone tool subcommands: `calibrate`, `plan`, `sample`,
//! `evaluate`, `select`. Each reads a JSON config, works on files, and
//! writes its outputs into the chosen directory.

use std::path::{Path, PathBuf};

use serde::Serialize;

use restrata::metrics::{diversity_loss, FrequencyVector};
use restrata::moo::{dominates, CandidateSet};
use restrata::rejection::{sample_batch, ReweightPlan};
use restrata::rng;
use restrata::strata::{
    estimate_stratum_probs, fit_quantile_bins, select_features, Discretizer, FeatureTable,
    SelectionStrategy, StratumDistribution,
};
use restrata::subset::{select_subset, SubsetMethod, SubsetRequest};
use restrata::synthgen::{
    export_dataset, CollapsedModelSpec, OptimizedSampler, PopulationSampler, PopulationSpec, Sample,
};

use crate::config::{
    CalibrateConfig, EvaluateConfig, PlanConfig, SampleConfig, SelectConfig, SelectionSpec,
};
use crate::error::{Ctx, HarnessError};
use crate::report::{write_text, Format};

fn ensure_out(out_dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))
}

/// Fit strata on a feature CSV, estimate its stratum distribution, and emit
/// `discretizer.json` plus the distribution (`stratum_probs.json` or
/// `.csv`).
pub fn calibrate(
    config: &CalibrateConfig,
    out_dir: &Path,
    format: Format,
) -> Result<(), HarnessError> {
    let table = FeatureTable::read_csv(&config.features_csv, config.label_column.as_deref())
        .ctx(|| format!("calibrate: reading {}", config.features_csv.display()))?;
    let disc = match &config.discretizer {
        Some(path) => {
            Discretizer::read_json(path).ctx(|| format!("calibrate: reading {}", path.display()))?
        }
        None => {
            let d = config
                .d
                .ok_or_else(|| HarnessError::config("calibrate without a discretizer needs d"))?;
            let arity = config.arity.ok_or_else(|| {
                HarnessError::config("calibrate without a discretizer needs arity")
            })?;
            let selection = config.selection.as_ref().ok_or_else(|| {
                HarnessError::config("calibrate without a discretizer needs selection")
            })?;
            let strategy = match selection {
                SelectionSpec::Explicit { features } => {
                    SelectionStrategy::Explicit(features.clone())
                }
                SelectionSpec::FirstD => SelectionStrategy::FirstD,
                SelectionSpec::MaxAbsCorrelation { score_column } => {
                    let column = score_column.as_deref().ok_or_else(|| {
                        HarnessError::config(
                            "calibrate with max_abs_correlation needs selection.score_column",
                        )
                    })?;
                    SelectionStrategy::MaxAbsCorrelation {
                        score: table
                            .matrix
                            .column(column)
                            .ctx(|| format!("calibrate: score column `{column}`"))?,
                    }
                }
                SelectionSpec::Random { seed } => SelectionStrategy::Random { seed: *seed },
            };
            let selected = select_features(&table.matrix, d, &strategy)
                .ctx(|| "calibrate: feature selection".to_string())?;
            fit_quantile_bins(&table.matrix, &selected, arity)
                .ctx(|| "calibrate: quantile fit".to_string())?
        }
    };
    let assignments = disc
        .assign_matrix(&table.matrix)
        .ctx(|| "calibrate: assignment".to_string())?;
    let distribution = estimate_stratum_probs(
        &assignments,
        disc.stratum_count(),
        config.alpha,
        config.source,
    )
    .ctx(|| "calibrate: estimation".to_string())?;

    ensure_out(out_dir)?;
    disc.write_json(out_dir.join("discretizer.json"))
        .ctx(|| "calibrate: writing discretizer".to_string())?;
    // The distribution is always emitted as JSON (it feeds `plan`); CSV is
    // an additional view.
    distribution
        .write_json(out_dir.join("stratum_probs.json"))
        .ctx(|| "calibrate: writing distribution".to_string())?;
    if format == Format::Csv {
        let mut csv = String::from("stratum,probability\n");
        for (i, p) in distribution.probs().iter().enumerate() {
            csv.push_str(&format!("{i},{p}\n"));
        }
        write_text(out_dir, "stratum_probs.csv", &csv)?;
    }
    println!(
        "calibrated {} strata over features {:?} from {} rows",
        disc.stratum_count(),
        disc.selected_features(),
        table.matrix.n_rows()
    );
    Ok(())
}

/// Build a reweighting plan from two stratum-distribution JSON files.
pub fn plan(config: &PlanConfig, out_dir: &Path) -> Result<(), HarnessError> {
    let target = StratumDistribution::read_json(&config.target_probs)
        .ctx(|| format!("plan: reading {}", config.target_probs.display()))?;
    let model = StratumDistribution::read_json(&config.model_probs)
        .ctx(|| format!("plan: reading {}", config.model_probs.display()))?;
    let plan = ReweightPlan::build(&target, &model).ctx(|| "plan: build".to_string())?;
    ensure_out(out_dir)?;
    plan.write_json(out_dir.join("plan.json"))
        .ctx(|| "plan: writing".to_string())?;
    println!(
        "plan over {} strata: max_ratio {}, expected acceptance {}",
        plan.stratum_count(),
        plan.max_ratio(),
        plan.expected_acceptance()
    );
    Ok(())
}

#[derive(Serialize)]
struct SampleStats {
    accepted: usize,
    total_trials: usize,
    mean_trials: f64,
}

/// Run the rejection loop around a synthetic sampler; emits the accepted
/// samples (features CSV + labels CSV) and trial statistics.
pub fn sample(
    config: &SampleConfig,
    cli_seed: Option<u64>,
    out_dir: &Path,
) -> Result<(), HarnessError> {
    let seed = cli_seed
        .or(config.seed)
        .ok_or_else(|| HarnessError::config("sample needs a seed (--seed or config.seed)"))?;
    let spec = PopulationSpec::read_json(&config.population_spec)
        .ctx(|| format!("sample: loading {}", config.population_spec.display()))?;
    let base = match config.collapse_gamma {
        Some(gamma) => PopulationSampler::collapsed(
            &CollapsedModelSpec::new(spec.clone(), gamma)
                .ctx(|| "sample: collapsed spec".to_string())?,
        ),
        None => PopulationSampler::new(&spec),
    }
    .ctx(|| "sample: sampler".to_string())?;
    let base = if config.expose_class_feature {
        base.with_class_feature()
    } else {
        base
    };
    // Budget 1 is the identity wrapper, so a plain sampler is the default.
    let algorithm = config
        .algorithm
        .unwrap_or(restrata::moo::ScalarOptimizer::RandomSearch);
    let budget = config.budget.unwrap_or(1);
    let sampler =
        OptimizedSampler::new(base, algorithm, budget).ctx(|| "sample: sampler".to_string())?;

    let disc = Discretizer::read_json(&config.discretizer)
        .ctx(|| format!("sample: reading {}", config.discretizer.display()))?;
    let plan = ReweightPlan::read_json(&config.plan)
        .ctx(|| format!("sample: reading {}", config.plan.display()))?;

    let mut rng = rng::seeded(seed);
    let names = sampler.feature_names();
    let mut gen = &sampler;
    let batch = sample_batch(
        &mut gen,
        &disc,
        &plan,
        &mut rng,
        config.samples,
        config.max_trials,
    )
    .ctx(|| "sample: rejection loop".to_string())?;
    let total_trials = batch.total_trials;
    let samples: Vec<Sample> = batch.accepted.into_iter().map(|a| a.item).collect();

    ensure_out(out_dir)?;
    export_dataset(
        &samples,
        &spec.class_ids,
        &names,
        out_dir.join("samples.csv"),
        out_dir.join("labels.csv"),
    )
    .ctx(|| "sample: writing outputs".to_string())?;
    let stats = SampleStats {
        accepted: samples.len(),
        total_trials,
        mean_trials: total_trials as f64 / samples.len().max(1) as f64,
    };
    write_text(
        out_dir,
        "stats.json",
        &serde_json::to_string_pretty(&stats)
            .map_err(|e| HarnessError::config(format!("stats: {e}")))?,
    )?;
    println!(
        "accepted {} samples in {} draws (mean trials {})",
        stats.accepted, stats.total_trials, stats.mean_trials
    );
    Ok(())
}

fn read_frequencies(path: &Path) -> Result<FrequencyVector, HarnessError> {
    let by_ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match by_ext {
        "csv" => FrequencyVector::read_csv(path),
        _ => FrequencyVector::read_json(path),
    }
    .ctx(|| format!("reading frequencies from {}", path.display()))
}

/// Diversity-loss report of observed frequencies against a target.
pub fn evaluate(
    config: &EvaluateConfig,
    out_dir: &Path,
    format: Format,
) -> Result<(), HarnessError> {
    let target = read_frequencies(&config.target)?;
    let observed = read_frequencies(&config.observed)?;
    let dl = diversity_loss(&target, &observed).ctx(|| "evaluate".to_string())?;
    ensure_out(out_dir)?;
    write_text(
        out_dir,
        "diversity_loss.json",
        &serde_json::to_string_pretty(&dl)
            .map_err(|e| HarnessError::config(format!("diversity loss: {e}")))?,
    )?;
    if format == Format::Csv {
        let mut csv = String::from("class,ratio\n");
        let supported: Vec<&String> = target
            .class_ids()
            .iter()
            .zip(target.values())
            .filter(|(_, &v)| v > 0.0)
            .map(|(c, _)| c)
            .collect();
        for (class, ratio) in supported.iter().zip(&dl.per_class_ratio) {
            csv.push_str(&format!("{class},{ratio}\n"));
        }
        write_text(out_dir, "per_class_ratio.csv", &csv)?;
    }
    println!("delta {} (worst class `{}`)", dl.delta, dl.worst_class);
    Ok(())
}

#[derive(Serialize)]
struct SelectReport {
    method: String,
    m: usize,
    criterion_value: Option<f64>,
    indices: Vec<usize>,
    exhaustive: bool,
}

/// Subset selection over a candidate CSV/JSON file. Front-only methods are
/// applied to the Pareto front of the file's candidates; indices in the
/// output refer to the original file rows.
pub fn select(
    config: &SelectConfig,
    cli_seed: Option<u64>,
    out_dir: &Path,
    format: Format,
) -> Result<(), HarnessError> {
    let path: &PathBuf = &config.candidates;
    let by_ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let source = match by_ext {
        "json" => CandidateSet::read_json(path),
        _ => CandidateSet::read_csv(path),
    }
    .ctx(|| format!("select: reading {}", path.display()))?;

    let (scope, mapping): (CandidateSet, Vec<usize>) = match config.method {
        SubsetMethod::DomainCovering => {
            let mapping = (0..source.len()).collect();
            (source.clone(), mapping)
        }
        _ => {
            let mapping: Vec<usize> = (0..source.len())
                .filter(|&i| {
                    !source.candidates().iter().any(|other| {
                        dominates(&other.losses, &source.candidates()[i].losses).unwrap_or(false)
                    })
                })
                .collect();
            let front = CandidateSet::new(
                mapping
                    .iter()
                    .map(|&i| source.candidates()[i].clone())
                    .collect(),
                source.objective_count(),
            )
            .ctx(|| "select: front".to_string())?;
            (front, mapping)
        }
    };

    let m = config.m.min(scope.len());
    if m == 0 {
        return Err(HarnessError::config("select: no candidates in scope"));
    }
    let mut request =
        SubsetRequest::new(&scope, m, config.method).ctx(|| "select: request".to_string())?;
    if let Some(reference) = &config.reference_point {
        request = request.with_reference(reference.clone());
    }
    let seed = cli_seed.or(config.seed).unwrap_or(0);
    let selection =
        select_subset(&request, &mut rng::seeded(seed)).ctx(|| "select: run".to_string())?;
    let original_indices: Vec<usize> = selection.indices.iter().map(|&i| mapping[i]).collect();

    ensure_out(out_dir)?;
    let report = SelectReport {
        method: selection.method.to_string(),
        m: selection.m,
        criterion_value: selection.criterion,
        indices: original_indices,
        exhaustive: selection.exhaustive,
    };
    match format {
        Format::Json => write_text(
            out_dir,
            "selection.json",
            &serde_json::to_string_pretty(&report)
                .map_err(|e| HarnessError::config(format!("selection: {e}")))?,
        )?,
        Format::Csv => {
            let indices = report
                .indices
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let criterion = report
                .criterion_value
                .map(|v| format!("{v}"))
                .unwrap_or_default();
            let csv = format!(
                "method,m,criterion_value,indices\n{},{},{},{}\n",
                report.method, report.m, criterion, indices
            );
            write_text(out_dir, "selection.csv", &csv)?;
        }
    }
    println!(
        "selected {} of {} candidates by {}",
        report.indices.len(),
        source.len(),
        report.method
    );
    Ok(())
}
