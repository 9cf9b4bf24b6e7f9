//! Reweighting over a context grid.
//!
//! A context is (baseline, optimizer, budget): the model under repair is
//! always a quality-optimized wrapper over the collapsed population (the
//! trained-model stand-in), compared against either the base population or
//! the collapsed one. For each context and each (d, arity) strata shape the
//! pipeline calibrates strata on model samples, estimates target stratum
//! probabilities from baseline samples, builds the rejection plan, and
//! measures the diversity loss before and after on fresh draws.

use rand_chacha::ChaCha8Rng;

use restrata::metrics::{diversity_loss, remaining_dl_percent, FrequencyVector};
use restrata::moo::ScalarOptimizer;
use restrata::rejection::{sample_batch, Generator, ReweightPlan};
use restrata::strata::{
    estimate_stratum_probs, fit_quantile_bins, select_features, DistributionSource, FeatureMatrix,
    SelectionStrategy,
};
use restrata::synthgen::{
    CollapsedModelSpec, OptimizedSampler, PopulationSampler, PopulationSpec, Sample,
};

use super::StreamDealer;
use crate::config::{BaselineKind, ReweightConfig, SelectionSpec};
use crate::error::{Ctx, HarnessError};
use crate::report::ReweightRow;

/// Samples drawn into strata-calibration form: the feature matrix plus the
/// observable quality scores (never the labels).
pub(crate) struct CalibrationDraws {
    pub matrix: FeatureMatrix,
    pub qualities: Vec<f64>,
}

pub(crate) fn draw_features<G>(
    generator: &mut G,
    names: &[String],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CalibrationDraws, restrata::strata::StrataError>
where
    G: Generator<Item = Sample>,
{
    let mut rows = Vec::with_capacity(n);
    let mut qualities = Vec::with_capacity(n);
    for _ in 0..n {
        let draw = generator.draw(rng);
        qualities.push(draw.item.quality);
        rows.push(draw.features);
    }
    Ok(CalibrationDraws {
        matrix: FeatureMatrix::new(names.to_vec(), rows)?,
        qualities,
    })
}

pub(crate) fn resolve_selection(spec: &SelectionSpec, qualities: &[f64]) -> SelectionStrategy {
    match spec {
        SelectionSpec::Explicit { features } => SelectionStrategy::Explicit(features.clone()),
        SelectionSpec::FirstD => SelectionStrategy::FirstD,
        SelectionSpec::MaxAbsCorrelation { .. } => SelectionStrategy::MaxAbsCorrelation {
            score: qualities.to_vec(),
        },
        SelectionSpec::Random { seed } => SelectionStrategy::Random { seed: *seed },
    }
}

fn class_frequency_vector(
    labels: &[usize],
    class_ids: &[String],
) -> Result<FrequencyVector, restrata::metrics::MetricsError> {
    let mut counts = vec![0usize; class_ids.len()];
    for &label in labels {
        counts[label] += 1;
    }
    FrequencyVector::from_counts(class_ids.to_vec(), &counts)
}

pub fn exp_reweight(config: &ReweightConfig) -> Result<Vec<ReweightRow>, HarnessError> {
    let base_spec = PopulationSpec::read_json(&config.population_spec)
        .ctx(|| format!("loading {}", config.population_spec.display()))?;
    let collapsed = CollapsedModelSpec::new(base_spec.clone(), config.collapse_gamma)
        .ctx(|| "building collapsed spec".to_string())?;

    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let mut dealer = StreamDealer::new(seed);
        for &baseline in &config.baselines {
            for &optimizer in &config.optimizers {
                for &budget in &config.budgets {
                    run_context(
                        config,
                        &base_spec,
                        &collapsed,
                        baseline,
                        optimizer,
                        budget,
                        seed,
                        &mut dealer,
                        &mut rows,
                    )?;
                }
            }
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn run_context(
    config: &ReweightConfig,
    base_spec: &PopulationSpec,
    collapsed: &CollapsedModelSpec,
    baseline: BaselineKind,
    optimizer: ScalarOptimizer,
    budget: usize,
    seed: u64,
    dealer: &mut StreamDealer,
    rows: &mut Vec<ReweightRow>,
) -> Result<(), HarnessError> {
    let context = |step: &str, d: usize, arity: usize| {
        format!(
            "reweight[{step}]: baseline={baseline} model={optimizer}-{budget} \
             d={d} M={arity} seed={seed}"
        )
    };
    let model_name = format!("{optimizer}-{budget}");

    let target_fv = match baseline {
        BaselineKind::Base => base_spec.target_frequency_vector(),
        BaselineKind::Collapsed => collapsed.model_frequency_vector(),
    }
    .ctx(|| context("targets", 0, 0))?;

    let reference_sampler = match baseline {
        BaselineKind::Base => PopulationSampler::new(base_spec),
        BaselineKind::Collapsed => PopulationSampler::collapsed(collapsed),
    }
    .ctx(|| context("reference sampler", 0, 0))?;

    let model = OptimizedSampler::new(
        PopulationSampler::collapsed(collapsed).ctx(|| context("model sampler", 0, 0))?,
        optimizer,
        budget,
    )
    .ctx(|| context("model sampler", 0, 0))?;
    let names = model.feature_names();

    // Calibration draws from the model (strata are fit on what the model
    // produces) and reference draws from the baseline (stratum targets).
    let mut rng = dealer.next();
    let mut model_gen = &model;
    let calibration = draw_features(&mut model_gen, &names, config.calibration_samples, &mut rng)
        .ctx(|| context("calibration", 0, 0))?;
    let mut rng = dealer.next();
    let mut reference_gen = &reference_sampler;
    let reference = draw_features(
        &mut reference_gen,
        &names,
        config.calibration_samples,
        &mut rng,
    )
    .ctx(|| context("reference calibration", 0, 0))?;

    // The pre-repair loss is a property of the context, not of the strata.
    let mut rng = dealer.next();
    let before_labels: Vec<usize> = (0..config.evaluation_samples)
        .map(|_| model.sample(&mut rng).reveal_class())
        .collect();
    let observed_before = class_frequency_vector(&before_labels, base_spec.class_ids.as_slice())
        .ctx(|| context("pre-repair frequencies", 0, 0))?;
    let dl_before = diversity_loss(&target_fv, &observed_before)
        .ctx(|| context("pre-repair loss", 0, 0))?
        .delta;

    for &d in &config.strata.d {
        for &arity in &config.strata.arity {
            let selected = select_features(
                &calibration.matrix,
                d,
                &resolve_selection(&config.strata.selection, &calibration.qualities),
            )
            .ctx(|| context("feature selection", d, arity))?;
            let disc = fit_quantile_bins(&calibration.matrix, &selected, arity)
                .ctx(|| context("quantile fit", d, arity))?;
            let model_assignments = disc
                .assign_matrix(&calibration.matrix)
                .ctx(|| context("model assignment", d, arity))?;
            let model_dist = estimate_stratum_probs(
                &model_assignments,
                disc.stratum_count(),
                config.strata.alpha,
                DistributionSource::Model,
            )
            .ctx(|| context("model estimate", d, arity))?;
            let reference_assignments = disc
                .assign_matrix(&reference.matrix)
                .ctx(|| context("reference assignment", d, arity))?;
            let target_dist = estimate_stratum_probs(
                &reference_assignments,
                disc.stratum_count(),
                config.strata.alpha,
                DistributionSource::Reference,
            )
            .ctx(|| context("reference estimate", d, arity))?;
            let plan =
                ReweightPlan::build(&target_dist, &model_dist).ctx(|| context("plan", d, arity))?;

            let mut rng = dealer.next();
            let mut gen = &model;
            let batch = sample_batch(
                &mut gen,
                &disc,
                &plan,
                &mut rng,
                config.evaluation_samples,
                config.max_trials,
            )
            .ctx(|| context("reweighted sampling", d, arity))?;
            let after_labels: Vec<usize> = batch
                .accepted
                .iter()
                .map(|a| a.item.reveal_class())
                .collect();
            let observed_after = class_frequency_vector(&after_labels, &base_spec.class_ids)
                .ctx(|| context("post-repair frequencies", d, arity))?;
            let dl_after = diversity_loss(&target_fv, &observed_after)
                .ctx(|| context("post-repair loss", d, arity))?
                .delta;

            let remaining_pct = if dl_before > 0.0 {
                Some(
                    remaining_dl_percent(dl_before, dl_after)
                        .ctx(|| context("remaining", d, arity))?,
                )
            } else {
                None
            };
            rows.push(ReweightRow {
                baseline: baseline.to_string(),
                model: model_name.clone(),
                d,
                arity,
                seed,
                dl_before,
                dl_after,
                remaining_pct,
            });
        }
    }
    Ok(())
}
