//! Diversity loss versus quality-optimization budget, with repair.
//!
//! The model is a quality-optimized wrapper over the collapsed population;
//! the target is always the base population. Each budget gets its own
//! before/after measurement through the same strata shape, so the report
//! shows how much of the budget-induced loss the repair cancels.

use restrata::metrics::{diversity_loss, remaining_dl_percent, FrequencyVector};
use restrata::rejection::{sample_batch, ReweightPlan};
use restrata::strata::{
    estimate_stratum_probs, fit_quantile_bins, select_features, DistributionSource,
};
use restrata::synthgen::{CollapsedModelSpec, OptimizedSampler, PopulationSampler, PopulationSpec};

use super::reweight::{draw_features, resolve_selection};
use super::StreamDealer;
use crate::config::QualityBiasConfig;
use crate::error::{Ctx, HarnessError};
use crate::report::ReweightRow;

pub fn exp_quality_bias(config: &QualityBiasConfig) -> Result<Vec<ReweightRow>, HarnessError> {
    let base_spec = PopulationSpec::read_json(&config.population_spec)
        .ctx(|| format!("loading {}", config.population_spec.display()))?;
    let collapsed = CollapsedModelSpec::new(base_spec.clone(), config.collapse_gamma)
        .ctx(|| "building collapsed spec".to_string())?;
    let target_fv = base_spec
        .target_frequency_vector()
        .ctx(|| "target frequencies".to_string())?;

    let d = config.strata.d;
    let arity = config.strata.arity;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let mut dealer = StreamDealer::new(seed);
        for &budget in &config.budgets {
            let context = |step: &str| {
                format!(
                    "quality_bias[{step}]: model={}-{budget} d={d} M={arity} seed={seed}",
                    config.algorithm
                )
            };
            let model = OptimizedSampler::new(
                PopulationSampler::collapsed(&collapsed).ctx(|| context("model"))?,
                config.algorithm,
                budget,
            )
            .ctx(|| context("model"))?;
            let reference_sampler =
                PopulationSampler::new(&base_spec).ctx(|| context("reference"))?;
            let names = model.feature_names();

            let mut rng = dealer.next();
            let mut model_gen = &model;
            let calibration =
                draw_features(&mut model_gen, &names, config.calibration_samples, &mut rng)
                    .ctx(|| context("calibration"))?;
            let mut rng = dealer.next();
            let mut reference_gen = &reference_sampler;
            let reference = draw_features(
                &mut reference_gen,
                &names,
                config.calibration_samples,
                &mut rng,
            )
            .ctx(|| context("reference calibration"))?;

            let selected = select_features(
                &calibration.matrix,
                d,
                &resolve_selection(&config.strata.selection, &calibration.qualities),
            )
            .ctx(|| context("feature selection"))?;
            let disc = fit_quantile_bins(&calibration.matrix, &selected, arity)
                .ctx(|| context("quantile fit"))?;
            let model_dist = estimate_stratum_probs(
                &disc
                    .assign_matrix(&calibration.matrix)
                    .ctx(|| context("model assignment"))?,
                disc.stratum_count(),
                config.strata.alpha,
                DistributionSource::Model,
            )
            .ctx(|| context("model estimate"))?;
            let target_dist = estimate_stratum_probs(
                &disc
                    .assign_matrix(&reference.matrix)
                    .ctx(|| context("reference assignment"))?,
                disc.stratum_count(),
                config.strata.alpha,
                DistributionSource::Reference,
            )
            .ctx(|| context("reference estimate"))?;
            let plan = ReweightPlan::build(&target_dist, &model_dist).ctx(|| context("plan"))?;

            let mut rng = dealer.next();
            let mut counts_before = vec![0usize; base_spec.class_ids.len()];
            for _ in 0..config.evaluation_samples {
                counts_before[model.sample(&mut rng).reveal_class()] += 1;
            }
            let dl_before = diversity_loss(
                &target_fv,
                &FrequencyVector::from_counts(base_spec.class_ids.clone(), &counts_before)
                    .ctx(|| context("pre-repair frequencies"))?,
            )
            .ctx(|| context("pre-repair loss"))?
            .delta;

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
            .ctx(|| context("reweighted sampling"))?;
            let mut counts_after = vec![0usize; base_spec.class_ids.len()];
            for accepted in &batch.accepted {
                counts_after[accepted.item.reveal_class()] += 1;
            }
            let dl_after = diversity_loss(
                &target_fv,
                &FrequencyVector::from_counts(base_spec.class_ids.clone(), &counts_after)
                    .ctx(|| context("post-repair frequencies"))?,
            )
            .ctx(|| context("post-repair loss"))?
            .delta;

            let remaining_pct = if dl_before > 0.0 {
                Some(remaining_dl_percent(dl_before, dl_after).ctx(|| context("remaining"))?)
            } else {
                None
            };
            rows.push(ReweightRow {
                baseline: "base".to_string(),
                model: format!("{}-{budget}", config.algorithm),
                d,
                arity,
                seed,
                dl_before,
                dl_after,
                remaining_pct,
            });
        }
    }
    Ok(rows)
}
