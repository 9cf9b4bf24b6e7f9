//! Random-instance census of the detriment conditions.
//!
//! Draws (target strata `p`, model strata `p'`, compositions `q`, `q'`)
//! uniformly, analyzes one class per instance, and tallies how often
//! reweighting would hurt, how often the two sign conditions co-occur, and
//! whether the sign equivalence and the loss-term identity ever fail.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use restrata::analysis::{analyze_class, StratumComposition, TIE_EPSILON};
use restrata::rng;
use restrata::strata::{DistributionSource, StratumDistribution};

use crate::config::DetrimentCensusConfig;
use crate::error::{Ctx, HarnessError};
use crate::report::CensusRow;

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

pub fn exp_detriment_census(
    config: &DetrimentCensusConfig,
) -> Result<Vec<CensusRow>, HarnessError> {
    let m = config.strata;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let mut rng = rng::substream(seed, 0);
        let mut detrimental = 0usize;
        let mut cooccur = 0usize;
        let mut equivalence_violations = 0usize;
        let mut identity_violations = 0usize;
        let mut sum_change = 0.0f64;
        let mut min_change = f64::INFINITY;
        let mut max_change = f64::NEG_INFINITY;
        for instance in 0..config.instances {
            let target = StratumDistribution::new(
                random_simplex(&mut rng, m),
                DistributionSource::Reference,
                0,
            )
            .ctx(|| format!("census instance {instance}: target"))?;
            let model =
                StratumDistribution::new(random_simplex(&mut rng, m), DistributionSource::Model, 0)
                    .ctx(|| format!("census instance {instance}: model"))?;
            let q: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let q_model: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let composition = StratumComposition::new("census", q, q_model.clone())
                .ctx(|| format!("census instance {instance}: composition"))?;
            let report = analyze_class(&target, &model, &composition)
                .ctx(|| format!("census instance {instance}: analysis"))?;

            // Sign equivalence on non-tied instances.
            let shift: f64 = q_model
                .iter()
                .zip(model.probs().iter().zip(target.probs()))
                .map(|(&qm, (&pm, &pt))| qm * (pm - pt))
                .sum();
            if shift.abs() >= TIE_EPSILON {
                if (report.prob_after < report.prob_before) != (shift > 0.0) {
                    equivalence_violations += 1;
                }
            } else if (report.prob_after - report.prob_before).abs() > TIE_EPSILON {
                equivalence_violations += 1;
            }

            // Loss-term identity to 1e-12.
            let change = report.dl_term_after - report.dl_term_before;
            if (change - shift / report.prob_target).abs() > 1e-12 {
                identity_violations += 1;
            }

            if report.detrimental {
                detrimental += 1;
            }
            if report.condition_i && report.condition_ii {
                cooccur += 1;
            }
            sum_change += change;
            min_change = min_change.min(change);
            max_change = max_change.max(change);
        }
        rows.push(CensusRow {
            seed,
            instances: config.instances,
            strata: m,
            detrimental_fraction: detrimental as f64 / config.instances as f64,
            conditions_cooccur_fraction: cooccur as f64 / config.instances as f64,
            equivalence_violations,
            identity_violations,
            mean_dl_term_change: sum_change / config.instances as f64,
            min_dl_term_change: min_change,
            max_dl_term_change: max_change,
        });
    }
    Ok(rows)
}
