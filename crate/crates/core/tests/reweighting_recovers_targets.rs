//! End-to-end checks of stratified rejection against independent oracles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use restrata::analysis::{analyze_class, dl_after_reweighting, StratumComposition};
use restrata::metrics::{diversity_loss, FrequencyVector};
use restrata::rejection::{sample_batch, Draw, ReweightPlan};
use restrata::rng;
use restrata::strata::{
    estimate_stratum_probs, Discretizer, DistributionSource, StratumDistribution,
};
use restrata::synthgen::{CollapsedModelSpec, PopulationSampler, PopulationSpec, QualityModel};

fn table_like_spec() -> PopulationSpec {
    let raw = [0.178, 0.522, 0.175, 0.124];
    let sum: f64 = raw.iter().sum();
    PopulationSpec {
        class_ids: vec!["a".into(), "b".into(), "c".into(), "d".into()],
        target_frequencies: raw.iter().map(|f| f / sum).collect(),
        class_feature_means: vec![
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![-2.0, 0.0],
            vec![0.0, -2.0],
        ],
        feature_spread: vec![1.0, 1.0],
        feature_rho: vec![1.0, 1.0],
        quality: QualityModel {
            base: 0.0,
            frequency_gain: 2.0,
            noise: 1.0,
        },
    }
}

/// Strata equal to the hidden classes: reweighting must recover the target
/// class frequencies, and the rejection loop must never read a label.
#[test]
fn supervised_limit_cancels_diversity_loss() {
    let spec = table_like_spec();
    let collapsed = CollapsedModelSpec::new(spec.clone(), 1.0).unwrap();
    let model_freqs = collapsed.model_frequencies();
    let sampler = PopulationSampler::collapsed(&collapsed)
        .unwrap()
        .with_class_feature();

    // One stratum per class over the exposed class-index column (index 2
    // after the two auxiliary features).
    let disc = Discretizer::from_thresholds(
        vec!["class_index".into()],
        vec![2],
        vec![vec![0.5, 1.5, 2.5]],
        4,
    )
    .unwrap();

    let target = StratumDistribution::new(
        spec.target_frequencies.clone(),
        DistributionSource::Reference,
        0,
    )
    .unwrap();

    // Model strata estimated from calibration draws, with smoothing.
    let mut rng = rng::seeded(101);
    let calibration = 200_000;
    let mut gen = &sampler;
    let assignments: Vec<usize> = (0..calibration)
        .map(|_| {
            use restrata::rejection::Generator;
            let draw = gen.draw(&mut rng);
            disc.assign(&draw.features).unwrap()
        })
        .collect();
    let model = estimate_stratum_probs(&assignments, 4, 1.0, DistributionSource::Model).unwrap();
    for (estimated, analytic) in model.probs().iter().zip(&model_freqs) {
        assert!((estimated - analytic).abs() < 0.01);
    }

    let plan = ReweightPlan::build(&target, &model).unwrap();
    let n = 100_000;
    let batch = sample_batch(&mut gen, &disc, &plan, &mut rng, n, 10_000).unwrap();

    // The rejection loop itself never revealed a label.
    assert_eq!(sampler.label_reads(), 0, "rejection read a hidden label");

    let mut counts = vec![0usize; 4];
    for accepted in &batch.accepted {
        counts[accepted.item.reveal_class()] += 1;
    }
    assert_eq!(sampler.label_reads(), n);

    let observed = FrequencyVector::from_counts(spec.class_ids.clone(), &counts).unwrap();
    let target_fv = spec.target_frequency_vector().unwrap();
    let after = diversity_loss(&target_fv, &observed).unwrap().delta;
    let before = diversity_loss(
        &target_fv,
        &FrequencyVector::new(spec.class_ids.clone(), model_freqs).unwrap(),
    )
    .unwrap()
    .delta;
    assert!(before > 0.3, "collapse should hurt first: {before}");
    assert!(after <= 0.02, "supervised limit left delta {after}");
}

/// A fixed 3-class, 4-stratum joint: the analytic post-reweighting class
/// probabilities from the analysis module must match an actual rejection
/// simulation within 3 sigma.
#[test]
fn analysis_matches_rejection_simulation() {
    // Rows are classes, columns strata; both joints sum to 1.
    let reference = [
        [0.10, 0.05, 0.05, 0.10],
        [0.05, 0.15, 0.10, 0.10],
        [0.05, 0.10, 0.05, 0.10],
    ];
    let model = [
        [0.02, 0.03, 0.05, 0.05],
        [0.20, 0.20, 0.10, 0.05],
        [0.08, 0.07, 0.05, 0.10],
    ];
    run_joint_case(&reference, &model, 202);

    // A random consistent joint as well.
    let mut rng = rng::seeded(777);
    let mut random_ref = [[0.0; 4]; 3];
    let mut random_model = [[0.0; 4]; 3];
    let mut fill = |joint: &mut [[f64; 4]; 3]| {
        let mut total = 0.0;
        for row in joint.iter_mut() {
            for cell in row.iter_mut() {
                *cell = 0.05 + rng.random::<f64>();
                total += *cell;
            }
        }
        for row in joint.iter_mut() {
            for cell in row.iter_mut() {
                *cell /= total;
            }
        }
    };
    fill(&mut random_ref);
    fill(&mut random_model);
    run_joint_case(&random_ref, &random_model, 203);
}

fn run_joint_case(reference: &[[f64; 4]; 3], model: &[[f64; 4]; 3], seed: u64) {
    let stratum_probs = |joint: &[[f64; 4]; 3]| -> Vec<f64> {
        (0..4).map(|s| (0..3).map(|c| joint[c][s]).sum()).collect()
    };
    let p_ref = stratum_probs(reference);
    let p_model = stratum_probs(model);
    let conditionals = |joint: &[[f64; 4]; 3], marginals: &[f64]| -> Vec<Vec<f64>> {
        (0..3)
            .map(|c| (0..4).map(|s| joint[c][s] / marginals[s]).collect())
            .collect()
    };
    let q_ref = conditionals(reference, &p_ref);
    let q_model = conditionals(model, &p_model);

    let target = StratumDistribution::new(p_ref.clone(), DistributionSource::Reference, 0).unwrap();
    let model_dist =
        StratumDistribution::new(p_model.clone(), DistributionSource::Model, 0).unwrap();
    let compositions: Vec<StratumComposition> = (0..3)
        .map(|c| {
            StratumComposition::new(format!("c{c}"), q_ref[c].clone(), q_model[c].clone()).unwrap()
        })
        .collect();

    // Analytic side.
    let analytic_after: Vec<f64> = compositions
        .iter()
        .map(|comp| {
            analyze_class(&target, &model_dist, comp)
                .unwrap()
                .prob_after
        })
        .collect();
    let (dl_before, dl_after) = dl_after_reweighting(&target, &model_dist, &compositions).unwrap();

    // Simulation side: draw (class, stratum) from the model joint, reweight
    // strata toward p_ref, count accepted classes.
    let flat: Vec<((usize, usize), f64)> = (0..3)
        .flat_map(|c| (0..4).map(move |s| ((c, s), 0.0)))
        .zip(model.iter().flatten())
        .map(|(((c, s), _), &prob)| ((c, s), prob))
        .collect();
    let cumulative: Vec<((usize, usize), f64)> = flat
        .iter()
        .scan(0.0, |acc, &((c, s), prob)| {
            *acc += prob;
            Some(((c, s), *acc))
        })
        .collect();
    let mut generator = move |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random();
        let (class, stratum) = cumulative
            .iter()
            .find(|(_, cum)| u < *cum)
            .map(|&(cs, _)| cs)
            .unwrap_or(cumulative.last().unwrap().0);
        Draw {
            item: class,
            features: vec![stratum as f64],
        }
    };
    let disc = Discretizer::from_thresholds(
        vec!["stratum".into()],
        vec![0],
        vec![vec![0.5, 1.5, 2.5]],
        4,
    )
    .unwrap();
    let plan = ReweightPlan::build(&target, &model_dist).unwrap();
    let n = 100_000;
    let mut rng = rng::seeded(seed);
    let batch = sample_batch(&mut generator, &disc, &plan, &mut rng, n, 10_000).unwrap();
    let mut counts = [0usize; 3];
    for accepted in &batch.accepted {
        counts[accepted.item] += 1;
    }
    for (c, (&count, &expected)) in counts.iter().zip(&analytic_after).enumerate() {
        let freq = count as f64 / n as f64;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!(
            (freq - expected).abs() <= 3.0 * sigma,
            "class {c}: simulated {freq} vs analytic {expected}"
        );
    }

    // The aggregated losses agree with a direct metric computation on the
    // analytic probability vectors.
    let ids: Vec<String> = (0..3).map(|c| format!("c{c}")).collect();
    let targets: Vec<f64> = compositions
        .iter()
        .map(|comp| {
            analyze_class(&target, &model_dist, comp)
                .unwrap()
                .prob_target
        })
        .collect();
    let direct_after = diversity_loss(
        &FrequencyVector::new(ids.clone(), targets).unwrap(),
        &FrequencyVector::new(ids, analytic_after).unwrap(),
    )
    .unwrap();
    assert!((dl_after.delta - direct_after.delta).abs() < 1e-12);
    assert!(dl_before.delta >= 0.0);
}
