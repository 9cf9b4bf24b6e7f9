//! Quality-chasing samplers lose diversity, and prior-free search loses
//! more: the gaussian (1+1)-ES at budget 40 should produce at least as much
//! diversity loss as best-of-40 random search (direction only, averaged
//! over seeds).

use restrata::metrics::{diversity_loss, FrequencyVector};
use restrata::moo::ScalarOptimizer;
use restrata::rng;
use restrata::synthgen::{OptimizedSampler, PopulationSampler, PopulationSpec, QualityModel};

fn spec() -> PopulationSpec {
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
        feature_rho: vec![0.8, 0.8],
        quality: QualityModel {
            base: 0.0,
            frequency_gain: 2.0,
            noise: 1.0,
        },
    }
}

fn mean_delta(algorithm: ScalarOptimizer, budget: usize) -> f64 {
    let spec = spec();
    let target = spec.target_frequency_vector().unwrap();
    let seeds = 8;
    let n = 5_000;
    let mut total = 0.0;
    for seed in 0..seeds {
        let sampler =
            OptimizedSampler::new(PopulationSampler::new(&spec).unwrap(), algorithm, budget)
                .unwrap();
        let mut rng = rng::seeded(4_000 + seed);
        let mut counts = vec![0usize; 4];
        for _ in 0..n {
            counts[sampler.sample(&mut rng).reveal_class()] += 1;
        }
        let observed = FrequencyVector::from_counts(spec.class_ids.clone(), &counts).unwrap();
        total += diversity_loss(&target, &observed).unwrap().delta;
    }
    total / seeds as f64
}

#[test]
fn prior_free_search_degrades_diversity_at_least_as_much() {
    let random_search = mean_delta(ScalarOptimizer::RandomSearch, 40);
    let gaussian = mean_delta(ScalarOptimizer::GaussianOnePlusOne, 40);
    assert!(
        random_search > 0.05,
        "best-of-40 should already collapse: {random_search}"
    );
    assert!(
        gaussian >= random_search,
        "gaussian ES {gaussian} vs random search {random_search}"
    );
}

#[test]
fn every_optimizer_degrades_relative_to_the_raw_model() {
    let identity = mean_delta(ScalarOptimizer::RandomSearch, 1);
    assert!(identity < 0.1, "budget 1 is the base model: {identity}");
    for algorithm in [
        ScalarOptimizer::RandomSearch,
        ScalarOptimizer::DiscreteOnePlusOne,
        ScalarOptimizer::GaussianOnePlusOne,
    ] {
        let biased = mean_delta(algorithm, 40);
        assert!(
            biased > identity + 0.1,
            "{algorithm} at budget 40: {biased} vs {identity}"
        );
    }
}
