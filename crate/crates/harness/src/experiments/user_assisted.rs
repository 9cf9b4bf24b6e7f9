//! User-assisted generation: algorithms x selectors, scored by an oracle
//! user who takes the first presented candidate of the desired class.
//!
//! Per request, `runs` weighted scalar runs produce a pool of every
//! evaluated point plus the per-run winners. The `msr-passthrough` selector
//! presents the first `k` winners; Pareto-based selectors reduce the pool's
//! front to `k`; `domain-covering` reduces the whole pool. Success means at
//! least one presented candidate belongs to the desired class.

use rand::Rng;

use restrata::moo::{dominates, msr_generate_with_trace, Candidate, CandidateSet};
use restrata::rng;
use restrata::subset::{select_subset, SubsetMethod, SubsetRequest};
use restrata::synthgen::oracle_user;

use crate::config::{SelectorId, UserAssistedConfig};
use crate::error::{Ctx, HarnessError};
use crate::problems::{build, LabeledProblem};
use crate::report::SelectionRow;

/// Indices of the non-dominated candidates, preserving order.
fn front_indices(set: &CandidateSet) -> Vec<usize> {
    let candidates = set.candidates();
    (0..candidates.len())
        .filter(|&i| {
            !candidates
                .iter()
                .any(|other| dominates(&other.losses, &candidates[i].losses).unwrap_or(false))
        })
        .collect()
}

fn subset_of(set: &CandidateSet, indices: &[usize]) -> CandidateSet {
    let picked = indices
        .iter()
        .map(|&i| set.candidates()[i].clone())
        .collect();
    CandidateSet::new(picked, set.objective_count()).expect("homogeneous subset")
}

fn present(
    selector: SelectorId,
    winners: &CandidateSet,
    pool: &CandidateSet,
    front: &[usize],
    k: usize,
    reference: Option<&[f64]>,
    selector_rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<Candidate>, HarnessError> {
    let context = || format!("user_assisted[selector {selector}]");
    match selector {
        SelectorId::MsrPassthrough => Ok(winners.candidates().iter().take(k).cloned().collect()),
        _ => {
            let method = selector.subset_method().expect("subset selector");
            let scope = match method {
                SubsetMethod::DomainCovering => pool.clone(),
                _ => subset_of(pool, front),
            };
            let m = k.min(scope.len());
            let mut request = SubsetRequest::new(&scope, m, method).ctx(context)?;
            if let Some(reference) = reference {
                request = request.with_reference(reference.to_vec());
            }
            let selection = select_subset(&request, selector_rng).ctx(context)?;
            Ok(selection.selected.candidates().to_vec())
        }
    }
}

pub fn exp_user_assisted(config: &UserAssistedConfig) -> Result<Vec<SelectionRow>, HarnessError> {
    let labeled: LabeledProblem = build(config.problem).ctx(|| "building problem".to_string())?;
    let desired = labeled.class_index(&config.desired_class).ok_or_else(|| {
        HarnessError::config(format!(
            "desired_class `{}` not in problem classes {:?}",
            config.desired_class, labeled.class_ids
        ))
    })?;

    let mut rows = Vec::new();
    for &seed in &config.seeds {
        for (algo_index, &algorithm) in config.algorithms.iter().enumerate() {
            let context = || format!("user_assisted: algorithm={algorithm} seed={seed}");
            // One master stream per (seed, algorithm) hands out request
            // seeds; each request's runs derive substreams from its seed.
            let mut master = rng::substream(seed, algo_index as u64);
            let mut successes = vec![0usize; config.selectors.len()];
            for _ in 0..config.requests {
                let request_seed: u64 = master.random();
                let (winners, pool) = msr_generate_with_trace(
                    &labeled.problem,
                    config.runs,
                    algorithm,
                    config.budget,
                    request_seed,
                )
                .ctx(context)?;
                let front = front_indices(&pool);
                for (s, &selector) in config.selectors.iter().enumerate() {
                    let mut selector_rng = rng::substream(request_seed, 1_000 + s as u64);
                    let presented = present(
                        selector,
                        &winners,
                        &pool,
                        &front,
                        config.k,
                        config.reference_point.as_deref(),
                        &mut selector_rng,
                    )?;
                    let labels: Vec<usize> =
                        presented.iter().map(|c| labeled.classify(&c.x)).collect();
                    if oracle_user(&labels, desired).is_some() {
                        successes[s] += 1;
                    }
                }
            }
            for (s, &selector) in config.selectors.iter().enumerate() {
                rows.push(SelectionRow {
                    algorithm: algorithm.to_string(),
                    selector: selector.to_string(),
                    seed,
                    success_pct: 100.0 * successes[s] as f64 / config.requests as f64,
                });
            }
        }
    }
    Ok(rows)
}
