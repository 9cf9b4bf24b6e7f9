//! When does reweighting help a class, and when can it hurt?
//!
//! Fix a class `C` and strata `D_1..D_m`. Write `p` for the reference
//! stratum probabilities, `p'` for the model's, `q_j = P(C | D_j)` under the
//! reference and `q'_j = P(C | D_j)` under the model. Then (with `p·q` for
//! the inner product):
//!
//! * `p·q`: probability of `C` under the reference (the target);
//! * `p'·q'`: probability of `C` under the raw model;
//! * `p·q'`: probability of `C` after stratified rejection, which restores
//!   the stratum marginals to `p` but keeps the model's within-stratum
//!   composition.
//!
//! Reweighting lowers the class probability exactly when
//! `q'·(p' − p) > 0`, because `p'·q' − p·q' = q'·(p' − p)`. The reports also
//! carry `p·(q − q') > 0`, which says the model underestimates the class
//! overall, the case where the class matters for the diversity loss in the
//! first place. Both must hold for reweighting to worsen that class's loss
//! term.

use serde::Serialize;
use thiserror::Error;

use crate::metrics::{diversity_loss, DiversityLoss, FrequencyVector, MetricsError};
use crate::strata::StratumDistribution;

/// Inner products with magnitude below this are treated as ties and resolved
/// as "not detrimental".
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("composition for class `{class}` has {got} strata, expected {expected}")]
    LengthMismatch {
        class: String,
        got: usize,
        expected: usize,
    },
    #[error("class `{0}` is absent from the target (probability 0)")]
    ClassAbsentFromTarget(String),
    #[error("composition entry {value} for class `{class}` is outside [0, 1]")]
    CompositionRange { class: String, value: f64 },
    #[error("no compositions given")]
    NoCompositions,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Within-stratum composition of one class: `reference[j] = P(C | D_j)` for
/// the reference variable, `model[j]` for the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumComposition {
    pub class_id: String,
    reference: Vec<f64>,
    model: Vec<f64>,
}

impl StratumComposition {
    pub fn new(
        class_id: impl Into<String>,
        reference: Vec<f64>,
        model: Vec<f64>,
    ) -> Result<Self, AnalysisError> {
        let class_id = class_id.into();
        if reference.len() != model.len() {
            return Err(AnalysisError::LengthMismatch {
                class: class_id,
                got: model.len(),
                expected: reference.len(),
            });
        }
        for &value in reference.iter().chain(&model) {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(AnalysisError::CompositionRange {
                    class: class_id,
                    value,
                });
            }
        }
        Ok(Self {
            class_id,
            reference,
            model,
        })
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn model(&self) -> &[f64] {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }
}

/// Class-level effect of reweighting, with the two sign conditions that must
/// co-occur for the effect to be detrimental.
#[derive(Debug, Clone, Serialize)]
pub struct DetrimentReport {
    pub class_id: String,
    /// `p·q`: class probability under the reference.
    pub prob_target: f64,
    /// `p'·q'`: class probability under the raw model.
    pub prob_before: f64,
    /// `p·q'`: class probability after reweighting.
    pub prob_after: f64,
    /// `1 - prob_before / prob_target`.
    pub dl_term_before: f64,
    /// `1 - prob_after / prob_target`.
    pub dl_term_after: f64,
    /// `p·(q - q') > 0`: the model underestimates the class overall.
    pub condition_i: bool,
    /// `q'·(p' - p) > 0`: the model overweights strata where the class is
    /// rare, so restoring the stratum marginals lowers the class probability.
    pub condition_ii: bool,
    /// Reweighting strictly increased this class's loss term (ties within
    /// [`TIE_EPSILON`] count as not detrimental).
    pub detrimental: bool,
}

impl DetrimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Analyzes one class against target (`p`) and model (`p'`) stratum
/// probabilities.
pub fn analyze_class(
    target: &StratumDistribution,
    model: &StratumDistribution,
    composition: &StratumComposition,
) -> Result<DetrimentReport, AnalysisError> {
    if composition.len() != target.len() || target.len() != model.len() {
        return Err(AnalysisError::LengthMismatch {
            class: composition.class_id.clone(),
            got: composition.len(),
            expected: target.len(),
        });
    }
    let p = target.probs();
    let p_model = model.probs();
    let q = composition.reference();
    let q_model = composition.model();

    let prob_target = dot(p, q);
    if prob_target.is_nan() || prob_target <= 0.0 {
        return Err(AnalysisError::ClassAbsentFromTarget(
            composition.class_id.clone(),
        ));
    }
    let prob_before = dot(p_model, q_model);
    let prob_after = dot(p, q_model);

    // prob_before - prob_after, summed difference-first for sharper signs.
    let shift: f64 = q_model
        .iter()
        .zip(p_model.iter().zip(p))
        .map(|(&qm, (&pm, &pt))| qm * (pm - pt))
        .sum();
    let gap: f64 = p
        .iter()
        .zip(q.iter().zip(q_model))
        .map(|(&pt, (&qr, &qm))| pt * (qr - qm))
        .sum();

    Ok(DetrimentReport {
        class_id: composition.class_id.clone(),
        prob_target,
        prob_before,
        prob_after,
        dl_term_before: 1.0 - prob_before / prob_target,
        dl_term_after: 1.0 - prob_after / prob_target,
        condition_i: gap > 0.0,
        condition_ii: shift > 0.0,
        detrimental: shift > TIE_EPSILON,
    })
}

/// Diversity loss before and after reweighting, composed across classes.
///
/// The per-class target probabilities `p·q` must form a simplex (they do
/// whenever the compositions are the conditionals of a real joint
/// distribution).
pub fn dl_after_reweighting(
    target: &StratumDistribution,
    model: &StratumDistribution,
    compositions: &[StratumComposition],
) -> Result<(DiversityLoss, DiversityLoss), AnalysisError> {
    if compositions.is_empty() {
        return Err(AnalysisError::NoCompositions);
    }
    let mut class_ids = Vec::with_capacity(compositions.len());
    let mut targets = Vec::with_capacity(compositions.len());
    let mut before = Vec::with_capacity(compositions.len());
    let mut after = Vec::with_capacity(compositions.len());
    for comp in compositions {
        let report = analyze_class(target, model, comp)?;
        class_ids.push(report.class_id);
        targets.push(report.prob_target);
        before.push(report.prob_before);
        after.push(report.prob_after);
    }
    let target_fv = FrequencyVector::new(class_ids.clone(), targets)?;
    let before_fv = FrequencyVector::new(class_ids.clone(), before)?;
    let after_fv = FrequencyVector::new(class_ids, after)?;
    Ok((
        diversity_loss(&target_fv, &before_fv)?,
        diversity_loss(&target_fv, &after_fv)?,
    ))
}
