//! Built-in labeled problems for the user-assisted experiments.

use serde::{Deserialize, Serialize};

use restrata::moo::{MooError, MultiObjectiveProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemId {
    /// Two classes on [0, 1]: class A (x < 0.7, prior mass 0.7) with losses
    /// on the segment (t, 1-t), class B (x >= 0.7, prior mass 0.3) with
    /// losses (2+s, 3-s). Every A point strictly dominates every B point,
    /// while points are mutually non-dominated inside each class, so a
    /// Pareto front over any mixed pool contains only A points.
    TwoClassDominance,
}

type Classifier = Box<dyn Fn(&[f64]) -> usize + Send + Sync>;

/// A multi-objective problem whose domain points carry a hidden class,
/// visible to the oracle user but not to the generation algorithms.
pub struct LabeledProblem {
    pub problem: MultiObjectiveProblem,
    pub class_ids: Vec<String>,
    classify: Classifier,
}

impl LabeledProblem {
    pub fn classify(&self, x: &[f64]) -> usize {
        (self.classify)(x)
    }

    pub fn class_index(&self, class_id: &str) -> Option<usize> {
        self.class_ids.iter().position(|c| c == class_id)
    }
}

pub fn build(id: ProblemId) -> Result<LabeledProblem, MooError> {
    match id {
        ProblemId::TwoClassDominance => {
            let losses = |x: f64| -> (f64, f64) {
                if x < 0.7 {
                    let t = x / 0.7;
                    (t, 1.0 - t)
                } else {
                    let s = (x - 0.7) / 0.3;
                    (2.0 + s, 3.0 - s)
                }
            };
            let problem = MultiObjectiveProblem::new(
                vec![
                    Box::new(move |x: &[f64]| losses(x[0]).0),
                    Box::new(move |x: &[f64]| losses(x[0]).1),
                ],
                vec![(0.0, 1.0)],
            )?;
            Ok(LabeledProblem {
                problem,
                class_ids: vec!["A".to_string(), "B".to_string()],
                classify: Box::new(|x: &[f64]| usize::from(x[0] >= 0.7)),
            })
        }
    }
}
