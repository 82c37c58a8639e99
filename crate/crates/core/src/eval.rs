//! Goal vectors and the metrics behind them.
//!
//! Classification models are scored on five goals at once: recall,
//! false alarm rate, precision, the fraction of changes inspected within the
//! first 20% of effort, and the number of false alarms before the first hit.
//! Regression models are scored on the median magnitude of relative error.
//! Values are kept raw here; reports rescale rates to percentages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ProjectTable, Task};
use crate::util::median;

pub const CLASSIFICATION_GOALS: [&str; 5] =
    ["recall", "false_alarm", "precision", "popt20", "ifa"];
const CLASSIFICATION_WEIGHTS: [f64; 5] = [1.0, -1.0, 1.0, 1.0, -1.0];
pub const REGRESSION_GOALS: [&str; 1] = ["mre"];
const REGRESSION_WEIGHTS: [f64; 1] = [-1.0];

/// Probability at or above which a change is predicted defective.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no defective rows; ranking metrics are undefined")]
    NoDefects,
    #[error("total inspection effort is zero")]
    ZeroEffort,
    #[error("table has no effort column but the task needs one")]
    MissingEffort,
    #[error("cannot score an empty prediction set")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalKind {
    Classification,
    Regression,
}

impl GoalKind {
    pub fn names(&self) -> &'static [&'static str] {
        match self {
            GoalKind::Classification => &CLASSIFICATION_GOALS,
            GoalKind::Regression => &REGRESSION_GOALS,
        }
    }

    /// +1 for goals to maximize, -1 for goals to minimize.
    pub fn weights(&self) -> &'static [f64] {
        match self {
            GoalKind::Classification => &CLASSIFICATION_WEIGHTS,
            GoalKind::Regression => &REGRESSION_WEIGHTS,
        }
    }

    pub fn len(&self) -> usize {
        self.names().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl From<Task> for GoalKind {
    fn from(task: Task) -> Self {
        match task {
            Task::Classification => GoalKind::Classification,
            Task::Regression => GoalKind::Regression,
        }
    }
}

/// One model's scores on one evaluation table, in goal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalVector {
    pub kind: GoalKind,
    pub values: Vec<f64>,
}

impl GoalVector {
    pub fn classification(recall: f64, false_alarm: f64, precision: f64, popt20: f64, ifa: f64) -> Self {
        GoalVector {
            kind: GoalKind::Classification,
            values: vec![recall, false_alarm, precision, popt20, ifa],
        }
    }

    pub fn regression(mre: f64) -> Self {
        GoalVector {
            kind: GoalKind::Regression,
            values: vec![mre],
        }
    }

    pub fn names(&self) -> &'static [&'static str] {
        self.kind.names()
    }

    pub fn weights(&self) -> &'static [f64] {
        self.kind.weights()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names()
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Confusion {
    /// `tp / (tp + fn)`, zero when there are no actual positives.
    pub fn recall(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    /// `fp / (fp + tn)`, zero when there are no actual negatives.
    pub fn false_alarm(&self) -> f64 {
        ratio(self.false_pos, self.false_pos + self.true_neg)
    }

    /// `tp / (tp + fp)`, zero when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(c)
}

/// Inspection order: highest score first, cheaper changes first among equal
/// scores, original position as the final tie-break.
pub fn rank_for_inspection(scores: &[f64], effort: &[f64]) -> Result<Vec<usize>, EvalError> {
    if scores.len() != effort.len() {
        return Err(EvalError::LengthMismatch {
            expected: effort.len(),
            got: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(effort[a].total_cmp(&effort[b]))
            .then(a.cmp(&b))
    });
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffortMetrics {
    /// Fraction of all changes inspected when cumulative effort first reaches
    /// 20% of the total.
    pub popt20: f64,
    /// Fraction of defective changes found in that same window.
    pub recall_at_20: f64,
    /// Clean changes inspected before the first defective one.
    pub ifa: f64,
}

/// Walks the inspection ranking and reads off the effort-aware goals.
/// Scale-free in the effort column: multiplying every effort by a positive
/// constant changes nothing.
pub fn effort_metrics(
    scores: &[f64],
    labels: &[bool],
    effort: &[f64],
) -> Result<EffortMetrics, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let order = rank_for_inspection(scores, effort)?;
    let total: f64 = effort.iter().sum();
    if total <= 0.0 {
        return Err(EvalError::ZeroEffort);
    }
    let n_defective = labels.iter().filter(|&&l| l).count();
    if n_defective == 0 {
        return Err(EvalError::NoDefects);
    }
    let mut cum = 0.0;
    let mut inspected_at_20 = 0;
    let mut found_at_20 = 0;
    let mut found = 0;
    let mut ifa = None;
    let mut clean_seen = 0;
    for (pos, &i) in order.iter().enumerate() {
        cum += effort[i];
        if labels[i] {
            found += 1;
            if ifa.is_none() {
                ifa = Some(clean_seen);
            }
        } else {
            clean_seen += 1;
        }
        // `cum * 5 >= total` rather than `cum >= total / 5`: the former is
        // exact at the boundary where the latter picks up rounding error
        if inspected_at_20 == 0 && cum * 5.0 >= total {
            inspected_at_20 = pos + 1;
            found_at_20 = found;
        }
    }
    Ok(EffortMetrics {
        popt20: inspected_at_20 as f64 / scores.len() as f64,
        recall_at_20: found_at_20 as f64 / n_defective as f64,
        ifa: ifa.expect("at least one defective row") as f64,
    })
}

/// Magnitude of relative error with a floor of one on the denominator, so
/// near-zero actuals do not blow up the ratio.
pub fn mre(predicted: f64, actual: f64) -> f64 {
    (predicted - actual).abs() / actual.max(1.0)
}

/// Scores classification predictions into the five-goal vector.
pub fn score_classification(
    scores: &[f64],
    labels: &[bool],
    effort: &[f64],
) -> Result<GoalVector, EvalError> {
    let c = confusion(scores, labels, DECISION_THRESHOLD)?;
    let e = effort_metrics(scores, labels, effort)?;
    Ok(GoalVector::classification(
        c.recall(),
        c.false_alarm(),
        c.precision(),
        e.popt20,
        e.ifa,
    ))
}

/// Scores regression predictions: the median magnitude of relative error.
pub fn score_regression(predictions: &[f64], actuals: &[f64]) -> Result<GoalVector, EvalError> {
    if predictions.len() != actuals.len() {
        return Err(EvalError::LengthMismatch {
            expected: actuals.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let errs: Vec<f64> = predictions
        .iter()
        .zip(actuals)
        .map(|(&p, &a)| mre(p, a))
        .collect();
    Ok(GoalVector::regression(median(&errs).unwrap()))
}

/// Scores raw model outputs against a table, routing on the table's task.
pub fn score_table(outputs: &[f64], table: &ProjectTable) -> Result<GoalVector, EvalError> {
    match table.schema.task {
        Task::Classification => {
            let effort = table.effort().ok_or(EvalError::MissingEffort)?;
            score_classification(outputs, &table.bool_labels(), effort)
        }
        Task::Regression => score_regression(outputs, table.labels()),
    }
}
