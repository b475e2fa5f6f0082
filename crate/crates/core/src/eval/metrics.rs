//! Confusion counts and the four headline metrics.

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Tallies predictions against truth, with 1 as the positive (depressed) class.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionCounts, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            _ => return Err(EvalError::NonBinaryLabel(if t > 1 { t } else { p })),
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Precision had a zero denominator (no positive predictions).
    pub precision_degenerate: bool,
    /// Recall had a zero denominator (no positive truths).
    pub recall_degenerate: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(c: &ConfusionCounts) -> Result<Metrics, EvalError> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::EmptyPopulation);
    }
    let accuracy = (c.tp + c.tn) as f64 / total as f64;
    let (precision, precision_degenerate) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_degenerate) = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1,
        precision_degenerate,
        recall_degenerate,
    })
}

impl Metrics {
    /// Component-wise mean; a degenerate flag is set when any input had it.
    pub fn mean(all: &[Metrics]) -> Metrics {
        let n = all.len().max(1) as f64;
        Metrics {
            accuracy: all.iter().map(|m| m.accuracy).sum::<f64>() / n,
            precision: all.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: all.iter().map(|m| m.recall).sum::<f64>() / n,
            f1: all.iter().map(|m| m.f1).sum::<f64>() / n,
            precision_degenerate: all.iter().any(|m| m.precision_degenerate),
            recall_degenerate: all.iter().any(|m| m.recall_degenerate),
        }
    }
}
