//! Evaluation reports as aligned text tables and JSON.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionCounts, Metrics};
use super::split::SplitScheme;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub name: String,
    /// Mean over folds.
    pub metrics: Metrics,
    /// Summed over folds.
    pub confusion: ConfusionCounts,
    pub fold_metrics: Vec<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub title: String,
    pub dataset: String,
    pub users: usize,
    pub scheme: SplitScheme,
    pub seed: u64,
    pub config_fingerprint: String,
    pub rows: Vec<ModelRow>,
}

impl EvalReport {
    pub fn row(&self, name: &str) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scheme = match self.scheme {
            SplitScheme::Holdout(frac) => format!("holdout {frac}"),
            SplitScheme::KFold(k) => format!("{k}-fold"),
        };
        writeln!(f, "# {}", self.title)?;
        writeln!(f, "# dataset: {} ({} users), {}, seed {}", self.dataset, self.users, scheme, self.seed)?;
        writeln!(f, "# config: {}", self.config_fingerprint)?;
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        writeln!(
            f,
            "{:<width$}  {:>13}  {:>10}  {:>12}  {:>12}",
            "Model", "Precision (%)", "Recall (%)", "F1-Score (%)", "Accuracy (%)"
        )?;
        for r in &self.rows {
            let m = &r.metrics;
            writeln!(
                f,
                "{:<width$}  {:>13}  {:>10}  {:>12}  {:>12}",
                r.name,
                pct(m.precision),
                pct(m.recall),
                pct(m.f1),
                pct(m.accuracy)
            )?;
        }
        Ok(())
    }
}
