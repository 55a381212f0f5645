use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Truth/prediction counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl Confusion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, truth: &str, predicted: &str) {
        *self
            .counts
            .entry(truth.to_string())
            .or_default()
            .entry(predicted.to_string())
            .or_default() += 1;
    }

    pub fn count(&self, truth: &str, predicted: &str) -> usize {
        self.counts
            .get(truth)
            .and_then(|m| m.get(predicted))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().flat_map(|m| m.values()).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: usize = self
            .counts
            .iter()
            .map(|(t, m)| m.get(t).copied().unwrap_or(0))
            .sum();
        correct as f64 / total as f64
    }

    fn labels(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for (t, m) in &self.counts {
            out.insert(t.as_str());
            out.extend(m.keys().map(|s| s.as_str()));
        }
        out
    }

    /// One row per label seen as truth or prediction; a precision or recall
    /// with an empty denominator counts as 0.
    pub fn per_class(&self) -> Vec<ClassScores> {
        self.labels()
            .into_iter()
            .map(|label| {
                let tp = self.count(label, label);
                let predicted: usize = self.counts.values().filter_map(|m| m.get(label)).sum();
                let actual: usize = self.counts.get(label).map(|m| m.values().sum()).unwrap_or(0);
                let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, actual);
                ClassScores {
                    label: label.to_string(),
                    tp,
                    fp: predicted - tp,
                    fn_: actual - tp,
                    precision,
                    recall,
                    f: f_measure(precision, recall),
                }
            })
            .collect()
    }

    /// Unweighted mean of per-class F.
    pub fn macro_f(&self) -> f64 {
        let rows = self.per_class();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|r| r.f).sum::<f64>() / rows.len() as f64
    }
}
