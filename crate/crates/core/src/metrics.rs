//! Position-wise, content-only and bag-of-words accuracy of predicted padded trees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pipeline::{PaddedTree, INTERNAL, Y_END};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("prediction and truth are laid out over different hulls")]
    HullMismatch,
    #[error("truth has no content positions")]
    NoContentPositions,
}

/// Not `INTERNAL` and not `Y_END`.
pub fn is_content(v: u32) -> bool {
    v != INTERNAL && v != Y_END
}

fn check(pred: &PaddedTree, truth: &PaddedTree) -> Result<(), MetricsError> {
    if pred.hull != truth.hull || pred.values.len() != truth.values.len() {
        return Err(MetricsError::HullMismatch);
    }
    Ok(())
}

/// `Σ_v max(#v(truth) − #v(pred), 0)`, optionally over content values only.
fn bow_missing(pred: &[u32], truth: &[u32], content_only: bool) -> usize {
    let mut counts: BTreeMap<u32, i64> = BTreeMap::new();
    for &v in truth.iter().filter(|&&v| !content_only || is_content(v)) {
        *counts.entry(v).or_default() += 1;
    }
    for &v in pred {
        if let Some(c) = counts.get_mut(&v) {
            *c -= 1;
        }
    }
    counts.values().map(|&c| c.max(0) as usize).sum()
}

pub fn full_accuracy(pred: &PaddedTree, truth: &PaddedTree) -> Result<f64, MetricsError> {
    check(pred, truth)?;
    let hits = pred
        .values
        .iter()
        .zip(&truth.values)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / truth.values.len() as f64)
}

pub fn masked_accuracy(pred: &PaddedTree, truth: &PaddedTree) -> Result<f64, MetricsError> {
    check(pred, truth)?;
    let (mut n, mut hits) = (0usize, 0usize);
    for (&p, &t) in pred.values.iter().zip(&truth.values) {
        if is_content(t) {
            n += 1;
            hits += usize::from(p == t);
        }
    }
    if n == 0 {
        return Err(MetricsError::NoContentPositions);
    }
    Ok(hits as f64 / n as f64)
}

/// `1 − Σ_i max(#_i(truth) − #_i(pred), 0) / ‖truth‖` with `‖truth‖` all hull positions.
pub fn bow_accuracy(pred: &PaddedTree, truth: &PaddedTree) -> Result<f64, MetricsError> {
    check(pred, truth)?;
    Ok(1.0 - bow_missing(&pred.values, &truth.values, false) as f64 / truth.values.len() as f64)
}

/// Raw pooled counts; every fraction in [`EvalReport`] is recomputable from them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_trees: usize,
    pub n_positions: usize,
    pub n_correct: usize,
    pub n_content: usize,
    pub n_content_correct: usize,
    pub bow_missing: usize,
    pub bow_missing_content: usize,
    /// Predicted values that are neither `INTERNAL` nor `Y_END`.
    pub n_pred_content: usize,
}

impl Counts {
    pub fn add(&mut self, pred: &PaddedTree, truth: &PaddedTree) -> Result<(), MetricsError> {
        check(pred, truth)?;
        self.add_values(&pred.values, &truth.values);
        Ok(())
    }

    pub fn add_values(&mut self, pred: &[u32], truth: &[u32]) {
        self.n_trees += 1;
        self.n_positions += truth.len();
        for (&p, &t) in pred.iter().zip(truth) {
            self.n_correct += usize::from(p == t);
            if is_content(t) {
                self.n_content += 1;
                self.n_content_correct += usize::from(p == t);
            }
            self.n_pred_content += usize::from(is_content(p));
        }
        self.bow_missing += bow_missing(pred, truth, false);
        self.bow_missing_content += bow_missing(pred, truth, true);
    }

    pub fn merge(&mut self, o: &Counts) {
        self.n_trees += o.n_trees;
        self.n_positions += o.n_positions;
        self.n_correct += o.n_correct;
        self.n_content += o.n_content;
        self.n_content_correct += o.n_content_correct;
        self.bow_missing += o.bow_missing;
        self.bow_missing_content += o.bow_missing_content;
        self.n_pred_content += o.n_pred_content;
    }

    pub fn report(&self) -> EvalReport {
        let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        EvalReport {
            p_f: frac(self.n_correct, self.n_positions),
            p_m: frac(self.n_content_correct, self.n_content),
            p_b: 1.0 - frac(self.bow_missing, self.n_positions),
            p_b_content: 1.0 - frac(self.bow_missing_content, self.n_content),
            pred_content_fraction: frac(self.n_pred_content, self.n_positions),
            n_trees: self.n_trees,
            n_positions: self.n_positions,
            counts: *self,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub p_f: f64,
    pub p_m: f64,
    /// Bag-of-words accuracy over all hull positions.
    pub p_b: f64,
    /// Bag-of-words accuracy over content positions only.
    pub p_b_content: f64,
    pub pred_content_fraction: f64,
    pub n_trees: usize,
    pub n_positions: usize,
    pub counts: Counts,
}

/// Pooled report over `(pred, truth)` pairs.
pub fn evaluate<'a>(
    pairs: impl IntoIterator<Item = (&'a PaddedTree, &'a PaddedTree)>,
) -> Result<EvalReport, MetricsError> {
    let mut c = Counts::default();
    for (p, t) in pairs {
        c.add(p, t)?;
    }
    Ok(c.report())
}

/// Unweighted mean of fold reports; counts are summed.
pub fn average_reports(reports: &[EvalReport]) -> Option<EvalReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mut counts = Counts::default();
    for r in reports {
        counts.merge(&r.counts);
    }
    Some(EvalReport {
        p_f: mean(|r| r.p_f),
        p_m: mean(|r| r.p_m),
        p_b: mean(|r| r.p_b),
        p_b_content: mean(|r| r.p_b_content),
        pred_content_fraction: mean(|r| r.pred_content_fraction),
        n_trees: counts.n_trees,
        n_positions: counts.n_positions,
        counts,
    })
}
