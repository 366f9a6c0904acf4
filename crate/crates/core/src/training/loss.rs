//! Frequency-masked, reduce-sum softmax cross-entropy.

use std::collections::BTreeMap;

use ndarray::Array2;

use super::TrainError;

/// `β / count^α` for a correct prediction, `1 / count^α` otherwise.
pub fn mask_weight(count: usize, correct: bool, alpha: f64, beta: f64) -> f64 {
    let num = if correct { beta } else { 1.0 };
    num / (count as f64).powf(alpha)
}

/// Occurrences of each value over all truth positions of a minibatch.
pub fn symbol_counts(truth: &[Vec<u32>]) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for row in truth {
        for &v in row {
            *m.entry(v).or_insert(0) += 1;
        }
    }
    m
}

/// Per-position weights with counts from a (possibly larger) minibatch.
pub fn loss_mask_with_counts(
    truth: &[Vec<u32>],
    pred: &[Vec<u32>],
    counts: &BTreeMap<u32, usize>,
    alpha: f64,
    beta: f64,
) -> Vec<Vec<f64>> {
    truth
        .iter()
        .zip(pred)
        .map(|(t, p)| {
            t.iter()
                .zip(p)
                .map(|(&t, &p)| mask_weight(counts[&t], t == p, alpha, beta))
                .collect()
        })
        .collect()
}

/// Per-position weights, `truth[pos][row]` and `pred[pos][row]`.
pub fn loss_mask(truth: &[Vec<u32>], pred: &[Vec<u32>], alpha: f64, beta: f64) -> Vec<Vec<f64>> {
    loss_mask_with_counts(truth, pred, &symbol_counts(truth), alpha, beta)
}

/// `Σ mask · CE(softmax(logits), truth)` over positions and rows, with the
/// gradient at the logits. The mask is held constant.
pub fn masked_loss(
    logits: &[Array2<f64>],
    truth: &[Vec<u32>],
    mask: &[Vec<f64>],
) -> Result<(f64, Vec<Array2<f64>>), TrainError> {
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for ((lg, t), m) in logits.iter().zip(truth).zip(mask) {
        let mut g = Array2::zeros(lg.raw_dim());
        for (r, row) in lg.rows().into_iter().enumerate() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            let y = t[r] as usize;
            total += m[r] * (lse - row[y]);
            let mut grow = g.row_mut(r);
            for (k, &v) in row.iter().enumerate() {
                grow[k] = m[r] * (v - lse).exp();
            }
            grow[y] -= m[r];
        }
        grads.push(g);
    }
    if !total.is_finite() {
        return Err(TrainError::NonFiniteLoss);
    }
    Ok((total, grads))
}
