//! Small tanh MLP with a candidate-masked softmax output.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Weights `w[l]` (in × out) and biases `b[l]` (1 × out), last layer linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub tensors: Vec<Array2<f64>>,
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`, Xavier-uniform weights, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::new();
        for w in sizes.windows(2) {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            tensors.push(Array2::from_shape_simple_fn((w[0], w[1]), || {
                rng.random_range(-bound..=bound)
            }));
            tensors.push(Array2::zeros((1, w[1])));
        }
        Mlp { tensors }
    }

    pub fn n_layers(&self) -> usize {
        self.tensors.len() / 2
    }

    pub fn n_outputs(&self) -> usize {
        self.tensors.last().map_or(0, |b| b.ncols())
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward_all(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.clone()];
        for l in 0..self.n_layers() {
            let mut z = acts[l].dot(&self.tensors[2 * l]);
            z += &self.tensors[2 * l + 1].row(0);
            if l + 1 < self.n_layers() {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        acts
    }

    pub fn logits(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_all(x).pop().expect("at least one layer")
    }

    /// Summed cross-entropy of softmax over the first `k[r]` logits of row `r`
    /// against `target[r] < k[r]`, and its gradient.
    pub fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        k: &[usize],
        target: &[usize],
    ) -> (f64, Vec<Array2<f64>>) {
        let acts = self.forward_all(x);
        let logits = acts.last().expect("at least one layer");
        let mut d = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        for (r, row) in logits.rows().into_iter().enumerate() {
            let valid = row.slice(ndarray::s![..k[r]]);
            let max = valid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + valid.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[target[r]];
            for c in 0..k[r] {
                d[[r, c]] = (row[c] - lse).exp();
            }
            d[[r, target[r]]] -= 1.0;
        }
        let mut grads: Vec<Array2<f64>> = self
            .tensors
            .iter()
            .map(|t| Array2::zeros(t.raw_dim()))
            .collect();
        for l in (0..self.n_layers()).rev() {
            grads[2 * l] = acts[l].t().dot(&d);
            grads[2 * l + 1] = d.sum_axis(Axis(0)).insert_axis(Axis(0));
            if l > 0 {
                let mut dp = d.dot(&self.tensors[2 * l].t());
                Zip::from(&mut dp)
                    .and(&acts[l])
                    .for_each(|g, &a| *g *= 1.0 - a * a);
                d = dp;
            }
        }
        (loss, grads)
    }
}

/// Index of the largest of the first `k` entries.
pub fn masked_argmax(row: &Array1<f64>, k: usize) -> usize {
    (0..k).fold(0, |best, i| if row[i] > row[best] { i } else { best })
}
