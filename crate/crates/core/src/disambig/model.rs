use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::align::{CandidateTable, Instance};
use super::mlp::{masked_argmax, Mlp};
use super::DisambigError;
use crate::training::{OptState, OptimizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisambigConfig {
    /// 1 to 5.
    pub hidden_layers: usize,
    pub width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Presence flags instead of counts in the bag of words.
    pub binary_bow: bool,
    /// Leave the classified occurrence out of its own bag of words.
    pub exclude_target: bool,
    /// One network for all symbols (symbol id as a feature) or one per symbol.
    pub shared: bool,
}

impl Default for DisambigConfig {
    fn default() -> Self {
        DisambigConfig {
            hidden_layers: 1,
            width: 64,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            binary_bow: false,
            exclude_target: true,
            shared: true,
        }
    }
}

impl DisambigConfig {
    pub fn validate(&self) -> Result<(), DisambigError> {
        if !(1..=5).contains(&self.hidden_layers) {
            return Err(DisambigError::InvalidConfig(
                "hidden_layers must be between 1 and 5".into(),
            ));
        }
        if self.width == 0 || self.batch_size == 0 {
            return Err(DisambigError::InvalidConfig(
                "width and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Candidate-restricted classifier for ambiguous generic symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disambiguator {
    pub config: DisambigConfig,
    pub table: CandidateTable,
    /// Bag-of-words vocabulary over generic leaves.
    pub vocab: Vec<String>,
    /// Symbols with at least two candidates, in table order.
    pub symbols: Vec<String>,
    /// One shared network, or one per entry of `symbols`.
    pub nets: Vec<Mlp>,
}

impl Disambiguator {
    /// Untrained classifier over the candidates and vocabulary of `instances`.
    pub fn new(instances: &[Instance], config: DisambigConfig) -> Result<Self, DisambigError> {
        config.validate()?;
        let table = CandidateTable::build(instances);
        let mut vocab: Vec<String> = instances
            .iter()
            .flat_map(|i| i.leaves.iter().cloned())
            .collect();
        vocab.sort();
        vocab.dedup();
        let symbols: Vec<String> = table.ambiguous().map(|(s, _)| s.clone()).collect();
        let mut d = Disambiguator {
            config,
            table,
            vocab,
            symbols,
            nets: Vec::new(),
        };
        let seed = d.config.seed;
        let hidden = vec![d.config.width; d.config.hidden_layers];
        let build = |inputs: usize, outputs: usize, seed: u64| {
            let mut sizes = vec![inputs];
            sizes.extend(&hidden);
            sizes.push(outputs);
            Mlp::new(&sizes, seed)
        };
        d.nets = if d.config.shared {
            vec![build(d.n_features(), d.table.max_candidates().max(1), seed)]
        } else {
            d.symbols
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    build(
                        d.n_features(),
                        d.table.candidates(s).map_or(1, <[_]>::len),
                        seed.wrapping_add(k as u64),
                    )
                })
                .collect()
        };
        Ok(d)
    }

    fn n_features(&self) -> usize {
        let one_hot = if self.config.shared {
            self.symbols.len()
        } else {
            0
        };
        one_hot + self.vocab.len()
    }

    fn symbol_index(&self, s: &str) -> Option<usize> {
        self.symbols.iter().position(|x| x == s)
    }

    fn net_for(&self, sym: usize) -> usize {
        if self.config.shared {
            0
        } else {
            sym
        }
    }

    /// Feature row: symbol one-hot (shared network only) then bag-of-words counts.
    pub fn features(&self, symbol: &str, leaves: &[String], position: Option<usize>) -> Vec<f64> {
        let mut x = vec![0.0; self.n_features()];
        let off = if self.config.shared {
            self.symbols.len()
        } else {
            0
        };
        if self.config.shared {
            if let Some(i) = self.symbol_index(symbol) {
                x[i] = 1.0;
            }
        }
        for (k, l) in leaves.iter().enumerate() {
            if self.config.exclude_target && Some(k) == position {
                continue;
            }
            if let Ok(j) = self.vocab.binary_search(l) {
                x[off + j] = if self.config.binary_bow {
                    1.0
                } else {
                    x[off + j] + 1.0
                };
            }
        }
        x
    }

    /// Chosen macro for one occurrence. Single-candidate symbols skip the network.
    pub fn classify(
        &self,
        symbol: &str,
        leaves: &[String],
        position: Option<usize>,
    ) -> Result<&str, DisambigError> {
        let cands = self
            .table
            .candidates(symbol)
            .ok_or_else(|| DisambigError::UnknownSymbol(symbol.to_string()))?;
        if cands.len() == 1 {
            return Ok(&cands[0]);
        }
        let sym = self
            .symbol_index(symbol)
            .expect("ambiguous symbols are indexed");
        let x = Array2::from_shape_vec(
            (1, self.n_features()),
            self.features(symbol, leaves, position),
        )
        .expect("feature width");
        let logits = self.nets[self.net_for(sym)].logits(&x);
        Ok(&cands[masked_argmax(&logits.row(0).to_owned(), cands.len())])
    }

    pub fn classify_instance(&self, i: &Instance) -> Result<&str, DisambigError> {
        self.classify(&i.symbol, &i.leaves, Some(i.position))
    }

    /// Fraction of instances classified correctly; unknown symbols count as wrong.
    pub fn accuracy(&self, instances: &[Instance]) -> f64 {
        if instances.is_empty() {
            return 0.0;
        }
        let hits = instances
            .iter()
            .filter(|i| self.classify_instance(i).is_ok_and(|m| m == i.target))
            .count();
        hits as f64 / instances.len() as f64
    }

    /// Expected accuracy of a uniform guess among each instance's candidates.
    pub fn baseline(&self, instances: &[Instance]) -> f64 {
        if instances.is_empty() {
            return 0.0;
        }
        let s: f64 = instances
            .iter()
            .map(|i| match self.table.candidates(&i.symbol) {
                Some(c) if c.contains(&i.target) => 1.0 / c.len() as f64,
                _ => 0.0,
            })
            .sum();
        s / instances.len() as f64
    }

    /// Minibatch Adam on the instances of ambiguous symbols; returns the summed loss per epoch.
    pub fn train(&mut self, instances: &[Instance]) -> Vec<f64> {
        // (net, features, candidate count, target index)
        let mut rows: Vec<(usize, Vec<f64>, usize, usize)> = Vec::new();
        for i in instances {
            let Some(sym) = self.symbol_index(&i.symbol) else {
                continue;
            };
            let cands = self.table.candidates(&i.symbol).expect("indexed symbol");
            let Some(t) = cands.iter().position(|c| c == &i.target) else {
                continue;
            };
            rows.push((
                self.net_for(sym),
                self.features(&i.symbol, &i.leaves, Some(i.position)),
                cands.len(),
                t,
            ));
        }
        let mut opts: Vec<OptState> = self
            .nets
            .iter()
            .map(|n| OptState::new(OptimizerKind::Adam, &n.tensors))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut losses = Vec::with_capacity(self.config.epochs);
        let nf = self.n_features();
        for _ in 0..self.config.epochs {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(self.config.batch_size) {
                let mut by_net: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for &r in chunk {
                    by_net.entry(rows[r].0).or_default().push(r);
                }
                for (net, idx) in by_net {
                    let mut x = Array2::zeros((idx.len(), nf));
                    for (k, &r) in idx.iter().enumerate() {
                        x.row_mut(k).assign(&ndarray::ArrayView1::from(&rows[r].1));
                    }
                    let ks: Vec<usize> = idx.iter().map(|&r| rows[r].2).collect();
                    let ts: Vec<usize> = idx.iter().map(|&r| rows[r].3).collect();
                    let (loss, grads) = self.nets[net].loss_and_grads(&x, &ks, &ts);
                    total += loss;
                    opts[net].step(
                        &mut self.nets[net].tensors,
                        &grads,
                        self.config.learning_rate,
                        None,
                    );
                }
            }
            losses.push(total);
        }
        losses
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("disambiguator serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DisambigError> {
        let d: Disambiguator =
            serde_json::from_str(s).map_err(|e| DisambigError::Checkpoint(e.to_string()))?;
        d.config.validate()?;
        let want = if d.config.shared { 1 } else { d.symbols.len() };
        if d.nets.len() != want
            || d.nets.iter().any(|n| {
                n.tensors
                    .first()
                    .is_some_and(|w| w.nrows() != d.n_features())
            })
        {
            return Err(DisambigError::Checkpoint(
                "network shapes do not match the feature layout".into(),
            ));
        }
        Ok(d)
    }
}
