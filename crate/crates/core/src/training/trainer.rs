use std::ops::Range;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{loss_mask_with_counts, masked_loss, symbol_counts};
use super::optim::{clip_global_norm, OptState};
use super::{TrainConfig, TrainError};
use crate::clustering::{pick_clustering, Clustering, Mask, Schedules};
use crate::metrics::{Counts, EvalReport};
use crate::pipeline::{EncodedPair, PaddedBatch, PaddedTree, PipelineError};
use crate::topology::Topology;
use crate::treelstm::{Feed, ForwardPass, ModelError, Params};

/// Clustering key of an encoded pair: input and output topology.
pub fn pair_masks(pairs: &[EncodedPair]) -> Vec<Mask> {
    pairs
        .iter()
        .map(|p| vec![Topology::of(&p.input), Topology::of(&p.output)])
        .collect()
}

pub fn cluster_pairs(pairs: &[EncodedPair], steps: usize) -> Clustering {
    let masks = pair_masks(pairs);
    pick_clustering(&masks, &Schedules::geometric(pairs.len(), steps))
}

/// One padded minibatch per cluster.
pub fn make_batches(
    pairs: &[EncodedPair],
    clustering: &Clustering,
) -> Result<Vec<PaddedBatch>, PipelineError> {
    clustering
        .clusters
        .iter()
        .map(|c| {
            let members: Vec<&EncodedPair> = c.members.iter().map(|&i| &pairs[i]).collect();
            PaddedBatch::new(&c.hulls[0], &c.hulls[1], &members)
        })
        .collect()
}

/// Clusters `pairs` and pads them; empty input gives no batches.
pub fn batches_for(pairs: &[EncodedPair], steps: usize) -> Result<Vec<PaddedBatch>, PipelineError> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    make_batches(pairs, &cluster_pairs(pairs, steps))
}

fn chunk_ranges(rows: usize, chunk: usize) -> Vec<Range<usize>> {
    (0..rows)
        .step_by(chunk)
        .map(|s| s..(s + chunk).min(rows))
        .collect()
}

fn truth_of(trees: &[&PaddedTree]) -> Vec<Vec<u32>> {
    let n = trees.first().map_or(0, |t| t.len());
    (0..n)
        .map(|p| trees.iter().map(|t| t.values[p]).collect())
        .collect()
}

fn refs(v: &[PaddedTree]) -> Vec<&PaddedTree> {
    v.iter().collect()
}

/// Summed masked loss and gradients of one minibatch. Rows are split into
/// fixed chunks that run in parallel and are summed in chunk order, so the
/// result does not depend on the thread count.
pub fn batch_gradients(
    params: &Params,
    batch: &PaddedBatch,
    cfg: &TrainConfig,
    dropout_seed: Option<u64>,
) -> Result<(f64, Vec<Array2<f64>>), TrainError> {
    let ins = refs(&batch.inputs);
    let outs = refs(&batch.outputs);
    let counts = symbol_counts(&truth_of(&outs));
    let ranges = chunk_ranges(batch.len(), cfg.chunk_rows);
    let seeds: Vec<Option<u64>> = match dropout_seed {
        Some(s) if cfg.dropout > 0.0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            ranges.iter().map(|_| Some(rng.random::<u64>())).collect()
        }
        _ => vec![None; ranges.len()],
    };
    let parts: Vec<Result<(f64, Vec<Array2<f64>>), TrainError>> = ranges
        .par_iter()
        .zip(seeds)
        .map(|(r, seed)| {
            let (i, o) = (&ins[r.clone()], &outs[r.clone()]);
            let pass = match seed {
                Some(s) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    ForwardPass::run(
                        params,
                        i,
                        o,
                        cfg.train_feed(),
                        Some((cfg.dropout, &mut rng)),
                    )?
                }
                None => ForwardPass::eval(params, i, o, cfg.train_feed())?,
            };
            let truth = truth_of(o);
            let mask =
                loss_mask_with_counts(&truth, &pass.decoder.preds, &counts, cfg.alpha, cfg.beta);
            let (loss, dlogits) = masked_loss(&pass.decoder.logits, &truth, &mask)?;
            Ok((loss, pass.backward(params, &dlogits)))
        })
        .collect();
    let mut total = 0.0;
    let mut grads: Option<Vec<Array2<f64>>> = None;
    for part in parts {
        let (l, g) = part?;
        total += l;
        match grads.as_mut() {
            None => grads = Some(g),
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        }
    }
    Ok((total, grads.unwrap_or_else(|| params.zeros_like())))
}

/// Predictions for every member of `batch`, `preds[row]` in hull pre-order.
pub fn predict_batch(
    params: &Params,
    batch: &PaddedBatch,
    feed: Feed,
    chunk_rows: usize,
) -> Result<Vec<Vec<u32>>, ModelError> {
    let ins = refs(&batch.inputs);
    let outs = refs(&batch.outputs);
    let parts: Vec<Result<Vec<Vec<u32>>, ModelError>> = chunk_ranges(batch.len(), chunk_rows)
        .into_par_iter()
        .map(|r| {
            let pass = ForwardPass::eval(params, &ins[r.clone()], &outs[r.clone()], feed)?;
            let preds = &pass.decoder.preds;
            Ok((0..r.len())
                .map(|row| preds.iter().map(|p| p[row]).collect())
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(batch.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Pooled metric counts over all batches.
pub fn evaluate_batches(
    params: &Params,
    batches: &[PaddedBatch],
    feed: Feed,
    chunk_rows: usize,
) -> Result<Counts, ModelError> {
    let mut c = Counts::default();
    for b in batches {
        for (pred, truth) in predict_batch(params, b, feed, chunk_rows)?
            .iter()
            .zip(&b.outputs)
        {
            c.add_values(pred, &truth.values);
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: String,
    pub epoch: usize,
    /// Summed masked loss over the epoch's updates.
    pub train_loss: f64,
    pub train: EvalReport,
    pub val: Option<EvalReport>,
    pub wall_seconds: f64,
}

pub const METRICS_HEADER: &str =
    "epoch,train_loss,train_pf,train_pm,val_pf,val_pm,val_pb,wall_seconds";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        let v = |f: fn(&EvalReport) -> f64| {
            self.val
                .as_ref()
                .map_or(String::new(), |r| format!("{:.6}", f(r)))
        };
        format!(
            "{},{:.6},{:.6},{:.6},{},{},{},{:.3}",
            self.epoch,
            self.train_loss,
            self.train.p_f,
            self.train.p_m,
            v(|r| r.p_f),
            v(|r| r.p_m),
            v(|r| r.p_b),
            self.wall_seconds
        )
    }
}

/// Optimizer loop over cluster minibatches.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub params: Params,
    pub opt: OptState,
    /// Tensors the optimizer may change; all when `None`.
    pub trainable: Option<Vec<bool>>,
    pub epoch: usize,
    pub updates: u64,
    pub phase: String,
}

impl Trainer {
    pub fn new(params: Params, cfg: TrainConfig) -> Self {
        let opt = OptState::new(cfg.optimizer, &params.tensors);
        Trainer {
            cfg,
            params,
            opt,
            trainable: None,
            epoch: 0,
            updates: 0,
            phase: "direct".into(),
        }
    }

    /// One optimizer update on one minibatch; returns its loss.
    pub fn step(&mut self, batch: &PaddedBatch) -> Result<f64, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x5EED_D20F);
        rng.set_stream(self.updates);
        let (loss, mut grads) =
            batch_gradients(&self.params, batch, &self.cfg, Some(rng.random()))?;
        if let Some(mask) = &self.trainable {
            for (g, &t) in grads.iter_mut().zip(mask) {
                if !t {
                    g.fill(0.0);
                }
            }
        }
        clip_global_norm(&mut grads, self.cfg.clip_norm);
        self.opt.step(
            &mut self.params.tensors,
            &grads,
            self.cfg.learning_rate(),
            self.trainable.as_deref(),
        );
        self.updates += 1;
        if !self.params.all_finite() {
            return Err(TrainError::NonFiniteLoss);
        }
        Ok(loss)
    }

    /// One pass over all minibatches in a seed-shuffled order. On
    /// divergence the parameters and optimizer state roll back to the start
    /// of the epoch.
    pub fn run_epoch(&mut self, batches: &[PaddedBatch]) -> Result<f64, TrainError> {
        let mut order: Vec<usize> = (0..batches.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(self.epoch as u64);
        order.shuffle(&mut rng);
        let snapshot = (self.params.clone(), self.opt.clone(), self.updates);
        let mut total = 0.0;
        for i in order {
            match self.step(&batches[i]) {
                Ok(l) => total += l,
                Err(
                    e @ (TrainError::NonFiniteLoss
                    | TrainError::Model(ModelError::NonFiniteState(_))),
                ) => {
                    log::error!(
                        "epoch {}: {e}; restoring the last good parameters",
                        self.epoch + 1
                    );
                    (self.params, self.opt, self.updates) = snapshot;
                    return Err(TrainError::Diverged {
                        epoch: self.epoch + 1,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        self.epoch += 1;
        Ok(total)
    }

    /// Runs `epochs` epochs, evaluating after each and handing the log to `on_epoch`.
    pub fn train(
        &mut self,
        train: &[PaddedBatch],
        val: &[PaddedBatch],
        epochs: usize,
        on_epoch: &mut dyn FnMut(&EpochLog, &Params) -> Result<(), TrainError>,
    ) -> Result<Vec<EpochLog>, TrainError> {
        if train.is_empty() {
            return Err(TrainError::EmptyData);
        }
        let mut logs = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let start = Instant::now();
            let loss = self.run_epoch(train)?;
            let feed = self.cfg.eval_feed();
            let tr = evaluate_batches(&self.params, train, feed, self.cfg.chunk_rows)?.report();
            let va = if val.is_empty() {
                None
            } else {
                Some(evaluate_batches(&self.params, val, feed, self.cfg.chunk_rows)?.report())
            };
            let log = EpochLog {
                phase: self.phase.clone(),
                epoch: self.epoch,
                train_loss: loss,
                train: tr,
                val: va,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            log::info!(
                "[{}] epoch {}: loss {:.4}, p_f {:.4}, p_m {:.4}",
                log.phase,
                log.epoch,
                log.train_loss,
                log.train.p_f,
                log.train.p_m
            );
            on_epoch(&log, &self.params)?;
            logs.push(log);
        }
        Ok(logs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_rows() {
        assert_eq!(chunk_ranges(5, 2), vec![0..2, 2..4, 4..5]);
        assert_eq!(chunk_ranges(0, 3), Vec::<Range<usize>>::new());
    }

    #[test]
    fn csv_row_matches_header_width() {
        let r = Counts::default().report();
        let log = EpochLog {
            phase: "direct".into(),
            epoch: 1,
            train_loss: 1.0,
            train: r.clone(),
            val: Some(r),
            wall_seconds: 0.5,
        };
        assert_eq!(
            log.csv_row().split(',').count(),
            METRICS_HEADER.split(',').count()
        );
    }
}
