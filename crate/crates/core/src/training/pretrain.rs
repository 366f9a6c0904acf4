//! Autoencoder pretraining: one identity model per side, combined into a
//! translator whose bridge is then trained between the two latent spaces.

use super::trainer::{batches_for, EpochLog, Trainer};
use super::{TrainConfig, TrainError};
use crate::pipeline::EncodedPair;
use crate::treelstm::{ModelConfig, ModelError, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Input,
    Output,
}

/// Pairs whose target equals their source tree.
pub fn autoencoder_pairs(pairs: &[EncodedPair], side: Side) -> Vec<EncodedPair> {
    pairs
        .iter()
        .map(|p| {
            let t = match side {
                Side::Input => &p.input,
                Side::Output => &p.output,
            };
            EncodedPair {
                id: p.id.clone(),
                input: t.clone(),
                output: t.clone(),
            }
        })
        .collect()
}

fn encoder_tensor(name: &str) -> bool {
    name == "embed_in" || name.starts_with("enc")
}

fn decoder_tensor(name: &str) -> bool {
    name == "embed_out" || name.starts_with("dec") || name.starts_with("proj.")
}

/// Trainable mask selecting only bridge tensors.
pub fn bridge_only(p: &Params) -> Vec<bool> {
    p.layout
        .names
        .iter()
        .map(|n| n.starts_with("bridge"))
        .collect()
}

/// Encoder of `input_ae`, decoder of `output_ae`, freshly initialized bridge.
pub fn combine(
    input_ae: &Params,
    output_ae: &Params,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<Params, ModelError> {
    let mut p = Params::init(cfg, seed)?;
    for (i, name) in p.layout.names.clone().iter().enumerate() {
        let src = if encoder_tensor(name) {
            input_ae
        } else if decoder_tensor(name) {
            output_ae
        } else {
            continue;
        };
        let j = src
            .layout
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ModelError::ShapeMismatch(format!("autoencoder lacks tensor {name}")))?;
        if src.tensors[j].dim() != p.tensors[i].dim() {
            return Err(ModelError::ShapeMismatch(format!(
                "tensor {name} differs in shape"
            )));
        }
        p.tensors[i] = src.tensors[j].clone();
    }
    Ok(p)
}

type OnEpoch<'a> = &'a mut dyn FnMut(&EpochLog, &Params) -> Result<(), TrainError>;

#[allow(clippy::too_many_arguments)]
fn train_phase(
    phase: &str,
    params: Params,
    trainable: Option<Vec<bool>>,
    train: &[EncodedPair],
    val: &[EncodedPair],
    cfg: &TrainConfig,
    epochs: usize,
    epoch_offset: usize,
    on_epoch: OnEpoch<'_>,
) -> Result<(Params, Vec<EpochLog>), TrainError> {
    let tb = batches_for(train, cfg.cluster_steps)?;
    let vb = batches_for(val, cfg.cluster_steps)?;
    let mut t = Trainer::new(params, cfg.clone());
    t.phase = phase.to_string();
    t.trainable = trainable;
    let mut wrapped = |log: &EpochLog, p: &Params| {
        let mut l = log.clone();
        l.epoch += epoch_offset;
        on_epoch(&l, p)
    };
    let mut logs = t.train(&tb, &vb, epochs, &mut wrapped)?;
    for l in &mut logs {
        l.epoch += epoch_offset;
    }
    Ok((t.params, logs))
}

/// Input autoencoder, output autoencoder, then bridge training on the real
/// pairs (all tensors trainable unless `freeze_pretrained`).
pub fn pretrain_autoencoders(
    train: &[EncodedPair],
    val: &[EncodedPair],
    vocab_in: usize,
    vocab_out: usize,
    cfg: &TrainConfig,
    on_epoch: OnEpoch<'_>,
) -> Result<(Params, Vec<EpochLog>), TrainError> {
    let mut logs = Vec::new();
    let in_cfg = cfg.model_config(vocab_in, vocab_in);
    let out_cfg = cfg.model_config(vocab_out, vocab_out);
    let (in_ae, l) = train_phase(
        "input-ae",
        Params::init(&in_cfg, cfg.seed)?,
        None,
        &autoencoder_pairs(train, Side::Input),
        &autoencoder_pairs(val, Side::Input),
        cfg,
        cfg.pretrain_epochs,
        0,
        on_epoch,
    )?;
    logs.extend(l);
    let (out_ae, l) = train_phase(
        "output-ae",
        Params::init(&out_cfg, cfg.seed.wrapping_add(1))?,
        None,
        &autoencoder_pairs(train, Side::Output),
        &autoencoder_pairs(val, Side::Output),
        cfg,
        cfg.pretrain_epochs,
        logs.len(),
        on_epoch,
    )?;
    logs.extend(l);
    let combined = combine(
        &in_ae,
        &out_ae,
        &cfg.model_config(vocab_in, vocab_out),
        cfg.seed.wrapping_add(2),
    )?;
    let mask = cfg.freeze_pretrained.then(|| bridge_only(&combined));
    let (p, l) = train_phase(
        "bridge",
        combined,
        mask,
        train,
        val,
        cfg,
        cfg.epochs,
        logs.len(),
        on_epoch,
    )?;
    logs.extend(l);
    Ok((p, logs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_copies_sides_bit_exactly() {
        let cfg = ModelConfig::new(5, 7, 3);
        let a = Params::init(&ModelConfig::new(5, 5, 3), 1).unwrap();
        let b = Params::init(&ModelConfig::new(7, 7, 3), 2).unwrap();
        let c = combine(&a, &b, &cfg, 3).unwrap();
        for (i, n) in c.layout.names.iter().enumerate() {
            let from =
                |p: &Params| p.tensors[p.layout.names.iter().position(|m| m == n).unwrap()].clone();
            if encoder_tensor(n) {
                assert_eq!(c.tensors[i], from(&a), "{n}");
            } else if decoder_tensor(n) {
                assert_eq!(c.tensors[i], from(&b), "{n}");
            } else {
                assert!(n.starts_with("bridge"));
            }
        }
        assert_eq!(bridge_only(&c).iter().filter(|&&b| b).count(), 4);
    }

    #[test]
    fn autoencoder_target_is_source() {
        use crate::tree::BinTree;
        let p = EncodedPair {
            id: "a".into(),
            input: BinTree::leaf(3),
            output: BinTree::leaf(4),
        };
        let ae = autoencoder_pairs(&[p], Side::Output);
        assert_eq!(ae[0].input, ae[0].output);
        assert_eq!(ae[0].input, BinTree::leaf(4));
    }
}
