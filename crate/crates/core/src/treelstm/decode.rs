//! Greedy decoding of a single tree without a known output shape.

use ndarray::{s, Array2, Axis};

use super::net::{argmax_row, sigmoid, BridgePass, EncoderPass, HullBatch};
use super::{ModelError, Params};
use crate::pipeline::{pad_to, INTERNAL, UNK, Y_END};
use crate::topology::Topology;
use crate::tree::BinTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Node budget as a multiple of the input size.
    pub size_factor: usize,
    /// Lower bound on the node budget.
    pub min_nodes: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            size_factor: 2,
            min_nodes: 16,
        }
    }
}

struct Step {
    h: Vec<Array2<f64>>,
    c: Vec<Array2<f64>>,
    logits: Array2<f64>,
}

fn step(
    p: &Params,
    parent_val: usize,
    branch: usize,
    hp: &[Array2<f64>],
    cp: &[Array2<f64>],
) -> Step {
    let d = p.config.dec_state;
    let mut x = p.tensors[p.layout.emb_out].select(Axis(0), &[parent_val]);
    let mut hs = Vec::with_capacity(hp.len());
    let mut cs = Vec::with_capacity(hp.len());
    for l in 0..p.config.layers {
        let idx = p.layout.dec[l][branch];
        let mut z = x.dot(&p.tensors[idx.w]) + hp[l].dot(&p.tensors[idx.u]);
        z += &p.tensors[idx.b].row(0);
        z.slice_mut(s![.., 0..3 * d]).mapv_inplace(sigmoid);
        z.slice_mut(s![.., 3 * d..]).mapv_inplace(f64::tanh);
        let c = &z.slice(s![.., 0..d]) * &z.slice(s![.., 3 * d..4 * d])
            + &z.slice(s![.., d..2 * d]) * &cp[l];
        let h = &z.slice(s![.., 2 * d..3 * d]) * &c.mapv(f64::tanh);
        x = h.clone();
        hs.push(h);
        cs.push(c);
    }
    let mut a = x.dot(&p.tensors[p.layout.w1]);
    a += &p.tensors[p.layout.b1].row(0);
    a.mapv_inplace(f64::tanh);
    let mut logits = a.dot(&p.tensors[p.layout.w2]);
    logits += &p.tensors[p.layout.b2].row(0);
    Step {
        h: hs,
        c: cs,
        logits,
    }
}

/// Translates one encoded input tree. The output grows top-down: a node
/// predicted `INTERNAL` gets two children until the node budget is spent,
/// after which every new node is forced to its best non-`INTERNAL` value.
/// Generated trees carry no swap flags: the left and right cells already
/// produce children in their original order.
pub fn decode_greedy(
    p: &Params,
    input: &BinTree<u32>,
    opts: &DecodeOptions,
) -> Result<BinTree<u32>, ModelError> {
    let hull = Topology::of(input);
    let padded = pad_to(&hull, input).map_err(|e| ModelError::ShapeMismatch(e.to_string()))?;
    let batch = HullBatch::new(&[&padded])?;
    let enc = EncoderPass::forward::<rand_chacha::ChaCha8Rng>(p, &batch, None)?;
    let bridge = BridgePass::forward(p, enc.root_states());
    let (h0, c0): (Vec<_>, Vec<_>) = bridge.outputs().iter().cloned().unzip();
    let budget = (opts.size_factor * input.size()).max(opts.min_nodes);
    let mut used = 1usize;
    let tree = grow(p, p.bos(), 0, &h0, &c0, &mut used, budget)?;
    Ok(tree.unwrap_or(BinTree::Leaf(UNK)))
}

fn best_leaf(logits: &Array2<f64>) -> u32 {
    let row = logits.row(0);
    let mut best: Option<usize> = None;
    for (i, &v) in row.iter().enumerate() {
        if i == INTERNAL as usize || i == Y_END as usize {
            continue;
        }
        if best.is_none_or(|b| v > row[b]) {
            best = Some(i);
        }
    }
    best.map_or(UNK, |b| b as u32)
}

fn grow(
    p: &Params,
    parent_val: usize,
    branch: usize,
    hp: &[Array2<f64>],
    cp: &[Array2<f64>],
    used: &mut usize,
    budget: usize,
) -> Result<Option<BinTree<u32>>, ModelError> {
    let st = step(p, parent_val, branch, hp, cp);
    if !st.logits.iter().all(|v| v.is_finite()) {
        return Err(ModelError::NonFiniteState("decoder"));
    }
    let v = argmax_row(st.logits.row(0)) as u32;
    match v {
        Y_END => Ok(None),
        INTERNAL if *used + 2 <= budget => {
            *used += 2;
            let l = grow(p, INTERNAL as usize, 0, &st.h, &st.c, used, budget)?;
            let r = grow(p, INTERNAL as usize, 1, &st.h, &st.c, used, budget)?;
            Ok(match (l, r) {
                (Some(a), Some(b)) => Some(BinTree::node(a, b)),
                (Some(a), None) | (None, Some(a)) => Some(a),
                (None, None) => None,
            })
        }
        INTERNAL => Ok(Some(BinTree::Leaf(best_leaf(&st.logits)))),
        v => Ok(Some(BinTree::Leaf(v))),
    }
}
