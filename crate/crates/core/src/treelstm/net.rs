//! Batched forward and reverse passes. Every member of a batch shares the
//! same input and output hull, so each hull position is one small matrix
//! product over the batch rows.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::RngExt;

use super::params::{BridgeMode, Params};
use super::ModelError;
use crate::pipeline::{PaddedTree, INTERNAL};
use crate::topology::Shape;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Values and swap flags of a batch laid out position-major.
#[derive(Debug, Clone)]
pub struct HullBatch {
    pub shape: Shape,
    /// `values[pos][row]`
    pub values: Vec<Vec<usize>>,
    /// `swaps[pos][row]`
    pub swaps: Vec<Vec<bool>>,
    pub rows: usize,
}

impl HullBatch {
    pub fn new(trees: &[&PaddedTree]) -> Result<Self, ModelError> {
        let first = trees
            .first()
            .ok_or_else(|| ModelError::ShapeMismatch("empty batch".into()))?;
        let hull = &first.hull;
        if trees.iter().any(|t| &t.hull != hull) {
            return Err(ModelError::ShapeMismatch(
                "batch members have different hulls".into(),
            ));
        }
        let n = hull.len();
        let values = (0..n)
            .map(|p| trees.iter().map(|t| t.values[p] as usize).collect())
            .collect();
        let swaps = (0..n)
            .map(|p| trees.iter().map(|t| t.swaps[p]).collect())
            .collect();
        Ok(HullBatch {
            shape: Shape::new(hull),
            values,
            swaps,
            rows: trees.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }
}

/// Inverted dropout on layer inputs.
pub struct Dropout<'a, R: rand::Rng> {
    pub rate: f64,
    pub rng: &'a mut R,
}

fn dropout_mask<R: rand::Rng>(
    d: &mut Option<Dropout<'_, R>>,
    rows: usize,
    cols: usize,
) -> Option<Array2<f64>> {
    let d = d.as_mut()?;
    if d.rate <= 0.0 {
        return None;
    }
    let keep = 1.0 - d.rate;
    let scale = 1.0 / keep;
    Some(Array2::from_shape_simple_fn((rows, cols), || {
        if d.rng.random_bool(keep) {
            scale
        } else {
            0.0
        }
    }))
}

fn add_bias(z: &mut Array2<f64>, b: &Array2<f64>) {
    *z += &b.row(0);
}

fn accumulate_rows_into(dst: &mut Array2<f64>, rows: &[usize], src: &Array2<f64>) {
    for (k, &r) in rows.iter().enumerate() {
        let mut row = dst.row_mut(r);
        row += &src.row(k);
    }
}

fn bias_grad(g: &mut Array2<f64>, dz: &Array2<f64>) {
    let sum = dz.sum_axis(Axis(0));
    let mut row = g.row_mut(0);
    row += &sum;
}

/// `g += aᵀ b`
fn add_at_b(g: &mut Array2<f64>, a: &ArrayView2<f64>, b: &ArrayView2<f64>) {
    ndarray::linalg::general_mat_mul(1.0, &a.t(), b, 1.0, g);
}

// ---------------------------------------------------------------- encoder

#[derive(Debug, Clone)]
struct EncLayer {
    x: Vec<Array2<f64>>,
    drop: Vec<Option<Array2<f64>>>,
    /// Activated gates `[i, f_left, f_right, o, u]`.
    gates: Vec<Array2<f64>>,
    /// Child states in original (unswapped) orientation.
    hl: Vec<Option<Array2<f64>>>,
    hr: Vec<Option<Array2<f64>>>,
    cl: Vec<Option<Array2<f64>>>,
    cr: Vec<Option<Array2<f64>>>,
    c: Vec<Array2<f64>>,
    tc: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
}

/// Recorded encoder pass.
#[derive(Debug, Clone)]
pub struct EncoderPass {
    layers: Vec<EncLayer>,
}

/// Per-row child states with the stored swap undone: rows whose node was
/// swapped take their original-left child from the stored right.
fn orient(a: &Array2<f64>, b: &Array2<f64>, swaps: &[bool]) -> (Array2<f64>, Array2<f64>) {
    let mut l = a.clone();
    let mut r = b.clone();
    for (row, &sw) in swaps.iter().enumerate() {
        if sw {
            l.row_mut(row).assign(&b.row(row));
            r.row_mut(row).assign(&a.row(row));
        }
    }
    (l, r)
}

/// Child contribution to the encoder pre-activation of one node:
/// `U_L hL + U_R hR`, or `U_R hL + U_L hR` when the children were swapped.
pub fn combine_children(
    hl: &ndarray::Array1<f64>,
    hr: &ndarray::Array1<f64>,
    swap: bool,
    ul: &Array2<f64>,
    ur: &Array2<f64>,
) -> ndarray::Array1<f64> {
    if swap {
        hl.dot(ur) + hr.dot(ul)
    } else {
        hl.dot(ul) + hr.dot(ur)
    }
}

/// Reverse of [`orient`] for gradients: returns the stored-left and stored-right parts.
fn unorient(dl: &Array2<f64>, dr: &Array2<f64>, swaps: &[bool]) -> (Array2<f64>, Array2<f64>) {
    orient(dl, dr, swaps)
}

/// Zeroes the rows whose node carries a leaf value. Hull positions below a
/// leaf are padding and must not reach the encoding.
fn cut_leaf_rows(pair: (Array2<f64>, Array2<f64>), values: &[usize]) -> (Array2<f64>, Array2<f64>) {
    let (mut a, mut b) = pair;
    for (row, &v) in values.iter().enumerate() {
        if v != INTERNAL as usize {
            a.row_mut(row).fill(0.0);
            b.row_mut(row).fill(0.0);
        }
    }
    (a, b)
}

impl EncoderPass {
    pub fn forward<R: rand::Rng>(
        p: &Params,
        batch: &HullBatch,
        mut dropout: Option<Dropout<'_, R>>,
    ) -> Result<Self, ModelError> {
        let d = p.config.enc_state;
        let n = batch.len();
        let rows = batch.rows;
        let mut layers: Vec<EncLayer> = Vec::with_capacity(p.config.layers);
        for (l, idx) in p.layout.enc.iter().enumerate() {
            let (w, ul, ur, b) = (
                &p.tensors[idx.w],
                &p.tensors[idx.ul],
                &p.tensors[idx.ur],
                &p.tensors[idx.b],
            );
            let mut layer = EncLayer {
                x: vec![Array2::zeros((0, 0)); n],
                drop: vec![None; n],
                gates: vec![Array2::zeros((0, 0)); n],
                hl: vec![None; n],
                hr: vec![None; n],
                cl: vec![None; n],
                cr: vec![None; n],
                c: vec![Array2::zeros((0, 0)); n],
                tc: vec![Array2::zeros((0, 0)); n],
                h: vec![Array2::zeros((0, 0)); n],
            };
            for pos in (0..n).rev() {
                let mut x = if l == 0 {
                    p.tensors[p.layout.emb_in].select(Axis(0), &batch.values[pos])
                } else {
                    layers[l - 1].h[pos].clone()
                };
                let mask = dropout_mask(&mut dropout, rows, x.ncols());
                if let Some(m) = &mask {
                    x *= m;
                }
                let mut z = x.dot(w);
                add_bias(&mut z, b);
                if let Some((lc, rc)) = batch.shape.children[pos] {
                    let vals = &batch.values[pos];
                    let (hl, hr) =
                        cut_leaf_rows(orient(&layer.h[lc], &layer.h[rc], &batch.swaps[pos]), vals);
                    let (cl, cr) =
                        cut_leaf_rows(orient(&layer.c[lc], &layer.c[rc], &batch.swaps[pos]), vals);
                    ndarray::linalg::general_mat_mul(1.0, &hl, ul, 1.0, &mut z);
                    ndarray::linalg::general_mat_mul(1.0, &hr, ur, 1.0, &mut z);
                    layer.hl[pos] = Some(hl);
                    layer.hr[pos] = Some(hr);
                    layer.cl[pos] = Some(cl);
                    layer.cr[pos] = Some(cr);
                }
                z.slice_mut(s![.., 0..4 * d]).mapv_inplace(sigmoid);
                z.slice_mut(s![.., 4 * d..]).mapv_inplace(f64::tanh);
                let gi = z.slice(s![.., 0..d]);
                let gu = z.slice(s![.., 4 * d..5 * d]);
                let mut c = &gi * &gu;
                if let (Some(cl), Some(cr)) = (&layer.cl[pos], &layer.cr[pos]) {
                    c += &(&z.slice(s![.., d..2 * d]) * cl);
                    c += &(&z.slice(s![.., 2 * d..3 * d]) * cr);
                }
                let tc = c.mapv(f64::tanh);
                let h = &z.slice(s![.., 3 * d..4 * d]) * &tc;
                layer.x[pos] = x;
                layer.drop[pos] = mask;
                layer.gates[pos] = z;
                layer.c[pos] = c;
                layer.tc[pos] = tc;
                layer.h[pos] = h;
            }
            if !layer.h[0].iter().all(|v| v.is_finite()) {
                return Err(ModelError::NonFiniteState("encoder"));
            }
            layers.push(layer);
        }
        Ok(EncoderPass { layers })
    }

    /// Root `(h, c)` per layer.
    pub fn root_states(&self) -> Vec<(Array2<f64>, Array2<f64>)> {
        self.layers
            .iter()
            .map(|l| (l.h[0].clone(), l.c[0].clone()))
            .collect()
    }

    /// Reverse pass from gradients at the root states.
    pub fn backward(
        &self,
        p: &Params,
        batch: &HullBatch,
        d_root: &[(Array2<f64>, Array2<f64>)],
        grads: &mut [Array2<f64>],
    ) {
        let d = p.config.enc_state;
        let n = batch.len();
        let nl = self.layers.len();
        // Gradient w.r.t. each layer's output h, filled by the layer above.
        let mut dh_from_above: Vec<Array2<f64>> = Vec::new();
        for l in (0..nl).rev() {
            let layer = &self.layers[l];
            let idx = p.layout.enc[l];
            let mut dh: Vec<Array2<f64>> = if l + 1 == nl {
                vec![Array2::zeros((batch.rows, d)); n]
            } else {
                std::mem::take(&mut dh_from_above)
            };
            let mut dc: Vec<Array2<f64>> = vec![Array2::zeros((batch.rows, d)); n];
            dh[0] += &d_root[l].0;
            dc[0] += &d_root[l].1;
            let mut dx_all: Vec<Array2<f64>> = if l > 0 {
                vec![Array2::zeros((batch.rows, d)); n]
            } else {
                Vec::new()
            };
            for pos in 0..n {
                let g = &layer.gates[pos];
                let gi = g.slice(s![.., 0..d]);
                let gfl = g.slice(s![.., d..2 * d]);
                let gfr = g.slice(s![.., 2 * d..3 * d]);
                let go = g.slice(s![.., 3 * d..4 * d]);
                let gu = g.slice(s![.., 4 * d..5 * d]);
                let tc = &layer.tc[pos];
                let dhp = &dh[pos];
                let mut dct = dc[pos].clone();
                Zip::from(&mut dct)
                    .and(dhp)
                    .and(&go)
                    .and(tc)
                    .for_each(|dc, &dh, &o, &t| *dc += dh * o * (1.0 - t * t));
                let mut dz = Array2::<f64>::zeros((batch.rows, 5 * d));
                Zip::from(dz.slice_mut(s![.., 0..d]))
                    .and(&dct)
                    .and(&gu)
                    .and(&gi)
                    .for_each(|z, &dc, &u, &i| *z = dc * u * i * (1.0 - i));
                Zip::from(dz.slice_mut(s![.., 3 * d..4 * d]))
                    .and(dhp)
                    .and(tc)
                    .and(&go)
                    .for_each(|z, &dh, &t, &o| *z = dh * t * o * (1.0 - o));
                Zip::from(dz.slice_mut(s![.., 4 * d..5 * d]))
                    .and(&dct)
                    .and(&gi)
                    .and(&gu)
                    .for_each(|z, &dc, &i, &u| *z = dc * i * (1.0 - u * u));
                if let Some((lc, rc)) = batch.shape.children[pos] {
                    let (cl, cr) = (
                        layer.cl[pos].as_ref().unwrap(),
                        layer.cr[pos].as_ref().unwrap(),
                    );
                    Zip::from(dz.slice_mut(s![.., d..2 * d]))
                        .and(&dct)
                        .and(cl)
                        .and(&gfl)
                        .for_each(|z, &dc, &c, &f| *z = dc * c * f * (1.0 - f));
                    Zip::from(dz.slice_mut(s![.., 2 * d..3 * d]))
                        .and(&dct)
                        .and(cr)
                        .and(&gfr)
                        .for_each(|z, &dc, &c, &f| *z = dc * c * f * (1.0 - f));
                    let (hl, hr) = (
                        layer.hl[pos].as_ref().unwrap(),
                        layer.hr[pos].as_ref().unwrap(),
                    );
                    add_at_b(&mut grads[idx.ul], &hl.view(), &dz.view());
                    add_at_b(&mut grads[idx.ur], &hr.view(), &dz.view());
                    let dhl = dz.dot(&p.tensors[idx.ul].t());
                    let dhr = dz.dot(&p.tensors[idx.ur].t());
                    let dcl = &dct * &gfl;
                    let dcr = &dct * &gfr;
                    let vals = &batch.values[pos];
                    let (sl, sr) = cut_leaf_rows(unorient(&dhl, &dhr, &batch.swaps[pos]), vals);
                    dh[lc] += &sl;
                    dh[rc] += &sr;
                    let (sl, sr) = cut_leaf_rows(unorient(&dcl, &dcr, &batch.swaps[pos]), vals);
                    dc[lc] += &sl;
                    dc[rc] += &sr;
                }
                add_at_b(&mut grads[idx.w], &layer.x[pos].view(), &dz.view());
                bias_grad(&mut grads[idx.b], &dz);
                let mut dx = dz.dot(&p.tensors[idx.w].t());
                if let Some(m) = &layer.drop[pos] {
                    dx *= m;
                }
                if l == 0 {
                    accumulate_rows_into(&mut grads[p.layout.emb_in], &batch.values[pos], &dx);
                } else {
                    dx_all[pos] = dx;
                }
            }
            dh_from_above = dx_all;
        }
    }
}

// ---------------------------------------------------------------- bridge

#[derive(Debug, Clone)]
pub struct BridgePass {
    inputs: Vec<(Array2<f64>, Array2<f64>)>,
    outputs: Vec<(Array2<f64>, Array2<f64>)>,
}

impl BridgePass {
    pub fn forward(p: &Params, states: Vec<(Array2<f64>, Array2<f64>)>) -> Self {
        let mode = p.config.bridge;
        if mode == BridgeMode::None {
            return BridgePass {
                outputs: states.clone(),
                inputs: states,
            };
        }
        let outputs = states
            .iter()
            .zip(&p.layout.bridge)
            .map(|((h, c), idx)| {
                let map = |x: &Array2<f64>, w: usize, b: usize| {
                    let mut z = x.dot(&p.tensors[w]);
                    add_bias(&mut z, &p.tensors[b]);
                    if mode == BridgeMode::Tanh {
                        z.mapv_inplace(f64::tanh);
                    }
                    z
                };
                (map(h, idx.wh, idx.bh), map(c, idx.wc, idx.bc))
            })
            .collect();
        BridgePass {
            inputs: states,
            outputs,
        }
    }

    pub fn outputs(&self) -> &[(Array2<f64>, Array2<f64>)] {
        &self.outputs
    }

    /// Gradients at the bridge inputs.
    pub fn backward(
        &self,
        p: &Params,
        d_out: &[(Array2<f64>, Array2<f64>)],
        grads: &mut [Array2<f64>],
    ) -> Vec<(Array2<f64>, Array2<f64>)> {
        let mode = p.config.bridge;
        if mode == BridgeMode::None {
            return d_out.to_vec();
        }
        let mut out = Vec::with_capacity(d_out.len());
        for (l, idx) in p.layout.bridge.iter().enumerate() {
            let mut back =
                |dy: &Array2<f64>, x: &Array2<f64>, y: &Array2<f64>, w: usize, b: usize| {
                    let mut dz = dy.clone();
                    if mode == BridgeMode::Tanh {
                        Zip::from(&mut dz)
                            .and(y)
                            .for_each(|g, &y| *g *= 1.0 - y * y);
                    }
                    add_at_b(&mut grads[w], &x.view(), &dz.view());
                    bias_grad(&mut grads[b], &dz);
                    dz.dot(&p.tensors[w].t())
                };
            let dh = back(
                &d_out[l].0,
                &self.inputs[l].0,
                &self.outputs[l].0,
                idx.wh,
                idx.bh,
            );
            let dc = back(
                &d_out[l].1,
                &self.inputs[l].1,
                &self.outputs[l].1,
                idx.wc,
                idx.bc,
            );
            out.push((dh, dc));
        }
        out
    }
}

// ---------------------------------------------------------------- decoder

/// Where the decoder takes the parent value fed to each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feed {
    /// Ground-truth parent values (training).
    Teacher,
    /// Argmax of the parent's own prediction.
    Free,
}

#[derive(Debug, Clone)]
struct DecStep {
    x: Array2<f64>,
    drop: Option<Array2<f64>>,
    /// Activated gates `[i, f, o, u]`.
    gates: Array2<f64>,
    c: Array2<f64>,
    tc: Array2<f64>,
    h: Array2<f64>,
}

/// Recorded decoder pass.
#[derive(Debug, Clone)]
pub struct DecoderPass {
    /// `steps[pos][layer]`
    steps: Vec<Vec<DecStep>>,
    /// Parent value fed at each position (BOS at the root), per row.
    fed: Vec<Vec<usize>>,
    /// Row indices using the left and right branch cell at each position.
    branch_rows: Vec<[Vec<usize>; 2]>,
    /// Hidden layer of the output projection.
    proj: Vec<Array2<f64>>,
    pub logits: Vec<Array2<f64>>,
    /// Argmax of the logits, `preds[pos][row]`.
    pub preds: Vec<Vec<u32>>,
}

pub(crate) fn argmax_row(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// One LSTM step for the rows in `rows`, using branch cell `branch` of `layer`.
#[allow(clippy::too_many_arguments)]
fn dec_cell_rows(
    p: &Params,
    layer: usize,
    branch: usize,
    rows: &[usize],
    x: &Array2<f64>,
    hp: &ArrayView2<f64>,
    cp: &ArrayView2<f64>,
    gates: &mut Array2<f64>,
    c: &mut Array2<f64>,
) {
    if rows.is_empty() {
        return;
    }
    let d = p.config.dec_state;
    let idx = p.layout.dec[layer][branch];
    let all = rows.len() == x.nrows();
    let (xs, hs, cs) = if all {
        (x.clone(), hp.to_owned(), cp.to_owned())
    } else {
        (
            x.select(Axis(0), rows),
            hp.select(Axis(0), rows),
            cp.select(Axis(0), rows),
        )
    };
    let mut z = xs.dot(&p.tensors[idx.w]);
    ndarray::linalg::general_mat_mul(1.0, &hs, &p.tensors[idx.u], 1.0, &mut z);
    add_bias(&mut z, &p.tensors[idx.b]);
    z.slice_mut(s![.., 0..3 * d]).mapv_inplace(sigmoid);
    z.slice_mut(s![.., 3 * d..]).mapv_inplace(f64::tanh);
    let mut cn = &z.slice(s![.., 0..d]) * &z.slice(s![.., 3 * d..4 * d]);
    cn += &(&z.slice(s![.., d..2 * d]) * &cs);
    for (k, &r) in rows.iter().enumerate() {
        gates.row_mut(r).assign(&z.row(k));
        c.row_mut(r).assign(&cn.row(k));
    }
}

impl DecoderPass {
    pub fn forward<R: rand::Rng>(
        p: &Params,
        root: &[(Array2<f64>, Array2<f64>)],
        batch: &HullBatch,
        feed: Feed,
        mut dropout: Option<Dropout<'_, R>>,
    ) -> Result<Self, ModelError> {
        let d = p.config.dec_state;
        let n = batch.len();
        let rows = batch.rows;
        let nl = p.config.layers;
        let mut steps: Vec<Vec<DecStep>> = Vec::with_capacity(n);
        let mut fed = Vec::with_capacity(n);
        let mut branch_rows = Vec::with_capacity(n);
        let mut proj = Vec::with_capacity(n);
        let mut logits = Vec::with_capacity(n);
        let mut preds: Vec<Vec<u32>> = Vec::with_capacity(n);
        for pos in 0..n {
            let (parent_vals, branches): (Vec<usize>, [Vec<usize>; 2]) =
                match batch.shape.parent[pos] {
                    None => (vec![p.bos(); rows], [(0..rows).collect(), Vec::new()]),
                    Some((par, is_right)) => {
                        let vals = match feed {
                            Feed::Teacher => batch.values[par].clone(),
                            Feed::Free => preds[par].iter().map(|&v| v as usize).collect(),
                        };
                        let mut br = [Vec::new(), Vec::new()];
                        for r in 0..rows {
                            br[usize::from(is_right != batch.swaps[par][r])].push(r);
                        }
                        (vals, br)
                    }
                };
            let mut layer_steps: Vec<DecStep> = Vec::with_capacity(nl);
            for l in 0..nl {
                let mut x = if l == 0 {
                    p.tensors[p.layout.emb_out].select(Axis(0), &parent_vals)
                } else {
                    layer_steps[l - 1].h.clone()
                };
                let drop = dropout_mask(&mut dropout, rows, x.ncols());
                if let Some(m) = &drop {
                    x *= m;
                }
                let (hp, cp) = match batch.shape.parent[pos] {
                    None => (root[l].0.view(), root[l].1.view()),
                    Some((par, _)) => (steps[par][l].h.view(), steps[par][l].c.view()),
                };
                let mut gates = Array2::zeros((rows, 4 * d));
                let mut c = Array2::zeros((rows, d));
                for (branch, br) in branches.iter().enumerate() {
                    dec_cell_rows(p, l, branch, br, &x, &hp, &cp, &mut gates, &mut c);
                }
                let tc = c.mapv(f64::tanh);
                let h = &gates.slice(s![.., 2 * d..3 * d]) * &tc;
                layer_steps.push(DecStep {
                    x,
                    drop,
                    gates,
                    c,
                    tc,
                    h,
                });
            }
            let top = &layer_steps[nl - 1].h;
            let mut a = top.dot(&p.tensors[p.layout.w1]);
            add_bias(&mut a, &p.tensors[p.layout.b1]);
            a.mapv_inplace(f64::tanh);
            let mut lg = a.dot(&p.tensors[p.layout.w2]);
            add_bias(&mut lg, &p.tensors[p.layout.b2]);
            if !lg.iter().all(|v| v.is_finite()) {
                return Err(ModelError::NonFiniteState("decoder"));
            }
            preds.push(
                lg.rows()
                    .into_iter()
                    .map(|r| argmax_row(r) as u32)
                    .collect(),
            );
            steps.push(layer_steps);
            fed.push(parent_vals);
            branch_rows.push(branches);
            proj.push(a);
            logits.push(lg);
        }
        Ok(DecoderPass {
            steps,
            fed,
            branch_rows,
            proj,
            logits,
            preds,
        })
    }

    /// Reverse pass from logit gradients; returns gradients at the root states.
    pub fn backward(
        &self,
        p: &Params,
        batch: &HullBatch,
        root: &[(Array2<f64>, Array2<f64>)],
        dlogits: &[Array2<f64>],
        grads: &mut [Array2<f64>],
    ) -> Vec<(Array2<f64>, Array2<f64>)> {
        let d = p.config.dec_state;
        let n = batch.len();
        let rows = batch.rows;
        let nl = p.config.layers;
        let mut dh: Vec<Vec<Array2<f64>>> = vec![vec![Array2::zeros((rows, d)); nl]; n];
        let mut dc: Vec<Vec<Array2<f64>>> = vec![vec![Array2::zeros((rows, d)); nl]; n];
        let mut d_root: Vec<(Array2<f64>, Array2<f64>)> =
            vec![(Array2::zeros((rows, d)), Array2::zeros((rows, d))); nl];
        for pos in (0..n).rev() {
            let dl = &dlogits[pos];
            let a = &self.proj[pos];
            add_at_b(&mut grads[p.layout.w2], &a.view(), &dl.view());
            bias_grad(&mut grads[p.layout.b2], dl);
            let mut da = dl.dot(&p.tensors[p.layout.w2].t());
            Zip::from(&mut da)
                .and(a)
                .for_each(|g, &a| *g *= 1.0 - a * a);
            let top = &self.steps[pos][nl - 1].h;
            add_at_b(&mut grads[p.layout.w1], &top.view(), &da.view());
            bias_grad(&mut grads[p.layout.b1], &da);
            dh[pos][nl - 1] += &da.dot(&p.tensors[p.layout.w1].t());

            for l in (0..nl).rev() {
                let st = &self.steps[pos][l];
                let g = &st.gates;
                let gi = g.slice(s![.., 0..d]);
                let gf = g.slice(s![.., d..2 * d]);
                let go = g.slice(s![.., 2 * d..3 * d]);
                let gu = g.slice(s![.., 3 * d..4 * d]);
                let dhq = dh[pos][l].clone();
                let mut dct = dc[pos][l].clone();
                Zip::from(&mut dct)
                    .and(&dhq)
                    .and(&go)
                    .and(&st.tc)
                    .for_each(|dc, &dh, &o, &t| *dc += dh * o * (1.0 - t * t));
                let (hp, cp) = match batch.shape.parent[pos] {
                    None => (root[l].0.view(), root[l].1.view()),
                    Some((par, _)) => (self.steps[par][l].h.view(), self.steps[par][l].c.view()),
                };
                let mut dz = Array2::<f64>::zeros((rows, 4 * d));
                Zip::from(dz.slice_mut(s![.., 0..d]))
                    .and(&dct)
                    .and(&gu)
                    .and(&gi)
                    .for_each(|z, &dc, &u, &i| *z = dc * u * i * (1.0 - i));
                Zip::from(dz.slice_mut(s![.., d..2 * d]))
                    .and(&dct)
                    .and(&cp)
                    .and(&gf)
                    .for_each(|z, &dc, &c, &f| *z = dc * c * f * (1.0 - f));
                Zip::from(dz.slice_mut(s![.., 2 * d..3 * d]))
                    .and(&dhq)
                    .and(&st.tc)
                    .and(&go)
                    .for_each(|z, &dh, &t, &o| *z = dh * t * o * (1.0 - o));
                Zip::from(dz.slice_mut(s![.., 3 * d..4 * d]))
                    .and(&dct)
                    .and(&gi)
                    .and(&gu)
                    .for_each(|z, &dc, &i, &u| *z = dc * i * (1.0 - u * u));
                let dcp = &dct * &gf;
                let mut dx = Array2::<f64>::zeros(st.x.raw_dim());
                let mut dhp = Array2::<f64>::zeros((rows, d));
                for (branch, br) in self.branch_rows[pos].iter().enumerate() {
                    if br.is_empty() {
                        continue;
                    }
                    let idx = p.layout.dec[l][branch];
                    let (dzs, xs, hs) = if br.len() == rows {
                        (dz.clone(), st.x.clone(), hp.to_owned())
                    } else {
                        (
                            dz.select(Axis(0), br),
                            st.x.select(Axis(0), br),
                            hp.select(Axis(0), br),
                        )
                    };
                    add_at_b(&mut grads[idx.w], &xs.view(), &dzs.view());
                    add_at_b(&mut grads[idx.u], &hs.view(), &dzs.view());
                    bias_grad(&mut grads[idx.b], &dzs);
                    let dxs = dzs.dot(&p.tensors[idx.w].t());
                    let dhs = dzs.dot(&p.tensors[idx.u].t());
                    for (k, &r) in br.iter().enumerate() {
                        dx.row_mut(r).assign(&dxs.row(k));
                        dhp.row_mut(r).assign(&dhs.row(k));
                    }
                }
                if let Some(m) = &st.drop {
                    dx *= m;
                }
                match batch.shape.parent[pos] {
                    None => {
                        d_root[l].0 += &dhp;
                        d_root[l].1 += &dcp;
                    }
                    Some((par, _)) => {
                        dh[par][l] += &dhp;
                        dc[par][l] += &dcp;
                    }
                }
                if l == 0 {
                    accumulate_rows_into(&mut grads[p.layout.emb_out], &self.fed[pos], &dx);
                } else {
                    dh[pos][l - 1] += &dx;
                }
            }
        }
        d_root
    }
}

// ---------------------------------------------------------------- whole model

/// Encoder, bridge and decoder pass over one batch.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub input: HullBatch,
    pub output: HullBatch,
    pub encoder: EncoderPass,
    pub bridge: BridgePass,
    pub decoder: DecoderPass,
}

impl ForwardPass {
    pub fn run<R: rand::Rng>(
        p: &Params,
        inputs: &[&PaddedTree],
        outputs: &[&PaddedTree],
        feed: Feed,
        dropout: Option<(f64, &mut R)>,
    ) -> Result<Self, ModelError> {
        if inputs.len() != outputs.len() {
            return Err(ModelError::ShapeMismatch(
                "input and output member counts differ".into(),
            ));
        }
        let input = HullBatch::new(inputs)?;
        let output = HullBatch::new(outputs)?;
        let (enc_drop, dec_drop) = match dropout {
            Some((rate, rng)) => {
                // Split into two streams so encoder and decoder draws do not interleave.
                let mut enc_rng: rand_chacha::ChaCha8Rng =
                    rand::SeedableRng::seed_from_u64(rng.random::<u64>());
                let mut dec_rng: rand_chacha::ChaCha8Rng =
                    rand::SeedableRng::seed_from_u64(rng.random::<u64>());
                let e = EncoderPass::forward(
                    p,
                    &input,
                    Some(Dropout {
                        rate,
                        rng: &mut enc_rng,
                    }),
                )?;
                let b = BridgePass::forward(p, e.root_states());
                let dcd = DecoderPass::forward(
                    p,
                    b.outputs(),
                    &output,
                    feed,
                    Some(Dropout {
                        rate,
                        rng: &mut dec_rng,
                    }),
                )?;
                return Ok(ForwardPass {
                    input,
                    output,
                    encoder: e,
                    bridge: b,
                    decoder: dcd,
                });
            }
            None => (
                None::<Dropout<'_, rand_chacha::ChaCha8Rng>>,
                None::<Dropout<'_, rand_chacha::ChaCha8Rng>>,
            ),
        };
        let encoder = EncoderPass::forward(p, &input, enc_drop)?;
        let bridge = BridgePass::forward(p, encoder.root_states());
        let decoder = DecoderPass::forward(p, bridge.outputs(), &output, feed, dec_drop)?;
        Ok(ForwardPass {
            input,
            output,
            encoder,
            bridge,
            decoder,
        })
    }

    /// Deterministic pass without dropout.
    pub fn eval(
        p: &Params,
        inputs: &[&PaddedTree],
        outputs: &[&PaddedTree],
        feed: Feed,
    ) -> Result<Self, ModelError> {
        Self::run::<rand_chacha::ChaCha8Rng>(p, inputs, outputs, feed, None)
    }

    pub fn backward(&self, p: &Params, dlogits: &[Array2<f64>]) -> Vec<Array2<f64>> {
        let mut grads = p.zeros_like();
        let d_bridge_out =
            self.decoder
                .backward(p, &self.output, self.bridge.outputs(), dlogits, &mut grads);
        let d_enc_root = self.bridge.backward(p, &d_bridge_out, &mut grads);
        self.encoder
            .backward(p, &self.input, &d_enc_root, &mut grads);
        grads
    }
}
