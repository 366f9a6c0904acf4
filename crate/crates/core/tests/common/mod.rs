#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, RngExt};
use treetrans::clustering::{mask_hull, Clustering, Mask, Schedules};
use treetrans::parser::ParserOptions;
use treetrans::pipeline::{
    gen_synthetic_corpus, pad_to, parse_pairs, PaddedTree, VocabOptions, Vocabs, FIRST_TOKEN,
};
use treetrans::topology::{hull, Topology};
use treetrans::training::pair_masks;
use treetrans::tree::BinTree;
use treetrans::treelstm::{Feed, ForwardPass, ModelError, Params};

/// Random shape with `leaves` leaves and values drawn from the content range.
pub fn random_tree(rng: &mut impl Rng, leaves: usize, vocab: u32) -> BinTree<u32> {
    if leaves <= 1 {
        return BinTree::leaf(rng.random_range(FIRST_TOKEN..vocab));
    }
    let k = rng.random_range(1..leaves);
    BinTree::node(
        random_tree(rng, k, vocab),
        random_tree(rng, leaves - k, vocab),
    )
}

/// Sets each internal swap flag with probability 1/2.
pub fn random_swaps(rng: &mut impl Rng, t: &BinTree<u32>) -> BinTree<u32> {
    match t {
        BinTree::Leaf(v) => BinTree::Leaf(*v),
        BinTree::Node { left, right, .. } => BinTree::Node {
            left: Box::new(random_swaps(rng, left)),
            right: Box::new(random_swaps(rng, right)),
            swap: rng.random_bool(0.5),
        },
    }
}

/// Pads every tree to the union of their shapes.
pub fn pad_all(trees: &[BinTree<u32>]) -> Vec<PaddedTree> {
    let tops: Vec<Topology> = trees.iter().map(Topology::of).collect();
    let h = hull(&tops).expect("non-empty");
    trees.iter().map(|t| pad_to(&h, t).unwrap()).collect()
}

/// `|a − n| / (|a| + |n|)`. Below 1e-5 the denominator is held at 1e-5:
/// central differences at h = 1e-5 carry about ε·|loss|/h ≈ 5e-10 of
/// rounding noise, so smaller entries are compared absolutely.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-5)
}

/// Largest elementwise relative error between the analytic gradient of
/// `loss` and central differences with step `h`, over every parameter.
pub fn gradient_check(
    params: &Params,
    inputs: &[PaddedTree],
    outputs: &[PaddedTree],
    h: f64,
    dropout: Option<(f64, u64)>,
    loss: &dyn Fn(&ForwardPass) -> (f64, Vec<Array2<f64>>),
) -> Result<(f64, String), ModelError> {
    let per = gradient_errors(params, inputs, outputs, h, dropout, loss)?;
    Ok(per
        .into_iter()
        .map(|(_, e, at)| (e, at))
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a }))
}

/// Per tensor: name, worst relative error and where it occurred.
pub fn gradient_errors(
    params: &Params,
    inputs: &[PaddedTree],
    outputs: &[PaddedTree],
    h: f64,
    dropout: Option<(f64, u64)>,
    loss: &dyn Fn(&ForwardPass) -> (f64, Vec<Array2<f64>>),
) -> Result<Vec<(String, f64, String)>, ModelError> {
    let ins: Vec<&PaddedTree> = inputs.iter().collect();
    let outs: Vec<&PaddedTree> = outputs.iter().collect();
    let run = |p: &Params| -> Result<ForwardPass, ModelError> {
        match dropout {
            Some((rate, seed)) => {
                let mut rng: rand_chacha::ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
                ForwardPass::run(p, &ins, &outs, Feed::Teacher, Some((rate, &mut rng)))
            }
            None => ForwardPass::eval(p, &ins, &outs, Feed::Teacher),
        }
    };
    let pass = run(params)?;
    let (_, dlogits) = loss(&pass);
    let grads = pass.backward(params, &dlogits);
    let mut p = params.clone();
    let mut out = Vec::with_capacity(p.tensors.len());
    for t in 0..p.tensors.len() {
        let name = p.layout.names[t].clone();
        let mut worst = (0.0f64, String::new());
        for idx in 0..p.tensors[t].len() {
            let (r, c) = (idx / p.tensors[t].ncols(), idx % p.tensors[t].ncols());
            let orig = p.tensors[t][[r, c]];
            p.tensors[t][[r, c]] = orig + h;
            let lp = loss(&run(&p)?).0;
            p.tensors[t][[r, c]] = orig - h;
            let lm = loss(&run(&p)?).0;
            p.tensors[t][[r, c]] = orig;
            let num = (lp - lm) / (2.0 * h);
            let e = rel_error(grads[t][[r, c]], num);
            if e > worst.0 {
                worst = (
                    e,
                    format!(
                        "{name}[{r},{c}] analytic {} numeric {num}",
                        grads[t][[r, c]]
                    ),
                );
            }
        }
        out.push((name, worst.0, worst.1));
    }
    Ok(out)
}

/// `Σ R ∘ logits` for fixed random `R`; its logit gradient is `R`.
pub fn linear_probe(rng: &mut impl Rng, pass: &ForwardPass) -> Vec<Array2<f64>> {
    pass.decoder
        .logits
        .iter()
        .map(|l| Array2::from_shape_simple_fn(l.raw_dim(), || rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn probe_loss(r: &[Array2<f64>]) -> impl Fn(&ForwardPass) -> (f64, Vec<Array2<f64>>) + '_ {
    move |pass: &ForwardPass| {
        let l = pass
            .decoder
            .logits
            .iter()
            .zip(r)
            .map(|(a, b)| (a * b).sum())
            .sum();
        (l, r.to_vec())
    }
}

/// A random truth tree over a hull shared with a second random tree, and a
/// prediction over the same hull that copies some truth values.
pub fn random_metric_pair(rng: &mut impl Rng) -> (PaddedTree, PaddedTree) {
    let (na, nb) = (rng.random_range(1..9), rng.random_range(1..9));
    let a = random_tree(rng, na, 12);
    let b = random_tree(rng, nb, 12);
    let h = hull(&[Topology::of(&a), Topology::of(&b)]).expect("non-empty");
    let truth = pad_to(&h, &a).unwrap();
    let mut pred = truth.clone();
    for v in &mut pred.values {
        if rng.random_bool(0.5) {
            *v = rng.random_range(0..12);
        }
    }
    (pred, truth)
}

/// Brute-force `(hits, positions, content hits, content positions, multiset overlap)`.
pub fn oracle_counts(pred: &[u32], truth: &[u32]) -> (usize, usize, usize, usize, usize) {
    let mut hits = 0;
    let mut c_hits = 0;
    let mut c_n = 0;
    for i in 0..truth.len() {
        if pred[i] == truth[i] {
            hits += 1;
        }
        if truth[i] > 1 {
            c_n += 1;
            if pred[i] == truth[i] {
                c_hits += 1;
            }
        }
    }
    let mut pool = pred.to_vec();
    let mut overlap = 0;
    for t in truth {
        if let Some(k) = pool.iter().position(|p| p == t) {
            pool.swap_remove(k);
            overlap += 1;
        }
    }
    (hits, truth.len(), c_hits, c_n, overlap)
}

/// Reads a binary s-expression such as `((a b) c)`. `<1>` and `<2>` stand
/// for the command and concatenation end markers.
pub fn sexp(s: &str) -> BinTree {
    fn go<'a>(toks: &mut impl Iterator<Item = &'a str>) -> BinTree {
        match toks.next().expect("unexpected end") {
            "(" => {
                let l = go(toks);
                let r = go(toks);
                assert_eq!(toks.next(), Some(")"), "binary nodes only");
                BinTree::node(l, r)
            }
            "<1>" => BinTree::leaf(treetrans::parser::COMMAND_END.to_string()),
            "<2>" => BinTree::leaf(treetrans::parser::CONCAT_END.to_string()),
            t => BinTree::leaf(t.to_string()),
        }
    }
    let spaced = s.replace('(', " ( ").replace(')', " ) ");
    let mut toks = spaced.split_whitespace();
    let t = go(&mut toks);
    assert!(toks.next().is_none(), "trailing input");
    t
}

/// Every topology with exactly `internal` internal nodes.
pub fn all_topologies(internal: usize) -> Vec<Topology> {
    if internal == 0 {
        return vec![Topology::leaf()];
    }
    let mut out = Vec::new();
    for k in 0..internal {
        for l in all_topologies(k) {
            for r in all_topologies(internal - 1 - k) {
                out.push(Topology::node(&l, &r));
            }
        }
    }
    out
}

/// Partition, exact hulls, and the per-stage size and member bounds.
pub fn check_invariants(masks: &[Mask], s: &Schedules, c: &Clustering) {
    let mut seen = vec![0usize; masks.len()];
    let last = s.len() - 1;
    for cl in &c.clusters {
        for &m in &cl.members {
            seen[m] += 1;
            for (h, t) in cl.hulls.iter().zip(&masks[m]) {
                assert!(h.subsumes(t));
            }
        }
        let exact = mask_hull(cl.members.iter().map(|&m| &masks[m])).unwrap();
        assert_eq!(cl.hulls, exact, "hull is not the union of its members");
        let oversize_seed = cl.stage == last && cl.members.iter().all(|&m| masks[m] == cl.hulls);
        assert!(
            cl.hull_size() <= s.max_size[cl.stage] || oversize_seed,
            "hull {} at stage {}",
            cl.hull_size(),
            cl.stage
        );
        if cl.stage != last {
            assert!(cl.members.len() >= s.min_elems[cl.stage]);
        }
    }
    assert!(seen.iter().all(|&n| n == 1), "not a partition");
}

/// Every candidate of least size that subsumes all of `members`.
pub fn minimal_covers<'a>(candidates: &'a [Topology], members: &[&Topology]) -> Vec<&'a Topology> {
    let covering: Vec<&Topology> = candidates
        .iter()
        .filter(|t| members.iter().all(|m| t.subsumes(m)))
        .collect();
    let best = covering.iter().map(|t| t.size()).min().unwrap_or(0);
    covering.into_iter().filter(|t| t.size() == best).collect()
}

/// Input/output topology masks of `n` parsed synthetic pairs.
pub fn synthetic_masks(seed: u64, n: usize, right_biggest: bool) -> Vec<Mask> {
    let opts = ParserOptions {
        right_biggest,
        ..ParserOptions::default()
    };
    let (trees, bad) = parse_pairs(&gen_synthetic_corpus(seed, n), &opts);
    assert!(bad.is_empty());
    let v = Vocabs::build(&trees, &VocabOptions::default());
    pair_masks(&v.encode_all(&trees))
}
