use serde::{Deserialize, Serialize};

use super::vocab::{INTERNAL, UNK, Y_END};
use super::PipelineError;
use crate::topology::Topology;
use crate::tree::BinTree;

/// An encoded tree laid out over a hull in pre-order: leaf ids at leaf
/// positions, `INTERNAL` at internal ones, `Y_END` where the tree has no node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddedTree {
    pub hull: Topology,
    pub values: Vec<u32>,
    /// Swap flag per hull position; only set at internal positions of the tree.
    pub swaps: Vec<bool>,
}

/// Pads `t` to `hull`. A leaf of `t` at an internal hull position keeps its
/// id and everything below it becomes `Y_END`.
pub fn pad_to(hull: &Topology, t: &BinTree<u32>) -> Result<PaddedTree, PipelineError> {
    let n = hull.len();
    let mut values = vec![Y_END; n];
    let mut swaps = vec![false; n];
    // (hull position, source subtree)
    let mut stack: Vec<(usize, &BinTree<u32>)> = vec![(0, t)];
    while let Some((pos, node)) = stack.pop() {
        match (hull.children(pos), node) {
            (_, BinTree::Leaf(v)) => values[pos] = *v,
            (None, BinTree::Node { .. }) => return Err(PipelineError::NotSubsumed),
            (Some((l, r)), BinTree::Node { left, right, swap }) => {
                values[pos] = INTERNAL;
                swaps[pos] = *swap;
                stack.push((r, right));
                stack.push((l, left));
            }
        }
    }
    Ok(PaddedTree {
        hull: hull.clone(),
        values,
        swaps,
    })
}

impl PaddedTree {
    /// Inverse of [`pad_to`].
    pub fn strip(&self) -> Result<BinTree<u32>, PipelineError> {
        fn go(p: &PaddedTree, pos: usize) -> Result<BinTree<u32>, PipelineError> {
            match (p.values[pos], p.hull.children(pos)) {
                (Y_END, _) => Err(PipelineError::PaddingAtNode(pos)),
                (INTERNAL, Some((l, r))) => Ok(BinTree::Node {
                    left: Box::new(go(p, l)?),
                    right: Box::new(go(p, r)?),
                    swap: p.swaps[pos],
                }),
                (INTERNAL, None) => Err(PipelineError::PaddingAtNode(pos)),
                (v, _) => Ok(BinTree::Leaf(v)),
            }
        }
        go(self, 0)
    }

    /// Best-effort tree from predicted values: `Y_END` prunes a subtree, an
    /// internal node with one surviving child collapses to it, and `INTERNAL`
    /// at a hull leaf becomes `UNK`.
    pub fn strip_lenient(&self) -> Option<BinTree<u32>> {
        fn go(p: &PaddedTree, pos: usize) -> Option<BinTree<u32>> {
            match (p.values[pos], p.hull.children(pos)) {
                (Y_END, _) => None,
                (INTERNAL, Some((l, r))) => match (go(p, l), go(p, r)) {
                    (Some(a), Some(b)) => Some(BinTree::Node {
                        left: Box::new(a),
                        right: Box::new(b),
                        swap: p.swaps[pos],
                    }),
                    (Some(a), None) | (None, Some(a)) => Some(a),
                    (None, None) => None,
                },
                (INTERNAL, None) => Some(BinTree::Leaf(UNK)),
                (v, _) => Some(BinTree::Leaf(v)),
            }
        }
        go(self, 0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A cluster's member pairs aligned to the cluster's input and output hulls.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub hull_in: Topology,
    pub hull_out: Topology,
    pub ids: Vec<String>,
    pub inputs: Vec<PaddedTree>,
    pub outputs: Vec<PaddedTree>,
}

/// One tree pair after vocabulary encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub id: String,
    pub input: BinTree<u32>,
    pub output: BinTree<u32>,
}

impl PaddedBatch {
    pub fn new(
        hull_in: &Topology,
        hull_out: &Topology,
        members: &[&EncodedPair],
    ) -> Result<Self, PipelineError> {
        let mut b = PaddedBatch {
            hull_in: hull_in.clone(),
            hull_out: hull_out.clone(),
            ids: Vec::with_capacity(members.len()),
            inputs: Vec::with_capacity(members.len()),
            outputs: Vec::with_capacity(members.len()),
        };
        for m in members {
            b.ids.push(m.id.clone());
            b.inputs.push(pad_to(hull_in, &m.input)?);
            b.outputs.push(pad_to(hull_out, &m.output)?);
        }
        Ok(b)
    }

    /// Batch whose hulls are the members' own union.
    pub fn from_members(members: &[&EncodedPair]) -> Result<Self, PipelineError> {
        let ins: Vec<Topology> = members.iter().map(|m| Topology::of(&m.input)).collect();
        let outs: Vec<Topology> = members.iter().map(|m| Topology::of(&m.output)).collect();
        let hi = crate::topology::hull(&ins).ok_or(PipelineError::EmptyBatch)?;
        let ho = crate::topology::hull(&outs).ok_or(PipelineError::EmptyBatch)?;
        Self::new(&hi, &ho, members)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(v: u32) -> BinTree<u32> {
        BinTree::leaf(v)
    }

    #[test]
    fn exact_hull_has_no_padding() {
        let t = BinTree::node(leaf(3), BinTree::node(leaf(4), leaf(5)));
        let p = pad_to(&Topology::of(&t), &t).unwrap();
        assert!(!p.values.contains(&Y_END));
        assert_eq!(p.values, [0, 3, 0, 4, 5]);
        assert_eq!(p.strip().unwrap(), t);
    }

    #[test]
    fn leaf_at_internal_hull_position() {
        let hull: Topology = "100".parse().unwrap();
        let p = pad_to(&hull, &leaf(7)).unwrap();
        assert_eq!(p.values, [7, Y_END, Y_END]);
        assert_eq!(p.strip().unwrap(), leaf(7));
    }

    #[test]
    fn not_subsumed() {
        let t = BinTree::node(leaf(3), leaf(4));
        assert_eq!(
            pad_to(&Topology::leaf(), &t),
            Err(PipelineError::NotSubsumed)
        );
    }

    #[test]
    fn lenient_strip_collapses() {
        let hull: Topology = "100".parse().unwrap();
        let p = PaddedTree {
            hull,
            values: vec![0, 5, Y_END],
            swaps: vec![false; 3],
        };
        assert_eq!(p.strip_lenient(), Some(leaf(5)));
        assert!(p.strip().is_err());
    }
}
