//! Value-free binary tree shapes: subsumption, hulls and hull increments.
//!
//! A [`Topology`] is stored as its pre-order bit sequence (`true` for an
//! internal node, `false` for a leaf). The encoding is canonical, so equality,
//! hashing and ordering work directly on it, and a pre-order index doubles as
//! the position identifier used by padded trees and by the network.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::tree::BinTree;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    bits: Vec<bool>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid topology encoding: {0}")]
pub struct TopologyParseError(String);

impl Topology {
    pub fn leaf() -> Self {
        Topology { bits: vec![false] }
    }

    pub fn node(left: &Topology, right: &Topology) -> Self {
        let mut bits = Vec::with_capacity(1 + left.len() + right.len());
        bits.push(true);
        bits.extend_from_slice(&left.bits);
        bits.extend_from_slice(&right.bits);
        Topology { bits }
    }

    pub fn of<L>(tree: &BinTree<L>) -> Self {
        let mut bits = Vec::with_capacity(tree.size());
        fn walk<L>(t: &BinTree<L>, bits: &mut Vec<bool>) {
            match t {
                BinTree::Leaf(_) => bits.push(false),
                BinTree::Node { left, right, .. } => {
                    bits.push(true);
                    walk(left, bits);
                    walk(right, bits);
                }
            }
        }
        walk(tree, &mut bits);
        Topology { bits }
    }

    /// Validates a pre-order encoding of a strictly binary tree.
    pub fn from_bits(bits: Vec<bool>) -> Result<Self, TopologyParseError> {
        let mut open = 1usize;
        for (i, &b) in bits.iter().enumerate() {
            if open == 0 {
                return Err(TopologyParseError(format!(
                    "trailing nodes after position {i}"
                )));
            }
            if b {
                open += 1;
            } else {
                open -= 1;
            }
        }
        if open != 0 || bits.is_empty() {
            return Err(TopologyParseError("incomplete tree".into()));
        }
        Ok(Topology { bits })
    }

    /// A left-leaning chain with `internal` internal nodes.
    pub fn left_chain(internal: usize) -> Self {
        let mut t = Topology::leaf();
        for _ in 0..internal {
            t = Topology::node(&t, &Topology::leaf());
        }
        t
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Node count, `‖a‖`.
    pub fn size(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_internal(&self, pos: usize) -> bool {
        self.bits[pos]
    }

    /// One past the last position of the subtree rooted at `pos`.
    pub fn subtree_end(&self, pos: usize) -> usize {
        subtree_end(&self.bits, pos)
    }

    pub fn children(&self, pos: usize) -> Option<(usize, usize)> {
        if self.bits[pos] {
            let l = pos + 1;
            Some((l, self.subtree_end(l)))
        } else {
            None
        }
    }

    /// `self ⊃ other`: every position of `other` exists in `self`.
    pub fn subsumes(&self, other: &Topology) -> bool {
        self.increment(other) == 0
    }

    /// Number of positions of `other` missing from `self`, i.e.
    /// `‖self ∪ other‖ − ‖self‖`.
    pub fn increment(&self, other: &Topology) -> usize {
        let (mut i, mut j, mut extra) = (0usize, 0usize, 0usize);
        // Both cursors walk the shared prefix structure in lockstep.
        let mut pending = 1usize;
        while pending > 0 {
            pending -= 1;
            match (self.bits[i], other.bits[j]) {
                (true, true) => {
                    i += 1;
                    j += 1;
                    pending += 2;
                }
                (false, false) => {
                    i += 1;
                    j += 1;
                }
                (true, false) => {
                    i = subtree_end(&self.bits, i);
                    j += 1;
                }
                (false, true) => {
                    let end = subtree_end(&other.bits, j);
                    extra += end - j - 1;
                    i += 1;
                    j = end;
                }
            }
        }
        extra
    }

    /// Position-wise union; the smallest topology subsuming both.
    pub fn union(&self, other: &Topology) -> Topology {
        let mut out = Vec::with_capacity(self.len().max(other.len()));
        let (mut i, mut j) = (0usize, 0usize);
        let mut pending = 1usize;
        while pending > 0 {
            pending -= 1;
            match (self.bits[i], other.bits[j]) {
                (true, true) => {
                    out.push(true);
                    i += 1;
                    j += 1;
                    pending += 2;
                }
                (false, false) => {
                    out.push(false);
                    i += 1;
                    j += 1;
                }
                (true, false) => {
                    let end = subtree_end(&self.bits, i);
                    out.extend_from_slice(&self.bits[i..end]);
                    i = end;
                    j += 1;
                }
                (false, true) => {
                    let end = subtree_end(&other.bits, j);
                    out.extend_from_slice(&other.bits[j..end]);
                    i += 1;
                    j = end;
                }
            }
        }
        Topology { bits: out }
    }

    /// Canonical serialization: pre-order, `1` internal, `0` leaf.
    pub fn serialize(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Topology, pos: usize) -> usize {
            match t.children(pos) {
                None => 1,
                Some((l, r)) => 1 + go(t, l).max(go(t, r)),
            }
        }
        go(self, 0)
    }
}

fn subtree_end(bits: &[bool], pos: usize) -> usize {
    let mut open = 1usize;
    let mut k = pos;
    while open > 0 {
        if bits[k] {
            open += 1;
        } else {
            open -= 1;
        }
        k += 1;
    }
    k
}

/// Hull of a non-empty list of topologies.
pub fn hull<'a>(ts: impl IntoIterator<Item = &'a Topology>) -> Option<Topology> {
    let mut it = ts.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, t| acc.union(t)))
}

impl Ord for Topology {
    /// Ascending size, then lexicographic on the serialization.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

impl PartialOrd for Topology {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl fmt::Debug for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Topology({})", self.serialize())
    }
}

impl FromStr for Topology {
    type Err = TopologyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(TopologyParseError(format!(
                    "unexpected character {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Topology::from_bits(bits)
    }
}

impl serde::Serialize for Topology {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.serialize())
    }
}

impl<'de> serde::Deserialize<'de> for Topology {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Child/parent index tables for a hull, in pre-order.
#[derive(Debug, Clone)]
pub struct Shape {
    pub children: Vec<Option<(usize, usize)>>,
    /// Parent position and whether this position is the parent's right child.
    pub parent: Vec<Option<(usize, bool)>>,
}

impl Shape {
    pub fn new(t: &Topology) -> Self {
        let n = t.len();
        let mut children = vec![None; n];
        let mut parent = vec![None; n];
        for pos in 0..n {
            if let Some((l, r)) = t.children(pos) {
                children[pos] = Some((l, r));
                parent[l] = Some((pos, false));
                parent[r] = Some((pos, true));
            }
        }
        Shape { children, parent }
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }
}
