//! Leaf-labeled tree types shared by the parser, the padding code and the network.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

/// Kind of an n-ary internal node, recorded by the parser so the end-marker
/// heuristics know which nodes are commands and which are concatenations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Top-level item sequence of a formula.
    Sequence,
    /// Concatenation of the items inside a brace group.
    Group,
    /// A command leaf followed by its argument(s).
    Command,
    /// Argument list of a command taking two or more arguments.
    Arguments,
    /// Base, script operator (`_`, `^`, `@`) and script argument.
    Script,
}

/// Non-full n-ary parse tree. Only leaves carry labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NaryTree {
    Leaf(String),
    Node {
        kind: NodeKind,
        children: Vec<NaryTree>,
    },
}

impl NaryTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        NaryTree::Leaf(label.into())
    }

    pub fn node(kind: NodeKind, children: Vec<NaryTree>) -> Self {
        debug_assert!(!children.is_empty(), "n-ary node without children");
        NaryTree::Node { kind, children }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, NaryTree::Leaf(_))
    }

    /// Total node count, internal nodes plus leaves.
    pub fn size(&self) -> usize {
        match self {
            NaryTree::Leaf(_) => 1,
            NaryTree::Node { children, .. } => {
                1 + children.iter().map(NaryTree::size).sum::<usize>()
            }
        }
    }

    /// Leaf labels from left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            NaryTree::Leaf(l) => out.push(l),
            NaryTree::Node { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    /// Label of the first leaf reached by always descending into the first child.
    pub fn first_leaf(&self) -> &str {
        match self {
            NaryTree::Leaf(l) => l,
            NaryTree::Node { children, .. } => children[0].first_leaf(),
        }
    }
}

/// S-expression rendering: leaves print as their label, nodes as `(c1 c2 ...)`.
impl fmt::Display for NaryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NaryTree::Leaf(l) => write!(f, "{l}"),
            NaryTree::Node { children, .. } => {
                write!(f, "(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Strictly binary tree whose leaves carry labels and whose internal nodes
/// carry the swap flag written by the right-child-biggest traversal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BinTree<L = String> {
    Leaf(L),
    Node {
        left: Box<BinTree<L>>,
        right: Box<BinTree<L>>,
        swap: bool,
    },
}

impl<L> BinTree<L> {
    pub fn leaf(label: L) -> Self {
        BinTree::Leaf(label)
    }

    pub fn node(left: BinTree<L>, right: BinTree<L>) -> Self {
        BinTree::Node {
            left: Box::new(left),
            right: Box::new(right),
            swap: false,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, BinTree::Leaf(_))
    }

    pub fn size(&self) -> usize {
        match self {
            BinTree::Leaf(_) => 1,
            BinTree::Node { left, right, .. } => 1 + left.size() + right.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            BinTree::Leaf(_) => 1,
            BinTree::Node { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Leaf labels in left-to-right order of the stored (possibly swapped) tree.
    pub fn leaves(&self) -> Vec<&L> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a L>) {
        match self {
            BinTree::Leaf(l) => out.push(l),
            BinTree::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Relabels every leaf, keeping shape and swap flags.
    pub fn map<M>(&self, f: &mut impl FnMut(&L) -> M) -> BinTree<M> {
        match self {
            BinTree::Leaf(l) => BinTree::Leaf(f(l)),
            BinTree::Node { left, right, swap } => BinTree::Node {
                left: Box::new(left.map(f)),
                right: Box::new(right.map(f)),
                swap: *swap,
            },
        }
    }

    pub fn try_map<M, E>(&self, f: &mut impl FnMut(&L) -> Result<M, E>) -> Result<BinTree<M>, E> {
        Ok(match self {
            BinTree::Leaf(l) => BinTree::Leaf(f(l)?),
            BinTree::Node { left, right, swap } => BinTree::Node {
                left: Box::new(left.try_map(f)?),
                right: Box::new(right.try_map(f)?),
                swap: *swap,
            },
        })
    }

    pub fn any_swapped(&self) -> bool {
        match self {
            BinTree::Leaf(_) => false,
            BinTree::Node { left, right, swap } => {
                *swap || left.any_swapped() || right.any_swapped()
            }
        }
    }
}

impl BinTree<String> {
    /// Canonical JSON: `{"v":label}` for leaves, `{"l":..,"r":..,"s":0|1}` for nodes.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl<L: Serialize> Serialize for BinTree<L> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            BinTree::Leaf(l) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("v", l)?;
                map.end()
            }
            BinTree::Node { left, right, swap } => {
                let mut map = serializer.serialize_map(Some(3))?;
                map.serialize_entry("l", left)?;
                map.serialize_entry("r", right)?;
                map.serialize_entry("s", &u8::from(*swap))?;
                map.end()
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TreeRepr<L> {
    Leaf {
        v: L,
    },
    Node {
        l: Box<TreeRepr<L>>,
        r: Box<TreeRepr<L>>,
        s: u8,
    },
}

impl<L> TreeRepr<L> {
    fn into_tree<E: de::Error>(self) -> Result<BinTree<L>, E> {
        match self {
            TreeRepr::Leaf { v } => Ok(BinTree::Leaf(v)),
            TreeRepr::Node { l, r, s } => {
                if s > 1 {
                    return Err(E::custom(format!("swap flag must be 0 or 1, got {s}")));
                }
                Ok(BinTree::Node {
                    left: Box::new(l.into_tree()?),
                    right: Box::new(r.into_tree()?),
                    swap: s == 1,
                })
            }
        }
    }
}

impl<'de, L: Deserialize<'de>> Deserialize<'de> for BinTree<L> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        TreeRepr::deserialize(deserializer)?.into_tree()
    }
}

impl<L: fmt::Display> fmt::Display for BinTree<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinTree::Leaf(l) => write!(f, "{l}"),
            BinTree::Node { left, right, swap } => {
                write!(f, "({left} {right})")?;
                if *swap {
                    write!(f, "'")?;
                }
                Ok(())
            }
        }
    }
}
