use crate::tree::{BinTree, NaryTree};

/// Left-child right-sibling conversion for leaf-only labels: the left child is
/// the first child, the right child is the node without its first child.
pub fn to_binary(t: &NaryTree) -> BinTree {
    match t {
        NaryTree::Leaf(l) => BinTree::leaf(l.clone()),
        NaryTree::Node { children, .. } => siblings(children),
    }
}

fn siblings(children: &[NaryTree]) -> BinTree {
    match children {
        [] => unreachable!("n-ary nodes have at least one child"),
        [only] => to_binary(only),
        [first, rest @ ..] => BinTree::node(to_binary(first), siblings(rest)),
    }
}

/// Bottom-up exchange of children wherever the left subtree is strictly larger.
/// Existing swap flags are kept; a node already satisfying the property is left alone.
pub fn right_biggest<L: Clone>(t: &BinTree<L>) -> BinTree<L> {
    fn go<L: Clone>(t: &BinTree<L>) -> (BinTree<L>, usize) {
        match t {
            BinTree::Leaf(_) => (t.clone(), 1),
            BinTree::Node { left, right, swap } => {
                let (l, ls) = go(left);
                let (r, rs) = go(right);
                let node = if ls > rs {
                    BinTree::Node {
                        left: Box::new(r),
                        right: Box::new(l),
                        swap: !*swap,
                    }
                } else {
                    BinTree::Node {
                        left: Box::new(l),
                        right: Box::new(r),
                        swap: *swap,
                    }
                };
                (node, 1 + ls + rs)
            }
        }
    }
    go(t).0
}

/// Re-exchanges every flagged node, clearing the flags.
pub fn undo_swaps<L: Clone>(t: &BinTree<L>) -> BinTree<L> {
    match t {
        BinTree::Leaf(_) => t.clone(),
        BinTree::Node { left, right, swap } => {
            let (l, r) = (undo_swaps(left), undo_swaps(right));
            if *swap {
                BinTree::node(r, l)
            } else {
                BinTree::node(l, r)
            }
        }
    }
}
