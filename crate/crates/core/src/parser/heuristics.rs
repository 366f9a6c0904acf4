use super::ParserOptions;
use crate::tree::{NaryTree, NodeKind};

pub const COMMAND_END: &str = "<COMMAND_END>";
pub const CONCAT_END: &str = "<CONCAT_END>";

pub fn is_marker(label: &str) -> bool {
    label == COMMAND_END || label == CONCAT_END
}

const INFIX_OPERATORS: &[&str] = &[
    "+",
    "-",
    "−",
    "=",
    "<",
    ">",
    "/",
    r"\leq",
    r"\geq",
    r"\le",
    r"\ge",
    r"\lt",
    r"\gt",
    r"\neq",
    r"\ne",
    r"\equiv",
    r"\asympeq",
    r"\sim",
    r"\simeq",
    r"\approx",
    r"\Rightarrow",
    r"\rightarrow",
    r"\to",
    r"\pm",
    r"\mp",
    r"\cdot",
    r"\times",
];

pub fn is_infix_operator(label: &str) -> bool {
    INFIX_OPERATORS.contains(&label)
}

/// Appends `<COMMAND_END>` to command nodes and `<CONCAT_END>` to brace-group
/// concatenations, as selected by `opts`.
pub fn add_end_markers(t: &NaryTree, opts: &ParserOptions) -> NaryTree {
    match t {
        NaryTree::Leaf(_) => t.clone(),
        NaryTree::Node { kind, children } => {
            let mut out: Vec<NaryTree> =
                children.iter().map(|c| add_end_markers(c, opts)).collect();
            match kind {
                NodeKind::Command if opts.command_end => out.push(NaryTree::leaf(COMMAND_END)),
                NodeKind::Group if opts.concat_end => out.push(NaryTree::leaf(CONCAT_END)),
                _ => {}
            }
            NaryTree::node(*kind, out)
        }
    }
}

/// Moves infix-operator leaves to the front of every child list, keeping the
/// relative order of everything else.
pub fn infix_to_prefix(t: &NaryTree) -> NaryTree {
    match t {
        NaryTree::Leaf(_) => t.clone(),
        NaryTree::Node { kind, children } => {
            let converted: Vec<NaryTree> = children.iter().map(infix_to_prefix).collect();
            let (mut ops, rest): (Vec<_>, Vec<_>) = converted
                .into_iter()
                .partition(|c| matches!(c, NaryTree::Leaf(l) if is_infix_operator(l)));
            ops.extend(rest);
            NaryTree::node(*kind, ops)
        }
    }
}
