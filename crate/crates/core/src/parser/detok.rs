use super::binary::undo_swaps;
use super::heuristics::{is_marker, COMMAND_END};
use super::nary::{command_arity, is_script_operator, Arity};
use crate::tree::BinTree;

/// Renders a (possibly swapped) parse tree back to LaTeX. Argument braces are
/// reinserted from the arity table; brace groups that only grouped a
/// concatenation are not restored.
pub fn detokenize(t: &BinTree) -> String {
    let t = undo_swaps(t);
    let mut out = Writer::default();
    render(&t, &mut out);
    out.buf
}

#[derive(Default)]
struct Writer {
    buf: String,
    after_word_command: bool,
}

impl Writer {
    fn push(&mut self, s: &str) {
        if s.is_empty() {
            return;
        }
        if self.after_word_command && s.starts_with(|c: char| c.is_ascii_alphabetic()) {
            self.buf.push(' ');
        }
        self.buf.push_str(s);
        let mut chars = s.chars();
        self.after_word_command =
            s.starts_with('\\') && chars.nth(1).is_some_and(|c| c.is_ascii_alphabetic());
    }
}

fn leaf_label(t: &BinTree) -> Option<&str> {
    match t {
        BinTree::Leaf(l) => Some(l),
        BinTree::Node { .. } => None,
    }
}

/// Splits off a trailing `<COMMAND_END>` leaf from an argument chain.
fn strip_command_end(t: &BinTree) -> (&BinTree, bool) {
    if let BinTree::Node { left, right, .. } = t {
        if leaf_label(right) == Some(COMMAND_END) {
            return (left, true);
        }
    }
    (t, false)
}

fn head_arity(head: &str, rest: &BinTree) -> Option<usize> {
    if is_script_operator(head) {
        return Some(1);
    }
    if !head.starts_with('\\') {
        return None;
    }
    match command_arity(head) {
        Arity::Fixed(0) => None,
        Arity::Fixed(k) => Some(k),
        Arity::Unknown => strip_command_end(rest).1.then_some(1),
    }
}

fn render(t: &BinTree, out: &mut Writer) {
    match t {
        BinTree::Leaf(l) => {
            if !is_marker(l) {
                out.push(l);
            }
        }
        BinTree::Node { left, right, .. } => {
            if let Some(head) = leaf_label(left) {
                if let Some(k) = head_arity(head, right) {
                    out.push(head);
                    let (mut args, _) = strip_command_end(right);
                    for _ in 1..k {
                        match args {
                            BinTree::Node {
                                left: a,
                                right: rest,
                                ..
                            } => {
                                braced(a, out);
                                args = rest;
                            }
                            BinTree::Leaf(_) => break,
                        }
                    }
                    braced(args, out);
                    return;
                }
            }
            render(left, out);
            render(right, out);
        }
    }
}

fn braced(t: &BinTree, out: &mut Writer) {
    out.push("{");
    render(t, out);
    out.push("}");
}
