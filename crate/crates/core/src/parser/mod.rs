//! LaTeX formula string to only-leaf-labeled binary tree.

mod binary;
mod detok;
mod heuristics;
mod nary;
mod tokenize;

pub use binary::{right_biggest, to_binary, undo_swaps};
pub use detok::detokenize;
pub use heuristics::{
    add_end_markers, infix_to_prefix, is_infix_operator, is_marker, COMMAND_END, CONCAT_END,
};
pub use nary::{
    command_arity, is_script_operator, parse_nary, parse_nary_with_diagnostics, Arity, NaryParse,
};
pub use tokenize::{tokenize, Token, TokenKind};

use serde::{Deserialize, Serialize};

use crate::tree::BinTree;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty formula")]
    EmptyInput,
    #[error("unbalanced brace at byte {0}")]
    UnbalancedBraces(usize),
    #[error("backslash at end of input (byte {0})")]
    DanglingBackslash(usize),
    #[error("unexpected token at index {0}")]
    UnexpectedToken(usize),
    #[error("command at token {0} is missing an argument")]
    DanglingArgument(usize),
}

/// Toggles for the tree-shaping heuristics applied after n-ary parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParserOptions {
    pub command_end: bool,
    pub concat_end: bool,
    pub infix_to_prefix: bool,
    /// Apply the right-child-biggest swap traversal after binarization.
    #[serde(default = "default_true")]
    pub right_biggest: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ParserOptions {
    fn default() -> Self {
        ParserOptions {
            command_end: true,
            concat_end: true,
            infix_to_prefix: false,
            right_biggest: true,
        }
    }
}

impl ParserOptions {
    /// Every heuristic off, no swap traversal.
    pub fn plain() -> Self {
        ParserOptions {
            command_end: false,
            concat_end: false,
            infix_to_prefix: false,
            right_biggest: false,
        }
    }
}

/// Full pipeline: tokenize, parse, end markers, optional prefix reordering,
/// binarization and optional right-child-biggest traversal.
pub fn parse_formula(input: &str, opts: &ParserOptions) -> Result<BinTree, ParseError> {
    let tokens = tokenize(input)?;
    let nary = parse_nary(&tokens)?;
    let marked = add_end_markers(&nary, opts);
    let ordered = if opts.infix_to_prefix {
        infix_to_prefix(&marked)
    } else {
        marked
    };
    let bin = to_binary(&ordered);
    Ok(if opts.right_biggest {
        right_biggest(&bin)
    } else {
        bin
    })
}
