//! Choosing the semantic macro for an ambiguous generic symbol from a bag
//! of words of its formula, among the macros seen translated from it.

mod align;
pub mod mlp;
mod model;

pub use align::{align, content_leaves, extract_instances, is_symbol, CandidateTable, Instance};
pub use mlp::Mlp;
pub use model::{DisambigConfig, Disambiguator};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DisambigError {
    #[error("symbol `{0}` has no candidates")]
    UnknownSymbol(String),
    #[error("invalid disambiguator configuration: {0}")]
    InvalidConfig(String),
    #[error("bad disambiguator checkpoint: {0}")]
    Checkpoint(String),
}
