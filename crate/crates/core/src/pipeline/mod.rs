//! Corpus handling: generation, augmentation, vocabularies, encoding and padding.

mod augment;
mod corpus;
mod padding;
mod split;
pub mod synth;
mod vocab;

pub use augment::{augment, augment_corpus, is_comparator};
pub use corpus::{parse_tsv, to_tsv, FormulaPair};
pub use padding::{pad_to, EncodedPair, PaddedBatch, PaddedTree};
pub use split::{k_folds, split_train_val};
pub use synth::{gen_synthetic_corpus, gen_synthetic_corpus_with, SynthConfig};
pub use vocab::{VocabOptions, Vocabulary, FIRST_TOKEN, INTERNAL, UNK, Y_END};

use rayon::prelude::*;

use crate::parser::{parse_formula, ParseError, ParserOptions};
use crate::tree::BinTree;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("line {0}: expected `generic<TAB>semantic`")]
    MalformedLine(usize),
    #[error("pair {0}: generic and semantic sides split into different term counts")]
    MismatchedSplit(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("hull does not subsume the tree")]
    NotSubsumed,
    #[error("padding or internal tag at tree node position {0}")]
    PaddingAtNode(usize),
    #[error("id {0} is not in the vocabulary")]
    UnknownId(u32),
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("empty batch")]
    EmptyBatch,
}

/// Both sides of a formula pair as parse trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePair {
    pub id: String,
    pub generic: BinTree,
    pub semantic: BinTree,
}

/// Parses every pair; failures are returned separately with their ids.
pub fn parse_pairs(
    pairs: &[FormulaPair],
    opts: &ParserOptions,
) -> (Vec<TreePair>, Vec<(String, ParseError)>) {
    let results: Vec<Result<TreePair, (String, ParseError)>> = pairs
        .par_iter()
        .map(|p| {
            let g = parse_formula(&p.generic, opts).map_err(|e| (p.id.clone(), e))?;
            let s = parse_formula(&p.semantic, opts).map_err(|e| (p.id.clone(), e))?;
            Ok(TreePair {
                id: p.id.clone(),
                generic: g,
                semantic: s,
            })
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => failed.push(e),
        }
    }
    (ok, failed)
}

/// Separate vocabularies for the generic (input) and semantic (output) sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabs {
    pub input: Vocabulary,
    pub output: Vocabulary,
}

impl Vocabs {
    pub fn build(trees: &[TreePair], opts: &VocabOptions) -> Self {
        Vocabs {
            input: Vocabulary::build(trees.iter().map(|t| &t.generic), opts),
            output: Vocabulary::build(trees.iter().map(|t| &t.semantic), opts),
        }
    }

    pub fn encode(&self, t: &TreePair) -> EncodedPair {
        EncodedPair {
            id: t.id.clone(),
            input: self.input.encode(&t.generic),
            output: self.output.encode(&t.semantic),
        }
    }

    pub fn encode_all(&self, ts: &[TreePair]) -> Vec<EncodedPair> {
        ts.iter().map(|t| self.encode(t)).collect()
    }
}
