use std::collections::HashSet;

use super::{FormulaPair, PipelineError};
use crate::parser::{tokenize, TokenKind};

/// Comparators that split a formula into independently valid terms. The
/// `\leq`/`\geq`/`<`/`>` family is included so inequality chains split too.
const COMPARATORS: &[&str] = &[
    "=",
    "<",
    ">",
    r"\gt",
    r"\lt",
    r"\equiv",
    r"\asympeq",
    r"\sim",
    r"\Rightarrow",
    r"\rightarrow",
    r"\to",
    r"\leq",
    r"\geq",
    r"\le",
    r"\ge",
];

pub fn is_comparator(label: &str) -> bool {
    COMPARATORS.contains(&label)
}

/// Byte ranges of the terms between top-level comparators, and of the comparators.
fn split_terms(s: &str) -> Result<Vec<(usize, usize)>, PipelineError> {
    let tokens = tokenize(s).map_err(PipelineError::Parse)?;
    let mut terms = Vec::new();
    let (mut braces, mut parens) = (0i64, 0i64);
    let mut start = 0usize;
    for tok in &tokens {
        match tok.kind {
            TokenKind::OpenBrace => braces += 1,
            TokenKind::CloseBrace => braces -= 1,
            TokenKind::Symbol if tok.text == "(" || tok.text == "[" => parens += 1,
            TokenKind::Symbol if tok.text == ")" || tok.text == "]" => parens -= 1,
            _ => {}
        }
        if braces == 0 && parens == 0 && is_comparator(&tok.text) {
            terms.push((start, tok.span.start));
            start = tok.span.end;
        }
    }
    terms.push((start, s.len()));
    Ok(terms)
}

fn windows(s: &str, terms: &[(usize, usize)]) -> Option<Vec<String>> {
    let k = terms.len();
    if terms.iter().any(|&(a, b)| s[a..b].trim().is_empty()) {
        return None;
    }
    let mut out = Vec::new();
    for width in 1..=k.min(3) {
        for i in 0..=(k - width) {
            out.push(s[terms[i].0..terms[i + width - 1].1].trim().to_string());
        }
    }
    out.push(s.trim().to_string());
    Some(out)
}

/// Single terms, adjacent pairs and triples (with their comparators), and
/// the whole formula, split in lockstep on both sides. Exact duplicates are
/// dropped; ids are `<id>#<k>`.
pub fn augment(p: &FormulaPair) -> Result<Vec<FormulaPair>, PipelineError> {
    let gt = split_terms(&p.generic)?;
    let st = split_terms(&p.semantic)?;
    if gt.len() != st.len() {
        return Err(PipelineError::MismatchedSplit(p.id.clone()));
    }
    let (Some(gw), Some(sw)) = (windows(&p.generic, &gt), windows(&p.semantic, &st)) else {
        log::warn!("pair {} has an empty term; kept unsplit", p.id);
        return Ok(vec![p.clone()]);
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (g, s) in gw.into_iter().zip(sw) {
        if seen.insert((g.clone(), s.clone())) {
            out.push(FormulaPair::new(format!("{}#{}", p.id, out.len()), g, s));
        }
    }
    Ok(out)
}

/// Augments every pair; pairs whose sides split differently are dropped with a warning.
pub fn augment_corpus(pairs: &[FormulaPair]) -> Result<Vec<FormulaPair>, PipelineError> {
    let mut out = Vec::new();
    for p in pairs {
        match augment(p) {
            Ok(v) => out.extend(v),
            Err(PipelineError::MismatchedSplit(id)) => {
                log::warn!("pair {id}: generic and semantic sides split differently; dropped");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
