//! Aligning generic and semantic leaf sequences to find which semantic
//! macro each generic symbol was translated to.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::parser::is_marker;
use crate::pipeline::TreePair;
use crate::tree::BinTree;

/// Tokens that carry no meaning of their own for alignment.
fn is_structural(t: &str) -> bool {
    matches!(t, "{" | "}" | "(" | ")" | "@" | "@@") || is_marker(t)
}

fn is_command(t: &str) -> bool {
    t.starts_with('\\') && t.len() > 1
}

/// Generic tokens that can stand for a semantic macro.
pub fn is_symbol(t: &str) -> bool {
    is_command(t) || (t.chars().count() == 1 && t.chars().all(|c| c.is_alphabetic()))
}

/// Meaningful leaves in left-to-right order, with swaps undone.
pub fn content_leaves(t: &BinTree) -> Vec<String> {
    crate::parser::undo_swaps(t)
        .leaves()
        .into_iter()
        .filter(|l| !is_structural(l))
        .cloned()
        .collect()
}

fn lcs_pairs(a: &[String], b: &[String]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if a[i] == b[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < n && j < m {
        if a[i] == b[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// `(generic index, semantic token)` for every generic symbol whose
/// counterpart can be determined. Identical tokens are matched by a longest
/// common subsequence; between matches, runs of equal length are paired
/// position by position. `None` when some run pair differs in length.
pub fn align(generic: &[String], semantic: &[String]) -> Option<Vec<(usize, String)>> {
    let mut matches = lcs_pairs(generic, semantic);
    matches.push((generic.len(), semantic.len()));
    let mut out = Vec::new();
    let (mut gi, mut si) = (0, 0);
    for (mg, ms) in matches {
        let (gap_g, gap_s) = (mg - gi, ms - si);
        if gap_g != gap_s && gap_g > 0 && gap_s > 0 {
            return None;
        }
        if gap_g == gap_s {
            for k in 0..gap_g {
                let (g, s) = (&generic[gi + k], &semantic[si + k]);
                if is_symbol(g) && is_command(s) {
                    out.push((gi + k, s.clone()));
                }
            }
        }
        if mg < generic.len() && is_command(&generic[mg]) {
            out.push((mg, semantic[ms].clone()));
        }
        gi = mg + 1;
        si = ms + 1;
    }
    Some(out)
}

/// One occurrence of a generic symbol with its semantic translation and
/// the generic leaves of the formula it occurs in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub formula_id: String,
    pub symbol: String,
    pub target: String,
    pub leaves: Vec<String>,
    /// Index of this occurrence in `leaves`.
    pub position: usize,
}

/// Every aligned symbol occurrence; ids of unalignable pairs are returned separately.
pub fn extract_instances(pairs: &[TreePair]) -> (Vec<Instance>, Vec<String>) {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for p in pairs {
        let g = content_leaves(&p.generic);
        let s = content_leaves(&p.semantic);
        match align(&g, &s) {
            Some(al) => out.extend(al.into_iter().map(|(i, target)| Instance {
                formula_id: p.id.clone(),
                symbol: g[i].clone(),
                target,
                leaves: g.clone(),
                position: i,
            })),
            None => {
                log::warn!("pair {}: leaf sequences cannot be aligned; skipped", p.id);
                skipped.push(p.id.clone());
            }
        }
    }
    (out, skipped)
}

/// Generic symbol → semantic macros it was seen translated to, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateTable {
    pub entries: BTreeMap<String, Vec<String>>,
}

impl CandidateTable {
    pub fn build<'a>(instances: impl IntoIterator<Item = &'a Instance>) -> Self {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for i in instances {
            let list = entries.entry(i.symbol.clone()).or_default();
            if !list.contains(&i.target) {
                list.push(i.target.clone());
            }
        }
        CandidateTable { entries }
    }

    pub fn candidates(&self, symbol: &str) -> Option<&[String]> {
        self.entries.get(symbol).map(Vec::as_slice)
    }

    pub fn max_candidates(&self) -> usize {
        self.entries.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Symbols with at least two candidates.
    pub fn ambiguous(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.entries.iter().filter(|(_, v)| v.len() > 1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        Ok(CandidateTable {
            entries: serde_json::from_str(s)?,
        })
    }
}
