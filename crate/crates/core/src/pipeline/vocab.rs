use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::tree::BinTree;

pub const INTERNAL: u32 = 0;
pub const Y_END: u32 = 1;
pub const UNK: u32 = 2;
pub const FIRST_TOKEN: u32 = 3;

const RESERVED: [&str; 3] = ["<INTERNAL>", "<Y_END>", "<UNK>"];

/// Token ↔ id map with ids 0–2 reserved for internal nodes, padding and
/// out-of-vocabulary leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabOptions {
    pub min_count: usize,
    /// Assign ids in sorted token order instead of first-seen order.
    pub canonical_sort: bool,
}

impl Default for VocabOptions {
    fn default() -> Self {
        VocabOptions {
            min_count: 1,
            canonical_sort: false,
        }
    }
}

impl Vocabulary {
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let mut v = Vocabulary {
            tokens: RESERVED.iter().map(|s| s.to_string()).collect(),
            index: HashMap::new(),
        };
        for t in tokens {
            if !v.index.contains_key(&t) && !RESERVED.contains(&t.as_str()) {
                v.index.insert(t.clone(), v.tokens.len() as u32);
                v.tokens.push(t);
            }
        }
        v
    }

    pub fn build<'a>(trees: impl IntoIterator<Item = &'a BinTree>, opts: &VocabOptions) -> Self {
        let mut order: Vec<&str> = Vec::new();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in trees {
            for leaf in t.leaves() {
                let c = counts.entry(leaf.as_str()).or_insert(0);
                if *c == 0 {
                    order.push(leaf);
                }
                *c += 1;
            }
        }
        let mut kept: Vec<&str> = order
            .into_iter()
            .filter(|t| counts[t] >= opts.min_count)
            .collect();
        if opts.canonical_sort {
            kept.sort_unstable();
        }
        Vocabulary::from_tokens(kept.into_iter().map(str::to_string))
    }

    /// Number of ids, reserved ones included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Out-of-vocabulary tokens map to `UNK`.
    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Corpus tokens in id order (reserved entries excluded).
    pub fn tokens(&self) -> &[String] {
        &self.tokens[FIRST_TOKEN as usize..]
    }

    pub fn encode(&self, t: &BinTree) -> BinTree<u32> {
        t.map(&mut |l| self.id_or_unk(l))
    }

    pub fn decode(&self, t: &BinTree<u32>) -> Result<BinTree, PipelineError> {
        t.try_map(&mut |&id| {
            self.token(id)
                .map(str::to_string)
                .ok_or(PipelineError::UnknownId(id))
        })
    }

    pub fn to_map(&self) -> BTreeMap<String, u32> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_map()).expect("map serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        let map: BTreeMap<String, u32> =
            serde_json::from_str(s).map_err(|e| PipelineError::Vocabulary(e.to_string()))?;
        Self::from_map(map)
    }

    pub fn from_map(map: BTreeMap<String, u32>) -> Result<Self, PipelineError> {
        let mut tokens = vec![String::new(); map.len()];
        for (t, id) in map {
            let slot = tokens
                .get_mut(id as usize)
                .ok_or_else(|| PipelineError::Vocabulary(format!("id {id} out of range")))?;
            if !slot.is_empty() {
                return Err(PipelineError::Vocabulary(format!("id {id} assigned twice")));
            }
            *slot = t;
        }
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*r) {
                return Err(PipelineError::Vocabulary(format!(
                    "reserved id {i} must be {r}"
                )));
            }
        }
        Ok(Vocabulary::from_tokens(
            tokens.into_iter().skip(FIRST_TOKEN as usize),
        ))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(s: &str) -> BinTree {
        BinTree::leaf(s.to_string())
    }

    #[test]
    fn single_leaf_corpus() {
        let v = Vocabulary::build([&leaf("x")], &VocabOptions::default());
        assert_eq!(v.id("x"), Some(3));
        assert_eq!(v.len(), 4);
        assert_eq!(v.id_or_unk("y"), UNK);
    }

    #[test]
    fn min_count_and_sorting() {
        let a = BinTree::node(leaf("b"), BinTree::node(leaf("a"), leaf("b")));
        let v = Vocabulary::build(
            [&a],
            &VocabOptions {
                min_count: 2,
                canonical_sort: false,
            },
        );
        assert_eq!(v.tokens(), ["b"]);
        let s = Vocabulary::build(
            [&a],
            &VocabOptions {
                min_count: 1,
                canonical_sort: true,
            },
        );
        assert_eq!(s.tokens(), ["a", "b"]);
    }

    #[test]
    fn json_round_trip_and_hash() {
        let t = BinTree::node(leaf("\\frac"), leaf("2"));
        let v = Vocabulary::build([&t], &VocabOptions::default());
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
        assert_eq!(v.decode(&v.encode(&t)).unwrap(), t);
    }

    #[test]
    fn rejects_corrupt_maps() {
        assert!(Vocabulary::from_json(r#"{"x":0}"#).is_err());
        assert!(Vocabulary::from_json(r#"{"<INTERNAL>":0,"<Y_END>":1,"<UNK>":2,"x":7}"#).is_err());
    }
}
