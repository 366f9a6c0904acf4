//! Checkpoint files: one JSON header line, then every tensor as raw
//! little-endian f64 in layout order.

use std::io::Read;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelConfig, ModelError, Params};
use crate::parser::ParserOptions;
use crate::pipeline::{Vocabs, Vocabulary};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "treetrans-checkpoint";

#[derive(Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: (usize, usize),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
    parser: ParserOptions,
    vocab_hash: String,
    vocab_in: std::collections::BTreeMap<String, u32>,
    vocab_out: std::collections::BTreeMap<String, u32>,
    tensors: Vec<TensorInfo>,
}

/// A trained model with everything needed to translate raw formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Params,
    pub vocabs: Vocabs,
    pub parser: ParserOptions,
}

fn vocab_hash(v: &Vocabs) -> String {
    let mut h = Sha256::new();
    h.update(v.input.hash());
    h.update(b"\n");
    h.update(v.output.hash());
    hex::encode(h.finalize())
}

impl Checkpoint {
    pub fn new(params: Params, vocabs: Vocabs, parser: ParserOptions) -> Result<Self, ModelError> {
        let cfg = &params.config;
        if cfg.vocab_in != vocabs.input.len() || cfg.vocab_out != vocabs.output.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "model vocabulary sizes {}/{} differ from vocabularies {}/{}",
                cfg.vocab_in,
                cfg.vocab_out,
                vocabs.input.len(),
                vocabs.output.len()
            )));
        }
        Ok(Checkpoint {
            params,
            vocabs,
            parser,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let header = Header {
            format: MAGIC.into(),
            version: CHECKPOINT_VERSION,
            config: p.config.clone(),
            parser: self.parser.clone(),
            vocab_hash: vocab_hash(&self.vocabs),
            vocab_in: self.vocabs.input.to_map(),
            vocab_out: self.vocabs.output.to_map(),
            tensors: p
                .layout
                .names
                .iter()
                .zip(&p.layout.shapes)
                .map(|(n, &s)| TensorInfo {
                    name: n.clone(),
                    shape: s,
                })
                .collect(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for t in &p.tensors {
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("missing header"))?;
        let header: Header = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if header.format != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported version {}",
                header.version
            )));
        }
        let map_err = |e: crate::pipeline::PipelineError| ModelError::Checkpoint(e.to_string());
        let vocabs = Vocabs {
            input: Vocabulary::from_map(header.vocab_in).map_err(map_err)?,
            output: Vocabulary::from_map(header.vocab_out).map_err(map_err)?,
        };
        if vocab_hash(&vocabs) != header.vocab_hash {
            return Err(bad("vocabulary hash mismatch"));
        }
        let mut params = Params::zeros(&header.config)?;
        if header.tensors.len() != params.layout.len() {
            return Err(bad("tensor count does not match the configuration"));
        }
        for (i, info) in header.tensors.iter().enumerate() {
            if info.name != params.layout.names[i] || info.shape != params.layout.shapes[i] {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {i} ({}) has an unexpected name or shape",
                    info.name
                )));
            }
        }
        let data = &bytes[nl + 1..];
        if data.len() != params.n_parameters() * 8 {
            return Err(ModelError::Checkpoint(format!(
                "expected {} bytes of tensor data, found {}",
                params.n_parameters() * 8,
                data.len()
            )));
        }
        let mut chunks = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        for (i, t) in params.tensors.iter_mut().enumerate() {
            let shape = params.layout.shapes[i];
            let vals: Vec<f64> = chunks.by_ref().take(shape.0 * shape.1).collect();
            *t = Array2::from_shape_vec(shape, vals)
                .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        }
        Checkpoint::new(params, vocabs, header.parser)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        crate::io::write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}
