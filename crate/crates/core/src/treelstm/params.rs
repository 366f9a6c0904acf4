use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeMode {
    /// Encoder state passed through unchanged; needs equal state sizes.
    None,
    /// `tanh(h W + b)` on both `h` and `c`.
    Tanh,
    /// `h W + b` on both `h` and `c`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_in: usize,
    pub vocab_out: usize,
    pub embed: usize,
    pub enc_state: usize,
    pub dec_state: usize,
    pub layers: usize,
    /// Width of the hidden layer of the output projection.
    pub proj: usize,
    pub bridge: BridgeMode,
}

impl ModelConfig {
    pub fn new(vocab_in: usize, vocab_out: usize, state: usize) -> Self {
        ModelConfig {
            vocab_in,
            vocab_out,
            embed: state,
            enc_state: state,
            dec_state: state,
            layers: 1,
            proj: state,
            bridge: BridgeMode::Tanh,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            self.vocab_in,
            self.vocab_out,
            self.embed,
            self.enc_state,
            self.dec_state,
            self.layers,
            self.proj,
        ];
        if dims.contains(&0) {
            return Err(ModelError::InvalidConfig(
                "all sizes must be positive".into(),
            ));
        }
        if self.bridge == BridgeMode::None && self.enc_state != self.dec_state {
            return Err(ModelError::BridgeRequired {
                enc: self.enc_state,
                dec: self.dec_state,
            });
        }
        Ok(())
    }

    fn enc_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embed
        } else {
            self.enc_state
        }
    }

    fn dec_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embed
        } else {
            self.dec_state
        }
    }

    /// Closed-form parameter count of the shape table.
    pub fn parameter_count(&self) -> usize {
        let (e, de, dd) = (self.embed, self.enc_state, self.dec_state);
        let mut n = self.vocab_in * e + (self.vocab_out + 1) * e;
        for l in 0..self.layers {
            n += self.enc_in(l) * 5 * de + 2 * de * 5 * de + 5 * de;
            if self.bridge != BridgeMode::None {
                n += 2 * (de * dd + dd);
            }
            n += 2 * (self.dec_in(l) * 4 * dd + dd * 4 * dd + 4 * dd);
        }
        n + dd * self.proj + self.proj + self.proj * self.vocab_out + self.vocab_out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncIdx {
    pub w: usize,
    pub ul: usize,
    pub ur: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BridgeIdx {
    pub wh: usize,
    pub bh: usize,
    pub wc: usize,
    pub bc: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecIdx {
    pub w: usize,
    pub u: usize,
    pub b: usize,
}

/// Positions of every tensor in [`Params::tensors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub emb_in: usize,
    /// Parent-value embedding of the decoder; the last row is the root's BOS value.
    pub emb_out: usize,
    pub enc: Vec<EncIdx>,
    pub bridge: Vec<BridgeIdx>,
    /// Per layer, the left-branch and right-branch cells.
    pub dec: Vec<[DecIdx; 2]>,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub names: Vec<String>,
    pub shapes: Vec<(usize, usize)>,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut names = Vec::new();
        let mut shapes = Vec::new();
        let mut add = |name: String, r: usize, c: usize| {
            names.push(name);
            shapes.push((r, c));
            names.len() - 1
        };
        let (e, de, dd) = (cfg.embed, cfg.enc_state, cfg.dec_state);
        let emb_in = add("embed_in".into(), cfg.vocab_in, e);
        let emb_out = add("embed_out".into(), cfg.vocab_out + 1, e);
        let mut enc = Vec::new();
        let mut bridge = Vec::new();
        let mut dec = Vec::new();
        for l in 0..cfg.layers {
            enc.push(EncIdx {
                w: add(format!("enc{l}.w"), cfg.enc_in(l), 5 * de),
                ul: add(format!("enc{l}.u_left"), de, 5 * de),
                ur: add(format!("enc{l}.u_right"), de, 5 * de),
                b: add(format!("enc{l}.b"), 1, 5 * de),
            });
            if cfg.bridge != BridgeMode::None {
                bridge.push(BridgeIdx {
                    wh: add(format!("bridge{l}.w_h"), de, dd),
                    bh: add(format!("bridge{l}.b_h"), 1, dd),
                    wc: add(format!("bridge{l}.w_c"), de, dd),
                    bc: add(format!("bridge{l}.b_c"), 1, dd),
                });
            }
            let mut branch = |side: &str| DecIdx {
                w: add(format!("dec{l}.{side}.w"), cfg.dec_in(l), 4 * dd),
                u: add(format!("dec{l}.{side}.u"), dd, 4 * dd),
                b: add(format!("dec{l}.{side}.b"), 1, 4 * dd),
            };
            let left = branch("left");
            let right = branch("right");
            dec.push([left, right]);
        }
        let w1 = add("proj.w1".into(), dd, cfg.proj);
        let b1 = add("proj.b1".into(), 1, cfg.proj);
        let w2 = add("proj.w2".into(), cfg.proj, cfg.vocab_out);
        let b2 = add("proj.b2".into(), 1, cfg.vocab_out);
        Layout {
            emb_in,
            emb_out,
            enc,
            bridge,
            dec,
            w1,
            b1,
            w2,
            b2,
            names,
            shapes,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Whether tensor `i` is a bias (initialized to zero).
    pub fn is_bias(&self, i: usize) -> bool {
        self.names[i].ends_with(".b")
            || self.names[i].contains(".b_")
            || self.names[i].ends_with(".b1")
            || self.names[i].ends_with(".b2")
    }

    /// Gate blocks of tensor `i` for per-block Xavier bounds.
    fn blocks(&self, i: usize) -> usize {
        let n = &self.names[i];
        if n.starts_with("enc") {
            5
        } else if n.starts_with("dec") {
            4
        } else {
            1
        }
    }
}

/// All network tensors in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub config: ModelConfig,
    pub layout: Layout,
    pub tensors: Vec<Array2<f64>>,
}

/// Uniform in `±sqrt(6 / (rows + cols))`.
pub fn xavier_init(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Layout::new(config);
        let tensors = layout.shapes.iter().map(|&s| Array2::zeros(s)).collect();
        Ok(Params {
            config: config.clone(),
            layout,
            tensors,
        })
    }

    /// Xavier-uniform weights (per gate block), zero biases.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..p.layout.len() {
            if p.layout.is_bias(i) {
                continue;
            }
            let (rows, cols) = p.layout.shapes[i];
            // Each gate block is its own rows × d matrix for the Xavier bound.
            let block_cols = cols / p.layout.blocks(i);
            let bound = (6.0 / (rows + block_cols) as f64).sqrt();
            p.tensors[i] =
                Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound));
        }
        let n: usize = p.tensors.iter().map(|t| t.len()).sum();
        assert_eq!(
            n,
            config.parameter_count(),
            "shape table disagrees with closed-form count"
        );
        Ok(p)
    }

    pub fn zeros_like(&self) -> Vec<Array2<f64>> {
        self.tensors
            .iter()
            .map(|t| Array2::zeros(t.raw_dim()))
            .collect()
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn bos(&self) -> usize {
        self.config.vocab_out
    }

    /// Square identity weights, zero biases; with [`BridgeMode::Linear`] the bridge is then the identity.
    pub fn set_identity_bridge(&mut self) {
        for b in self.layout.bridge.clone() {
            for (w, bias) in [(b.wh, b.bh), (b.wc, b.bc)] {
                let (r, c) = self.layout.shapes[w];
                self.tensors[w] =
                    Array2::from_shape_fn((r, c), |(i, j)| if i == j { 1.0 } else { 0.0 });
                self.tensors[bias].fill(0.0);
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}
