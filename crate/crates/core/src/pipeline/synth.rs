//! Deterministic paired generic/semantic formula generator.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::FormulaPair;

/// One semantic reading of an ambiguous generic symbol, identified by the
/// context tokens that appear in its argument.
#[derive(Debug, Clone, Copy)]
pub struct Reading {
    pub macro_name: &'static str,
    pub context: [&'static str; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct AmbiguousSymbol {
    pub generic: &'static str,
    /// `\bar{X}` style (argument in braces) rather than `\Gamma(X)`.
    pub braced: bool,
    pub readings: [Reading; 2],
}

pub const AMBIGUOUS: &[AmbiguousSymbol] = &[
    AmbiguousSymbol {
        generic: r"\Gamma",
        braced: false,
        readings: [
            Reading {
                macro_name: r"\EulerGamma",
                context: ["z", "s"],
            },
            Reading {
                macro_name: r"\incGamma",
                context: ["a", "k"],
            },
        ],
    },
    AmbiguousSymbol {
        generic: r"\zeta",
        braced: false,
        readings: [
            Reading {
                macro_name: r"\RiemannZeta",
                context: ["u", r"\sigma"],
            },
            Reading {
                macro_name: r"\HurwitzZeta",
                context: ["v", r"\rho"],
            },
        ],
    },
    AmbiguousSymbol {
        generic: r"\psi",
        braced: false,
        readings: [
            Reading {
                macro_name: r"\digamma",
                context: ["p", r"\xi"],
            },
            Reading {
                macro_name: r"\polygamma",
                context: ["m", r"\eta"],
            },
        ],
    },
    AmbiguousSymbol {
        generic: r"\theta",
        braced: false,
        readings: [
            Reading {
                macro_name: r"\Jacobitheta",
                context: ["q", r"\tau"],
            },
            Reading {
                macro_name: r"\Chebyshevtheta",
                context: ["r", r"\lambda"],
            },
        ],
    },
    AmbiguousSymbol {
        generic: r"\phi",
        braced: false,
        readings: [
            Reading {
                macro_name: r"\EulerPhi",
                context: ["j", r"\kappa"],
            },
            Reading {
                macro_name: r"\Hankelphi",
                context: ["b", r"\chi"],
            },
        ],
    },
    AmbiguousSymbol {
        generic: r"\bar",
        braced: true,
        readings: [
            Reading {
                macro_name: r"\conj",
                context: ["w", r"\omega"],
            },
            Reading {
                macro_name: r"\mean",
                context: ["n", r"\mu"],
            },
        ],
    },
];

const FUNCTIONS: &[&str] = &[r"\sin", r"\cos", r"\tan", r"\ln", r"\exp"];
const VARIABLES: &[&str] = &["x", "y", "t"];
const RELATIONS: &[&str] = &["=", r"\leq", "<"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Maximum nesting depth of expression productions.
    pub max_depth: usize,
    /// Maximum token count per side; longer draws are resampled.
    pub max_tokens: usize,
    /// Probability that a formula is a relation rather than a single expression.
    pub relation_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_depth: 3,
            max_tokens: 40,
            relation_prob: 0.35,
        }
    }
}

impl SynthConfig {
    /// Short formulas, for smoke runs and overfitting checks.
    pub fn small() -> Self {
        SynthConfig {
            max_depth: 2,
            max_tokens: 14,
            relation_prob: 0.2,
        }
    }
}

/// Per-production usage counts.
pub type Coverage = BTreeMap<String, usize>;

/// Every production name the generator can record.
pub fn production_names() -> Vec<String> {
    let mut v: Vec<String> = [
        "formula/single",
        "formula/relation",
        "formula/chain",
        "expr/term",
        "expr/sum",
        "expr/difference",
        "expr/product",
        "expr/negation",
        "term/var",
        "term/num",
        "term/frac",
        "term/sqrt",
        "term/power",
        "term/subscript",
        "term/paren",
        "term/pi",
        "term/exp",
        "term/imag",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend(FUNCTIONS.iter().map(|f| format!("function/{f}")));
    for a in AMBIGUOUS {
        v.extend(
            a.readings
                .iter()
                .map(|r| format!("special/{}", r.macro_name)),
        );
    }
    v
}

struct Side {
    generic: Vec<String>,
    semantic: Vec<String>,
}

impl Side {
    fn both(&mut self, tok: &str) {
        self.generic.push(tok.to_string());
        self.semantic.push(tok.to_string());
    }
    fn gen(&mut self, tok: &str) {
        self.generic.push(tok.to_string());
    }
    fn sem(&mut self, tok: &str) {
        self.semantic.push(tok.to_string());
    }
}

/// Joins tokens, inserting a space only where a `\word` command would
/// otherwise run into a following letter.
pub fn join_tokens(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut after_word = false;
    for t in tokens {
        if after_word && t.starts_with(|c: char| c.is_ascii_alphabetic()) {
            out.push(' ');
        }
        out.push_str(t);
        after_word = t.starts_with('\\') && t[1..].starts_with(|c: char| c.is_ascii_alphabetic());
    }
    out
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a SynthConfig,
    cov: Coverage,
}

impl Gen<'_> {
    fn hit(&mut self, name: &str) {
        *self.cov.entry(name.to_string()).or_default() += 1;
    }

    fn pick<'b>(&mut self, xs: &'b [&'b str]) -> &'b str {
        xs.choose(&mut self.rng).expect("non-empty table")
    }

    fn formula(&mut self, out: &mut Side) {
        if !self.rng.random_bool(self.cfg.relation_prob) {
            self.hit("formula/single");
            self.expr(out, 0);
            return;
        }
        let chain = self.rng.random_bool(0.3);
        self.hit(if chain {
            "formula/chain"
        } else {
            "formula/relation"
        });
        self.expr(out, 1);
        for _ in 0..(1 + usize::from(chain)) {
            let rel = self.pick(RELATIONS);
            out.both(rel);
            self.expr(out, 1);
        }
    }

    fn expr(&mut self, out: &mut Side, depth: usize) {
        let shallow = depth + 1 < self.cfg.max_depth;
        match self.rng.random_range(0..10) {
            0..=3 => {
                self.hit("expr/term");
                self.term(out, depth);
            }
            4 | 5 if shallow => {
                self.hit("expr/sum");
                self.term(out, depth + 1);
                out.both("+");
                self.expr(out, depth + 1);
            }
            6 if shallow => {
                self.hit("expr/difference");
                self.term(out, depth + 1);
                out.both("-");
                self.term(out, depth + 1);
            }
            7 | 8 => {
                self.hit("expr/product");
                if self.rng.random_bool(0.5) {
                    let n = self.rng.random_range(2..10).to_string();
                    out.both(&n);
                } else {
                    let v = self.pick(VARIABLES);
                    out.both(v);
                }
                self.atom(out, depth + 1);
            }
            _ => {
                self.hit("expr/negation");
                out.both("-");
                self.term(out, depth + 1);
            }
        }
    }

    /// Terms that never start with a digit.
    fn atom(&mut self, out: &mut Side, depth: usize) {
        loop {
            let before = (out.generic.len(), out.semantic.len());
            self.term(out, depth);
            let starts_with_digit = out.generic[before.0].starts_with(|c: char| c.is_ascii_digit());
            if !starts_with_digit {
                return;
            }
            out.generic.truncate(before.0);
            out.semantic.truncate(before.1);
        }
    }

    fn term(&mut self, out: &mut Side, depth: usize) {
        let leaf_only = depth >= self.cfg.max_depth;
        let choice = if leaf_only {
            self.rng.random_range(0..5)
        } else {
            self.rng.random_range(0..16)
        };
        match choice {
            0 | 1 => {
                self.hit("term/var");
                let v = self.pick(VARIABLES);
                out.both(v);
            }
            2 => {
                self.hit("term/num");
                let n = self.rng.random_range(1..20).to_string();
                out.both(&n);
            }
            3 => {
                self.hit("term/pi");
                out.gen(r"\pi");
                out.sem(r"\cpi");
            }
            4 => {
                self.hit("term/imag");
                out.gen("i");
                out.sem(r"\iunit");
            }
            5 => {
                self.hit("term/frac");
                out.both(r"\frac");
                out.both("{");
                self.expr(out, depth + 1);
                out.both("}");
                out.both("{");
                self.expr(out, depth + 1);
                out.both("}");
            }
            6 => {
                self.hit("term/sqrt");
                out.both(r"\sqrt");
                out.both("{");
                self.expr(out, depth + 1);
                out.both("}");
            }
            7 => {
                self.hit("term/power");
                let v = self.pick(VARIABLES);
                out.both(v);
                out.both("^");
                out.both("{");
                self.expr(out, depth + 1);
                out.both("}");
            }
            8 => {
                self.hit("term/subscript");
                let v = self.pick(VARIABLES);
                out.both(v);
                out.both("_");
                out.both("{");
                let n = self.rng.random_range(0..4).to_string();
                out.both(&n);
                out.both("}");
            }
            9 => {
                self.hit("term/paren");
                out.both("(");
                self.expr(out, depth + 1);
                out.both(")");
            }
            10 => {
                self.hit("term/exp");
                out.gen("e");
                out.sem(r"\expe");
                out.both("^");
                out.both("{");
                self.expr(out, depth + 1);
                out.both("}");
            }
            11 | 12 => {
                let f = self.pick(FUNCTIONS);
                self.hit(&format!("function/{f}"));
                out.both(f);
                out.gen("(");
                out.sem("@");
                out.sem("{");
                self.expr(out, depth + 1);
                out.gen(")");
                out.sem("}");
            }
            _ => self.special(out, depth),
        }
    }

    fn special(&mut self, out: &mut Side, depth: usize) {
        let sym = *AMBIGUOUS.choose(&mut self.rng).expect("non-empty table");
        let reading = sym.readings[self.rng.random_range(0..2)];
        self.hit(&format!("special/{}", reading.macro_name));
        out.gen(sym.generic);
        out.sem(reading.macro_name);
        if sym.braced {
            out.both("{");
        } else {
            out.gen("(");
            out.sem("@");
            out.sem("{");
        }
        let ctx = reading.context[self.rng.random_range(0..2)];
        match self.rng.random_range(0..4) {
            0 => out.both(ctx),
            1 => {
                out.both(ctx);
                out.both("+");
                let n = self.rng.random_range(1..10).to_string();
                out.both(&n);
            }
            2 => {
                let n = self.rng.random_range(2..10).to_string();
                out.both(&n);
                out.both(ctx);
            }
            _ => {
                out.both(ctx);
                out.both("+");
                self.term(out, depth + 1);
            }
        }
        if sym.braced {
            out.both("}");
        } else {
            out.gen(")");
            out.sem("}");
        }
    }
}

fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn token_count(tokens: &[String]) -> usize {
    tokens.iter().filter(|t| *t != "{" && *t != "}").count()
}

fn generate_one(seed: u64, index: u64, cfg: &SynthConfig) -> (FormulaPair, Coverage) {
    let mut g = Gen {
        rng: item_rng(seed, index),
        cfg,
        cov: Coverage::new(),
    };
    loop {
        g.cov.clear();
        let mut side = Side {
            generic: Vec::new(),
            semantic: Vec::new(),
        };
        g.formula(&mut side);
        if token_count(&side.generic) <= cfg.max_tokens
            && token_count(&side.semantic) <= cfg.max_tokens
        {
            let pair = FormulaPair::new(
                format!("s{index}"),
                join_tokens(&side.generic),
                join_tokens(&side.semantic),
            );
            return (pair, g.cov);
        }
    }
}

/// `n` pairs, deterministic in `seed` regardless of thread count.
pub fn gen_synthetic_corpus(seed: u64, n: usize) -> Vec<FormulaPair> {
    gen_synthetic_corpus_with(seed, n, &SynthConfig::default()).0
}

pub fn gen_synthetic_corpus_with(
    seed: u64,
    n: usize,
    cfg: &SynthConfig,
) -> (Vec<FormulaPair>, Coverage) {
    let items: Vec<(FormulaPair, Coverage)> = (0..n as u64)
        .into_par_iter()
        .map(|i| generate_one(seed, i, cfg))
        .collect();
    let mut coverage = Coverage::new();
    let mut pairs = Vec::with_capacity(n);
    for (p, c) in items {
        for (k, v) in c {
            *coverage.entry(k).or_default() += v;
        }
        pairs.push(p);
    }
    (pairs, coverage)
}
