use std::fs;
use std::path::Path;

use serde::Serialize;

use super::*;
use crate::clustering::{cost_proxy, pick_clustering, Clustering, Schedules};
use crate::disambig::{content_leaves, extract_instances, DisambigConfig, Disambiguator, Instance};
use crate::io::write_atomic;
use crate::metrics::EvalReport;
use crate::parser::{detokenize, parse_formula, ParserOptions};
use crate::pipeline::{
    self, gen_synthetic_corpus, gen_synthetic_corpus_with, parse_pairs, parse_tsv, split_train_val,
    to_tsv, FormulaPair, SynthConfig, TreePair, VocabOptions, Vocabs,
};
use crate::topology::Topology;
use crate::training::{batches_for, evaluate_batches, fit, EpochLog, METRICS_HEADER};
use crate::tree::BinTree;
use crate::treelstm::{decode_greedy, Checkpoint, DecodeOptions, Feed, Params};

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_corpus(path: &Path) -> Result<Vec<FormulaPair>, CliError> {
    parse_tsv(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(CliError::data)?;
    s.push('\n');
    Ok(write_atomic(path, s.as_bytes())?)
}

/// Parses both sides of every pair; unparsable pairs are logged and dropped.
fn parse_corpus(pairs: &[FormulaPair], opts: &ParserOptions) -> Result<Vec<TreePair>, CliError> {
    let (trees, failed) = parse_pairs(pairs, opts);
    for (id, e) in &failed {
        log::warn!("pair {id}: {e}; skipped");
    }
    if trees.is_empty() {
        return Err(CliError::Data("no pair of the corpus parses".into()));
    }
    Ok(trees)
}

pub fn gen_corpus(a: &GenCorpusArgs, seed: u64) -> Result<(), CliError> {
    let pairs = if a.small {
        gen_synthetic_corpus_with(seed, a.n, &SynthConfig::small()).0
    } else {
        gen_synthetic_corpus(seed, a.n)
    };
    write_atomic(&a.out, to_tsv(&pairs).as_bytes())?;
    log::info!("wrote {} pairs to {}", pairs.len(), a.out.display());
    Ok(())
}

pub fn augment(a: &AugmentArgs) -> Result<(), CliError> {
    let pairs = read_corpus(&a.input)?;
    let out = pipeline::augment_corpus(&pairs)?;
    write_atomic(&a.out, to_tsv(&out).as_bytes())?;
    log::info!("{} pairs augmented to {}", pairs.len(), out.len());
    Ok(())
}

pub fn parse(a: &ParseArgs) -> Result<(), CliError> {
    let opts = ParserOptions {
        command_end: a.command_end,
        concat_end: a.concat_end,
        infix_to_prefix: a.infix_to_prefix,
        right_biggest: !a.no_right_biggest,
    };
    let mut out = String::new();
    for (i, line) in read_text(&a.input)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t = parse_formula(line, &opts)
            .map_err(|e| CliError::Data(format!("line {}: {e}", i + 1)))?;
        out.push_str(&t.to_json());
        out.push('\n');
    }
    Ok(write_atomic(&a.out, out.as_bytes())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub trees: usize,
    pub clusters: usize,
    pub total_hull_size: u64,
    pub cost_proxy: f64,
    pub singleton_cost_proxy: f64,
}

#[derive(Serialize)]
struct ClusterOut<'a> {
    hulls: Vec<String>,
    members: &'a [usize],
    stage: usize,
}

pub fn cluster(a: &ClusterArgs) -> Result<ClusterReport, CliError> {
    let mut masks = Vec::new();
    for (i, line) in read_text(&a.input)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t =
            BinTree::from_json(line).map_err(|e| CliError::Data(format!("line {}: {e}", i + 1)))?;
        masks.push(vec![Topology::of(&t)]);
    }
    if masks.is_empty() {
        return Err(CliError::Data("no trees to cluster".into()));
    }
    if a.steps < 2 {
        return Err(CliError::Usage("--steps must be at least 2".into()));
    }
    let c = pick_clustering(&masks, &Schedules::geometric(masks.len(), a.steps));
    let out: Vec<ClusterOut> = c
        .clusters
        .iter()
        .map(|k| ClusterOut {
            hulls: k.hulls.iter().map(Topology::serialize).collect(),
            members: &k.members,
            stage: k.stage,
        })
        .collect();
    write_json(&a.out, &out)?;
    let report = ClusterReport {
        trees: masks.len(),
        clusters: c.len(),
        total_hull_size: c.total_hull_size(),
        cost_proxy: cost_proxy(&c, 1.0),
        singleton_cost_proxy: cost_proxy(&Clustering::singletons(&masks), 1.0),
    };
    if a.report {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(CliError::data)?
        );
    }
    Ok(report)
}

fn load_config(a: &TrainArgs, seed: Option<u64>) -> Result<TrainConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_kv(&read_text(p)?)?,
        None => TrainConfig::default(),
    };
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Trains on `a.corpus`; writes vocabularies, the resolved config, `last.ckpt`
/// after every epoch, `final.ckpt` and the metrics CSV.
pub fn train(a: &TrainArgs, seed: Option<u64>) -> Result<Vec<EpochLog>, CliError> {
    let cfg = load_config(a, seed)?;
    let trees = parse_corpus(&read_corpus(&a.corpus)?, &cfg.parser)?;
    let (tr, va) = split_train_val(&trees, cfg.val_fraction, cfg.seed);
    if tr.is_empty() {
        return Err(CliError::Data("training split is empty".into()));
    }
    let vocabs = Vocabs::build(
        &tr,
        &VocabOptions {
            min_count: cfg.min_count,
            ..VocabOptions::default()
        },
    );
    let dir = &a.checkpoint_dir;
    fs::create_dir_all(dir)?;
    write_atomic(
        &dir.join("vocab_in.json"),
        vocabs.input.to_json().as_bytes(),
    )?;
    write_atomic(
        &dir.join("vocab_out.json"),
        vocabs.output.to_json().as_bytes(),
    )?;
    write_atomic(&dir.join("train.cfg"), cfg.to_kv().as_bytes())?;
    let log_path = a.log.clone().unwrap_or_else(|| dir.join("metrics.csv"));
    let mut csv = format!("{METRICS_HEADER}\n");
    write_atomic(&log_path, csv.as_bytes())?;
    log::info!(
        "{} training and {} validation pairs, config sha256 {}",
        tr.len(),
        va.len(),
        config_hash(&cfg)
    );

    let (enc_tr, enc_va) = (vocabs.encode_all(&tr), vocabs.encode_all(&va));
    let last = dir.join("last.ckpt");
    let mut on_epoch = |l: &EpochLog, p: &Params| -> Result<(), TrainError> {
        csv.push_str(&l.csv_row());
        csv.push('\n');
        write_atomic(&log_path, csv.as_bytes())?;
        // autoencoder phases have their own vocabulary shapes
        if l.phase == "direct" || l.phase == "bridge" {
            Checkpoint::new(p.clone(), vocabs.clone(), cfg.parser)?.save(&last)?;
        }
        Ok(())
    };
    let (params, logs) = fit(
        &enc_tr,
        &enc_va,
        vocabs.input.len(),
        vocabs.output.len(),
        &cfg,
        &mut on_epoch,
    )
    .map_err(|e| {
        if matches!(e, TrainError::Diverged { .. }) && last.exists() {
            log::error!("last good parameters are in {}", last.display());
        }
        e
    })?;
    Checkpoint::new(params, vocabs, cfg.parser)?.save(&dir.join("final.ckpt"))?;
    Ok(logs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub feed: String,
    pub content_only_bow: bool,
    pub skipped: usize,
    pub p_f: f64,
    pub p_m: f64,
    pub p_b: f64,
    pub details: EvalReport,
}

pub fn eval(a: &EvalArgs) -> Result<EvalSummary, CliError> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let pairs = read_corpus(&a.corpus)?;
    let trees = parse_corpus(&pairs, &ck.parser)?;
    let enc = ck.vocabs.encode_all(&trees);
    let batches = batches_for(&enc, a.steps.max(2))?;
    let feed = if a.teacher_forcing {
        Feed::Teacher
    } else {
        Feed::Free
    };
    let r = evaluate_batches(&ck.params, &batches, feed, 32)?.report();
    let s = EvalSummary {
        feed: if a.teacher_forcing {
            "teacher"
        } else {
            "free-running"
        }
        .into(),
        content_only_bow: a.content_only_bow,
        skipped: pairs.len() - trees.len(),
        p_f: r.p_f,
        p_m: r.p_m,
        p_b: if a.content_only_bow {
            r.p_b_content
        } else {
            r.p_b
        },
        details: r,
    };
    match &a.report {
        Some(p) => write_json(p, &s)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&s).map_err(CliError::data)?
        ),
    }
    log::info!(
        "p_f {:.4}, p_m {:.4}, p_b {:.4} over {} trees",
        s.p_f,
        s.p_m,
        s.p_b,
        s.details.n_trees
    );
    Ok(s)
}

fn formula_text(formula: &Option<String>, file: &Option<PathBuf>) -> Result<String, CliError> {
    match (formula, file) {
        (Some(f), _) => Ok(f.clone()),
        (None, Some(p)) => Ok(read_text(p)?.trim().to_string()),
        (None, None) => Err(CliError::Usage("give --formula or --formula-file".into())),
    }
}

/// Parse, encode, decode greedily and render one formula.
pub fn translate_formula(ck: &Checkpoint, formula: &str) -> Result<String, CliError> {
    let tree = parse_formula(formula, &ck.parser).map_err(CliError::data)?;
    let out = decode_greedy(
        &ck.params,
        &ck.vocabs.input.encode(&tree),
        &DecodeOptions::default(),
    )?;
    Ok(detokenize(&ck.vocabs.output.decode(&out)?))
}

pub fn translate(a: &TranslateArgs) -> Result<String, CliError> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    translate_formula(&ck, &formula_text(&a.formula, &a.formula_file)?)
}

pub fn disambiguate(a: &DisambiguateArgs) -> Result<String, CliError> {
    let d = Disambiguator::from_json(&read_text(&a.checkpoint)?)?;
    let tree = parse_formula(
        &formula_text(&a.formula, &a.formula_file)?,
        &ParserOptions::default(),
    )
    .map_err(CliError::data)?;
    let leaves = content_leaves(&tree);
    let pos = leaves.iter().position(|l| l == &a.symbol);
    if pos.is_none() {
        log::warn!(
            "`{}` does not occur in the formula; classifying on the whole bag of words",
            a.symbol
        );
    }
    Ok(d.classify(&a.symbol, &leaves, pos)?.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisambigSummary {
    pub train_instances: usize,
    pub test_ambiguous_instances: usize,
    pub ambiguous_symbols: usize,
    pub accuracy: f64,
    pub baseline: f64,
}

pub fn train_disambiguator(
    a: &TrainDisambiguatorArgs,
    seed: u64,
) -> Result<DisambigSummary, CliError> {
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(CliError::Usage("--test-fraction must lie in [0, 1)".into()));
    }
    let trees = parse_corpus(&read_corpus(&a.corpus)?, &ParserOptions::default())?;
    let (tr, te) = split_train_val(&trees, a.test_fraction, seed);
    let (tr_inst, skipped) = extract_instances(&tr);
    if !skipped.is_empty() {
        log::warn!("{} training pairs could not be aligned", skipped.len());
    }
    let (te_inst, _) = extract_instances(&te);
    let cfg = DisambigConfig {
        hidden_layers: a.hidden_layers,
        epochs: a.epochs,
        shared: !a.per_symbol,
        binary_bow: a.binary_bow,
        seed,
        ..DisambigConfig::default()
    };
    let mut d = Disambiguator::new(&tr_inst, cfg)?;
    d.train(&tr_inst);
    let amb: Vec<Instance> = te_inst
        .into_iter()
        .filter(|i| d.table.candidates(&i.symbol).is_some_and(|c| c.len() > 1))
        .collect();
    let s = DisambigSummary {
        train_instances: tr_inst.len(),
        test_ambiguous_instances: amb.len(),
        ambiguous_symbols: d.symbols.len(),
        accuracy: d.accuracy(&amb),
        baseline: d.baseline(&amb),
    };
    write_atomic(&a.out, d.to_json().as_bytes())?;
    if let Some(p) = &a.candidates {
        write_atomic(p, d.table.to_json().as_bytes())?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&s).map_err(CliError::data)?
    );
    Ok(s)
}

/// The whole pipeline into `out_dir` on a fresh synthetic corpus.
pub fn demo(a: &DemoArgs, seed: u64) -> Result<(), CliError> {
    let dir = &a.out_dir;
    fs::create_dir_all(dir)?;
    let corpus = dir.join("corpus.tsv");
    let aug = dir.join("aug.tsv");
    let heldout = dir.join("heldout.tsv");
    gen_corpus(
        &GenCorpusArgs {
            n: a.n,
            out: corpus.clone(),
            small: true,
        },
        seed,
    )?;
    gen_corpus(
        &GenCorpusArgs {
            n: (a.n / 4).max(1),
            out: heldout.clone(),
            small: true,
        },
        seed.wrapping_add(1),
    )?;
    augment(&AugmentArgs {
        input: corpus,
        out: aug.clone(),
    })?;

    let generic: String = read_corpus(&aug)?
        .iter()
        .map(|p| format!("{}\n", p.generic))
        .collect();
    write_atomic(&dir.join("generic.txt"), generic.as_bytes())?;
    parse(&ParseArgs {
        input: dir.join("generic.txt"),
        out: dir.join("generic.jsonl"),
        command_end: true,
        concat_end: true,
        infix_to_prefix: false,
        no_right_biggest: false,
    })?;
    let report = cluster(&ClusterArgs {
        input: dir.join("generic.jsonl"),
        steps: 20,
        out: dir.join("clusters.json"),
        report: false,
    })?;
    write_json(&dir.join("cluster-report.json"), &report)?;

    let cfg = TrainConfig {
        state: a.state,
        epochs: a.epochs,
        learning_rate: Some(1e-4),
        seed,
        ..TrainConfig::default()
    };
    write_atomic(&dir.join("train.cfg"), cfg.to_kv().as_bytes())?;
    let ckpts = dir.join("ckpts");
    train(
        &TrainArgs {
            corpus: aug.clone(),
            config: Some(dir.join("train.cfg")),
            set: Vec::new(),
            checkpoint_dir: ckpts.clone(),
            log: Some(dir.join("metrics.csv")),
        },
        Some(seed),
    )?;
    let summary = eval(&EvalArgs {
        checkpoint: ckpts.join("final.ckpt"),
        corpus: heldout.clone(),
        report: Some(dir.join("report.json")),
        content_only_bow: false,
        teacher_forcing: false,
        steps: 20,
    })?;
    let ds = train_disambiguator(
        &TrainDisambiguatorArgs {
            corpus: aug,
            out: dir.join("disambig.json"),
            candidates: Some(dir.join("candidates.json")),
            hidden_layers: 1,
            epochs: 30,
            per_symbol: false,
            binary_bow: false,
            test_fraction: 0.2,
        },
        seed,
    )?;
    write_json(&dir.join("disambig-report.json"), &ds)?;
    let ck = Checkpoint::load(&ckpts.join("final.ckpt"))?;
    if let Some(p) = read_corpus(&heldout)?.first() {
        println!(
            "input:     {}\nreference: {}\nmodel:     {}",
            p.generic,
            p.semantic,
            translate_formula(&ck, &p.generic)?
        );
    }
    println!(
        "clusters {} (cost proxy {:.0} vs {:.0} unclustered); held-out p_f {:.4} p_m {:.4} p_b {:.4}; disambiguation {:.3} vs baseline {:.3}",
        report.clusters,
        report.cost_proxy,
        report.singleton_cost_proxy,
        summary.p_f,
        summary.p_m,
        summary.p_b,
        ds.accuracy,
        ds.baseline
    );
    Ok(())
}
