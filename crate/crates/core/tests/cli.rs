use std::fs;
use std::path::Path;
use std::process::Command;

use treetrans::cli::{run, CliError};
use treetrans::training::TrainError;
use treetrans::tree::BinTree;

fn tt(args: &[&str]) -> i32 {
    run(std::iter::once("treetrans").chain(args.iter().copied()))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn binary_without_arguments_prints_usage_and_fails() {
    let out = Command::new(env!("CARGO_BIN_EXE_treetrans"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let v = Command::new(env!("CARGO_BIN_EXE_treetrans"))
        .arg("--version")
        .output()
        .unwrap();
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains("config sha256"));
}

#[test]
fn exit_codes() {
    assert_eq!(tt(&["no-such-command"]), 1);
    assert_eq!(
        tt(&["--threads", "0", "gen-corpus", "--out", "/nonexistent/x"]),
        1
    );
    assert_eq!(
        tt(&[
            "eval",
            "--checkpoint",
            "/nonexistent.ckpt",
            "--corpus",
            "/nonexistent.tsv"
        ]),
        2
    );
    assert_eq!(
        CliError::from(TrainError::Diverged { epoch: 2 }).exit_code(),
        3
    );
    assert_eq!(CliError::from(TrainError::NonFiniteLoss).exit_code(), 3);
    assert_eq!(
        CliError::from(TrainError::UnknownKey("x".into())).exit_code(),
        1
    );
}

#[test]
fn front_stages_chain_through_files() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(
        tt(&[
            "--seed",
            "4",
            "gen-corpus",
            "--n",
            "50",
            "--small",
            "--out",
            &p(dir, "c.tsv")
        ]),
        0
    );
    assert_eq!(
        tt(&[
            "augment",
            "--in",
            &p(dir, "c.tsv"),
            "--out",
            &p(dir, "a.tsv")
        ]),
        0
    );
    let aug = fs::read_to_string(dir.join("a.tsv")).unwrap();
    let generic: Vec<&str> = aug.lines().filter_map(|l| l.split('\t').nth(1)).collect();
    assert!(generic.len() >= 50);
    fs::write(dir.join("g.txt"), generic.join("\n")).unwrap();
    assert_eq!(
        tt(&[
            "parse",
            "--input",
            &p(dir, "g.txt"),
            "--command-end",
            "--concat-end",
            "--out",
            &p(dir, "g.jsonl")
        ]),
        0
    );
    let trees = fs::read_to_string(dir.join("g.jsonl")).unwrap();
    assert_eq!(trees.lines().count(), generic.len());
    for l in trees.lines() {
        assert_eq!(BinTree::from_json(l).unwrap().to_json(), l);
    }
    assert_eq!(
        tt(&[
            "cluster",
            "--in",
            &p(dir, "g.jsonl"),
            "--steps",
            "20",
            "--out",
            &p(dir, "cl.json")
        ]),
        0
    );
    let cl: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("cl.json")).unwrap()).unwrap();
    let mut members: Vec<u64> = cl
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| {
            c["members"]
                .as_array()
                .unwrap()
                .iter()
                .map(|m| m.as_u64().unwrap())
        })
        .collect();
    members.sort_unstable();
    assert_eq!(members, (0..generic.len() as u64).collect::<Vec<_>>());

    fs::write(dir.join("bad.txt"), "\\frac{a}{b\n").unwrap();
    assert_eq!(
        tt(&[
            "parse",
            "--input",
            &p(dir, "bad.txt"),
            "--out",
            &p(dir, "bad.jsonl")
        ]),
        2
    );
    assert!(!dir.join("bad.jsonl").exists());
}

#[test]
fn gen_corpus_depends_only_on_the_seed() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    for (name, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        assert_eq!(
            tt(&[
                "--seed",
                seed,
                "gen-corpus",
                "--n",
                "30",
                "--out",
                &p(dir, name)
            ]),
            0
        );
    }
    let r = |n| fs::read(dir.join(n)).unwrap();
    assert_eq!(r("a"), r("b"));
    assert_ne!(r("a"), r("c"));
}

#[test]
fn train_eval_translate_and_config_errors() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(
        tt(&[
            "gen-corpus",
            "--n",
            "40",
            "--small",
            "--out",
            &p(dir, "c.tsv")
        ]),
        0
    );
    fs::write(dir.join("bad.cfg"), "state = 8\nlearning_rat = 1e-4\n").unwrap();
    let base = [
        "train",
        "--corpus",
        &p(dir, "c.tsv"),
        "--checkpoint-dir",
        &p(dir, "ck"),
    ];
    assert_eq!(
        tt(&[&base[..], &["--config", &p(dir, "bad.cfg")]].concat()),
        1
    );
    assert_eq!(
        tt(&[&base[..], &["--set", "learning_rate=1e-2"]].concat()),
        1
    );
    let ok = [
        &base[..],
        &[
            "--set",
            "state=8",
            "--set",
            "epochs=2",
            "--set",
            "learning_rate=1e-4",
        ],
    ]
    .concat();
    assert_eq!(tt(&ok), 0);
    let csv = fs::read_to_string(dir.join("ck/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(
        csv.starts_with("epoch,train_loss,train_pf,train_pm,val_pf,val_pm,val_pb,wall_seconds\n")
    );
    for f in [
        "final.ckpt",
        "last.ckpt",
        "vocab_in.json",
        "vocab_out.json",
        "train.cfg",
    ] {
        assert!(dir.join("ck").join(f).exists(), "{f}");
    }
    let vocab: std::collections::BTreeMap<String, u32> =
        serde_json::from_str(&fs::read_to_string(dir.join("ck/vocab_out.json")).unwrap()).unwrap();
    assert_eq!(vocab["<Y_END>"], 1);

    let ck = p(dir, "ck/final.ckpt");
    assert_eq!(
        tt(&[
            "eval",
            "--checkpoint",
            &ck,
            "--corpus",
            &p(dir, "c.tsv"),
            "--report",
            &p(dir, "r.json")
        ]),
        0
    );
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("r.json")).unwrap()).unwrap();
    let pf = r["p_f"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pf));
    assert_eq!(r["details"]["n_trees"].as_u64(), Some(40));
    assert_eq!(
        tt(&["translate", "--checkpoint", &ck, "--formula", "\\sin x + 1"]),
        0
    );
    assert_eq!(
        tt(&["translate", "--checkpoint", &ck, "--formula", "\\frac{"]),
        2
    );
}

#[test]
fn disambiguator_round_trip_through_files() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(
        tt(&[
            "--seed",
            "2",
            "gen-corpus",
            "--n",
            "400",
            "--out",
            &p(dir, "c.tsv")
        ]),
        0
    );
    let args = [
        "train-disambiguator",
        "--corpus",
        &p(dir, "c.tsv"),
        "--out",
        &p(dir, "d.json"),
    ];
    assert_eq!(
        tt(&[
            &args[..],
            &["--candidates", &p(dir, "cands.json"), "--epochs", "5"]
        ]
        .concat()),
        0
    );
    let cands: std::collections::BTreeMap<String, Vec<String>> =
        serde_json::from_str(&fs::read_to_string(dir.join("cands.json")).unwrap()).unwrap();
    let (sym, list) = cands.iter().find(|(_, v)| v.len() > 1).unwrap();
    fs::write(dir.join("f.tex"), format!("{sym}{{x}} + y")).unwrap();
    let a = treetrans::cli::DisambiguateArgs {
        symbol: sym.clone(),
        formula: None,
        formula_file: Some(dir.join("f.tex")),
        checkpoint: dir.join("d.json"),
    };
    let m = treetrans::cli::disambiguate(&a).unwrap();
    assert!(list.contains(&m), "{m} not among {list:?}");
    assert_eq!(
        tt(&[
            "disambiguate",
            "--symbol",
            "\\nosuch",
            "--formula",
            "x",
            "--checkpoint",
            &p(dir, "d.json")
        ]),
        2
    );
    assert_eq!(tt(&[&args[..], &["--hidden-layers", "6"]].concat()), 1);
}
