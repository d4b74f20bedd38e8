use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hyperrole(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperrole"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const FAST: &str = "[geometry]\ndim = 4\n[embed]\nepochs = 20\n[walk]\ndim = 8\nepochs = 1\n[classifier]\nmax_epochs = 30\n";

fn small_planted(dir: &Path) -> (String, String) {
    let data = dir.join("data");
    let out = hyperrole(&[
        "--out",
        p(&data),
        "synth",
        "roles",
        "--traders",
        "40",
        "--transfers",
        "800",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    (
        p(&data.join("transactions.csv")).to_string(),
        p(&data.join("name_tags.csv")).to_string(),
    )
}

#[test]
fn single_node_graph_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let tx = dir.path().join("tx.csv");
    fs::write(
        &tx,
        "chain,token,tx_id,timestamp,from,to,value,function_name\n\
         ethereum,BUIDL,0x1,2024-01-01,0xaa,0xaa,5,transfer\n",
    )
    .unwrap();
    let out = hyperrole(&["--out", p(dir.path()), "embed", "--transactions", p(&tx)]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.lines().any(|l| l.starts_with("error: DegenerateGraph:")), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    let out = hyperrole(&["embed", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[embed]\nmargn = 1.0\n").unwrap();
    let out = hyperrole(&["--config", p(&cfg), "synth", "tree"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error: InvalidConfig:"));
}

#[test]
fn missing_column_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let tx = dir.path().join("tx.csv");
    fs::write(&tx, "chain,token,from,to\nethereum,BUIDL,0xaa,0xbb\n").unwrap();
    let out = hyperrole(&["--out", p(dir.path()), "ingest", "--transactions", p(&tx)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("error: MissingColumn:"));
}

#[test]
fn pipeline_runs_and_eval_rejects_mismatched_features() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fast.toml");
    fs::write(&cfg, FAST).unwrap();
    let (tx, labels) = small_planted(dir.path());
    let run = dir.path().join("run");
    let out = hyperrole(&[
        "--config",
        p(&cfg),
        "--out",
        p(&run),
        "run-all",
        "--transactions",
        &tx,
        "--labels",
        &labels,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["metrics.csv", "model.json", "predictions.csv", "refined_embedding.csv", "trust.csv"] {
        assert!(run.join(f).exists(), "{f} missing");
    }

    // drop every walk coordinate but the first
    let walk = fs::read_to_string(run.join("walk_embedding.csv")).unwrap();
    let narrow: String = walk
        .lines()
        .map(|l| l.splitn(3, ',').take(2).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let narrow_path = dir.path().join("narrow_walk.csv");
    fs::write(&narrow_path, narrow).unwrap();

    let eval = |walk: &Path| {
        hyperrole(&[
            "--config",
            p(&cfg),
            "--out",
            p(&dir.path().join("eval")),
            "classify",
            "eval",
            "--model",
            p(&run.join("model.json")),
            "--embedding",
            p(&run.join("refined_embedding.csv")),
            "--hier",
            p(&run.join("hier_features.csv")),
            "--walk",
            p(walk),
            "--labels",
            &labels,
        ])
    };
    let ok = eval(&run.join("walk_embedding.csv"));
    assert!(ok.status.success(), "{}", stderr(&ok));
    let bad = eval(&narrow_path);
    assert_eq!(bad.status.code(), Some(3));
    assert!(stderr(&bad).contains("error: MisalignedInputs:"), "{}", stderr(&bad));
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fast.toml");
    fs::write(&cfg, FAST).unwrap();
    let (tx, labels) = small_planted(dir.path());
    let out_dir = dir.path().join("stages");
    let o = p(&out_dir);
    let step = |args: &[&str]| {
        let mut all = vec!["--config", p(&cfg), "--out", o];
        all.extend_from_slice(args);
        let out = hyperrole(&all);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    step(&["ingest", "--transactions", &tx]);
    step(&["label", "--labels", &labels]);
    step(&["embed", "--transactions", &tx]);
    let emb = p(&out_dir.join("embedding.csv")).to_string();
    step(&["refine", "--transactions", &tx, "--embedding", &emb]);
    let refined = p(&out_dir.join("refined_embedding.csv")).to_string();
    step(&["features", "--transactions", &tx, "--embedding", &refined]);
    let hier = p(&out_dir.join("hier_features.csv")).to_string();
    let walk = p(&out_dir.join("walk_embedding.csv")).to_string();
    step(&[
        "classify", "train", "--embedding", &refined, "--hier", &hier, "--walk", &walk, "--labels", &labels,
    ]);
    let model = p(&out_dir.join("model.json")).to_string();
    step(&["classify", "predict", "--model", &model, "--embedding", &refined, "--hier", &hier, "--walk", &walk]);
    let predictions = fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
    assert!(predictions.starts_with("node,predicted_role,"));
    assert_eq!(predictions.lines().count(), 1 + 52);
}

#[test]
fn bucketing_and_report_use_the_named_rules() {
    let dir = tempfile::tempdir().unwrap();
    let tx = dir.path().join("tx.csv");
    fs::write(
        &tx,
        "chain,token,tx_id,timestamp,from,to,value,function_name\n\
         ethereum,USDY,0x1,2024-01-01,0xaa,0xbb,5,swapAndStartBridgeTokens\n\
         polygon,USDY,0x2,2024-01-02,0xbb,0xcc,7,approve\n",
    )
    .unwrap();
    let o = p(dir.path());
    let out = hyperrole(&["--out", o, "bucket", "--transactions", p(&tx), "--rules", "usdy"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let bucketed = fs::read_to_string(dir.path().join("bucketed.csv")).unwrap();
    assert!(bucketed.contains("bridge") && bucketed.contains("approval"));
    let out = hyperrole(&["--out", o, "report", "--transactions", p(&tx), "--rules", "usdy"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn synth_tree_and_lemma_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = p(dir.path());
    assert!(hyperrole(&["--out", o, "synth", "tree"]).status.success());
    let out = hyperrole(&[
        "--out",
        o,
        "synth",
        "check-lemma",
        "--depths",
        p(&dir.path().join("tree_depths.csv")),
        "--embedding",
        p(&dir.path().join("tree_ideal_embedding.csv")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("input: spearman_rho=1 "));
}
