//! End-to-end checks of the command-line interface: real subprocesses, real
//! files, and the exit-code contract (0 success, 1 bad input, 2 runtime
//! failure).

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gsl-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn CLI")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn generate(dir: &Path, h: &str, nodes: &str) {
    let out = run(&[
        "generate",
        "--nodes",
        nodes,
        "--features",
        "8",
        "--classes",
        "3",
        "--homophily",
        h,
        "--deg-min",
        "2",
        "--deg-max",
        "6",
        "--seed",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "generate failed: {}", stderr(&out));
}

#[test]
fn generate_then_inspect_homophily() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("g");
    generate(&dir, "0.9", "200");
    for name in ["meta.json", "edges.csv", "features.csv", "labels.csv"] {
        assert!(dir.join(name).exists(), "{name} missing from bundle");
    }

    let out = run(&["homophily", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("edge"), "unexpected output: {text}");
    let edge_h: f64 = text
        .lines()
        .find(|l| l.starts_with("edge"))
        .and_then(|l| l.split_whitespace().last())
        .unwrap()
        .parse()
        .unwrap();
    assert!(edge_h > 0.8, "requested 0.9, measured {edge_h}");
}

#[test]
fn bases_rewire_mi_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("g");
    generate(&dir, "0.7", "150");
    let bases_file = tmp.path().join("bases.csv");

    let out = run(&[
        "bases",
        dir.to_str().unwrap(),
        "--kind",
        "agg:1",
        "--seed",
        "3",
        "--out",
        bases_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(bases_file.exists());

    let rewired = tmp.path().join("rewired");
    let out = run(&[
        "rewire",
        dir.to_str().unwrap(),
        "--bases-file",
        bases_file.to_str().unwrap(),
        "--method",
        "knn:4",
        "--out",
        rewired.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(rewired.join("edges.csv").exists());

    let out = run(&[
        "mi",
        dir.to_str().unwrap(),
        "--bases-file",
        bases_file.to_str().unwrap(),
        "--k",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let printed = stdout(&out);
    let mi: f64 = printed.split_whitespace().last().unwrap().parse().unwrap();
    assert!(mi > 0.2, "aggregated bases on a homophilous graph should be informative, got {mi}");
}

#[test]
fn train_plain_and_fused() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("g");
    generate(&dir, "0.8", "150");

    let out = run(&["train", dir.to_str().unwrap(), "--model", "gcn", "--seed", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("JSON report");
    let acc = report["test_acc_at_best_val"].as_f64().expect("accuracy field");
    assert!((0.0..=1.0).contains(&acc), "nonsense accuracy {acc}");

    // Fused training needs a second structure; build one by rewiring.
    let bases_file = tmp.path().join("b.csv");
    let out = run(&[
        "bases",
        dir.to_str().unwrap(),
        "--kind",
        "raw",
        "--seed",
        "2",
        "--out",
        bases_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let rewired = tmp.path().join("r");
    let out = run(&[
        "rewire",
        dir.to_str().unwrap(),
        "--bases-file",
        bases_file.to_str().unwrap(),
        "--method",
        "knn:5",
        "--out",
        rewired.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    let out = run(&[
        "train",
        dir.to_str().unwrap(),
        "--model",
        "gcn",
        "--fusion",
        "late-separate",
        "--gsl",
        rewired.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // Fusion without a structure (and vice versa) is a usage error.
    let out = run(&[
        "train",
        dir.to_str().unwrap(),
        "--model",
        "gcn",
        "--fusion",
        "early",
        "--seed",
        "2",
    ]);
    assert_eq!(code(&out), 1, "fusion without --gsl must be a validation error");
}

#[test]
fn sweep_and_verify_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sweep.json");
    std::fs::write(
        &config,
        r#"{
            "h_grid": [0.1, 0.9],
            "seeds": 2,
            "csbm": {"num_nodes": 200, "feature_dim": 8},
            "train": {"epochs": 80}
        }"#,
    )
    .unwrap();

    let csv_path = tmp.path().join("results.csv");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("h,seed,bases,representation,mi_nats,accuracy,fano_bound,wall_ms\n"));
    // 2 h-values x 2 seeds x 2 bases x 3 representations.
    assert_eq!(text.lines().count(), 1 + 24);

    // Identical run, identical bytes.
    let csv2 = tmp.path().join("again.csv");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv2.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(text, std::fs::read_to_string(&csv2).unwrap());

    for theorem in ["fano", "dpi"] {
        let out = run(&["verify", "--theorem", theorem, "--config", config.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "verify {theorem}: {}", stderr(&out));
        assert!(stdout(&out).contains("PASS"), "verify {theorem}: {}", stdout(&out));
    }
}

#[test]
fn ablate_writes_ranked_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("g");
    generate(&dir, "0.3", "150");

    let config = tmp.path().join("ablate.json");
    std::fs::write(
        &config,
        r#"{
            "seeds": 2,
            "models": ["mlp", "gcn"],
            "constructs": ["none", "knn:4"],
            "fusions": ["none", "only-new"],
            "train": {"epochs": 60}
        }"#,
    )
    .unwrap();

    let table = tmp.path().join("table.csv");
    let out = run(&[
        "ablate",
        dir.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("model,bases,construct,fusion,param_sharing,mean_acc,std_acc,rank\n"));
    assert_eq!(text.lines().count(), 1 + 3, "mlp baseline + gcn baseline + gcn knn:4/only-new");
}

#[test]
fn viz_and_bench_products() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("g");
    generate(&dir, "1.0", "60");

    let pgm = tmp.path().join("adj.pgm");
    let out = run(&["viz", dir.to_str().unwrap(), "--mode", "node", "--out", pgm.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&pgm).unwrap();
    assert!(text.starts_with("P2\n60 60\n1\n"));

    let csv = tmp.path().join("density.csv");
    let out = run(&["viz", dir.to_str().unwrap(), "--mode", "class", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);

    let timings = tmp.path().join("timings.csv");
    let out = run(&["bench", "--sizes", "200,400", "--out", timings.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&timings).unwrap();
    assert!(text.starts_with("n,sim_ms,construct_ms,spmm_ms,sim_ratio,construct_ratio,spmm_ratio\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();

    // 0: help and version are successes.
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["generate", "--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);

    // 1: unknown flags, missing args, unparsable values, bad domain input.
    assert_eq!(code(&run(&["nonsense"])), 1);
    assert_eq!(code(&run(&["homophily"])), 1);
    let missing = tmp.path().join("missing-bundle");
    let out = run(&["homophily", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "missing directory is an I/O failure");

    let dir = tmp.path().join("g");
    generate(&dir, "0.5", "80");
    let out = run(&[
        "bases",
        dir.to_str().unwrap(),
        "--kind",
        "agg:0",
        "--seed",
        "1",
        "--out",
        tmp.path().join("b.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "agg:0 is invalid input: {}", stderr(&out));

    // 1 for malformed bundle data (parse error with a line number).
    let broken = tmp.path().join("broken");
    std::fs::create_dir_all(&broken).unwrap();
    for name in ["features.csv", "labels.csv"] {
        std::fs::copy(dir.join(name), broken.join(name)).unwrap();
    }
    std::fs::copy(dir.join("meta.json"), broken.join("meta.json")).unwrap();
    std::fs::write(broken.join("edges.csv"), "0,0\n").unwrap();
    let out = run(&["homophily", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(
        stderr(&out).contains("edges.csv:1"),
        "parse errors carry file and line: {}",
        stderr(&out)
    );

    // 2: a verification that fails its tolerance is a runtime failure, not
    // a usage mistake. An impossible MI configuration is found at validation
    // time instead.
    let out = run(&[
        "mi",
        dir.to_str().unwrap(),
        "--bases-file",
        tmp.path().join("nonexistent.csv").to_str().unwrap(),
        "--k",
        "3",
    ]);
    assert_eq!(code(&out), 2, "missing bases file is an I/O failure");
}
