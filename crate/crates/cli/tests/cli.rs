use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ballmapper::GraphDocument;
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ballmapper"));
    cmd.env_remove("BALLMAPPER_OUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{line:?}: {e}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate_noise(dir: &Path) -> std::path::PathBuf {
    let csv = dir.join("noise.csv");
    ok(&[
        "generate",
        "--generator",
        "noise",
        "--cloud-seed",
        "3",
        "-o",
        p(&csv),
    ]);
    csv
}

#[test]
fn generate_writes_cloud_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate_noise(dir.path());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "id,X1,X2,X3,X4,X5,Y");
    assert_eq!(text.lines().count(), 501);
    assert!(dir.path().join("generate.manifest.json").exists());
}

#[test]
fn run_writes_graph_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let v = ok(&[
        "run",
        "--generator",
        "five-part",
        "--epsilon",
        "2",
        "--output-dir",
        p(&out),
    ]);
    assert!(v["metrics"]["balls"].as_u64().unwrap() > 50);
    for name in [
        "graph.json",
        "graph.dot",
        "point_to_ball.csv",
        "metrics.json",
        "run.manifest.json",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    let doc =
        GraphDocument::from_json(&fs::read_to_string(out.join("graph.json")).unwrap()).unwrap();
    assert_eq!(doc.metadata.n_points, 500);
    let dot = fs::read_to_string(out.join("graph.dot")).unwrap();
    assert!(dot.starts_with("graph"));
    let csv = fs::read_to_string(out.join("point_to_ball.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "point_id,ball_id");
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate_noise(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&[
        "run",
        "--input",
        p(&csv),
        "--outcome-column",
        "Y",
        "--id-column",
        "id",
        "--epsilon",
        "1.5",
        "--output-dir",
        p(&a),
    ]);
    ok(&[
        "run",
        "--manifest",
        p(&a.join("run.manifest.json")),
        "--output-dir",
        p(&b),
    ]);
    for name in [
        "graph.json",
        "graph.dot",
        "point_to_ball.csv",
        "metrics.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn manifest_detects_changed_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate_noise(dir.path());
    let a = dir.path().join("a");
    ok(&[
        "run",
        "--input",
        p(&csv),
        "--epsilon",
        "1.5",
        "--output-dir",
        p(&a),
    ]);
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push_str("extra,0,0,0,0,0,0\n");
    fs::write(&csv, text).unwrap();
    let out = run(&[
        "run",
        "--manifest",
        p(&a.join("run.manifest.json")),
        "--output-dir",
        p(&dir.path().join("b")),
    ]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env-out");
    let status = bin()
        .args(["run", "--generator", "noise", "--epsilon", "2"])
        .env("BALLMAPPER_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(out.join("graph.json").exists());
}

#[test]
fn sweep_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let v = ok(&[
        "sweep",
        "--generator",
        "noise",
        "--parameter",
        "epsilon",
        "--values",
        "1,2,3,4",
        "--repetitions",
        "1000",
        "--output-dir",
        p(&out),
    ]);
    assert_eq!(v["rows"], 4);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with(
        "epsilon,repetitions,single_ball_fraction,balls_mean,balls_sd,balls_ci_low,balls_ci_high"
    ));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    let balls_idx = header.split(',').position(|h| h == "balls_mean").unwrap();
    let balls: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(balls_idx).unwrap().parse().unwrap())
        .collect();
    assert!(balls.windows(2).all(|w| w[1] <= w[0]), "{balls:?}");
    let plot: Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep_plot.json")).unwrap()).unwrap();
    assert!(plot.is_object());
    assert!(out.join("sweep.manifest.json").exists());
}

#[test]
fn sweep_over_points_uses_generator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let v = ok(&[
        "sweep",
        "--generator",
        "noise",
        "--parameter",
        "n-points",
        "--values",
        "50,100",
        "--epsilon",
        "2",
        "--repetitions",
        "20",
        "--output-dir",
        p(&out),
    ]);
    assert_eq!(v["rows"], 2);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(text.starts_with("n_points,"));
}

#[test]
fn stats_and_kmeans_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    ok(&["stats", "--generator", "five-part", "--output-dir", p(&out)]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "variable,mean,sd,min,q25,q50,q75,max,skewness,kurtosis"
    );
    assert_eq!(summary.lines().count(), 7);
    let corr = fs::read_to_string(out.join("correlations.csv")).unwrap();
    assert_eq!(corr.lines().next().unwrap(), "variable,X1,X2,X3,X4,X5");

    ok(&[
        "kmeans",
        "--generator",
        "five-part",
        "-k",
        "5",
        "--restarts",
        "5",
        "--elbow-max",
        "6",
        "--output-dir",
        p(&out),
    ]);
    let clusters = fs::read_to_string(out.join("kmeans_clusters.csv")).unwrap();
    assert_eq!(clusters.lines().count(), 6);
    let assignments = fs::read_to_string(out.join("kmeans_assignments.csv")).unwrap();
    assert_eq!(assignments.lines().count(), 501);
    let elbow = fs::read_to_string(out.join("elbow.csv")).unwrap();
    let wss: Vec<f64> = elbow
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(wss.len(), 6);
    assert!(wss.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn export_converts_and_rejects_unknown_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    ok(&[
        "run",
        "--generator",
        "noise",
        "--epsilon",
        "2",
        "--formats",
        "json",
        "--output-dir",
        p(&out),
    ]);
    let graph = out.join("graph.json");
    assert!(!out.join("graph.dot").exists());
    let dot = dir.path().join("g.dot");
    ok_status(&[
        "export",
        "--graph",
        p(&graph),
        "--format",
        "dot",
        "-o",
        p(&dot),
    ]);
    assert!(fs::read_to_string(&dot).unwrap().contains("--"));
    let again = run(&["export", "--graph", p(&graph), "--format", "json"]);
    assert_eq!(again.stdout, fs::read(&graph).unwrap());

    let bad = run(&["export", "--graph", p(&graph), "--format", "graphml"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(error_line(&bad)["error"]["kind"], "usage");
}

fn ok_status(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn usage_errors_exit_one() {
    let zero = run(&["run", "--generator", "noise", "--epsilon", "0"]);
    assert_eq!(zero.status.code(), Some(1));
    assert_eq!(error_line(&zero)["error"]["kind"], "usage");
    let neg = run(&["run", "--generator", "noise", "--epsilon", "-1"]);
    assert_eq!(neg.status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--epsilon", "1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_data_exits_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("na.csv");
    fs::write(&csv, "a,b,c\n1,2,3\n4,5,6\n7,NA,9\n").unwrap();
    let out = run(&[
        "run",
        "--input",
        p(&csv),
        "--epsilon",
        "1",
        "--output-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = &error_line(&out)["error"];
    assert_eq!(err["kind"], "data");
    assert_eq!(err["row"], 3);
    assert_eq!(err["column"], "b");

    let missing = run(&[
        "run",
        "--input",
        p(&dir.path().join("absent.csv")),
        "--epsilon",
        "1",
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn ingest_export_ingest_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let from_gen = dir.path().join("gen");
    ok(&[
        "run",
        "--generator",
        "noise",
        "--cloud-seed",
        "3",
        "--epsilon",
        "1.7",
        "--output-dir",
        p(&from_gen),
    ]);
    let csv = generate_noise(dir.path());
    let from_csv = dir.path().join("csv");
    ok(&[
        "run",
        "--input",
        p(&csv),
        "--outcome-column",
        "Y",
        "--id-column",
        "id",
        "--epsilon",
        "1.7",
        "--output-dir",
        p(&from_csv),
    ]);
    for name in ["point_to_ball.csv", "metrics.json"] {
        assert_eq!(
            fs::read(from_gen.join(name)).unwrap(),
            fs::read(from_csv.join(name)).unwrap(),
            "{name}"
        );
    }
    let a: GraphDocument =
        GraphDocument::from_json(&fs::read_to_string(from_gen.join("graph.json")).unwrap())
            .unwrap();
    let b: GraphDocument =
        GraphDocument::from_json(&fs::read_to_string(from_csv.join("graph.json")).unwrap())
            .unwrap();
    assert_eq!(a.balls, b.balls);
    assert_eq!(a.edges, b.edges);

    let graph = from_csv.join("graph.json");
    let json = run(&["export", "--graph", p(&graph), "--format", "json"]);
    assert_eq!(json.stdout, fs::read(&graph).unwrap());
    let csv_out = run(&["export", "--graph", p(&graph), "--format", "csv"]);
    assert_eq!(
        csv_out.stdout,
        fs::read(from_csv.join("point_to_ball.csv")).unwrap()
    );
    let reparsed = GraphDocument::from_json(&String::from_utf8(json.stdout).unwrap()).unwrap();
    assert_eq!(reparsed.to_json(), fs::read_to_string(&graph).unwrap());
}
