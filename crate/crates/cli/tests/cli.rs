use std::path::Path;
use std::process::{Command, Output};

fn condist(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condist"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = condist(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn records(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    (header, r.records().map(Result::unwrap).collect())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn gen_writes_dataset_samples_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--set", "data.m=50", "--set", "kernel.kind=model1"]);
    let (h, rows) = records(&dir.path().join("samples.csv"));
    assert_eq!(h, ["x", "y"]);
    assert_eq!(rows.len(), 50);
    let m = json(&dir.path().join("gen.manifest.json"));
    assert_eq!(m["command"], "gen");
    assert_eq!(m["config"]["kernel"]["kind"], "model1");
    assert_eq!(m["outputs"], serde_json::json!(["dataset.bin", "samples.csv"]));

    let data = format!("data.path=\"{}\"", dir.path().join("dataset.bin").display());
    let est = ["estimate", "--set", &data, "--set", "kernel.kind=model1", "--set", "estimate.scheme={kind=\"knn\", k=5}"];
    ok(dir.path(), &est);
    let (h, rows) = records(&dir.path().join("estimate.csv"));
    assert_eq!(h, ["atom", "coord", "value"]);
    assert_eq!(rows.len(), 5);
    let e = json(&dir.path().join("estimate.json"));
    assert_eq!(e["param"], 5.0);
    assert_eq!(e["atoms"].as_array().unwrap().len(), 5);
}

#[test]
fn rates_and_reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["rates", "--set", "rates.ms=[256, 512, 1024]", "--set", "rates.seeds=[0, 1]", "--set", "rates.eval.grid_points=21"];
    ok(a.path(), &args);
    ok(b.path(), &args);
    let (h, rows) = records(&a.path().join("rates.csv"));
    assert_eq!(h, ["m", "seed", "param", "mean_w"]);
    assert_eq!(rows.len(), 6);
    for name in ["rates.csv", "fit.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    let fit = json(&a.path().join("fit.json"));
    assert!(fit["slope"].as_f64().unwrap() < 0.0);
}

#[test]
fn variance_row_has_bound() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["variance", "--set", "variance.m=400", "--set", "variance.repeats=50", "--set", "variance.scheme={kind=\"knn\", k=10}", "--set", "variance.eval.grid_points=11"],
    );
    let (h, rows) = records(&dir.path().join("variance.csv"));
    assert_eq!(h, ["scheme", "m", "param", "repeats", "mean", "variance", "bound"]);
    assert_eq!(&rows[0][0], "knn");
    assert_eq!(rows[0][6].parse::<f64>().unwrap(), 0.1);
}

#[test]
fn error_vs_x_rows_per_grid_point_and_estimator() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["error-vs-x", "--set", "data.m=500", "--set", "profile.k=20", "--set", "profile.grid_points=11", "--set", "profile.estimators=[\"truth\", \"knn\", \"rbox\"]"],
    );
    let (h, rows) = records(&dir.path().join("error_vs_x.csv"));
    assert_eq!(h, ["x", "estimator", "w"]);
    assert_eq!(rows.len(), 33);
    assert!(rows.iter().filter(|r| &r[1] == "truth").all(|r| r[2].parse::<f64>().unwrap() == 0.0));
    let out = condist(dir.path(), &["error-vs-x", "--set", "profile.estimators=[\"net\"]"]);
    assert!(!out.status.success());
}

#[test]
fn projected_histogram_counts_every_query() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["project-hist", "--set", "kernel.kind=model3", "--set", "project.m=2000", "--set", "project.k=30", "--set", "project.n_queries=20"],
    );
    let (h, rows) = records(&dir.path().join("histogram.csv"));
    assert_eq!(h, ["estimator", "bin", "lo", "hi", "count"]);
    assert_eq!(rows.len(), 20);
    assert_eq!(rows.iter().map(|r| r[4].parse::<usize>().unwrap()).sum::<usize>(), 20);
    let (_, errs) = records(&dir.path().join("projected_errors.csv"));
    assert_eq!(errs.len(), 20);
    let out = condist(dir.path(), &["project-hist", "--set", "project.m=2000"]);
    assert!(!out.status.success(), "non-Model 3 kernel must be rejected");
}

#[test]
fn ann_bench_schema() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ann-bench", "--set", "ann.m=3000", "--set", "ann.dim=2", "--set", "ann.k=30", "--set", "ann.runs=3"]);
    let (h, rows) = records(&dir.path().join("delta.csv"));
    assert_eq!(h, ["run", "delta"]);
    assert_eq!(rows.len(), 3);
    let (h, rows) = records(&dir.path().join("ann_bench.csv"));
    assert_eq!(
        h,
        ["M", "d_X", "k", "depth", "seed", "delta_mean", "delta_p50", "delta_p95", "wall_ms_exact", "wall_ms_anns"]
    );
    assert_eq!(&rows[0][0], "3000");
    assert!(rows[0][5].parse::<f64>().unwrap() >= -1e-12);
}

const TRAIN: [&str; 16] = [
    "--set", "data.m=1000",
    "--set", "train.k=16",
    "--set", "train.n_neuron=16",
    "--set", "train.n_hidden=2",
    "--set", "train.search=\"exact\"",
    "--set", "train.n_batch=8",
    "--set", "train.scale_schedule=false",
    "--set", "train.seed=4",
];

fn train(dir: &Path, epochs: &str, extra: &[&str]) {
    let mut args = vec!["train"];
    args.extend(TRAIN);
    args.extend(["--set", epochs]);
    args.extend(extra);
    ok(dir, &args);
}

#[test]
fn train_resume_matches_single_run_and_eval_reports() {
    let (full, part) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    train(full.path(), "train.epochs=5", &[]);
    train(part.path(), "train.epochs=3", &[]);
    let ckpt = part.path().join("model.ckpt").display().to_string();
    let resume = format!("train.resume=\"{ckpt}\"");
    train(part.path(), "train.epochs=5", &["--set", &resume]);

    let (h, whole) = records(&full.path().join("loss.csv"));
    assert_eq!(h, ["epoch", "loss"]);
    assert_eq!(whole.len(), 5);
    let (_, tail) = records(&part.path().join("loss.csv"));
    assert_eq!(tail.len(), 2);
    assert_eq!(&tail[0][0], "4");
    assert_eq!(tail, whole[3..]);
    assert_eq!(
        std::fs::read(full.path().join("model.ckpt")).unwrap(),
        std::fs::read(part.path().join("model.ckpt")).unwrap()
    );

    let ck = format!("eval.checkpoint=\"{}\"", full.path().join("model.ckpt").display());
    ok(full.path(), &["eval", "--set", &ck, "--set", "eval.grid_points=11", "--set", "eval.lipschitz_pairs=20"]);
    let (h, atoms) = records(&full.path().join("atoms.csv"));
    assert_eq!(h, ["x", "atom", "coord", "value"]);
    assert_eq!(atoms.len(), 11 * 16);
    let (h, d) = records(&full.path().join("derivative.csv"));
    assert_eq!(h, ["x", "avg_abs_derivative"]);
    assert_eq!(d.len(), 11);
    let s = json(&full.path().join("eval.json"));
    assert_eq!(s["epochs_done"], 5);
    let (mean, max) = (s["mean_w"].as_f64().unwrap(), s["max_w"].as_f64().unwrap());
    assert!(mean <= max);
    assert!(s["sup_w_bound"].as_f64().unwrap() >= 0.0);
}

#[test]
fn stdnet_baseline_trains() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path(), "train.epochs=2", &["--set", "train.arch=\"stdnet\""]);
    let (_, rows) = records(&dir.path().join("loss.csv"));
    assert_eq!(rows.len(), 2);
}

#[test]
fn bad_configuration_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = condist(dir.path(), &["gen", "--set", "data.size=5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("size"));
    let out = condist(dir.path(), &["gen", "--config", "/nonexistent/config.toml"]);
    assert!(!out.status.success());
}
