use std::path::Path;
use std::process::{Command, Output};

fn hetnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetnet")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn predict_cellular_contraction_atoms() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hetnet(&["predict", "--system", "cellular-2d", "--params", "regime=contraction", "--until-exit", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&tmp.path().join("report.json"));
    let weights: Vec<f64> =
        report["exit_measure"]["atoms"].as_array().unwrap().iter().map(|a| a["weight"].as_f64().unwrap()).collect();
    assert_eq!(weights, [0.5, 0.25, 0.125, 0.125]);
    let manifest = json(&tmp.path().join("manifest.json"));
    assert_eq!(manifest["command"], "predict");
    assert_eq!(manifest["tool"], "hetnet");
    assert!(manifest["git_describe"].is_string());
}

#[test]
fn predict_markov_depth_two_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hetnet(&["predict", "--system", "krupa-cubic", "--params", "preset=markov", "--depth", "2", "--format", "csv", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).matches("pi=0.25").count(), 4);
    let mut r = csv::Reader::from_path(tmp.path().join("predicted.csv")).unwrap();
    assert_eq!(r.records().count(), 4);
}

#[test]
fn predict_cycling_depth_four_two_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hetnet(&["predict", "--system", "krupa-cubic", "--params", "preset=cycling", "--depth", "4", "--prune", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 0);
    let report = json(&tmp.path().join("report.json"));
    let pis: Vec<f64> = report["sequences"].as_array().unwrap().iter().map(|s| s["pi"].as_f64().unwrap()).collect();
    assert_eq!(pis, [0.5, 0.5]);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&hetnet(&["predict", "--no-such-flag"])), 1);
    assert_eq!(code(&hetnet(&["predict", "--system", "nowhere.json", "--out", p(tmp.path())])), 1);
    let o = hetnet(&[
        "simulate", "--system", "linear-saddle-2d", "--epsilon", "1e-3", "--epsilon", "1e-2", "--out", p(tmp.path()),
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&hetnet(&["simulate", "--system", "linear-saddle-2d", "--epsilon", "0", "--out", p(tmp.path())])), 1);
}

#[test]
fn validation_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hetnet(&["predict", "--system", "krupa-cubic", "--params", "a1=-1,a2=-0.5,a3=-2", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let o = hetnet(&["predict", "--system", "krupa-cubic", "--params", "bogus=1", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_twice_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = |out: &Path, workers: &str| {
        hetnet(&[
            "simulate", "--system", "linear-saddle-2d", "--epsilon", "1e-2", "--epsilon", "1e-3", "--trials", "60", "--seed", "7",
            "--workers", workers, "--out", p(out),
        ])
    };
    assert_eq!(code(&args(a.path(), "1")), 0);
    assert_eq!(code(&args(b.path(), "2")), 0);
    for eps in ["eps_1e-2", "eps_1e-3"] {
        for f in ["sequences.csv", "dwell.csv", "exits.csv"] {
            let x = std::fs::read(a.path().join(eps).join(f)).unwrap();
            let y = std::fs::read(b.path().join(eps).join(f)).unwrap();
            assert_eq!(x, y, "{eps}/{f}");
        }
    }
    let m = json(&a.path().join("manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["sim"]["censored"], serde_json::json!([0, 0]));
}

#[test]
fn heavy_censoring_exits_four_and_still_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hetnet(&[
        "simulate", "--system", "krupa-cubic", "--params", "preset=markov", "--depth", "3", "--epsilon", "3e-2", "--trials", "60",
        "--out", p(tmp.path()),
    ]);
    assert_eq!(code(&o), 4, "{}", stdout(&o));
    assert!(tmp.path().join("eps_3e-2/sequences.csv").exists());
}

#[test]
fn compare_against_own_prediction_gives_zero_z() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, ens) = (tmp.path().join("pred"), tmp.path().join("ens"));
    let sys = ["--system", "krupa-cubic", "--params", "preset=markov", "--depth", "2"];
    assert_eq!(code(&hetnet(&[&["predict"][..], &sys, &["--out", p(&pred)]].concat())), 0);
    let o = hetnet(&[&["simulate"][..], &sys, &["--epsilon", "1e-2", "--trials", "8", "--tube-radius", "0.1414", "--out", p(&ens)]].concat());
    assert_eq!(code(&o), 0);
    let report = json(&pred.join("report.json"));
    let mut w = csv::Writer::from_path(ens.join("eps_1e-2/sequences.csv")).unwrap();
    w.write_record(["sequence", "count", "freq", "ci_lo", "ci_hi"]).unwrap();
    for s in report["sequences"].as_array().unwrap() {
        w.write_record([s["path"].as_str().unwrap(), "250", "0.25", "0.2", "0.3"]).unwrap();
    }
    w.flush().unwrap();
    let o = hetnet(&["compare", "--predict", p(&pred.join("report.json")), "--ensemble", p(&ens)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let cmp = json(&ens.join("comparison.json"));
    for row in cmp["sequences"].as_array().unwrap() {
        assert_eq!(row["z"].as_f64().unwrap(), 0.0);
    }

    let mut w = csv::Writer::from_path(ens.join("eps_1e-2/sequences.csv")).unwrap();
    w.write_record(["sequence", "count", "freq", "ci_lo", "ci_hi"]).unwrap();
    let paths: Vec<&str> = report["sequences"].as_array().unwrap().iter().map(|s| s["path"].as_str().unwrap()).collect();
    for (path, n) in paths.iter().zip(["700", "100", "100", "100"]) {
        w.write_record([path, n, "0", "0", "0"]).unwrap();
    }
    w.flush().unwrap();
    let o = hetnet(&["compare", "--predict", p(&pred.join("report.json")), "--ensemble", p(&ens)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn compare_rejects_mismatched_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, ens) = (tmp.path().join("pred"), tmp.path().join("ens"));
    assert_eq!(code(&hetnet(&["predict", "--system", "krupa-cubic", "--params", "preset=cycling", "--out", p(&pred)])), 0);
    let o = hetnet(&["simulate", "--system", "linear-saddle-2d", "--epsilon", "1e-2", "--trials", "5", "--out", p(&ens)]);
    assert_eq!(code(&o), 0);
    let o = hetnet(&["compare", "--predict", p(&pred.join("report.json")), "--ensemble", p(&ens)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatch"));
}

#[test]
fn metric_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let path = tmp.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let a = write("a.csv", "t,x1\n0,0\n0.5,0\n1,0\n");
    let b = write("b.csv", "t,x1\n0,3\n0.5,3\n1,3\n");
    let c = write("c.csv", "t,x1\n0,3\n1,3\n");
    let bad = write("bad.csv", "t,x1\n0,0\n1,oops\n");
    let jump = write("j.json", r#"{"dim":1,"rests":[[0.0]],"dwell":[1.0],"jumps":[[[0.0]],[[0.0]]]}"#);

    let o = hetnet(&["metric", p(&a), p(&a)]);
    assert_eq!(stdout(&o), "rho: 0\n");
    let o = hetnet(&["metric", p(&a), p(&b)]);
    assert_eq!(stdout(&o), "rho: 3\n");
    let o = hetnet(&["metric", p(&a), p(&c), "--refine"]);
    let refined: f64 = stdout(&o).trim().strip_prefix("rho: ").unwrap().parse().unwrap();
    assert!((refined - 3.0).abs() < 1e-6);
    let o = hetnet(&["metric", p(&a), "--jump", p(&jump), "--delta", "0.2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("proximity: true, bound 0.6\n"));
    let o = hetnet(&["metric", p(&a), p(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}
