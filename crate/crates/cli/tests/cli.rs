use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptive-meta")).args(args).env("ADAPTIVE_META_THREADS", "2").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn remark2_reports_the_violation_pair() {
    let o = cli(&["check-submodularity", "--remark2", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let sub = &v["average"]["submodularity"];
    assert_eq!(sub["holds"], false);
    let first = &sub["violations"][0];
    assert_eq!((first["before"].as_f64(), first["after"].as_f64()), (Some(0.5), Some(1.0)));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli(&["--bogus"]).status.code(), Some(2));
    assert_eq!(cli(&["verify-ratios", "--regime", "sideways"]).status.code(), Some(2));
    assert_eq!(cli(&["check-submodularity"]).status.code(), Some(2));
    assert_eq!(cli(&["run-experiment", "--config", "/nonexistent.json", "--output", "x.csv"]).status.code(), Some(2));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_ratios_monotone() {
    let o = cli(&["verify-ratios", "--regime", "monotone", "--count", "50", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let min: f64 = text.lines().find_map(|l| l.strip_prefix("min ratio")).unwrap().trim().parse().unwrap();
    assert!(min >= 0.5);
}

#[test]
fn json_output_is_byte_identical() {
    for regime in ["monotone", "nonmonotone", "kl1", "l1"] {
        let args = ["verify-ratios", "--regime", regime, "--count", "20", "--seed", "3", "--json"];
        let a = cli(&args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, cli(&args).stdout);
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_submodularity_on_a_file() {
    let dir = tempfile::tempdir().unwrap();
    // Modular utilities: submodular and monotone; the second task lies about it.
    let good = r#"{"n": 2, "states": 2,
        "realizations": [{"states": [0, 1], "prob": 0.5}, {"states": [1, 0], "prob": 0.5}],
        "tasks": [{"utilities": {"|0": 0, "0|0": 1, "1|0": 2, "0,1|0": 3,
                                 "|1": 0, "0|1": 1, "1|1": 2, "0,1|1": 3},
                   "flags": {"adaptive_monotone": true, "adaptive_submodular": true}}]}"#;
    let p = write(dir.path(), "good.json", good);
    let o = cli(&["check-submodularity", &p, "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["task 0"]["submodularity"]["holds"], true);

    let bad = good.replace("\"0,1|0\": 3", "\"0,1|0\": 5");
    let p = write(dir.path(), "bad.json", &bad);
    assert_eq!(cli(&["check-submodularity", &p]).status.code(), Some(1));
    let p = write(dir.path(), "broken.json", "{");
    assert_eq!(cli(&["check-submodularity", &p]).status.code(), Some(2));
}

#[test]
fn gen_graph_and_run_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let o = cli(&[
        "gen-graph",
        "--kind",
        "gnm",
        "--nodes",
        "40",
        "--edges",
        "160",
        "--seed",
        "3",
        "--output",
        graph.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let config = r#"{"graph": {"path": "g.txt"}, "m_train": 2, "m_test": 2, "k_values": [4],
        "l_values": [0.5], "algorithms": ["TGP", "RMG", "GT", "RANDOM"], "repetitions": 2,
        "master_seed": 11, "estimator": {"train_samples": 30, "test_samples": 30}}"#;
    let cfg = write(dir.path(), "c.json", config);
    let run = |out: &str| {
        let csv = dir.path().join(out);
        let plot = dir.path().join(format!("{out}.plot.json"));
        let o = cli(&[
            "run-experiment",
            "--config",
            &cfg,
            "--output",
            csv.to_str().unwrap(),
            "--plot",
            plot.to_str().unwrap(),
            "--no-timing",
            "--json",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(csv).unwrap(), std::fs::read(plot).unwrap(), o.stdout)
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a.0).unwrap();
    assert!(text.starts_with("#schema=1\nalgorithm,l,k,repetition,mean_utility,stderr,wall_ms\n"));
    assert_eq!(text.lines().count(), 2 + 4 * 2);
    let plot: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(plot["x_axis"], "l");
}
