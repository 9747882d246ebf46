use std::fs::File;
use std::io::BufReader;

use adaptive_meta::harness::{run_experiment, Algorithm, ExperimentConfig, ExperimentTable};

fn config(repetitions: usize, seed: u64, algorithms: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"graph": {{"synthetic": {{"kind": "gnm", "nodes": 40, "edges": 200, "seed": 5}}}},
            "m_train": 3, "m_test": 3, "k_values": [4], "l_values": [2],
            "algorithms": {algorithms}, "repetitions": {repetitions}, "master_seed": {seed},
            "edge_prob_choices": [0.3, 0.05], "record_wall_time": false,
            "estimator": {{"train_samples": 40, "test_samples": 40}}}}"#
    ))
    .unwrap()
}

#[test]
fn csv_file_round_trip() {
    let table = run_experiment(&config(3, 1, r#"["TGP", "GT"]"#)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    table.emit_csv(File::create(&path).unwrap()).unwrap();
    let back = ExperimentTable::parse_csv(BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(back, table);
    assert_eq!(back.rows.len(), 6);
}

#[test]
fn random_is_no_better_than_greedy_train() {
    let table = run_experiment(&config(100, 2, r#"["GT", "RANDOM"]"#)).unwrap();
    let s = table.summarize();
    let gt = s.iter().find(|c| c.algorithm == Algorithm::Gt).unwrap();
    let random = s.iter().find(|c| c.algorithm == Algorithm::Random).unwrap();
    assert!(random.mean <= gt.mean + 3.0 * (gt.stderr.powi(2) + random.stderr.powi(2)).sqrt(), "{random:?} vs {gt:?}");
}

#[test]
fn stderr_shrinks_with_repetitions() {
    // Quadrupling repetitions halves the standard error in expectation.
    for trial in 0..3 {
        let stderr = |reps| {
            let s = run_experiment(&config(reps, 100 + trial, r#"["RANDOM"]"#)).unwrap().summarize();
            s[0].stderr
        };
        let (small, large) = (stderr(25), stderr(100));
        assert!(large <= 0.6 * small, "trial {trial}: {large} > 0.6 * {small}");
    }
}
