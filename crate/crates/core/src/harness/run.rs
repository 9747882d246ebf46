use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{Algorithm, Cell, ExperimentConfig, GraphSpec};
use super::output::{ExperimentTable, Row};
use crate::error::{Error, Result};
use crate::estimation::{Estimator, MarginalEstimate, DEFAULT_MAX_SUPPORT};
use crate::ic::{gen_graph, sample_task, DiGraph, IcTask};
use crate::model::{run_policy, Policy, Task};
use crate::policies::{
    baseline_fully_adaptive, baseline_random, baseline_rmg, greedy_order, pi_a, pi_b, tgp_policy, trgp_policy,
    trgp_train, PiAWeights, SampleAverage,
};
use crate::rng;

// Seed paths under (master seed, repetition).
const TRAIN_TASKS: u64 = 0;
const TEST_TASKS: u64 = 1;
const TRAIN_ESTIMATES: u64 = 2;
const TEST_DRAWS: u64 = 3;
const POLICY: u64 = 4;

pub fn load_graph(spec: &GraphSpec) -> Result<DiGraph> {
    match spec {
        GraphSpec::Path(p) => DiGraph::load_edge_list(p),
        GraphSpec::Synthetic(s) => gen_graph(s.kind, s.nodes, s.edges, s.seed),
    }
}

/// Runs the sweep described by `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let graph = Arc::new(load_graph(&config.graph)?);
    run_on_graph(config, graph)
}

/// Runs the sweep on an already loaded graph.
pub fn run_on_graph(config: &ExperimentConfig, graph: Arc<DiGraph>) -> Result<ExperimentTable> {
    config.validate()?;
    let cells = config.cells()?;
    if let Some(c) = cells.iter().find(|c| c.k > graph.node_count()) {
        return Err(Error::Config(format!("k = {} exceeds the {} nodes of the graph", c.k, graph.node_count())));
    }
    let per_rep = (0..config.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(config, &graph, &cells, r))
        .collect::<Result<Vec<_>>>()?;
    // Cell-major order: all repetitions of a cell are adjacent.
    let mut rows = Vec::with_capacity(cells.len() * config.repetitions);
    for c in 0..cells.len() {
        rows.extend(per_rep.iter().map(|rep| rep[c].clone()));
    }
    Ok(ExperimentTable { rows })
}

fn sample_tasks(
    config: &ExperimentConfig,
    graph: &Arc<DiGraph>,
    r: usize,
    which: u64,
    m: usize,
) -> Result<Vec<IcTask<f64>>> {
    (0..m)
        .map(|i| {
            sample_task(
                Arc::clone(graph),
                &config.edge_prob_choices,
                rng::derive(config.master_seed, &[r as u64, which, i as u64]),
            )
        })
        .collect()
}

fn test_queries(tasks: &[IcTask<f64>]) -> Vec<usize> {
    tasks.iter().map(IcTask::queries).collect()
}

fn run_repetition(config: &ExperimentConfig, graph: &Arc<DiGraph>, cells: &[Cell], r: usize) -> Result<Vec<Row>> {
    let master = config.master_seed;
    let train = sample_tasks(config, graph, r, TRAIN_TASKS, config.m_train)?;
    let test = sample_tasks(config, graph, r, TEST_TASKS, config.m_test)?;
    let train_est = Estimator::Auto { samples: config.estimator.train_samples, max_support: DEFAULT_MAX_SUPPORT };
    let test_est = Estimator::Auto { samples: config.estimator.test_samples, max_support: DEFAULT_MAX_SUPPORT };
    let obj = SampleAverage::new(&train, train_est, rng::derive(master, &[r as u64, TRAIN_ESTIMATES]))?;

    // Deterministic greedy is prefix-consistent, so one run serves TGP and GT at every size.
    let before = test_queries(&test);
    let longest =
        cells.iter().filter(|c| matches!(c.algorithm, Algorithm::Tgp | Algorithm::Gt)).map(|c| c.l).max().unwrap_or(0);
    let greedy = greedy_order(&obj, longest)?;
    check_separation(&before, &test)?;

    // Test realizations are shared by all cells of the repetition.
    let runs = config.runs_per_test_task;
    let draws = test
        .iter()
        .enumerate()
        .map(|(j, t)| {
            (0..runs)
                .map(|q| t.sample(&mut rng::stream(master, &[r as u64, TEST_DRAWS, j as u64, q as u64])))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    cells
        .iter()
        .enumerate()
        .map(|(ci, cell)| {
            let start = Instant::now();
            let seed = rng::derive(master, &[r as u64, POLICY, ci as u64]);
            let before = test_queries(&test);
            let policy = train_cell(*cell, &obj, &greedy, seed, test_est, train[0].flags().adaptive_monotone)?;
            check_separation(&before, &test)?;
            let mut values = Vec::with_capacity(test.len() * runs);
            for (j, task) in test.iter().enumerate() {
                for (q, phi) in draws[j].iter().enumerate() {
                    let trace = run_policy(&policy, task, phi, rng::derive(seed, &[j as u64, q as u64]))?;
                    values.push(task.utility(&trace.real_items(task.ground_size()), phi));
                }
            }
            let est = MarginalEstimate::from_samples(&values);
            let wall_ms = if config.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            Ok(Row {
                algorithm: cell.algorithm,
                l: cell.l,
                k: cell.k,
                repetition: r,
                mean_utility: est.mean,
                stderr: est.stderr,
                wall_ms,
            })
        })
        .collect()
}

fn check_separation(before: &[usize], test: &[IcTask<f64>]) -> Result<()> {
    match before.iter().zip(test).position(|(b, t)| t.queries() != *b) {
        Some(j) => Err(Error::TestLeak(j)),
        None => Ok(()),
    }
}

fn train_cell(
    cell: Cell,
    obj: &SampleAverage<'_, IcTask<f64>>,
    greedy: &[crate::model::ItemId],
    seed: u64,
    est: Estimator,
    monotone: bool,
) -> Result<Policy<f64>> {
    let Cell { algorithm, l, k } = cell;
    match algorithm {
        Algorithm::Tgp => tgp_policy(greedy[..l].to_vec(), k, est),
        Algorithm::Gt => Policy::fixed(greedy[..k].to_vec()),
        Algorithm::Trgp => trgp_policy(trgp_train(obj, l, k, seed)?, k, est),
        Algorithm::Rmg => baseline_rmg(obj, l, k, seed, est),
        Algorithm::FullyAdaptive => baseline_fully_adaptive(k, monotone, est),
        Algorithm::Random => baseline_random(k),
        Algorithm::PiA => pi_a(obj, l, k, seed, PiAWeights::Proof, est),
        Algorithm::PiB => pi_b(l, k, est),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{EstimatorBudget, LValue, SyntheticGraph};
    use crate::ic::GraphKind;
    use crate::model::{expected_utility_exact, ItemId};
    use crate::policies::{tgp_train, TrainingObjective};

    fn config(algorithms: Vec<Algorithm>) -> ExperimentConfig {
        ExperimentConfig {
            graph: GraphSpec::Synthetic(SyntheticGraph { kind: GraphKind::Powerlaw, nodes: 30, edges: 120, seed: 2 }),
            m_train: 3,
            m_test: 3,
            k_values: vec![4],
            l_values: vec![LValue::Absolute(2)],
            algorithms,
            repetitions: 3,
            master_seed: 17,
            estimator: EstimatorBudget { train_samples: 50, test_samples: 50 },
            edge_prob_choices: vec![0.1, 0.01],
            runs_per_test_task: 1,
            record_wall_time: false,
        }
    }

    #[test]
    fn deterministic_cell_matches_exact_evaluator() {
        // Probabilities of one make every draw the full graph.
        let graph = Arc::new(DiGraph::new(5, [(0, 1), (1, 2), (3, 4), (2, 0)]).unwrap());
        let mut cfg = config(vec![Algorithm::Tgp]);
        cfg.m_train = 1;
        cfg.m_test = 1;
        cfg.k_values = vec![2];
        cfg.l_values = vec![LValue::Absolute(1)];
        cfg.edge_prob_choices = vec![1.0];
        cfg.repetitions = 1;
        let table = run_on_graph(&cfg, Arc::clone(&graph)).unwrap();
        assert_eq!(table.rows.len(), 1);
        let task: IcTask<f64> = IcTask::new(Arc::clone(&graph), vec![1.0; 4]).unwrap();
        let obj = SampleAverage::new(std::slice::from_ref(&task), Estimator::Exact, 0).unwrap();
        let policy = tgp_policy(tgp_train(&obj, 1).unwrap(), 2, Estimator::Exact).unwrap();
        let exact = expected_utility_exact(&policy, &task).unwrap();
        assert_eq!(table.rows[0].mean_utility, exact);
        assert_eq!(exact, 5.0);
    }

    #[test]
    fn same_seed_same_table() {
        let cfg = config(Algorithm::ALL.to_vec());
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), cfg.cells().unwrap().len() * cfg.repetitions);
        assert!(a.rows.iter().all(|r| r.wall_ms == 0.0 && r.mean_utility >= 1.0));
    }

    #[test]
    fn greedy_prefixes_are_consistent() {
        let graph = Arc::new(gen_graph(GraphKind::Powerlaw, 30, 120, 4).unwrap());
        let tasks: Vec<IcTask<f64>> =
            (0..3).map(|i| sample_task(Arc::clone(&graph), &[0.1, 0.01], i).unwrap()).collect();
        let obj = SampleAverage::new(&tasks, Estimator::MonteCarlo { samples: 30 }, 9).unwrap();
        let long = greedy_order(&obj, 5).unwrap();
        for l in 0..5 {
            assert_eq!(greedy_order(&obj, l).unwrap(), long[..l]);
        }
        let g: Vec<f64> = TrainingObjective::<f64>::gains(&obj, &[], &[ItemId(0)]).unwrap();
        assert!(g[0] >= 1.0);
    }

    #[test]
    fn k_beyond_graph_is_a_config_error() {
        let mut cfg = config(vec![Algorithm::Gt]);
        cfg.k_values = vec![40];
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }
}
