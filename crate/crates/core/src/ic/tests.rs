use std::collections::HashMap;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use proptest::prelude::*;

use super::*;
use crate::bruteforce::{check_adaptive_monotonicity, check_adaptive_submodularity, Guard};
use crate::estimation::{marginals, Estimator, MarginalEstimate};
use crate::model::{
    expected_utility_exact, run_policy, ItemId, PartialRealization, Policy, Rule, Task, TwoPhasePolicy,
};
use crate::rng;

fn draw(m: usize, live: &[usize]) -> LiveEdgeDraw {
    let mut bits = FixedBitSet::with_capacity(m);
    for e in live {
        bits.insert(*e);
    }
    LiveEdgeDraw { live: bits }
}

fn path(n: u32) -> Arc<DiGraph> {
    Arc::new(DiGraph::new(n as usize, (0..n - 1).map(|v| (v, v + 1))).unwrap())
}

#[test]
fn spread_examples() {
    let g = path(3);
    assert_eq!(spread(&g, &[], &draw(2, &[0, 1])), 0);
    assert_eq!(spread(&g, &[0], &draw(2, &[0, 1])), 3);
    assert_eq!(spread(&g, &[0], &draw(2, &[0])), 2);
    assert_eq!(spread(&g, &[2, 0], &draw(2, &[])), 2);
}

#[test]
fn task_sampling() {
    let g = Arc::new(gen_graph(GraphKind::Gnm, 200, 10_000, 1).unwrap());
    let t: IcTask<f64> = sample_task(Arc::clone(&g), &[0.5], 3).unwrap();
    assert!(t.edge_probs().iter().all(|p| *p == 0.5));
    let t: IcTask<f64> = sample_task(Arc::clone(&g), &[0.1, 0.01], 3).unwrap();
    let high = t.edge_probs().iter().filter(|p| **p == 0.1).count() as f64 / 10_000.0;
    assert!((high - 0.5).abs() < 0.02, "{high}");
    let again: IcTask<f64> = sample_task(g.clone(), &[0.1, 0.01], 3).unwrap();
    assert_eq!(t.edge_probs(), again.edge_probs());
    assert!(sample_task::<f64>(g.clone(), &[], 0).is_err());
    assert!(sample_task::<f64>(g, &[1.5], 0).is_err());
}

#[test]
fn task_file_round_trip() {
    let g = path(3);
    let file = IcTaskFile { seed: 4, choices: vec![0.1, 0.01], edge_probs: None };
    let text = serde_json::to_string(&file).unwrap();
    assert_eq!(text, r#"{"seed":4,"choices":[0.1,0.01]}"#);
    let t: IcTask<f64> = IcTask::from_file(Arc::clone(&g), &serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(t.edge_probs().len(), 2);
    let explicit = IcTaskFile { seed: 0, choices: vec![], edge_probs: Some(vec![0.3, 0.7]) };
    assert_eq!(IcTask::<f64>::from_file(g, &explicit).unwrap().edge_probs(), &[0.3, 0.7]);
}

#[test]
fn conditioning_on_a_path() {
    let g = path(4);
    let t: IcTask<f64> = IcTask::new(Arc::clone(&g), vec![0.5; 3]).unwrap();
    // Seed 0 activated node 1 only: edge 0 live, edge 1 blocked.
    let obs = t.observe(0, &draw(3, &[0, 2]));
    assert_eq!(obs, CascadeObservation { activated: vec![0, 1], live: vec![0], blocked: vec![1] });
    let psi: PartialRealization<CascadeObservation> = [(ItemId(0), obs)].into_iter().collect();
    let mut r = rng::from_seed(5);
    let mut edge2 = 0;
    for _ in 0..2000 {
        let d = t.sample_live_conditioned(&psi, &mut r).unwrap();
        assert!(d.is_live(0) && !d.is_live(1));
        edge2 += usize::from(d.is_live(2));
    }
    assert!((edge2 as f64 / 2000.0 - 0.5).abs() < 0.05);
    // Empty condition is unconditioned, full revelation is deterministic.
    assert!(t.sample_live_conditioned(&PartialRealization::new(), &mut r).is_ok());
    let all = t.observe(0, &draw(3, &[0, 1, 2]));
    let psi: PartialRealization<CascadeObservation> = [(ItemId(0), all)].into_iter().collect();
    assert_eq!(t.sample_live_conditioned(&psi, &mut r).unwrap(), draw(3, &[0, 1, 2]));
}

#[test]
fn conflicting_observations_are_rejected() {
    let t: IcTask<f64> = IcTask::new(path(3), vec![0.5; 2]).unwrap();
    let a = t.observe(0, &draw(2, &[0]));
    let b = t.observe(1, &draw(2, &[1]));
    let mut bad = b.clone();
    bad.blocked = vec![0];
    bad.live = vec![];
    let psi: PartialRealization<CascadeObservation> = [(ItemId(0), a), (ItemId(1), bad)].into_iter().collect();
    assert!(matches!(
        t.sample_live_conditioned(&psi, &mut rng::from_seed(0)),
        Err(crate::Error::InconsistentObservation(_))
    ));
}

fn small_graph() -> Arc<DiGraph> {
    Arc::new(DiGraph::new(4, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 1)]).unwrap())
}

#[test]
fn conditioned_sampler_matches_exact_conditional() {
    let t: IcTask<f64> = IcTask::new(small_graph(), vec![0.6, 0.3, 0.5, 0.4, 0.7]).unwrap();
    let witness = draw(5, &[0, 3]);
    let psi: PartialRealization<CascadeObservation> = [(ItemId(1), t.observe(1, &witness))].into_iter().collect();
    let support = t.support().unwrap();
    let mass: f64 = support.iter().filter(|(d, _)| t.is_consistent(&psi, d)).map(|(_, p)| p).sum();
    let exact: HashMap<FixedBitSet, f64> =
        support.iter().filter(|(d, _)| t.is_consistent(&psi, d)).map(|(d, p)| (d.live.clone(), p / mass)).collect();
    let n = 100_000;
    let mut counts: HashMap<FixedBitSet, usize> = HashMap::new();
    let mut r = rng::from_seed(11);
    for _ in 0..n {
        *counts.entry(t.sample_live_conditioned(&psi, &mut r).unwrap().live).or_default() += 1;
    }
    assert!(counts.keys().all(|k| exact.contains_key(k)));
    let tv: f64 =
        exact.iter().map(|(k, p)| (counts.get(k).copied().unwrap_or(0) as f64 / n as f64 - p).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "total variation {tv}");
}

#[test]
fn single_seed_spread_matches_reachability() {
    let t: IcTask<f64> = IcTask::new(small_graph(), vec![0.6, 0.3, 0.5, 0.4, 0.7]).unwrap();
    for v in 0..4 {
        let item = ItemId(v);
        let exact = crate::estimation::expected_value(&t, &[item], Estimator::Exact, 0).unwrap().mean;
        let mc: MarginalEstimate<f64> =
            crate::estimation::expected_value(&t, &[item], Estimator::MonteCarlo { samples: 20_000 }, 3).unwrap();
        assert!((mc.mean - exact).abs() <= 3.0 * mc.stderr + 1e-9, "{v}: {mc:?} vs {exact}");
    }
    // Edges sort as (0,1) (0,2) (1,2) (2,3) (3,1). Node 3 reaches 1 through
    // (3,1) and then 2 through (1,2); 2 only leads back to 3.
    let direct = 1.0 + 0.7 + 0.7 * 0.5;
    let exact = crate::estimation::expected_value(&t, &[ItemId(3)], Estimator::Exact, 0).unwrap().mean;
    assert!((exact - direct).abs() < 1e-12);
}

#[test]
fn four_node_instance_is_adaptive_submodular() {
    let t: IcTask<f64> = IcTask::new(small_graph(), vec![0.6, 0.3, 0.5, 0.4, 0.7]).unwrap();
    let g = Guard::rich_states();
    let report = check_adaptive_submodularity(&t, &g).unwrap();
    assert!(report.holds && report.checked > 0, "{report:?}");
    assert!(check_adaptive_monotonicity(&t, &g).unwrap().holds);
}

#[test]
fn single_node_and_star() {
    let one: IcTask<f64> = IcTask::new(Arc::new(DiGraph::new(1, []).unwrap()), vec![]).unwrap();
    let p: Policy<f64> = Policy::fixed(vec![ItemId(0)]).unwrap();
    assert_eq!(expected_utility_exact(&p, &one).unwrap(), 1.0);

    let star: IcTask<f64> = IcTask::new(Arc::new(DiGraph::new(3, [(1, 0), (1, 2)]).unwrap()), vec![1.0, 1.0]).unwrap();
    let greedy: Policy<f64> =
        TwoPhasePolicy::new(vec![], Rule::Greedy, 1).unwrap().with_estimator(Estimator::Exact).into();
    let phi = star.support().unwrap()[3].0.clone();
    assert_eq!(run_policy(&greedy, &star, &phi, 0).unwrap().items(), vec![ItemId(1)]);
    let m =
        marginals(&star, &PartialRealization::new(), &[ItemId(0), ItemId(1), ItemId(2)], Estimator::Exact, 0).unwrap();
    assert_eq!(m.iter().map(|e| e.mean).collect::<Vec<_>>(), vec![1.0, 3.0, 1.0]);
}

#[test]
fn query_counter_tracks_clones() {
    let t: IcTask<f64> = IcTask::new(path(3), vec![0.5; 2]).unwrap();
    let c = t.clone();
    assert_eq!(t.queries(), 0);
    let d = c.sample(&mut rng::from_seed(0)).unwrap();
    let _ = c.utility(&[ItemId(0)], &d);
    assert_eq!(t.queries(), 2);
}

fn arb_graph() -> impl Strategy<Value = (DiGraph, FixedBitSet)> {
    (2usize..=5)
        .prop_flat_map(|n| {
            prop::collection::vec((0..n as u32, 0..n as u32), 0..12).prop_flat_map(move |edges| {
                let g = DiGraph::new(n, edges).unwrap();
                let m = g.edge_count();
                (Just(g), prop::collection::vec(any::<bool>(), m))
            })
        })
        .prop_map(|(g, bits)| {
            let mut live = FixedBitSet::with_capacity(bits.len());
            for (i, b) in bits.iter().enumerate() {
                live.set(i, *b);
            }
            (g, live)
        })
}

proptest! {
    #[test]
    fn spread_is_monotone_and_submodular((g, live) in arb_graph()) {
        let d = LiveEdgeDraw { live };
        let n = g.node_count();
        let f = |mask: u32| spread(&g, &(0..n).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>(), &d) as i64;
        for a in 0u32..1 << n {
            for b in 0u32..1 << n {
                if a & b != a { continue; }
                prop_assert!(f(a) <= f(b));
                for e in 0..n {
                    if b >> e & 1 == 1 { continue; }
                    prop_assert!(f(a | 1 << e) - f(a) >= f(b | 1 << e) - f(b));
                }
            }
        }
    }

    #[test]
    fn gains_match_utility_differences((g, live) in arb_graph(), base_mask in 0u32..32) {
        let n = g.node_count();
        let t: IcTask<f64> = IcTask::new(Arc::new(g.clone()), vec![0.5; g.edge_count()]).unwrap();
        let d = LiveEdgeDraw { live };
        let base: Vec<ItemId> = (0..n).filter(|i| base_mask >> i & 1 == 1).map(ItemId::new).collect();
        let cands: Vec<ItemId> = (0..n + 1).map(ItemId::new).collect();
        let gains = t.gains(&base, &cands, &d);
        let f0 = t.utility(&base, &d);
        for (c, gain) in cands.iter().zip(gains) {
            let expected = if c.index() >= n || base.contains(c) {
                0.0
            } else {
                let mut s = base.clone();
                s.push(*c);
                s.sort();
                t.utility(&s, &d) - f0
            };
            prop_assert_eq!(gain, expected);
        }
    }
}
