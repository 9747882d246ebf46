//! Policy execution: sampled runs and exact expectation over realizations
//! and policy randomness.
//!
//! A policy is unrolled by a cursor. At every point the cursor either is
//! done, needs a mixture branch, or offers a finite distribution over the
//! next selection. Sampled runs draw from these distributions; exact
//! evaluation enumerates them.

use std::collections::HashMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::item::{real_items, ItemId};
use super::policy::{top_ranked, MixturePolicy, Pick, Policy, Rule, TwoPhasePolicy};
use super::realization::PartialRealization;
use super::task::Task;
use crate::error::{Error, Result};
use crate::estimation::{self, Estimator, MarginalEstimate};
use crate::rng::{self, Rng};
use crate::Scalar;

/// Record of one execution. Dummy selections carry no state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trace<St> {
    pub steps: Vec<(ItemId, Option<St>)>,
    pub seed: u64,
    pub task_id: Option<usize>,
}

impl<St: Clone> Trace<St> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn items(&self) -> Vec<ItemId> {
        self.steps.iter().map(|(e, _)| *e).collect()
    }

    /// Distinct real items selected, ascending.
    pub fn real_items(&self, n: usize) -> Vec<ItemId> {
        real_items(self.steps.iter().map(|(e, _)| *e), n)
    }

    /// Observations on real items.
    pub fn observed(&self) -> PartialRealization<St>
    where
        St: PartialEq + Ord,
    {
        let mut psi = PartialRealization::new();
        for (e, s) in &self.steps {
            if let Some(s) = s {
                psi.insert(*e, s.clone());
            }
        }
        psi
    }
}

#[derive(Clone)]
enum Cursor<'p, S, St> {
    Phase { policy: &'p TwoPhasePolicy, round: usize, view: PartialRealization<St> },
    Concat(Box<Cursor<'p, S, St>>, Box<Cursor<'p, S, St>>),
    Truncate(Box<Cursor<'p, S, St>>, usize),
    Mixture(&'p MixturePolicy<S>, Option<Box<Cursor<'p, S, St>>>),
}

enum Step<S> {
    Done,
    Branch(Vec<S>),
    Select(Vec<(Pick, S)>),
}

enum Outcome<St> {
    Branch(usize),
    Selected(Pick, Option<(ItemId, St)>),
}

/// Identifies a decision: which phase, how far into it, and what it has seen.
type DecisionKey<St> = (usize, usize, Vec<(ItemId, St)>);

struct Decider<'a, T, S, St> {
    task: &'a T,
    /// Forces this estimator instead of each policy's own.
    estimator: Option<Estimator>,
    cache: Option<HashMap<DecisionKey<St>, Vec<(Pick, S)>>>,
}

impl<'p, S: Scalar, St: Clone + Eq + Ord + std::hash::Hash> Cursor<'p, S, St> {
    fn new(policy: &'p Policy<S>) -> Self {
        match policy {
            Policy::TwoPhase(p) => Cursor::Phase { policy: p, round: 0, view: PartialRealization::new() },
            Policy::Concat(a, b) => Cursor::Concat(Box::new(Cursor::new(a)), Box::new(Cursor::new(b))),
            Policy::Truncate(p, t) => Cursor::Truncate(Box::new(Cursor::new(p)), *t),
            Policy::Mixture(m) => Cursor::Mixture(m, None),
        }
    }

    fn is_done(&self) -> bool {
        match self {
            Cursor::Phase { policy, round, .. } => *round >= policy.budget,
            Cursor::Concat(a, b) => a.is_done() && b.is_done(),
            Cursor::Truncate(inner, left) => *left == 0 || inner.is_done(),
            Cursor::Mixture(_, chosen) => chosen.as_ref().is_some_and(|c| c.is_done()),
        }
    }

    fn step<T: Task<S, State = St>>(&self, decider: &mut Decider<'_, T, S, St>, seed: u64) -> Result<Step<S>> {
        match self {
            Cursor::Phase { policy, round, view } => {
                if *round >= policy.budget {
                    return Ok(Step::Done);
                }
                let n = decider.task.ground_size();
                if let Some(e) = policy.initial_set.get(*round) {
                    let pick = if e.is_dummy(n) { Pick::Dummy } else { Pick::Item(*e) };
                    return Ok(Step::Select(vec![(pick, S::one())]));
                }
                decider.decide(policy, *round, view, seed).map(Step::Select)
            }
            Cursor::Concat(a, b) => {
                if a.is_done() {
                    b.step(decider, seed)
                } else {
                    a.step(decider, seed)
                }
            }
            Cursor::Truncate(inner, left) => {
                if *left == 0 {
                    Ok(Step::Done)
                } else {
                    inner.step(decider, seed)
                }
            }
            Cursor::Mixture(m, chosen) => match chosen {
                Some(c) => c.step(decider, seed),
                None => Ok(Step::Branch(m.branches().iter().map(|(_, w)| *w).collect())),
            },
        }
    }

    fn advance(&mut self, outcome: &Outcome<St>) -> Result<()> {
        match self {
            Cursor::Phase { round, view, .. } => {
                match outcome {
                    Outcome::Selected(Pick::Dummy, _) => {}
                    Outcome::Selected(Pick::Item(e), observed) => {
                        let (_, s) = observed.as_ref().expect("real selections carry a state");
                        if !view.insert(*e, s.clone()) {
                            return Err(Error::BudgetExceeded(*e));
                        }
                    }
                    Outcome::Branch(_) => unreachable!("phases have no branches"),
                }
                *round += 1;
                Ok(())
            }
            Cursor::Concat(a, b) => {
                if a.is_done() {
                    b.advance(outcome)
                } else {
                    a.advance(outcome)
                }
            }
            Cursor::Truncate(inner, left) => {
                if let Outcome::Selected(..) = outcome {
                    *left -= 1;
                }
                inner.advance(outcome)
            }
            Cursor::Mixture(m, chosen) => match chosen {
                Some(c) => c.advance(outcome),
                None => {
                    let Outcome::Branch(i) = outcome else { unreachable!("mixture expects a branch") };
                    *chosen = Some(Box::new(Cursor::new(&m.branches()[*i].0)));
                    Ok(())
                }
            },
        }
    }
}

impl<T, S, St> Decider<'_, T, S, St>
where
    S: Scalar,
    St: Clone + Eq + Ord + std::hash::Hash,
    T: Task<S, State = St>,
{
    fn decide(
        &mut self,
        policy: &TwoPhasePolicy,
        round: usize,
        view: &PartialRealization<St>,
        seed: u64,
    ) -> Result<Vec<(Pick, S)>> {
        let key = (policy as *const TwoPhasePolicy as usize, round, view.canonical());
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit.clone());
        }
        let estimator = self.estimator.unwrap_or(policy.estimator);
        let out = decide(&policy.rule, self.task, view, round - policy.l(), estimator, seed)?;
        if let Some(cache) = self.cache.as_mut() {
            cache.insert(key, out.clone());
        }
        Ok(out)
    }
}

fn uniform<S: Scalar>(picks: Vec<Pick>) -> Vec<(Pick, S)> {
    let w = S::one() / S::of_usize(picks.len());
    picks.into_iter().map(|p| (p, w)).collect()
}

fn argmax<S: Scalar>(scored: &[(ItemId, S)]) -> Option<(ItemId, S)> {
    let mut best: Option<(ItemId, S)> = None;
    for &(e, v) in scored {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((e, v));
        }
    }
    best
}

/// Distribution of the next selection of an adaptive rule.
fn decide<S: Scalar, T: Task<S>>(
    rule: &Rule,
    task: &T,
    view: &PartialRealization<T::State>,
    adaptive_round: usize,
    estimator: Estimator,
    seed: u64,
) -> Result<Vec<(Pick, S)>> {
    let n = task.ground_size();
    let open: Vec<ItemId> = (0..n).map(ItemId::new).filter(|e| !view.contains(*e)).collect();
    let scored = |cands: &[ItemId]| -> Result<Vec<(ItemId, S)>> {
        let est = estimation::marginals(task, view, cands, estimator, seed)?;
        Ok(cands.iter().copied().zip(est.into_iter().map(|m| m.mean)).collect())
    };
    let dummy = || vec![(Pick::Dummy, S::one())];
    Ok(match rule {
        Rule::Stop => dummy(),
        Rule::Sequence(items) => match items.get(adaptive_round) {
            Some(e) if e.is_dummy(n) => dummy(),
            Some(e) if view.contains(*e) => return Err(Error::BudgetExceeded(*e)),
            Some(e) => vec![(Pick::Item(*e), S::one())],
            None => dummy(),
        },
        Rule::Greedy => match argmax(&scored(&open)?) {
            Some((e, _)) => vec![(Pick::Item(e), S::one())],
            None => dummy(),
        },
        Rule::RandomTop { width } => {
            // Dummies never run out, so negative items never enter the top set.
            let (reals, dummies) = top_ranked(&scored(&open)?, *width, *width);
            let total = reals.len() + dummies;
            if total == 0 {
                return Ok(dummy());
            }
            let w = S::one() / S::of_usize(total);
            let mut out: Vec<(Pick, S)> = reals.into_iter().map(|e| (Pick::Item(e), w)).collect();
            if dummies > 0 {
                out.push((Pick::Dummy, w * S::of_usize(dummies)));
            }
            out
        }
        Rule::BestSingleton => {
            if adaptive_round > 0 {
                return Ok(dummy());
            }
            match argmax(&scored(&open)?) {
                Some((e, v)) if v >= S::zero() => vec![(Pick::Item(e), S::one())],
                _ => dummy(),
            }
        }
        Rule::NonAdaptiveGreedy => {
            let est = estimation::set_marginals(task, &view.domain(), &open, estimator, seed)?;
            let s: Vec<(ItemId, S)> = open.iter().copied().zip(est.into_iter().map(|m| m.mean)).collect();
            match argmax(&s) {
                Some((e, _)) => vec![(Pick::Item(e), S::one())],
                None => dummy(),
            }
        }
        Rule::UniformRandom => {
            if open.is_empty() {
                dummy()
            } else {
                uniform(open.into_iter().map(Pick::Item).collect())
            }
        }
    })
}

fn draw<S: Scalar>(weights: impl Iterator<Item = S>, rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        let w = w.as_f64();
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Runs `policy` on `task` under realization `phi`.
///
/// The result is a pure function of the arguments. Dummy selections are
/// numbered `n, n+1, …` in the order they occur.
pub fn run_policy<S: Scalar, T: Task<S>>(
    policy: &Policy<S>,
    task: &T,
    phi: &T::Realization,
    seed: u64,
) -> Result<Trace<T::State>> {
    let n = task.ground_size();
    let mut rng = rng::stream(seed, &[0]);
    let mut decider = Decider { task, estimator: None, cache: None };
    let mut cursor = Cursor::new(policy);
    let mut steps = Vec::with_capacity(policy.budget());
    let mut decisions = 0u64;
    loop {
        let step_seed = rng::derive(seed, &[1, decisions]);
        decisions += 1;
        let outcome = match cursor.step(&mut decider, step_seed)? {
            Step::Done => break,
            Step::Branch(w) => Outcome::Branch(draw(w.into_iter(), &mut rng)),
            Step::Select(dist) => {
                let pick = dist[draw(dist.iter().map(|(_, w)| *w), &mut rng)].0;
                match pick {
                    Pick::Dummy => {
                        let dummy_count = steps.iter().filter(|(e, _): &&(ItemId, _)| e.is_dummy(n)).count();
                        steps.push((ItemId::new(n + dummy_count), None));
                        Outcome::Selected(pick, None)
                    }
                    Pick::Item(e) => {
                        let s = task.state_of(e, phi);
                        steps.push((e, Some(s.clone())));
                        Outcome::Selected(pick, Some((e, s)))
                    }
                }
            }
        };
        cursor.advance(&outcome)?;
    }
    Ok(Trace { steps, seed, task_id: None })
}

fn explore<S: Scalar, T: Task<S>, L>(
    cursor: Cursor<'_, S, T::State>,
    decider: &mut Decider<'_, T, S, T::State>,
    phi: &T::Realization,
    selected: &mut Vec<ItemId>,
    leaf: &L,
) -> Result<S>
where
    L: Fn(&[ItemId], &T::Realization) -> S,
{
    let n = decider.task.ground_size();
    match cursor.step(decider, 0)? {
        Step::Done => Ok(leaf(&real_items(selected.iter().copied(), n), phi)),
        Step::Branch(weights) => {
            let mut total = S::zero();
            for (i, w) in weights.into_iter().enumerate() {
                if !(w > S::zero()) {
                    continue;
                }
                let mut next = cursor.clone();
                next.advance(&Outcome::Branch(i))?;
                total = total + w * explore(next, decider, phi, selected, leaf)?;
            }
            Ok(total)
        }
        Step::Select(dist) => {
            let mut total = S::zero();
            for (pick, w) in dist {
                if !(w > S::zero()) {
                    continue;
                }
                let mut next = cursor.clone();
                let outcome = match pick {
                    Pick::Dummy => Outcome::Selected(pick, None),
                    Pick::Item(e) => Outcome::Selected(pick, Some((e, decider.task.state_of(e, phi)))),
                };
                next.advance(&outcome)?;
                if let Pick::Item(e) = pick {
                    selected.push(e);
                }
                let v = explore(next, decider, phi, selected, leaf);
                if let Pick::Item(_) = pick {
                    selected.pop();
                }
                total = total + w * v?;
            }
            Ok(total)
        }
    }
}

/// E over Φ and the policy's randomness of `leaf(selected real items, Φ)`.
///
/// Adaptive decisions are made with exact marginals regardless of the
/// estimator stored in the policy.
pub fn evaluate_exact<S, T, L>(policy: &Policy<S>, task: &T, leaf: L) -> Result<S>
where
    S: Scalar,
    T: Task<S>,
    L: Fn(&[ItemId], &T::Realization) -> S,
{
    let support = task.support().ok_or(Error::NotEnumerable)?;
    let mut decider = Decider { task, estimator: Some(Estimator::Exact), cache: Some(HashMap::new()) };
    let mut total = S::zero();
    let mut selected = Vec::with_capacity(policy.budget());
    for (phi, p) in support {
        if !(*p > S::zero()) {
            continue;
        }
        total = total + *p * explore(Cursor::new(policy), &mut decider, phi, &mut selected, &leaf)?;
    }
    Ok(total)
}

/// f_avg(π) for a single task: E[f(E(π, Φ), Φ)].
pub fn expected_utility_exact<S: Scalar, T: Task<S>>(policy: &Policy<S>, task: &T) -> Result<S> {
    evaluate_exact(policy, task, |items, phi| task.utility(items, phi))
}

/// (1/m) Σ_i f^i_avg(π), exactly.
pub fn f_avg_exact<S: Scalar, T: Task<S>>(policy: &Policy<S>, tasks: &[T]) -> Result<S> {
    if tasks.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    let values = tasks.par_iter().map(|t| expected_utility_exact(policy, t)).collect::<Result<Vec<S>>>()?;
    Ok(values.into_iter().sum::<S>() / S::of_usize(tasks.len()))
}

/// (1/m) Σ_i f^i_avg(π) from `runs` sampled executions per task.
///
/// The standard error combines the per-task standard errors.
pub fn f_avg_mc<S: Scalar, T: Task<S>>(
    policy: &Policy<S>,
    tasks: &[T],
    runs: usize,
    seed: u64,
) -> Result<MarginalEstimate<S>> {
    if tasks.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    let runs = runs.max(1);
    let per_task = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let n = task.ground_size();
            let values = (0..runs as u64)
                .map(|r| {
                    let phi = task.sample(&mut rng::stream(seed, &[i as u64, r, 0]))?;
                    let trace = run_policy(policy, task, &phi, rng::derive(seed, &[i as u64, r, 1]))?;
                    Ok(task.utility(&trace.real_items(n), &phi))
                })
                .collect::<Result<Vec<S>>>()?;
            Ok(MarginalEstimate::from_samples(&values))
        })
        .collect::<Result<Vec<MarginalEstimate<S>>>>()?;
    let m = S::of_usize(tasks.len());
    let mean = per_task.iter().map(|e| e.mean).sum::<S>() / m;
    let stderr = per_task.iter().map(|e| e.stderr * e.stderr).sum::<S>().sqrt() / m;
    Ok(MarginalEstimate { mean, stderr, samples_used: runs * tasks.len() })
}
