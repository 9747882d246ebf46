//! Exhaustive oracles for tiny instances: the optimal two-phase value and
//! checkers for adaptive submodularity and monotonicity.
//!
//! Values here are totals: `V(ψ, b)` is the best achievable
//! E[f(dom(ψ) ∪ later selections, Φ) | Φ ∼ ψ] with at most `b` more
//! selections. Stopping early is allowed, which is the same as padding
//! with dummy items.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{marginals, Estimator};
use crate::model::{
    Constant, ExplicitPrior, FnUtility, ItemId, PartialRealization, Prior, Realization, Task, TaskFlags, ToyTask,
};
use crate::rng::Rng;
use crate::Scalar;

/// Absolute tolerance for property checks.
pub const TOLERANCE: f64 = 1e-9;

/// Size limits beyond which the oracles refuse to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guard {
    pub max_items: usize,
    /// Distinct observable states per item.
    pub max_states: usize,
    pub max_budget: usize,
    /// Realizations with positive probability.
    pub max_support: usize,
}

impl Default for Guard {
    fn default() -> Self {
        Guard { max_items: 6, max_states: 3, max_budget: 4, max_support: 729 }
    }
}

impl Guard {
    /// Limits for tasks with rich per-item observations (cascades): few
    /// items, but many distinct states per item.
    pub fn rich_states() -> Self {
        Guard { max_items: 6, max_states: 4096, max_budget: 4, max_support: 4096 }
    }

    fn check<S: Scalar, T: Task<S>>(&self, task: &T, budget: usize) -> Result<()> {
        let n = task.ground_size();
        if n > self.max_items {
            return Err(Error::TooLarge(format!("{n} items > {}", self.max_items)));
        }
        if budget > self.max_budget {
            return Err(Error::TooLarge(format!("budget {budget} > {}", self.max_budget)));
        }
        let support = task.support().ok_or(Error::NotEnumerable)?;
        let live = support.iter().filter(|(_, p)| *p > S::zero()).count();
        if live > self.max_support {
            return Err(Error::TooLarge(format!("{live} realizations > {}", self.max_support)));
        }
        for e in (0..n).map(ItemId::new) {
            let states: BTreeSet<T::State> =
                support.iter().filter(|(_, p)| *p > S::zero()).map(|(phi, _)| task.state_of(e, phi)).collect();
            if states.len() > self.max_states {
                return Err(Error::TooLarge(format!("item {e} has {} states > {}", states.len(), self.max_states)));
            }
        }
        Ok(())
    }
}

type Key<St> = (Vec<(ItemId, St)>, usize);

/// Memoized DP over (canonical ψ, remaining budget) for one task.
struct Solver<'a, S: Scalar, T: Task<S>> {
    task: &'a T,
    live: Vec<(&'a T::Realization, S)>,
    memo: HashMap<Key<T::State>, (S, Option<ItemId>)>,
}

impl<'a, S: Scalar, T: Task<S>> Solver<'a, S, T> {
    fn new(task: &'a T) -> Result<Self> {
        let support = task.support().ok_or(Error::NotEnumerable)?;
        let live = support.iter().filter(|(_, p)| *p > S::zero()).map(|(phi, p)| (phi, *p)).collect();
        Ok(Solver { task, live, memo: HashMap::new() })
    }

    /// `consistent` indexes into `live`: the realizations consistent with ψ.
    fn value(
        &mut self,
        psi: &PartialRealization<T::State>,
        consistent: &[usize],
        budget: usize,
    ) -> (S, Option<ItemId>) {
        let key = (psi.canonical(), budget);
        if let Some(hit) = self.memo.get(&key) {
            return *hit;
        }
        let dom = psi.domain();
        let mass: S = consistent.iter().map(|&j| self.live[j].1).sum();
        let stop =
            consistent.iter().map(|&j| self.live[j].1 * self.task.utility(&dom, self.live[j].0)).sum::<S>() / mass;
        let mut best = (stop, None);
        if budget > 0 {
            for e in (0..self.task.ground_size()).map(ItemId::new) {
                if psi.contains(e) {
                    continue;
                }
                let mut groups: Vec<(T::State, Vec<usize>)> = Vec::new();
                for &j in consistent {
                    let s = self.task.state_of(e, self.live[j].0);
                    match groups.iter_mut().find(|(t, _)| *t == s) {
                        Some((_, g)) => g.push(j),
                        None => groups.push((s, vec![j])),
                    }
                }
                let mut v = S::zero();
                for (s, group) in groups {
                    let w: S = group.iter().map(|&j| self.live[j].1).sum();
                    v = v + w * self.value(&psi.with(e, s), &group, budget - 1).0;
                }
                let v = v / mass;
                if v > best.0 {
                    best = (v, Some(e));
                }
            }
        }
        self.memo.insert(key, best);
        best
    }

    fn consistent(&self, psi: &PartialRealization<T::State>) -> Vec<usize> {
        (0..self.live.len()).filter(|&j| self.task.is_consistent(psi, self.live[j].0)).collect()
    }
}

/// V(ψ, budget): the best expected total utility reachable from ψ with at
/// most `budget` further selections.
pub fn optimal_continuation<S: Scalar, T: Task<S>>(
    task: &T,
    psi: &PartialRealization<T::State>,
    budget: usize,
    guard: &Guard,
) -> Result<S> {
    guard.check(task, budget)?;
    let mut solver = Solver::new(task)?;
    let consistent = solver.consistent(psi);
    if consistent.is_empty() {
        return Err(Error::ZeroMassCondition);
    }
    Ok(solver.value(psi, &consistent, budget).0)
}

/// The optimum of the two-phase problem and a policy attaining it.
#[derive(Clone, Debug)]
pub struct OptimalValue<S, St> {
    pub value: S,
    /// Best initial set, real items only; the remaining `l − |S_o|` slots
    /// hold dummies.
    pub initial_set: Vec<ItemId>,
    /// For each task, the optimal next item after ψ (`None`: stop).
    pub continuation: Vec<HashMap<Vec<(ItemId, St)>, Option<ItemId>>>,
}

fn subsets_up_to(n: usize, l: usize) -> Vec<Vec<ItemId>> {
    let mut out: Vec<Vec<ItemId>> = (0u64..1 << n)
        .filter(|m| (m.count_ones() as usize) <= l)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(ItemId::new).collect())
        .collect();
    // Larger sets first, then lexicographic; the first maximizer wins.
    out.sort_by(|a: &Vec<ItemId>, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    out
}

/// max over initial sets S ⊆ E with |S| ≤ l (dummies fill the rest) of
/// (1/m) Σ_i E_Φ V_i(Φ restricted to S, k − l).
pub fn optimal_two_phase<S: Scalar, T: Task<S>>(
    tasks: &[T],
    l: usize,
    k: usize,
    guard: &Guard,
) -> Result<OptimalValue<S, T::State>> {
    if tasks.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    if l > k {
        return Err(Error::InfeasibleBudget { l, n: k });
    }
    for t in tasks {
        guard.check(t, k - l)?;
    }
    let n = tasks[0].ground_size();
    let mut solvers = tasks.iter().map(Solver::new).collect::<Result<Vec<_>>>()?;
    let mut best: Option<(S, Vec<ItemId>)> = None;
    for set in subsets_up_to(n, l) {
        let mut total = S::zero();
        for solver in solvers.iter_mut() {
            total = total + initial_value(solver, &set, k - l);
        }
        let value = total / S::of_usize(tasks.len());
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, set));
        }
    }
    let (value, initial_set) = best.expect("at least the empty set");
    let continuation = solvers
        .iter()
        .map(|s| {
            s.memo
                .iter()
                .filter(|((psi, _), _)| initial_set.iter().all(|e| psi.iter().any(|(d, _)| d == e)))
                .map(|((psi, _), (_, next))| (psi.clone(), *next))
                .collect()
        })
        .collect();
    Ok(OptimalValue { value, initial_set, continuation })
}

fn initial_value<S: Scalar, T: Task<S>>(solver: &mut Solver<'_, S, T>, set: &[ItemId], budget: usize) -> S {
    let mut groups: HashMap<Vec<(ItemId, T::State)>, Vec<usize>> = HashMap::new();
    for j in 0..solver.live.len() {
        let psi: Vec<(ItemId, T::State)> =
            set.iter().map(|e| (*e, solver.task.state_of(*e, solver.live[j].0))).collect();
        groups.entry(psi).or_default().push(j);
    }
    let mut total = S::zero();
    let mut groups: Vec<_> = groups.into_iter().collect();
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    for (psi, group) in groups {
        let w: S = group.iter().map(|&j| solver.live[j].1).sum();
        let psi: PartialRealization<T::State> = psi.into_iter().collect();
        total = total + w * solver.value(&psi, &group, budget).0;
    }
    total
}

/// One failed comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub psi: Vec<(ItemId, serde_json::Value)>,
    /// The larger partial realization; absent for monotonicity.
    pub psi_prime: Option<Vec<(ItemId, serde_json::Value)>>,
    pub item: ItemId,
    /// Δ(e | ψ); for monotonicity, the same value as `after`.
    pub before: f64,
    /// Δ(e | ψ′), or Δ(e | ψ) for monotonicity.
    pub after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub holds: bool,
    /// Number of comparisons made.
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    fn new(property: &str, checked: usize, violations: Vec<Violation>) -> Self {
        PropertyReport { property: property.into(), holds: violations.is_empty(), checked, violations }
    }
}

fn encode<St: Serialize>(psi: &[(ItemId, St)]) -> Result<Vec<(ItemId, serde_json::Value)>> {
    psi.iter().map(|(e, s)| Ok((*e, serde_json::to_value(s)?))).collect()
}

/// Every partial realization with positive probability, grouped by domain
/// bitmask.
fn reachable<S: Scalar, T: Task<S>>(task: &T) -> Result<HashMap<u64, BTreeSet<Vec<(ItemId, T::State)>>>> {
    let n = task.ground_size();
    let support = task.support().ok_or(Error::NotEnumerable)?;
    let mut out: HashMap<u64, BTreeSet<Vec<(ItemId, T::State)>>> = HashMap::new();
    for mask in 0u64..1 << n {
        let items: Vec<ItemId> = (0..n).filter(|i| mask >> i & 1 == 1).map(ItemId::new).collect();
        let set = out.entry(mask).or_default();
        for (phi, p) in support {
            if *p > S::zero() {
                set.insert(items.iter().map(|e| (*e, task.state_of(*e, phi))).collect());
            }
        }
    }
    Ok(out)
}

struct MarginalTable<'a, S: Scalar, T: Task<S>> {
    task: &'a T,
    cache: HashMap<Vec<(ItemId, T::State)>, Vec<S>>,
}

impl<S: Scalar, T: Task<S>> MarginalTable<'_, S, T> {
    fn get(&mut self, psi: &[(ItemId, T::State)]) -> Result<&[S]> {
        if !self.cache.contains_key(psi) {
            let items: Vec<ItemId> = (0..self.task.ground_size()).map(ItemId::new).collect();
            let p: PartialRealization<T::State> = psi.iter().cloned().collect();
            let m = marginals(self.task, &p, &items, Estimator::Exact, 0)?;
            self.cache.insert(psi.to_vec(), m.into_iter().map(|e| e.mean).collect());
        }
        Ok(&self.cache[psi])
    }
}

/// Checks Δ(e | ψ) ≥ Δ(e | ψ′) for all positive-mass ψ ⊆ ψ′ and every real
/// e ∉ dom(ψ′).
pub fn check_adaptive_submodularity<S: Scalar, T: Task<S>>(task: &T, guard: &Guard) -> Result<PropertyReport>
where
    T::State: Serialize,
{
    guard.check(task, 0)?;
    let n = task.ground_size();
    let reach = reachable(task)?;
    let mut table = MarginalTable { task, cache: HashMap::new() };
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut masks: Vec<u64> = reach.keys().copied().collect();
    masks.sort_unstable();
    for &a in &masks {
        for psi in &reach[&a] {
            let before = table.get(psi)?.to_vec();
            for &b in masks.iter().filter(|&&b| b & a == a) {
                for psi2 in reach[&b].iter().filter(|p2| psi.iter().all(|x| p2.contains(x))) {
                    let after = table.get(psi2)?.to_vec();
                    for e in (0..n).filter(|i| b >> i & 1 == 0) {
                        checked += 1;
                        if before[e] + S::of(TOLERANCE) < after[e] {
                            violations.push(Violation {
                                psi: encode(psi)?,
                                psi_prime: Some(encode(psi2)?),
                                item: ItemId::new(e),
                                before: before[e].as_f64(),
                                after: after[e].as_f64(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(PropertyReport::new("adaptive_submodularity", checked, violations))
}

/// Checks Δ(e | ψ) ≥ 0 for every positive-mass ψ and real e ∉ dom(ψ).
pub fn check_adaptive_monotonicity<S: Scalar, T: Task<S>>(task: &T, guard: &Guard) -> Result<PropertyReport>
where
    T::State: Serialize,
{
    guard.check(task, 0)?;
    let n = task.ground_size();
    let reach = reachable(task)?;
    let mut table = MarginalTable { task, cache: HashMap::new() };
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut masks: Vec<u64> = reach.keys().copied().collect();
    masks.sort_unstable();
    for &a in &masks {
        for psi in &reach[&a] {
            let delta = table.get(psi)?.to_vec();
            for e in (0..n).filter(|i| a >> i & 1 == 0) {
                checked += 1;
                if delta[e] < -S::of(TOLERANCE) {
                    violations.push(Violation {
                        psi: encode(psi)?,
                        psi_prime: None,
                        item: ItemId::new(e),
                        before: delta[e].as_f64(),
                        after: delta[e].as_f64(),
                    });
                }
            }
        }
    }
    Ok(PropertyReport::new("adaptive_monotonicity", checked, violations))
}

/// The two-item, two-task example: one state, f^1 ≡ 0 and f^2(Y) = |Y|.
/// Items "1" and "2" are `ItemId(0)` and `ItemId(1)`.
pub fn remark2_instance<S: Scalar>() -> Vec<ToyTask<S>> {
    let prior =
        Arc::new(Prior::from(ExplicitPrior::point(Realization::from_raw(&[0, 0]), 1).expect("valid point prior")));
    vec![
        ToyTask::new(Arc::clone(&prior), Arc::new(Constant(S::zero()))).with_flags(TaskFlags::MONOTONE_SUBMODULAR),
        ToyTask::new(prior, Arc::new(FnUtility::new(|items: &[ItemId], _: &Realization| S::of_usize(items.len()))))
            .with_flags(TaskFlags::MONOTONE_SUBMODULAR),
    ]
}

/// State of a [`MetaTask`] item: the task identity for the reveal item, the
/// underlying state otherwise.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetaState<St> {
    Task(usize),
    Item(St),
}

/// The training-time view of a task collection as a single task: the task
/// is drawn uniformly and is itself an unobserved state, revealed by an
/// extra item with id `n` that adds no utility.
pub struct MetaTask<S: Scalar, T: Task<S>> {
    tasks: Vec<T>,
    support: Vec<((usize, T::Realization), S)>,
}

impl<S: Scalar, T: Task<S>> MetaTask<S, T> {
    pub fn new(tasks: Vec<T>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::EmptyTaskSet);
        }
        let n = tasks[0].ground_size();
        if tasks.iter().any(|t| t.ground_size() != n) {
            return Err(Error::InvalidInstance("tasks disagree on the ground set".into()));
        }
        let w = S::one() / S::of_usize(tasks.len());
        let mut support = Vec::new();
        for (i, t) in tasks.iter().enumerate() {
            for (phi, p) in t.support().ok_or(Error::NotEnumerable)? {
                support.push(((i, phi.clone()), w * *p));
            }
        }
        Ok(MetaTask { tasks, support })
    }

    /// The item whose state is the task identity.
    pub fn reveal_item(&self) -> ItemId {
        ItemId::new(self.tasks[0].ground_size())
    }

    fn inner(&self, psi: &PartialRealization<MetaState<T::State>>) -> (Option<usize>, PartialRealization<T::State>) {
        let mut task = None;
        let mut inner = PartialRealization::new();
        for (e, s) in psi.iter() {
            match s {
                MetaState::Task(i) => task = Some(*i),
                MetaState::Item(st) => {
                    inner.insert(*e, st.clone());
                }
            }
        }
        (task, inner)
    }
}

impl<S: Scalar, T: Task<S>> Task<S> for MetaTask<S, T> {
    type Realization = (usize, T::Realization);
    type State = MetaState<T::State>;

    fn ground_size(&self) -> usize {
        self.tasks[0].ground_size() + 1
    }

    fn state_of(&self, item: ItemId, phi: &Self::Realization) -> Self::State {
        if item == self.reveal_item() {
            MetaState::Task(phi.0)
        } else {
            MetaState::Item(self.tasks[phi.0].state_of(item, &phi.1))
        }
    }

    fn utility(&self, items: &[ItemId], phi: &Self::Realization) -> S {
        let reveal = self.reveal_item();
        let real: Vec<ItemId> = items.iter().copied().filter(|e| *e != reveal).collect();
        self.tasks[phi.0].utility(&real, &phi.1)
    }

    fn support(&self) -> Option<&[(Self::Realization, S)]> {
        Some(&self.support)
    }

    fn sample(&self, rng: &mut Rng) -> Result<Self::Realization> {
        use rand::Rng as _;
        let i = rng.gen_range(0..self.tasks.len());
        Ok((i, self.tasks[i].sample(rng)?))
    }

    fn sample_conditioned(&self, psi: &PartialRealization<Self::State>, rng: &mut Rng) -> Result<Self::Realization> {
        use rand::Rng as _;
        let (task, inner) = self.inner(psi);
        let weights: Vec<f64> = self
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if task.is_some_and(|j| j != i) {
                    return 0.0;
                }
                t.support()
                    .map(|s| s.iter().filter(|(phi, _)| t.is_consistent(&inner, phi)).map(|(_, p)| p.as_f64()).sum())
                    .unwrap_or(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMassCondition);
        }
        let mut u = rng.gen::<f64>() * total;
        let mut pick = weights.iter().rposition(|w| *w > 0.0).expect("positive total");
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        Ok((pick, self.tasks[pick].sample_conditioned(&inner, rng)?))
    }

    fn is_consistent(&self, psi: &PartialRealization<Self::State>, phi: &Self::Realization) -> bool {
        let n = self.ground_size();
        psi.iter().all(|(e, s)| e.is_dummy(n) || self.state_of(*e, phi) == *s)
    }
}

/// The Remark 2 tasks with the task identity as a hidden state.
pub fn remark2_meta<S: Scalar>() -> MetaTask<S, ToyTask<S>> {
    MetaTask::new(remark2_instance()).expect("fixture is enumerable")
}
