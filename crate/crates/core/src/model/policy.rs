use serde::{Deserialize, Serialize};

use super::item::ItemId;
use super::prior::NORMALIZATION_TOL;
use crate::error::{Error, Result};
use crate::estimation::Estimator;
use crate::Scalar;

/// How a two-phase policy picks items after its initial set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Pads every remaining round with a dummy item.
    Stop,
    /// Selects the listed items in order, one per adaptive round, then pads.
    Sequence(Vec<ItemId>),
    /// argmax over unselected real items of Δ(e | ψ); ties go to the lowest id.
    Greedy,
    /// Uniform draw from the `width` items of E ∪ D with the largest Δ(e | ψ).
    /// The dummy supply never runs out.
    RandomTop { width: usize },
    /// In the first adaptive round, the item of E ∪ D with the largest
    /// Δ(e | ψ); dummies afterwards.
    BestSingleton,
    /// Greedy on f(Y) = E f(Y, Φ) for the selected set, ignoring observed states.
    NonAdaptiveGreedy,
    /// Uniform draw from the unselected real items.
    UniformRandom,
}

/// A fixed initial set followed by an adaptive rule, `budget` rounds in total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPhasePolicy {
    pub initial_set: Vec<ItemId>,
    pub rule: Rule,
    pub budget: usize,
    pub estimator: Estimator,
}

impl TwoPhasePolicy {
    pub fn new(initial_set: Vec<ItemId>, rule: Rule, budget: usize) -> Result<Self> {
        if initial_set.len() > budget {
            return Err(Error::InvalidPolicy(format!(
                "initial set of size {} exceeds budget {budget}",
                initial_set.len()
            )));
        }
        let mut sorted = initial_set.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPolicy("initial set repeats an item".into()));
        }
        if let Rule::RandomTop { width: 0 } = rule {
            return Err(Error::InvalidPolicy("top-set width must be positive".into()));
        }
        Ok(TwoPhasePolicy { initial_set, rule, budget, estimator: Estimator::default() })
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    /// Size l of the initial set.
    pub fn l(&self) -> usize {
        self.initial_set.len()
    }
}

/// Runs one branch policy, chosen at random with the given probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePolicy<S> {
    branches: Vec<(Policy<S>, S)>,
}

impl<S: Scalar> MixturePolicy<S> {
    pub fn new(branches: Vec<(Policy<S>, S)>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidPolicy("mixture without branches".into()));
        }
        if branches.iter().any(|(_, w)| !(*w >= S::zero())) {
            return Err(Error::InvalidPolicy("negative mixture weight".into()));
        }
        let total: S = branches.iter().map(|(_, w)| *w).sum();
        let tol = S::of(NORMALIZATION_TOL).max(S::epsilon() * S::of_usize(4 * branches.len()));
        if (total - S::one()).abs() > tol {
            return Err(Error::InvalidPolicy(format!("mixture weights sum to {total}")));
        }
        Ok(MixturePolicy { branches })
    }

    pub fn branches(&self) -> &[(Policy<S>, S)] {
        &self.branches
    }
}

/// A policy: a two-phase rule or a composition of policies.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy<S> {
    TwoPhase(TwoPhasePolicy),
    /// Runs the first policy, then the second from a fresh observation state.
    Concat(Box<Policy<S>>, Box<Policy<S>>),
    /// Stops after the given number of selections.
    Truncate(Box<Policy<S>>, usize),
    Mixture(MixturePolicy<S>),
}

impl<S: Scalar> Policy<S> {
    /// Selects nothing.
    pub fn empty() -> Self {
        Policy::TwoPhase(TwoPhasePolicy::new(Vec::new(), Rule::Stop, 0).expect("valid"))
    }

    /// Non-adaptive policy selecting exactly `items`.
    pub fn fixed(items: Vec<ItemId>) -> Result<Self> {
        let k = items.len();
        Ok(Policy::TwoPhase(TwoPhasePolicy::new(items, Rule::Stop, k)?))
    }

    /// Maximum number of selections in any execution.
    pub fn budget(&self) -> usize {
        match self {
            Policy::TwoPhase(p) => p.budget,
            Policy::Concat(a, b) => a.budget() + b.budget(),
            Policy::Truncate(p, t) => (*t).min(p.budget()),
            Policy::Mixture(m) => m.branches.iter().map(|(p, _)| p.budget()).max().unwrap_or(0),
        }
    }

    /// The task-independent initial set, for plain two-phase policies.
    pub fn initial_set(&self) -> Option<&[ItemId]> {
        match self {
            Policy::TwoPhase(p) => Some(&p.initial_set),
            _ => None,
        }
    }
}

impl<S> From<TwoPhasePolicy> for Policy<S> {
    fn from(p: TwoPhasePolicy) -> Self {
        Policy::TwoPhase(p)
    }
}

impl<S> From<MixturePolicy<S>> for Policy<S> {
    fn from(m: MixturePolicy<S>) -> Self {
        Policy::Mixture(m)
    }
}

/// π @ π′: runs π, then π′ ignoring everything π observed.
pub fn concat<S: Scalar>(first: Policy<S>, second: Policy<S>) -> Policy<S> {
    Policy::Concat(Box::new(first), Box::new(second))
}

/// Level-t truncation: runs π until it has made `t` selections.
pub fn truncate<S: Scalar>(policy: Policy<S>, t: usize) -> Result<Policy<S>> {
    if t > policy.budget() {
        return Err(Error::InvalidPolicy(format!("truncation level {t} exceeds budget {}", policy.budget())));
    }
    Ok(Policy::Truncate(Box::new(policy), t))
}

/// A selection outcome: a real item or "some unused dummy".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pick {
    Item(ItemId),
    Dummy,
}

/// Top-`width` items of E ∪ D ranked by score.
///
/// Real items are ordered by decreasing score with ties to the lowest id.
/// Dummies score zero and rank below real items scoring exactly zero but
/// above negative ones. Returns the chosen real items and how many dummies
/// made the cut.
pub(crate) fn top_ranked<S: Scalar>(
    scored: &[(ItemId, S)],
    dummies_available: usize,
    width: usize,
) -> (Vec<ItemId>, usize) {
    let mut ranked: Vec<(ItemId, S)> = scored.to_vec();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let nonneg = ranked.iter().take_while(|(_, s)| *s >= S::zero()).count();
    let mut reals = Vec::new();
    let mut dummies = 0;
    for (e, _) in &ranked[..nonneg] {
        if reals.len() == width {
            return (reals, dummies);
        }
        reals.push(*e);
    }
    dummies = dummies_available.min(width - reals.len());
    for (e, _) in &ranked[nonneg..] {
        if reals.len() + dummies == width {
            break;
        }
        reals.push(*e);
    }
    (reals, dummies)
}
