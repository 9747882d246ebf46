//! Conditional expected marginal utilities.
//!
//! Δ(e | ψ) = E[f(dom(ψ) ∪ {e}, Φ) − f(dom(ψ), Φ) | Φ ∼ ψ] is computed either
//! by enumerating the conditional prior or from draws of the conditional
//! sampler. Monte Carlo queries for several candidates share the same draws
//! (common random numbers), so differences between candidates are not
//! polluted by independent sampling noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{evaluate_exact, real_items, run_policy, ItemId, PartialRealization, Policy, Task};
use crate::rng;
use crate::Scalar;

/// Default number of draws per Monte Carlo marginal query.
pub const DEFAULT_SAMPLES: usize = 1000;
/// Largest conditional support enumerated by [`Estimator::Auto`].
pub const DEFAULT_MAX_SUPPORT: usize = 20;

/// How marginals are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Exact,
    MonteCarlo {
        samples: usize,
    },
    /// Exact when the conditional support is enumerable and at most
    /// `max_support` realizations, Monte Carlo otherwise.
    Auto {
        samples: usize,
        max_support: usize,
    },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Auto { samples: DEFAULT_SAMPLES, max_support: DEFAULT_MAX_SUPPORT }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate<S> {
    pub mean: S,
    /// Standard error of the mean; zero for exact values.
    pub stderr: S,
    pub samples_used: usize,
}

impl<S: Scalar> MarginalEstimate<S> {
    pub fn exact(mean: S) -> Self {
        MarginalEstimate { mean, stderr: S::zero(), samples_used: 0 }
    }

    /// Mean and standard error of `values`.
    pub fn from_samples(values: &[S]) -> Self {
        let n = values.len();
        if n == 0 {
            return MarginalEstimate { mean: S::zero(), stderr: S::zero(), samples_used: 0 };
        }
        let mean = values.iter().copied().sum::<S>() / S::of_usize(n);
        let stderr = if n > 1 {
            let ss: S = values.iter().map(|v| (*v - mean) * (*v - mean)).sum();
            (ss / S::of_usize(n - 1) / S::of_usize(n)).sqrt()
        } else {
            S::zero()
        };
        MarginalEstimate { mean, stderr, samples_used: n }
    }
}

enum Resolved {
    Exact,
    Sampled(usize),
}

fn resolve<S: Scalar, T: Task<S>>(
    task: &T,
    psi: &PartialRealization<T::State>,
    estimator: Estimator,
) -> Result<Resolved> {
    match estimator {
        Estimator::Exact => {
            if task.support().is_none() {
                return Err(Error::NotEnumerable);
            }
            Ok(Resolved::Exact)
        }
        Estimator::MonteCarlo { samples } => Ok(Resolved::Sampled(samples.max(1))),
        Estimator::Auto { samples, max_support } => match task.support() {
            Some(support) => {
                let consistent = support
                    .iter()
                    .filter(|(phi, p)| *p > S::zero() && task.is_consistent(psi, phi))
                    .take(max_support + 1)
                    .count();
                if consistent <= max_support {
                    Ok(Resolved::Exact)
                } else {
                    Ok(Resolved::Sampled(samples.max(1)))
                }
            }
            None => Ok(Resolved::Sampled(samples.max(1))),
        },
    }
}

/// E[f(base ∪ {c}, Φ) − f(base, Φ) | Φ ∼ ψ] for every candidate.
fn conditional_gains<S: Scalar, T: Task<S>>(
    task: &T,
    psi: &PartialRealization<T::State>,
    base: &[ItemId],
    candidates: &[ItemId],
    estimator: Estimator,
    seed: u64,
) -> Result<Vec<MarginalEstimate<S>>> {
    let n = task.ground_size();
    let base = real_items(base.iter().copied(), n);
    // Dummies and members of the base set contribute exactly zero.
    let live: Vec<ItemId> =
        candidates.iter().copied().filter(|c| !c.is_dummy(n) && base.binary_search(c).is_err()).collect();
    let mut out = vec![MarginalEstimate::exact(S::zero()); candidates.len()];
    if live.is_empty() {
        // Still reject impossible conditions.
        if let Resolved::Exact = resolve(task, psi, estimator)? {
            exact_mass(task, psi)?;
        }
        return Ok(out);
    }
    let values: Vec<MarginalEstimate<S>> = match resolve(task, psi, estimator)? {
        Resolved::Exact => {
            let support = task.support().ok_or(Error::NotEnumerable)?;
            let mut acc = vec![S::zero(); live.len()];
            let mut mass = S::zero();
            for (phi, p) in support {
                if !(*p > S::zero()) || !task.is_consistent(psi, phi) {
                    continue;
                }
                mass = mass + *p;
                for (a, g) in acc.iter_mut().zip(task.gains(&base, &live, phi)) {
                    *a = *a + *p * g;
                }
            }
            if !(mass > S::zero()) {
                return Err(Error::ZeroMassCondition);
            }
            acc.into_iter().map(|a| MarginalEstimate::exact(a / mass)).collect()
        }
        Resolved::Sampled(samples) => {
            let mut rng = rng::from_seed(seed);
            let mut sum = vec![S::zero(); live.len()];
            let mut sum_sq = vec![S::zero(); live.len()];
            for _ in 0..samples {
                let phi = task.sample_conditioned(psi, &mut rng)?;
                for ((s, q), g) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(task.gains(&base, &live, &phi)) {
                    *s = *s + g;
                    *q = *q + g * g;
                }
            }
            let ns = S::of_usize(samples);
            sum.into_iter()
                .zip(sum_sq)
                .map(|(s, q)| {
                    let mean = s / ns;
                    let stderr = if samples > 1 {
                        let var = ((q - ns * mean * mean) / S::of_usize(samples - 1)).max(S::zero());
                        (var / ns).sqrt()
                    } else {
                        S::zero()
                    };
                    MarginalEstimate { mean, stderr, samples_used: samples }
                })
                .collect()
        }
    };
    let mut it = values.into_iter();
    for (slot, c) in out.iter_mut().zip(candidates) {
        if !c.is_dummy(n) && base.binary_search(c).is_err() {
            *slot = it.next().expect("one value per live candidate");
        }
    }
    Ok(out)
}

fn exact_mass<S: Scalar, T: Task<S>>(task: &T, psi: &PartialRealization<T::State>) -> Result<S> {
    let support = task.support().ok_or(Error::NotEnumerable)?;
    let mass: S = support.iter().filter(|(phi, _)| task.is_consistent(psi, phi)).map(|(_, p)| *p).sum();
    if mass > S::zero() {
        Ok(mass)
    } else {
        Err(Error::ZeroMassCondition)
    }
}

/// Δ(e | ψ) for each candidate, sharing draws across candidates.
pub fn marginals<S: Scalar, T: Task<S>>(
    task: &T,
    psi: &PartialRealization<T::State>,
    candidates: &[ItemId],
    estimator: Estimator,
    seed: u64,
) -> Result<Vec<MarginalEstimate<S>>> {
    let dom = psi.domain();
    conditional_gains(task, psi, &dom, candidates, estimator, seed)
}

/// Δ(e | ψ) by enumeration of p(· | ψ).
pub fn marginal_item_exact<S: Scalar, T: Task<S>>(
    task: &T,
    psi: &PartialRealization<T::State>,
    e: ItemId,
) -> Result<MarginalEstimate<S>> {
    Ok(marginals(task, psi, &[e], Estimator::Exact, 0)?[0])
}

/// Δ(e | ψ) from `n_samples` conditional draws.
pub fn marginal_item_mc<S: Scalar, T: Task<S>>(
    task: &T,
    psi: &PartialRealization<T::State>,
    e: ItemId,
    n_samples: usize,
    seed: u64,
) -> Result<MarginalEstimate<S>> {
    Ok(marginals(task, psi, &[e], Estimator::MonteCarlo { samples: n_samples }, seed)?[0])
}

/// f(Y ∪ {c}) − f(Y) with f(Y) = E f(Y, Φ) over the unconditioned prior.
pub fn set_marginals<S: Scalar, T: Task<S>>(
    task: &T,
    set: &[ItemId],
    candidates: &[ItemId],
    estimator: Estimator,
    seed: u64,
) -> Result<Vec<MarginalEstimate<S>>> {
    conditional_gains(task, &PartialRealization::new(), set, candidates, estimator, seed)
}

/// f(Y) = E f(Y, Φ).
pub fn expected_value<S: Scalar, T: Task<S>>(
    task: &T,
    set: &[ItemId],
    estimator: Estimator,
    seed: u64,
) -> Result<MarginalEstimate<S>> {
    let n = task.ground_size();
    let set = real_items(set.iter().copied(), n);
    let psi = PartialRealization::new();
    match resolve(task, &psi, estimator)? {
        Resolved::Exact => {
            let support = task.support().ok_or(Error::NotEnumerable)?;
            let v = support.iter().filter(|(_, p)| *p > S::zero()).map(|(phi, p)| *p * task.utility(&set, phi)).sum();
            Ok(MarginalEstimate::exact(v))
        }
        Resolved::Sampled(samples) => {
            let mut rng = rng::from_seed(seed);
            let values = (0..samples)
                .map(|_| task.sample(&mut rng).map(|phi| task.utility(&set, &phi)))
                .collect::<Result<Vec<S>>>()?;
            Ok(MarginalEstimate::from_samples(&values))
        }
    }
}

/// (1/m) Σ_i (f^i(S ∪ {e}) − f^i(S)).
pub fn marginal_set_avg<S: Scalar, T: Task<S>>(
    tasks: &[T],
    set: &[ItemId],
    e: ItemId,
    estimator: Estimator,
    seed: u64,
) -> Result<S> {
    if tasks.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    let mut total = S::zero();
    for (i, t) in tasks.iter().enumerate() {
        total = total + set_marginals(t, set, &[e], estimator, rng::derive(seed, &[i as u64]))?[0].mean;
    }
    Ok(total / S::of_usize(tasks.len()))
}

/// How a policy's expected utility is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyEval {
    /// Enumerate realizations and policy branches.
    Exact,
    /// Average over `runs` independent executions.
    MonteCarlo { runs: usize, seed: u64 },
}

/// Δ(π | Y) = E[f(Y ∪ E(π, Φ), Φ) − f(Y, Φ)] over the prior and the policy's randomness.
pub fn marginal_policy<S: Scalar, T: Task<S>>(
    task: &T,
    set: &[ItemId],
    policy: &Policy<S>,
    eval: PolicyEval,
) -> Result<MarginalEstimate<S>> {
    let n = task.ground_size();
    let base = real_items(set.iter().copied(), n);
    let value = |selected: &[ItemId], phi: &T::Realization| {
        let joint = real_items(base.iter().chain(selected).copied(), n);
        task.utility(&joint, phi) - task.utility(&base, phi)
    };
    match eval {
        PolicyEval::Exact => Ok(MarginalEstimate::exact(evaluate_exact(policy, task, value)?)),
        PolicyEval::MonteCarlo { runs, seed } => {
            let mut values = Vec::with_capacity(runs);
            for r in 0..runs as u64 {
                let phi = task.sample(&mut rng::stream(seed, &[r, 0]))?;
                let trace = run_policy(policy, task, &phi, rng::derive(seed, &[r, 1]))?;
                values.push(value(&trace.real_items(n), &phi));
            }
            Ok(MarginalEstimate::from_samples(&values))
        }
    }
}
