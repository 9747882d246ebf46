//! Random tiny instances and approximation-ratio checks against the
//! exhaustive optimum.
//!
//! Instances are weighted-coverage tasks: six elements with weights summing
//! to 10, items with at most two independent states, and each (item, state)
//! covering each element with probability 0.35. Non-monotone instances
//! subtract an item penalty in [0, 3]. Every generated task is checked for
//! adaptive submodularity (and, when monotone, monotonicity) before use.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bruteforce::{
    check_adaptive_monotonicity, check_adaptive_submodularity, optimal_two_phase, Guard, TOLERANCE,
};
use crate::error::{Error, Result};
use crate::estimation::Estimator;
use crate::model::{
    f_avg_exact, Coverage, ExplicitPrior, ItemId, Policy, Prior, Realization, SetFunction, TaskFlags, ToyTask,
};
use crate::policies::{pi_a_enumerated, pi_b, tgp_policy, tgp_train, trgp_enumerated, PiAWeights, SampleAverage};
use crate::rng::{self, Rng};

const ELEMENTS: usize = 6;
const TOTAL_WEIGHT: f64 = 10.0;
const COVER_PROB: f64 = 0.35;
const MAX_PENALTY: f64 = 3.0;
const MAX_ATTEMPTS: usize = 1000;

/// Which policy is checked, against which bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Two-phase greedy on monotone instances; bound 1/2.
    Monotone,
    /// Two-phase randomized greedy with l > 1 and k − l > 1; bound
    /// ½(1 − 1/l)^l (1 − 1/(k−l))^(k−l).
    Nonmonotone,
    /// π^a with k − l = 1; bound 1/(1 + e).
    Kl1,
    /// π^b with l = 1; bound 1/(2e).
    L1,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monotone" => Ok(Regime::Monotone),
            "nonmonotone" => Ok(Regime::Nonmonotone),
            "kl1" => Ok(Regime::Kl1),
            "l1" => Ok(Regime::L1),
            other => Err(Error::Config(format!("unknown regime {other:?}"))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Monotone => "monotone",
            Regime::Nonmonotone => "nonmonotone",
            Regime::Kl1 => "kl1",
            Regime::L1 => "l1",
        })
    }
}

impl Regime {
    pub fn bound(self, l: usize, k: usize) -> f64 {
        let e = std::f64::consts::E;
        match self {
            Regime::Monotone => 0.5,
            Regime::Nonmonotone => {
                let (l, r) = (l as f64, (k - l) as f64);
                0.5 * (1.0 - 1.0 / l).powf(l) * (1.0 - 1.0 / r).powf(r)
            }
            Regime::Kl1 => 1.0 / (1.0 + e),
            Regime::L1 => 1.0 / (2.0 * e),
        }
    }

    fn monotone(self) -> bool {
        self == Regime::Monotone
    }

    /// (n, l, k) for one instance.
    fn shape(self, rng: &mut Rng) -> (usize, usize, usize) {
        match self {
            Regime::Monotone => {
                let k = rng.gen_range(2..=4);
                (rng.gen_range(k.max(2)..=5), rng.gen_range(1..k), k)
            }
            Regime::Nonmonotone => {
                let k = rng.gen_range(4..=5);
                (5, rng.gen_range(2..=k - 2), k)
            }
            Regime::Kl1 => {
                let k = rng.gen_range(2..=4);
                (rng.gen_range(k..=5), k - 1, k)
            }
            Regime::L1 => {
                let k = rng.gen_range(2..=4);
                (rng.gen_range(k..=5), 1, k)
            }
        }
    }
}

/// A generated instance.
#[derive(Clone, Debug)]
pub struct TinyInstance {
    pub tasks: Vec<ToyTask<f64>>,
    pub l: usize,
    pub k: usize,
}

fn random_prior(n: usize, rng: &mut Rng) -> Result<(ExplicitPrior<f64>, usize)> {
    let states = rng.gen_range(1..=2);
    let marginals: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            if states == 1 {
                vec![1.0]
            } else {
                let p = rng.gen_range(0.2..=0.8);
                vec![p, 1.0 - p]
            }
        })
        .collect();
    Ok((ExplicitPrior::product(states, &marginals)?, states))
}

fn random_coverage(n: usize, states: usize, penalized: bool, rng: &mut Rng) -> Result<Coverage<f64>> {
    let raw: Vec<f64> = (0..ELEMENTS).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total * TOTAL_WEIGHT).collect();
    let covers = (0..n)
        .map(|_| {
            (0..states)
                .map(|_| (0..ELEMENTS).filter(|_| rng.gen_bool(COVER_PROB)).fold(0u64, |m, u| m | 1 << u))
                .collect()
        })
        .collect();
    let penalties = (0..n).map(|_| if penalized { rng.gen_range(0.0..MAX_PENALTY) } else { 0.0 }).collect();
    Coverage::new(weights, covers, penalties)
}

fn non_negative(f: &Coverage<f64>, prior: &ExplicitPrior<f64>, n: usize) -> bool {
    prior.entries().iter().all(|(phi, _): &(Realization, f64)| {
        (0u32..1 << n).all(|mask| {
            let items: Vec<ItemId> = (0..n).filter(|i| mask >> i & 1 == 1).map(ItemId::new).collect();
            f.value(&items, phi) >= 0.0
        })
    })
}

/// Draws one instance of the regime. Tasks share the prior.
pub fn random_instance(regime: Regime, rng: &mut Rng) -> Result<TinyInstance> {
    let (n, l, k) = regime.shape(rng);
    let m = rng.gen_range(1..=3);
    let (prior, states) = random_prior(n, rng)?;
    let shared = Arc::new(Prior::from(prior.clone()));
    let flags = if regime.monotone() { TaskFlags::MONOTONE_SUBMODULAR } else { TaskFlags::SUBMODULAR };
    let guard = Guard::default();
    let mut tasks = Vec::with_capacity(m);
    let mut attempts = 0;
    while tasks.len() < m {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::InvalidInstance("generator could not produce a valid task".into()));
        }
        let f = random_coverage(n, states, !regime.monotone(), rng)?;
        if !non_negative(&f, &prior, n) {
            continue;
        }
        let task = ToyTask::new(Arc::clone(&shared), Arc::new(f)).with_flags(flags);
        if !check_adaptive_submodularity(&task, &guard)?.holds {
            continue;
        }
        if regime.monotone() && !check_adaptive_monotonicity(&task, &guard)?.holds {
            continue;
        }
        tasks.push(task);
    }
    Ok(TinyInstance { tasks, l, k })
}

/// The policy a regime is checked on, with all randomness enumerated.
pub fn regime_policy(regime: Regime, inst: &TinyInstance) -> Result<Policy<f64>> {
    let obj = SampleAverage::new(&inst.tasks, Estimator::Exact, 0)?;
    let (l, k) = (inst.l, inst.k);
    match regime {
        Regime::Monotone => tgp_policy(tgp_train(&obj, l)?, k, Estimator::Exact),
        Regime::Nonmonotone => trgp_enumerated(&obj, l, k, Estimator::Exact),
        Regime::Kl1 => pi_a_enumerated(&obj, l, k, PiAWeights::Proof, Estimator::Exact),
        Regime::L1 => pi_b(l, k, Estimator::Exact),
    }
}

/// Outcome on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub instance: usize,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub k: usize,
    pub value: f64,
    pub optimum: f64,
    /// value / optimum, or 1 when the optimum is zero.
    pub ratio: f64,
    pub bound: f64,
}

impl RatioRecord {
    pub fn violates(&self) -> bool {
        self.value < self.bound * self.optimum - TOLERANCE
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub regime: Regime,
    pub count: usize,
    pub seed: u64,
    pub min_ratio: f64,
    pub mean_ratio: f64,
    /// Smallest bound across instances (bounds depend on l and k).
    pub min_bound: f64,
    pub violations: Vec<RatioRecord>,
    pub holds: bool,
}

/// Value, optimum and bound on one instance.
pub fn check_instance(regime: Regime, inst: &TinyInstance, index: usize) -> Result<RatioRecord> {
    let policy = regime_policy(regime, inst)?;
    let value = f_avg_exact(&policy, &inst.tasks)?;
    let optimum = optimal_two_phase(&inst.tasks, inst.l, inst.k, &Guard::default())?.value;
    let ratio = if optimum.abs() <= TOLERANCE { 1.0 } else { value / optimum };
    Ok(RatioRecord {
        instance: index,
        n: inst.tasks[0].prior().n_items(),
        m: inst.tasks.len(),
        l: inst.l,
        k: inst.k,
        value,
        optimum,
        ratio,
        bound: regime.bound(inst.l, inst.k),
    })
}

/// Generates `count` instances from `seed` and checks the regime's bound on
/// each. Instance `i` depends only on `(seed, i)`.
pub fn verify_ratios(count: usize, seed: u64, regime: Regime) -> Result<RatioReport> {
    let records = (0..count)
        .into_par_iter()
        .map(|i| {
            let inst = random_instance(regime, &mut rng::stream(seed, &[i as u64]))?;
            check_instance(regime, &inst, i)
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    let violations: Vec<RatioRecord> = records.iter().filter(|r| r.violates()).cloned().collect();
    Ok(RatioReport {
        regime,
        count,
        seed,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        mean_ratio: if count == 0 { f64::NAN } else { ratios.iter().sum::<f64>() / count as f64 },
        min_bound: records.iter().map(|r| r.bound).fold(f64::INFINITY, f64::min),
        holds: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constant, Task};

    #[test]
    fn bounds() {
        assert_eq!(Regime::Monotone.bound(1, 3), 0.5);
        assert!((Regime::Nonmonotone.bound(2, 4) - 0.5 * 0.25 * 0.25).abs() < 1e-15);
        assert!(Regime::Nonmonotone.bound(3, 5) >= 1.0 / 32.0);
        assert!((Regime::Kl1.bound(2, 3) - 0.268_941_421_369_995).abs() < 1e-12);
        assert!((Regime::L1.bound(1, 3) - 0.183_939_720_585_721).abs() < 1e-12);
        assert_eq!("kl1".parse::<Regime>().unwrap(), Regime::Kl1);
        assert!("other".parse::<Regime>().is_err());
    }

    #[test]
    fn generated_instances_respect_limits() {
        for regime in [Regime::Monotone, Regime::Nonmonotone, Regime::Kl1, Regime::L1] {
            for i in 0..10 {
                let inst = random_instance(regime, &mut rng::stream(1, &[i])).unwrap();
                let n = inst.tasks[0].ground_size();
                assert!(n <= 5 && inst.tasks.len() <= 3 && inst.l <= inst.k && inst.k <= 5);
                let support = inst.tasks[0].support().unwrap();
                for t in &inst.tasks {
                    for (phi, _) in support {
                        let all: Vec<ItemId> = (0..n).map(ItemId::new).collect();
                        let v = t.utility(&all, phi);
                        assert!((0.0..=TOTAL_WEIGHT + 1e-9).contains(&v));
                    }
                }
                match regime {
                    Regime::Nonmonotone => assert!(inst.l > 1 && inst.k - inst.l > 1),
                    Regime::Kl1 => assert_eq!(inst.l + 1, inst.k),
                    Regime::L1 => assert_eq!(inst.l, 1),
                    Regime::Monotone => assert!(inst.l >= 1 && inst.l < inst.k && inst.k <= 4),
                }
            }
        }
    }

    #[test]
    fn constant_instance_has_ratio_one() {
        let prior = Arc::new(Prior::from(ExplicitPrior::point(Realization::from_raw(&[0, 0, 0]), 1).unwrap()));
        let inst = TinyInstance { tasks: vec![ToyTask::new(prior, Arc::new(Constant(2.5)))], l: 1, k: 2 };
        let rec = check_instance(Regime::Monotone, &inst, 0).unwrap();
        assert_eq!((rec.value, rec.optimum, rec.ratio), (2.5, 2.5, 1.0));
    }

    #[test]
    fn small_runs_hold_and_replay() {
        for regime in [Regime::Monotone, Regime::Nonmonotone, Regime::Kl1, Regime::L1] {
            let a = verify_ratios(8, 5, regime).unwrap();
            assert!(a.holds, "{regime:?}: {:?}", a.violations);
            let b = verify_ratios(8, 5, regime).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}
