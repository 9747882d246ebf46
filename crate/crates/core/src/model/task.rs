use std::fmt::{self, Debug};
use std::hash::Hash;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::item::{ItemId, StateValue};
use super::prior::Prior;
use super::realization::{PartialRealization, Realization};
use super::utility::SetFunction;
use crate::error::Result;
use crate::rng::Rng;
use crate::Scalar;

/// Declared structural properties of a task. They are promises made by the
/// caller; `bruteforce` can check them on small instances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFlags {
    pub adaptive_monotone: bool,
    pub adaptive_submodular: bool,
}

impl TaskFlags {
    pub const MONOTONE_SUBMODULAR: TaskFlags = TaskFlags { adaptive_monotone: true, adaptive_submodular: true };
    pub const SUBMODULAR: TaskFlags = TaskFlags { adaptive_monotone: false, adaptive_submodular: true };
}

/// One task: a utility oracle f(Y, φ) together with the distribution its
/// realizations are drawn from.
///
/// `utility` and `gains` receive distinct real items in ascending order; the
/// execution engine strips dummy items before calling them.
pub trait Task<S: Scalar>: Sync {
    type Realization: Clone + Send + Sync;
    type State: Clone + Eq + Ord + Hash + Debug + Send + Sync;

    /// Number of real items n.
    fn ground_size(&self) -> usize;

    /// State revealed by selecting `item` under φ.
    fn state_of(&self, item: ItemId, phi: &Self::Realization) -> Self::State;

    fn utility(&self, items: &[ItemId], phi: &Self::Realization) -> S;

    /// f(base ∪ {c}, φ) − f(base, φ) for each candidate.
    fn gains(&self, base: &[ItemId], candidates: &[ItemId], phi: &Self::Realization) -> Vec<S> {
        let f0 = self.utility(base, phi);
        let mut scratch = Vec::with_capacity(base.len() + 1);
        candidates
            .iter()
            .map(|c| {
                if c.is_dummy(self.ground_size()) || base.binary_search(c).is_ok() {
                    return S::zero();
                }
                scratch.clear();
                scratch.extend_from_slice(base);
                let at = scratch.binary_search(c).unwrap_err();
                scratch.insert(at, *c);
                self.utility(&scratch, phi) - f0
            })
            .collect()
    }

    /// Enumerated realizations with their probabilities, when available.
    fn support(&self) -> Option<&[(Self::Realization, S)]>;

    fn sample(&self, rng: &mut Rng) -> Result<Self::Realization>;

    /// A draw from p(· | ψ).
    fn sample_conditioned(&self, psi: &PartialRealization<Self::State>, rng: &mut Rng) -> Result<Self::Realization>;

    fn is_consistent(&self, psi: &PartialRealization<Self::State>, phi: &Self::Realization) -> bool {
        let n = self.ground_size();
        psi.iter().all(|(e, s)| e.is_dummy(n) || self.state_of(*e, phi) == *s)
    }

    fn flags(&self) -> TaskFlags {
        TaskFlags::default()
    }
}

/// A task over an explicit or generative prior on small-integer states.
#[derive(Clone)]
pub struct ToyTask<S> {
    prior: Arc<Prior<S>>,
    utility: Arc<dyn SetFunction<S>>,
    flags: TaskFlags,
}

impl<S: Scalar> ToyTask<S> {
    pub fn new(prior: Arc<Prior<S>>, utility: Arc<dyn SetFunction<S>>) -> Self {
        ToyTask { prior, utility, flags: TaskFlags::default() }
    }

    pub fn with_flags(mut self, flags: TaskFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn prior(&self) -> &Arc<Prior<S>> {
        &self.prior
    }

    pub fn set_function(&self) -> &Arc<dyn SetFunction<S>> {
        &self.utility
    }

    /// Same utility over a different prior.
    pub fn with_prior(&self, prior: Arc<Prior<S>>) -> Self {
        ToyTask { prior, utility: Arc::clone(&self.utility), flags: self.flags }
    }
}

impl<S> Debug for ToyTask<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToyTask").field("flags", &self.flags).finish_non_exhaustive()
    }
}

impl<S: Scalar> Task<S> for ToyTask<S> {
    type Realization = Realization;
    type State = StateValue;

    fn ground_size(&self) -> usize {
        self.prior.n_items()
    }

    fn state_of(&self, item: ItemId, phi: &Realization) -> StateValue {
        phi.state(item)
    }

    fn utility(&self, items: &[ItemId], phi: &Realization) -> S {
        self.utility.value(items, phi)
    }

    fn support(&self) -> Option<&[(Realization, S)]> {
        self.prior.support()
    }

    fn sample(&self, rng: &mut Rng) -> Result<Realization> {
        self.prior.sample(rng)
    }

    fn sample_conditioned(&self, psi: &PartialRealization, rng: &mut Rng) -> Result<Realization> {
        self.prior.sample_conditioned(psi, rng)
    }

    fn is_consistent(&self, psi: &PartialRealization, phi: &Realization) -> bool {
        super::realization::is_consistent(psi, phi)
    }

    fn flags(&self) -> TaskFlags {
        self.flags
    }
}
