use std::fmt;
use std::sync::Arc;

use rand::Rng as _;

use super::item::StateValue;
use super::realization::{is_consistent, PartialRealization, Realization};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::Scalar;

/// Tolerance on the total probability of an explicit prior.
pub const NORMALIZATION_TOL: f64 = 1e-12;

fn normalization_tol<S: Scalar>(len: usize) -> S {
    S::of(NORMALIZATION_TOL).max(S::epsilon() * S::of_usize(4 * len.max(1)))
}

/// A finite list of realizations with their probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitPrior<S> {
    n: usize,
    n_states: usize,
    entries: Vec<(Realization, S)>,
}

impl<S: Scalar> ExplicitPrior<S> {
    pub fn new(n: usize, n_states: usize, entries: Vec<(Realization, S)>) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidPrior("state space must be non-empty".into()));
        }
        if entries.is_empty() {
            return Err(Error::InvalidPrior("no realizations".into()));
        }
        for (phi, p) in &entries {
            if phi.len() != n {
                return Err(Error::InvalidPrior(format!("realization assigns {} states, expected {n}", phi.len())));
            }
            if phi.states.iter().any(|s| s.0 as usize >= n_states) {
                return Err(Error::InvalidPrior(format!("state out of range in {phi:?}")));
            }
            if !(*p >= S::zero()) {
                return Err(Error::InvalidPrior(format!("negative probability {p}")));
            }
        }
        let total: S = entries.iter().map(|(_, p)| *p).sum();
        if (total - S::one()).abs() > normalization_tol::<S>(entries.len()) {
            return Err(Error::InvalidPrior(format!("probabilities sum to {total}")));
        }
        Ok(ExplicitPrior { n, n_states, entries })
    }

    /// A single realization with probability one.
    pub fn point(realization: Realization, n_states: usize) -> Result<Self> {
        let n = realization.len();
        Self::new(n, n_states, vec![(realization, S::one())])
    }

    /// Independent item states: `marginals[e][s]` is the probability that item
    /// `e` is in state `s`. Zero-probability realizations are omitted.
    pub fn product(n_states: usize, marginals: &[Vec<S>]) -> Result<Self> {
        let n = marginals.len();
        if marginals.iter().any(|m| m.len() != n_states) {
            return Err(Error::InvalidPrior("every item needs one probability per state".into()));
        }
        let mut entries = vec![(Vec::with_capacity(n), S::one())];
        for dist in marginals {
            let mut next = Vec::with_capacity(entries.len() * n_states);
            for (states, p) in &entries {
                for (s, q) in dist.iter().enumerate() {
                    if *q > S::zero() {
                        let mut st: Vec<StateValue> = states.clone();
                        st.push(StateValue(s as u16));
                        next.push((st, *p * *q));
                    }
                }
            }
            entries = next;
        }
        Self::new(n, n_states, entries.into_iter().map(|(s, p)| (Realization::new(s), p)).collect())
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn entries(&self) -> &[(Realization, S)] {
        &self.entries
    }

    /// Pr[Φ ∼ ψ].
    pub fn mass(&self, psi: &PartialRealization) -> S {
        self.entries.iter().filter(|(phi, _)| is_consistent(psi, phi)).map(|(_, p)| *p).sum()
    }

    /// The prior restricted to realizations consistent with ψ, renormalized.
    pub fn condition(&self, psi: &PartialRealization) -> Result<Self> {
        let kept: Vec<(Realization, S)> =
            self.entries.iter().filter(|(phi, p)| *p > S::zero() && is_consistent(psi, phi)).cloned().collect();
        let mass: S = kept.iter().map(|(_, p)| *p).sum();
        if kept.is_empty() || !(mass > S::zero()) {
            return Err(Error::ZeroMassCondition);
        }
        Ok(ExplicitPrior {
            n: self.n,
            n_states: self.n_states,
            entries: kept.into_iter().map(|(phi, p)| (phi, p / mass)).collect(),
        })
    }

    pub fn sample(&self, rng: &mut Rng) -> Realization {
        sample_weighted(&self.entries, rng).clone()
    }

    pub fn sample_conditioned(&self, psi: &PartialRealization, rng: &mut Rng) -> Result<Realization> {
        if psi.is_empty() {
            return Ok(self.sample(rng));
        }
        let kept: Vec<(&Realization, S)> = self
            .entries
            .iter()
            .filter(|(phi, p)| *p > S::zero() && is_consistent(psi, phi))
            .map(|(phi, p)| (phi, *p))
            .collect();
        if kept.is_empty() {
            return Err(Error::ZeroMassCondition);
        }
        let total: f64 = kept.iter().map(|(_, p)| p.as_f64()).sum();
        let mut u = rng.gen::<f64>() * total;
        for (phi, p) in &kept {
            u -= p.as_f64();
            if u < 0.0 {
                return Ok((*phi).clone());
            }
        }
        Ok(kept.last().expect("non-empty").0.clone())
    }
}

fn sample_weighted<'a, T, S: Scalar>(entries: &'a [(T, S)], rng: &mut Rng) -> &'a T {
    let mut u = rng.gen::<f64>();
    for (x, p) in entries {
        u -= p.as_f64();
        if u < 0.0 {
            return x;
        }
    }
    // Rounding slack: fall back to the last positive-mass entry.
    &entries.iter().rev().find(|(_, p)| *p > S::zero()).unwrap_or(&entries[entries.len() - 1]).0
}

type Sampler = Arc<dyn Fn(&mut Rng) -> Realization + Send + Sync>;
type ConditionalSampler = Arc<dyn Fn(&PartialRealization, &mut Rng) -> Option<Realization> + Send + Sync>;

/// A prior known only through a seeded sampler.
///
/// Conditioning uses the supplied conditional sampler when present and
/// rejection sampling otherwise.
#[derive(Clone)]
pub struct GenerativePrior<S> {
    n: usize,
    sampler: Sampler,
    conditional: Option<ConditionalSampler>,
    given: PartialRealization,
    max_attempts: usize,
    _scalar: std::marker::PhantomData<S>,
}

impl<S> fmt::Debug for GenerativePrior<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenerativePrior")
            .field("n", &self.n)
            .field("given", &self.given)
            .field("has_conditional", &self.conditional.is_some())
            .finish()
    }
}

impl<S: Scalar> GenerativePrior<S> {
    pub fn new<F>(n: usize, sampler: F) -> Self
    where
        F: Fn(&mut Rng) -> Realization + Send + Sync + 'static,
    {
        GenerativePrior {
            n,
            sampler: Arc::new(sampler),
            conditional: None,
            given: PartialRealization::new(),
            max_attempts: 100_000,
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn with_conditional<F>(mut self, conditional: F) -> Self
    where
        F: Fn(&PartialRealization, &mut Rng) -> Option<Realization> + Send + Sync + 'static,
    {
        self.conditional = Some(Arc::new(conditional));
        self
    }

    pub fn with_max_attempts(mut self, attempts: usize) -> Self {
        self.max_attempts = attempts.max(1);
        self
    }

    /// Hides the support of an explicit prior behind a sampler.
    pub fn from_explicit(prior: ExplicitPrior<S>) -> Self {
        let prior = Arc::new(prior);
        let p2 = Arc::clone(&prior);
        GenerativePrior::new(prior.n_items(), move |rng| prior.sample(rng))
            .with_conditional(move |psi, rng| p2.sample_conditioned(psi, rng).ok())
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn given(&self) -> &PartialRealization {
        &self.given
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<Realization> {
        if self.given.is_empty() {
            return Ok((self.sampler)(rng));
        }
        let given = self.given.clone();
        self.sample_given(&given, rng)
    }

    pub fn sample_conditioned(&self, psi: &PartialRealization, rng: &mut Rng) -> Result<Realization> {
        let merged = merge(&self.given, psi).ok_or(Error::ZeroMassCondition)?;
        if merged.is_empty() {
            return Ok((self.sampler)(rng));
        }
        self.sample_given(&merged, rng)
    }

    fn sample_given(&self, psi: &PartialRealization, rng: &mut Rng) -> Result<Realization> {
        if let Some(cond) = &self.conditional {
            return cond(psi, rng).ok_or(Error::ZeroMassCondition);
        }
        for _ in 0..self.max_attempts {
            let phi = (self.sampler)(rng);
            if is_consistent(psi, &phi) {
                return Ok(phi);
            }
        }
        Err(Error::ZeroMassCondition)
    }

    fn conditioned(&self, psi: &PartialRealization) -> Result<Self> {
        let merged = merge(&self.given, psi).ok_or(Error::ZeroMassCondition)?;
        Ok(GenerativePrior { given: merged, ..self.clone() })
    }
}

fn merge(a: &PartialRealization, b: &PartialRealization) -> Option<PartialRealization> {
    let mut out = a.clone();
    for (e, s) in b.iter() {
        match out.get(*e) {
            Some(t) if t != s => return None,
            Some(_) => {}
            None => {
                out.insert(*e, *s);
            }
        }
    }
    Some(out)
}

/// Distribution over realizations of the real items.
#[derive(Clone, Debug)]
pub enum Prior<S> {
    Explicit(ExplicitPrior<S>),
    Generative(GenerativePrior<S>),
}

impl<S: Scalar> Prior<S> {
    pub fn n_items(&self) -> usize {
        match self {
            Prior::Explicit(p) => p.n_items(),
            Prior::Generative(g) => g.n_items(),
        }
    }

    /// Enumerated support, when the prior is explicit.
    pub fn support(&self) -> Option<&[(Realization, S)]> {
        match self {
            Prior::Explicit(p) => Some(p.entries()),
            Prior::Generative(_) => None,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<Realization> {
        match self {
            Prior::Explicit(p) => Ok(p.sample(rng)),
            Prior::Generative(g) => g.sample(rng),
        }
    }

    pub fn sample_conditioned(&self, psi: &PartialRealization, rng: &mut Rng) -> Result<Realization> {
        match self {
            Prior::Explicit(p) => p.sample_conditioned(psi, rng),
            Prior::Generative(g) => g.sample_conditioned(psi, rng),
        }
    }
}

impl<S: Scalar> From<ExplicitPrior<S>> for Prior<S> {
    fn from(p: ExplicitPrior<S>) -> Self {
        Prior::Explicit(p)
    }
}

/// p(· | ψ). Explicit priors are restricted and renormalized; generative
/// priors wrap their conditional sampler.
pub fn conditional_prior<S: Scalar>(p: &Prior<S>, psi: &PartialRealization) -> Result<Prior<S>> {
    match p {
        Prior::Explicit(e) => Ok(Prior::Explicit(e.condition(psi)?)),
        Prior::Generative(g) => Ok(Prior::Generative(g.conditioned(psi)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ItemId;
    use crate::rng::from_seed;

    fn psi(pairs: &[(u32, u16)]) -> PartialRealization {
        pairs.iter().map(|&(e, s)| (ItemId(e), StateValue(s))).collect()
    }

    fn four() -> ExplicitPrior<f64> {
        ExplicitPrior::new(
            2,
            2,
            vec![
                (Realization::from_raw(&[0, 0]), 0.1),
                (Realization::from_raw(&[0, 1]), 0.2),
                (Realization::from_raw(&[1, 0]), 0.3),
                (Realization::from_raw(&[1, 1]), 0.4),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_unnormalized_and_negative() {
        let r = Realization::from_raw(&[0]);
        assert!(ExplicitPrior::new(1, 1, vec![(r.clone(), 0.5)]).is_err());
        assert!(ExplicitPrior::new(1, 2, vec![(r.clone(), 1.5), (Realization::from_raw(&[1]), -0.5)]).is_err());
        assert!(ExplicitPrior::new(1, 1, vec![(Realization::from_raw(&[1]), 1.0)]).is_err());
    }

    #[test]
    fn uniform_pair_conditioned_to_point_mass() {
        let p = ExplicitPrior::new(1, 2, vec![(Realization::from_raw(&[0]), 0.5), (Realization::from_raw(&[1]), 0.5)])
            .unwrap();
        let c = p.condition(&psi(&[(0, 1)])).unwrap();
        assert_eq!(c.entries(), &[(Realization::from_raw(&[1]), 1.0)]);
    }

    #[test]
    fn empty_condition_is_identity() {
        assert_eq!(four().condition(&PartialRealization::new()).unwrap(), four());
    }

    #[test]
    fn four_realizations_renormalize() {
        // Fixing item 0 to state 1 keeps 0.3 and 0.4, renormalized by 0.7.
        let c = four().condition(&psi(&[(0, 1)])).unwrap();
        assert_eq!(c.entries().len(), 2);
        assert!((c.entries()[0].1 - 3.0 / 7.0).abs() < 1e-12);
        assert!((c.entries()[1].1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_condition_has_zero_mass() {
        let p = ExplicitPrior::<f64>::point(Realization::from_raw(&[0, 0]), 2).unwrap();
        assert!(matches!(p.condition(&psi(&[(1, 1)])), Err(Error::ZeroMassCondition)));
    }

    #[test]
    fn conditioning_then_marginalizing_recovers_prior() {
        // Σ_ψ Pr[ψ]·p(·|ψ) = p for ψ ranging over the states of item 1.
        let p = four();
        let mut recovered = vec![0.0; 4];
        for s in 0..2 {
            let cond = psi(&[(1, s)]);
            let mass = p.mass(&cond);
            let c = p.condition(&cond).unwrap();
            for (phi, q) in c.entries() {
                let idx = p.entries().iter().position(|(x, _)| x == phi).unwrap();
                recovered[idx] += mass * q;
            }
        }
        for ((_, q), r) in p.entries().iter().zip(recovered) {
            assert!((q - r).abs() < 1e-12);
        }
    }

    #[test]
    fn product_prior_multiplies_marginals() {
        let p: ExplicitPrior<f64> = ExplicitPrior::product(2, &[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        assert_eq!(p.entries().len(), 4);
        assert!((p.mass(&psi(&[(0, 1)])) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn generative_conditioning_by_rejection() {
        let ex = four();
        let g = GenerativePrior::new(2, move |rng| ex.sample(rng));
        let gp: Prior<f64> = Prior::Generative(g);
        let c = conditional_prior(&gp, &psi(&[(0, 1)])).unwrap();
        let mut rng = from_seed(5);
        for _ in 0..50 {
            let phi = c.sample(&mut rng).unwrap();
            assert_eq!(phi.states[0], StateValue(1));
        }
        // Conflicting condition on top of an existing one.
        assert!(matches!(conditional_prior(&c, &psi(&[(0, 0)])), Err(Error::ZeroMassCondition)));
    }
}
