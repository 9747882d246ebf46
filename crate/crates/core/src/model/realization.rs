use serde::{Deserialize, Serialize};

use super::item::{ItemId, StateValue};

/// A total assignment of states to the real items.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Realization {
    pub states: Vec<StateValue>,
}

impl Realization {
    pub fn new(states: Vec<StateValue>) -> Self {
        Realization { states }
    }

    pub fn from_raw(states: &[u16]) -> Self {
        Realization { states: states.iter().map(|&s| StateValue(s)).collect() }
    }

    pub fn state(&self, item: ItemId) -> StateValue {
        self.states[item.index()]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Observed item/state pairs, in the order they were observed.
///
/// Each item appears at most once. Equality compares contents, not order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "St: Serialize", deserialize = "St: Deserialize<'de>"))]
pub struct PartialRealization<St = StateValue> {
    observed: Vec<(ItemId, St)>,
}

impl<St> Default for PartialRealization<St> {
    fn default() -> Self {
        PartialRealization { observed: Vec::new() }
    }
}

impl<St: Clone + PartialEq + Ord> PartialRealization<St> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from pairs; `None` if an item repeats.
    pub fn from_pairs<I: IntoIterator<Item = (ItemId, St)>>(pairs: I) -> Option<Self> {
        let mut psi = Self::new();
        for (e, s) in pairs {
            if !psi.insert(e, s) {
                return None;
            }
        }
        Some(psi)
    }

    /// Records `item ↦ state`. Returns `false` (and leaves `self` unchanged)
    /// if the item was already observed.
    pub fn insert(&mut self, item: ItemId, state: St) -> bool {
        if self.contains(item) {
            return false;
        }
        self.observed.push((item, state));
        true
    }

    pub fn with(&self, item: ItemId, state: St) -> Self {
        let mut out = self.clone();
        out.insert(item, state);
        out
    }

    pub fn get(&self, item: ItemId) -> Option<&St> {
        self.observed.iter().find(|(e, _)| *e == item).map(|(_, s)| s)
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.observed.iter().any(|(e, _)| *e == item)
    }

    /// dom(ψ), ascending.
    pub fn domain(&self) -> Vec<ItemId> {
        let mut d: Vec<ItemId> = self.observed.iter().map(|(e, _)| *e).collect();
        d.sort_unstable();
        d
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(ItemId, St)> {
        self.observed.iter()
    }

    /// Pairs sorted by item; identical for partial realizations with equal contents.
    pub fn canonical(&self) -> Vec<(ItemId, St)> {
        let mut c = self.observed.clone();
        c.sort_by_key(|a| a.0);
        c
    }

    /// `self ⊆ other`: every observation in `self` appears identically in `other`.
    pub fn is_subrealization_of(&self, other: &Self) -> bool {
        self.observed.iter().all(|(e, s)| other.get(*e) == Some(s))
    }
}

impl<St: Clone + PartialEq + Ord> PartialEq for PartialRealization<St> {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.is_subrealization_of(other)
    }
}

impl<St: Clone + Eq + Ord> Eq for PartialRealization<St> {}

impl<St: Clone + PartialEq + Ord> FromIterator<(ItemId, St)> for PartialRealization<St> {
    fn from_iter<I: IntoIterator<Item = (ItemId, St)>>(iter: I) -> Self {
        let mut psi = Self::new();
        for (e, s) in iter {
            psi.insert(e, s);
        }
        psi
    }
}

/// True iff dom(ψ) ⊆ dom(ψ′) and the two agree on dom(ψ).
pub fn is_subrealization<St: Clone + PartialEq + Ord>(
    psi: &PartialRealization<St>,
    psi_prime: &PartialRealization<St>,
) -> bool {
    psi.is_subrealization_of(psi_prime)
}

/// True iff φ agrees with ψ on dom(ψ). Dummy items in ψ are ignored.
pub fn is_consistent(psi: &PartialRealization, phi: &Realization) -> bool {
    psi.iter().all(|(e, s)| e.index() >= phi.len() || phi.state(*e) == *s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn psi(pairs: &[(u32, u16)]) -> PartialRealization {
        PartialRealization::from_pairs(pairs.iter().map(|&(e, s)| (ItemId(e), StateValue(s)))).unwrap()
    }

    #[test]
    fn subrealization_examples() {
        assert!(is_subrealization(&psi(&[]), &psi(&[(1, 0), (2, 1)])));
        assert!(is_subrealization(&psi(&[(1, 0)]), &psi(&[(1, 0), (2, 1)])));
        assert!(!is_subrealization(&psi(&[(1, 0)]), &psi(&[(1, 1), (2, 1)])));
    }

    #[test]
    fn consistency_examples() {
        let phi0 = Realization::from_raw(&[1, 0, 1]);
        let phi1 = Realization::from_raw(&[1, 1, 1]);
        assert!(is_consistent(&psi(&[]), &phi0));
        assert!(is_consistent(&psi(&[(1, 0)]), &phi0));
        assert!(!is_consistent(&psi(&[(1, 0)]), &phi1));
    }

    #[test]
    fn duplicate_items_rejected() {
        assert!(PartialRealization::from_pairs([(ItemId(0), StateValue(0)), (ItemId(0), StateValue(1))]).is_none());
        let mut p = psi(&[(0, 1)]);
        assert!(!p.insert(ItemId(0), StateValue(1)));
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn equality_ignores_order() {
        assert_eq!(psi(&[(0, 1), (2, 0)]), psi(&[(2, 0), (0, 1)]));
        assert_eq!(psi(&[(0, 1), (2, 0)]).canonical(), psi(&[(2, 0), (0, 1)]).canonical());
    }

    fn arb_psi() -> impl Strategy<Value = PartialRealization> {
        // ≤ 4 items, ≤ 2 states; each item absent or observed in one state.
        proptest::collection::vec(0u16..3, 4).prop_map(|v| {
            v.iter().enumerate().filter(|(_, s)| **s < 2).map(|(e, s)| (ItemId::new(e), StateValue(*s))).collect()
        })
    }

    proptest! {
        #[test]
        fn subrealization_is_a_partial_order(a in arb_psi(), b in arb_psi(), c in arb_psi()) {
            prop_assert!(is_subrealization(&a, &a));
            if is_subrealization(&a, &b) && is_subrealization(&b, &a) {
                prop_assert_eq!(&a, &b);
            }
            if is_subrealization(&a, &b) && is_subrealization(&b, &c) {
                prop_assert!(is_subrealization(&a, &c));
            }
        }
    }
}
