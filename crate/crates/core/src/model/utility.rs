use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::item::ItemId;
use super::realization::Realization;
use crate::error::{Error, Result};
use crate::Scalar;

/// f(Y, φ) over distinct real items `Y` listed in ascending order.
pub trait SetFunction<S>: Send + Sync {
    fn value(&self, items: &[ItemId], phi: &Realization) -> S;
}

fn mask(items: &[ItemId]) -> u64 {
    items.iter().fold(0u64, |m, e| m | (1u64 << e.0))
}

#[derive(Clone, Debug)]
pub struct Constant<S>(pub S);

impl<S: Scalar> SetFunction<S> for Constant<S> {
    fn value(&self, _items: &[ItemId], _phi: &Realization) -> S {
        self.0
    }
}

/// Σ_{e ∈ Y} w[e][φ(e)].
#[derive(Clone, Debug)]
pub struct Modular<S> {
    pub weights: Vec<Vec<S>>,
}

impl<S: Scalar> SetFunction<S> for Modular<S> {
    fn value(&self, items: &[ItemId], phi: &Realization) -> S {
        items.iter().map(|e| self.weights[e.index()][phi.state(*e).0 as usize]).sum()
    }
}

/// Weighted coverage minus a modular penalty:
/// `Σ w[u] over u ∈ ∪_{e∈Y} cover(e, φ(e))  −  Σ_{e∈Y} penalty[e]`.
///
/// With independent item states and zero penalties this is adaptive monotone
/// and adaptive submodular; penalties keep it adaptive submodular.
#[derive(Clone, Debug)]
pub struct Coverage<S> {
    /// Element weights (at most 64 elements).
    pub weights: Vec<S>,
    /// `covers[e][s]`: bitmask of elements covered by item `e` in state `s`.
    pub covers: Vec<Vec<u64>>,
    pub penalties: Vec<S>,
}

impl<S: Scalar> Coverage<S> {
    pub fn new(weights: Vec<S>, covers: Vec<Vec<u64>>, penalties: Vec<S>) -> Result<Self> {
        if weights.len() > 64 {
            return Err(Error::InvalidInstance("coverage supports at most 64 elements".into()));
        }
        if penalties.len() != covers.len() {
            return Err(Error::InvalidInstance("one penalty per item required".into()));
        }
        Ok(Coverage { weights, covers, penalties })
    }

    pub fn is_monotone(&self) -> bool {
        self.penalties.iter().all(|p| *p <= S::zero())
    }
}

impl<S: Scalar> SetFunction<S> for Coverage<S> {
    fn value(&self, items: &[ItemId], phi: &Realization) -> S {
        let mut covered = 0u64;
        let mut penalty = S::zero();
        for e in items {
            covered |= self.covers[e.index()][phi.state(*e).0 as usize];
            penalty = penalty + self.penalties[e.index()];
        }
        let mut total = S::zero();
        let mut bits = covered;
        while bits != 0 {
            let u = bits.trailing_zeros() as usize;
            total = total + self.weights[u];
            bits &= bits - 1;
        }
        total - penalty
    }
}

/// Lookup table keyed by (item set, realization); missing entries are zero.
#[derive(Clone, Debug)]
pub struct TableUtility<S> {
    index: HashMap<Realization, usize>,
    values: HashMap<(u64, usize), S>,
}

impl<S: Scalar> TableUtility<S> {
    /// `realizations` fixes the index used by `entries`.
    pub fn new(
        realizations: &[Realization],
        entries: impl IntoIterator<Item = (Vec<ItemId>, usize, S)>,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, r) in realizations.iter().enumerate() {
            if index.insert(r.clone(), i).is_some() {
                return Err(Error::InvalidInstance(format!("realization {i} is listed twice")));
            }
        }
        let mut values = HashMap::new();
        for (set, r, v) in entries {
            if r >= realizations.len() {
                return Err(Error::InvalidInstance(format!("realization index {r} out of range")));
            }
            if set.iter().any(|e| e.0 >= 64) {
                return Err(Error::InvalidInstance("table utilities support at most 64 items".into()));
            }
            values.insert((mask(&set), r), v);
        }
        Ok(TableUtility { index, values })
    }
}

impl<S: Scalar> SetFunction<S> for TableUtility<S> {
    fn value(&self, items: &[ItemId], phi: &Realization) -> S {
        self.index.get(phi).and_then(|r| self.values.get(&(mask(items), *r))).copied().unwrap_or_else(S::zero)
    }
}

/// Closure-backed utility.
#[derive(Clone)]
pub struct FnUtility<S>(pub Arc<dyn Fn(&[ItemId], &Realization) -> S + Send + Sync>);

impl<S> FnUtility<S> {
    pub fn new<F: Fn(&[ItemId], &Realization) -> S + Send + Sync + 'static>(f: F) -> Self {
        FnUtility(Arc::new(f))
    }
}

impl<S> fmt::Debug for FnUtility<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnUtility(..)")
    }
}

impl<S: Scalar> SetFunction<S> for FnUtility<S> {
    fn value(&self, items: &[ItemId], phi: &Realization) -> S {
        (self.0)(items, phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_counts_union_once() {
        let c = Coverage::new(vec![1.0, 2.0, 4.0], vec![vec![0b011], vec![0b110]], vec![0.0, 0.5]).unwrap();
        let phi = Realization::from_raw(&[0, 0]);
        assert_eq!(c.value(&[], &phi), 0.0);
        assert_eq!(c.value(&[ItemId(0)], &phi), 3.0);
        assert_eq!(c.value(&[ItemId(1)], &phi), 5.5);
        assert_eq!(c.value(&[ItemId(0), ItemId(1)], &phi), 6.5);
        assert!(!c.is_monotone());
    }

    #[test]
    fn table_defaults_to_zero() {
        let rs = vec![Realization::from_raw(&[0, 0])];
        let t = TableUtility::new(&rs, vec![(vec![ItemId(0), ItemId(1)], 0, 2.0)]).unwrap();
        assert_eq!(t.value(&[ItemId(0), ItemId(1)], &rs[0]), 2.0);
        assert_eq!(t.value(&[ItemId(0)], &rs[0]), 0.0);
        assert_eq!(t.value(&[ItemId(0)], &Realization::from_raw(&[1, 1])), 0.0);
    }
}
