use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of an item. Ids `0..n` are the real items of the ground set; ids
/// `n..` are dummy items that never change utility.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn new(index: usize) -> Self {
        ItemId(u32::try_from(index).expect("item index fits in u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_dummy(self, n: usize) -> bool {
        self.index() >= n
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A state from a finite state space, encoded as a small integer.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateValue(pub u16);

impl fmt::Display for StateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Distinct real items among `items`, ascending. Dummies (ids `>= n`) are dropped.
pub fn real_items<I: IntoIterator<Item = ItemId>>(items: I, n: usize) -> Vec<ItemId> {
    let mut out: Vec<ItemId> = items.into_iter().filter(|e| !e.is_dummy(n)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_items_strips_dummies_and_duplicates() {
        let got = real_items([ItemId(3), ItemId(1), ItemId(5), ItemId(1), ItemId(0)], 4);
        assert_eq!(got, vec![ItemId(0), ItemId(1), ItemId(3)]);
        assert!(ItemId(4).is_dummy(4));
        assert!(!ItemId(3).is_dummy(4));
    }
}
