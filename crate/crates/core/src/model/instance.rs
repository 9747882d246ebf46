//! JSON documents describing an explicit prior and table-valued toy tasks.
//!
//! ```json
//! {"n": 2, "states": 1,
//!  "realizations": [{"states": [0, 0], "prob": 1.0}],
//!  "tasks": [{"utilities": {"0|0": 1.0, "0,1|0": 2.0}}]}
//! ```
//!
//! Keys are `<ascending comma-joined item ids>|<realization index>`; the
//! empty set is written as `|r`. Missing entries are zero.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::item::ItemId;
use super::prior::{ExplicitPrior, Prior};
use super::realization::Realization;
use super::task::{TaskFlags, ToyTask};
use super::utility::TableUtility;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationEntry {
    pub states: Vec<u16>,
    pub prob: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub utilities: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<TaskFlags>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub states: usize,
    pub realizations: Vec<RealizationEntry>,
    pub tasks: Vec<TaskFile>,
}

/// A shared explicit prior and the tasks defined over it.
#[derive(Clone, Debug)]
pub struct ToyInstance<S> {
    pub prior: Arc<Prior<S>>,
    pub tasks: Vec<ToyTask<S>>,
}

/// Parses `"0,2|1"` into the item set and realization index.
pub fn parse_key(key: &str, n: usize) -> Result<(Vec<ItemId>, usize)> {
    let bad = |why: &str| Error::InvalidInstance(format!("utility key {key:?}: {why}"));
    let (set, r) = key.split_once('|').ok_or_else(|| bad("missing '|'"))?;
    let r = r.trim().parse::<usize>().map_err(|_| bad("bad realization index"))?;
    let mut items = Vec::new();
    for part in set.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let e = part.parse::<usize>().map_err(|_| bad("bad item id"))?;
        if e >= n {
            return Err(bad("item id out of range"));
        }
        items.push(ItemId::new(e));
    }
    if items.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("items must be strictly ascending"));
    }
    Ok((items, r))
}

pub fn format_key(items: &[ItemId], realization: usize) -> String {
    let set: Vec<String> = items.iter().map(ItemId::to_string).collect();
    format!("{}|{realization}", set.join(","))
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build<S: Scalar>(&self) -> Result<ToyInstance<S>> {
        let realizations: Vec<Realization> =
            self.realizations.iter().map(|r| Realization::from_raw(&r.states)).collect();
        let entries = realizations.iter().cloned().zip(self.realizations.iter().map(|r| S::of(r.prob))).collect();
        let prior = Arc::new(Prior::from(ExplicitPrior::new(self.n, self.states, entries)?));
        if self.n > 64 {
            return Err(Error::InvalidInstance("table instances support at most 64 items".into()));
        }
        let tasks = self
            .tasks
            .iter()
            .map(|t| {
                let rows = t
                    .utilities
                    .iter()
                    .map(|(k, v)| parse_key(k, self.n).map(|(set, r)| (set, r, S::of(*v))))
                    .collect::<Result<Vec<_>>>()?;
                let table = TableUtility::new(&realizations, rows)?;
                Ok(ToyTask::new(Arc::clone(&prior), Arc::new(table)).with_flags(t.flags.unwrap_or_default()))
            })
            .collect::<Result<Vec<_>>>()?;
        if tasks.is_empty() {
            return Err(Error::EmptyTaskSet);
        }
        Ok(ToyInstance { prior, tasks })
    }
}

impl<S: Scalar> ToyInstance<S> {
    pub fn from_json(text: &str) -> Result<Self> {
        InstanceFile::from_json(text)?.build()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
