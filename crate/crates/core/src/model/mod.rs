//! Ground set, realizations, priors, tasks and policy execution.

mod exec;
mod instance;
mod item;
mod policy;
mod prior;
mod realization;
mod task;
mod utility;

pub use exec::{evaluate_exact, expected_utility_exact, f_avg_exact, f_avg_mc, run_policy, Trace};
pub use instance::{format_key, parse_key, InstanceFile, RealizationEntry, TaskFile, ToyInstance};
pub use item::{real_items, ItemId, StateValue};
pub(crate) use policy::top_ranked;
pub use policy::{concat, truncate, MixturePolicy, Pick, Policy, Rule, TwoPhasePolicy};
pub use prior::{conditional_prior, ExplicitPrior, GenerativePrior, Prior};
pub use realization::{is_consistent, is_subrealization, PartialRealization, Realization};
pub use task::{Task, TaskFlags, ToyTask};
pub use utility::{Constant, Coverage, FnUtility, Modular, SetFunction, TableUtility};
