//! Independent Cascade influence maximization with full-adoption feedback.
//!
//! A realization is a live-edge graph: each edge is live independently with
//! its task-specific probability. Seeding a node activates everything it
//! reaches through live edges, and reveals the status of every edge leaving
//! the activated nodes.

mod graph;
mod task;

pub use graph::{gen_graph, DiGraph, GraphKind};
pub use task::{sample_task, spread, CascadeObservation, IcTask, IcTaskFile, LiveEdgeDraw, MAX_ENUMERABLE_EDGES};

#[cfg(test)]
mod tests;
