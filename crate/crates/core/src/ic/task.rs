use std::collections::VecDeque;
use std::marker::PhantomData;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use fixedbitset::FixedBitSet;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::graph::DiGraph;
use crate::error::{Error, Result};
use crate::model::{ItemId, PartialRealization, Task, TaskFlags};
use crate::rng::{self, Rng};
use crate::Scalar;

/// Graphs with at most this many edges expose their full live-edge support.
pub const MAX_ENUMERABLE_EDGES: usize = 12;

/// One realization: the set of live edges, by edge index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LiveEdgeDraw {
    pub live: FixedBitSet,
}

impl LiveEdgeDraw {
    pub fn is_live(&self, edge: usize) -> bool {
        self.live.contains(edge)
    }
}

/// What seeding one node reveals under full-adoption feedback: every node
/// its cascade activates, and the status of every edge leaving those nodes.
/// All lists are ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CascadeObservation {
    pub activated: Vec<u32>,
    pub live: Vec<u32>,
    pub blocked: Vec<u32>,
}

/// Independent Cascade on a shared graph with task-specific edge
/// probabilities. Seeding node `v` is item `v`.
pub struct IcTask<S> {
    graph: Arc<DiGraph>,
    probs: Vec<f64>,
    queries: Arc<AtomicUsize>,
    support: OnceLock<Option<Vec<(LiveEdgeDraw, S)>>>,
    _scalar: PhantomData<fn() -> S>,
}

impl<S: Clone> Clone for IcTask<S> {
    fn clone(&self) -> Self {
        IcTask {
            graph: Arc::clone(&self.graph),
            probs: self.probs.clone(),
            queries: Arc::clone(&self.queries),
            support: self.support.clone(),
            _scalar: PhantomData,
        }
    }
}

impl<S> std::fmt::Debug for IcTask<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IcTask")
            .field("nodes", &self.graph.node_count())
            .field("edges", &self.graph.edge_count())
            .finish_non_exhaustive()
    }
}

/// On-disk form of a task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcTaskFile {
    pub seed: u64,
    pub choices: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_probs: Option<Vec<f64>>,
}

fn check_prob(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInstance(format!("edge probability {p} outside (0, 1]")))
    }
}

/// A task whose edge probabilities are drawn independently and uniformly
/// from `choices`.
pub fn sample_task<S: Scalar>(graph: Arc<DiGraph>, choices: &[f64], seed: u64) -> Result<IcTask<S>> {
    if choices.is_empty() {
        return Err(Error::Config("no edge probability choices".into()));
    }
    choices.iter().try_for_each(|p| check_prob(*p))?;
    let mut rng = rng::stream(seed, &[]);
    let probs = (0..graph.edge_count()).map(|_| choices[rng.gen_range(0..choices.len())]).collect();
    IcTask::new(graph, probs)
}

/// Marks the nodes reachable from `seeds` through live edges that are not
/// already in `seen`, and returns how many were newly marked.
fn reach(
    graph: &DiGraph,
    draw: &LiveEdgeDraw,
    seeds: &[usize],
    seen: &mut FixedBitSet,
    queue: &mut VecDeque<usize>,
) -> usize {
    let mut count = 0;
    for &s in seeds {
        if !seen.put(s) {
            count += 1;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for e in graph.out_edges(u) {
            if draw.is_live(e) {
                let v = graph.target(e);
                if !seen.put(v) {
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
    }
    count
}

/// |nodes reachable from `seeds` through live edges|, seeds included.
pub fn spread(graph: &DiGraph, seeds: &[usize], draw: &LiveEdgeDraw) -> usize {
    let mut seen = FixedBitSet::with_capacity(graph.node_count());
    reach(graph, draw, seeds, &mut seen, &mut VecDeque::new())
}

impl<S: Scalar> IcTask<S> {
    pub fn new(graph: Arc<DiGraph>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != graph.edge_count() {
            return Err(Error::InvalidInstance(format!(
                "{} probabilities for {} edges",
                probs.len(),
                graph.edge_count()
            )));
        }
        probs.iter().try_for_each(|p| check_prob(*p))?;
        Ok(IcTask {
            graph,
            probs,
            queries: Arc::new(AtomicUsize::new(0)),
            support: OnceLock::new(),
            _scalar: PhantomData,
        })
    }

    pub fn from_file(graph: Arc<DiGraph>, file: &IcTaskFile) -> Result<Self> {
        match &file.edge_probs {
            Some(p) => IcTask::new(graph, p.clone()),
            None => sample_task(graph, &file.choices, file.seed),
        }
    }

    pub fn graph(&self) -> &Arc<DiGraph> {
        &self.graph
    }

    pub fn edge_probs(&self) -> &[f64] {
        &self.probs
    }

    /// Oracle calls (utility, gains, states, draws) made so far on this task
    /// or its clones.
    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    fn touch(&self) {
        self.queries.fetch_add(1, Ordering::Relaxed);
    }

    /// The observation revealed by seeding `v` under `draw`.
    pub fn observe(&self, v: usize, draw: &LiveEdgeDraw) -> CascadeObservation {
        let g = &*self.graph;
        let mut seen = FixedBitSet::with_capacity(g.node_count());
        reach(g, draw, &[v], &mut seen, &mut VecDeque::new());
        let mut obs = CascadeObservation::default();
        for u in seen.ones() {
            obs.activated.push(u as u32);
            for e in g.out_edges(u) {
                if draw.is_live(e) {
                    obs.live.push(e as u32);
                } else {
                    obs.blocked.push(e as u32);
                }
            }
        }
        obs
    }

    fn draw_unconditioned(&self, rng: &mut Rng) -> LiveEdgeDraw {
        let mut live = FixedBitSet::with_capacity(self.probs.len());
        for (e, p) in self.probs.iter().enumerate() {
            if rng.gen::<f64>() < *p {
                live.insert(e);
            }
        }
        LiveEdgeDraw { live }
    }

    /// Edge statuses fixed by ψ, as (live, blocked) bitsets.
    fn revealed(&self, psi: &PartialRealization<CascadeObservation>) -> Result<(FixedBitSet, FixedBitSet)> {
        let m = self.probs.len();
        let mut live = FixedBitSet::with_capacity(m);
        let mut blocked = FixedBitSet::with_capacity(m);
        for (v, obs) in psi.iter() {
            for &e in &obs.live {
                let e = e as usize;
                if e >= m || blocked.contains(e) {
                    return Err(Error::InconsistentObservation(format!("edge {e} seen live after node {v}")));
                }
                live.insert(e);
            }
            for &e in &obs.blocked {
                let e = e as usize;
                if e >= m || live.contains(e) {
                    return Err(Error::InconsistentObservation(format!("edge {e} seen blocked after node {v}")));
                }
                blocked.insert(e);
            }
        }
        Ok((live, blocked))
    }

    /// A draw from p(· | ψ): revealed edges keep their status, the rest are
    /// drawn independently.
    pub fn sample_live_conditioned(
        &self,
        psi: &PartialRealization<CascadeObservation>,
        rng: &mut Rng,
    ) -> Result<LiveEdgeDraw> {
        let (live, blocked) = self.revealed(psi)?;
        let mut draw = self.draw_unconditioned(rng);
        draw.live.union_with(&live);
        draw.live.difference_with(&blocked);
        Ok(draw)
    }

    fn enumerate_support(&self) -> Option<Vec<(LiveEdgeDraw, S)>> {
        let m = self.probs.len();
        if m > MAX_ENUMERABLE_EDGES {
            return None;
        }
        Some(
            (0u32..1 << m)
                .map(|mask| {
                    let mut live = FixedBitSet::with_capacity(m);
                    let mut p = 1.0;
                    for (e, q) in self.probs.iter().enumerate() {
                        if mask >> e & 1 == 1 {
                            live.insert(e);
                            p *= q;
                        } else {
                            p *= 1.0 - q;
                        }
                    }
                    (LiveEdgeDraw { live }, S::of(p))
                })
                .collect(),
        )
    }
}

impl<S: Scalar> Task<S> for IcTask<S> {
    type Realization = LiveEdgeDraw;
    type State = CascadeObservation;

    fn ground_size(&self) -> usize {
        self.graph.node_count()
    }

    fn state_of(&self, item: ItemId, phi: &LiveEdgeDraw) -> CascadeObservation {
        self.touch();
        self.observe(item.index(), phi)
    }

    fn utility(&self, items: &[ItemId], phi: &LiveEdgeDraw) -> S {
        self.touch();
        let seeds: Vec<usize> = items.iter().map(|e| e.index()).collect();
        S::of_usize(spread(&self.graph, &seeds, phi))
    }

    /// Reach of each candidate outside the cascade of `base`.
    fn gains(&self, base: &[ItemId], candidates: &[ItemId], phi: &LiveEdgeDraw) -> Vec<S> {
        self.touch();
        let g = &*self.graph;
        let n = g.node_count();
        let mut covered = FixedBitSet::with_capacity(n);
        let mut queue = VecDeque::new();
        let seeds: Vec<usize> = base.iter().map(|e| e.index()).collect();
        reach(g, phi, &seeds, &mut covered, &mut queue);
        let mut scratch = covered.clone();
        candidates
            .iter()
            .map(|c| {
                if c.is_dummy(n) || covered.contains(c.index()) {
                    return S::zero();
                }
                scratch.clone_from(&covered);
                S::of_usize(reach(g, phi, &[c.index()], &mut scratch, &mut queue))
            })
            .collect()
    }

    fn support(&self) -> Option<&[(LiveEdgeDraw, S)]> {
        self.support.get_or_init(|| self.enumerate_support()).as_deref()
    }

    fn sample(&self, rng: &mut Rng) -> Result<LiveEdgeDraw> {
        self.touch();
        Ok(self.draw_unconditioned(rng))
    }

    fn sample_conditioned(&self, psi: &PartialRealization<CascadeObservation>, rng: &mut Rng) -> Result<LiveEdgeDraw> {
        self.touch();
        self.sample_live_conditioned(psi, rng)
    }

    fn is_consistent(&self, psi: &PartialRealization<CascadeObservation>, phi: &LiveEdgeDraw) -> bool {
        // The revealed statuses determine the rest of each observation.
        psi.iter().all(|(_, obs)| {
            obs.live.iter().all(|e| phi.is_live(*e as usize)) && obs.blocked.iter().all(|e| !phi.is_live(*e as usize))
        })
    }

    fn flags(&self) -> TaskFlags {
        TaskFlags::MONOTONE_SUBMODULAR
    }
}
