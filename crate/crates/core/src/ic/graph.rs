use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Directed graph in compressed sparse row form. Edges are sorted by
/// (source, target); an edge's index is its position in that order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
}

impl DiGraph {
    /// Drops self-loops and collapses parallel edges.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut edges: Vec<(u32, u32)> = edges.into_iter().filter(|(a, b)| a != b).collect();
        if let Some((a, b)) = edges.iter().find(|(a, b)| *a as usize >= n || *b as usize >= n) {
            return Err(Error::InvalidInstance(format!("edge ({a}, {b}) outside {n} nodes")));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut offsets = vec![0; n + 1];
        for (a, _) in &edges {
            offsets[*a as usize + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        Ok(DiGraph { n, edges, offsets })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Indices of the edges leaving `v`.
    pub fn out_edges(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn target(&self, edge: usize) -> usize {
        self.edges[edge].1 as usize
    }

    /// Parses whitespace-separated `source target` pairs. Blank lines and
    /// lines starting with `#` are skipped; an optional `nodes N` line fixes
    /// the node count, which otherwise is the largest id plus one.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut declared = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "nodes" {
                if fields.len() != 2 || declared.is_some() {
                    return Err(err(format!("bad header {line:?}")));
                }
                declared =
                    Some(fields[1].parse::<usize>().map_err(|_| err(format!("bad node count {:?}", fields[1])))?);
                continue;
            }
            if fields.len() != 2 {
                return Err(err(format!("expected two node ids, got {line:?}")));
            }
            let id = |s: &str| s.parse::<u32>().map_err(|_| err(format!("bad node id {s:?}")));
            edges.push((id(fields[0])?, id(fields[1])?));
        }
        let inferred = edges.iter().map(|(a, b)| *a.max(b) as usize + 1).max().unwrap_or(0);
        let n = match declared {
            Some(n) if n < inferred => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("node id {} exceeds declared count {n}", inferred - 1),
                })
            }
            Some(n) => n,
            None => inferred,
        };
        DiGraph::new(n, edges)
    }

    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("nodes {}\n", self.n);
        for (a, b) in &self.edges {
            writeln!(out, "{a} {b}").expect("writing to a string");
        }
        out
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_edge_list())?)
    }
}

/// Random graph families for desk-scale experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    /// `edges` distinct directed edges drawn uniformly.
    Gnm,
    /// Preferential attachment; each undirected link becomes two directed
    /// edges, so degrees are heavy-tailed like a collaboration network.
    Powerlaw,
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnm" => Ok(GraphKind::Gnm),
            "powerlaw" => Ok(GraphKind::Powerlaw),
            other => Err(Error::Config(format!("unknown graph kind {other:?} (expected gnm or powerlaw)"))),
        }
    }
}

pub fn gen_graph(kind: GraphKind, nodes: usize, edges: usize, seed: u64) -> Result<DiGraph> {
    let mut rng = rng::stream(seed, &[]);
    match kind {
        GraphKind::Gnm => {
            let max = nodes.saturating_mul(nodes.saturating_sub(1));
            if edges > max {
                return Err(Error::Config(format!("{edges} edges do not fit in {nodes} nodes")));
            }
            let mut set = std::collections::BTreeSet::new();
            while set.len() < edges {
                let a = rng.gen_range(0..nodes as u32);
                let b = rng.gen_range(0..nodes as u32);
                if a != b {
                    set.insert((a, b));
                }
            }
            DiGraph::new(nodes, set)
        }
        GraphKind::Powerlaw => {
            if nodes < 2 {
                return DiGraph::new(nodes, []);
            }
            let per_node = (edges / (2 * nodes)).max(1);
            let core = (per_node + 1).min(nodes);
            let mut links = Vec::new();
            // Endpoint multiset: sampling from it is degree-proportional.
            let mut ends: Vec<u32> = Vec::new();
            for a in 0..core as u32 {
                for b in a + 1..core as u32 {
                    links.push((a, b));
                    ends.extend([a, b]);
                }
            }
            for v in core as u32..nodes as u32 {
                let mut picked: Vec<u32> = Vec::with_capacity(per_node);
                while picked.len() < per_node.min(v as usize) {
                    let u = *ends.choose(&mut rng).expect("non-empty core");
                    if !picked.contains(&u) {
                        picked.push(u);
                    }
                }
                for u in picked {
                    links.push((u, v));
                    ends.extend([u, v]);
                }
            }
            DiGraph::new(nodes, links.into_iter().flat_map(|(a, b)| [(a, b), (b, a)]))
        }
    }
}
