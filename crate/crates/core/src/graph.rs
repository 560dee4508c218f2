//! Probabilistic and weighted deterministic graphs.
//!
//! A [`ProbabilisticGraph`] stores an existence probability on every
//! undirected edge. Thresholding it at `lambda` keeps the edges whose
//! probability is at least `lambda` and uses that probability as the edge
//! weight, producing a [`WeightedGraph`]. The GA searches one such subgraph
//! per entry of [`THRESHOLDS`].
//!
//! Nodes are addressed by dense index `0..n`; the [`NodeId`] each index
//! stands for is kept alongside so results can be mapped back to devices.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six thresholds used to derive the GA's subgraphs, ascending.
pub const THRESHOLDS: [f64; 6] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

/// Stable identifier of a streetlight node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    /// Locally administered MAC address this node is simulated with.
    pub fn mac(self) -> String {
        let b = self.0.to_be_bytes();
        format!("02:00:{:02x}:{:02x}:{:02x}:{:02x}", b[0], b[1], b[2], b[3])
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.trim().parse().map(NodeId)
    }
}

/// Bijective map between node ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeIndex {
    ids: Vec<NodeId>,
    lookup: HashMap<NodeId, usize>,
}

impl NodeIndex {
    /// Builds an index from ids in the given order. Duplicate ids are an error.
    pub fn new(ids: Vec<NodeId>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if lookup.insert(id, i).is_some() {
                return Err(Error::Mismatch(format!("duplicate node id {id}")));
            }
        }
        Ok(NodeIndex { ids, lookup })
    }

    /// Index over `0..n` with `NodeId(i)` at position `i`.
    pub fn dense(n: usize) -> Self {
        let ids: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
        let lookup = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        NodeIndex { ids, lookup }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> NodeId {
        self.ids[index]
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.lookup.get(&id).copied()
    }
}

/// Undirected graph whose edges carry existence probabilities in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticGraph {
    nodes: NodeIndex,
    edges: BTreeMap<(usize, usize), f64>,
}

impl ProbabilisticGraph {
    pub fn new(nodes: NodeIndex) -> Self {
        ProbabilisticGraph {
            nodes,
            edges: BTreeMap::new(),
        }
    }

    /// Graph over `n` nodes with ids `0..n` and no edges.
    pub fn with_nodes(n: usize) -> Self {
        Self::new(NodeIndex::dense(n))
    }

    /// Inserts or replaces the edge `{u, v}`.
    pub fn insert_edge(&mut self, u: usize, v: usize, p: f64) -> Result<()> {
        let n = self.nodes.len();
        if u >= n || v >= n {
            return Err(Error::Mismatch(format!(
                "edge ({u}, {v}) references a node outside 0..{n}"
            )));
        }
        if u == v {
            return Err(Error::Mismatch(format!("self-loop on node {u}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Mismatch(format!(
                "edge ({u}, {v}) probability {p} outside (0, 1]"
            )));
        }
        self.edges.insert((u.min(v), u.max(v)), p);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &NodeIndex {
        &self.nodes
    }

    pub fn probability(&self, u: usize, v: usize) -> Option<f64> {
        self.edges.get(&(u.min(v), u.max(v))).copied()
    }

    /// Edges as `(u, v, p)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &p)| (u, v, p))
    }

    /// Keeps the edges with `p >= lambda`, weighted by `p`.
    pub fn apply_threshold(&self, lambda: f64) -> WeightedGraph {
        let edges = self
            .edges
            .iter()
            .filter(|(_, &p)| p >= lambda)
            .map(|(&k, &p)| (k, p))
            .collect();
        WeightedGraph::from_parts(self.nodes.clone(), lambda, edges)
    }

    /// One thresholded subgraph per entry of [`THRESHOLDS`], ascending.
    pub fn threshold_family(&self) -> Vec<WeightedGraph> {
        THRESHOLDS.iter().map(|&l| self.apply_threshold(l)).collect()
    }

    /// Line-oriented edge list: `#nodes N`, `#ids ...`, then `u v p` rows.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("#nodes {}\n#ids", self.node_count());
        for id in self.nodes.ids() {
            let _ = write!(out, " {id}");
        }
        out.push('\n');
        for (u, v, p) in self.edges() {
            let _ = writeln!(out, "{} {} {:.6}", self.nodes.id(u), self.nodes.id(v), p);
        }
        out
    }

    /// Parses [`to_edge_list`](Self::to_edge_list) output. Without an `#ids`
    /// line the ids are taken to be `0..N`.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        const WHAT: &str = "edge list";
        let mut n: Option<usize> = None;
        let mut ids: Option<Vec<NodeId>> = None;
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#nodes") {
                let count = rest
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(WHAT, line_no, format!("bad node count: {e}")))?;
                n = Some(count);
            } else if let Some(rest) = line.strip_prefix("#ids") {
                let parsed = rest
                    .split_whitespace()
                    .map(NodeId::from_str)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::parse(WHAT, line_no, format!("bad node id: {e}")))?;
                ids = Some(parsed);
            } else if line.starts_with('#') {
                continue;
            } else {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(Error::parse(WHAT, line_no, "expected `u v p`"));
                }
                let u: NodeId = fields[0]
                    .parse()
                    .map_err(|e| Error::parse(WHAT, line_no, format!("bad node id: {e}")))?;
                let v: NodeId = fields[1]
                    .parse()
                    .map_err(|e| Error::parse(WHAT, line_no, format!("bad node id: {e}")))?;
                let p: f64 = fields[2]
                    .parse()
                    .map_err(|e| Error::parse(WHAT, line_no, format!("bad probability: {e}")))?;
                rows.push((line_no, u, v, p));
            }
        }
        let n = n.ok_or_else(|| Error::parse(WHAT, 1, "missing `#nodes N` header"))?;
        let index = match ids {
            Some(ids) if ids.len() == n => NodeIndex::new(ids)?,
            Some(ids) => {
                return Err(Error::parse(
                    WHAT,
                    2,
                    format!("#ids lists {} ids but #nodes is {n}", ids.len()),
                ))
            }
            None => NodeIndex::dense(n),
        };
        let mut g = ProbabilisticGraph::new(index);
        for (line_no, u, v, p) in rows {
            let (ui, vi) = match (g.nodes.index_of(u), g.nodes.index_of(v)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::parse(WHAT, line_no, "edge references unknown node")),
            };
            g.insert_edge(ui, vi, p)
                .map_err(|e| Error::parse(WHAT, line_no, e.to_string()))?;
        }
        Ok(g)
    }

    /// Graphviz rendering with probabilities as edge labels.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph probabilistic {\n");
        for id in self.nodes.ids() {
            let _ = writeln!(out, "  {id};");
        }
        for (u, v, p) in self.edges() {
            let _ = writeln!(
                out,
                "  {} -- {} [weight={p:.6}, label=\"{p:.2}\"];",
                self.nodes.id(u),
                self.nodes.id(v)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Deterministic subgraph of a [`ProbabilisticGraph`] with weights in `[lambda, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    nodes: NodeIndex,
    lambda: f64,
    edges: BTreeMap<(usize, usize), f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    fn from_parts(nodes: NodeIndex, lambda: f64, edges: BTreeMap<(usize, usize), f64>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (&(u, v), &w) in &edges {
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
        }
        WeightedGraph {
            nodes,
            lambda,
            edges,
            adjacency,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &NodeIndex {
        &self.nodes
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.edges.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    /// Neighbors of `u` with edge weights, sorted by neighbor index.
    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    /// Connected components as a label per node, numbered by first occurrence.
    pub fn component_labels(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut labels = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if labels[start] != usize::MAX {
                continue;
            }
            labels[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if labels[v] == usize::MAX {
                        labels[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        labels
    }
}
