//! Graphs, cuts, the expander split, path sets and embeddings.
//!
//! Vertices live in slots `0..slots()`. A graph may occupy only some of the
//! slots, so virtual graphs over a subset of a physical network share the
//! physical slot numbering and paths never need translating.

mod cut;
mod io;
mod paths;
mod split;

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

pub use cut::{
    graph_conductance_bruteforce, graph_sparsity_bruteforce, graph_sparsity_bruteforce_with_cap,
    measure_cut, CutReport, BRUTE_FORCE_CAP,
};
pub use io::{read_graph, read_remap, write_graph, write_remap};
pub use paths::{Embedding, PathSet};
pub use split::{expander_split, SplitMap};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(u64),
    #[error("parallel edge {0}-{1} in a simple graph")]
    ParallelEdge(u64, u64),
    #[error("slot {0} is not a vertex of the graph")]
    UnknownVertex(usize),
    #[error("duplicate vertex id {0}")]
    DuplicateId(u64),
    #[error("cut must be a nonempty proper subset of the vertices")]
    DegenerateCut,
    #[error("brute force refused: {n} vertices exceeds cap {cap}")]
    AboveCap { n: usize, cap: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("vertex {0} is isolated")]
    Isolated(u64),
    #[error("path {index} is not a walk in the host: {detail}")]
    BadPath { index: usize, detail: String },
    #[error("embedding mismatch: {0}")]
    Mismatch(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub mult: u32,
}

#[derive(Clone, Debug)]
pub struct Graph {
    ids: Vec<u64>,
    present: Vec<bool>,
    members: Vec<usize>,
    adj: Vec<Vec<usize>>,
    mult: Vec<Vec<u32>>,
    degree: Vec<u64>,
    multigraph: bool,
    by_id: HashMap<u64, usize>,
}

impl Graph {
    /// Simple graph with one vertex per id, slots in the given order.
    pub fn new(ids: Vec<u64>) -> Result<Self, GraphError> {
        Self::build(ids, None, false)
    }

    pub fn new_multigraph(ids: Vec<u64>) -> Result<Self, GraphError> {
        Self::build(ids, None, true)
    }

    /// Graph over the slot space of `ids` containing only `members`.
    pub fn on_subset(ids: Vec<u64>, members: &[usize], multigraph: bool) -> Result<Self, GraphError> {
        Self::build(ids, Some(members), multigraph)
    }

    /// Empty graph sharing the slot space and ids of `self`.
    pub fn empty_like(&self, members: &[usize], multigraph: bool) -> Self {
        Self::build(self.ids.clone(), Some(members), multigraph).expect("ids already validated")
    }

    fn build(ids: Vec<u64>, members: Option<&[usize]>, multigraph: bool) -> Result<Self, GraphError> {
        let n = ids.len();
        let mut by_id = HashMap::with_capacity(n);
        for (s, &id) in ids.iter().enumerate() {
            if by_id.insert(id, s).is_some() {
                return Err(GraphError::DuplicateId(id));
            }
        }
        let mut present = vec![members.is_none(); n];
        let members: Vec<usize> = match members {
            None => (0..n).collect(),
            Some(m) => {
                let mut m = m.to_vec();
                m.sort_unstable();
                m.dedup();
                for &s in &m {
                    if s >= n {
                        return Err(GraphError::UnknownVertex(s));
                    }
                    present[s] = true;
                }
                m
            }
        };
        Ok(Self {
            ids,
            present,
            members,
            adj: vec![Vec::new(); n],
            mult: vec![Vec::new(); n],
            degree: vec![0; n],
            multigraph,
            by_id,
        })
    }

    /// Path graph on ids `1..=n`.
    pub fn path(n: usize) -> Self {
        let mut g = Self::new((1..=n as u64).collect()).unwrap();
        for i in 1..n {
            g.add_edge(i - 1, i).unwrap();
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Self::path(n);
        if n > 2 {
            g.add_edge(n - 1, 0).unwrap();
        }
        g
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::new((1..=n as u64).collect()).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j).unwrap();
            }
        }
        g
    }

    /// Build a simple graph on ids `1..=n` from 0-based slot pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut g = Self::new((1..=n as u64).collect())?;
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<(), GraphError> {
        self.add_edge_mult(u, v, 1)
    }

    pub fn add_edge_mult(&mut self, u: usize, v: usize, m: u32) -> Result<(), GraphError> {
        if !self.contains(u) {
            return Err(GraphError::UnknownVertex(u));
        }
        if !self.contains(v) {
            return Err(GraphError::UnknownVertex(v));
        }
        if u == v {
            return Err(GraphError::SelfLoop(self.ids[u]));
        }
        if m == 0 {
            return Ok(());
        }
        let existing = self.multiplicity(u, v);
        if existing > 0 && !self.multigraph {
            return Err(GraphError::ParallelEdge(self.ids[u], self.ids[v]));
        }
        if !self.multigraph && m > 1 {
            return Err(GraphError::ParallelEdge(self.ids[u], self.ids[v]));
        }
        self.bump(u, v, m);
        self.bump(v, u, m);
        Ok(())
    }

    fn bump(&mut self, u: usize, v: usize, m: u32) {
        match self.adj[u].binary_search(&v) {
            Ok(i) => self.mult[u][i] += m,
            Err(i) => {
                self.adj[u].insert(i, v);
                self.mult[u].insert(i, m);
            }
        }
        self.degree[u] += m as u64;
    }

    pub fn is_multigraph(&self) -> bool {
        self.multigraph
    }

    pub fn slots(&self) -> usize {
        self.ids.len()
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, s: usize) -> bool {
        s < self.present.len() && self.present[s]
    }

    pub fn id(&self, s: usize) -> u64 {
        self.ids[s]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn slot_of(&self, id: u64) -> Option<usize> {
        self.by_id.get(&id).copied().filter(|&s| self.present[s])
    }

    /// Distinct neighbours in ascending slot order.
    pub fn neighbors(&self, s: usize) -> &[usize] {
        &self.adj[s]
    }

    /// Multiplicities aligned with [`Graph::neighbors`].
    pub fn multiplicities(&self, s: usize) -> &[u32] {
        &self.mult[s]
    }

    pub fn multiplicity(&self, u: usize, v: usize) -> u32 {
        match self.adj[u].binary_search(&v) {
            Ok(i) => self.mult[u][i],
            Err(_) => 0,
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.multiplicity(u, v) > 0
    }

    /// Degree counting parallel edges.
    pub fn degree(&self, s: usize) -> u64 {
        self.degree[s]
    }

    pub fn max_degree(&self) -> u64 {
        self.members.iter().map(|&s| self.degree[s]).max().unwrap_or(0)
    }

    /// Edges with `u < v`, each listed once with its multiplicity.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for &u in &self.members {
            for (&v, &m) in self.adj[u].iter().zip(&self.mult[u]) {
                if u < v {
                    out.push(Edge { u, v, mult: m });
                }
            }
        }
        out
    }

    /// Number of edges counting multiplicity.
    pub fn edge_count(&self) -> u64 {
        self.members.iter().map(|&s| self.degree[s]).sum::<u64>() / 2
    }

    /// Members sorted by identifier.
    pub fn by_id_order(&self, set: &[usize]) -> Vec<usize> {
        let mut v = set.to_vec();
        v.sort_by_key(|&s| self.ids[s]);
        v
    }

    pub fn bfs_distances(&self, src: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.slots()];
        if !self.contains(src) {
            return dist;
        }
        dist[src] = Some(0);
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            let d = dist[u].unwrap();
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    /// Shortest path from `src` to the nearest vertex accepted by `target`.
    pub fn shortest_path_to(&self, src: usize, target: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
        let mut parent = vec![usize::MAX; self.slots()];
        let mut seen = vec![false; self.slots()];
        seen[src] = true;
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            if target(u) {
                let mut path = vec![u];
                let mut x = u;
                while x != src {
                    x = parent[x];
                    path.push(x);
                }
                path.reverse();
                return Some(path);
            }
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    q.push_back(v);
                }
            }
        }
        None
    }

    pub fn shortest_path(&self, src: usize, dst: usize) -> Option<Vec<usize>> {
        self.shortest_path_to(src, |v| v == dst)
    }

    pub fn is_connected(&self) -> bool {
        match self.members.first() {
            None => true,
            Some(&s) => {
                let d = self.bfs_distances(s);
                self.members.iter().all(|&v| d[v].is_some())
            }
        }
    }

    /// Eccentricity maximum; `None` when disconnected.
    pub fn diameter(&self) -> Option<u32> {
        let mut best = 0;
        for &s in &self.members {
            let d = self.bfs_distances(s);
            for &v in &self.members {
                best = best.max(d[v]?);
            }
        }
        Some(best)
    }

    /// Induced subgraph on `set`, sharing the slot space.
    pub fn induced(&self, set: &[usize]) -> Self {
        let mut g = self.empty_like(set, self.multigraph);
        for &u in g.members.clone().iter() {
            for (&v, &m) in self.adj[u].iter().zip(&self.mult[u]) {
                if u < v && g.contains(v) {
                    g.bump(u, v, m);
                    g.bump(v, u, m);
                }
            }
        }
        g
    }

    /// Copy of `self` with its vertices given new identifiers.
    pub fn with_ids(&self, ids: Vec<u64>) -> Result<Self, GraphError> {
        assert_eq!(ids.len(), self.slots());
        let mut g = Self::build(ids, Some(&self.members), self.multigraph)?;
        g.adj = self.adj.clone();
        g.mult = self.mult.clone();
        g.degree = self.degree.clone();
        Ok(g)
    }

    /// Contract `parts` into single vertices; parallel edges kept as multiplicity.
    pub fn contract(&self, parts: &[Vec<usize>]) -> Result<Self, GraphError> {
        let mut part_of = vec![usize::MAX; self.slots()];
        for (i, p) in parts.iter().enumerate() {
            for &v in p {
                part_of[v] = i;
            }
        }
        let mut y = Self::new_multigraph((1..=parts.len() as u64).collect())?;
        for e in self.edges() {
            let (a, b) = (part_of[e.u], part_of[e.v]);
            if a != usize::MAX && b != usize::MAX && a != b {
                y.add_edge_mult(a, b, e.mult)?;
            }
        }
        Ok(y)
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
            && self.members == other.members
            && self.adj == other.adj
            && self.mult == other.mult
            && self.multigraph == other.multigraph
    }
}

impl Eq for Graph {}
