use std::collections::HashMap;

use super::{Graph, GraphError};

/// Host paths as vertex sequences.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathSet {
    pub paths: Vec<Vec<usize>>,
}

fn key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl PathSet {
    pub fn new(paths: Vec<Vec<usize>>) -> Self {
        Self { paths }
    }

    /// Traversals per undirected host edge.
    pub fn edge_loads(&self) -> HashMap<(usize, usize), u64> {
        let mut loads = HashMap::new();
        for p in &self.paths {
            for w in p.windows(2) {
                *loads.entry(key(w[0], w[1])).or_insert(0) += 1;
            }
        }
        loads
    }

    /// Maximum number of path traversals over a single edge.
    pub fn congestion(&self) -> u64 {
        self.edge_loads().values().copied().max().unwrap_or(0)
    }

    /// Maximum path length in edges.
    pub fn dilation(&self) -> u64 {
        self.paths.iter().map(|p| p.len().saturating_sub(1) as u64).max().unwrap_or(0)
    }

    pub fn quality(&self) -> u64 {
        self.congestion() + self.dilation()
    }

    pub fn union(&self, other: &PathSet) -> PathSet {
        let mut paths = self.paths.clone();
        paths.extend(other.paths.iter().cloned());
        PathSet { paths }
    }

    pub fn validate(&self, host: &Graph) -> Result<(), GraphError> {
        for (index, p) in self.paths.iter().enumerate() {
            if p.is_empty() {
                return Err(GraphError::BadPath { index, detail: "empty path".into() });
            }
            for &v in p {
                if !host.contains(v) {
                    return Err(GraphError::BadPath { index, detail: format!("slot {v} not in host") });
                }
            }
            for w in p.windows(2) {
                if !host.has_edge(w[0], w[1]) {
                    return Err(GraphError::BadPath {
                        index,
                        detail: format!("{}-{} is not an edge", host.id(w[0]), host.id(w[1])),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Virtual edges mapped to host paths.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Embedding {
    pub virtual_edges: Vec<(usize, usize)>,
    pub paths: Vec<Vec<usize>>,
    lookup: HashMap<(usize, usize), usize>,
}

impl Embedding {
    pub fn new(virtual_edges: Vec<(usize, usize)>, paths: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        if virtual_edges.len() != paths.len() {
            return Err(GraphError::Mismatch(format!(
                "{} edges but {} paths",
                virtual_edges.len(),
                paths.len()
            )));
        }
        let mut lookup = HashMap::new();
        for (i, (&(u, v), p)) in virtual_edges.iter().zip(&paths).enumerate() {
            if p.first() != Some(&u) || p.last() != Some(&v) {
                return Err(GraphError::BadPath { index: i, detail: format!("path does not join {u} and {v}") });
            }
            lookup.entry(key(u, v)).or_insert(i);
        }
        Ok(Self { virtual_edges, paths, lookup })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// `f(e) = e` for every edge of `g`, one entry per parallel copy.
    pub fn identity(g: &Graph) -> Self {
        let mut edges = Vec::new();
        let mut paths = Vec::new();
        for e in g.edges() {
            for _ in 0..e.mult {
                edges.push((e.u, e.v));
                paths.push(vec![e.u, e.v]);
            }
        }
        Self::new(edges, paths).unwrap()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn path_set(&self) -> PathSet {
        PathSet { paths: self.paths.clone() }
    }

    pub fn congestion(&self) -> u64 {
        self.path_set().congestion()
    }

    pub fn dilation(&self) -> u64 {
        self.paths.iter().map(|p| p.len().saturating_sub(1) as u64).max().unwrap_or(0)
    }

    pub fn quality(&self) -> u64 {
        self.path_set().quality()
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        self.lookup.contains_key(&key(u, v))
    }

    /// Image of the virtual edge, oriented from `u` to `v`.
    pub fn path_between(&self, u: usize, v: usize) -> Option<Vec<usize>> {
        let &i = self.lookup.get(&key(u, v))?;
        let p = &self.paths[i];
        if p[0] == u {
            Some(p.clone())
        } else {
            Some(p.iter().rev().copied().collect())
        }
    }

    /// Checks every path is a walk in `host` and every virtual edge is in `virt`.
    pub fn validate(&self, host: &Graph, virt: Option<&Graph>) -> Result<(), GraphError> {
        self.path_set().validate(host)?;
        if let Some(h) = virt {
            for (i, &(u, v)) in self.virtual_edges.iter().enumerate() {
                if !h.has_edge(u, v) {
                    return Err(GraphError::Mismatch(format!("virtual edge {i} ({u},{v}) not in virtual graph")));
                }
            }
        }
        Ok(())
    }

    /// `outer ∘ inner`: each inner path is expanded edge by edge through `outer`.
    pub fn compose(outer: &Embedding, inner: &Embedding) -> Result<Embedding, GraphError> {
        let mut paths = Vec::with_capacity(inner.paths.len());
        for p in &inner.paths {
            let mut out = vec![p[0]];
            for w in p.windows(2) {
                let seg = outer.path_between(w[0], w[1]).ok_or_else(|| {
                    GraphError::Mismatch(format!("inner step ({},{}) is not an outer virtual edge", w[0], w[1]))
                })?;
                out.extend_from_slice(&seg[1..]);
            }
            paths.push(out);
        }
        Embedding::new(inner.virtual_edges.clone(), paths)
    }

    pub fn union(&self, other: &Embedding) -> Embedding {
        let mut edges = self.virtual_edges.clone();
        edges.extend(other.virtual_edges.iter().copied());
        let mut paths = self.paths.clone();
        paths.extend(other.paths.iter().cloned());
        Embedding::new(edges, paths).unwrap()
    }

    /// Entries whose virtual edge satisfies `keep`.
    pub fn restrict(&self, keep: impl Fn(usize, usize) -> bool) -> Embedding {
        let mut edges = Vec::new();
        let mut paths = Vec::new();
        for (e, p) in self.virtual_edges.iter().zip(&self.paths) {
            if keep(e.0, e.1) {
                edges.push(*e);
                paths.push(p.clone());
            }
        }
        Embedding::new(edges, paths).unwrap()
    }
}
