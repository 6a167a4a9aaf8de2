//! Hierarchical decomposition: parts, virtual expanders, bad sets, best sets.

mod build;
mod embedder;
mod serialize;
mod validate;

use num_rational::BigRational;
use thiserror::Error;

use crate::graph::{Embedding, Graph, GraphError};

pub use build::{build_hierarchy, root_matching, BuildParams};
pub use embedder::{capacity_for, embed_matching, loop_erase, CutCertificate, HopPolicy, MatchResult, MatchingOutcome};
pub use serialize::{read_hierarchy, write_hierarchy};
pub use validate::{labels, validate_hierarchy, ValidationReport, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error("graph is not a psi-expander: cut of {} vertices has sparsity {}", .0.cut.len(), .0.report.sparsity)]
    SparseCut(Box<CutCertificate>),
    #[error("node {node}: only {good} of {needed} required parts embedded")]
    TooFewParts { node: usize, good: usize, needed: usize },
    #[error("node {node}: merge step found a sparse cut of sparsity {}", .cert.report.sparsity)]
    MergeCut { node: usize, cert: Box<CutCertificate> },
    #[error("root matching failed: {}", .0.report.sparsity)]
    RootMatching(Box<CutCertificate>),
    #[error("core G[W] is disconnected")]
    DisconnectedCore,
    #[error("holdout leaves |W| = {w} below 2/3 of {n}")]
    HoldoutTooLarge { w: usize, n: usize },
    #[error("node {0} is bad; operation needs a good node")]
    BadNode(usize),
    #[error("node {0} is a leaf")]
    LeafNode(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    GoodInternal,
    GoodTerminal,
    Bad,
}

impl NodeKind {
    pub fn label(self) -> &'static str {
        match self {
            NodeKind::GoodInternal => "good-internal",
            NodeKind::GoodTerminal => "good-terminal",
            NodeKind::Bad => "bad",
        }
    }

    pub fn is_good(self) -> bool {
        self != NodeKind::Bad
    }
}

/// How a good node's virtual graph was certified to expand.
#[derive(Clone, Debug, PartialEq)]
pub enum Certification {
    /// `H_W = G[W]`, expanding by the caller's precondition.
    Root,
    /// Exact sparsity by exhaustive enumeration.
    Exact(BigRational),
    /// Spectral estimate `d_min · gap / 2`, not a proof.
    Estimated(f64),
    /// Single vertex, nothing to certify.
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Part {
    /// Node index of the good child `X_i`.
    pub good: usize,
    /// Node index of the bad sibling `X'_i`.
    pub bad: usize,
    /// `M*_i` as (vertex of `X'_i`, vertex of `X_i`).
    pub matching: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierNode {
    pub id: usize,
    pub kind: NodeKind,
    pub level: u32,
    pub parent: Option<usize>,
    /// Vertex slots in identifier order.
    pub vertices: Vec<usize>,
    pub parts: Vec<Part>,
    /// `H_X` over physical slots; `None` for bad nodes.
    pub virtual_graph: Option<Graph>,
    /// `f_X`: `H_X` into `H_{p(X)}`, identity for the root.
    pub embedding: Option<Embedding>,
    /// `f_{M_X}`: every `M*_i` embedded into `H_X`.
    pub matching_embedding: Option<Embedding>,
    /// `f⁰_X`, the composed embedding into the physical graph.
    pub flat: Option<Embedding>,
    /// `f_{M_X}` composed down to the physical graph.
    pub flat_matching: Option<Embedding>,
    /// `X_best` in identifier order.
    pub best: Vec<usize>,
    /// `|X_best ∩ X*_i|` per part.
    pub part_best_counts: Vec<usize>,
    pub certification: Option<Certification>,
}

impl HierNode {
    pub fn is_good(&self) -> bool {
        self.kind.is_good()
    }

    pub fn t(&self) -> usize {
        self.parts.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    pub nodes: Vec<HierNode>,
    pub root: usize,
    pub k: u64,
    pub eps: (u64, u64),
    pub psi: BigRational,
    pub rho_best: BigRational,
    pub leaf_threshold: usize,
    pub level_cap: u32,
    /// Core vertex set `W` in identifier order.
    pub w: Vec<usize>,
    /// `M_root`: (vertex of `V∖W`, vertex of `W`).
    pub root_matching: Vec<(usize, usize)>,
    pub root_matching_embedding: Embedding,
    /// Number of vertices of the physical graph.
    pub n: usize,
    /// Centralized surrogate work logged during the build, as (label, rounds).
    pub oracle_charges: Vec<(String, u64)>,
}

impl Hierarchy {
    pub fn node(&self, i: usize) -> &HierNode {
        &self.nodes[i]
    }

    pub fn root_node(&self) -> &HierNode {
        &self.nodes[self.root]
    }

    pub fn depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// `X*_i = X_i ∪ X'_i` for each part, in identifier order.
    pub fn part_sets(&self, x: usize) -> Vec<Vec<usize>> {
        self.nodes[x]
            .parts
            .iter()
            .map(|p| {
                let mut s = self.nodes[p.good].vertices.clone();
                s.extend_from_slice(&self.nodes[p.bad].vertices);
                s
            })
            .collect()
    }

    /// Part index of each vertex of `x`, `usize::MAX` elsewhere.
    pub fn part_of(&self, x: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.nodes[x].virtual_graph.as_ref().map(|g| g.slots()).unwrap_or(self.n)];
        for (i, s) in self.part_sets(x).iter().enumerate() {
            for &v in s {
                out[v] = i;
            }
        }
        out
    }

    pub fn flatten(&self, x: usize) -> Result<&Embedding, DecompError> {
        self.nodes[x].flat.as_ref().ok_or(DecompError::BadNode(x))
    }

    /// Cluster graph `Y`: `H_X` with every part contracted.
    pub fn cluster_graph(&self, x: usize) -> Result<Graph, DecompError> {
        let node = &self.nodes[x];
        if node.kind == NodeKind::Bad {
            return Err(DecompError::BadNode(x));
        }
        if node.kind == NodeKind::GoodTerminal {
            return Err(DecompError::LeafNode(x));
        }
        let h = node.virtual_graph.as_ref().unwrap();
        Ok(h.contract(&self.part_sets(x))?)
    }

    /// Good nodes in breadth-first order from the root.
    pub fn good_nodes(&self) -> Vec<usize> {
        let mut out = vec![self.root];
        let mut i = 0;
        while i < out.len() {
            let x = out[i];
            for p in &self.nodes[x].parts {
                out.push(p.good);
            }
            i += 1;
        }
        out
    }

    /// Leaf-size and ratio summary for logs.
    pub fn summary(&self) -> String {
        let good = self.nodes.iter().filter(|n| n.is_good()).count();
        let leaves = self.nodes.iter().filter(|n| n.kind == NodeKind::GoodTerminal).count();
        format!(
            "n={} k={} depth={} good_nodes={} leaves={} |W|={} rho_best={} theta={}",
            self.n,
            self.k,
            self.depth(),
            good,
            leaves,
            self.w.len(),
            self.rho_best,
            self.leaf_threshold
        )
    }
}
