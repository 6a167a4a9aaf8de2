//! Token routing: dispersal via shufflers, Task 3, Task 2, the leaf case and Task 1.

mod disperse;
mod general;
mod preprocess;
mod task1;
mod task2;
mod task3;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::decomposition::DecompError;
use crate::graph::GraphError;
use crate::shuffler::ShufflerError;
use crate::sorting::SortError;

pub use disperse::{DisperseReport, DummyDispersal, PortalPlan, Schedule, ShuffleStep};
pub use general::{GeneralOutcome, GeneralRouter};
pub use preprocess::{build_order_preserving_route, prepare, prepared_engine};
pub use task1::{Delegation, Task1Report};
pub use task3::Task3Report;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Shuffler(#[from] ShufflerError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("vertex {vertex} is the source of {load} tokens, limit {cap}")]
    SourceOverload { vertex: u64, load: usize, cap: usize },
    #[error("destination {dst} receives {count} tokens, limit {cap}")]
    DestinationOverload { dst: u64, count: usize, cap: usize },
    #[error("destination {0} is not a vertex")]
    UnknownDestination(u64),
    #[error("marker {marker} has {count} tokens, limit {cap}")]
    MarkerOverload { marker: usize, count: usize, cap: usize },
    #[error("part mark {part} has {count} tokens, limit {cap}")]
    PartOverload { part: usize, count: usize, cap: usize },
    #[error("node {node}: dummies fall short of real tokens even at multiplier {multiplier}")]
    DummyShortfall { node: usize, multiplier: usize },
    #[error("token {token} ended at {at}, expected {want}")]
    Undelivered { token: u64, at: u64, want: u64 },
    #[error("node {0} is not a good internal node")]
    NotInternal(usize),
    #[error("scope preparation: {0}")]
    Prepare(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Query-independent routing data kept on the engine.
#[derive(Clone, Debug, Default)]
pub struct RoutingState {
    pub(crate) schedules: HashMap<usize, Arc<Schedule>>,
    pub(crate) dummies: HashMap<(usize, usize), Arc<DummyDispersal>>,
    pub(crate) delegation: Option<Arc<Delegation>>,
    pub(crate) diameter: Option<u64>,
    pub(crate) reports: Vec<Task3Report>,
}

/// A routing instance: per-token (source id, destination id, key).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingInstance {
    pub task: String,
    pub l: usize,
    pub tokens: Vec<(u64, u64, i64)>,
}

impl RoutingInstance {
    pub fn parse(text: &str) -> Result<Self, RouteError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let head: Vec<&str> = lines.next().ok_or_else(|| RouteError::Parse("empty instance".into()))?.split_whitespace().collect();
        if head.len() != 3 {
            return Err(RouteError::Parse("header must be: task L n_tokens".into()));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| RouteError::Parse(format!("bad number {s:?}")));
        let l = num(head[1])? as usize;
        let n = num(head[2])? as usize;
        let mut tokens = Vec::with_capacity(n);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(RouteError::Parse(format!("token line {line:?}")));
            }
            let key = f[2].parse::<i64>().map_err(|_| RouteError::Parse(format!("bad key {:?}", f[2])))?;
            tokens.push((num(f[0])?, num(f[1])?, key));
        }
        if tokens.len() != n {
            return Err(RouteError::Parse(format!("header says {n} tokens, found {}", tokens.len())));
        }
        Ok(Self { task: head[0].to_string(), l, tokens })
    }

    pub fn render(&self) -> String {
        let mut s = format!("{} {} {}\n", self.task, self.l, self.tokens.len());
        for (a, b, k) in &self.tokens {
            writeln!(s, "{a} {b} {k}").unwrap();
        }
        s
    }

    /// The instance with each token's final vertex id appended.
    pub fn render_placement(&self, finals: &[u64]) -> String {
        let mut s = format!("{} {} {}\n", self.task, self.l, self.tokens.len());
        for ((a, b, k), f) in self.tokens.iter().zip(finals) {
            writeln!(s, "{a} {b} {k} {f}").unwrap();
        }
        s
    }
}
