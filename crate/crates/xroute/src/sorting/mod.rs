//! Expander sorting over hierarchy nodes and the primitives derived from it.

mod engine;
mod network;
mod primitives;
mod sort;
mod trace;

use thiserror::Error;

pub use engine::{Engine, EngineParams, EngineStats, Phase, RouteTable, Scope, ScopeData};
pub use network::ComparatorNetwork;

pub use trace::{ComparisonTrace, TraceEvent};

/// Sort key. `Top` is reserved for internal pads and sorts above everything.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Key {
    NegInf,
    Fin(i64, i64, i64),
    #[default]
    PosInf,
    Top,
}

impl Key {
    pub fn one(a: i64) -> Self {
        Key::Fin(a, 0, 0)
    }

    pub fn pair(a: i64, b: i64) -> Self {
        Key::Fin(a, b, 0)
    }

    pub fn triple(a: i64, b: i64, c: i64) -> Self {
        Key::Fin(a, b, c)
    }
}

/// Tags at or above this value belong to tokens the library creates.
pub const SYNTHETIC_TAG: i128 = 1 << 100;

/// A routable unit. `at` is the physical slot currently holding it.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Token {
    pub id: u64,
    pub key: Key,
    /// `u_z`, the tie-breaker; unique among tokens sorted together.
    pub tag: i128,
    /// `v_z`, carried by local propagation.
    pub value: i64,
    pub serial: u64,
    pub rank: u64,
    pub count: u64,
    /// 0-based destination marker into the best vertices of a node.
    pub dest_mark: usize,
    pub part_mark: usize,
    /// Destination identifier.
    pub dst: u64,
    pub dummy: bool,
    pub duplicate: bool,
    pub at: usize,
    pub payload: i64,
}

impl Token {
    pub fn new(id: u64, key: Key, at: usize) -> Self {
        Self { id, key, tag: id as i128, at, ..Default::default() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SortError {
    #[error("vertex {vertex} holds {load} tokens, limit {cap}")]
    Overload { vertex: u64, load: usize, cap: usize },
    #[error("scope {0:?} has not been prepared")]
    NoScope(Scope),
    #[error("token {token} at slot {slot} is outside the scope")]
    OutsideScope { token: u64, slot: usize },
    #[error("trace: {0}")]
    Trace(String),
    #[error("round cap {cap} exceeded ({used} rounds)")]
    RoundCap { cap: u64, used: u64 },
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Per-vertex token counts over all slots.
pub fn loads(tokens: &[Token], slots: usize) -> Vec<usize> {
    let mut l = vec![0; slots];
    for t in tokens {
        l[t.at] += 1;
    }
    l
}

pub fn max_load(tokens: &[Token], slots: usize) -> usize {
    loads(tokens, slots).into_iter().max().unwrap_or(0)
}
