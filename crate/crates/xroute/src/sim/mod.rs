//! Synchronous CONGEST engine with bandwidth enforcement and round accounting.
//!
//! A message sent in round `r` is in the receiver's inbox in round `r + 1`.
//! `rounds_used` counts up to the last round in which anything was sent.

mod programs;

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Embedding, Graph, PathSet};
use crate::numeric::ceil_log2;

pub use programs::{bfs_tree, broadcast_bit, route_along_paths, simulate_virtual_round, BfsTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("round {round}: {bits} bits on edge {from}->{to} exceeds bandwidth {limit}")]
    Bandwidth { round: u64, from: u64, to: u64, bits: u64, limit: u64 },
    #[error("round cap {cap} reached in phase {}", partial.phase)]
    Timeout { cap: u64, partial: RoundMetrics },
    #[error("round {round}: vertex {from} sent to non-neighbour {to}")]
    NotNeighbor { round: u64, from: u64, to: u64 },
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Metrics of a single engine run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundMetrics {
    pub phase: String,
    pub rounds_used: u64,
    pub messages_sent: u64,
    pub max_edge_load_observed: u64,
}

/// Accumulated cost of one labelled phase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhaseMetrics {
    pub label: String,
    /// Rounds executed by the engine.
    pub rounds: u64,
    /// Rounds charged by the virtual-graph cost model, not executed.
    pub modeled_rounds: u64,
    pub messages: u64,
    pub max_edge_load: u64,
    /// Equivalent rounds charged for centralized surrogates.
    pub oracle_rounds: u64,
    pub oracle_calls: u64,
    pub runs: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    phases: Vec<PhaseMetrics>,
    index: HashMap<String, usize>,
}

impl Metrics {
    fn entry(&mut self, label: &str) -> &mut PhaseMetrics {
        let i = match self.index.get(label) {
            Some(&i) => i,
            None => {
                self.phases.push(PhaseMetrics { label: label.to_string(), ..Default::default() });
                self.index.insert(label.to_string(), self.phases.len() - 1);
                self.phases.len() - 1
            }
        };
        &mut self.phases[i]
    }

    pub fn phases(&self) -> &[PhaseMetrics] {
        &self.phases
    }

    pub fn get(&self, label: &str) -> Option<&PhaseMetrics> {
        self.index.get(label).map(|&i| &self.phases[i])
    }

    pub fn total_rounds(&self) -> u64 {
        self.phases.iter().fold(0u64, |a, p| a.saturating_add(p.rounds))
    }

    pub fn total_modeled(&self) -> u64 {
        self.phases.iter().fold(0u64, |a, p| a.saturating_add(p.modeled_rounds))
    }

    pub fn total_oracle(&self) -> u64 {
        self.phases.iter().fold(0u64, |a, p| a.saturating_add(p.oracle_rounds))
    }

    /// Phases whose label starts with `prefix`, summed.
    pub fn sum_prefix(&self, prefix: &str) -> PhaseMetrics {
        let mut acc = PhaseMetrics { label: prefix.to_string(), ..Default::default() };
        for p in self.phases.iter().filter(|p| p.label.starts_with(prefix)) {
            acc.rounds = acc.rounds.saturating_add(p.rounds);
            acc.modeled_rounds = acc.modeled_rounds.saturating_add(p.modeled_rounds);
            acc.messages = acc.messages.saturating_add(p.messages);
            acc.max_edge_load = acc.max_edge_load.max(p.max_edge_load);
            acc.oracle_rounds = acc.oracle_rounds.saturating_add(p.oracle_rounds);
            acc.oracle_calls += p.oracle_calls;
            acc.runs += p.runs;
        }
        acc
    }

    /// One structured-text record per phase.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for p in &self.phases {
            writeln!(
                s,
                "phase={} runs={} rounds={} modeled_rounds={} messages={} max_edge_load={} oracle_rounds={} oracle_calls={}",
                p.label, p.runs, p.rounds, p.modeled_rounds, p.messages, p.max_edge_load, p.oracle_rounds, p.oracle_calls
            )
            .unwrap();
        }
        s
    }
}

pub trait VertexProgram {
    type State;
    type Msg: Clone;

    fn msg_bits(&self, msg: &Self::Msg) -> u64;

    /// One round at vertex `v`: read `inbox` (sender, message), push `(receiver, message)` to `out`.
    fn step(&self, v: usize, state: &mut Self::State, inbox: &[(usize, Self::Msg)], round: u64, out: &mut Vec<(usize, Self::Msg)>);

    fn halted(&self, v: usize, state: &Self::State) -> bool;
}

#[derive(Clone, Debug)]
pub struct Network {
    graph: Graph,
    id_space: u64,
    bandwidth_bits: u64,
    metrics: Metrics,
    trace_on: bool,
    trace_records: Vec<String>,
    elapsed: u64,
}

impl Network {
    /// `B = ⌈4·log₂(id_space)⌉`, with `id_space` at least the largest id.
    pub fn new(graph: Graph) -> Self {
        let id_space = graph.ids().iter().copied().max().unwrap_or(2).max(2);
        Self::with_bandwidth(graph, id_space, 4)
    }

    pub fn with_bandwidth(graph: Graph, id_space: u64, c: u64) -> Self {
        let trace_on = std::env::var("XROUTE_TRACE").map(|v| v == "1").unwrap_or(false);
        // ⌈c·log₂ N⌉ = ⌈log₂ N^c⌉, exact in integers
        let pow = (id_space as u128).saturating_pow(c as u32);
        let bandwidth_bits = if pow <= 1 { 1 } else { 128 - (pow - 1).leading_zeros() as u64 };
        Self { graph, id_space, bandwidth_bits, metrics: Metrics::default(), trace_on, trace_records: Vec::new(), elapsed: 0 }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn id_space(&self) -> u64 {
        self.id_space
    }

    pub fn bandwidth_bits(&self) -> u64 {
        self.bandwidth_bits
    }

    pub fn id_bits(&self) -> u64 {
        ceil_log2(self.id_space + 1) as u64
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn take_metrics(&mut self) -> Metrics {
        std::mem::take(&mut self.metrics)
    }

    pub fn elapsed_rounds(&self) -> u64 {
        self.elapsed
    }

    pub fn set_trace(&mut self, on: bool) {
        self.trace_on = on;
    }

    pub fn trace_records(&self) -> &[String] {
        &self.trace_records
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        std::mem::take(&mut self.trace_records)
    }

    fn trace(&mut self, line: String) {
        if self.trace_on {
            if std::env::var("XROUTE_TRACE").map(|v| v == "1").unwrap_or(false) {
                eprintln!("{line}");
            }
            self.trace_records.push(line);
        }
    }

    /// Charges rounds from the virtual cost model without executing them.
    pub fn charge_modeled(&mut self, label: &str, rounds: u64, messages: u64) {
        let e = self.metrics.entry(label);
        e.modeled_rounds = e.modeled_rounds.saturating_add(rounds);
        e.messages = e.messages.saturating_add(messages);
        e.runs += 1;
        let line = format!("phase={label} modeled_rounds={rounds} messages={messages}");
        self.trace(line);
    }

    /// Logs a centralized surrogate with its equivalent-round charge.
    pub fn charge_oracle(&mut self, label: &str, rounds: u64) {
        let e = self.metrics.entry(label);
        e.oracle_rounds = e.oracle_rounds.saturating_add(rounds);
        e.oracle_calls += 1;
        let line = format!("phase={label} oracle_rounds={rounds}");
        self.trace(line);
    }

    pub fn run<P: VertexProgram>(&mut self, label: &str, prog: &P, states: &mut [P::State], round_cap: u64) -> Result<RoundMetrics, SimError> {
        let slots = self.graph.slots();
        assert_eq!(states.len(), slots, "one state per slot");
        let members = self.graph.members().to_vec();
        let limit = self.bandwidth_bits;
        let mut inbox: Vec<Vec<(usize, P::Msg)>> = vec![Vec::new(); slots];
        let mut out = Vec::new();
        let mut metrics = RoundMetrics { phase: label.to_string(), ..Default::default() };
        let mut round = 0u64;
        let mut edge_bits: HashMap<(usize, usize), (u64, u64)> = HashMap::new();
        loop {
            let pending = inbox.iter().any(|b| !b.is_empty());
            if !pending && members.iter().all(|&v| prog.halted(v, &states[v])) {
                break;
            }
            round += 1;
            let mut next: Vec<Vec<(usize, P::Msg)>> = vec![Vec::new(); slots];
            edge_bits.clear();
            let mut sent = 0u64;
            for &v in &members {
                if inbox[v].is_empty() && prog.halted(v, &states[v]) {
                    continue;
                }
                out.clear();
                prog.step(v, &mut states[v], &inbox[v], round, &mut out);
                for (to, msg) in out.drain(..) {
                    if !self.graph.has_edge(v, to) {
                        return Err(SimError::NotNeighbor { round, from: self.graph.id(v), to: self.graph.id(to) });
                    }
                    let bits = prog.msg_bits(&msg);
                    let e = edge_bits.entry((v, to)).or_insert((0, 0));
                    e.0 += bits;
                    e.1 += 1;
                    if e.0 > limit {
                        return Err(SimError::Bandwidth { round, from: self.graph.id(v), to: self.graph.id(to), bits: e.0, limit });
                    }
                    next[to].push((v, msg));
                    sent += 1;
                }
            }
            if sent > 0 {
                if round > round_cap {
                    self.absorb(&metrics);
                    return Err(SimError::Timeout { cap: round_cap, partial: metrics });
                }
                metrics.rounds_used = round;
                metrics.messages_sent += sent;
                let load = edge_bits.values().map(|e| e.1).max().unwrap_or(0);
                metrics.max_edge_load_observed = metrics.max_edge_load_observed.max(load);
                if self.trace_on {
                    let max_bits = edge_bits.values().map(|e| e.0).max().unwrap_or(0);
                    let line = format!(
                        "round={round} phase={label} messages={sent} max_edge_load={load} max_edge_bits={max_bits} limit={limit}"
                    );
                    self.trace(line);
                }
            }
            inbox = next;
        }
        self.absorb(&metrics);
        Ok(metrics)
    }

    fn absorb(&mut self, m: &RoundMetrics) {
        self.elapsed += m.rounds_used;
        let e = self.metrics.entry(&m.phase);
        e.rounds += m.rounds_used;
        e.messages += m.messages_sent;
        e.max_edge_load = e.max_edge_load.max(m.max_edge_load_observed);
        e.runs += 1;
    }

    /// Store-and-forward schedule bound used by the cost model.
    pub fn modeled_path_rounds(ps: &PathSet) -> u64 {
        ps.congestion() * ps.dilation()
    }

    /// Modeled cost of one round over `emb`: `c·d` of its images.
    pub fn modeled_virtual_round(emb: &Embedding) -> u64 {
        emb.congestion() * emb.dilation()
    }
}
