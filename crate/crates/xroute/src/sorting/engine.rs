use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::{ComparatorNetwork, SortError, SYNTHETIC_TAG};
use crate::decomposition::{Hierarchy, NodeKind};
use crate::graph::{Graph, PathSet};
use crate::shuffler::Shuffler;
use crate::sim::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Preprocess,
    Query,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Preprocess => "preprocess",
            Phase::Query => "query",
        }
    }
}

/// Vertex set a sort runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    /// A good node `X` on its own.
    Node(usize),
    /// Part `X*_i = X_i ∪ X'_i` of node `x`.
    Part(usize, usize),
    /// All of `V`: the root plus `V∖W`.
    Whole,
}

/// Order-preserving all-to-best route of a scope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteTable {
    /// Best-vertex index for every vertex rank; monotone.
    pub target: Vec<usize>,
    /// Cost of moving one token per vertex along the route.
    pub rounds: u64,
    pub messages: u64,
    /// Explicit paths in `H_host` when the route was computed from the gathered topology.
    pub paths: Option<Vec<Vec<usize>>>,
}

impl RouteTable {
    /// Targets are monotone and no best vertex receives more than `rho` vertices.
    pub fn is_order_preserving(&self, rho: usize, best: usize) -> bool {
        let mut load = vec![0usize; best];
        for &b in &self.target {
            if b >= best {
                return false;
            }
            load[b] += 1;
        }
        self.target.windows(2).all(|w| w[0] <= w[1]) && load.iter().all(|&c| c <= rho)
    }
}

/// Everything a sort over one scope needs, fixed at preprocessing.
#[derive(Clone, Debug, PartialEq)]
pub struct ScopeData {
    pub scope: Scope,
    /// Good node whose virtual graph hosts the sort.
    pub host: usize,
    /// `X*` in identifier order.
    pub vertices: Vec<usize>,
    /// Rank of every slot in `vertices`, `u32::MAX` outside.
    pub rank: Vec<u32>,
    /// (outside vertex, its matched vertex in the host).
    pub attach: Vec<(usize, usize)>,
    pub attach_rounds: u64,
    pub attach_messages: u64,
    /// Best vertices of the host in identifier order.
    pub best: Vec<usize>,
    /// `⌈|X*| / |X_best|⌉`.
    pub rho: usize,
    pub network: ComparatorNetwork,
    /// Cost of step 2 per token of block size.
    pub network_rounds: u64,
    pub network_messages: u64,
    pub route: Option<RouteTable>,
}

impl ScopeData {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.rank.get(slot).is_some_and(|&r| r != u32::MAX)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineParams {
    /// Modeled-round budget per query, checked between phases.
    pub round_cap: Option<u64>,
    /// Largest dummy multiplier tried by Task 3 before giving up.
    pub max_dummy_multiplier: usize,
    /// Keep every Task 3 report for inspection.
    pub keep_reports: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self { round_cap: None, max_dummy_multiplier: 64, keep_reports: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub sorts: u64,
    pub reverts: u64,
    /// Task 3 merges redone with a doubled dummy multiplier.
    pub dummy_retries: u64,
    pub task3_calls: u64,
    pub leaf_calls: u64,
}

/// Preprocessed hierarchy, shufflers and sorting geometry, plus the cost ledger.
#[derive(Clone, Debug)]
pub struct Engine {
    pub graph: Graph,
    pub hierarchy: Hierarchy,
    pub shufflers: BTreeMap<usize, Shuffler>,
    pub params: EngineParams,
    pub net: Network,
    pub stats: EngineStats,
    phase: Phase,
    ctx: Vec<&'static str>,
    /// Open cost frames; the flag is false for frames whose charges are discarded.
    stack: Vec<(BTreeMap<String, (u64, u64)>, bool)>,
    scopes: HashMap<Scope, Arc<ScopeData>>,
    query_rounds: u64,
    next_tag: i128,
    /// `(c·d, d)` of `f⁰_x` per node.
    virtual_cost: Vec<(u64, u64)>,
    pub(crate) routing: crate::routing::RoutingState,
}

impl Engine {
    /// Wraps prebuilt structures; logs their build charges as preprocessing.
    /// Scopes are prepared separately (see `routing::preprocess`).
    pub fn new(graph: Graph, hierarchy: Hierarchy, shufflers: BTreeMap<usize, Shuffler>, params: EngineParams) -> Self {
        let mut net = Network::new(graph.clone());
        for (label, rounds) in &hierarchy.oracle_charges {
            net.charge_oracle(label, *rounds);
        }
        for s in shufflers.values() {
            for (label, rounds) in &s.charges {
                net.charge_oracle(label, *rounds);
            }
        }
        let virtual_cost = hierarchy
            .nodes
            .iter()
            .map(|n| n.flat.as_ref().map(|f| (f.congestion() * f.dilation(), f.dilation())).unwrap_or((1, 1)))
            .map(|(r, d)| (r.max(1), d.max(1)))
            .collect();
        Self {
            virtual_cost,
            graph,
            hierarchy,
            shufflers,
            params,
            net,
            stats: EngineStats::default(),
            phase: Phase::Preprocess,
            ctx: Vec::new(),
            stack: Vec::new(),
            scopes: HashMap::new(),
            query_rounds: 0,
            next_tag: SYNTHETIC_TAG,
            routing: Default::default(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, p: Phase) {
        self.phase = p;
    }

    /// Starts a query: resets the per-query round counter.
    pub fn begin_query(&mut self) {
        self.phase = Phase::Query;
        self.query_rounds = 0;
    }

    pub fn query_rounds(&self) -> u64 {
        self.query_rounds
    }

    pub fn check_cap(&self) -> Result<(), SortError> {
        match self.params.round_cap {
            Some(cap) if self.phase == Phase::Query => {
                // charges still held by open frames count too
                let pending = self.stack.iter().filter(|f| f.1).flat_map(|f| f.0.values()).fold(0u64, |a, v| a.saturating_add(v.0));
                let used = self.query_rounds.saturating_add(pending);
                if used > cap {
                    Err(SortError::RoundCap { cap, used })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn fresh_tag(&mut self) -> i128 {
        self.next_tag += 1;
        self.next_tag
    }

    pub fn slots(&self) -> usize {
        self.graph.slots()
    }

    fn label(&self, op: &str) -> String {
        match self.ctx.last() {
            Some(c) => format!("{}:{}:{}", self.phase.label(), c, op),
            None => format!("{}:{}", self.phase.label(), op),
        }
    }

    /// Runs `f` with `c` as the label context.
    pub fn with_ctx<T>(&mut self, c: &'static str, f: impl FnOnce(&mut Self) -> T) -> T {
        self.ctx.push(c);
        let out = f(self);
        self.ctx.pop();
        out
    }

    pub fn charge(&mut self, op: &str, rounds: u64, messages: u64) {
        if rounds == 0 && messages == 0 {
            return;
        }
        let label = self.label(op);
        self.charge_label(label, rounds, messages);
    }

    fn charge_label(&mut self, label: String, rounds: u64, messages: u64) {
        match self.stack.last_mut().map(|f| &mut f.0) {
            Some(m) => {
                let e = m.entry(label).or_default();
                e.0 = e.0.saturating_add(rounds);
                e.1 = e.1.saturating_add(messages);
            }
            None => {
                self.net.charge_modeled(&label, rounds, messages);
                if self.phase == Phase::Query {
                    self.query_rounds = self.query_rounds.saturating_add(rounds);
                }
            }
        }
    }

    /// Runs `f`, recharging everything it charged; returns the summed cost.
    pub fn measure<T>(&mut self, f: impl FnOnce(&mut Self) -> T) -> (T, u64, u64) {
        self.stack.push((BTreeMap::new(), true));
        let out = f(self);
        let m = self.stack.pop().unwrap().0;
        let (mut r, mut msgs) = (0, 0);
        for (k, (a, b)) in m {
            r += a;
            msgs += b;
            self.charge_label(k, a, b);
        }
        (out, r, msgs)
    }

    /// Runs `f` and discards its charges, returning their sum.
    pub fn measure_silent<T>(&mut self, f: impl FnOnce(&mut Self) -> T) -> (T, u64, u64) {
        self.stack.push((BTreeMap::new(), false));
        let out = f(self);
        let m = self.stack.pop().unwrap().0;
        let (r, msgs) = m.values().fold((0, 0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
        (out, r, msgs)
    }

    pub fn charge_oracle(&mut self, op: &str, rounds: u64) {
        let label = self.label(op);
        self.net.charge_oracle(&label, rounds);
    }

    /// Runs `n` independent branches over disjoint regions. Rounds of a label
    /// are the maximum over branches, messages add up.
    pub fn parallel<T, E>(&mut self, n: usize, mut f: impl FnMut(&mut Self, usize) -> Result<T, E>) -> Result<Vec<T>, E> {
        let mut merged: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            self.stack.push((BTreeMap::new(), true));
            let r = f(self, i);
            let m = self.stack.pop().unwrap().0;
            for (k, (rounds, msgs)) in m {
                let e = merged.entry(k).or_default();
                e.0 = e.0.max(rounds);
                e.1 += msgs;
            }
            match r {
                Ok(v) => out.push(v),
                Err(e) => {
                    for (k, (rounds, msgs)) in merged {
                        self.charge_label(k, rounds, msgs);
                    }
                    return Err(e);
                }
            }
        }
        for (k, (rounds, msgs)) in merged {
            self.charge_label(k, rounds, msgs);
        }
        Ok(out)
    }

    /// Physical rounds per virtual round of `H_x`: `c·d` of `f⁰_x`.
    pub fn virtual_round(&self, x: usize) -> u64 {
        self.virtual_cost[x].0
    }

    /// Physical edges per virtual edge of `H_x`.
    pub fn virtual_hop(&self, x: usize) -> u64 {
        self.virtual_cost[x].1
    }

    /// Modeled cost of moving one token along each path of `ps` in `H_x`
    /// (`None` for the physical graph).
    pub fn batch_cost(&self, host: Option<usize>, ps: &PathSet) -> (u64, u64) {
        let (r0, hop) = host.map(|x| (self.virtual_round(x), self.virtual_hop(x))).unwrap_or((1, 1));
        let len: u64 = ps.paths.iter().map(|p| p.len().saturating_sub(1) as u64).sum();
        (ps.congestion().saturating_mul(ps.dilation()).saturating_mul(r0), len.saturating_mul(hop))
    }

    /// Like `batch_cost` with `counts[i]` tokens on path `i`.
    pub fn weighted_batch_cost(&self, host: Option<usize>, paths: &[&[usize]], counts: &[u64]) -> (u64, u64) {
        let (r0, hop) = host.map(|x| (self.virtual_round(x), self.virtual_hop(x))).unwrap_or((1, 1));
        let mut load: HashMap<(usize, usize), u64> = HashMap::new();
        let mut dil = 0u64;
        let mut msgs = 0u64;
        for (p, &c) in paths.iter().zip(counts) {
            if c == 0 || p.len() < 2 {
                continue;
            }
            dil = dil.max(p.len() as u64 - 1);
            msgs += c * (p.len() as u64 - 1);
            for w in p.windows(2) {
                *load.entry((w[0].min(w[1]), w[0].max(w[1]))).or_default() += c;
            }
        }
        let cong = load.values().copied().max().unwrap_or(0);
        (cong.saturating_mul(dil).saturating_mul(r0), msgs.saturating_mul(hop))
    }

    pub fn has_scope(&self, s: Scope) -> bool {
        self.scopes.contains_key(&s)
    }

    pub fn scope(&self, s: Scope) -> Result<Arc<ScopeData>, SortError> {
        self.scopes.get(&s).cloned().ok_or(SortError::NoScope(s))
    }

    pub fn scopes(&self) -> impl Iterator<Item = (&Scope, &Arc<ScopeData>)> {
        self.scopes.iter()
    }

    pub fn install_scope(&mut self, d: ScopeData) -> Result<(), SortError> {
        match &d.route {
            Some(r) if r.target.len() == d.vertices.len() && r.is_order_preserving(d.rho, d.best.len()) => {}
            _ => return Err(SortError::Contract(format!("scope {:?}: missing or non-monotone route", d.scope))),
        }
        self.scopes.insert(d.scope, Arc::new(d));
        Ok(())
    }

    /// Vertex set, attachment, best vertices and comparator network of a
    /// scope. The route is filled in here only for leaf hosts.
    pub fn scope_geometry(&mut self, scope: Scope) -> Result<ScopeData, SortError> {
        let h = &self.hierarchy;
        let (host, mut vertices, attach, attach_paths, attach_host) = match scope {
            Scope::Whole => {
                let paths: Vec<Vec<usize>> = h
                    .root_matching
                    .iter()
                    .map(|&(a, b)| h.root_matching_embedding.path_between(a, b).unwrap_or_else(|| vec![a, b]))
                    .collect();
                (h.root, self.graph.members().to_vec(), h.root_matching.clone(), paths, None)
            }
            Scope::Part(x, i) => {
                let node = &h.nodes[x];
                let p = node.parts.get(i).ok_or_else(|| SortError::Contract(format!("node {x} has no part {i}")))?;
                let mut vs = h.nodes[p.good].vertices.clone();
                vs.extend_from_slice(&h.nodes[p.bad].vertices);
                let memb = node.matching_embedding.as_ref();
                let paths = p
                    .matching
                    .iter()
                    .map(|&(a, b)| memb.and_then(|m| m.path_between(a, b)).unwrap_or_else(|| vec![a, b]))
                    .collect();
                (p.good, vs, p.matching.clone(), paths, Some(x))
            }
            Scope::Node(x) => (x, h.nodes[x].vertices.clone(), Vec::new(), Vec::new(), None),
        };
        let hn = &h.nodes[host];
        if !hn.is_good() {
            return Err(SortError::Contract(format!("host {host} is not good")));
        }
        vertices = self.graph.by_id_order(&vertices);
        let best = hn.best.clone();
        if best.is_empty() {
            return Err(SortError::Contract(format!("host {host} has no best vertices")));
        }
        let mut rank = vec![u32::MAX; self.graph.slots()];
        for (r, &v) in vertices.iter().enumerate() {
            rank[v] = r as u32;
        }
        let rho = vertices.len().div_ceil(best.len());
        let (attach_rounds, attach_messages) = if attach.is_empty() { (0, 0) } else { self.batch_cost(attach_host, &PathSet::new(attach_paths)) };

        let kind = hn.kind;
        let hx = hn.virtual_graph.clone().unwrap();
        let network = ComparatorNetwork::batcher(best.len());
        let (mut nr, mut nm) = (0, 0);
        let mut all = Vec::new();
        for layer in &network.layers {
            let ps = PathSet::new(
                layer
                    .iter()
                    .map(|&(a, b)| hx.shortest_path(best[a], best[b]).ok_or_else(|| SortError::Contract(format!("H_{host} disconnected"))))
                    .collect::<Result<_, _>>()?,
            );
            let (r, m) = self.batch_cost(Some(host), &ps);
            nr += 2 * r;
            nm += 2 * m;
            all.extend(ps.paths);
        }
        let q = PathSet::new(all).quality();
        self.charge_oracle("sort:network", q * q);

        let route = if kind == NodeKind::GoodTerminal {
            let partner: HashMap<usize, usize> = attach.iter().copied().collect();
            let target: Vec<usize> = (0..vertices.len()).map(|r| r / rho).collect();
            let paths: Vec<Vec<usize>> = vertices
                .iter()
                .zip(&target)
                .map(|(&v, &b)| {
                    let e = partner.get(&v).copied().unwrap_or(v);
                    hx.shortest_path(e, best[b]).ok_or_else(|| SortError::Contract(format!("H_{host} disconnected")))
                })
                .collect::<Result<_, _>>()?;
            let ps = PathSet::new(paths.clone());
            let (rounds, messages) = self.batch_cost(Some(host), &ps);
            let q = ps.quality();
            self.charge_oracle("sort:route", q * q);
            Some(RouteTable { target, rounds, messages, paths: Some(paths) })
        } else {
            None
        };
        Ok(ScopeData {
            scope,
            host,
            vertices,
            rank,
            attach,
            attach_rounds,
            attach_messages,
            best,
            rho,
            network,
            network_rounds: nr,
            network_messages: nm,
            route,
        })
    }
}
