use std::collections::{BTreeMap, VecDeque};

use super::{Network, RoundMetrics, SimError, VertexProgram};
use crate::graph::{Embedding, PathSet};

struct Forward<'a> {
    paths: &'a [Vec<usize>],
    bits: u64,
}

#[derive(Default, Clone)]
struct ForwardState {
    queues: BTreeMap<usize, VecDeque<(u32, u32)>>,
    arrived: Vec<u32>,
}

impl VertexProgram for Forward<'_> {
    type State = ForwardState;
    /// (token, index of the receiver on the token's path)
    type Msg = (u32, u32);

    fn msg_bits(&self, _: &Self::Msg) -> u64 {
        self.bits
    }

    fn step(&self, _v: usize, s: &mut ForwardState, inbox: &[(usize, (u32, u32))], _round: u64, out: &mut Vec<(usize, (u32, u32))>) {
        for &(_, (tok, hop)) in inbox {
            let p = &self.paths[tok as usize];
            if hop as usize + 1 == p.len() {
                s.arrived.push(tok);
            } else {
                s.queues.entry(p[hop as usize + 1]).or_default().push_back((tok, hop));
            }
        }
        for (&next, q) in s.queues.iter_mut() {
            if let Some((tok, hop)) = q.pop_front() {
                out.push((next, (tok, hop + 1)));
            }
        }
        s.queues.retain(|_, q| !q.is_empty());
    }

    fn halted(&self, _: usize, s: &ForwardState) -> bool {
        s.queues.is_empty()
    }
}

/// Moves one token along each path, one token per edge direction per round.
///
/// `at[i]` is the current vertex of token `i` and must be the head of path `i`.
pub fn route_along_paths(net: &mut Network, label: &str, ps: &PathSet, at: &[usize]) -> Result<RoundMetrics, SimError> {
    if at.len() != ps.paths.len() {
        return Err(SimError::Contract(format!("{} tokens for {} paths", at.len(), ps.paths.len())));
    }
    let mut states = vec![ForwardState::default(); net.graph().slots()];
    for (i, p) in ps.paths.iter().enumerate() {
        if p.first() != Some(&at[i]) {
            return Err(SimError::Contract(format!("token {i} is not at the head of its path")));
        }
        if p.len() == 1 {
            states[p[0]].arrived.push(i as u32);
        } else {
            states[p[0]].queues.entry(p[1]).or_default().push_back((i as u32, 0));
        }
    }
    let prog = Forward { paths: &ps.paths, bits: net.bandwidth_bits() };
    let cap = (ps.congestion() * ps.dilation()).max(1);
    let m = net.run(label, &prog, &mut states, cap)?;
    let mut seen = 0;
    for (v, s) in states.iter().enumerate() {
        for &tok in &s.arrived {
            if *ps.paths[tok as usize].last().unwrap() != v {
                return Err(SimError::Contract(format!("token {tok} stopped at slot {v}")));
            }
            seen += 1;
        }
    }
    if seen != ps.paths.len() {
        return Err(SimError::Contract(format!("{seen} of {} tokens arrived", ps.paths.len())));
    }
    Ok(m)
}

/// Delivers each virtual message `(u, v)` along the image of the virtual edge.
pub fn simulate_virtual_round(net: &mut Network, label: &str, emb: &Embedding, msgs: &[(usize, usize)]) -> Result<RoundMetrics, SimError> {
    let mut paths = Vec::with_capacity(msgs.len());
    for &(u, v) in msgs {
        let p = emb
            .path_between(u, v)
            .ok_or_else(|| SimError::Contract(format!("message on non-embedded edge ({u},{v})")))?;
        paths.push(p);
    }
    let at: Vec<usize> = msgs.iter().map(|m| m.0).collect();
    route_along_paths(net, label, &PathSet::new(paths), &at)
}

struct Flood {
    root: usize,
    bits: u64,
}

#[derive(Clone, Default)]
struct FloodState {
    depth: Option<u32>,
    parent: Option<usize>,
    done: bool,
}

impl Flood {
    fn neighbours<'a>(&self, net: &'a crate::graph::Graph, v: usize) -> &'a [usize] {
        net.neighbors(v)
    }
}

struct FloodProg<'a> {
    f: Flood,
    g: &'a crate::graph::Graph,
}

impl VertexProgram for FloodProg<'_> {
    type State = FloodState;
    type Msg = u32;

    fn msg_bits(&self, _: &u32) -> u64 {
        self.f.bits
    }

    fn step(&self, v: usize, s: &mut FloodState, inbox: &[(usize, u32)], _round: u64, out: &mut Vec<(usize, u32)>) {
        if s.done {
            return;
        }
        if v == self.f.root {
            s.depth = Some(0);
        } else if let Some(&(from, d)) = inbox.first() {
            s.depth = Some(d + 1);
            s.parent = Some(from);
        } else {
            return;
        }
        s.done = true;
        for &u in self.f.neighbours(self.g, v) {
            if !inbox.iter().any(|&(w, _)| w == u) {
                out.push((u, s.depth.unwrap()));
            }
        }
    }

    fn halted(&self, v: usize, s: &FloodState) -> bool {
        s.done || v != self.f.root
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BfsTree {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    pub depth: Vec<Option<u32>>,
    pub metrics: RoundMetrics,
}

impl BfsTree {
    pub fn height(&self) -> u32 {
        self.depth.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Children of each vertex in identifier order.
    pub fn children(&self, g: &crate::graph::Graph) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.parent.len()];
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                ch[*p].push(v);
            }
        }
        for c in ch.iter_mut() {
            c.sort_by_key(|&v| g.id(v));
        }
        ch
    }

    /// Pre-order serial of every reached vertex, children by identifier.
    pub fn preorder(&self, g: &crate::graph::Graph) -> Vec<usize> {
        let ch = self.children(g);
        let mut order = Vec::new();
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &c in ch[v].iter().rev() {
                stack.push(c);
            }
        }
        order
    }
}

/// Flooding BFS; the first sender in slot order becomes the parent.
pub fn bfs_tree(net: &mut Network, label: &str, root: usize, cap: u64) -> Result<BfsTree, SimError> {
    let bits = net.id_bits() + 1;
    let g = net.graph().clone();
    let prog = FloodProg { f: Flood { root, bits }, g: &g };
    let mut states = vec![FloodState::default(); g.slots()];
    let metrics = net.run(label, &prog, &mut states, cap)?;
    Ok(BfsTree {
        root,
        parent: states.iter().map(|s| s.parent).collect(),
        depth: states.iter().map(|s| s.depth).collect(),
        metrics,
    })
}

/// Broadcast of one bit from `root`; nobody echoes to its sender.
pub fn broadcast_bit(net: &mut Network, label: &str, root: usize, cap: u64) -> Result<RoundMetrics, SimError> {
    bfs_tree(net, label, root, cap).map(|t| t.metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn broadcast_on_path_takes_diameter_rounds() {
        let mut net = Network::new(Graph::path(8));
        assert_eq!(broadcast_bit(&mut net, "b", 0, 100).unwrap().rounds_used, 7);
    }

    #[test]
    fn single_path_no_contention() {
        let mut net = Network::new(Graph::path(6));
        let ps = PathSet::new(vec![vec![0, 1, 2, 3, 4, 5]]);
        let m = route_along_paths(&mut net, "p", &ps, &[0]).unwrap();
        assert_eq!(m.rounds_used, 5);
    }

    #[test]
    fn shared_edge_serializes() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let mut net = Network::new(g);
        let ps = PathSet::new(vec![vec![0, 1], vec![0, 1], vec![0, 1]]);
        let m = route_along_paths(&mut net, "p", &ps, &[0, 0, 0]).unwrap();
        assert_eq!(m.rounds_used, 3);
        assert_eq!(m.max_edge_load_observed, 1);
    }

    #[test]
    fn token_off_head_is_contract_violation() {
        let mut net = Network::new(Graph::path(3));
        let ps = PathSet::new(vec![vec![0, 1, 2]]);
        assert!(matches!(route_along_paths(&mut net, "p", &ps, &[1]), Err(SimError::Contract(_))));
    }

    #[test]
    fn identity_virtual_round_is_one_round() {
        let g = Graph::cycle(6);
        let emb = Embedding::identity(&g);
        let mut net = Network::new(g);
        let msgs: Vec<(usize, usize)> = (0..6).map(|i| (i, (i + 1) % 6)).chain((0..6).map(|i| ((i + 1) % 6, i))).collect();
        assert_eq!(simulate_virtual_round(&mut net, "v", &emb, &msgs).unwrap().rounds_used, 1);
        assert_eq!(simulate_virtual_round(&mut net, "v", &emb, &[]).unwrap().rounds_used, 0);
    }

    #[test]
    fn non_embedded_message_rejected() {
        let g = Graph::path(3);
        let emb = Embedding::identity(&g);
        let mut net = Network::new(g);
        assert!(matches!(simulate_virtual_round(&mut net, "v", &emb, &[(0, 2)]), Err(SimError::Contract(_))));
    }

    #[test]
    fn bfs_rounds_within_diameter_plus_one() {
        let g = Graph::cycle(9);
        let d = g.diameter().unwrap();
        let mut net = Network::new(g.clone());
        let t = bfs_tree(&mut net, "bfs", 0, 100).unwrap();
        assert!(t.metrics.rounds_used <= d as u64 + 1);
        let dist = g.bfs_distances(0);
        for v in 0..9 {
            assert_eq!(t.depth[v], dist[v]);
        }
        assert_eq!(t.preorder(&g).len(), 9);
    }

    #[test]
    fn timeout_carries_partial_metrics() {
        let mut net = Network::new(Graph::path(20));
        match bfs_tree(&mut net, "bfs", 0, 5) {
            Err(SimError::Timeout { cap: 5, partial }) => assert_eq!(partial.rounds_used, 5),
            other => panic!("{other:?}"),
        }
    }
}
