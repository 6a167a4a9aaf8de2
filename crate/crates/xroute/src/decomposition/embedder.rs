//! Matching embedder: bounded-hop max-flow packing with a cut certificate.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::graph::{measure_cut, CutReport, Graph};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutCertificate {
    pub cut: Vec<usize>,
    pub report: CutReport,
    /// Sources inside the cut.
    pub sources_inside: Vec<usize>,
    /// Sinks outside the cut.
    pub sinks_outside: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    /// `(source, sink)` pairs, one per matched source.
    pub pairs: Vec<(usize, usize)>,
    /// Host path from each source to its sink, aligned with `pairs`.
    pub paths: Vec<Vec<usize>>,
    pub unmatched: Vec<usize>,
    /// Hop bound in force when the packing stopped.
    pub hop_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MatchingOutcome {
    Matched(MatchResult),
    Cut(CutCertificate),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopPolicy {
    /// Double the hop cap until saturation; certify a cut otherwise.
    Doubling,
    /// Fixed cap; unmatched sources are reported, no certificate.
    Fixed(usize),
}

struct Arc {
    to: usize,
    cap: i64,
    flow: i64,
}

struct Flow {
    arcs: Vec<Arc>,
    head: Vec<Vec<usize>>,
    level: Vec<i32>,
    it: Vec<usize>,
}

impl Flow {
    fn new(n: usize) -> Self {
        Self { arcs: Vec::new(), head: vec![Vec::new(); n], level: vec![0; n], it: vec![0; n] }
    }

    fn add(&mut self, u: usize, v: usize, cap: i64) -> usize {
        self.head[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, cap, flow: 0 });
        self.head[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, cap: 0, flow: 0 });
        self.arcs.len() - 2
    }

    fn residual(&self, a: usize) -> i64 {
        self.arcs[a].cap - self.arcs[a].flow
    }

    fn bfs(&mut self, s: usize, t: usize) -> Option<i32> {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.head[u] {
                let v = self.arcs[a].to;
                if self.level[v] < 0 && self.residual(a) > 0 {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        (self.level[t] >= 0).then_some(self.level[t])
    }

    fn dfs(&mut self, u: usize, t: usize, f: i64) -> i64 {
        if u == t {
            return f;
        }
        while self.it[u] < self.head[u].len() {
            let a = self.head[u][self.it[u]];
            let v = self.arcs[a].to;
            if self.residual(a) > 0 && self.level[v] == self.level[u] + 1 {
                let d = self.dfs(v, t, f.min(self.residual(a)));
                if d > 0 {
                    self.arcs[a].flow += d;
                    self.arcs[a ^ 1].flow -= d;
                    return d;
                }
            }
            self.it[u] += 1;
        }
        0
    }

    /// Augments along shortest paths of at most `max_len` arcs.
    fn run(&mut self, s: usize, t: usize, max_len: usize) -> i64 {
        let mut total = 0;
        while let Some(d) = self.bfs(s, t) {
            if d as usize > max_len {
                break;
            }
            self.it.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
        total
    }
}

/// `⌈1/ψ⌉` as an integer capacity.
pub fn capacity_for(psi: &BigRational) -> i64 {
    assert!(psi > &BigRational::zero(), "psi must be positive");
    let (q, r) = psi.denom().div_rem(psi.numer());
    let c = if r.is_zero() { q } else { q + BigInt::from(1) };
    c.to_i64().unwrap_or(i64::MAX / 4).max(1)
}

/// Matches `sources` into distinct `sinks` through `host` with edge capacity `⌈1/ψ⌉`.
///
/// Under [`HopPolicy::Doubling`] the result either saturates the sources or
/// carries a cut `C` with `Ψ(C) ≤ ψ`, checked by [`measure_cut`] before it is
/// returned. The certificate argument needs `|sources| ≤ |sinks|`.
pub fn embed_matching(host: &Graph, sources: &[usize], sinks: &[usize], psi: &BigRational, policy: HopPolicy) -> MatchingOutcome {
    let n = host.slots();
    let (s, t) = (n, n + 1);
    let mut flow = Flow::new(n + 2);
    let cap = capacity_for(psi);
    let mut is_source = vec![false; n];
    let mut is_sink = vec![false; n];
    for &v in sources {
        if !is_source[v] {
            is_source[v] = true;
            flow.add(s, v, 1);
        }
    }
    for &v in sinks {
        if !is_sink[v] && !is_source[v] {
            is_sink[v] = true;
            flow.add(v, t, 1);
        }
    }
    for e in host.edges() {
        let c = cap.saturating_mul(e.mult as i64);
        flow.add(e.u, e.v, c);
        flow.add(e.v, e.u, c);
    }
    let want = is_source.iter().filter(|&&b| b).count() as i64;
    let full = n + 2;
    let mut got = 0;
    let mut h = match policy {
        HopPolicy::Fixed(h) => h,
        HopPolicy::Doubling => (crate::numeric::ceil_log2(host.n().max(2) as u64) as usize + 1).max(2),
    };
    loop {
        got += flow.run(s, t, h + 2);
        if got == want {
            break;
        }
        match policy {
            HopPolicy::Fixed(_) => break,
            HopPolicy::Doubling if h + 2 >= full => break,
            HopPolicy::Doubling => h = (h * 2).min(full),
        }
    }
    if got < want && policy == HopPolicy::Doubling {
        // residual reachability from s gives the min cut
        let mut seen = vec![false; n + 2];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &flow.head[u] {
                let v = flow.arcs[a].to;
                if !seen[v] && flow.residual(a) > 0 {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        let cut: Vec<usize> = host.members().iter().copied().filter(|&v| seen[v]).collect();
        let report = measure_cut(host, &cut).expect("min cut is a proper subset");
        assert!(report.sparsity <= *psi, "certificate sparsity above psi");
        let sources_inside = cut.iter().copied().filter(|&v| is_source[v]).collect();
        let sinks_outside = host.members().iter().copied().filter(|&v| is_sink[v] && !seen[v]).collect();
        return MatchingOutcome::Cut(CutCertificate { cut, report, sources_inside, sinks_outside });
    }
    MatchingOutcome::Matched(decompose(host, &flow, &is_source, &is_sink, s, t, h))
}

fn decompose(host: &Graph, flow: &Flow, is_source: &[bool], is_sink: &[bool], s: usize, t: usize, h: usize) -> MatchResult {
    let n = host.slots();
    // net flow per directed host pair
    let mut out: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for u in 0..n {
        for &a in &flow.head[u] {
            let arc = &flow.arcs[a];
            if arc.to < n && arc.flow > 0 && arc.cap > 0 {
                out[u].push((arc.to, arc.flow));
            }
        }
    }
    for u in 0..n {
        let mut merged: Vec<(usize, i64)> = Vec::new();
        out[u].sort_unstable();
        for &(v, f) in &out[u] {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += f,
                _ => merged.push((v, f)),
            }
        }
        out[u] = merged;
    }
    for u in 0..n {
        for i in 0..out[u].len() {
            let (v, f) = out[u][i];
            if let Some(j) = out[v].iter().position(|&(w, _)| w == u) {
                let g = out[v][j].1;
                let m = f.min(g);
                out[u][i].1 -= m;
                out[v][j].1 -= m;
            }
        }
    }
    for o in out.iter_mut() {
        o.retain(|&(_, f)| f > 0);
    }
    let mut sink_used = vec![false; n];
    for v in 0..n {
        if is_sink[v] {
            sink_used[v] = flow.head[v].iter().any(|&a| flow.arcs[a].to == t && flow.arcs[a].flow > 0);
        }
    }
    let mut pairs = Vec::new();
    let mut paths = Vec::new();
    let mut unmatched = Vec::new();
    let src_flow = |v: usize| flow.head[s].iter().any(|&a| flow.arcs[a].to == v && flow.arcs[a].flow > 0);
    let mut consumed = vec![false; n];
    for v in host.members().iter().copied().filter(|&v| is_source[v]) {
        if !src_flow(v) {
            unmatched.push(v);
            continue;
        }
        let mut walk = vec![v];
        let mut u = v;
        loop {
            if is_sink[u] && sink_used[u] && !consumed[u] {
                consumed[u] = true;
                break;
            }
            let (i, &(w, _)) = out[u].iter().enumerate().next().expect("flow conservation");
            out[u][i].1 -= 1;
            if out[u][i].1 == 0 {
                out[u].remove(i);
            }
            walk.push(w);
            u = w;
        }
        pairs.push((v, u));
        paths.push(loop_erase(&walk));
    }
    MatchResult { pairs, paths, unmatched, hop_cap: h }
}

/// Removes cycles from a walk, keeping the first visit order.
pub fn loop_erase(walk: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(walk.len());
    for &v in walk {
        if let Some(pos) = out.iter().position(|&x| x == v) {
            out.truncate(pos + 1);
        } else {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    fn barbell(half: usize) -> Graph {
        let mut g = Graph::new((1..=2 * half as u64).collect()).unwrap();
        for side in 0..2 {
            for i in 0..half {
                for j in i + 1..half {
                    g.add_edge(side * half + i, side * half + j).unwrap();
                }
            }
        }
        g.add_edge(half - 1, half).unwrap();
        g
    }

    #[test]
    fn capacity_rounds_up() {
        assert_eq!(capacity_for(&rat(1, 4)), 4);
        assert_eq!(capacity_for(&rat(2, 7)), 4);
        assert_eq!(capacity_for(&rat(3, 1)), 1);
    }

    #[test]
    fn empty_sources_empty_matching() {
        let g = Graph::cycle(6);
        match embed_matching(&g, &[], &[1, 2], &rat(1, 2), HopPolicy::Doubling) {
            MatchingOutcome::Matched(m) => assert!(m.pairs.is_empty() && m.paths.is_empty()),
            _ => panic!(),
        }
    }

    #[test]
    fn single_source_path_is_shortest() {
        let g = Graph::cycle(10);
        match embed_matching(&g, &[0], &[5, 6], &rat(1, 2), HopPolicy::Doubling) {
            MatchingOutcome::Matched(m) => {
                assert_eq!(m.pairs.len(), 1);
                let d = g.bfs_distances(0);
                let best = d[5].unwrap().min(d[6].unwrap()) as usize;
                assert!(m.paths[0].len() - 1 >= best);
                crate::graph::PathSet::new(m.paths.clone()).validate(&g).unwrap();
            }
            _ => panic!(),
        }
    }

    #[test]
    fn barbell_yields_sparse_cut() {
        let g = barbell(8);
        let left: Vec<usize> = (0..8).collect();
        let right: Vec<usize> = (8..16).collect();
        match embed_matching(&g, &left, &right, &rat(1, 4), HopPolicy::Doubling) {
            MatchingOutcome::Cut(c) => {
                assert!(c.report.sparsity <= rat(1, 4));
                assert_eq!(measure_cut(&g, &c.cut).unwrap(), c.report);
                assert_eq!(c.report.sparsity, rat(1, 8));
            }
            _ => panic!("expected cut"),
        }
    }

    #[test]
    fn complete_graph_saturates_injectively() {
        let g = Graph::complete(12);
        let src: Vec<usize> = (0..5).collect();
        let dst: Vec<usize> = (5..12).collect();
        match embed_matching(&g, &src, &dst, &rat(1, 2), HopPolicy::Doubling) {
            MatchingOutcome::Matched(m) => {
                assert_eq!(m.pairs.len(), 5);
                let mut sinks: Vec<usize> = m.pairs.iter().map(|p| p.1).collect();
                sinks.sort();
                sinks.dedup();
                assert_eq!(sinks.len(), 5);
                for (p, path) in m.pairs.iter().zip(&m.paths) {
                    assert_eq!((path[0], *path.last().unwrap()), *p);
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn fixed_hop_cap_leaves_far_sources() {
        let g = Graph::path(10);
        match embed_matching(&g, &[0, 1], &[8, 9], &rat(1, 1), HopPolicy::Fixed(3)) {
            MatchingOutcome::Matched(m) => assert_eq!(m.unmatched, vec![0, 1]),
            _ => panic!(),
        }
    }

    #[test]
    fn loop_erase_removes_cycles() {
        assert_eq!(loop_erase(&[1, 2, 3, 2, 4, 5, 1, 6]), vec![1, 6]);
        assert_eq!(loop_erase(&[1, 2, 3, 4, 2, 5]), vec![1, 2, 5]);
    }
}
