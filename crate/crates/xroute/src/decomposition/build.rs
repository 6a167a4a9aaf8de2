use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::embedder::{embed_matching, HopPolicy, MatchingOutcome};
use super::{Certification, DecompError, HierNode, Hierarchy, NodeKind, Part};
use crate::graph::{graph_sparsity_bruteforce, Embedding, Graph, PathSet, BRUTE_FORCE_CAP};
use crate::numeric::{ceil_log2, ceil_root_power, gaussian, rat, SpectralEstimate};

#[derive(Clone, Debug, PartialEq)]
pub struct BuildParams {
    /// `ε = p/q`, giving `k = ⌈n^ε⌉`.
    pub eps: (u64, u64),
    /// Overrides `k` when set.
    pub k: Option<u64>,
    pub psi: BigRational,
    pub level_cap: u32,
    /// Defaults to `min(max(k⁴, 32), n)`.
    pub leaf_threshold: Option<usize>,
    pub seed: u64,
    /// Fixed hop bound for the per-part matchings; unmatched vertices become leftovers.
    pub part_hop_cap: Option<usize>,
    /// Number of highest-id vertices kept out of `W` and attached through `M_root`.
    pub holdout: usize,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self { eps: (1, 2), k: None, psi: rat(1, 8), level_cap: 8, leaf_threshold: None, seed: 1, part_hop_cap: None, holdout: 0 }
    }
}

/// Exact-sparsity certification threshold for parts within the brute-force cap.
const EXACT_THRESHOLD: (i64, i64) = (1, 4);
/// Spectral-estimate threshold above the cap.
const ESTIMATE_THRESHOLD: f64 = 0.125;

struct PartResult {
    u: Vec<usize>,
    h: Graph,
    f: Embedding,
    leftover: Vec<usize>,
    cert: Certification,
}

struct Builder<'a> {
    g: &'a Graph,
    p: &'a BuildParams,
    k: usize,
    theta: usize,
    nodes: Vec<HierNode>,
    charges: Vec<(String, u64)>,
}

fn charge_of(paths: &[Vec<usize>]) -> u64 {
    let q = PathSet::new(paths.to_vec()).quality();
    q * q
}

impl Builder<'_> {
    fn push(&mut self, kind: NodeKind, vertices: Vec<usize>, level: u32, parent: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(HierNode {
            id,
            kind,
            level,
            parent,
            vertices,
            parts: Vec::new(),
            virtual_graph: None,
            embedding: None,
            matching_embedding: None,
            flat: None,
            flat_matching: None,
            best: Vec::new(),
            part_best_counts: Vec::new(),
            certification: None,
        });
        id
    }

    fn good(&mut self, verts: Vec<usize>, base: Graph, emb: Embedding, cert: Certification, level: u32, parent: Option<usize>) -> Result<usize, DecompError> {
        let id = self.push(NodeKind::GoodTerminal, verts.clone(), level, parent);
        self.nodes[id].certification = Some(cert);
        let m = verts.len();
        let k = self.k;
        let terminal = level >= self.p.level_cap || k < 2 || m < 2 * k || m / k < self.theta;
        if !terminal {
            if let Some(parts) = self.split(id, &verts, &base, level)? {
                self.nodes[id].kind = NodeKind::GoodInternal;
                let (parts, matching_emb) = parts;
                self.nodes[id].parts = parts;
                self.nodes[id].matching_embedding = Some(matching_emb);
            }
        }
        if self.nodes[id].kind == NodeKind::GoodTerminal {
            self.nodes[id].matching_embedding = Some(Embedding::empty());
        }
        self.nodes[id].virtual_graph = Some(base);
        self.nodes[id].embedding = Some(emb);
        Ok(id)
    }

    /// Partition, embed parts, merge leftovers; `None` means the node stays terminal.
    fn split(&mut self, id: usize, verts: &[usize], base: &Graph, level: u32) -> Result<Option<(Vec<Part>, Embedding)>, DecompError> {
        let m = verts.len();
        let k = self.k;
        let (q, r) = (m / k, m % k);
        let mut ranges = Vec::with_capacity(k);
        let mut at = 0;
        for i in 0..k {
            let len = q + usize::from(i < r);
            ranges.push(verts[at..at + len].to_vec());
            at += len;
        }
        let mut embedded: Vec<PartResult> = Vec::new();
        let mut leftovers = Vec::new();
        for (i, vi) in ranges.iter().enumerate() {
            match self.embed_part(base, vi, id, i) {
                Some(pr) => {
                    leftovers.extend_from_slice(&pr.leftover);
                    embedded.push(pr);
                }
                None => leftovers.extend_from_slice(vi),
            }
        }
        let needed = (2 * k).div_ceil(3);
        if embedded.len() < needed {
            return Err(DecompError::TooFewParts { node: id, good: embedded.len(), needed });
        }
        if embedded.iter().any(|pr| pr.u.len() < self.theta) {
            // trimming: a child below the leaf threshold collapses this node
            return Ok(None);
        }
        let mut in_part = vec![usize::MAX; self.g.slots()];
        for (j, pr) in embedded.iter().enumerate() {
            for &v in &pr.u {
                in_part[v] = j;
            }
        }
        let mut bad_sets = vec![Vec::new(); embedded.len()];
        let mut matchings = vec![Vec::new(); embedded.len()];
        let mut medges = Vec::new();
        let mut mpaths = Vec::new();
        if !leftovers.is_empty() {
            leftovers.sort_by_key(|&v| self.g.id(v));
            let sinks: Vec<usize> = embedded.iter().flat_map(|pr| pr.u.iter().copied()).collect();
            match embed_matching(base, &leftovers, &sinks, &self.p.psi, HopPolicy::Doubling) {
                MatchingOutcome::Cut(cert) => return Err(DecompError::MergeCut { node: id, cert: Box::new(cert) }),
                MatchingOutcome::Matched(res) => {
                    self.charges.push(("preprocess:decomposition:merge".into(), charge_of(&res.paths)));
                    for ((a, b), path) in res.pairs.iter().zip(res.paths) {
                        let j = in_part[*b];
                        bad_sets[j].push(*a);
                        matchings[j].push((*a, *b));
                        medges.push((*a, *b));
                        mpaths.push(path);
                    }
                }
            }
        }
        let mut parts = Vec::new();
        for (j, pr) in embedded.into_iter().enumerate() {
            let good = self.good(pr.u, pr.h, pr.f, pr.cert, level + 1, Some(id))?;
            let mut bad_v = std::mem::take(&mut bad_sets[j]);
            bad_v.sort_by_key(|&v| self.g.id(v));
            let bad = self.push(NodeKind::Bad, bad_v, level + 1, Some(id));
            let mut mt = std::mem::take(&mut matchings[j]);
            mt.sort_by_key(|&(a, _)| self.g.id(a));
            parts.push(Part { good, bad, matching: mt });
        }
        Ok(Some((parts, Embedding::new(medges, mpaths)?)))
    }

    /// Cut-matching rounds embedding an expander `H_i` on part `vi` into `base`.
    fn embed_part(&mut self, base: &Graph, vi: &[usize], node: usize, part: usize) -> Option<PartResult> {
        let m = vi.len();
        let mut h = base.empty_like(vi, true);
        if m == 1 {
            return Some(PartResult { u: vi.to_vec(), h, f: Embedding::empty(), leftover: vec![], cert: Certification::Trivial });
        }
        let rmin = ceil_log2(m as u64) as usize + 1;
        let rmax = 4 * rmin;
        let seed = self.p.seed ^ (node as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (part as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut local = vec![usize::MAX; base.slots()];
        for (i, &v) in vi.iter().enumerate() {
            local[v] = i;
        }
        let mut rounds: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut edges = Vec::new();
        let mut paths = Vec::new();
        let policy = self.p.part_hop_cap.map(HopPolicy::Fixed).unwrap_or(HopPolicy::Doubling);
        for r in 0..rmax {
            let mut x: Vec<f64> = (0..m).map(|_| gaussian(&mut rng)).collect();
            for round in &rounds {
                for &(a, b) in round {
                    let avg = (x[local[a]] + x[local[b]]) / 2.0;
                    x[local[a]] = avg;
                    x[local[b]] = avg;
                }
            }
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(self.g.id(vi[i]).cmp(&self.g.id(vi[j]))));
            let a: Vec<usize> = order[..m / 2].iter().map(|&i| vi[i]).collect();
            let b: Vec<usize> = order[m / 2..].iter().map(|&i| vi[i]).collect();
            if let MatchingOutcome::Matched(res) = embed_matching(base, &a, &b, &self.p.psi, policy) {
                self.charges.push(("preprocess:decomposition:part-matching".into(), charge_of(&res.paths)));
                for (&(s, t), p) in res.pairs.iter().zip(res.paths) {
                    h.add_edge(s, t).expect("part vertices");
                    edges.push((s, t));
                    paths.push(p);
                }
                rounds.push(res.pairs);
            }
            if r + 1 < rmin {
                continue;
            }
            let u: Vec<usize> = vi.iter().copied().filter(|&v| h.degree(v) > 0).collect();
            if 3 * u.len() < 2 * m {
                continue;
            }
            let hu = h.induced(&u);
            if !hu.is_connected() {
                continue;
            }
            let cert = if u.len() <= BRUTE_FORCE_CAP {
                let psi = graph_sparsity_bruteforce(&hu).ok()?;
                if psi < rat(EXACT_THRESHOLD.0, EXACT_THRESHOLD.1) {
                    continue;
                }
                Certification::Exact(psi)
            } else {
                let est = SpectralEstimate::<f64>::of(&hu, &u, 300, seed);
                if est.sparsity_estimate < ESTIMATE_THRESHOLD {
                    continue;
                }
                Certification::Estimated(est.sparsity_estimate)
            };
            let leftover: Vec<usize> = vi.iter().copied().filter(|&v| h.degree(v) == 0).collect();
            let f = Embedding::new(edges, paths).expect("embedder paths join their pairs");
            return Some(PartResult { u, h: hu, f, leftover, cert });
        }
        None
    }
}

/// Matches `V∖W` into `W` through `g`.
pub fn root_matching(g: &Graph, w: &[usize], psi: &BigRational) -> Result<(Vec<(usize, usize)>, Embedding), DecompError> {
    let mut in_w = vec![false; g.slots()];
    for &v in w {
        in_w[v] = true;
    }
    let outside: Vec<usize> = g.by_id_order(g.members()).into_iter().filter(|&v| !in_w[v]).collect();
    if outside.is_empty() {
        return Ok((Vec::new(), Embedding::empty()));
    }
    match embed_matching(g, &outside, w, psi, HopPolicy::Doubling) {
        MatchingOutcome::Cut(c) => Err(DecompError::RootMatching(Box::new(c))),
        MatchingOutcome::Matched(res) => {
            let emb = Embedding::new(res.pairs.clone(), res.paths)?;
            Ok((res.pairs, emb))
        }
    }
}

/// Lower and upper halves of `g` by an approximate Fiedler vector.
fn spectral_halves(g: &Graph, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let v = g.members().to_vec();
    let m = v.len();
    let mut local = vec![usize::MAX; g.slots()];
    for (i, &s) in v.iter().enumerate() {
        local[s] = i;
    }
    let deg: Vec<f64> = v.iter().map(|&s| g.degree(s) as f64).collect();
    let total: f64 = deg.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..m).map(|_| gaussian(&mut rng)).collect();
    for _ in 0..200 {
        let mean = x.iter().zip(&deg).map(|(a, d)| a * d).sum::<f64>() / total;
        x.iter_mut().for_each(|a| *a -= mean);
        let mut y = vec![0.0; m];
        for (i, &s) in v.iter().enumerate() {
            let mut acc = 0.0;
            for (&u, &mu) in g.neighbors(s).iter().zip(g.multiplicities(s)) {
                if local[u] != usize::MAX {
                    acc += mu as f64 * x[local[u]];
                }
            }
            y[i] = 0.5 * x[i] + 0.5 * acc / deg[i].max(1.0);
        }
        let n = y.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        x = y.into_iter().map(|a| a / n).collect();
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(g.id(v[i]).cmp(&g.id(v[j]))));
    let lo = order[..m / 2].iter().map(|&i| v[i]).collect();
    let hi = order[m / 2..].iter().map(|&i| v[i]).collect();
    (lo, hi)
}

pub fn build_hierarchy(g: &Graph, params: &BuildParams) -> Result<Hierarchy, DecompError> {
    if !g.is_connected() {
        return Err(crate::graph::GraphError::Disconnected.into());
    }
    let n = g.n();
    let k = params.k.unwrap_or_else(|| ceil_root_power(n as u64, params.eps.0, params.eps.1)).max(1);
    let theta = params
        .leaf_threshold
        .unwrap_or_else(|| ((k as usize).saturating_pow(4)).max(32))
        .min(n)
        .max(1);
    let mut charges = Vec::new();
    if n >= 2 {
        let (lo, hi) = spectral_halves(g, params.seed);
        match embed_matching(g, &lo, &hi, &params.psi, HopPolicy::Doubling) {
            MatchingOutcome::Cut(c) => return Err(DecompError::SparseCut(Box::new(c))),
            MatchingOutcome::Matched(res) => charges.push(("preprocess:decomposition:probe".into(), charge_of(&res.paths))),
        }
    }
    let order = g.by_id_order(g.members());
    let w: Vec<usize> = order[..n - params.holdout.min(n)].to_vec();
    if 3 * w.len() < 2 * n {
        return Err(DecompError::HoldoutTooLarge { w: w.len(), n });
    }
    let hw = g.induced(&w);
    if !hw.is_connected() {
        return Err(DecompError::DisconnectedCore);
    }
    let mut b = Builder { g, p: params, k: k as usize, theta, nodes: Vec::new(), charges };
    let ident = Embedding::identity(&hw);
    let root = b.good(w.clone(), hw, ident, Certification::Root, 0, None)?;
    let (rm, rme) = root_matching(g, &w, &params.psi)?;
    b.charges.push(("preprocess:decomposition:root-matching".into(), charge_of(&rme.paths)));
    let mut h = Hierarchy {
        nodes: b.nodes,
        root,
        k,
        eps: params.eps,
        psi: params.psi.clone(),
        rho_best: rat(1, 1),
        leaf_threshold: theta,
        level_cap: params.level_cap,
        w,
        root_matching: rm,
        root_matching_embedding: rme,
        n,
        oracle_charges: b.charges,
    };
    finish(&mut h)?;
    Ok(h)
}

/// Fills best sets, part best counts, `ρ_best` and flattened embeddings.
pub(crate) fn finish(h: &mut Hierarchy) -> Result<(), DecompError> {
    let order = h.good_nodes();
    for &x in order.iter().rev() {
        let node = &h.nodes[x];
        let best = match node.kind {
            NodeKind::GoodTerminal => node.vertices.clone(),
            _ => {
                let mut b: Vec<usize> = node.parts.iter().flat_map(|p| h.nodes[p.good].best.iter().copied()).collect();
                let ids = h.nodes[x].virtual_graph.as_ref().map(|g| g.ids().to_vec()).unwrap();
                b.sort_by_key(|&v| ids[v]);
                b
            }
        };
        let counts = node.parts.iter().map(|p| h.nodes[p.good].best.len()).collect();
        h.nodes[x].best = best;
        h.nodes[x].part_best_counts = counts;
    }
    let mut rho = rat(1, 1);
    for &x in &order {
        let node = &h.nodes[x];
        if !node.best.is_empty() {
            let r = BigRational::new(BigInt::from(node.vertices.len()), BigInt::from(node.best.len()));
            if r > rho {
                rho = r;
            }
        }
    }
    h.rho_best = rho;
    for &x in &order {
        let flat = match h.nodes[x].parent {
            None => h.nodes[x].embedding.clone().unwrap(),
            Some(p) => Embedding::compose(h.nodes[p].flat.as_ref().unwrap(), h.nodes[x].embedding.as_ref().unwrap())?,
        };
        let fm = Embedding::compose(&flat, h.nodes[x].matching_embedding.as_ref().unwrap())?;
        h.nodes[x].flat = Some(flat);
        h.nodes[x].flat_matching = Some(fm);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_of_cliques(c: usize, s: usize) -> Graph {
        let mut g = Graph::new((1..=(c * s) as u64).collect()).unwrap();
        for q in 0..c {
            for i in 0..s {
                for j in i + 1..s {
                    g.add_edge(q * s + i, q * s + j).unwrap();
                }
            }
            g.add_edge(q * s + s - 1, ((q + 1) % c) * s).unwrap();
        }
        g
    }

    #[test]
    fn small_graph_is_single_node() {
        let g = Graph::complete(6);
        let h = build_hierarchy(&g, &BuildParams::default()).unwrap();
        assert_eq!(h.nodes.len(), 1);
        assert_eq!(h.root_node().kind, NodeKind::GoodTerminal);
        assert_eq!(h.root_node().best, h.w);
        assert_eq!(h.w.len(), 6);
        assert_eq!(h.rho_best, rat(1, 1));
    }

    #[test]
    fn barbell_is_rejected_with_certificate() {
        let mut g = Graph::new((1..=16).collect()).unwrap();
        for side in 0..2 {
            for i in 0..8 {
                for j in i + 1..8 {
                    g.add_edge(side * 8 + i, side * 8 + j).unwrap();
                }
            }
        }
        g.add_edge(7, 8).unwrap();
        let params = BuildParams { psi: rat(1, 4), ..Default::default() };
        match build_hierarchy(&g, &params) {
            Err(DecompError::SparseCut(c)) => {
                assert!(c.report.sparsity <= rat(1, 4));
                assert_eq!(crate::graph::measure_cut(&g, &c.cut).unwrap().sparsity, c.report.sparsity);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_level_build_on_cliques() {
        let g = ring_of_cliques(4, 8);
        let params = BuildParams { k: Some(2), leaf_threshold: Some(8), psi: rat(1, 16), ..Default::default() };
        let h = build_hierarchy(&g, &params).unwrap();
        assert!(h.depth() >= 1);
        let root = h.root_node();
        assert_eq!(root.kind, NodeKind::GoodInternal);
        assert_eq!(root.t(), 2);
        let flat = h.flatten(root.parts[0].good).unwrap();
        flat.validate(&g, None).unwrap();
    }

    #[test]
    fn holdout_attaches_through_root_matching() {
        let g = ring_of_cliques(4, 8);
        let params = BuildParams { k: Some(2), leaf_threshold: Some(8), psi: rat(1, 16), holdout: 3, ..Default::default() };
        let h = build_hierarchy(&g, &params).unwrap();
        assert_eq!(h.w.len(), 29);
        assert_eq!(h.root_matching.len(), 3);
        h.root_matching_embedding.validate(&g, None).unwrap();
    }

    #[test]
    fn w_equal_v_gives_empty_root_matching() {
        let g = Graph::cycle(8);
        let all: Vec<usize> = (0..8).collect();
        let (m, e) = root_matching(&g, &all, &rat(1, 2)).unwrap();
        assert!(m.is_empty() && e.is_empty());
    }
}
