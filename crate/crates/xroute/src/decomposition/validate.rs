use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{Hierarchy, NodeKind};
use crate::graph::{graph_sparsity_bruteforce, Graph, PathSet, BRUTE_FORCE_CAP};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub label: String,
    pub node: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// (level, congestion, dilation) of the union of `f⁰_X` over good nodes at that level.
    pub level_quality: Vec<(u32, u64, u64)>,
    /// Per good node: how expansion was established.
    pub expansion: Vec<(usize, String)>,
    pub checks: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, label_prefix: &str) -> bool {
        self.violations.iter().any(|v| v.label.starts_with(label_prefix))
    }

    fn check(&mut self, ok: bool, label: &str, node: Option<usize>, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(Violation { label: label.to_string(), node, detail: detail() });
        }
    }
}

/// Violation labels.
pub mod labels {
    pub const PART_COUNT: &str = "parts: part count";
    pub const PART_PARTITION: &str = "parts: parts partition X";
    pub const PART_WINDOW: &str = "parts: size window";
    pub const PART_TAU: &str = "parts: tau window";
    pub const PART_ORDER: &str = "parts: identifier ordering";
    pub const GOOD_EMBED: &str = "good node: embedding";
    pub const GOOD_EXPANSION: &str = "good node: expansion";
    pub const BAD_SIZE: &str = "bad node: bad set size";
    pub const BAD_MATCHING: &str = "bad node: matching saturation";
    pub const GOOD_COVERAGE: &str = "bad node: good coverage";
    pub const BEST: &str = "best sets";
    pub const RHO: &str = "rho_best";
    pub const W_SIZE: &str = "hierarchy: |W|";
    pub const ROOT_MATCHING: &str = "hierarchy: root matching";
    pub const LEAF: &str = "hierarchy: leaf threshold";
    pub const DEPTH: &str = "hierarchy: depth cap";
    pub const ROOT_EMBED: &str = "hierarchy: root embedding";
}

use labels::*;

fn same_multiset(a: &[(usize, usize)], b: &[(usize, usize)]) -> bool {
    let norm = |v: &[(usize, usize)]| {
        let mut x: Vec<(usize, usize)> = v.iter().map(|&(p, q)| (p.min(q), p.max(q))).collect();
        x.sort_unstable();
        x
    };
    norm(a) == norm(b)
}

fn graph_edge_list(g: &Graph) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for e in g.edges() {
        for _ in 0..e.mult {
            out.push((e.u, e.v));
        }
    }
    out
}

/// Checks every structural invariant and lists the violations found.
pub fn validate_hierarchy(h: &Hierarchy, g: &Graph) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n = g.n();
    let k = h.k as usize;
    r.check(3 * h.w.len() >= 2 * n, W_SIZE, None, || format!("|W|={} n={n}", h.w.len()));
    r.check(h.depth() <= h.level_cap, DEPTH, None, || format!("depth {} > cap {}", h.depth(), h.level_cap));

    let root = h.root_node();
    let hw = g.induced(&h.w);
    r.check(root.virtual_graph.as_ref() == Some(&hw), ROOT_EMBED, Some(h.root), || "H_W differs from G[W]".into());
    if let Some(e) = &root.embedding {
        let ok = e.paths.iter().all(|p| p.len() == 2) && same_multiset(&e.virtual_edges, &graph_edge_list(&hw));
        r.check(ok, ROOT_EMBED, Some(h.root), || "root embedding is not the identity".into());
    }

    // root matching saturates V \ W into W
    let mut in_w = vec![false; g.slots()];
    for &v in &h.w {
        in_w[v] = true;
    }
    let outside: Vec<usize> = g.members().iter().copied().filter(|&v| !in_w[v]).collect();
    let mut src_seen: HashMap<usize, usize> = HashMap::new();
    let mut dst_seen: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in &h.root_matching {
        *src_seen.entry(a).or_default() += 1;
        *dst_seen.entry(b).or_default() += 1;
        r.check(!in_w[a] && in_w[b], ROOT_MATCHING, None, || format!("pair ({a},{b}) does not go V\\W -> W"));
    }
    r.check(
        outside.iter().all(|v| src_seen.get(v) == Some(&1)) && dst_seen.values().all(|&c| c == 1),
        ROOT_MATCHING,
        None,
        || "V\\W is not saturated exactly once".into(),
    );
    r.check(h.root_matching_embedding.validate(g, None).is_ok(), ROOT_MATCHING, None, || "root matching path invalid".into());

    let good = h.good_nodes();
    for &x in &good {
        let node = &h.nodes[x];
        let ids = g.ids();
        let m = node.vertices.len();
        let hx = match &node.virtual_graph {
            Some(hx) => hx,
            None => {
                r.check(false, GOOD_EMBED, Some(x), || "good node without virtual graph".into());
                continue;
            }
        };
        r.check(hx.members() == {
            let mut v = node.vertices.clone();
            v.sort_unstable();
            v
        }.as_slice(), GOOD_EMBED, Some(x), || "V(H_X) differs from X".into());
        r.check(node.vertices.windows(2).all(|w| ids[w[0]] < ids[w[1]]), PART_ORDER, Some(x), || "vertices not in id order".into());

        // expansion of H_X
        let label = if m <= 1 {
            "trivial".to_string()
        } else if m <= BRUTE_FORCE_CAP {
            let psi = graph_sparsity_bruteforce(hx).unwrap_or_else(|_| BigRational::zero());
            r.check(psi > BigRational::zero(), GOOD_EXPANSION, Some(x), || "exact sparsity is zero".into());
            format!("exact {psi}")
        } else {
            r.check(hx.is_connected(), GOOD_EXPANSION, Some(x), || "H_X disconnected".into());
            match &node.certification {
                Some(super::Certification::Estimated(e)) => format!("estimated {e:.4}"),
                Some(super::Certification::Root) => "root: caller precondition".into(),
                other => format!("{other:?}"),
            }
        };
        r.expansion.push((x, label));

        if let (Some(p), Some(f)) = (node.parent, &node.embedding) {
            let host = h.nodes[p].virtual_graph.as_ref().unwrap();
            let ok = f.validate(host, Some(hx)).is_ok() && same_multiset(&f.virtual_edges, &graph_edge_list(hx));
            r.check(ok, GOOD_EMBED, Some(x), || "f_X is not an embedding of H_X into the parent".into());
            let parent_set: std::collections::HashSet<usize> = h.nodes[p].vertices.iter().copied().collect();
            r.check(node.vertices.iter().all(|v| parent_set.contains(v)), GOOD_EMBED, Some(x), || "X not inside parent".into());
        }
        if let Some(flat) = &node.flat {
            r.check(flat.validate(g, None).is_ok(), GOOD_EMBED, Some(x), || "f0_X invalid in G".into());
        }

        if node.kind == NodeKind::GoodTerminal {
            let is_root_leaf = node.parent.is_none();
            r.check(is_root_leaf || m >= h.leaf_threshold, LEAF, Some(x), || format!("leaf of {m} below {}", h.leaf_threshold));
            r.check(node.best == node.vertices, BEST, Some(x), || "leaf best set differs from X".into());
            continue;
        }

        let t = node.parts.len();
        r.check(3 * t >= 2 * k && t <= k, PART_COUNT, Some(x), || format!("t={t}, k={k}"));
        let sets = h.part_sets(x);
        let sizes: Vec<usize> = sets.iter().map(|s| s.len()).collect();
        let mut all: Vec<usize> = sets.iter().flatten().copied().collect();
        all.sort_unstable();
        let mut xs = node.vertices.clone();
        xs.sort_unstable();
        r.check(all == xs, PART_PARTITION, Some(x), || "parts do not partition X".into());
        for (i, &s) in sizes.iter().enumerate() {
            r.check(3 * k * s >= m && k * s <= 6 * m, PART_WINDOW, Some(x), || format!("part {i} has {s} of |X|={m}, k={k}"));
        }
        if let (Some(&lo), Some(&hi)) = (sizes.iter().min(), sizes.iter().max()) {
            r.check(hi <= 3 * lo + 4, PART_TAU, Some(x), || format!("no tau for sizes {lo}..{hi}"));
        }
        for i in 0..t {
            let a = &h.nodes[node.parts[i].good].vertices;
            if i + 1 < t {
                let b = &h.nodes[node.parts[i + 1].good].vertices;
                let ok = match (a.iter().map(|&v| ids[v]).max(), b.iter().map(|&v| ids[v]).min()) {
                    (Some(p), Some(q)) => p <= q,
                    _ => true,
                };
                r.check(ok, PART_ORDER, Some(x), || format!("part {i} overlaps part {} in id order", i + 1));
            }
        }
        let mut covered = 0;
        let fm = node.matching_embedding.as_ref();
        for (i, part) in node.parts.iter().enumerate() {
            let gx = &h.nodes[part.good].vertices;
            let bx = &h.nodes[part.bad].vertices;
            covered += gx.len();
            r.check(bx.len() <= gx.len(), BAD_SIZE, Some(x), || format!("part {i}: |X'|={} > |X|={}", bx.len(), gx.len()));
            let g_set: std::collections::HashSet<usize> = gx.iter().copied().collect();
            let mut matched: HashMap<usize, usize> = HashMap::new();
            let mut targets: HashMap<usize, usize> = HashMap::new();
            for &(a, b) in &part.matching {
                *matched.entry(a).or_default() += 1;
                *targets.entry(b).or_default() += 1;
                r.check(g_set.contains(&b), BAD_MATCHING, Some(x), || format!("part {i}: {b} not in X_i"));
                let path_ok = fm.and_then(|e| e.path_between(a, b)).map(|p| PathSet::new(vec![p]).validate(hx).is_ok()).unwrap_or(false);
                r.check(path_ok, BAD_MATCHING, Some(x), || format!("part {i}: no valid path for ({a},{b})"));
            }
            r.check(
                bx.iter().all(|v| matched.get(v) == Some(&1)) && matched.len() == bx.len() && targets.values().all(|&c| c == 1),
                BAD_MATCHING,
                Some(x),
                || format!("part {i}: X'_i not saturated by an injective matching"),
            );
        }
        r.check(2 * covered >= m, GOOD_COVERAGE, Some(x), || format!("good coverage {covered} of {m}"));

        // best set recomputation
        let mut want: Vec<usize> = node.parts.iter().flat_map(|p| h.nodes[p.good].best.iter().copied()).collect();
        want.sort_by_key(|&v| ids[v]);
        r.check(node.best == want, BEST, Some(x), || "X_best differs from the union of the children".into());
        let counts: Vec<usize> = node.parts.iter().map(|p| h.nodes[p.good].best.len()).collect();
        r.check(node.part_best_counts == counts, BEST, Some(x), || "cached part best counts are stale".into());
    }

    let mut rho = BigRational::from_integer(BigInt::from(1));
    for &x in &good {
        let nd = &h.nodes[x];
        if !nd.best.is_empty() {
            let q = BigRational::new(BigInt::from(nd.vertices.len()), BigInt::from(nd.best.len()));
            if q > rho {
                rho = q;
            }
        } else {
            r.check(false, BEST, Some(x), || "good node with empty best set".into());
        }
    }
    r.check(rho == h.rho_best, RHO, None, || format!("recomputed {rho}, stored {}", h.rho_best));

    let mut by_level: Vec<Vec<Vec<usize>>> = Vec::new();
    for &x in &good {
        let l = h.nodes[x].level as usize;
        if by_level.len() <= l {
            by_level.resize(l + 1, Vec::new());
        }
        if let Some(f) = &h.nodes[x].flat {
            by_level[l].extend(f.paths.iter().cloned());
        }
    }
    for (l, paths) in by_level.into_iter().enumerate() {
        let ps = PathSet::new(paths);
        r.level_quality.push((l as u32, ps.congestion(), ps.dilation()));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{build_hierarchy, BuildParams};
    use crate::numeric::rat;

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

    fn built() -> (Graph, Hierarchy) {
        let g = ring_of_cliques(4, 8);
        let p = BuildParams { k: Some(2), leaf_threshold: Some(8), psi: rat(1, 16), holdout: 2, ..Default::default() };
        let h = build_hierarchy(&g, &p).unwrap();
        (g, h)
    }

    #[test]
    fn builder_output_is_clean() {
        let (g, h) = built();
        let r = validate_hierarchy(&h, &g);
        assert!(r.is_clean(), "{:?}", r.violations);
        assert!(r.checks > 20);
        assert!(!r.level_quality.is_empty());
    }

    #[test]
    fn dropped_matching_pair_is_caught() {
        let (g, mut h) = built();
        let Some((x, i)) = h.good_nodes().into_iter().find_map(|x| {
            h.nodes[x].parts.iter().position(|p| !p.matching.is_empty()).map(|i| (x, i))
        }) else {
            // no leftovers at all: inject via the root matching instead
            h.root_matching.pop();
            assert!(validate_hierarchy(&h, &g).has(ROOT_MATCHING));
            return;
        };
        h.nodes[x].parts[i].matching.pop();
        assert!(validate_hierarchy(&h, &g).has(BAD_MATCHING));
    }

    #[test]
    fn moved_vertex_breaks_ordering() {
        let (g, mut h) = built();
        let root = h.root;
        let a = h.nodes[root].parts[0].good;
        let b = h.nodes[root].parts[1].good;
        let v = h.nodes[a].vertices.remove(0);
        h.nodes[b].vertices.push(v);
        let r = validate_hierarchy(&h, &g);
        assert!(r.has(PART_ORDER), "{:?}", r.violations);
    }

    #[test]
    fn stale_rho_is_caught() {
        let (g, mut h) = built();
        h.rho_best = rat(7, 1);
        assert!(validate_hierarchy(&h, &g).has(RHO));
    }

    #[test]
    fn root_matching_removed_is_caught() {
        let (g, mut h) = built();
        h.root_matching.clear();
        assert!(validate_hierarchy(&h, &g).has(ROOT_MATCHING));
    }
}
