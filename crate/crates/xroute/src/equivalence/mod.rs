//! Each of sorting and routing reduced to the other.

use std::collections::{HashMap, VecDeque};

use crate::routing::RouteError;
use crate::sorting::{max_load, ComparatorNetwork, Engine, Key, Scope, Token, SYNTHETIC_TAG};

/// Tags of padding tokens added by the reductions.
const PAD_TAG: i128 = SYNTHETIC_TAG * 3;

/// Sorts issued by one comparison-based `route_via_sort`.
pub const ROUTE_VIA_SORT_CALLS: u64 = 6;

/// Constant `c` of the dedup iteration bound `⌈c·log_{L+1} n⌉`.
pub const DEDUP_C: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SortMode {
    /// Propagation by chain of comparisons.
    Comparison,
    /// The sort is a black box; duplicates are removed by repeated sorting.
    BlackBox,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReductionBudget {
    /// Calls to the opposite primitive.
    pub calls: u64,
    /// Load handed to each call.
    pub load: usize,
    /// Rounds outside those calls.
    pub aux_rounds: u64,
    /// Comparator layers simulated (sort via route).
    pub layers: usize,
    /// Calls spent on vertex ranks (sort via route).
    pub rank_calls: u64,
    /// Largest number of dedup sorts in one propagation (black-box mode).
    pub dedup_iterations: u64,
}

/// `⌈c·log_{L+1} n⌉` computed exactly.
pub fn dedup_bound(n: usize, l: usize) -> u64 {
    let (b, mut p, mut m) = ((l + 1) as u128, 1u128, 0u64);
    while p < n as u128 {
        p *= b;
        m += 1;
    }
    DEDUP_C * m.max(1)
}

/// Vertices in pre-order of the BFS tree from the smallest identifier.
pub fn bfs_order(e: &Engine) -> Vec<usize> {
    let g = &e.graph;
    let root = g.by_id_order(g.members())[0];
    let mut seen = vec![false; g.slots()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); g.slots()];
    let mut q = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = q.pop_front() {
        for &w in g.by_id_order(g.neighbors(u)).iter() {
            if !seen[w] {
                seen[w] = true;
                children[u].push(w);
                q.push_back(w);
            }
        }
    }
    let mut out = Vec::with_capacity(g.n());
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        out.push(u);
        stack.extend(children[u].iter().rev());
    }
    out
}

/// Runs the merge-split network over `order`, each position holding exactly
/// `l` tokens, with two routing calls per layer.
fn simulate_network<R>(e: &mut Engine, order: &[usize], tokens: &mut [Token], l: usize, route: &mut R) -> Result<(usize, u64), RouteError>
where
    R: FnMut(&mut Engine, &mut [Token], usize) -> Result<(), RouteError>,
{
    let net = ComparatorNetwork::batcher(order.len());
    let mut pos = vec![usize::MAX; e.slots()];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut calls = 0;
    for layer in &net.layers {
        let mut partner = vec![usize::MAX; order.len()];
        for &(a, b) in layer {
            partner[b] = a;
        }
        let movers: Vec<(usize, usize)> =
            (0..tokens.len()).filter(|&k| partner[pos[tokens[k].at]] != usize::MAX).map(|k| (k, order[partner[pos[tokens[k].at]]])).collect();
        route_subset(e, tokens, &movers, route)?;
        calls += 1;
        let mut held: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, z) in tokens.iter().enumerate() {
            held.entry(pos[z.at]).or_default().push(k);
        }
        let mut back = Vec::new();
        for &(a, b) in layer {
            let mut here = held.remove(&a).unwrap_or_default();
            here.sort_by_key(|&k| (tokens[k].key, tokens[k].tag));
            back.extend(here[l.min(here.len())..].iter().map(|&k| (k, order[b])));
        }
        route_subset(e, tokens, &back, route)?;
        calls += 1;
    }
    Ok((net.depth(), calls))
}

/// Routes each `tokens[k]` of `moves` to slot `to`, all other tokens staying put.
fn route_subset<R>(e: &mut Engine, tokens: &mut [Token], moves: &[(usize, usize)], route: &mut R) -> Result<(), RouteError>
where
    R: FnMut(&mut Engine, &mut [Token], usize) -> Result<(), RouteError>,
{
    let mut sub: Vec<Token> =
        moves.iter().map(|&(k, to)| Token { id: k as u64, tag: k as i128, at: tokens[k].at, dst: e.graph.id(to), ..Default::default() }).collect();
    let l = max_load(&sub, e.slots()).max(1);
    route(e, &mut sub, l)?;
    for (s, &(k, _)) in sub.iter().zip(moves) {
        tokens[k].at = s.at;
    }
    Ok(())
}

/// Sorting from routing. `route` must deliver every token to `dst`.
pub fn sort_via_route<R>(e: &mut Engine, tokens: &mut [Token], l: usize, mut route: R) -> Result<ReductionBudget, RouteError>
where
    R: FnMut(&mut Engine, &mut [Token], usize) -> Result<(), RouteError>,
{
    let l = l.max(1);
    let slots = e.slots();
    if let Some(v) = crate::sorting::loads(tokens, slots).iter().position(|&c| c > l) {
        return Err(RouteError::SourceOverload { vertex: e.graph.id(v), load: crate::sorting::loads(tokens, slots)[v], cap: l });
    }
    let d = e.diameter();
    e.charge("equiv:bfs-order", 2 * d, 2 * e.graph.n() as u64);

    // vertex ranks: sort one token per vertex keyed by its id over the BFS order
    let bfs = bfs_order(e);
    let mut probes: Vec<Token> = bfs.iter().enumerate().map(|(k, &v)| Token { id: k as u64, key: Key::one(e.graph.id(v) as i64), tag: k as i128, at: v, ..Default::default() }).collect();
    let (_, mut rank_calls) = simulate_network(e, &bfs, &mut probes, 1, &mut route)?;
    let mut rank = vec![0usize; slots];
    for (p, &u) in bfs.iter().enumerate() {
        rank[u] = p;
    }
    // the probe at BFS position p came from the vertex of rank p; send it home
    let vrank: Vec<usize> = probes.iter().map(|z| rank[z.at]).collect();
    let home: Vec<(usize, usize)> = bfs.iter().copied().enumerate().collect();
    route_subset(e, &mut probes, &home, &mut route)?;
    rank_calls += 1;
    let mut order = vec![0usize; bfs.len()];
    for (z, &r) in probes.iter().zip(&vrank) {
        order[r] = z.at;
    }

    let real = tokens.len();
    let mut all: Vec<Token> = tokens.iter().enumerate().map(|(k, z)| Token { id: k as u64, ..z.clone() }).collect();
    let mut per = crate::sorting::loads(&all, slots);
    for &v in &order {
        while per[v] < l {
            let k = all.len();
            all.push(Token { id: k as u64, key: Key::PosInf, tag: PAD_TAG + k as i128, at: v, dummy: true, ..Default::default() });
            per[v] += 1;
        }
    }
    let (layers, calls) = simulate_network(e, &order, &mut all, l, &mut route)?;
    for (z, a) in tokens.iter_mut().zip(&all[..real]) {
        z.at = a.at;
    }
    Ok(ReductionBudget { calls, load: l, aux_rounds: 2 * d, layers, rank_calls, dedup_iterations: 0 })
}

type Removal = Vec<(usize, usize)>;

/// One black-box sort of the `alive` tokens; every vertex keeps the
/// smallest-tag token of each key. With `neg`, a `-inf` token is added first.
fn dedup_pass(e: &mut Engine, tokens: &[Token], alive: &[usize], l: usize, neg: Option<i128>) -> Result<(Removal, Vec<usize>), RouteError> {
    let mut sub: Vec<Token> = alive.iter().map(|&k| tokens[k].clone()).collect();
    if let Some(tag) = neg {
        let loads = crate::sorting::loads(&sub, e.slots());
        let sd = e.scope(Scope::Whole)?;
        let at = sd.vertices.iter().copied().find(|&v| loads[v] < l).ok_or_else(|| RouteError::Prepare("no room for the -inf token".into()))?;
        sub.push(Token { id: u64::MAX, key: Key::NegInf, tag, at, dummy: true, ..Default::default() });
    }
    let tr = e.expander_sort(Scope::Whole, &mut sub, l)?;
    let mut keep: HashMap<(usize, Key), usize> = HashMap::new();
    for (i, z) in sub.iter().enumerate().take(alive.len()) {
        let w = keep.entry((z.at, z.key)).or_insert(i);
        if sub[*w].tag > z.tag {
            *w = i;
        }
    }
    let mut removed = Vec::new();
    let mut next = Vec::new();
    for (i, z) in sub.iter().enumerate().take(alive.len()) {
        let w = keep[&(z.at, z.key)];
        if w == i {
            next.push(alive[i]);
        } else {
            removed.push((alive[i], alive[w]));
        }
    }
    // values later travel back along this sort
    e.revert(Scope::Whole, &mut sub, &tr, l)?;
    Ok((removed, next))
}

/// Serials, counts and propagation over `Whole`, by either sort mode.
struct Toolkit {
    mode: SortMode,
    dedup_iterations: u64,
}

impl Toolkit {
    fn positions(&mut self, e: &mut Engine, tokens: &mut [Token], l: usize) -> Result<Vec<u64>, RouteError> {
        let sd = e.scope(Scope::Whole)?;
        let tr = e.expander_sort(Scope::Whole, tokens, l)?;
        let mut by: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, z) in tokens.iter().enumerate() {
            by.entry(z.at).or_default().push(k);
        }
        let mut pos = vec![0u64; tokens.len()];
        for (v, mut ks) in by {
            ks.sort_by_key(|&k| (tokens[k].key, tokens[k].tag));
            for (o, k) in ks.into_iter().enumerate() {
                pos[k] = (sd.rank[v] as usize * l + o) as u64;
            }
        }
        e.revert(Scope::Whole, tokens, &tr, l)?;
        Ok(pos)
    }

    /// Every token takes the `value` of the smallest-tag token of its key.
    fn propagate(&mut self, e: &mut Engine, tokens: &mut [Token], l: usize) -> Result<(), RouteError> {
        match self.mode {
            SortMode::Comparison => Ok(e.local_propagation(Scope::Whole, tokens, l)?),
            SortMode::BlackBox => self.propagate_blackbox(e, tokens, l.max(2)),
        }
    }

    /// Repeated sorting with per-vertex marking; values flow back in reverse.
    fn propagate_blackbox(&mut self, e: &mut Engine, tokens: &mut [Token], l: usize) -> Result<(), RouteError> {
        let mut alive: Vec<usize> = (0..tokens.len()).collect();
        // per sort: (removed token, token kept in its place), the sorted copy, its trace, its load
        let mut steps = Vec::new();
        let diam = e.diameter();
        loop {
            let (removed, next) = dedup_pass(e, tokens, &alive, l, None)?;
            steps.push(removed);
            alive = next;
            e.charge("equiv:dedup-check", diam, 0);
            let mut per: HashMap<Key, usize> = HashMap::new();
            for &k in &alive {
                *per.entry(tokens[k].key).or_default() += 1;
            }
            if per.values().all(|&c| c <= 2) {
                break;
            }
        }
        // two survivors of a key sit next to each other in sorted order; if
        // they straddle a vertex boundary, one -inf token shifts them together
        let (mut removed, _) = dedup_pass(e, tokens, &alive, l, None)?;
        let t = e.fresh_tag();
        let (shifted, _) = dedup_pass(e, tokens, &alive, l, Some(t))?;
        let gone: std::collections::HashSet<usize> = removed.iter().map(|r| r.0).collect();
        removed.extend(shifted.into_iter().filter(|r| !gone.contains(&r.0)));
        let gone: std::collections::HashSet<usize> = removed.iter().map(|r| r.0).collect();
        alive.retain(|k| !gone.contains(k));
        steps.push(removed);
        let mut seen = std::collections::HashSet::new();
        if !alive.iter().all(|&k| seen.insert(tokens[k].key)) {
            return Err(RouteError::Prepare("dedup left two survivors of one key".into()));
        }
        // loop sorts plus the plain and the shifted pass
        self.dedup_iterations = self.dedup_iterations.max(steps.len() as u64 + 1);
        while let Some(removed) = steps.pop() {
            for (r, w) in removed {
                tokens[r].value = tokens[w].value;
            }
        }
        Ok(())
    }

    fn serialize(&mut self, e: &mut Engine, tokens: &mut [Token], l: usize) -> Result<(), RouteError> {
        let saved: Vec<i64> = tokens.iter().map(|z| z.value).collect();
        let pos = self.positions(e, tokens, l)?;
        for (z, &p) in tokens.iter_mut().zip(&pos) {
            z.value = p as i64;
        }
        self.propagate(e, tokens, l)?;
        for ((z, &p), v) in tokens.iter_mut().zip(&pos).zip(saved) {
            z.serial = p - z.value as u64;
            z.value = v;
        }
        Ok(())
    }

    fn aggregate(&mut self, e: &mut Engine, tokens: &mut [Token], l: usize) -> Result<(), RouteError> {
        let saved: Vec<i64> = tokens.iter().map(|z| z.value).collect();
        let up = self.positions(e, tokens, l)?;
        for z in tokens.iter_mut() {
            z.tag = -z.tag;
        }
        let down = self.positions(e, tokens, l);
        for z in tokens.iter_mut() {
            z.tag = -z.tag;
        }
        let down = down?;
        for (z, (&a, &b)) in tokens.iter_mut().zip(up.iter().zip(&down)) {
            z.value = b as i64 - a as i64 + 1;
        }
        self.propagate(e, tokens, l)?;
        for (z, v) in tokens.iter_mut().zip(saved) {
            z.count = z.value as u64;
            z.value = v;
        }
        Ok(())
    }
}

/// Routing from sorting: count, generate dummies, interleave, sort at `2L`, pair.
pub fn route_via_sort(e: &mut Engine, tokens: &mut [Token], l: usize, mode: SortMode) -> Result<ReductionBudget, RouteError> {
    let l = l.max(1);
    let slots = e.slots();
    let loads = crate::sorting::loads(tokens, slots);
    if let Some(v) = loads.iter().position(|&c| c > l) {
        return Err(RouteError::SourceOverload { vertex: e.graph.id(v), load: loads[v], cap: l });
    }
    let mut per: HashMap<u64, usize> = HashMap::new();
    let mut dst_slot = Vec::with_capacity(tokens.len());
    for z in tokens.iter() {
        dst_slot.push(e.graph.slot_of(z.dst).ok_or(RouteError::UnknownDestination(z.dst))?);
        *per.entry(z.dst).or_default() += 1;
    }
    if let Some((&d, &c)) = per.iter().filter(|(_, &c)| c > l).min_by_key(|(&d, _)| d) {
        return Err(RouteError::DestinationOverload { dst: d, count: c, cap: l });
    }
    let sorts0 = e.stats.sorts;
    let mut kit = Toolkit { mode, dedup_iterations: 0 };
    let n = tokens.len();
    let r = e.with_ctx("route-via-sort", |e| {
        let mut work: Vec<Token> = tokens.iter().enumerate().map(|(k, z)| Token { key: Key::one(z.dst as i64), tag: k as i128, ..z.clone() }).collect();
        kit.serialize(e, &mut work, 2 * l)?;
        let members = e.graph.by_id_order(e.graph.members());
        for &v in &members {
            let tag = e.fresh_tag();
            work.push(Token { id: u64::MAX, key: Key::one(e.graph.id(v) as i64), tag, at: v, dummy: true, ..Default::default() });
        }
        kit.aggregate(e, &mut work, 2 * l)?;
        let mut pair: Vec<Token> = work[..n].iter().map(|z| Token { key: Key::pair(z.dst as i64, 2 * z.serial as i64 + 1), ..z.clone() }).collect();
        for (k, &v) in members.iter().enumerate() {
            let id = e.graph.id(v) as i64;
            for a in 0..work[n + k].count - 1 {
                let tag = e.fresh_tag();
                pair.push(Token { id: u64::MAX, key: Key::pair(id, 2 * a as i64 + 2), tag, at: v, dummy: true, ..Default::default() });
            }
        }
        let tr = e.expander_sort(Scope::Whole, &mut pair, 2 * l)?;
        let by_key: HashMap<Key, usize> = (n..pair.len()).map(|k| (pair[k].key, k)).collect();
        for (k, z) in tokens.iter_mut().enumerate() {
            let Key::Fin(d, s, _) = pair[k].key else { unreachable!() };
            let m = by_key[&Key::pair(d, s + 1)];
            if pair[m].at != pair[k].at {
                return Err(RouteError::Prepare(format!("token {} split from its dummy", z.id)));
            }
            z.at = tr.initial_at[m];
        }
        let sd = e.scope(Scope::Whole)?;
        let (r, m) = e.sort_cost(&sd, 2 * l);
        e.charge("sort:revert", r, m);
        Ok::<_, RouteError>(())
    });
    r?;
    for (z, &s) in tokens.iter().zip(&dst_slot) {
        if z.at != s {
            return Err(RouteError::Undelivered { token: z.id, at: e.graph.id(z.at), want: z.dst });
        }
    }
    Ok(ReductionBudget { calls: e.stats.sorts - sorts0, load: 2 * l, aux_rounds: 0, layers: 0, rank_calls: 0, dedup_iterations: kit.dedup_iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_bound_small_values() {
        // 3 · ⌈log_{L+1} n⌉, never below 3
        assert_eq!(dedup_bound(1, 1), 3);
        assert_eq!(dedup_bound(2, 1), 3);
        assert_eq!(dedup_bound(64, 1), 18);
        assert_eq!(dedup_bound(64, 3), 9);
        assert_eq!(dedup_bound(65, 3), 12);
        assert_eq!(dedup_bound(1 << 20, 1023), 6);
    }
}
