use std::collections::HashMap;
use std::sync::Arc;

use super::RouteError;
use crate::sorting::{loads, max_load, Engine, Key, Scope, Token};

/// Precomputed all-to-best routes: every vertex `v` is served by
/// `best[rank(v) mod |best|]`, which reaches it along a stored route.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delegation {
    /// Best vertices of the root in identifier order.
    pub best: Vec<usize>,
    /// Identifier rank of every slot of `V`.
    pub vertex_rank: Vec<u32>,
    /// Cost of one token per vertex along the routes.
    pub rounds: u64,
    pub messages: u64,
}

impl Delegation {
    pub fn server(&self, v: usize) -> usize {
        self.best[self.vertex_rank[v] as usize % self.best.len()]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task1Report {
    pub tokens: usize,
    pub l: usize,
    /// Load parameter handed to Task 2.
    pub l_task2: usize,
    pub rounds: u64,
    pub messages: u64,
    pub final_max_load: usize,
}

impl Engine {
    pub fn delegation(&self) -> Result<Arc<Delegation>, RouteError> {
        self.routing.delegation.clone().ok_or_else(|| RouteError::Prepare("no delegation routes".into()))
    }

    /// Tokens on `V∖W` step onto `W` along the root matching.
    pub(crate) fn hop_to_root(&mut self, tokens: &mut [Token]) {
        let h = &self.hierarchy;
        if h.root_matching.is_empty() {
            return;
        }
        let idx: HashMap<usize, usize> = h.root_matching.iter().enumerate().map(|(k, &(a, _))| (a, k)).collect();
        let mut counts = vec![0u64; h.root_matching.len()];
        for z in tokens.iter_mut() {
            if let Some(&k) = idx.get(&z.at) {
                z.at = h.root_matching[k].1;
                counts[k] += 1;
            }
        }
        let paths: Vec<Vec<usize>> = h
            .root_matching
            .iter()
            .map(|&(a, b)| h.root_matching_embedding.path_between(a, b).unwrap_or_else(|| vec![a, b]))
            .collect();
        let refs: Vec<&[usize]> = paths.iter().map(|p| p.as_slice()).collect();
        let (r, m) = self.weighted_batch_cost(None, &refs, &counts);
        self.charge("hop", r, m);
    }

    /// Routes every token to the vertex with identifier `dst`.
    pub fn task1(&mut self, tokens: &mut [Token], l: usize) -> Result<Task1Report, RouteError> {
        let l = l.max(1);
        let slots = self.slots();
        for (v, &c) in loads(tokens, slots).iter().enumerate() {
            if c > l {
                return Err(RouteError::SourceOverload { vertex: self.graph.id(v), load: c, cap: l });
            }
        }
        let mut per_dst: HashMap<u64, usize> = HashMap::new();
        let mut dst_slot = Vec::with_capacity(tokens.len());
        for z in tokens.iter() {
            let s = self.graph.slot_of(z.dst).ok_or(RouteError::UnknownDestination(z.dst))?;
            dst_slot.push(s);
            *per_dst.entry(z.dst).or_default() += 1;
        }
        if let Some((&d, &c)) = per_dst.iter().filter(|(_, &c)| c > l).min_by_key(|(&d, _)| d) {
            return Err(RouteError::DestinationOverload { dst: d, count: c, cap: l });
        }
        let deleg = self.delegation()?;
        let (r, rounds, messages) = self.measure(|e| {
            e.with_ctx("task1", |e| {
                // translate destination ids to ranks
                let n = tokens.len();
                let mut work: Vec<Token> = tokens.iter().map(|z| Token { key: Key::one(z.dst as i64), ..z.clone() }).collect();
                for v in e.graph.members().to_vec() {
                    let tag = e.fresh_tag();
                    work.push(Token { id: u64::MAX, key: Key::one(e.graph.id(v) as i64), tag, at: v, dummy: true, ..Default::default() });
                }
                e.token_ranking(Scope::Whole, &mut work, l + 1)?;
                let nb = deleg.best.len();
                for (z, w) in tokens.iter_mut().zip(&work[..n]) {
                    z.dest_mark = w.rank as usize % nb;
                }
                e.hop_to_root(tokens);
                let mut per = vec![0usize; nb];
                for z in tokens.iter() {
                    per[z.dest_mark] += 1;
                }
                let rb = e.rho_best_ceil();
                let l2 = max_load(tokens, slots).max(l).max(per.iter().map(|&c| c.div_ceil(rb)).max().unwrap_or(0));
                let root = e.hierarchy.root;
                e.task2(root, tokens, l2)?;
                for (z, &s) in tokens.iter().zip(&dst_slot) {
                    if z.at != deleg.server(s) {
                        return Err(RouteError::Undelivered { token: z.id, at: e.graph.id(z.at), want: e.graph.id(deleg.server(s)) });
                    }
                }
                let ll = l as u64;
                e.charge("deliver", ll.saturating_mul(deleg.rounds), ll.saturating_mul(deleg.messages));
                for (z, &s) in tokens.iter_mut().zip(&dst_slot) {
                    z.at = s;
                }
                Ok::<_, RouteError>(l2)
            })
        });
        let l2 = r?;
        self.check_cap()?;
        Ok(Task1Report { tokens: tokens.len(), l, l_task2: l2, rounds, messages, final_max_load: max_load(tokens, slots) })
    }
}
