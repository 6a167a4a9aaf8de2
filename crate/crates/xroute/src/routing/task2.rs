use std::collections::HashMap;

use num_integer::Integer;
use num_traits::ToPrimitive;

use super::RouteError;
use crate::decomposition::NodeKind;
use crate::sorting::{max_load, Engine, Key, Scope, SortError, Token};

impl Engine {
    /// `⌈ρ_best⌉`.
    pub fn rho_best_ceil(&self) -> usize {
        let r = &self.hierarchy.rho_best;
        r.numer().div_ceil(r.denom()).to_usize().unwrap_or(usize::MAX).max(1)
    }

    /// Sends every token of `X` to `best[dest_mark]` of node `x`.
    pub fn task2(&mut self, x: usize, tokens: &mut [Token], l: usize) -> Result<(), RouteError> {
        let node = &self.hierarchy.nodes[x];
        if !node.is_good() {
            return Err(RouteError::NotInternal(x));
        }
        let l = l.max(1);
        let nb = node.best.len();
        let cap = l * self.rho_best_ceil();
        let mut inside = vec![false; self.slots()];
        for &v in &node.vertices {
            inside[v] = true;
        }
        let mut per = vec![0usize; nb];
        for z in tokens.iter() {
            if z.dest_mark >= nb {
                return Err(RouteError::MarkerOverload { marker: z.dest_mark, count: 1, cap: 0 });
            }
            if !inside[z.at] {
                return Err(SortError::OutsideScope { token: z.id, slot: z.at }.into());
            }
            per[z.dest_mark] += 1;
        }
        if let Some((m, &c)) = per.iter().enumerate().find(|(_, &c)| c > cap) {
            return Err(RouteError::MarkerOverload { marker: m, count: c, cap });
        }
        let saved: Vec<usize> = tokens.iter().map(|z| z.dest_mark).collect();
        let r = self.with_ctx("task2", |e| e.task2_rec(x, tokens, l));
        for (z, m) in tokens.iter_mut().zip(saved) {
            z.dest_mark = m;
        }
        r
    }

    fn task2_rec(&mut self, x: usize, tokens: &mut [Token], l: usize) -> Result<(), RouteError> {
        if self.hierarchy.nodes[x].kind == NodeKind::GoodTerminal {
            return self.leaf_route(x, tokens, l);
        }
        if tokens.is_empty() {
            return Ok(());
        }
        let h = &self.hierarchy;
        let node = &h.nodes[x];
        let part_of = h.part_of(x);
        let sets = h.part_sets(x);
        let index: Vec<HashMap<usize, usize>> = node.parts.iter().map(|p| h.nodes[p.good].best.iter().enumerate().map(|(i, &v)| (v, i)).collect()).collect();
        for z in tokens.iter_mut() {
            let b = node.best[z.dest_mark];
            let j = part_of[b];
            z.part_mark = j;
            z.dest_mark = index[j][&b];
        }
        let mut need = vec![0usize; sets.len()];
        for z in tokens.iter() {
            need[z.part_mark] += 1;
        }
        let l3 = need.iter().zip(&sets).map(|(&n, s)| n.div_ceil(s.len())).max().unwrap_or(0).max(l);
        self.task3(x, tokens, l3)?;
        self.hop_to_good(x, tokens)?;

        let t = sets.len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); t];
        for (k, z) in tokens.iter().enumerate() {
            members[part_of[z.at]].push(k);
        }
        let children: Vec<usize> = self.hierarchy.nodes[x].parts.iter().map(|p| p.good).collect();
        let slots = self.slots();
        let out = self.parallel(t, |e, j| {
            let mut sub: Vec<Token> = members[j].iter().map(|&k| tokens[k].clone()).collect();
            let lc = l.max(max_load(&sub, slots));
            e.task2_rec(children[j], &mut sub, lc)?;
            Ok::<_, RouteError>(sub.into_iter().map(|z| z.at).collect::<Vec<_>>())
        })?;
        for (j, ats) in out.into_iter().enumerate() {
            for (&k, a) in members[j].iter().zip(ats) {
                tokens[k].at = a;
            }
        }
        Ok(())
    }

    /// Moves tokens on `X'_j` to their matched vertices of `X_j`.
    fn hop_to_good(&mut self, x: usize, tokens: &mut [Token]) -> Result<(), RouteError> {
        let node = &self.hierarchy.nodes[x];
        let mut partner: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut paths: Vec<Vec<usize>> = Vec::new();
        for p in &node.parts {
            for &(b, g) in &p.matching {
                partner.insert(b, (g, paths.len()));
                let path = node.matching_embedding.as_ref().and_then(|m| m.path_between(b, g)).unwrap_or_else(|| vec![b, g]);
                paths.push(path);
            }
            for &v in &self.hierarchy.nodes[p.bad].vertices {
                if !partner.contains_key(&v) {
                    return Err(RouteError::Prepare(format!("bad vertex {} of node {x} is unmatched", self.graph.id(v))));
                }
            }
        }
        let mut counts = vec![0u64; paths.len()];
        for z in tokens.iter_mut() {
            if let Some(&(g, k)) = partner.get(&z.at) {
                z.at = g;
                counts[k] += 1;
            }
        }
        let refs: Vec<&[usize]> = paths.iter().map(|p| p.as_slice()).collect();
        let (r, m) = self.weighted_batch_cost(Some(x), &refs, &counts);
        self.charge("hop", r, m);
        Ok(())
    }

    /// The leaf case: the whole of `H_X` is known, so three sorts suffice.
    pub fn leaf_route(&mut self, x: usize, tokens: &mut [Token], l: usize) -> Result<(), RouteError> {
        let scope = Scope::Node(x);
        let best = self.hierarchy.nodes[x].best.clone();
        let slots = self.slots();
        for z in tokens.iter() {
            if z.dest_mark >= best.len() {
                return Err(RouteError::MarkerOverload { marker: z.dest_mark, count: 1, cap: 0 });
            }
        }
        self.stats.leaf_calls += 1;
        if tokens.is_empty() {
            return Ok(());
        }
        let l = l.max(max_load(tokens, slots)).max(1);
        let mut work: Vec<Token> = tokens.iter().map(|z| Token { key: Key::one(z.dest_mark as i64), ..z.clone() }).collect();
        self.local_serialization(scope, &mut work, l)?;

        let n = work.len();
        for (r, &v) in best.iter().enumerate() {
            let tag = self.fresh_tag();
            work.push(Token { id: u64::MAX, key: Key::one(r as i64), tag, at: v, dummy: true, ..Default::default() });
        }
        self.local_aggregation(scope, &mut work, l + 1)?;

        let mut pair: Vec<Token> = work[..n].iter().map(|z| Token { key: Key::pair(z.key_a(), 2 * z.serial as i64 + 1), ..z.clone() }).collect();
        for r in 0..best.len() {
            let a = work[n + r].count - 1;
            for s in 0..a {
                let tag = self.fresh_tag();
                pair.push(Token { id: u64::MAX, key: Key::pair(r as i64, 2 * s as i64 + 2), tag, at: best[r], dummy: true, ..Default::default() });
            }
        }
        if pair.len() != 2 * n {
            return Err(RouteError::Prepare(format!("leaf {x}: {} dummies for {n} tokens", pair.len() - n)));
        }
        let mut lp = max_load(&pair, slots).max(1);
        lp += lp % 2;
        let tr = self.expander_sort(scope, &mut pair, lp)?;
        let by_key: HashMap<Key, usize> = (n..pair.len()).map(|k| (pair[k].key, k)).collect();
        for (k, z) in tokens.iter_mut().enumerate() {
            let Key::Fin(r, s, _) = pair[k].key else { unreachable!() };
            let d = by_key[&Key::pair(r, s + 1)];
            if pair[d].at != pair[k].at {
                return Err(RouteError::Prepare(format!("token {} split from its dummy", z.id)));
            }
            z.at = tr.initial_at[d];
        }
        let sd = self.scope(scope)?;
        let (r, m) = self.sort_cost(&sd, lp);
        self.charge("sort:revert", r, m);
        Ok(())
    }
}

impl Token {
    fn key_a(&self) -> i64 {
        match self.key {
            Key::Fin(a, _, _) => a,
            _ => 0,
        }
    }
}
