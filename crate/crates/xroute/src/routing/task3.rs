use std::collections::HashMap;
use std::sync::Arc;

use super::disperse::{DisperseReport, DummyDispersal};
use super::RouteError;
use crate::sorting::{max_load, Engine, Key, Scope, Token};

/// What one Task 3 call did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task3Report {
    pub node: usize,
    pub l: usize,
    /// Dummy multiplier that succeeded; dummies per vertex are `2·l·multiplier`.
    pub multiplier: usize,
    pub reals: DisperseReport,
    pub dummies: DisperseReport,
    /// `|T_{i,j}| ≤ |T'_{i,j}|` with the base `2L` dummies.
    pub dominated: bool,
    pub final_max_load: usize,
}

/// `|T_{i,j}| ≤ |T'_{i,j}|` for every part pair.
pub fn dominates(dummies: &DisperseReport, reals: &DisperseReport) -> bool {
    let (d, r) = (dummies.counts.last().unwrap(), reals.counts.last().unwrap());
    d.iter().zip(r).all(|(a, b)| a.iter().zip(b).all(|(x, y)| y <= x))
}

impl Engine {
    /// Moves every token into the part `X*_{part_mark}` of `x`; at most
    /// `2L·multiplier` per vertex afterwards.
    pub fn task3(&mut self, x: usize, tokens: &mut [Token], l: usize) -> Result<Task3Report, RouteError> {
        self.with_ctx("task3", |e| e.task3_inner(x, tokens, l))
    }

    fn task3_inner(&mut self, x: usize, tokens: &mut [Token], l: usize) -> Result<Task3Report, RouteError> {
        let l = l.max(1);
        let sched = self.schedule(x)?;
        let t = sched.t;
        let mut per_mark = vec![0usize; t];
        for z in tokens.iter() {
            if z.part_mark >= t {
                return Err(RouteError::PartOverload { part: z.part_mark, count: 1, cap: 0 });
            }
            per_mark[z.part_mark] += 1;
        }
        for (j, &c) in per_mark.iter().enumerate() {
            let cap = l * sched.part_sizes[j];
            if c > cap {
                return Err(RouteError::PartOverload { part: j, count: c, cap });
            }
        }
        self.stats.task3_calls += 1;
        let reals = self.with_ctx("disperse", |e| e.disperse(x, tokens))?;
        let mut c = 1;
        let mut base_dominated = None;
        loop {
            let d = self.dummy_dispersal(x, 2 * l * c)?;
            self.charge("dummy-disperse", d.rounds, d.messages);
            let dom = dominates(&d.report, &reals);
            base_dominated.get_or_insert(dom);
            if dom {
                self.merge(x, tokens, &d)?;
                let report = Task3Report {
                    node: x,
                    l,
                    multiplier: c,
                    reals,
                    dummies: d.report.clone(),
                    dominated: base_dominated.unwrap(),
                    final_max_load: max_load(tokens, self.slots()),
                };
                if self.params.keep_reports {
                    self.routing.reports.push(report.clone());
                }
                return Ok(report);
            }
            // every part learns of a shortfall within one broadcast
            let diam = self.diameter();
            self.charge("shortfall", diam, 0);
            if 2 * c > self.params.max_dummy_multiplier {
                return Err(RouteError::DummyShortfall { node: x, multiplier: c });
            }
            c *= 2;
            self.stats.dummy_retries += 1;
            self.check_cap()?;
        }
    }

    /// Task 3 reports kept since the last call (see `EngineParams::keep_reports`).
    pub fn take_task3_reports(&mut self) -> Vec<Task3Report> {
        std::mem::take(&mut self.routing.reports)
    }

    /// Diameter of the host graph, computed once.
    pub fn diameter(&mut self) -> u64 {
        if self.routing.diameter.is_none() {
            self.routing.diameter = Some(self.graph.diameter().unwrap_or(0) as u64);
        }
        self.routing.diameter.unwrap()
    }

    /// Pairs every real token with a dummy of its mark in the same part and
    /// sends it along the dummy's reversed itinerary.
    fn merge(&mut self, x: usize, tokens: &mut [Token], d: &Arc<DummyDispersal>) -> Result<(), RouteError> {
        let sched = self.schedule(x)?;
        let t = sched.t;
        let slots = self.slots();
        let mut reals_in: Vec<Vec<usize>> = vec![Vec::new(); t];
        for (k, z) in tokens.iter().enumerate() {
            reals_in[sched.part_of[z.at]].push(k);
        }
        let mut dummies_in: Vec<Vec<usize>> = vec![Vec::new(); t];
        for (k, z) in d.tokens.iter().enumerate() {
            dummies_in[sched.part_of[z.at]].push(k);
        }
        let homes = self.parallel(t, |e, i| {
            let scope = Scope::Part(x, i);
            let nr = reals_in[i].len();
            let mut all: Vec<Token> = reals_in[i]
                .iter()
                .map(|&k| tokens[k].clone())
                .chain(dummies_in[i].iter().map(|&k| d.tokens[k].clone()))
                .map(|mut z| {
                    z.key = Key::one(z.part_mark as i64);
                    z
                })
                .collect();
            let l = max_load(&all, slots);
            e.local_aggregation(scope, &mut all, l)?;
            let union: Vec<u64> = all.iter().map(|z| z.count).collect();
            let (rs, ds) = all.split_at_mut(nr);
            let lr = max_load(rs, slots);
            e.local_aggregation(scope, rs, lr)?;
            e.local_serialization(scope, rs, lr)?;
            let ld = max_load(ds, slots);
            e.local_aggregation(scope, ds, ld)?;
            e.local_serialization(scope, ds, ld)?;
            for (k, z) in ds.iter().enumerate() {
                // real tokens of this mark here, learned by dummies
                let n = union[nr + k] - z.count;
                if n > z.count {
                    return Err(RouteError::DummyShortfall { node: x, multiplier: d.per_vertex });
                }
            }
            let mut pair: Vec<Token> = Vec::with_capacity(2 * nr);
            for z in rs.iter() {
                pair.push(Token { key: Key::pair(z.part_mark as i64, 2 * z.serial as i64 + 1), ..z.clone() });
            }
            let mut chosen = Vec::new();
            for (k, z) in ds.iter().enumerate() {
                let n = union[nr + k] - z.count;
                if z.serial < n {
                    chosen.push(dummies_in[i][k]);
                    pair.push(Token { key: Key::pair(z.part_mark as i64, 2 * z.serial as i64 + 2), ..z.clone() });
                }
            }
            let mut l = max_load(&pair, slots).max(1);
            l += l % 2;
            e.expander_sort(scope, &mut pair, l)?;
            let by_key: HashMap<Key, usize> = pair[nr..].iter().enumerate().map(|(a, z)| (z.key, a)).collect();
            let mut out = Vec::with_capacity(nr);
            for z in &pair[..nr] {
                let Key::Fin(j, s, _) = z.key else { unreachable!() };
                let a = by_key.get(&Key::pair(j, s + 1)).copied().ok_or(RouteError::DummyShortfall { node: x, multiplier: d.per_vertex })?;
                if pair[nr + a].at != z.at {
                    return Err(RouteError::Prepare(format!("token {} split from its dummy", z.id)));
                }
                out.push(d.homes[chosen[a]]);
            }
            // reals ride the dummies' reversed sort
            let sd = e.scope(scope)?;
            let (r, m) = e.sort_cost(&sd, l);
            e.charge("sort:revert", r, m);
            Ok(out)
        })?;
        self.charge("dummy-replay", d.rounds, d.messages);
        for (i, hs) in homes.into_iter().enumerate() {
            for (&k, h) in reals_in[i].iter().zip(hs) {
                tokens[k].at = h;
            }
        }
        Ok(())
    }
}
