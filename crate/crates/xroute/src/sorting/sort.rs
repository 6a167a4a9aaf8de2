use super::engine::{Engine, Scope, ScopeData};
use super::trace::{ComparisonTrace, TraceEvent};
use super::{Key, SortError, Token, SYNTHETIC_TAG};

/// Tags of the internal pads of one sort; above every caller tag.
const PAD_TAG: i128 = SYNTHETIC_TAG * 4;

fn pad_tag(i: usize) -> i128 {
    PAD_TAG + i as i128
}

/// Sorts `u` by `(key, tag)`; with `dup`, marks all but the first of every key run.
fn settle(order: &[(Key, i128)], u: &mut [u32], dup: &mut Option<Vec<bool>>) {
    u.sort_unstable_by(|a, b| order[*a as usize].cmp(&order[*b as usize]));
    if let Some(d) = dup {
        for w in u.windows(2) {
            if order[w[0] as usize].0 == order[w[1] as usize].0 {
                d[w[1] as usize] = true;
            }
        }
    }
}

fn merge(order: &[(Key, i128)], a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if order[a[i] as usize] <= order[b[j] as usize] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl Engine {
    /// Modeled cost of one sort (or one revert) at load `l`.
    pub fn sort_cost(&self, sd: &ScopeData, l: usize) -> (u64, u64) {
        let l = l.max(1) as u64;
        let route = sd.route.as_ref().map(|r| (r.rounds, r.messages)).unwrap_or((0, 0));
        let p = sd.rho as u64 * l;
        let f = |a: u64, b: u64, c: u64| (2 * l).saturating_mul(a.saturating_add(b)).saturating_add(p.saturating_mul(c));
        (f(sd.attach_rounds, route.0, sd.network_rounds), f(sd.attach_messages, route.1, sd.network_messages))
    }

    fn charge_sort(&mut self, sd: &ScopeData, l: usize) {
        let l64 = l.max(1) as u64;
        let two = 2 * l64;
        self.charge("sort:hop", two.saturating_mul(sd.attach_rounds), two.saturating_mul(sd.attach_messages));
        if let Some(r) = &sd.route {
            self.charge("sort:route", two.saturating_mul(r.rounds), two.saturating_mul(r.messages));
        }
        let p = sd.rho as u64 * l64;
        self.charge("sort:network", p.saturating_mul(sd.network_rounds), p.saturating_mul(sd.network_messages));
    }

    /// Sorts `tokens` over `scope` so that key order follows identifier order,
    /// at most `l` per vertex. Ties break by tag.
    pub fn expander_sort(&mut self, scope: Scope, tokens: &mut [Token], l: usize) -> Result<ComparisonTrace, SortError> {
        self.sort_with(scope, tokens, l, false)
    }

    /// As `expander_sort`, marking every token compared against a same-key
    /// token of smaller tag as a duplicate.
    pub fn expander_sort_dedup(&mut self, scope: Scope, tokens: &mut [Token], l: usize) -> Result<ComparisonTrace, SortError> {
        self.sort_with(scope, tokens, l, true)
    }

    fn sort_with(&mut self, scope: Scope, tokens: &mut [Token], l: usize, dedup: bool) -> Result<ComparisonTrace, SortError> {
        let sd = self.scope(scope)?;
        let l = l.max(1);
        let nv = sd.vertices.len();
        let route = sd.route.as_ref().ok_or(SortError::NoScope(scope))?;
        let mut per_vertex: Vec<Vec<u32>> = vec![Vec::new(); nv];
        for (i, t) in tokens.iter().enumerate() {
            if !sd.contains(t.at) {
                return Err(SortError::OutsideScope { token: t.id, slot: t.at });
            }
            if t.key == Key::Top {
                return Err(SortError::Contract("key Top is reserved".into()));
            }
            per_vertex[sd.rank[t.at] as usize].push(i as u32);
        }
        for (r, v) in per_vertex.iter().enumerate() {
            if v.len() > l {
                return Err(SortError::Overload { vertex: self.graph.id(sd.vertices[r]), load: v.len(), cap: l });
            }
        }
        let real = tokens.len();
        let p = sd.rho * l;
        let nb = sd.best.len();
        let mut order: Vec<(Key, i128)> = tokens.iter().map(|t| (t.key, t.tag)).collect();
        let mut blocks: Vec<Vec<u32>> = vec![Vec::with_capacity(p); nb];
        for (r, v) in per_vertex.iter().enumerate() {
            let b = &mut blocks[route.target[r]];
            b.extend_from_slice(v);
            for _ in v.len()..l {
                b.push(order.len() as u32);
                order.push((Key::Top, pad_tag(order.len() - real)));
            }
        }
        for b in blocks.iter_mut() {
            while b.len() < p {
                b.push(order.len() as u32);
                order.push((Key::Top, pad_tag(order.len() - real)));
            }
        }
        let start = blocks.clone();
        let mut dup = dedup.then(|| vec![false; order.len()]);
        let mut events = Vec::with_capacity(nb + sd.network.comparators());
        for (i, b) in blocks.iter_mut().enumerate() {
            let before = b.clone();
            settle(&order, b, &mut dup);
            events.push(TraceEvent::Local { block: i as u32, before, after: b.clone() });
        }
        for (li, layer) in sd.network.layers.iter().enumerate() {
            for &(a, c) in layer {
                let mut u = merge(&order, &blocks[a], &blocks[c]);
                if let Some(d) = dup.as_mut() {
                    for w in u.windows(2) {
                        if order[w[0] as usize].0 == order[w[1] as usize].0 {
                            d[w[1] as usize] = true;
                        }
                    }
                }
                let high = u.split_off(p);
                let before_low = std::mem::replace(&mut blocks[a], u);
                let before_high = std::mem::replace(&mut blocks[c], high);
                events.push(TraceEvent::Merge {
                    layer: li as u32,
                    low: a as u32,
                    high: c as u32,
                    before_low,
                    before_high,
                    after_low: blocks[a].clone(),
                    after_high: blocks[c].clone(),
                });
            }
        }
        let initial_at: Vec<usize> = tokens.iter().map(|t| t.at).collect();
        for (b, blk) in blocks.iter().enumerate() {
            for (o, &z) in blk.iter().enumerate() {
                if (z as usize) < real {
                    let r = (b * p + o) / l;
                    tokens[z as usize].at = sd.vertices[r];
                }
            }
        }
        if let Some(d) = dup {
            for (t, &f) in tokens.iter_mut().zip(&d) {
                t.duplicate = f;
            }
        }
        self.charge_sort(&sd, l);
        self.stats.sorts += 1;
        self.check_cap()?;
        Ok(ComparisonTrace {
            block_size: p as u32,
            tokens: order.len() as u32,
            real: real as u32,
            start,
            events,
            initial_at,
            final_at: tokens.iter().map(|t| t.at).collect(),
        })
    }

    /// Sends every token back to where `trace` found it.
    pub fn revert(&mut self, scope: Scope, tokens: &mut [Token], trace: &ComparisonTrace, l: usize) -> Result<(), SortError> {
        let sd = self.scope(scope)?;
        if tokens.len() != trace.real as usize {
            return Err(SortError::Trace("token count differs from trace".into()));
        }
        for (t, (&a, &b)) in tokens.iter_mut().zip(trace.initial_at.iter().zip(&trace.final_at)) {
            if t.at != b {
                return Err(SortError::Trace(format!("token {} moved since the sort", t.id)));
            }
            t.at = a;
        }
        let (r, m) = self.sort_cost(&sd, l);
        self.charge("sort:revert", r, m);
        self.stats.reverts += 1;
        Ok(())
    }

    /// Reverts `trace`, applying the propagation rule on the way back: every
    /// token ends with the `value` of the smallest-tag token of its key.
    pub fn revert_propagate(&mut self, scope: Scope, tokens: &mut [Token], trace: &ComparisonTrace, l: usize) -> Result<(), SortError> {
        let n = trace.tokens as usize;
        let real = tokens.len();
        let mut keys = Vec::with_capacity(n);
        let mut tags = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for t in tokens.iter() {
            keys.push(t.key);
            tags.push(t.tag);
            values.push(t.value);
        }
        for i in real..n {
            keys.push(Key::Top);
            tags.push(pad_tag(i - real));
            values.push(0);
        }
        trace.propagate(&keys, &tags, &mut values);
        self.revert(scope, tokens, trace, l)?;
        for (t, v) in tokens.iter_mut().zip(values) {
            t.value = v;
        }
        Ok(())
    }

    /// `(key, tag)` of every token in `trace`, pads included.
    pub fn trace_order(tokens: &[Token], trace: &ComparisonTrace) -> Vec<(Key, i128)> {
        let real = tokens.len();
        let mut v: Vec<(Key, i128)> = tokens.iter().map(|t| (t.key, t.tag)).collect();
        for i in real..trace.tokens as usize {
            v.push((Key::Top, pad_tag(i - real)));
        }
        v
    }
}
