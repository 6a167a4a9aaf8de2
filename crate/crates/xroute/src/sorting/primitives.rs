use super::engine::{Engine, Scope, ScopeData};
use super::{Key, SortError, Token};

/// Sorted position of every token after a sort at load `l`: vertex rank times
/// `l` plus the local index. Each vertex computes this from its own tokens.
fn positions(sd: &ScopeData, tokens: &[Token], l: usize) -> Vec<u64> {
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); sd.vertices.len()];
    for (i, t) in tokens.iter().enumerate() {
        by_vertex[sd.rank[t.at] as usize].push(i);
    }
    let mut pos = vec![0u64; tokens.len()];
    for (r, v) in by_vertex.iter_mut().enumerate() {
        v.sort_by_key(|&i| (tokens[i].key, tokens[i].tag));
        for (o, &i) in v.iter().enumerate() {
            pos[i] = (r * l + o) as u64;
        }
    }
    pos
}

impl Engine {
    /// Every token learns `r_z`, the number of distinct keys below its own.
    pub fn token_ranking(&mut self, scope: Scope, tokens: &mut [Token], l: usize) -> Result<(), SortError> {
        let sd = self.scope(scope)?;
        let l = l.max(1);
        let mut work: Vec<Token> = tokens.to_vec();
        let mut cnt = vec![0usize; sd.vertices.len()];
        for t in &work {
            if !sd.contains(t.at) {
                return Err(SortError::OutsideScope { token: t.id, slot: t.at });
            }
            cnt[sd.rank[t.at] as usize] += 1;
        }
        for (r, &c) in cnt.iter().enumerate() {
            for _ in c..l {
                let tag = self.fresh_tag();
                work.push(Token { id: u64::MAX, key: Key::PosInf, tag, at: sd.vertices[r], ..Default::default() });
            }
        }
        let first = self.expander_sort_dedup(scope, &mut work, l)?;
        let keep: Vec<usize> = (0..work.len()).filter(|&i| !work[i].duplicate).collect();
        let mut sub: Vec<Token> = keep.iter().map(|&i| work[i].clone()).collect();
        let second = self.expander_sort(scope, &mut sub, l)?;
        let pos = positions(&sd, &sub, l);
        for (t, p) in sub.iter_mut().zip(pos) {
            t.value = p as i64;
        }
        self.revert(scope, &mut sub, &second, l)?;
        for (&i, t) in keep.iter().zip(sub) {
            work[i].value = t.value;
        }
        self.revert_propagate(scope, &mut work, &first, l)?;
        for (t, w) in tokens.iter_mut().zip(&work) {
            t.rank = w.value as u64;
            t.at = w.at;
        }
        Ok(())
    }

    /// Every token's `value` becomes that of the smallest-tag token sharing its key.
    pub fn local_propagation(&mut self, scope: Scope, tokens: &mut [Token], l: usize) -> Result<(), SortError> {
        let tr = self.expander_sort(scope, tokens, l)?;
        self.revert_propagate(scope, tokens, &tr, l)
    }

    /// Position in `(key, tag)` order, by one sort and its revert.
    fn global_positions(&mut self, scope: Scope, tokens: &mut [Token], l: usize) -> Result<Vec<u64>, SortError> {
        let sd = self.scope(scope)?;
        let tr = self.expander_sort(scope, tokens, l)?;
        let pos = positions(&sd, tokens, l);
        self.revert(scope, tokens, &tr, l)?;
        Ok(pos)
    }

    /// `serial` becomes a 0-based index within the key group, in tag order.
    pub fn local_serialization(&mut self, scope: Scope, tokens: &mut [Token], l: usize) -> Result<(), SortError> {
        let l = l.max(1);
        let saved: Vec<i64> = tokens.iter().map(|t| t.value).collect();
        let pos = self.global_positions(scope, tokens, l)?;
        for (t, &p) in tokens.iter_mut().zip(&pos) {
            t.value = p as i64;
        }
        self.local_propagation(scope, tokens, l)?;
        for ((t, &p), v) in tokens.iter_mut().zip(&pos).zip(saved) {
            t.serial = p - t.value as u64;
            t.value = v;
        }
        Ok(())
    }

    /// `count` becomes the size of the key group.
    pub fn local_aggregation(&mut self, scope: Scope, tokens: &mut [Token], l: usize) -> Result<(), SortError> {
        let l = l.max(1);
        let saved: Vec<i64> = tokens.iter().map(|t| t.value).collect();
        let up = self.global_positions(scope, tokens, l)?;
        for t in tokens.iter_mut() {
            t.tag = -t.tag;
        }
        let down = self.global_positions(scope, tokens, l);
        for t in tokens.iter_mut() {
            t.tag = -t.tag;
        }
        let down = down?;
        for (t, (&a, &b)) in tokens.iter_mut().zip(up.iter().zip(&down)) {
            t.value = b as i64 - a as i64 + 1;
        }
        self.local_propagation(scope, tokens, l)?;
        for (t, v) in tokens.iter_mut().zip(saved) {
            t.count = t.value as u64;
            t.value = v;
        }
        Ok(())
    }
}
