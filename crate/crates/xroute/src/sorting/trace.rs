use std::collections::HashMap;

use super::{Key, SortError};

/// One block operation in step 2 of an expander sort. Token references are
/// indices into the sort's token array, pads included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    /// In-place sort of the block at best position `block`.
    Local { block: u32, before: Vec<u32>, after: Vec<u32> },
    /// Merge-split of blocks `low < high`: every pair in the union is compared,
    /// the smaller half stays at `low`.
    Merge { layer: u32, low: u32, high: u32, before_low: Vec<u32>, before_high: Vec<u32>, after_low: Vec<u32>, after_high: Vec<u32> },
}

impl TraceEvent {
    /// Tokens taking part, in post-event order.
    pub fn participants(&self) -> Vec<u32> {
        match self {
            TraceEvent::Local { after, .. } => after.clone(),
            TraceEvent::Merge { after_low, after_high, .. } => after_low.iter().chain(after_high).copied().collect(),
        }
    }
}

/// Chronological record of an expander sort, enough to replay or revert it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonTrace {
    pub block_size: u32,
    /// Token count including internal pads.
    pub tokens: u32,
    /// Tokens `0..real` belong to the caller.
    pub real: u32,
    /// Block contents at the best vertices when step 2 begins.
    pub start: Vec<Vec<u32>>,
    pub events: Vec<TraceEvent>,
    /// Slot of every real token before the sort.
    pub initial_at: Vec<usize>,
    /// Slot of every real token after the sort.
    pub final_at: Vec<usize>,
}

const MAGIC: &[u8; 4] = b"XRT1";

impl ComparisonTrace {
    pub fn merges(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, TraceEvent::Merge { .. })).count()
    }

    /// Replays the events forward from `start`, checking every recorded
    /// pre-state. Returns the final block contents.
    pub fn replay(&self) -> Result<Vec<Vec<u32>>, SortError> {
        let mut b = self.start.clone();
        for (i, e) in self.events.iter().enumerate() {
            match e {
                TraceEvent::Local { block, before, after } => {
                    if &b[*block as usize] != before {
                        return Err(SortError::Trace(format!("event {i}: local pre-state mismatch")));
                    }
                    b[*block as usize] = after.clone();
                }
                TraceEvent::Merge { low, high, before_low, before_high, after_low, after_high, .. } => {
                    if &b[*low as usize] != before_low || &b[*high as usize] != before_high {
                        return Err(SortError::Trace(format!("event {i}: merge pre-state mismatch")));
                    }
                    b[*low as usize] = after_low.clone();
                    b[*high as usize] = after_high.clone();
                }
            }
        }
        Ok(b)
    }

    /// Walks the events backwards from `end`, returning the restored `start`.
    pub fn revert_from(&self, end: &[Vec<u32>]) -> Result<Vec<Vec<u32>>, SortError> {
        let mut b = end.to_vec();
        for (i, e) in self.events.iter().enumerate().rev() {
            match e {
                TraceEvent::Local { block, before, after } => {
                    if &b[*block as usize] != after {
                        return Err(SortError::Trace(format!("event {i}: local post-state mismatch")));
                    }
                    b[*block as usize] = before.clone();
                }
                TraceEvent::Merge { low, high, before_low, before_high, after_low, after_high, .. } => {
                    if &b[*low as usize] != after_low || &b[*high as usize] != after_high {
                        return Err(SortError::Trace(format!("event {i}: merge post-state mismatch")));
                    }
                    b[*low as usize] = before_low.clone();
                    b[*high as usize] = before_high.clone();
                }
            }
        }
        Ok(b)
    }

    /// Recomputes every block operation from `(key, tag)` and checks it
    /// against the recorded outcome.
    pub fn check_outcomes(&self, order: &[(Key, i128)]) -> Result<(), SortError> {
        let by = |a: &u32, b: &u32| order[*a as usize].cmp(&order[*b as usize]);
        for (i, e) in self.events.iter().enumerate() {
            match e {
                TraceEvent::Local { before, after, .. } => {
                    let mut v = before.clone();
                    v.sort_by(by);
                    if &v != after {
                        return Err(SortError::Trace(format!("event {i}: local outcome differs")));
                    }
                }
                TraceEvent::Merge { before_low, before_high, after_low, after_high, .. } => {
                    let mut v: Vec<u32> = before_low.iter().chain(before_high).copied().collect();
                    v.sort_by(by);
                    let (l, h) = v.split_at(before_low.len());
                    if l != after_low.as_slice() || h != after_high.as_slice() {
                        return Err(SortError::Trace(format!("event {i}: merge outcome differs")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Reverse replay with the propagation rule: inside every block operation,
    /// each token takes the value held by the smallest-tag token of its key.
    pub fn propagate(&self, keys: &[Key], tags: &[i128], values: &mut [i64]) {
        for e in self.events.iter().rev() {
            // post-event order is sorted by key, so each key is one run
            let part = e.participants();
            let mut i = 0;
            while i < part.len() {
                let k = keys[part[i] as usize];
                let mut j = i;
                let mut best = part[i] as usize;
                while j < part.len() && keys[part[j] as usize] == k {
                    let z = part[j] as usize;
                    if tags[z] < tags[best] {
                        best = z;
                    }
                    j += 1;
                }
                let v = values[best];
                for &z in &part[i..j] {
                    values[z as usize] = v;
                }
                i = j;
            }
        }
    }

    /// Chain-of-comparisons check: for every token, some chronological chain of
    /// same-key comparisons with strictly decreasing tags ends at the
    /// smallest tag of its key group. Pairwise, for tests and audits.
    pub fn chain_property(&self, keys: &[Key], tags: &[i128]) -> bool {
        let n = self.tokens as usize;
        let mut reach: Vec<i128> = tags[..n].to_vec();
        for e in self.events.iter().rev() {
            let part = e.participants();
            let snapshot: Vec<i128> = part.iter().map(|&z| reach[z as usize]).collect();
            for (ia, &a) in part.iter().enumerate() {
                let a = a as usize;
                for (ib, &b) in part.iter().enumerate() {
                    let b = b as usize;
                    if ia != ib && keys[a] == keys[b] && tags[b] < tags[a] && snapshot[ib] < reach[a] {
                        reach[a] = snapshot[ib];
                    }
                }
            }
        }
        let mut group_min: HashMap<Key, i128> = HashMap::new();
        for z in 0..n {
            let e = group_min.entry(keys[z]).or_insert(tags[z]);
            *e = (*e).min(tags[z]);
        }
        (0..n).all(|z| reach[z] == group_min[&keys[z]])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put(&mut out, self.block_size);
        put(&mut out, self.tokens);
        put(&mut out, self.real);
        put_list(&mut out, &self.initial_at.iter().map(|&x| x as u32).collect::<Vec<_>>());
        put_list(&mut out, &self.final_at.iter().map(|&x| x as u32).collect::<Vec<_>>());
        put(&mut out, self.start.len() as u32);
        for b in &self.start {
            put_list(&mut out, b);
        }
        put(&mut out, self.events.len() as u32);
        for e in &self.events {
            match e {
                TraceEvent::Local { block, before, after } => {
                    out.push(0);
                    put(&mut out, *block);
                    put_list(&mut out, before);
                    put_list(&mut out, after);
                }
                TraceEvent::Merge { layer, low, high, before_low, before_high, after_low, after_high } => {
                    out.push(1);
                    put(&mut out, *layer);
                    put(&mut out, *low);
                    put(&mut out, *high);
                    for l in [before_low, before_high, after_low, after_high] {
                        put_list(&mut out, l);
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, SortError> {
        let mut r = Reader { data, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(SortError::Trace("bad magic".into()));
        }
        let block_size = r.u32()?;
        let tokens = r.u32()?;
        let real = r.u32()?;
        let initial_at = r.list()?.into_iter().map(|x| x as usize).collect();
        let final_at = r.list()?.into_iter().map(|x| x as usize).collect();
        let nb = r.u32()? as usize;
        let mut start = Vec::with_capacity(nb);
        for _ in 0..nb {
            start.push(r.list()?);
        }
        let ne = r.u32()? as usize;
        let mut events = Vec::with_capacity(ne);
        for _ in 0..ne {
            let tag = r.take(1)?[0];
            events.push(match tag {
                0 => TraceEvent::Local { block: r.u32()?, before: r.list()?, after: r.list()? },
                1 => TraceEvent::Merge {
                    layer: r.u32()?,
                    low: r.u32()?,
                    high: r.u32()?,
                    before_low: r.list()?,
                    before_high: r.list()?,
                    after_low: r.list()?,
                    after_high: r.list()?,
                },
                t => return Err(SortError::Trace(format!("unknown event tag {t}"))),
            });
        }
        if r.pos != data.len() {
            return Err(SortError::Trace("trailing bytes".into()));
        }
        Ok(Self { block_size, tokens, real, start, events, initial_at, final_at })
    }
}

fn put(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_list(out: &mut Vec<u8>, xs: &[u32]) {
    put(out, xs.len() as u32);
    for &x in xs {
        put(out, x);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SortError> {
        if self.pos + n > self.data.len() {
            return Err(SortError::Trace("truncated trace".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SortError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn list(&mut self) -> Result<Vec<u32>, SortError> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.u32()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // keys 5, 1, 3, 1 in two blocks of two
    fn small() -> (ComparisonTrace, Vec<Key>, Vec<i128>) {
        let keys = vec![Key::one(5), Key::one(1), Key::one(3), Key::one(1)];
        let tags = vec![0, 1, 2, 3];
        let t = ComparisonTrace {
            block_size: 2,
            tokens: 4,
            real: 4,
            start: vec![vec![0, 1], vec![2, 3]],
            events: vec![
                TraceEvent::Local { block: 0, before: vec![0, 1], after: vec![1, 0] },
                TraceEvent::Local { block: 1, before: vec![2, 3], after: vec![3, 2] },
                TraceEvent::Merge {
                    layer: 0,
                    low: 0,
                    high: 1,
                    before_low: vec![1, 0],
                    before_high: vec![3, 2],
                    after_low: vec![1, 3],
                    after_high: vec![2, 0],
                },
            ],
            initial_at: vec![0, 0, 1, 1],
            final_at: vec![1, 0, 1, 0],
        };
        (t, keys, tags)
    }

    fn order(keys: &[Key], tags: &[i128]) -> Vec<(Key, i128)> {
        keys.iter().copied().zip(tags.iter().copied()).collect()
    }

    #[test]
    fn replay_and_revert() {
        let (t, ..) = small();
        let end = t.replay().unwrap();
        assert_eq!(end, vec![vec![1, 3], vec![2, 0]]);
        assert_eq!(t.revert_from(&end).unwrap(), t.start);
        assert_eq!(t.merges(), 1);
        assert!(t.revert_from(&t.start).is_err());
    }

    #[test]
    fn outcomes_are_recomputed() {
        let (mut t, keys, tags) = small();
        t.check_outcomes(&order(&keys, &tags)).unwrap();
        if let TraceEvent::Merge { after_low, .. } = &mut t.events[2] {
            after_low.swap(0, 1);
        }
        assert!(t.check_outcomes(&order(&keys, &tags)).is_err());
        assert!(t.replay().is_ok(), "replay only checks pre-states");
    }

    #[test]
    fn propagation_takes_smallest_tag() {
        let (t, keys, tags) = small();
        let mut v = vec![10, 20, 30, 40];
        t.propagate(&keys, &tags, &mut v);
        assert_eq!(v, vec![10, 20, 30, 20]);
        assert!(t.chain_property(&keys, &tags));
    }

    #[test]
    fn chain_needs_a_comparison() {
        // the two key-1 tokens never meet without the merge
        let (mut t, keys, tags) = small();
        t.events.pop();
        assert!(!t.chain_property(&keys, &tags));
    }

    #[test]
    fn bytes_round_trip() {
        let (t, ..) = small();
        let b = t.to_bytes();
        assert_eq!(ComparisonTrace::from_bytes(&b).unwrap(), t);
        assert!(ComparisonTrace::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'Y';
        assert!(ComparisonTrace::from_bytes(&bad).is_err());
    }
}
