/// Comparator network over positions `0..m`, one matching per layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparatorNetwork {
    pub m: usize,
    /// Each comparator `(a, b)` with `a < b`; the low output goes to `a`.
    pub layers: Vec<Vec<(usize, usize)>>,
}

impl ComparatorNetwork {
    /// Batcher's odd-even mergesort, built for the next power of two and
    /// truncated to `m` (positions beyond `m` behave as `+∞` and never move).
    pub fn batcher(m: usize) -> Self {
        let big = m.next_power_of_two();
        let mut layers = Vec::new();
        let mut p = 1;
        while p < big {
            let mut k = p;
            while k >= 1 {
                let mut layer = Vec::new();
                let mut j = k % p;
                while j + k < big {
                    for i in 0..k.min(big - j - k) {
                        let (a, b) = (i + j, i + j + k);
                        if a / (2 * p) == b / (2 * p) && b < m {
                            layer.push((a, b));
                        }
                    }
                    j += 2 * k;
                }
                if !layer.is_empty() {
                    layers.push(layer);
                }
                k /= 2;
            }
            p *= 2;
        }
        Self { m, layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn comparators(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    /// Every layer is a matching of distinct positions below `m`.
    pub fn is_well_formed(&self) -> bool {
        self.layers.iter().all(|l| {
            let mut seen = vec![false; self.m];
            l.iter().all(|&(a, b)| {
                if a >= b || b >= self.m || seen[a] || seen[b] {
                    return false;
                }
                seen[a] = true;
                seen[b] = true;
                true
            })
        })
    }

    pub fn apply<T: Ord>(&self, v: &mut [T]) {
        for l in &self.layers {
            for &(a, b) in l {
                if v[a] > v[b] {
                    v.swap(a, b);
                }
            }
        }
    }

    /// 0-1 principle over all `2^m` binary inputs.
    pub fn sorts_all_binary(&self) -> bool {
        assert!(self.m <= 24, "exhaustive check is exponential");
        (0u32..1 << self.m).all(|mask| self.sorts_mask(mask))
    }

    pub fn sorts_mask(&self, mask: u32) -> bool {
        let mut v: Vec<u8> = (0..self.m).map(|i| (mask >> i & 1) as u8).collect();
        self.apply(&mut v);
        v.windows(2).all(|w| w[0] <= w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn depth_of_eight() {
        let n = ComparatorNetwork::batcher(8);
        assert_eq!(n.depth(), 6);
        assert_eq!(n.comparators(), 19);
    }

    #[test]
    fn zero_one_principle_small() {
        for m in 1..=12 {
            let n = ComparatorNetwork::batcher(m);
            assert!(n.is_well_formed(), "m={m}");
            assert!(n.sorts_all_binary(), "m={m}");
            let lg = m.next_power_of_two().trailing_zeros() as usize;
            assert!(n.depth() <= lg * (lg + 1) / 2);
        }
    }

    #[test]
    fn trivial_sizes() {
        assert_eq!(ComparatorNetwork::batcher(1).depth(), 0);
        assert_eq!(ComparatorNetwork::batcher(2).layers, vec![vec![(0, 1)]]);
    }

    proptest! {
        #[test]
        fn sampled_binary_inputs(m in 13usize..200, seed in any::<u64>()) {
            let n = ComparatorNetwork::batcher(m);
            prop_assert!(n.is_well_formed());
            let mut x = seed;
            let mut v: Vec<u8> = (0..m).map(|_| { x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (x >> 63) as u8 }).collect();
            n.apply(&mut v);
            prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn sorts_integers(v in proptest::collection::vec(-50i32..50, 0..120)) {
            let n = ComparatorNetwork::batcher(v.len().max(1));
            let mut a = v.clone();
            if !a.is_empty() { n.apply(&mut a); }
            let mut b = v;
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
