//! Reference computations shared by the integration tests. None of these call
//! into the library's own versions of the same quantity.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use xroute::graph::Graph;
use xroute::routing::DisperseReport;
use xroute::shuffler::{FractionalMatching, Shuffler};
use xroute::sorting::{Key, Token};

pub fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// Exhaustive `(min sparsity, min conductance)` over every proper vertex subset.
pub fn cut_oracle(g: &Graph) -> (BigRational, BigRational) {
    let vs = g.members().to_vec();
    let n = vs.len();
    assert!(n <= 20);
    let pos: HashMap<usize, usize> = vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let edges: Vec<(usize, usize, u64)> = g.edges().iter().map(|e| (pos[&e.u], pos[&e.v], e.mult as u64)).collect();
    let deg: Vec<u64> = vs.iter().map(|&v| g.degree(v)).collect();
    let (mut sp, mut co): (Option<BigRational>, Option<BigRational>) = (None, None);
    for mask in 1u32..(1 << n) - 1 {
        let inside = |i: usize| mask >> i & 1 == 1;
        let cut: u64 = edges.iter().filter(|(a, b, _)| inside(*a) != inside(*b)).map(|e| e.2).sum();
        let k = mask.count_ones() as u64;
        let vol: u64 = (0..n).filter(|&i| inside(i)).map(|i| deg[i]).sum();
        let total: u64 = deg.iter().sum();
        let s = BigRational::new(cut.into(), k.min(n as u64 - k).into());
        let den = vol.min(total - vol);
        if sp.as_ref().is_none_or(|b| &s < b) {
            sp = Some(s);
        }
        if den > 0 {
            let c = BigRational::new(cut.into(), den.into());
            if co.as_ref().is_none_or(|b| &c < b) {
                co = Some(c);
            }
        }
    }
    (sp.unwrap(), co.unwrap_or_else(BigRational::zero))
}

/// `R_M` from the raw counts, written out entry by entry.
pub fn walk_oracle(m: &FractionalMatching) -> Vec<Vec<BigRational>> {
    let t = m.t;
    let mut r = vec![vec![BigRational::zero(); t]; t];
    for i in 0..t {
        let mut off = BigRational::zero();
        for j in 0..t {
            if i != j {
                let c = m.counts.get(&(i.min(j), i.max(j))).copied().unwrap_or(0);
                let x = BigRational::from_integer(c.into()) / &m.n_prime / BigInt::from(2);
                off += &x;
                r[i][j] = x;
            }
        }
        r[i][i] = BigRational::one() - off;
    }
    r
}

pub fn matmul(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let t = a.len();
    (0..t).map(|i| (0..t).map(|j| (0..t).map(|k| &a[i][k] * &b[k][j]).fold(BigRational::zero(), |s, x| s + x)).collect()).collect()
}

/// `Π(0), …, Π(λ)` recomputed from the matchings.
pub fn potential_oracle(s: &Shuffler) -> Vec<BigRational> {
    let t = s.t;
    let u = q(1, t as i64);
    let pi = |r: &[Vec<BigRational>]| r.iter().flatten().map(|e| (e - &u) * (e - &u)).fold(BigRational::zero(), |a, x| a + x);
    let mut r: Vec<Vec<BigRational>> = (0..t).map(|i| (0..t).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect();
    let mut out = vec![pi(&r)];
    for it in &s.iterations {
        r = matmul(&walk_oracle(&it.fractional), &r);
        out.push(pi(&r));
    }
    out
}

/// Entries of `T^q` outside `R_{M^q}·T^{q−1} ± t`, in integers: with
/// `n' = a/b`, `2a·R_ij = c_ij·b` off the diagonal.
pub fn sandwich_oracle(rep: &DisperseReport, s: &Shuffler) -> usize {
    let t = rep.t;
    let mut bad = 0;
    for q in 1..rep.counts.len() {
        let m = &s.iterations[q - 1].fractional;
        let (a, b) = (m.n_prime.numer().clone(), m.n_prime.denom().clone());
        let two_a = &a * 2;
        for i in 0..t {
            for l in 0..t {
                let mut want = BigInt::zero();
                let mut off = BigInt::zero();
                for j in 0..t {
                    if j != i {
                        let c = BigInt::from(m.counts.get(&(i.min(j), i.max(j))).copied().unwrap_or(0)) * &b;
                        want += &c * rep.counts[q - 1][j][l];
                        off += c;
                    }
                }
                want += (&two_a - off) * rep.counts[q - 1][i][l];
                let got = &two_a * rep.counts[q][i][l];
                let slack = &two_a * t;
                if got < &want - &slack || got > &want + &slack {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// `N_i^q ≤ N_max + t²q`, recomputed from the raw counts.
pub fn part_bound_oracle(rep: &DisperseReport) -> bool {
    let tot = |q: usize| -> Vec<u64> { rep.counts[q].iter().map(|r| r.iter().sum()).collect() };
    let nmax = *tot(0).iter().max().unwrap_or(&0);
    let t = rep.t as u64;
    (0..rep.counts.len()).all(|q| tot(q).iter().all(|&x| x <= nmax + t * t * q as u64))
}

/// Window `[0.9N_j/t − 0.1|X|/t², 1.1N_j/t + 0.1|X|/t²]` with rationals.
pub fn window_oracle(rep: &DisperseReport, x: usize) -> bool {
    let t = rep.t as i64;
    let last = rep.counts.last().unwrap();
    (0..rep.t).all(|j| {
        let nj: u64 = rep.counts[0].iter().map(|r| r[j]).sum();
        let mid = BigRational::from_integer(nj.into()) / BigInt::from(t);
        let slack = q(x as i64, 10 * t * t);
        let lo = &mid * q(9, 10) - &slack;
        let hi = &mid * q(11, 10) + &slack;
        last.iter().all(|row| {
            let c = BigRational::from_integer(row[j].into());
            lo <= c && c <= hi
        })
    })
}

/// Every token's vertex id, keys, tag and payloads in a canonical order.
pub fn multiset(tokens: &[Token]) -> Vec<(u64, Key, i128, i64)> {
    let mut v: Vec<_> = tokens.iter().map(|z| (z.id, z.key, z.tag, z.value)).collect();
    v.sort();
    v
}

/// Sortedness as its definition reads: for slots `u, w` with `id(u) < id(w)`,
/// every token at `u` is at most every token at `w`.
pub fn sorted_oracle(g: &Graph, tokens: &[Token]) -> bool {
    let mut at: BTreeMap<u64, Vec<(Key, i128)>> = BTreeMap::new();
    for z in tokens {
        at.entry(g.id(z.at)).or_default().push((z.key, z.tag));
    }
    let groups: Vec<&Vec<(Key, i128)>> = at.values().collect();
    groups.windows(2).all(|w| w[0].iter().max() <= w[1].iter().min())
}

pub fn load_oracle(tokens: &[Token]) -> usize {
    let mut c: HashMap<usize, usize> = HashMap::new();
    for z in tokens {
        *c.entry(z.at).or_default() += 1;
    }
    c.values().copied().max().unwrap_or(0)
}

/// Group-by reference for the sorting primitives, keyed on `key`.
pub struct GroupOracle {
    /// Distinct keys strictly below.
    pub rank: HashMap<Key, u64>,
    pub count: HashMap<Key, u64>,
    /// Index of each token id inside its key group, by tag.
    pub serial: HashMap<u64, u64>,
    /// Value of the smallest-tag token, per key.
    pub first_value: HashMap<Key, i64>,
}

pub fn group_oracle(tokens: &[Token]) -> GroupOracle {
    let mut groups: BTreeMap<Key, Vec<(i128, u64, i64)>> = BTreeMap::new();
    for z in tokens {
        groups.entry(z.key).or_default().push((z.tag, z.id, z.value));
    }
    let mut o = GroupOracle { rank: HashMap::new(), count: HashMap::new(), serial: HashMap::new(), first_value: HashMap::new() };
    for (r, (k, mut v)) in groups.into_iter().enumerate() {
        v.sort();
        o.rank.insert(k, r as u64);
        o.count.insert(k, v.len() as u64);
        o.first_value.insert(k, v[0].2);
        for (s, &(_, id, _)) in v.iter().enumerate() {
            o.serial.insert(id, s as u64);
        }
    }
    o
}
