use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, GraphError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("unknown graph family '{0}'")]
    UnknownFamily(String),
    #[error("family {family} cannot be built on {n} vertices")]
    BadSize { family: String, n: usize },
    #[error("generated graph is disconnected")]
    Disconnected,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    RandomRegular(usize),
    MargulisTorus,
    Hypercube,
    Barbell,
    RingOfCliques,
    Star,
    Wheel,
    /// `G(n, p)` with `p = num/100`, resampled until connected.
    Gnp(u32),
}

impl Family {
    /// Accepts `random-regular(4)`, `random-regular:4`, `gnp(20)` and plain names.
    pub fn parse(s: &str) -> Result<Self, GenError> {
        let s = s.trim();
        let (name, arg) = match s.find(['(', ':']) {
            Some(i) => (&s[..i], Some(s[i + 1..].trim_end_matches(')'))),
            None => (s, None),
        };
        let num = |d: u64| -> Result<u64, GenError> {
            match arg {
                None => Ok(d),
                Some(a) => a.parse().map_err(|_| GenError::UnknownFamily(s.into())),
            }
        };
        Ok(match name {
            "random-regular" => Family::RandomRegular(num(4)? as usize),
            "margulis-torus" | "margulis" => Family::MargulisTorus,
            "hypercube" => Family::Hypercube,
            "barbell" => Family::Barbell,
            "ring-of-cliques" => Family::RingOfCliques,
            "star" => Family::Star,
            "wheel" => Family::Wheel,
            "gnp" => Family::Gnp(num(20)? as u32),
            _ => return Err(GenError::UnknownFamily(s.into())),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Family::RandomRegular(d) => format!("random-regular({d})"),
            Family::MargulisTorus => "margulis-torus".into(),
            Family::Hypercube => "hypercube".into(),
            Family::Barbell => "barbell".into(),
            Family::RingOfCliques => "ring-of-cliques".into(),
            Family::Star => "star".into(),
            Family::Wheel => "wheel".into(),
            Family::Gnp(p) => format!("gnp({p})"),
        }
    }
}

fn build(n: usize, edges: &BTreeSet<(usize, usize)>) -> Result<Graph, GenError> {
    let e: Vec<(usize, usize)> = edges.iter().copied().collect();
    let g = Graph::from_edges(n, &e)?;
    if !g.is_connected() {
        return Err(GenError::Disconnected);
    }
    Ok(g)
}

fn norm(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Configuration model, resampled until simple and connected. Past a
/// fixed number of rejections loops and parallel edges are removed by
/// random switchings instead.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GenError> {
    if d >= n || (n * d) % 2 == 1 || d == 0 {
        return Err(GenError::BadSize { family: format!("random-regular({d})"), n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    for _ in 0..2_000 {
        stubs.shuffle(&mut rng);
        let mut edges = BTreeSet::new();
        let mut ok = true;
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || !edges.insert(norm(u, v)) {
                ok = false;
                break;
            }
        }
        if ok {
            if let Ok(g) = build(n, &edges) {
                return Ok(g);
            }
        }
    }
    for _ in 0..100 {
        stubs.shuffle(&mut rng);
        if let Some(edges) = switch_to_simple(&stubs, &mut rng) {
            if let Ok(g) = build(n, &edges) {
                return Ok(g);
            }
        }
    }
    Err(GenError::Disconnected)
}

/// Repairs a pairing: each loop or repeated pair `(u, v)` is exchanged with a
/// random pair `(x, y)` into `(u, x), (v, y)` when that creates no new defect.
fn switch_to_simple(stubs: &[usize], rng: &mut ChaCha8Rng) -> Option<BTreeSet<(usize, usize)>> {
    let mut pairs: Vec<(usize, usize)> = stubs.chunks(2).map(|p| norm(p[0], p[1])).collect();
    let mut mult: std::collections::HashMap<(usize, usize), usize> = std::collections::HashMap::new();
    for &p in &pairs {
        *mult.entry(p).or_default() += 1;
    }
    let bad = |p: (usize, usize), m: &std::collections::HashMap<(usize, usize), usize>| p.0 == p.1 || m[&p] > 1;
    for _ in 0..pairs.len() * 200 {
        let Some(i) = (0..pairs.len()).find(|&i| bad(pairs[i], &mult)) else {
            return Some(pairs.into_iter().collect());
        };
        let j = rng.gen_range(0..pairs.len());
        let ((u, v), (x, y)) = (pairs[i], pairs[j]);
        let (a, b) = if rng.gen_bool(0.5) { (norm(u, x), norm(v, y)) } else { (norm(u, y), norm(v, x)) };
        if i == j || a.0 == a.1 || b.0 == b.1 || a == b || mult.get(&a).is_some_and(|&c| c > 0) || mult.get(&b).is_some_and(|&c| c > 0) {
            continue;
        }
        for p in [pairs[i], pairs[j]] {
            *mult.get_mut(&p).unwrap() -= 1;
        }
        pairs[i] = a;
        pairs[j] = b;
        *mult.entry(a).or_default() += 1;
        *mult.entry(b).or_default() += 1;
    }
    None
}

/// Margulis–Gabber–Galil graph on `Z_m × Z_m`, loops and parallel edges removed.
pub fn margulis_torus(n: usize) -> Result<Graph, GenError> {
    let m = (n as f64).sqrt().round() as usize;
    if m * m != n || m < 2 {
        return Err(GenError::BadSize { family: "margulis-torus".into(), n });
    }
    let idx = |x: usize, y: usize| (x % m) * m + (y % m);
    let mut edges = BTreeSet::new();
    for x in 0..m {
        for y in 0..m {
            let v = idx(x, y);
            for w in [idx(x + y, y), idx(x + y + 1, y), idx(x, y + x), idx(x, y + x + 1)] {
                if w != v {
                    edges.insert(norm(v, w));
                }
            }
        }
    }
    build(n, &edges)
}

pub fn hypercube(n: usize) -> Result<Graph, GenError> {
    if !n.is_power_of_two() || n < 2 {
        return Err(GenError::BadSize { family: "hypercube".into(), n });
    }
    let mut edges = BTreeSet::new();
    for v in 0..n {
        let mut b = 1;
        while b < n {
            edges.insert(norm(v, v ^ b));
            b <<= 1;
        }
    }
    build(n, &edges)
}

/// Two cliques of `n/2` joined by one bridge.
pub fn barbell(n: usize) -> Result<Graph, GenError> {
    if n < 4 || n % 2 == 1 {
        return Err(GenError::BadSize { family: "barbell".into(), n });
    }
    let h = n / 2;
    let mut edges = BTreeSet::new();
    for side in 0..2 {
        for i in 0..h {
            for j in i + 1..h {
                edges.insert((side * h + i, side * h + j));
            }
        }
    }
    edges.insert((h - 1, h));
    build(n, &edges)
}

/// Cliques of 8 (fewer when `n < 16`) in a ring, consecutive cliques joined by two edges.
pub fn ring_of_cliques(n: usize) -> Result<Graph, GenError> {
    let s = if n >= 16 { 8 } else { n / 2 };
    if s < 3 {
        return Err(GenError::BadSize { family: "ring-of-cliques".into(), n });
    }
    let c = n / s;
    let start = |q: usize| q * s;
    let end = |q: usize| if q + 1 == c { n } else { (q + 1) * s };
    let mut edges = BTreeSet::new();
    for q in 0..c {
        for i in start(q)..end(q) {
            for j in i + 1..end(q) {
                edges.insert((i, j));
            }
        }
        let nxt = (q + 1) % c;
        edges.insert(norm(end(q) - 1, start(nxt)));
        edges.insert(norm(end(q) - 2, start(nxt) + 1));
    }
    build(n, &edges)
}

pub fn star(n: usize) -> Result<Graph, GenError> {
    if n < 2 {
        return Err(GenError::BadSize { family: "star".into(), n });
    }
    build(n, &(1..n).map(|v| (0, v)).collect())
}

/// Hub joined to every vertex of an `(n−1)`-cycle.
pub fn wheel(n: usize) -> Result<Graph, GenError> {
    if n < 5 {
        return Err(GenError::BadSize { family: "wheel".into(), n });
    }
    let mut edges: BTreeSet<(usize, usize)> = (1..n).map(|v| (0, v)).collect();
    for v in 1..n {
        let w = if v + 1 == n { 1 } else { v + 1 };
        edges.insert(norm(v, w));
    }
    build(n, &edges)
}

pub fn gnp(n: usize, percent: u32, seed: u64) -> Result<Graph, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let mut edges = BTreeSet::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_range(0..100) < percent {
                    edges.insert((u, v));
                }
            }
        }
        if let Ok(g) = build(n, &edges) {
            return Ok(g);
        }
    }
    Err(GenError::Disconnected)
}

/// Deterministic in `(family, n, seed)`; vertex ids are `1..=n`.
pub fn generate(family: &Family, n: usize, seed: u64) -> Result<Graph, GenError> {
    let g = match family {
        Family::RandomRegular(d) => random_regular(n, *d, seed)?,
        Family::MargulisTorus => margulis_torus(n)?,
        Family::Hypercube => hypercube(n)?,
        Family::Barbell => barbell(n)?,
        Family::RingOfCliques => ring_of_cliques(n)?,
        Family::Star => star(n)?,
        Family::Wheel => wheel(n)?,
        Family::Gnp(p) => gnp(n, *p, seed)?,
    };
    Ok(g)
}

/// Same graph with distinct ids drawn from `[1, n³]`, assigned to slots in random order.
pub fn spread_ids(g: &Graph, seed: u64) -> Result<Graph, GenError> {
    let n = g.slots() as u64;
    let hi = (n * n * n).max(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = BTreeSet::new();
    while (ids.len() as u64) < n {
        ids.insert(rng.gen_range(1..=hi));
    }
    let mut ids: Vec<u64> = ids.into_iter().collect();
    // shuffle so that id order differs from slot order
    ids.shuffle(&mut rng);
    Ok(g.with_ids(ids)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graph_sparsity_bruteforce;
    use crate::numeric::rat;

    #[test]
    fn random_regular_is_regular_and_deterministic() {
        let a = random_regular(64, 4, 7).unwrap();
        let b = random_regular(64, 4, 7).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(a.members().iter().all(|&v| a.degree(v) == 4));
        assert_ne!(a.edges(), random_regular(64, 4, 8).unwrap().edges());
    }

    #[test]
    fn hypercube_16_sparsity() {
        let g = hypercube(16).unwrap();
        assert!(g.members().iter().all(|&v| g.degree(v) == 4));
        // halving along one coordinate cuts 8 edges between two halves of 8
        assert_eq!(graph_sparsity_bruteforce(&g).unwrap(), rat(1, 1));
    }

    #[test]
    fn barbell_16_sparsity() {
        assert_eq!(graph_sparsity_bruteforce(&barbell(16).unwrap()).unwrap(), rat(1, 8));
    }

    #[test]
    fn families_parse() {
        assert_eq!(Family::parse("random-regular(3)").unwrap(), Family::RandomRegular(3));
        assert_eq!(Family::parse("random-regular:6").unwrap(), Family::RandomRegular(6));
        assert_eq!(Family::parse("hypercube").unwrap(), Family::Hypercube);
        assert!(Family::parse("petersen").is_err());
    }

    #[test]
    fn every_family_connected() {
        for (f, n) in [
            (Family::MargulisTorus, 64),
            (Family::Hypercube, 64),
            (Family::Barbell, 20),
            (Family::RingOfCliques, 40),
            (Family::Star, 9),
            (Family::Wheel, 12),
            (Family::Gnp(30), 24),
        ] {
            let g = generate(&f, n, 3).unwrap();
            assert_eq!(g.n(), n, "{}", f.name());
            assert!(g.is_connected());
        }
    }

    #[test]
    fn spread_ids_are_distinct() {
        let g = spread_ids(&hypercube(8).unwrap(), 1).unwrap();
        let mut ids = g.ids().to_vec();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 8);
    }
}
