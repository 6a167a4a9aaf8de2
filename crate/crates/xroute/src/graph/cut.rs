use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{Graph, GraphError};

pub const BRUTE_FORCE_CAP: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutReport {
    pub cut_set: Vec<usize>,
    pub boundary_size: u64,
    pub volume: u64,
    pub complement_volume: u64,
    /// `|δ(S)| / min(vol S, vol V∖S)`; zero when the smaller volume is zero.
    pub conductance: BigRational,
    /// `|δ(S)| / min(|S|, |V∖S|)`.
    pub sparsity: BigRational,
}

fn ratio(num: u64, den: u64) -> BigRational {
    if den == 0 {
        BigRational::zero()
    } else {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

pub fn measure_cut(g: &Graph, s: &[usize]) -> Result<CutReport, GraphError> {
    let mut inside = vec![false; g.slots()];
    let mut size = 0usize;
    for &v in s {
        if !g.contains(v) {
            return Err(GraphError::UnknownVertex(v));
        }
        if !inside[v] {
            inside[v] = true;
            size += 1;
        }
    }
    if size == 0 || size == g.n() {
        return Err(GraphError::DegenerateCut);
    }
    let mut boundary = 0u64;
    let mut volume = 0u64;
    let mut total = 0u64;
    for &u in g.members() {
        total += g.degree(u);
        if inside[u] {
            volume += g.degree(u);
            for (&v, &m) in g.neighbors(u).iter().zip(g.multiplicities(u)) {
                if !inside[v] {
                    boundary += m as u64;
                }
            }
        }
    }
    let mut cut_set: Vec<usize> = s.to_vec();
    cut_set.sort_unstable();
    cut_set.dedup();
    let complement_volume = total - volume;
    Ok(CutReport {
        cut_set,
        boundary_size: boundary,
        volume,
        complement_volume,
        conductance: ratio(boundary, volume.min(complement_volume)),
        sparsity: ratio(boundary, size.min(g.n() - size) as u64),
    })
}

struct Enumerated {
    best_num: u64,
    best_den: u64,
    best_mask: u32,
}

/// Walks all `2^(n-1) - 1` proper cuts with the last member fixed outside `S`.
fn enumerate(g: &Graph, cap: usize, weight: impl Fn(u32, u32) -> (u64, u64)) -> Result<(Enumerated, Vec<usize>), GraphError> {
    let n = g.n();
    if n > cap {
        return Err(GraphError::AboveCap { n, cap });
    }
    if n < 2 {
        return Err(GraphError::DegenerateCut);
    }
    let members = g.members().to_vec();
    let mut local = vec![usize::MAX; g.slots()];
    for (i, &v) in members.iter().enumerate() {
        local[v] = i;
    }
    let nbrs: Vec<Vec<(u32, u64)>> = members
        .iter()
        .map(|&u| {
            g.neighbors(u)
                .iter()
                .zip(g.multiplicities(u))
                .map(|(&v, &m)| (local[v] as u32, m as u64))
                .collect()
        })
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut best = Enumerated { best_num: u64::MAX, best_den: 1, best_mask: 0 };
    for mask in 1u32..(1u32 << (n - 1)) {
        let mut boundary = 0u64;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                for &(j, m) in &nbrs[i] {
                    if mask >> j & 1 == 0 {
                        boundary += m;
                    }
                }
            }
        }
        let (num_scale, den) = weight(mask, full & !mask);
        let num = boundary * num_scale;
        // num/den < best_num/best_den, with zero dens treated as value 0
        let better = if den == 0 {
            best.best_num != 0
        } else if best.best_num == u64::MAX {
            true
        } else {
            (num as u128) * (best.best_den as u128) < (best.best_num as u128) * (den as u128)
        };
        if better {
            best = if den == 0 {
                Enumerated { best_num: 0, best_den: 1, best_mask: mask }
            } else {
                Enumerated { best_num: num, best_den: den, best_mask: mask }
            };
        }
    }
    let set = (0..n).filter(|i| best.best_mask >> i & 1 == 1).map(|i| members[i]).collect();
    Ok((best, set))
}

pub fn graph_sparsity_bruteforce(g: &Graph) -> Result<BigRational, GraphError> {
    graph_sparsity_bruteforce_with_cap(g, BRUTE_FORCE_CAP).map(|(r, _)| r)
}

/// Exact minimum sparsity and a minimising cut.
pub fn graph_sparsity_bruteforce_with_cap(g: &Graph, cap: usize) -> Result<(BigRational, Vec<usize>), GraphError> {
    let (best, set) = enumerate(g, cap, |a, b| (1, a.count_ones().min(b.count_ones()) as u64))?;
    Ok((ratio(best.best_num, best.best_den), set))
}

/// Exact minimum conductance and a minimising cut.
pub fn graph_conductance_bruteforce(g: &Graph) -> Result<(BigRational, Vec<usize>), GraphError> {
    let members = g.members().to_vec();
    let deg: Vec<u64> = members.iter().map(|&v| g.degree(v)).collect();
    let vol = |mask: u32| -> u64 { (0..deg.len()).filter(|i| mask >> i & 1 == 1).map(|i| deg[i]).sum() };
    let (best, set) = enumerate(g, BRUTE_FORCE_CAP, |a, b| (1, vol(a).min(vol(b))))?;
    Ok((ratio(best.best_num, best.best_den), set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    #[test]
    fn c4_adjacent_pair() {
        let g = Graph::cycle(4);
        let r = measure_cut(&g, &[0, 1]).unwrap();
        assert_eq!(r.boundary_size, 2);
        assert_eq!(r.sparsity, rat(1, 1));
        assert_eq!(r.conductance, rat(1, 2));
    }

    #[test]
    fn k4_single_vertex() {
        let g = Graph::complete(4);
        let r = measure_cut(&g, &[2]).unwrap();
        assert_eq!(r.sparsity, rat(3, 1));
        assert_eq!(r.conductance, rat(1, 1));
    }

    #[test]
    fn zero_boundary_is_zero_sparsity() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let r = measure_cut(&g, &[0, 1]).unwrap();
        assert_eq!(r.sparsity, rat(0, 1));
        assert_eq!(graph_sparsity_bruteforce(&g).unwrap(), rat(0, 1));
    }

    #[test]
    fn degenerate_cuts_rejected() {
        let g = Graph::cycle(4);
        assert_eq!(measure_cut(&g, &[]), Err(GraphError::DegenerateCut));
        assert_eq!(measure_cut(&g, &[0, 1, 2, 3]), Err(GraphError::DegenerateCut));
    }

    #[test]
    fn bruteforce_small_graphs() {
        assert_eq!(graph_sparsity_bruteforce(&Graph::complete(4)).unwrap(), rat(2, 1));
        assert_eq!(graph_sparsity_bruteforce(&Graph::cycle(4)).unwrap(), rat(1, 1));
        assert_eq!(graph_sparsity_bruteforce(&Graph::path(2)).unwrap(), rat(1, 1));
    }

    #[test]
    fn bruteforce_refuses_above_cap() {
        let g = Graph::cycle(17);
        assert_eq!(
            graph_sparsity_bruteforce(&g),
            Err(GraphError::AboveCap { n: 17, cap: 16 })
        );
    }

    #[test]
    fn bruteforce_cut_reproduces_value() {
        let g = Graph::cycle(9);
        let (v, s) = graph_sparsity_bruteforce_with_cap(&g, 16).unwrap();
        assert_eq!(measure_cut(&g, &s).unwrap().sparsity, v);
        let (c, s) = graph_conductance_bruteforce(&g).unwrap();
        assert_eq!(measure_cut(&g, &s).unwrap().conductance, c);
    }
}
