use super::{Graph, GraphError};

/// Correspondence between a graph and its expander split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMap {
    /// For each split slot, the original slot and the 1-based index `i` in its gadget.
    pub origin: Vec<(usize, u32)>,
    /// For each original slot, its gadget slots in order `i = 1..deg`.
    pub gadget: Vec<Vec<usize>>,
}

impl SplitMap {
    pub fn split_slot(&self, v: usize, i: u32) -> usize {
        self.gadget[v][i as usize - 1]
    }
}

/// Edges of the gadget on `d` local vertices.
fn gadget_edges(d: usize) -> Vec<(usize, usize, u32)> {
    match d {
        0 | 1 => vec![],
        2 => vec![(0, 1, 2)],
        3 => vec![(0, 1, 1), (1, 2, 1), (0, 2, 1)],
        4 => {
            let mut e = Vec::new();
            for i in 0..4 {
                for j in i + 1..4 {
                    e.push((i, j, 1));
                }
            }
            e
        }
        _ => {
            // circulant with offsets 1 and 2; degree 4
            let mut e = Vec::new();
            for i in 0..d {
                e.push((i, (i + 1) % d, 1));
                e.push((i, (i + 2) % d, 1));
            }
            e
        }
    }
}

/// Replace every vertex by a constant-degree gadget on `deg(v)` vertices.
///
/// The `i`-th gadget vertex of `v` carries the edge to the `i`-th neighbour
/// of `v` in identifier order. Split ids are `1..=Σdeg`, ordered by
/// `(ID(v), i)`.
pub fn expander_split(g: &Graph) -> Result<(Graph, SplitMap), GraphError> {
    if !g.is_connected() {
        return Err(GraphError::Disconnected);
    }
    for &v in g.members() {
        if g.degree(v) == 0 {
            return Err(GraphError::Isolated(g.id(v)));
        }
    }
    let order = g.by_id_order(g.members());
    let mut gadget = vec![Vec::new(); g.slots()];
    let mut origin = Vec::new();
    for &v in &order {
        for i in 0..g.degree(v) {
            gadget[v].push(origin.len());
            origin.push((v, i as u32 + 1));
        }
    }
    let total = origin.len();
    let mut h = Graph::new_multigraph((1..=total as u64).collect())?;
    for &v in &order {
        for (a, b, m) in gadget_edges(gadget[v].len()) {
            h.add_edge_mult(gadget[v][a], gadget[v][b], m)?;
        }
    }
    // rank of edge (v, u) at v: position of u among v's neighbour copies by id
    let mut rank_of = vec![Vec::new(); g.slots()];
    for &v in &order {
        let mut nb: Vec<(u64, usize, u32)> = g
            .neighbors(v)
            .iter()
            .zip(g.multiplicities(v))
            .map(|(&u, &m)| (g.id(u), u, m))
            .collect();
        nb.sort_unstable();
        let mut r = Vec::new();
        for (_, u, m) in nb {
            for c in 0..m {
                r.push((u, c));
            }
        }
        rank_of[v] = r;
    }
    for &v in &order {
        for (i, &(u, c)) in rank_of[v].iter().enumerate() {
            if g.id(v) < g.id(u) {
                let j = rank_of[u].iter().position(|&(w, cc)| w == v && cc == c).unwrap();
                h.add_edge_mult(gadget[v][i], gadget[u][j], 1)?;
            }
        }
    }
    Ok((h, SplitMap { origin, gadget }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{graph_conductance_bruteforce, graph_sparsity_bruteforce};
    use num_traits::Zero;

    #[test]
    fn triangle_splits_to_cubic() {
        let (h, map) = expander_split(&Graph::complete(3)).unwrap();
        assert_eq!(h.n(), 6);
        for &v in h.members() {
            assert_eq!(h.degree(v), 3);
        }
        assert_eq!(map.origin[0], (0, 1));
        assert_eq!(map.split_slot(2, 2), 5);
    }

    #[test]
    fn single_edge_is_unchanged() {
        let (h, _) = expander_split(&Graph::path(2)).unwrap();
        assert_eq!(h.n(), 2);
        assert_eq!(h.edge_count(), 1);
    }

    #[test]
    fn star_center_gets_triangle() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let (h, map) = expander_split(&g).unwrap();
        assert_eq!(h.n(), 6);
        assert!(h.max_degree() <= 4);
        let c = &map.gadget[0];
        assert!(h.has_edge(c[0], c[1]) && h.has_edge(c[1], c[2]) && h.has_edge(c[0], c[2]));
        for i in 0..3 {
            assert!(h.has_edge(c[i], map.gadget[i + 1][0]));
        }
    }

    #[test]
    fn high_degree_stays_bounded() {
        let mut edges = Vec::new();
        for i in 1..10 {
            edges.push((0, i));
        }
        let g = Graph::from_edges(10, &edges).unwrap();
        let (h, _) = expander_split(&g).unwrap();
        assert_eq!(h.max_degree(), 5);
        assert!(h.is_connected());
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(expander_split(&g).unwrap_err(), GraphError::Disconnected);
        let g = Graph::new(vec![9]).unwrap();
        assert_eq!(expander_split(&g).unwrap_err(), GraphError::Isolated(9));
    }

    #[test]
    fn split_positive_sparsity_iff_positive_conductance() {
        let g = Graph::cycle(5);
        let (h, _) = expander_split(&g).unwrap();
        let phi = graph_conductance_bruteforce(&g).unwrap().0;
        let psi = graph_sparsity_bruteforce(&h).unwrap();
        assert_eq!(phi.is_zero(), psi.is_zero());
    }
}
