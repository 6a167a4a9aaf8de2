mod common;

use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use xroute::graph::{expander_split, measure_cut, read_graph, read_remap, write_graph, write_remap, Graph, PathSet};

/// A connected graph: a random spanning tree plus extra edges.
fn connected(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n)
        .prop_flat_map(|n| {
            let parents: Vec<BoxedStrategy<usize>> = (1..n).map(|i| (0..i).boxed()).collect();
            (Just(n), parents, prop::collection::vec((0..n, 0..n), 0..2 * n))
        })
        .prop_map(|(n, parents, extra)| {
            let mut g = Graph::new((1..=n as u64).map(|i| 10 * i + 3).collect()).unwrap();
            for (i, p) in parents.into_iter().enumerate() {
                g.add_edge(i + 1, p).unwrap();
            }
            for (u, v) in extra {
                if u != v && !g.has_edge(u, v) {
                    g.add_edge(u, v).unwrap();
                }
            }
            g
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip(g in connected(20)) {
        let plain = read_graph(&write_graph(&g)).unwrap();
        let back = read_remap(&plain, &write_remap(&g)).unwrap();
        prop_assert_eq!(back.ids(), g.ids());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn cut_is_symmetric(g in connected(14), mask in any::<u32>()) {
        let s: Vec<usize> = g.members().iter().copied().filter(|&v| mask >> v & 1 == 1).collect();
        let c: Vec<usize> = g.members().iter().copied().filter(|&v| mask >> v & 1 == 0).collect();
        prop_assume!(!s.is_empty() && !c.is_empty());
        let a = measure_cut(&g, &s).unwrap();
        let b = measure_cut(&g, &c).unwrap();
        prop_assert_eq!(a.boundary_size, b.boundary_size);
        prop_assert_eq!(&a.sparsity, &b.sparsity);
        prop_assert_eq!(a.volume + a.complement_volume, 2 * g.edge_count());
        let crossing = g.edges().iter().filter(|e| (mask >> e.u & 1) != (mask >> e.v & 1)).map(|e| e.mult as u64).sum::<u64>();
        prop_assert_eq!(a.boundary_size, crossing);
        // the exhaustive minimum lower-bounds every individual cut
        let (sp, co) = cut_oracle(&g);
        prop_assert!(sp <= a.sparsity && co <= a.conductance);
    }

    #[test]
    fn bfs_paths_are_shortest(g in connected(24)) {
        let d = g.bfs_distances(0);
        for &v in g.members() {
            let p = g.shortest_path(0, v).unwrap();
            prop_assert_eq!(p.len() as u32 - 1, d[v].unwrap());
            prop_assert!(p.windows(2).all(|w| g.has_edge(w[0], w[1])));
        }
        let ps = PathSet::new(g.members().iter().map(|&v| g.shortest_path(0, v).unwrap()).collect());
        prop_assert!(ps.validate(&g).is_ok());
        prop_assert!(ps.dilation() <= g.diameter().unwrap() as u64);
    }

    #[test]
    fn split_has_bounded_degree(g in connected(14)) {
        let (s, map) = expander_split(&g).unwrap();
        prop_assert!(s.is_connected());
        prop_assert!(s.max_degree() <= 5);
        prop_assert_eq!(s.n() as u64, 2 * g.edge_count());
        for &v in g.members() {
            prop_assert_eq!(map.gadget[v].len() as u64, g.degree(v));
            for (i, &x) in map.gadget[v].iter().enumerate() {
                prop_assert_eq!(map.origin[x], (v, i as u32 + 1));
            }
        }
    }
}

#[test]
fn named_small_graphs() {
    let r = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
    // a path splits in the middle, a cycle in two arcs
    assert_eq!(cut_oracle(&Graph::path(8)).0, r(1, 4));
    assert_eq!(cut_oracle(&Graph::cycle(8)).0, r(2, 4));
    assert_eq!(cut_oracle(&Graph::complete(6)).0, r(3, 1));
    let g = Graph::complete(5);
    assert_eq!(measure_cut(&g, &[0, 1]).unwrap().conductance, r(6, 8));
}

#[test]
fn disconnected_or_bad_input_is_rejected() {
    let mut g = Graph::new(vec![1, 2, 3, 4]).unwrap();
    g.add_edge(0, 1).unwrap();
    g.add_edge(2, 3).unwrap();
    assert!(!g.is_connected());
    assert!(expander_split(&g).is_err());
    assert!(Graph::new(vec![1, 1]).is_err());
    assert!(g.add_edge(0, 0).is_err());
    assert!(read_graph("garbage").is_err());
    assert!(read_graph("3 2\n1 2\n").is_err(), "edge count mismatch");
    assert!(read_graph("2 1\n1 3\n").is_err(), "vertex out of range");
}
