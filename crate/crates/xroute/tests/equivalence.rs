mod common;

use std::cell::Cell;
use std::sync::{Mutex, OnceLock};

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xroute::decomposition::build_hierarchy;
use xroute::equivalence::{bfs_order, route_via_sort, sort_via_route, SortMode};
use xroute::harness::{random_regular, route_tokens, routing_requests, sort_tokens, ExperimentConfig, Pattern};
use xroute::routing::{prepared_engine, RouteError};
use xroute::shuffler::build_shufflers;
use xroute::sorting::{Engine, EngineParams, Token};

fn engine(n: usize) -> Engine {
    let cfg = ExperimentConfig { n, ..Default::default() };
    let g = random_regular(n, 4, 1).unwrap();
    let h = build_hierarchy(&g, &cfg.build_params()).unwrap();
    let sh = build_shufflers(&h, &cfg.shuffler_params()).unwrap();
    prepared_engine(g, h, sh, EngineParams::default()).unwrap()
}

fn shared() -> &'static Mutex<Engine> {
    static E: OnceLock<Mutex<Engine>> = OnceLock::new();
    E.get_or_init(|| Mutex::new(engine(32)))
}

/// An ideal router: checks the load contract, then moves every token at once.
fn teleport(e: &mut Engine, toks: &mut [Token], l: usize) -> Result<(), RouteError> {
    if load_oracle(toks) > l {
        return Err(RouteError::Prepare("source load".into()));
    }
    for t in toks.iter_mut() {
        t.at = e.graph.slot_of(t.dst).ok_or(RouteError::UnknownDestination(t.dst))?;
    }
    if load_oracle(toks) > l {
        return Err(RouteError::Prepare("destination load".into()));
    }
    Ok(())
}

fn batcher_layers(n: usize) -> usize {
    let k = n.next_power_of_two().trailing_zeros() as usize;
    k * (k + 1) / 2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sorting_through_an_ideal_router(l in 1usize..=3, dup in any::<bool>(), seed in any::<u64>()) {
        let mut e = shared().lock().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = if dup { Pattern::Duplicates } else { Pattern::Distinct };
        let mut toks = sort_tokens(&e.graph, p, l, &mut rng);
        let want = multiset(&toks);
        let calls = Cell::new(0u64);
        e.begin_query();
        let b = sort_via_route(&mut e, &mut toks, l, |e, t, l| {
            calls.set(calls.get() + 1);
            teleport(e, t, l)
        })
        .unwrap();
        prop_assert_eq!(multiset(&toks), want);
        prop_assert!(sorted_oracle(&e.graph, &toks));
        prop_assert!(load_oracle(&toks) <= l);
        // the router serves the comparator layers and the vertex ranks
        prop_assert_eq!(b.calls + b.rank_calls, calls.get());
        prop_assert!(b.rank_calls <= 2 * b.layers as u64 + 1);
        prop_assert!(b.layers <= batcher_layers(e.graph.n()));
        prop_assert!(b.calls <= 2 * b.layers as u64);
    }

    #[test]
    fn routing_through_the_sorter(p in prop::sample::select(vec![Pattern::Permutation, Pattern::ManyToOne, Pattern::Random]), l in 1usize..=3, blackbox in any::<bool>(), seed in any::<u64>()) {
        let mut e = shared().lock().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let req = routing_requests(&e.graph, p, &|_| l, &mut rng);
        let mut toks = route_tokens(&e.graph, &req);
        e.begin_query();
        let mode = if blackbox { SortMode::BlackBox } else { SortMode::Comparison };
        let b = route_via_sort(&mut e, &mut toks, l, mode).unwrap();
        prop_assert!(toks.iter().all(|t| e.graph.id(t.at) == t.dst));
        prop_assert!(load_oracle(&toks) <= l);
        if blackbox {
            // 3·⌈log_{L+1} n⌉ by repeated multiplication
            let (mut m, mut pw) = (0u64, 1usize);
            while pw < e.graph.n() {
                pw *= l + 1;
                m += 1;
            }
            prop_assert!(b.dedup_iterations <= 3 * m.max(1));
        } else {
            prop_assert_eq!(b.calls, 6);
        }
    }
}

#[test]
fn bfs_order_is_a_preorder() {
    let e = shared().lock().unwrap();
    let g = &e.graph;
    let o = bfs_order(&e);
    let mut sorted = o.clone();
    sorted.sort_unstable();
    let mut members = g.members().to_vec();
    members.sort_unstable();
    assert_eq!(sorted, members);
    assert_eq!(g.id(o[0]), *g.ids().iter().min().unwrap());
    // every vertex after the root has a neighbour earlier in the order
    for i in 1..o.len() {
        assert!(o[..i].iter().any(|&u| g.has_edge(u, o[i])));
    }
}

#[test]
fn sorting_through_task1() {
    let mut e = shared().lock().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut toks = sort_tokens(&e.graph, Pattern::Duplicates, 2, &mut rng);
    let want = multiset(&toks);
    e.begin_query();
    let b = sort_via_route(&mut e, &mut toks, 2, |e, t, l| e.task1(t, l).map(|_| ())).unwrap();
    assert_eq!(multiset(&toks), want);
    assert!(sorted_oracle(&e.graph, &toks));
    assert!(b.calls <= 2 * batcher_layers(32) as u64);
}

#[test]
fn router_errors_propagate() {
    let mut e = shared().lock().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut toks = sort_tokens(&e.graph, Pattern::Distinct, 1, &mut rng);
    e.begin_query();
    let r = sort_via_route(&mut e, &mut toks, 1, |_, _, _| Err(RouteError::Prepare("down".into())));
    assert!(matches!(r, Err(RouteError::Prepare(_))));
}
