mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xroute::decomposition::build_hierarchy;
use xroute::harness::*;
use xroute::routing::prepared_engine;
use xroute::shuffler::build_shufflers;
use xroute::sorting::EngineParams;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_regular_is_simple_regular_connected(half in 4usize..40, d in 3usize..=8, seed in any::<u64>()) {
        let n = 2 * half;
        prop_assume!(d < n);
        let g = random_regular(n, d, seed).unwrap();
        prop_assert!(g.is_connected());
        prop_assert!(!g.is_multigraph());
        prop_assert!(g.members().iter().all(|&v| g.degree(v) == d as u64));
        prop_assert_eq!(random_regular(n, d, seed).unwrap().edges(), g.edges());
    }

    #[test]
    fn spread_ids_are_distinct_and_bounded(n in 4usize..60, seed in any::<u64>()) {
        let g = spread_ids(&random_regular(2 * n, 4, 1).unwrap(), seed).unwrap();
        let ids: BTreeSet<u64> = g.ids().iter().copied().collect();
        prop_assert_eq!(ids.len(), 2 * n);
        prop_assert!(ids.iter().all(|&i| i >= 1 && i <= (8 * n * n * n) as u64));
    }

    #[test]
    fn routing_requests_respect_caps(p in prop::sample::select(vec![Pattern::Permutation, Pattern::ManyToOne, Pattern::Random]), l in 1usize..=4, seed in any::<u64>()) {
        let g = wheel(21).unwrap();
        let cap = |v: usize| g.degree(v) as usize * l;
        let req = routing_requests(&g, p, &cap, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut from = vec![0usize; g.slots()];
        let mut to = vec![0usize; g.slots()];
        for &(s, d) in &req {
            from[s] += 1;
            to[g.slot_of(d).unwrap()] += 1;
        }
        prop_assert!(g.members().iter().all(|&v| from[v] <= cap(v) && to[v] <= cap(v)));
        if p == Pattern::Permutation {
            prop_assert!(from.iter().all(|&c| c <= 1) && req.len() == g.n());
        }
    }
}

#[test]
fn families_have_their_shape() {
    assert_eq!(hypercube(32).unwrap().max_degree(), 5);
    assert_eq!(margulis_torus(49).unwrap().n(), 49);
    assert_eq!(star(9).unwrap().max_degree(), 8);
    assert_eq!(wheel(9).unwrap().edge_count(), 16);
    assert_eq!(barbell(12).unwrap().edge_count(), 2 * 15 + 1);
    for (f, n) in [(Family::Hypercube, 12), (Family::MargulisTorus, 50), (Family::Barbell, 7), (Family::RandomRegular(3), 9)] {
        assert!(generate(&f, n, 1).is_err(), "{} accepted n={n}", f.name());
    }
    for name in ["random-regular(4)", "random-regular:6", "gnp(20)", "hypercube", "ring-of-cliques", "wheel"] {
        let f = Family::parse(name).unwrap();
        assert_eq!(Family::parse(&f.name()).unwrap(), f);
    }
    assert!(Family::parse("lattice").is_err());
}

#[test]
fn nonconsecutive_ids_route() {
    let g = spread_ids(&random_regular(32, 4, 2).unwrap(), 9).unwrap();
    let cfg = ExperimentConfig::default();
    let h = build_hierarchy(&g, &cfg.build_params()).unwrap();
    let sh = build_shufflers(&h, &cfg.shuffler_params()).unwrap();
    let mut e = prepared_engine(g.clone(), h, sh, EngineParams::default()).unwrap();
    let req = routing_requests(&g, Pattern::Random, &|_| 2, &mut ChaCha8Rng::seed_from_u64(4));
    let mut toks = route_tokens(&g, &req);
    e.begin_query();
    e.task1(&mut toks, 2).unwrap();
    assert!(toks.iter().all(|t| g.id(t.at) == t.dst));
    let mut s = sort_tokens(&g, Pattern::Duplicates, 2, &mut ChaCha8Rng::seed_from_u64(5));
    e.expander_sort(xroute::sorting::Scope::Whole, &mut s, 2).unwrap();
    assert!(sorted_oracle(&g, &s));
}

#[test]
fn experiments_pass_and_write_outputs() {
    let dir = std::env::temp_dir().join(format!("xroute-harness-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    for task in [Task::Task1, Task::Sort, Task::RouteViaSort] {
        let trace = task == Task::Sort;
        let cfg = ExperimentConfig { name: task.name().into(), n: 32, task, l: 2, pattern: Pattern::Random, queries: 2, trace, ..Default::default() };
        let rec = run_experiment(&cfg).unwrap();
        assert!(rec.passed(), "{:?}", rec.failures());
        assert_eq!(rec.queries.len(), 2);
        rec.write_outputs(&dir).unwrap();
        for f in ["config.txt", "phases.txt", "potentials.txt", "summary.json"] {
            assert!(dir.join(task.name()).join(f).is_file(), "{f}");
        }
        // per-round records only when asked for
        assert_eq!(dir.join(task.name()).join("trace.txt").is_file(), trace);
        let text = std::fs::read_to_string(dir.join(task.name()).join("config.txt")).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join(task.name()).join("summary.json")).unwrap()).unwrap();
        assert!(v.get("checks").is_some());
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn round_cap_reports_partial_metrics() {
    let cfg = ExperimentConfig { n: 32, round_cap: Some(10), ..Default::default() };
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.phase, "timeout");
    assert!(err.partial.phases.iter().any(|p| p.label.starts_with("preprocess")));
    assert!(err.partial.render().contains("phase=preprocess"));
}

#[test]
fn unknown_profile_is_an_error() {
    assert!(matches!(bench_suite("nightly", None), Err(ConfigError::UnknownProfile(_))));
}
