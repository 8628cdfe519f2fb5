use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use phenomapper_core::mapper::{
    build_interval_cover, compute_mapper, connected_components, dbscan, shortest_path,
};
use phenomapper_core::{ClusterParams, FilterSpec, MapperGraph, MapperParams, Normalization};
use phenomapper_testkit::{fixtures, oracles, rng};
use proptest::prelude::*;
use rand::Rng;

fn circle_params(normalization: Normalization) -> MapperParams {
    MapperParams {
        point_columns: vec!["x".into(), "y".into()],
        filters: vec![FilterSpec::new("y", 8, 0.3)],
        cluster: ClusterParams { epsilon: 0.3, min_pts: 3 },
        normalization,
    }
}

#[test]
fn noisy_circle_maps_to_a_cycle() {
    let table = fixtures::noisy_circle(500, 0.01, 11);
    let start = Instant::now();
    let graph = compute_mapper(&table, &circle_params(Normalization::MinMax)).unwrap();
    let elapsed = start.elapsed();

    let comps = oracles::components(&graph);
    assert_eq!(comps.len(), 1);
    assert_eq!(graph.edges.len(), graph.nodes.len());
    assert!(oracles::degrees(&graph).values().all(|&d| d == 2));
    assert!(oracles::is_cycle(&graph, &comps[0]));
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
}

#[test]
fn two_circles_map_to_two_cycles() {
    let table = fixtures::noisy_circles(500, 0.01, &[(0.0, 0.0), (4.0, 0.0)], 5);
    let graph = compute_mapper(&table, &circle_params(Normalization::None)).unwrap();
    let comps = oracles::components(&graph);
    assert_eq!(comps.len(), 2);
    for c in &comps {
        assert!(oracles::is_cycle(&graph, c));
    }
}

#[test]
fn dbscan_matches_naive_reference() {
    let mut r = rng(2024);
    for case in 0..100 {
        let n = r.random_range(1..=300);
        let dims = r.random_range(1..=3);
        let points = fixtures::random_points(&mut r, n, dims, 10.0);
        let eps = r.random_range(0.2..2.0);
        let min_pts = r.random_range(1..=6);
        let got = oracles::labels_as_options(&dbscan(&points, &ClusterParams { epsilon: eps, min_pts }));
        let want = oracles::naive_dbscan(&points, eps, min_pts);
        assert_eq!(
            oracles::canonical_partition(&got),
            oracles::canonical_partition(&want),
            "case {case}: n={n} eps={eps} min_pts={min_pts}"
        );
    }
}

fn random_graph_case(r: &mut phenomapper_testkit::ChaCha8Rng) -> (phenomapper_core::DataTable, MapperGraph) {
    loop {
        let rows = r.random_range(1..=200);
        let cols = r.random_range(1..=4);
        let table = fixtures::random_table(r, rows, cols, 0.03);
        let params = fixtures::random_params(r, cols);
        match compute_mapper(&table, &params) {
            Ok(g) => return (table, g),
            // Every row dropped for missing values; draw again.
            Err(_) => continue,
        }
    }
}

#[test]
fn nerve_matches_pairwise_intersections() {
    let mut r = rng(77);
    for case in 0..100 {
        let (_, graph) = random_graph_case(&mut r);
        assert_eq!(
            oracles::edge_map(&graph.edges),
            oracles::brute_force_nerve(&oracles::graph_node_rows(&graph)),
            "case {case}"
        );
    }
}

#[test]
fn nodes_partition_their_cover_element() {
    let mut r = rng(3);
    for _ in 0..50 {
        let (table, graph) = random_graph_case(&mut r);
        let mut by_element: BTreeMap<Vec<usize>, Vec<&Vec<u64>>> = BTreeMap::new();
        for n in &graph.nodes {
            assert_eq!(n.size, n.row_ids.len());
            assert!(n.row_ids.windows(2).all(|w| w[0] < w[1]));
            by_element.entry(n.cover_index.clone()).or_default().push(&n.row_ids);
        }
        for nodes in by_element.values() {
            let mut seen = BTreeSet::new();
            for rows in nodes {
                for &row in rows.iter() {
                    assert!(seen.insert(row), "row {row} in two clusters of one element");
                }
            }
        }
        let covered: BTreeSet<u64> = graph.nodes.iter().flat_map(|n| n.row_ids.iter().copied()).collect();
        let kept = table.n_rows() - graph.provenance.dropped_rows.len();
        assert_eq!(covered.len() + graph.provenance.noise_rows, kept);
    }
}

#[test]
fn node_ids_follow_cover_order() {
    let mut r = rng(8);
    for _ in 0..30 {
        let (_, graph) = random_graph_case(&mut r);
        let ids: Vec<usize> = graph.nodes.iter().map(|n| n.id).collect();
        assert_eq!(ids, (0..graph.nodes.len()).collect::<Vec<_>>());
        assert!(graph.nodes.windows(2).all(|w| w[0].cover_index <= w[1].cover_index));
    }
}

#[test]
fn parallel_clustering_is_deterministic() {
    let mut r = rng(19);
    for _ in 0..10 {
        let (table, graph) = random_graph_case(&mut r);
        assert_eq!(compute_mapper(&table, &graph.params).unwrap(), graph);
    }
}

#[test]
fn shortest_paths_match_bfs() {
    let mut r = rng(55);
    for _ in 0..50 {
        let n = r.random_range(1..25);
        let graph = fixtures::random_graph(&mut r, n, 0.0);
        let adjacency = graph.adjacency();
        let comps = connected_components(&graph);
        for a in 0..graph.nodes.len() {
            let dist = oracles::bfs_distances(&graph, a);
            for b in 0..graph.nodes.len() {
                match shortest_path(&graph, a, b) {
                    Ok(path) => {
                        assert_eq!(path.len(), dist[&b] + 1);
                        assert_eq!((path[0], *path.last().unwrap()), (a, b));
                        assert!(path.windows(2).all(|w| adjacency[&w[0]].contains(&w[1])));
                        assert_eq!(comps[&a], comps[&b]);
                    }
                    Err(_) => {
                        assert!(!dist.contains_key(&b));
                        assert_ne!(comps[&a], comps[&b]);
                    }
                }
            }
        }
    }
}

#[test]
fn components_match_union_find() {
    let mut r = rng(66);
    for _ in 0..50 {
        let n = r.random_range(1..30);
        let graph = fixtures::random_graph(&mut r, n, 0.0);
        let ours = connected_components(&graph);
        let mut grouped: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (id, c) in ours {
            grouped.entry(c).or_default().insert(id);
        }
        let mut want = oracles::components(&graph);
        want.sort_by_key(|s| *s.iter().next().unwrap());
        assert_eq!(grouped.into_values().collect::<Vec<_>>(), want);
    }
}

#[test]
fn spec_cover_examples() {
    let c = build_interval_cover(0.0, 1.0, 1, 0.0).unwrap();
    assert_eq!((c.intervals[0].lo, c.intervals[0].hi), (0.0, 1.0));
    let c = build_interval_cover(0.0, 10.0, 2, 0.5).unwrap();
    assert_eq!(c.len(), 2);
    let overlap = c.intervals[0].hi - c.intervals[1].lo;
    assert!((overlap / c.intervals[0].length() - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cover_invariants(lo in -1.0f64..1.0, width in 0.5f64..10.0, n in 1usize..=20, p in 0.0f64..0.95) {
        let hi = lo + width;
        let cover = build_interval_cover(lo, hi, n, p).unwrap();
        prop_assert_eq!(cover.len(), n);
        prop_assert!(cover.intervals[0].lo <= lo);
        prop_assert!(cover.intervals[n - 1].hi >= hi);
        for w in cover.intervals.windows(2) {
            prop_assert!(w[0].hi >= w[1].lo);
            let ratio = (w[0].hi - w[1].lo) / w[1].length();
            prop_assert!((ratio - p).abs() <= 1e-12, "ratio {} vs {}", ratio, p);
        }
        for k in 0..=100 {
            let x = lo + width * k as f64 / 100.0;
            let x = x.min(hi);
            prop_assert!(cover.containing(x).next().is_some(), "{} uncovered", x);
        }
    }
}
