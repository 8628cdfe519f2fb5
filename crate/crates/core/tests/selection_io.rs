use std::collections::BTreeSet;

use phenomapper_core::document::{export_subpopulation, import_subpopulation, Positions};
use phenomapper_core::layout::{filter_aligned_layout, force_layout, NODE_RADIUS};
use phenomapper_core::mapper::compute_mapper;
use phenomapper_core::selection::{select, subpopulation_rows, SelectionMode};
use phenomapper_core::{DataTable, MapperGraph};
use phenomapper_testkit::{fixtures, oracles, rng, ChaCha8Rng};
use rand::Rng;

fn random_case(r: &mut ChaCha8Rng) -> (DataTable, MapperGraph) {
    loop {
        let rows = r.random_range(1..=150);
        let cols = r.random_range(1..=4);
        let table = fixtures::random_table(r, rows, cols, 0.05);
        let params = fixtures::random_params(r, cols);
        if let Ok(g) = compute_mapper(&table, &params) {
            return (table, g);
        }
    }
}

#[test]
fn export_import_export_is_byte_identical() {
    let mut r = rng(1234);
    for case in 0..100 {
        let (table, graph) = random_case(&mut r);
        let positions: Option<Positions> = if case % 2 == 0 && !graph.is_empty() {
            Some(force_layout(&graph, 50, case).unwrap().positions)
        } else {
            None
        };
        let selection = if case % 3 == 0 && !graph.is_empty() {
            let seed = r.random_range(0..graph.nodes.len());
            Some(select(&graph, SelectionMode::Component, &[seed]).unwrap())
        } else {
            None
        };
        let first = export_subpopulation(&graph, selection.as_ref(), &table, positions.as_ref())
            .unwrap()
            .to_json();
        let imported = import_subpopulation(&first).unwrap();
        assert_eq!(
            oracles::edge_map(&imported.graph.edges),
            oracles::brute_force_nerve(&oracles::graph_node_rows(&imported.graph)),
            "case {case}"
        );
        for n in &imported.graph.nodes {
            for row in &n.row_ids {
                assert!(imported.table.position_of(*row).is_some());
            }
        }
        let second = export_subpopulation(&imported.graph, None, &imported.table, imported.positions.as_ref())
            .unwrap()
            .to_json();
        assert_eq!(first, second, "case {case}");
        if selection.is_none() {
            assert_eq!(imported.graph, graph);
            assert_eq!(imported.table.row_ids(), table.row_ids());
        }
    }
}

#[test]
fn imported_table_supports_new_mapper_runs() {
    let mut r = rng(88);
    let (table, graph) = loop {
        let (t, g) = random_case(&mut r);
        if g.nodes.len() > 2 {
            break (t, g);
        }
    };
    let sel = select(&graph, SelectionMode::Nodes, &[0, 1]).unwrap();
    let bytes = export_subpopulation(&graph, Some(&sel), &table, None).unwrap().to_json();
    let imported = import_subpopulation(&bytes).unwrap();
    assert_eq!(imported.table.row_ids(), subpopulation_rows(&sel, &graph).unwrap().as_slice());
    assert_eq!(imported.table.schema(), table.schema());
    let again = compute_mapper(&imported.table, &graph.params);
    assert!(again.is_ok() || imported.table.n_rows() == 0);
}

#[test]
fn aligned_x_order_matches_filter_means() {
    let mut r = rng(4321);
    for case in 0..100 {
        let n = r.random_range(1..40);
        let graph = fixtures::random_graph(&mut r, n, 0.2);
        let layout = filter_aligned_layout(&graph, "f", case).unwrap();
        let mean = |id: usize| graph.nodes[id].aggregates.numeric_means["f"].unwrap();
        for a in 0..n {
            for b in 0..n {
                let (xa, xb) = (layout.positions[&a][0], layout.positions[&b][0]);
                match mean(a).total_cmp(&mean(b)) {
                    std::cmp::Ordering::Less => assert!(xa < xb, "case {case}: nodes {a},{b}"),
                    std::cmp::Ordering::Equal => {
                        assert_eq!(xa, xb);
                        if a != b {
                            let dy = (layout.positions[&a][1] - layout.positions[&b][1]).abs();
                            assert!(dy >= NODE_RADIUS * (1.0 - 1e-9), "case {case}: tie {a},{b} dy {dy}");
                        }
                    }
                    std::cmp::Ordering::Greater => assert!(xa > xb),
                }
            }
        }
        for p in layout.positions.values() {
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        }
    }
}

#[test]
fn force_layout_stays_in_unit_square() {
    let mut r = rng(5);
    for seed in 0..20 {
        let n = r.random_range(1..30);
        let graph = fixtures::random_graph(&mut r, n, 0.0);
        let a = force_layout(&graph, 100, seed).unwrap();
        assert_eq!(a, force_layout(&graph, 100, seed).unwrap());
        assert_eq!(a.positions.len(), n);
        for p in a.positions.values() {
            assert!(p.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn subpopulation_rows_set_identities() {
    let mut r = rng(31);
    for _ in 0..100 {
        let n = r.random_range(1..20);
        let graph = fixtures::random_graph(&mut r, n, 0.0);
        let chosen: Vec<usize> = (0..n).filter(|_| r.random::<bool>()).collect();
        let sel = select(&graph, SelectionMode::Nodes, &chosen).unwrap();
        let rows = subpopulation_rows(&sel, &graph).unwrap();
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        let total: usize = chosen.iter().map(|&id| graph.nodes[id].size).sum();
        let disjoint = chosen.iter().enumerate().all(|(k, &a)| {
            chosen[k + 1..].iter().all(|&b| {
                let sa: BTreeSet<_> = graph.nodes[a].row_ids.iter().collect();
                graph.nodes[b].row_ids.iter().all(|x| !sa.contains(x))
            })
        });
        assert!(rows.len() <= total);
        assert_eq!(rows.len() == total, disjoint);

        // Adding a node never removes a row.
        let extra = r.random_range(0..n);
        let mut more = chosen.clone();
        more.push(extra);
        let bigger = subpopulation_rows(&select(&graph, SelectionMode::Nodes, &more).unwrap(), &graph).unwrap();
        assert!(rows.iter().all(|x| bigger.binary_search(x).is_ok()));
    }
}

#[test]
fn path_selection_matches_bfs_distance() {
    let mut r = rng(47);
    for _ in 0..50 {
        let n = r.random_range(2..25);
        let graph = fixtures::random_graph(&mut r, n, 0.0);
        let (a, b) = (r.random_range(0..n), r.random_range(0..n));
        let dist = oracles::bfs_distances(&graph, a);
        match select(&graph, SelectionMode::Path, &[a, b]) {
            Ok(sel) => assert_eq!(sel.node_ids.len(), dist[&b] + 1),
            Err(_) => assert!(!dist.contains_key(&b)),
        }
    }
}
