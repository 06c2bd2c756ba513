mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::*;
use datamarket::graph::{dijkstra, instance_covers, minimal_covers, realizable, CoverCandidate};
use datamarket::prelude::*;
use datamarket::synth::{marketplace, MarketplaceSpec};
use proptest::prelude::*;

fn exact_graph(rels: Vec<Relation>) -> JoinGraph {
    JoinGraph::from_relations(rels.into_iter().map(Arc::new).collect(), &GraphConfig::new(1.0, 0).unwrap()).unwrap()
}

fn lattice(m: usize) -> AsLattice {
    let names: Vec<String> = (0..m).map(|i| format!("a{i:02}")).collect();
    AsLattice::new("d", &names)
}

#[test]
fn lattice_counts() {
    for m in 2..=12 {
        let l = lattice(m);
        assert_eq!(l.vertex_count(), (1u128 << m) - m as u128 - 1);
        assert_eq!(l.vertices().unwrap().len() as u128, l.vertex_count());
    }
    let l = lattice(4);
    assert_eq!(l.vertex_count(), 11);
    assert_eq!(l.level(2).unwrap().len(), 6);
    assert_eq!(l.level(4).unwrap().len(), 1);
    assert!(lattice(21).vertices().is_err());
}

#[test]
fn lattice_links_add_one_attribute() {
    let l = lattice(5);
    for v in l.vertices().unwrap() {
        for c in l.children(&v) {
            assert!(v.is_subset(&c) && c.len() == v.len() + 1);
            assert!(l.parents(&c).contains(&v));
        }
    }
    assert!(l.parents(&attrs("a00,a01")).is_empty());
    assert!(!l.contains(&attrs("a00")));
}

#[test]
fn two_instance_graph_keeps_non_monotone_weights() {
    let (d1, d2) = lattice_pair();
    let g = exact_graph(vec![d1.clone(), d2.clone()]);
    assert_eq!(g.instance(0).lattice.vertex_count(), 4);
    assert_eq!(g.instance(1).lattice.vertex_count(), 11);
    assert_eq!(g.as_vertex_count(), 15);
    let e = g.edge_between(0, 1).expect("B and C are shared");
    let w = |s: &str| e.group(&attrs(s)).unwrap().weight;
    assert!(w("B") < w("B,C") && w("B,C") < w("C"));
    for on in ["B", "B,C", "C"] {
        assert_eq!(w(on), join_informativeness(&d1, &d2, &attrs(on)).unwrap());
    }
    assert_eq!(e.weight, w("B"));
}

#[test]
fn as_edges_share_weight_per_join_set() {
    let (d1, d2) = lattice_pair();
    let g = exact_graph(vec![d1, d2]);
    let as_edges = g.as_edges_between(0, 1).unwrap();
    assert!(!as_edges.is_empty());
    let e = g.edge_between(0, 1).unwrap();
    let mut min = f64::INFINITY;
    for (va, vb, j, w) in &as_edges {
        assert_eq!(&va.intersection(vb), j);
        assert_eq!(*w, e.group(j).unwrap().weight);
        assert!((0.0..=1.0).contains(w));
        min = min.min(*w);
    }
    assert_eq!(min, e.weight);
}

#[test]
fn single_instance_graph_has_no_edges() {
    let g = exact_graph(vec![small_ab()]);
    assert!(g.edges().is_empty());
    assert_eq!(g.as_vertex_count(), 1);
}

#[test]
fn realizable_join_sets() {
    assert!(realizable(&attrs("B"), &attrs("A,B"), &attrs("B,C")));
    // the only vertices holding B pair it with the same single attribute on both sides
    assert!(!realizable(&attrs("B"), &attrs("B,C"), &attrs("B,C")));
    assert!(realizable(&attrs("B,C"), &attrs("B,C"), &attrs("B,C")));
    assert!(!realizable(&attrs("Z"), &attrs("A,B"), &attrs("B,C")));
}

/// Seven instances of two attributes each, covering A, B, C the way the target-set example lists them.
fn cover_example() -> JoinGraph {
    let rel = |name: &str, cols: [&str; 2]| {
        Relation::from_strings(name, &cols, &[&["1", "1"], &["2", "2"]]).unwrap()
    };
    exact_graph(vec![
        rel("v1", ["A", "B"]),
        rel("v2", ["A", "B"]),
        rel("v3", ["A", "B"]),
        rel("v4", ["A", "x4"]),
        rel("v5", ["B", "C"]),
        rel("v6", ["C", "x6"]),
        rel("v7", ["B", "C"]),
    ])
}

/// Minimal covers by checking every subset of AS-vertices.
fn brute_force_covers(g: &JoinGraph, want: &AttrSet) -> BTreeSet<Vec<AsVertex>> {
    let all: Vec<AsVertex> = (0..g.n_instances())
        .flat_map(|i| g.instance(i).lattice.vertices().unwrap().into_iter().map(move |a| AsVertex { instance: i, attrs: a }))
        .collect();
    assert!(all.len() <= 16);
    let covers = |set: &[&AsVertex]| want.iter().all(|a| set.iter().any(|v| v.attrs.contains(a)));
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << all.len()) {
        let set: Vec<&AsVertex> = (0..all.len()).filter(|i| mask >> i & 1 == 1).map(|i| &all[i]).collect();
        let instances: BTreeSet<usize> = set.iter().map(|v| v.instance).collect();
        if instances.len() != set.len() || !covers(&set) {
            continue;
        }
        let minimal = (0..set.len()).all(|skip| {
            let rest: Vec<&AsVertex> = set.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
            !covers(&rest)
        });
        if minimal {
            let mut v: Vec<AsVertex> = set.into_iter().cloned().collect();
            v.sort();
            out.insert(v);
        }
    }
    out
}

#[test]
fn target_sets_of_cover_example() {
    let g = cover_example();
    let want = attrs("A,B,C");
    let sets = enumerate_target_vertex_sets(&g, &want).unwrap();
    let got: BTreeSet<Vec<AsVertex>> = sets.iter().cloned().collect();
    assert_eq!(got.len(), sets.len(), "duplicates returned");
    assert_eq!(got, brute_force_covers(&g, &want));
    assert_eq!(sets.len(), 11);
}

#[test]
fn target_sets_errors_and_single_instance() {
    let g = cover_example();
    assert!(matches!(enumerate_target_vertex_sets(&g, &attrs("Q")), Err(Error::Uncovered(a)) if a == "Q"));
    assert!(enumerate_target_vertex_sets(&g, &AttrSet::new()).is_err());
    let sets = enumerate_target_vertex_sets(&g, &attrs("A,B")).unwrap();
    assert!(sets.contains(&vec![AsVertex { instance: 0, attrs: attrs("A,B") }]));
}

#[test]
fn target_sets_match_brute_force_on_lattice_pair() {
    let (d1, d2) = lattice_pair();
    let g = exact_graph(vec![d1, d2]);
    for want in ["A,D", "B", "A,C,E", "C,D"] {
        let want = attrs(want);
        let got: BTreeSet<Vec<AsVertex>> = enumerate_target_vertex_sets(&g, &want).unwrap().into_iter().collect();
        assert_eq!(got, brute_force_covers(&g, &want), "{want}");
    }
}

#[test]
fn instance_covers_are_minimal() {
    let g = cover_example();
    let covers = instance_covers(&g, &attrs("A,B,C"), None).unwrap();
    assert_eq!(covers.len(), 11);
    assert!(covers.iter().all(|c| c.len() == 2));
    let only = instance_covers(&g, &attrs("A,B,C"), Some(&[3, 4])).unwrap();
    assert_eq!(only, vec![vec![3, 4]]);
}

fn floyd_warshall(g: &JoinGraph) -> Vec<Vec<f64>> {
    let n = g.n_instances();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in g.edges() {
        d[e.a][e.b] = d[e.a][e.b].min(e.weight);
        d[e.b][e.a] = d[e.b][e.a].min(e.weight);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn market_graph(instances: usize, extra: usize, seed: u64) -> JoinGraph {
    let mut spec = MarketplaceSpec::new(instances, seed);
    spec.extra_edges = extra;
    let m = marketplace(&spec).unwrap();
    JoinGraph::build(&m.catalog, &GraphConfig::new(0.5, seed).unwrap()).unwrap()
}

fn check_paths(g: &JoinGraph, idx: &LandmarkIndex) {
    let exact = floyd_warshall(g);
    for (k, &l) in idx.landmarks.iter().enumerate() {
        for v in 0..g.n_instances() {
            assert!((idx.distance(k, v) - exact[v][l]).abs() < 1e-9);
            let path = idx.path(k, v).unwrap();
            assert_eq!((path[0], *path.last().unwrap()), (v, l));
            let w: f64 = path.windows(2).map(|p| g.edge_between(p[0], p[1]).expect("stored path uses real edges").weight).sum();
            assert!((w - exact[v][l]).abs() < 1e-9);
        }
    }
}

#[test]
fn landmark_paths_match_all_pairs_oracle() {
    let g = market_graph(8, 3, 21);
    let idx = precompute_landmarks(&g, 3, 5).unwrap();
    assert_eq!(idx.landmarks.len(), 3);
    check_paths(&g, &idx);
    let all = precompute_landmarks(&g, 8, 5).unwrap();
    assert_eq!(all.landmarks, (0..8).collect::<Vec<_>>());
    check_paths(&g, &all);
    assert!(precompute_landmarks(&g, 9, 5).is_err());
    assert!(precompute_landmarks(&g, 0, 5).is_err());
    assert_eq!(default_landmark_count(8), 3);
    assert_eq!(default_landmark_count(1), 1);
}

#[test]
fn export_is_deterministic() {
    let a = market_graph(5, 1, 3).export();
    let b = market_graph(5, 1, 3).export();
    assert_eq!(a, b);
    assert_eq!(a.instances.len(), 5);
}

#[test]
fn cover_search_prefers_minimal_sets() {
    let cands = vec![
        CoverCandidate { id: 0, instance: 0, covers: attrs("A,B") },
        CoverCandidate { id: 1, instance: 1, covers: attrs("A") },
        CoverCandidate { id: 2, instance: 2, covers: attrs("B") },
    ];
    let covers = minimal_covers(&cands, &attrs("A,B"), 100).unwrap();
    assert_eq!(covers, vec![vec![0], vec![1, 2]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graph_invariants_hold(seed in 0u64..500, n in 2usize..7, extra in 0usize..3) {
        let g = market_graph(n, extra, seed);
        for e in g.edges() {
            let min = e.groups.iter().map(|gr| gr.weight).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(e.weight, min);
            prop_assert!(e.groups.iter().all(|gr| (0.0..=1.0).contains(&gr.weight)));
        }
        let idx = precompute_landmarks(&g, default_landmark_count(n), seed).unwrap();
        let exact = floyd_warshall(&g);
        for (k, &l) in idx.landmarks.iter().enumerate() {
            for v in 0..n {
                prop_assert!((idx.distance(k, v) - exact[v][l]).abs() < 1e-9);
                // routing any pair through a landmark never beats their true distance
                for u in 0..n {
                    prop_assert!(idx.distance(k, v) + idx.distance(k, u) >= exact[u][v] - 1e-9);
                }
            }
            let (d, _) = dijkstra(&g, l);
            prop_assert_eq!(d.len(), n);
        }
    }
}
