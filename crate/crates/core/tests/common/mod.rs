#![allow(dead_code)]

use datamarket::prelude::*;

/// Five rows over (A, B): a1/b1, a1/b1, a1/b2, a1/b3, a2/b2.
pub fn small_ab() -> Relation {
    Relation::from_strings(
        "d",
        &["A", "B"],
        &[&["a1", "b1"], &["a1", "b1"], &["a1", "b2"], &["a1", "b3"], &["a2", "b2"]],
    )
    .unwrap()
}

/// 1000 rows over (A, B, C). Rows 1..=996 carry b1 and distinct filler keys c5..c1000,
/// then a1/b2/c1, a1/b2/c2, a1/b3/c3, a1/b3/c3.
pub fn large_abc() -> Relation {
    let mut rows: Vec<Vec<Value>> = (5..=1000).map(|i| vec!["a1".into(), "b1".into(), Value::text(&format!("c{i}"))]).collect();
    for (b, c) in [("b2", "c1"), ("b2", "c2"), ("b3", "c3"), ("b3", "c3")] {
        rows.push(vec!["a1".into(), b.into(), c.into()]);
    }
    Relation::from_rows("d1", &["A", "B", "C"], rows).unwrap()
}

/// Five rows over (C, D, E).
pub fn small_cde() -> Relation {
    Relation::from_strings(
        "d2",
        &["C", "D", "E"],
        &[
            &["c1", "d1", "e1"],
            &["c1", "d1", "e1"],
            &["c2", "d1", "e2"],
            &["c3", "d1", "e2"],
            &["c4", "d1", "e2"],
        ],
    )
    .unwrap()
}

/// D1(A,B,C) and D2(B,C,D,E) where joining on B is lighter than on BC, which is lighter than on C.
pub fn lattice_pair() -> (Relation, Relation) {
    let d1 = Relation::from_strings("d1", &["A", "B", "C"], &[&["a1", "b1", "c3"], &["a2", "b2", "c1"], &["a3", "b2", "c3"]]).unwrap();
    let d2 = Relation::from_strings(
        "d2",
        &["B", "C", "D", "E"],
        &[&["b2", "c3", "d1", "e1"], &["b1", "c4", "d2", "e2"], &["b1", "c3", "d3", "e3"]],
    )
    .unwrap();
    (d1, d2)
}

pub fn attrs(s: &str) -> AttrSet {
    s.parse().unwrap()
}

pub fn fd(s: &str) -> Fd {
    s.parse().unwrap()
}

use datamarket::search::SampleEstimator;
use datamarket::synth::{marketplace, MarketplaceSpec};

/// A synthetic marketplace, its join graph (exact weights) and an unconstrained source-to-target request.
pub fn market(instances: usize, extra_edges: usize, seed: u64) -> (JoinGraph, AcquisitionRequest) {
    let mut spec = MarketplaceSpec::new(instances, seed);
    spec.extra_edges = extra_edges;
    let m = marketplace(&spec).unwrap();
    let graph = JoinGraph::build(&m.catalog, &GraphConfig::new(0.5, seed).unwrap()).unwrap();
    let mut req = AcquisitionRequest::new(m.source, m.target);
    req.seed = seed;
    (graph, req)
}

pub fn sample_estimator(rate: f64, seed: u64) -> SampleEstimator {
    SampleEstimator { sampler: HashSampler::new(seed, rate).unwrap(), resample: ResampleConfig::unbounded(seed) }
}
