mod common;

use std::collections::BTreeSet;

use common::*;
use datamarket::graph::edge_set_weight;
use datamarket::prelude::*;
use datamarket::search::{
    acceptance_probability, brute_force, budget_from_ratio, enumerate_candidates, evaluate_candidate, price_bounds,
    recompute, Estimator,
};
use proptest::prelude::*;

#[test]
fn acceptance_goldens() {
    assert_eq!(acceptance_probability(0.4, 0.8), 1.0);
    assert_eq!(acceptance_probability(0.8, 0.4), 0.5);
    assert_eq!(acceptance_probability(0.0, 0.1), 1.0);
    assert_eq!(acceptance_probability(0.0, 0.0), 1.0);
}

#[test]
fn correlation_difference_goldens() {
    assert_eq!(correlation_difference(0.5, 0.5).unwrap(), 0.0);
    assert!((correlation_difference(10.0, 7.0).unwrap() - 0.3).abs() < 1e-12);
    assert!(correlation_difference(0.0, 1.0).is_err());
}

#[test]
fn budget_ratio_rules() {
    assert_eq!(budget_from_ratio(0.5, 1.0, 4.0).unwrap(), 2.0);
    assert!(matches!(budget_from_ratio(0.1, 1.0, 4.0), Err(Error::Infeasible(_))));
    assert!(budget_from_ratio(0.0, 0.0, 4.0).is_err());
    assert!(budget_from_ratio(1.5, 0.0, 4.0).is_err());
}

#[test]
fn request_validation() {
    let mut r = AcquisitionRequest::new(attrs("s"), attrs("t"));
    assert!(r.validate().is_ok());
    r.beta = 1.5;
    assert!(r.validate().is_err());
    r.beta = 0.5;
    r.ell = 0;
    assert!(r.validate().is_err());
    assert!(AcquisitionRequest::new(AttrSet::new(), attrs("t")).validate().is_err());
}

#[test]
fn same_instance_gives_single_vertex() {
    let (g, mut req) = market(4, 0, 1);
    req.target = attrs("x0");
    let idx = precompute_landmarks(&g, 2, 0).unwrap();
    let ig = find_min_igraph(&g, &idx, &req).unwrap().unwrap();
    assert_eq!(ig.vertices, vec![0]);
    assert!(ig.edges.is_empty());
    assert_eq!(ig.weight, 0.0);
}

#[test]
fn tight_alpha_gives_nothing() {
    let (g, mut req) = market(5, 0, 2);
    let idx = precompute_landmarks(&g, 3, 0).unwrap();
    let ig = find_min_igraph(&g, &idx, &req).unwrap().unwrap();
    assert!(ig.weight > 0.0);
    req.alpha = ig.weight * 0.5;
    assert!(find_min_igraph(&g, &idx, &req).unwrap().is_none());
    let report = acquire(&g, &idx, &req, &sample_estimator(0.5, 0)).unwrap();
    assert!(report.result.is_none() && report.reason.is_some());
}

#[test]
fn uncovered_attribute_is_reported() {
    let (g, mut req) = market(3, 0, 2);
    req.target = attrs("nowhere");
    let idx = precompute_landmarks(&g, 2, 0).unwrap();
    assert!(matches!(find_min_igraph(&g, &idx, &req), Err(Error::Uncovered(_))));
}

/// Lightest tree spanning the terminals: minimum over vertex supersets of the induced minimum spanning tree.
fn steiner_optimum(g: &JoinGraph, terminals: &[usize]) -> f64 {
    let n = g.n_instances();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        if !terminals.iter().all(|&t| mask >> t & 1 == 1) {
            continue;
        }
        let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        // Prim on the induced subgraph
        let mut inside = vec![verts[0]];
        let mut total = 0.0;
        while inside.len() < verts.len() {
            let mut pick: Option<(f64, usize)> = None;
            for &u in &inside {
                for &v in &verts {
                    if inside.contains(&v) {
                        continue;
                    }
                    if let Some(e) = g.edge_between(u, v) {
                        if pick.map_or(true, |(w, _)| e.weight < w) {
                            pick = Some((e.weight, v));
                        }
                    }
                }
            }
            match pick {
                Some((w, v)) => {
                    total += w;
                    inside.push(v);
                }
                None => {
                    total = f64::INFINITY;
                    break;
                }
            }
        }
        best = best.min(total);
    }
    best
}

#[test]
fn step_one_is_within_twice_the_steiner_optimum() {
    for seed in 0..10 {
        let (g, mut req) = market(8, 3, seed);
        // spread the target over several instances so there are more than two terminals
        req.target = attrs("t,x3,x5");
        let idx = precompute_landmarks(&g, default_landmark_count(8), seed).unwrap();
        let ig = find_min_igraph(&g, &idx, &req).unwrap().unwrap();
        let terminals: Vec<usize> = ig.terminals.clone();
        let opt = steiner_optimum(&g, &terminals);
        assert!(ig.weight <= 2.0 * opt + 1e-9, "seed {seed}: {} vs optimum {opt}", ig.weight);
        // a tree whose leaves are terminals
        let edges: BTreeSet<(usize, usize)> = ig.edges.iter().copied().collect();
        assert_eq!(ig.edges.len() + 1, ig.vertices.len());
        assert!((edge_set_weight(&g, &edges) - ig.weight).abs() < 1e-12);
        for &v in &ig.vertices {
            let deg = ig.edges.iter().filter(|&&(a, b)| a == v || b == v).count();
            assert!(deg != 1 || terminals.contains(&v));
        }
    }
}

#[test]
fn search_is_deterministic_and_counts_evaluations() {
    let (g, mut req) = market(5, 1, 7);
    req.ell = 300;
    let idx = precompute_landmarks(&g, 3, 7).unwrap();
    let est = sample_estimator(0.5, 7);
    let a = acquire(&g, &idx, &req, &est).unwrap();
    let b = acquire(&g, &idx, &req, &est).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.evaluations, 300);
    assert_eq!(a.trace.len(), 300);
    assert!(a.distinct_candidates <= 300);
    assert!(a.result.is_some());
}

#[test]
fn returned_graph_is_feasible_when_recomputed() {
    let (g, mut req) = market(6, 1, 3);
    let idx = precompute_landmarks(&g, 3, 3).unwrap();
    let est = sample_estimator(0.5, 3);
    let free = acquire(&g, &idx, &req, &est).unwrap().result.unwrap();
    req.budget = free.price * 1.2;
    req.alpha = free.weight + 0.5;
    req.beta = 0.5;
    req.ell = 400;
    if let Some(tg) = acquire(&g, &idx, &req, &est).unwrap().result {
        let again = recompute(&g, &tg, &req, &est).unwrap();
        assert!((again.price - tg.price).abs() < 1e-9);
        assert!((again.weight - tg.weight).abs() < 1e-9);
        assert!((again.quality - tg.quality).abs() < 1e-9);
        assert!(again.price <= req.budget && again.weight <= req.alpha && again.quality >= req.beta);
        let p: f64 = tg.vertices.iter().map(|v| v.price).sum();
        assert!((p - tg.price).abs() < 1e-9);
        assert_eq!(tg.queries().len(), tg.vertices.len());
    }
}

#[test]
fn oracles_bound_the_heuristic() {
    let guard = OracleGuard::default();
    for seed in 0..4 {
        let (g, mut req) = market(4, 0, seed);
        req.ell = 500;
        let est = sample_estimator(0.5, seed);
        let idx = precompute_landmarks(&g, 2, seed).unwrap();
        let gp = brute_force_gp(&g, &req, &guard).unwrap().best.unwrap();
        let lp = brute_force_lp(&g, &req, &est, &guard).unwrap().best.unwrap();
        let heur = acquire(&g, &idx, &req, &est).unwrap().result.unwrap();
        let exact = ExactEstimator::default();
        let lp_real = recompute(&g, &lp, &req, &exact).unwrap().correlation;
        let heur_real = recompute(&g, &heur, &req, &exact).unwrap().correlation;
        assert!(gp.correlation >= lp_real - 1e-12, "seed {seed}");
        assert!(gp.correlation >= heur_real - 1e-12, "seed {seed}");
        assert!(lp.correlation >= heur.correlation - 1e-12, "seed {seed}");
    }
}

#[test]
fn long_walk_recovers_sample_optimum() {
    let guard = OracleGuard::default();
    let mut checked = 0;
    for seed in 0..12 {
        let (g, mut req) = market(4, 0, seed);
        let est = sample_estimator(0.5, seed);
        let cands = enumerate_candidates(&g, &req, &guard).unwrap();
        if cands.len() > 50 {
            continue;
        }
        checked += 1;
        let lp = brute_force_lp(&g, &req, &est, &guard).unwrap().best.unwrap();
        let idx = precompute_landmarks(&g, 2, seed).unwrap();
        for run in 0..3 {
            req.seed = run;
            req.ell = 2000;
            let heur = acquire(&g, &idx, &req, &est).unwrap().result.unwrap();
            assert_eq!(heur.correlation, lp.correlation, "seed {seed} run {run}");
        }
    }
    assert!(checked >= 3);
}

#[test]
fn oracle_edge_cases() {
    let guard = OracleGuard::default();
    let (g, mut req) = market(3, 0, 5);
    let est = sample_estimator(0.5, 5);
    let (lb, ub) = price_bounds(&g, &req, &est, &guard).unwrap().unwrap();
    assert!(lb <= ub);
    req.budget = lb * 0.5;
    assert!(brute_force(&g, &req, &est, &guard).unwrap().best.is_none());
    req.budget = f64::INFINITY;
    let big = (9, 0, 5);
    let (g9, r9) = market(big.0, big.1, big.2);
    assert!(matches!(brute_force_gp(&g9, &r9, &guard), Err(Error::Capacity(_))));
    // a request answered by one instance has exactly one candidate
    let mut single = req.clone();
    single.target = attrs("x0");
    let res = brute_force(&g, &single, &est, &guard).unwrap();
    assert_eq!(res.candidates, 1);
    assert_eq!(res.best.unwrap().candidate.vertices, vec![0]);
}

#[test]
fn budget_sweep_never_lowers_correlation() {
    let guard = OracleGuard::default();
    for seed in 0..4 {
        let (g, mut req) = market(4, 1, seed);
        let est = sample_estimator(0.5, seed);
        let idx = precompute_landmarks(&g, 2, seed).unwrap();
        let (lb, ub) = price_bounds(&g, &req, &est, &guard).unwrap().unwrap();
        req.ell = 1000;
        let mut last = f64::NEG_INFINITY;
        for r in [0.25, 0.5, 0.75, 1.0] {
            let Ok(b) = budget_from_ratio(r, lb, ub) else { continue };
            req.budget = b;
            let corr = acquire(&g, &idx, &req, &est).unwrap().result.map_or(f64::NEG_INFINITY, |t| t.correlation);
            assert!(corr >= last, "seed {seed} ratio {r}: {corr} < {last}");
            last = corr;
        }
    }
}

#[test]
fn estimator_weights_match_graph_groups() {
    let (g, req) = market(4, 0, 9);
    let est = sample_estimator(0.5, 9);
    let cands = enumerate_candidates(&g, &req, &OracleGuard::default()).unwrap();
    for c in cands.iter().take(10) {
        let Ok(tg) = evaluate_candidate(&g, c, &req, &est) else { continue };
        for (e, &(a, b)) in tg.edges.iter().zip(&c.edges) {
            assert_eq!(e.weight, est.weight(&g, a, b, &e.on).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn feasibility_holds_under_random_constraints(seed in 0u64..200, bf in 0.3f64..1.5, af in 0.3f64..1.5, beta in 0.0f64..0.9) {
        let (g, mut req) = market(5, 1, seed);
        let est = sample_estimator(0.5, seed);
        let idx = precompute_landmarks(&g, 3, seed).unwrap();
        req.ell = 200;
        let Some(free) = acquire(&g, &idx, &req, &est).unwrap().result else { return Ok(()) };
        req.budget = free.price * bf;
        req.alpha = free.weight * af;
        req.beta = beta;
        let report = acquire(&g, &idx, &req, &est).unwrap();
        prop_assert_eq!(report.result.is_none(), report.reason.is_some());
        if let Some(tg) = report.result {
            let again = recompute(&g, &tg, &req, &est).unwrap();
            prop_assert!(again.price <= req.budget + 1e-9);
            prop_assert!(again.weight <= req.alpha + 1e-9);
            prop_assert!(again.quality >= req.beta - 1e-9);
        }
    }
}
