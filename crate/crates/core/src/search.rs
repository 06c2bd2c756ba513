//! Online acquisition: the landmark-based instance-layer search, the MCMC
//! walk over join-attribute choices, exhaustive oracles and evaluation metrics.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::graph::{add_path, dijkstra, edge_set_weight, instance_covers, path_to_source, JoinGraph, LandmarkIndex};
use crate::info::{correlation, join_informativeness, price_projection};
use crate::partition::{join_chain, quality_fds, Fd, DEFAULT_JOIN_CAP};
use crate::relation::Relation;
use crate::sampling::{estimate_corr_quality, estimate_ji, ChainStep, HashSampler, ResampleConfig};

/// What a shopper asks for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionRequest {
    /// Instances the shopper already owns; they must cover the source attributes.
    pub source_instances: Option<Vec<String>>,
    pub source: AttrSet,
    pub target: AttrSet,
    pub budget: f64,
    /// Cap on the summed join-informativeness weight.
    pub alpha: f64,
    /// Floor on the quality of the joined result.
    pub beta: f64,
    pub ell: usize,
    pub seed: u64,
}

impl AcquisitionRequest {
    /// An unconstrained request with 1000 iterations.
    pub fn new(source: AttrSet, target: AttrSet) -> AcquisitionRequest {
        AcquisitionRequest {
            source_instances: None,
            source,
            target,
            budget: f64::INFINITY,
            alpha: f64::INFINITY,
            beta: 0.0,
            ell: 1000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_empty() || self.target.is_empty() {
            return Err(Error::Argument("source and target attributes must be nonempty".into()));
        }
        if !(self.budget >= 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::Argument("budget and alpha must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Argument(format!("beta {} outside [0,1]", self.beta)));
        }
        if self.ell == 0 {
            return Err(Error::Argument("ell must be at least 1".into()));
        }
        Ok(())
    }

    fn wanted(&self) -> AttrSet {
        self.source.union(&self.target)
    }

    fn source_indices(&self, graph: &JoinGraph) -> Result<Option<Vec<usize>>> {
        let Some(names) = &self.source_instances else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for n in names {
            out.push(graph.index_of(n).ok_or_else(|| Error::Argument(format!("unknown instance `{n}`")))?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(Some(out))
    }

    fn admits(&self, price: f64, weight: f64, quality: f64) -> bool {
        price <= self.budget && weight <= self.alpha && quality >= self.beta
    }
}

/// A connected instance-layer subgraph (a tree after reduction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IGraph {
    pub vertices: Vec<usize>,
    /// `(low, high)` instance pairs.
    pub edges: Vec<(usize, usize)>,
    pub weight: f64,
    pub terminals: Vec<usize>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Minimum spanning forest of `edges`, then repeated removal of non-terminal leaves.
pub fn reduce_to_tree(graph: &JoinGraph, edges: &BTreeSet<(usize, usize)>, terminals: &[usize]) -> IGraph {
    let mut sorted: Vec<(f64, usize, usize)> = edges
        .iter()
        .map(|&(a, b)| (graph.edge_between(a, b).map_or(f64::INFINITY, |e| e.weight), a, b))
        .collect();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut parent: Vec<usize> = (0..graph.n_instances()).collect();
    let mut tree: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (_, a, b) in sorted {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            tree.insert((a, b));
        }
    }
    loop {
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for &(a, b) in &tree {
            *degree.entry(a).or_default() += 1;
            *degree.entry(b).or_default() += 1;
        }
        let leaf_edge = tree.iter().copied().find(|&(a, b)| {
            (degree[&a] == 1 && !terminals.contains(&a)) || (degree[&b] == 1 && !terminals.contains(&b))
        });
        match leaf_edge {
            Some(e) => {
                tree.remove(&e);
            }
            None => break,
        }
    }
    let mut vertices: BTreeSet<usize> = terminals.iter().copied().collect();
    for &(a, b) in &tree {
        vertices.insert(a);
        vertices.insert(b);
    }
    IGraph {
        vertices: vertices.into_iter().collect(),
        weight: edge_set_weight(graph, &tree),
        edges: tree.into_iter().collect(),
        terminals: terminals.to_vec(),
    }
}

fn union_via_landmarks(index: &LandmarkIndex, terminals: &[usize], graph: &JoinGraph) -> Option<BTreeSet<(usize, usize)>> {
    let mut common: Option<BTreeSet<usize>> = None;
    for &t in terminals {
        let r = index.reachable_from(t);
        common = Some(match common {
            None => r,
            Some(c) => c.intersection(&r).copied().collect(),
        });
    }
    let mut best: Option<(f64, BTreeSet<(usize, usize)>)> = None;
    for k in common.unwrap_or_default() {
        let mut edges = BTreeSet::new();
        for &t in terminals {
            add_path(&mut edges, &index.path(k, t)?);
        }
        let w = edge_set_weight(graph, &edges);
        if best.as_ref().map_or(true, |(bw, _)| w < *bw) {
            best = Some((w, edges));
        }
    }
    best.map(|(_, e)| e)
}

fn union_via_exact(graph: &JoinGraph, terminals: &[usize]) -> Option<BTreeSet<(usize, usize)>> {
    let (dist, pred) = dijkstra(graph, terminals[0]);
    let mut edges = BTreeSet::new();
    for &t in &terminals[1..] {
        add_path(&mut edges, &path_to_source(&pred, &dist, t)?);
    }
    Some(edges)
}

/// Minimal-weight instance-layer graph linking a source cover to a target cover.
///
/// For every pair of minimal covers the stored landmark paths of all terminals
/// are united per common landmark and the lightest union kept; without a common
/// landmark exact shortest paths from the first terminal are used. The union is
/// reduced to a tree whose leaves are terminals. Returns `None` when the lightest
/// tree is heavier than `alpha` or no cover pair can be connected.
pub fn find_min_igraph(graph: &JoinGraph, index: &LandmarkIndex, req: &AcquisitionRequest) -> Result<Option<IGraph>> {
    req.validate()?;
    let src = req.source_indices(graph)?;
    let source_covers = match &src {
        Some(s) => {
            instance_covers(graph, &req.source, Some(s))?;
            vec![s.clone()]
        }
        None => instance_covers(graph, &req.source, None)?,
    };
    let target_covers = instance_covers(graph, &req.target, None)?;
    let mut best: Option<IGraph> = None;
    for cs in source_covers.iter().take(64) {
        for ct in target_covers.iter().take(64) {
            let terminals: Vec<usize> = cs.iter().chain(ct).copied().collect::<BTreeSet<_>>().into_iter().collect();
            let union = if terminals.len() == 1 {
                Some(BTreeSet::new())
            } else {
                union_via_landmarks(index, &terminals, graph).or_else(|| union_via_exact(graph, &terminals))
            };
            let Some(union) = union else { continue };
            let tree = reduce_to_tree(graph, &union, &terminals);
            if best.as_ref().map_or(true, |b| tree.weight < b.weight) {
                best = Some(tree);
            }
        }
    }
    Ok(best.filter(|b| b.weight <= req.alpha))
}

/// A point of the search space: a tree of instances and one join-attribute set per edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub joins: Vec<AttrSet>,
}

/// Per-instance piece of a join plan: instance, projection and sampling keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub instance: usize,
    pub projection: AttrSet,
    pub keys: Vec<AttrSet>,
}

/// Source of prices, weights and joined measures for candidates.
pub trait Estimator {
    fn price(&self, graph: &JoinGraph, instance: usize, attrs: &AttrSet) -> Result<f64>;
    fn weight(&self, graph: &JoinGraph, a: usize, b: usize, on: &AttrSet) -> Result<f64>;
    /// `(correlation, quality)` of the join of the plan.
    fn measure(&self, graph: &JoinGraph, plan: &[PlanStep], source: &AttrSet, target: &AttrSet, fds: &[Fd]) -> Result<(f64, f64)>;
}

fn projected(graph: &JoinGraph, plan: &[PlanStep]) -> Result<Vec<Relation>> {
    plan.iter().map(|s| graph.instance(s.instance).relation.project(&s.projection)).collect()
}

/// Estimates from the join graph: sample prices, sample JI weights, correlated samples for joins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleEstimator {
    pub sampler: HashSampler,
    pub resample: ResampleConfig,
}

impl Estimator for SampleEstimator {
    fn price(&self, graph: &JoinGraph, instance: usize, attrs: &AttrSet) -> Result<f64> {
        graph.price(instance, attrs)
    }

    fn weight(&self, graph: &JoinGraph, a: usize, b: usize, on: &AttrSet) -> Result<f64> {
        if let Some(g) = graph.edge_between(a, b).and_then(|e| e.group(on)) {
            return Ok(g.weight);
        }
        estimate_ji(&graph.instance(a).relation, &graph.instance(b).relation, on, &graph.config().sampler)
    }

    fn measure(&self, graph: &JoinGraph, plan: &[PlanStep], source: &AttrSet, target: &AttrSet, fds: &[Fd]) -> Result<(f64, f64)> {
        let rels = projected(graph, plan)?;
        let chain: Vec<ChainStep<'_>> = plan
            .iter()
            .zip(&rels)
            .map(|(s, r)| ChainStep { relation: r, sample_keys: s.keys.clone(), sampler: self.sampler })
            .collect();
        estimate_corr_quality(&chain, source, target, fds, &self.resample)
    }
}

/// Exact values on the full instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactEstimator {
    pub join_cap: usize,
}

impl Default for ExactEstimator {
    fn default() -> Self {
        ExactEstimator { join_cap: DEFAULT_JOIN_CAP }
    }
}

impl Estimator for ExactEstimator {
    fn price(&self, graph: &JoinGraph, instance: usize, attrs: &AttrSet) -> Result<f64> {
        price_projection(&graph.instance(instance).relation, attrs, &graph.config().price)
    }

    fn weight(&self, graph: &JoinGraph, a: usize, b: usize, on: &AttrSet) -> Result<f64> {
        join_informativeness(&graph.instance(a).relation, &graph.instance(b).relation, on)
    }

    fn measure(&self, graph: &JoinGraph, plan: &[PlanStep], source: &AttrSet, target: &AttrSet, fds: &[Fd]) -> Result<(f64, f64)> {
        let rels = projected(graph, plan)?;
        let refs: Vec<&Relation> = rels.iter().collect();
        let joined = join_chain(&refs, self.join_cap)?;
        if joined.is_empty() {
            return Err(Error::EstimationFailed { seed: 0, reason: "join is empty".into() });
        }
        Ok((correlation(&joined, source, target)?, quality_fds(&joined, fds)?))
    }
}

/// One chosen instance with its projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TgVertex {
    pub instance: String,
    pub projection: AttrSet,
    pub price: f64,
}

/// One chosen join.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TgEdge {
    pub left: String,
    pub right: String,
    /// Join attributes picked by the search.
    pub chosen: AttrSet,
    /// Attributes the two projections actually share.
    pub on: AttrSet,
    pub weight: f64,
}

/// A fully evaluated purchase candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetGraph {
    pub candidate: Candidate,
    pub vertices: Vec<TgVertex>,
    pub edges: Vec<TgEdge>,
    pub price: f64,
    pub weight: f64,
    pub quality: f64,
    pub correlation: f64,
}

impl TargetGraph {
    /// `(instance, projection)` pairs, one projection query per purchased instance.
    pub fn queries(&self) -> Vec<(String, AttrSet)> {
        self.vertices.iter().map(|v| (v.instance.clone(), v.projection.clone())).collect()
    }
}

struct Costs {
    plan: Vec<PlanStep>,
    edge_on: Vec<AttrSet>,
    weights: Vec<f64>,
    prices: Vec<f64>,
    fds: Vec<Fd>,
}

fn projections(graph: &JoinGraph, cand: &Candidate, req: &AcquisitionRequest) -> Result<Vec<AttrSet>> {
    let wanted = req.wanted();
    let mut proj: Vec<AttrSet> = cand
        .vertices
        .iter()
        .map(|&v| graph.instance(v).attrs().intersection(&wanted))
        .collect();
    for (&(a, b), j) in cand.edges.iter().zip(&cand.joins) {
        for end in [a, b] {
            let pos = cand.vertices.iter().position(|&v| v == end).ok_or_else(|| Error::Argument("edge outside candidate".into()))?;
            proj[pos] = proj[pos].union(j);
        }
    }
    for (p, &v) in proj.iter().zip(&cand.vertices) {
        if p.len() < 2 {
            return Err(Error::Argument(format!(
                "projection of `{}` has fewer than two attributes",
                graph.instance(v).name()
            )));
        }
    }
    Ok(proj)
}

fn dfs_order(cand: &Candidate, start: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(cand.vertices.len());
    let mut seen = vec![false; cand.vertices.len()];
    let mut stack = vec![start];
    while let Some(p) = stack.pop() {
        if seen[p] {
            continue;
        }
        seen[p] = true;
        order.push(p);
        let mut next: Vec<usize> = cand
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                let v = cand.vertices[p];
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .filter_map(|u| cand.vertices.iter().position(|&x| x == u))
            .filter(|&q| !seen[q])
            .collect();
        next.sort_unstable_by(|x, y| y.cmp(x));
        stack.extend(next);
    }
    order
}

fn costs(graph: &JoinGraph, cand: &Candidate, req: &AcquisitionRequest, est: &dyn Estimator) -> Result<Costs> {
    let proj = projections(graph, cand, req)?;
    let mut edge_on = Vec::with_capacity(cand.edges.len());
    let mut weights = Vec::with_capacity(cand.edges.len());
    let pos = |v: usize| cand.vertices.iter().position(|&x| x == v).unwrap();
    let mut keys: Vec<Vec<AttrSet>> = vec![Vec::new(); cand.vertices.len()];
    for &(a, b) in &cand.edges {
        let on = proj[pos(a)].intersection(&proj[pos(b)]);
        weights.push(est.weight(graph, a, b, &on)?);
        keys[pos(a)].push(on.clone());
        keys[pos(b)].push(on.clone());
        edge_on.push(on);
    }
    let mut prices = Vec::with_capacity(cand.vertices.len());
    let mut fds = Vec::new();
    for (p, &v) in proj.iter().zip(&cand.vertices) {
        prices.push(est.price(graph, v, p)?);
        for fd in graph.instance(v).fds_within(p) {
            if !fds.contains(&fd) {
                fds.push(fd);
            }
        }
    }
    let start = cand
        .vertices
        .iter()
        .position(|&v| !graph.instance(v).attrs().intersection(&req.source).is_empty())
        .unwrap_or(0);
    let plan = dfs_order(cand, start)
        .into_iter()
        .map(|p| PlanStep { instance: cand.vertices[p], projection: proj[p].clone(), keys: keys[p].clone() })
        .collect();
    Ok(Costs { plan, edge_on, weights, prices, fds })
}

/// Price, weight, quality and correlation of a candidate under `est`.
/// Fails when the candidate is not a valid target graph or its join cannot be measured.
pub fn evaluate_candidate(graph: &JoinGraph, cand: &Candidate, req: &AcquisitionRequest, est: &dyn Estimator) -> Result<TargetGraph> {
    let c = costs(graph, cand, req, est)?;
    let (corr, quality) = est.measure(graph, &c.plan, &req.source, &req.target, &c.fds)?;
    let vertices: Vec<TgVertex> = cand
        .vertices
        .iter()
        .zip(&c.prices)
        .map(|(&v, &price)| {
            let projection = c.plan.iter().find(|s| s.instance == v).unwrap().projection.clone();
            TgVertex { instance: graph.instance(v).name().to_string(), projection, price }
        })
        .collect();
    let edges: Vec<TgEdge> = cand
        .edges
        .iter()
        .zip(&cand.joins)
        .zip(c.edge_on.iter().zip(&c.weights))
        .map(|((&(a, b), chosen), (on, &weight))| TgEdge {
            left: graph.instance(a).name().to_string(),
            right: graph.instance(b).name().to_string(),
            chosen: chosen.clone(),
            on: on.clone(),
            weight,
        })
        .collect();
    Ok(TargetGraph {
        candidate: cand.clone(),
        price: vertices.iter().map(|v| v.price).sum(),
        weight: edges.iter().map(|e| e.weight).sum(),
        vertices,
        edges,
        quality,
        correlation: corr,
    })
}

/// Price of a candidate only (no join is performed).
pub fn candidate_price(graph: &JoinGraph, cand: &Candidate, req: &AcquisitionRequest, est: &dyn Estimator) -> Result<f64> {
    Ok(costs(graph, cand, req, est)?.prices.iter().sum())
}

/// Metropolis acceptance probability for moving from correlation `current` to `proposed`.
pub fn acceptance_probability(current: f64, proposed: f64) -> f64 {
    if current <= 0.0 {
        1.0
    } else {
        (proposed / current).clamp(0.0, 1.0)
    }
}

/// One MCMC iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    /// Index of the edge whose join attributes were changed; `None` for a null move.
    pub edge: Option<usize>,
    pub feasible: bool,
    pub accepted: bool,
    pub correlation: Option<f64>,
}

/// Result of one acquisition search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub igraph: Option<IGraph>,
    pub result: Option<TargetGraph>,
    /// Why `result` is empty, when it is.
    pub reason: Option<String>,
    /// Candidate evaluations performed by the walk (always `ell`).
    pub evaluations: usize,
    /// Distinct candidates among them.
    pub distinct_candidates: usize,
    pub trace: Vec<TraceStep>,
}

impl SearchReport {
    fn empty(igraph: Option<IGraph>, reason: &str) -> SearchReport {
        SearchReport {
            igraph,
            result: None,
            reason: Some(reason.to_string()),
            evaluations: 0,
            distinct_candidates: 0,
            trace: Vec::new(),
        }
    }
}

/// Metropolis walk over the join-attribute choices of the edges of `igraph`.
///
/// Starts from the lightest join group on every edge. Each of the `ell`
/// iterations changes one uniformly chosen edge to a uniformly chosen other
/// group, checks budget, weight and quality, and accepts a feasible proposal
/// with probability `min(1, corr'/corr)`. The best accepted graph (by
/// correlation) is returned; a feasible starting point counts as accepted.
pub fn find_target_graph(graph: &JoinGraph, igraph: &IGraph, req: &AcquisitionRequest, est: &dyn Estimator) -> Result<SearchReport> {
    req.validate()?;
    if igraph.vertices.is_empty() {
        return Err(Error::Argument("empty instance graph".into()));
    }
    let mut options: Vec<Vec<AttrSet>> = Vec::with_capacity(igraph.edges.len());
    let mut state: Vec<usize> = Vec::with_capacity(igraph.edges.len());
    for &(a, b) in &igraph.edges {
        let edge = graph
            .edge_between(a, b)
            .ok_or_else(|| Error::Argument(format!("no edge between instances {a} and {b}")))?;
        let lightest = (0..edge.groups.len())
            .min_by(|&x, &y| edge.groups[x].weight.total_cmp(&edge.groups[y].weight))
            .unwrap_or(0);
        options.push(edge.groups.iter().map(|g| g.on.clone()).collect());
        state.push(lightest);
    }
    let make = |s: &[usize]| Candidate {
        vertices: igraph.vertices.clone(),
        edges: igraph.edges.clone(),
        joins: s.iter().zip(&options).map(|(&i, o)| o[i].clone()).collect(),
    };
    let mut cache: HashMap<Vec<usize>, Option<TargetGraph>> = HashMap::new();
    let mut eval = |s: &[usize]| -> Option<TargetGraph> {
        cache
            .entry(s.to_vec())
            .or_insert_with(|| evaluate_candidate(graph, &make(s), req, est).ok())
            .clone()
    };
    let feasible = |tg: &Option<TargetGraph>| tg.as_ref().map_or(false, |t| req.admits(t.price, t.weight, t.quality));

    let mut current = eval(&state);
    let mut current_corr = current.as_ref().map_or(0.0, |t| t.correlation);
    let mut best: Option<TargetGraph> = if feasible(&current) { current.clone() } else { None };
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut trace = Vec::with_capacity(req.ell);
    for iteration in 0..req.ell {
        let (u_edge, u_opt, u_acc): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let mut proposal = state.clone();
        let mut edge = None;
        if !options.is_empty() {
            let e = ((u_edge * options.len() as f64) as usize).min(options.len() - 1);
            let k = options[e].len();
            if k > 1 {
                let mut pick = ((u_opt * (k - 1) as f64) as usize).min(k - 2);
                if pick >= state[e] {
                    pick += 1;
                }
                proposal[e] = pick;
                edge = Some(e);
            }
        }
        let tg = eval(&proposal);
        let ok = feasible(&tg);
        let mut accepted = false;
        if ok {
            let corr = tg.as_ref().unwrap().correlation;
            if u_acc < acceptance_probability(current_corr, corr) {
                accepted = true;
                state = proposal;
                current = tg.clone();
                current_corr = corr;
                if best.as_ref().map_or(true, |b| corr > b.correlation) {
                    best = current.clone();
                }
            }
        }
        trace.push(TraceStep {
            iteration,
            edge,
            feasible: ok,
            accepted,
            correlation: tg.as_ref().map(|t| t.correlation),
        });
    }
    let distinct = cache.len();
    let reason = best.is_none().then(|| "no sampled target graph satisfied the budget, weight and quality constraints".to_string());
    Ok(SearchReport {
        igraph: Some(igraph.clone()),
        result: best,
        reason,
        evaluations: req.ell,
        distinct_candidates: distinct,
        trace,
    })
}

/// Step 1 followed by Step 2.
pub fn acquire(graph: &JoinGraph, index: &LandmarkIndex, req: &AcquisitionRequest, est: &dyn Estimator) -> Result<SearchReport> {
    match find_min_igraph(graph, index, req)? {
        None => Ok(SearchReport::empty(
            None,
            "no instance-layer graph connects the source and target attributes within alpha",
        )),
        Some(ig) => find_target_graph(graph, &ig, req, est),
    }
}

/// Limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleGuard {
    pub max_instances: usize,
    pub max_groups_per_pair: usize,
    pub max_candidates: usize,
}

impl Default for OracleGuard {
    fn default() -> Self {
        OracleGuard { max_instances: 8, max_groups_per_pair: 20, max_candidates: 200_000 }
    }
}

fn spanning_trees(graph: &JoinGraph, verts: &[usize], out: &mut Vec<Vec<(usize, usize)>>, cap: usize) -> Result<()> {
    let edges: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .filter(|e| verts.contains(&e.a) && verts.contains(&e.b))
        .map(|e| (e.a, e.b))
        .collect();
    let need = verts.len() - 1;
    let mut chosen = Vec::with_capacity(need);
    fn rec(
        edges: &[(usize, usize)],
        i: usize,
        need: usize,
        chosen: &mut Vec<(usize, usize)>,
        parent: &mut Vec<usize>,
        out: &mut Vec<Vec<(usize, usize)>>,
        cap: usize,
    ) -> Result<()> {
        if chosen.len() == need {
            out.push(chosen.clone());
            if out.len() > cap {
                return Err(Error::Capacity(format!("more than {cap} candidate trees")));
            }
            return Ok(());
        }
        if edges.len() - i < need - chosen.len() {
            return Ok(());
        }
        let (a, b) = edges[i];
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            let saved = parent.clone();
            parent[ra] = rb;
            chosen.push((a, b));
            rec(edges, i + 1, need, chosen, parent, out, cap)?;
            chosen.pop();
            *parent = saved;
        }
        rec(edges, i + 1, need, chosen, parent, out, cap)
    }
    let mut parent: Vec<usize> = (0..graph.n_instances()).collect();
    rec(&edges, 0, need, &mut chosen, &mut parent, out, cap)
}

/// Every candidate target graph: trees over instance subsets that cover the
/// request, whose leaves hold a requested attribute (or a source instance),
/// combined with every join-group choice per edge.
pub fn enumerate_candidates(graph: &JoinGraph, req: &AcquisitionRequest, guard: &OracleGuard) -> Result<Vec<Candidate>> {
    req.validate()?;
    let n = graph.n_instances();
    if n > guard.max_instances {
        return Err(Error::Capacity(format!("{n} instances exceed the oracle limit of {}", guard.max_instances)));
    }
    for e in graph.edges() {
        if e.groups.len() > guard.max_groups_per_pair {
            return Err(Error::Capacity(format!(
                "an instance pair has {} join groups (limit {})",
                e.groups.len(),
                guard.max_groups_per_pair
            )));
        }
    }
    let src = req.source_indices(graph)?;
    let wanted = req.wanted();
    for a in wanted.iter() {
        if !(0..n).any(|i| graph.instance(i).relation.has_attr(a)) {
            return Err(Error::Uncovered(a.to_string()));
        }
    }
    let covers = |verts: &[usize], attrs: &AttrSet| {
        attrs.iter().all(|a| verts.iter().any(|&v| graph.instance(v).relation.has_attr(a)))
    };
    if let Some(s) = &src {
        if !covers(s, &req.source) {
            return Err(Error::Argument("source instances do not cover the source attributes".into()));
        }
    }
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let verts: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if let Some(s) = &src {
            if !s.iter().all(|v| verts.contains(v)) {
                continue;
            }
        } else if !covers(&verts, &req.source) {
            continue;
        }
        if !covers(&verts, &req.target) {
            continue;
        }
        let terminal = |v: usize| {
            !graph.instance(v).attrs().intersection(&wanted).is_empty() || src.as_ref().map_or(false, |s| s.contains(&v))
        };
        let mut trees = Vec::new();
        if verts.len() == 1 {
            trees.push(Vec::new());
        } else {
            spanning_trees(graph, &verts, &mut trees, guard.max_candidates)?;
        }
        for tree in trees {
            let leaves_ok = verts.len() == 1
                || verts.iter().all(|&v| {
                    let deg = tree.iter().filter(|&&(a, b)| a == v || b == v).count();
                    deg != 1 || terminal(v)
                });
            if !leaves_ok {
                continue;
            }
            let opts: Vec<&Vec<crate::graph::JoinGroup>> =
                tree.iter().map(|&(a, b)| &graph.edge_between(a, b).unwrap().groups).collect();
            let mut idx = vec![0usize; tree.len()];
            loop {
                out.push(Candidate {
                    vertices: verts.clone(),
                    edges: tree.clone(),
                    joins: idx.iter().zip(&opts).map(|(&i, o)| o[i].on.clone()).collect(),
                });
                if out.len() > guard.max_candidates {
                    return Err(Error::Capacity(format!("more than {} candidate graphs", guard.max_candidates)));
                }
                let mut k = 0;
                while k < idx.len() {
                    idx[k] += 1;
                    if idx[k] < opts[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == idx.len() {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Outcome of an exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best: Option<TargetGraph>,
    pub candidates: usize,
    pub valid: usize,
    pub feasible: usize,
}

/// Exhaustive optimum of the request under `est`.
pub fn brute_force(graph: &JoinGraph, req: &AcquisitionRequest, est: &dyn Estimator, guard: &OracleGuard) -> Result<OracleResult> {
    let cands = enumerate_candidates(graph, req, guard)?;
    let mut best: Option<TargetGraph> = None;
    let (mut valid, mut feasible) = (0, 0);
    for c in &cands {
        let Ok(tg) = evaluate_candidate(graph, c, req, est) else { continue };
        valid += 1;
        if !req.admits(tg.price, tg.weight, tg.quality) {
            continue;
        }
        feasible += 1;
        if best.as_ref().map_or(true, |b| tg.correlation > b.correlation) {
            best = Some(tg);
        }
    }
    Ok(OracleResult { best, candidates: cands.len(), valid, feasible })
}

/// Global optimum on the original instances.
pub fn brute_force_gp(graph: &JoinGraph, req: &AcquisitionRequest, guard: &OracleGuard) -> Result<OracleResult> {
    brute_force(graph, req, &ExactEstimator::default(), guard)
}

/// Optimum over the same estimates the heuristic sees.
pub fn brute_force_lp(graph: &JoinGraph, req: &AcquisitionRequest, est: &SampleEstimator, guard: &OracleGuard) -> Result<OracleResult> {
    brute_force(graph, req, est, guard)
}

/// Smallest and largest price over all valid candidates (`LB`, `UB`).
pub fn price_bounds(graph: &JoinGraph, req: &AcquisitionRequest, est: &dyn Estimator, guard: &OracleGuard) -> Result<Option<(f64, f64)>> {
    let mut bounds: Option<(f64, f64)> = None;
    for c in enumerate_candidates(graph, req, guard)? {
        if let Ok(p) = candidate_price(graph, &c, req, est) {
            bounds = Some(match bounds {
                None => (p, p),
                Some((lo, hi)) => (lo.min(p), hi.max(p)),
            });
        }
    }
    Ok(bounds)
}

/// Budget `r * UB`, refusing ratios that fall below `LB`.
pub fn budget_from_ratio(ratio: f64, lb: f64, ub: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Argument(format!("budget ratio {ratio} outside (0,1]")));
    }
    let b = ratio * ub;
    if b < lb {
        return Err(Error::Infeasible(format!(
            "budget ratio {ratio} gives {b:.6}, below the cheapest candidate price {lb:.6}"
        )));
    }
    Ok(b)
}

/// `(opt - heur) / opt`.
pub fn correlation_difference(opt: f64, heur: f64) -> Result<f64> {
    if !(opt > 0.0) {
        return Err(Error::Argument(format!("optimal correlation {opt} must be positive")));
    }
    Ok((opt - heur) / opt)
}

/// Re-evaluates a returned graph from scratch under `est`.
pub fn recompute(graph: &JoinGraph, tg: &TargetGraph, req: &AcquisitionRequest, est: &dyn Estimator) -> Result<TargetGraph> {
    evaluate_candidate(graph, &tg.candidate, req, est)
}
