//! The two-layer join graph: instances on top, attribute-set lattices below,
//! JI-weighted join edges between them, and the landmark shortest-path index.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::info::{price_projection, PriceModel};
use crate::partition::{discover_afds, AfdConfig, AfdEntry, Fd};
use crate::relation::{shared_attrs, Catalog, Relation};
use crate::sampling::{estimate_ji, row_sample, HashSampler};

/// Largest attribute count whose lattice may be materialized.
pub const MAX_LATTICE_ATTRS: usize = 20;

/// All attribute subsets of size at least two of one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsLattice {
    pub instance: String,
    attrs: Vec<String>,
}

impl AsLattice {
    pub fn new(instance: &str, attrs: &[String]) -> AsLattice {
        let mut attrs = attrs.to_vec();
        attrs.sort();
        attrs.dedup();
        AsLattice { instance: instance.to_string(), attrs }
    }

    pub fn of(rel: &Relation) -> AsLattice {
        Self::new(rel.name(), rel.schema())
    }

    pub fn n_attrs(&self) -> usize {
        self.attrs.len()
    }

    /// `2^m - m - 1`.
    pub fn vertex_count(&self) -> u128 {
        let m = self.attrs.len() as u32;
        (1u128 << m) - m as u128 - 1
    }

    pub fn contains(&self, set: &AttrSet) -> bool {
        set.len() >= 2 && set.iter().all(|a| self.attrs.binary_search_by(|x| x.as_str().cmp(a)).is_ok())
    }

    fn set_of(&self, mask: u32) -> AttrSet {
        (0..self.attrs.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.attrs[i].as_str())
            .collect()
    }

    /// Vertices with exactly `size` attributes, in lexicographic order of their bit masks.
    pub fn level(&self, size: usize) -> Result<Vec<AttrSet>> {
        self.guard()?;
        let m = self.attrs.len();
        if size < 2 || size > m {
            return Ok(Vec::new());
        }
        Ok((0u32..(1 << m))
            .filter(|mask| mask.count_ones() as usize == size)
            .map(|mask| self.set_of(mask))
            .collect())
    }

    /// Every vertex, smallest sets first.
    pub fn vertices(&self) -> Result<Vec<AttrSet>> {
        let mut out = Vec::new();
        for size in 2..=self.attrs.len() {
            out.extend(self.level(size)?);
        }
        Ok(out)
    }

    /// Vertices one attribute larger than `set`.
    pub fn children(&self, set: &AttrSet) -> Vec<AttrSet> {
        if !self.contains(set) {
            return Vec::new();
        }
        self.attrs.iter().filter(|a| !set.contains(a)).map(|a| set.with(a)).collect()
    }

    /// Vertices one attribute smaller than `set` (never below two attributes).
    pub fn parents(&self, set: &AttrSet) -> Vec<AttrSet> {
        if !self.contains(set) || set.len() <= 2 {
            return Vec::new();
        }
        set.iter().map(|a| set.without(a)).collect()
    }

    fn guard(&self) -> Result<()> {
        if self.attrs.len() > MAX_LATTICE_ATTRS {
            return Err(Error::Capacity(format!(
                "instance `{}` has {} attributes; lattices are materialized up to {MAX_LATTICE_ATTRS}",
                self.instance,
                self.attrs.len()
            )));
        }
        Ok(())
    }
}

/// Whether `j` can label an AS-edge between vertices of schemas `a` and `b`.
/// Both vertices need at least two attributes, so a one-attribute key needs
/// a distinct extra attribute on each side.
pub fn realizable(j: &AttrSet, a: &AttrSet, b: &AttrSet) -> bool {
    if !j.is_subset(a) || !j.is_subset(b) {
        return false;
    }
    match j.len() {
        0 => false,
        1 => {
            let ra = a.difference(j);
            let rb = b.difference(j);
            !ra.is_empty() && !rb.is_empty() && !(ra.len() == 1 && rb.len() == 1 && ra == rb)
        }
        _ => true,
    }
}

/// Build settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub price: PriceModel,
    /// Correlated sampler used for JI weights; its rate also drives the uniform price sample.
    pub sampler: HashSampler,
    pub afd: AfdConfig,
    /// Pairs sharing more attributes than this are refused.
    pub max_shared: usize,
}

impl GraphConfig {
    pub fn new(rate: f64, seed: u64) -> Result<GraphConfig> {
        Ok(GraphConfig {
            price: PriceModel::default(),
            sampler: HashSampler::new(seed, rate)?,
            afd: AfdConfig::default(),
            max_shared: 12,
        })
    }
}

/// One instance vertex.
#[derive(Debug, Clone)]
pub struct Instance {
    pub relation: Arc<Relation>,
    /// Uniform row sample used to price attribute sets.
    pub price_sample: Relation,
    /// Minimal AFDs found on the full relation.
    pub afds: Vec<AfdEntry>,
    pub lattice: AsLattice,
}

impl Instance {
    pub fn name(&self) -> &str {
        self.relation.name()
    }

    pub fn attrs(&self) -> AttrSet {
        self.relation.attr_set()
    }

    /// AFDs whose attributes all lie in `attrs`.
    pub fn fds_within(&self, attrs: &AttrSet) -> Vec<Fd> {
        self.afds.iter().filter(|e| e.fd.attrs().is_subset(attrs)).map(|e| e.fd.clone()).collect()
    }
}

/// All AS-edges between one instance pair that join on the same attributes share this weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinGroup {
    pub on: AttrSet,
    pub weight: f64,
}

/// An instance-layer edge with its join groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IEdge {
    pub a: usize,
    pub b: usize,
    /// Minimum group weight.
    pub weight: f64,
    /// Realizable, non-degenerate groups ordered by (size, attributes).
    pub groups: Vec<JoinGroup>,
}

impl IEdge {
    pub fn group(&self, on: &AttrSet) -> Option<&JoinGroup> {
        self.groups.iter().find(|g| &g.on == on)
    }
}

/// An AS-vertex: one lattice vertex of one instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AsVertex {
    pub instance: usize,
    pub attrs: AttrSet,
}

/// The two-layer graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct JoinGraph {
    instances: Vec<Instance>,
    edges: Vec<IEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    config: GraphConfig,
}

impl JoinGraph {
    /// Builds the graph over every relation of the catalog.
    pub fn build(catalog: &Catalog, config: &GraphConfig) -> Result<JoinGraph> {
        let rels: Vec<Arc<Relation>> = catalog.relations().cloned().collect();
        Self::from_relations(rels, config)
    }

    pub fn from_relations(rels: Vec<Arc<Relation>>, config: &GraphConfig) -> Result<JoinGraph> {
        if rels.is_empty() {
            return Err(Error::Argument("a join graph needs at least one relation".into()));
        }
        let mut instances = Vec::with_capacity(rels.len());
        for (i, rel) in rels.into_iter().enumerate() {
            let salt = format!("price/{}", rel.name());
            let price_sample = row_sample(&rel, config.sampler.rate, config.sampler.seed.wrapping_add(i as u64), salt.as_bytes());
            let afds = if rel.is_empty() { Vec::new() } else { discover_afds(&rel, &config.afd)? };
            let lattice = AsLattice::of(&rel);
            instances.push(Instance { relation: rel, price_sample, afds, lattice });
        }
        let n = instances.len();
        let mut edges = Vec::new();
        let mut adjacency = vec![Vec::new(); n];
        for a in 0..n {
            for b in a + 1..n {
                let (ra, rb) = (&instances[a].relation, &instances[b].relation);
                let shared = shared_attrs(ra, rb);
                if shared.is_empty() {
                    continue;
                }
                if shared.len() > config.max_shared {
                    return Err(Error::Capacity(format!(
                        "`{}` and `{}` share {} attributes (limit {})",
                        ra.name(),
                        rb.name(),
                        shared.len(),
                        config.max_shared
                    )));
                }
                let (sa, sb) = (ra.attr_set(), rb.attr_set());
                let mut groups = Vec::new();
                for on in nonempty_subsets(&shared) {
                    if !realizable(&on, &sa, &sb) {
                        continue;
                    }
                    if let Ok(w) = estimate_ji(ra, rb, &on, &config.sampler) {
                        groups.push(JoinGroup { on, weight: w });
                    }
                }
                if groups.is_empty() {
                    continue;
                }
                let weight = groups.iter().map(|g| g.weight).fold(f64::INFINITY, f64::min);
                adjacency[a].push((b, edges.len()));
                adjacency[b].push((a, edges.len()));
                edges.push(IEdge { a, b, weight, groups });
            }
        }
        Ok(JoinGraph { instances, edges, adjacency, config: *config })
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn instance(&self, i: usize) -> &Instance {
        &self.instances[i]
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.name() == name)
    }

    pub fn edges(&self) -> &[IEdge] {
        &self.edges
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&IEdge> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|&(_, e)| &self.edges[e])
    }

    /// `(neighbour, edge index)` pairs of instance `v`.
    pub fn neighbours(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// Sample-based price of an AS-vertex (or any attribute subset of the instance).
    pub fn price(&self, instance: usize, attrs: &AttrSet) -> Result<f64> {
        let inst = &self.instances[instance];
        let rel = if inst.price_sample.is_empty() { &inst.relation } else { &inst.price_sample };
        price_projection(rel, attrs, &self.config.price)
    }

    /// Total AS-vertex count over all lattices.
    pub fn as_vertex_count(&self) -> u128 {
        self.instances.iter().map(|i| i.lattice.vertex_count()).sum()
    }

    /// Every AS-edge between two instances as `(vertex of a, vertex of b, join attributes, weight)`.
    /// Materializes both lattices; meant for small instances.
    pub fn as_edges_between(&self, a: usize, b: usize) -> Result<Vec<(AttrSet, AttrSet, AttrSet, f64)>> {
        let Some(edge) = self.edge_between(a, b) else {
            return Ok(Vec::new());
        };
        let (la, lb) = (self.instances[a].lattice.vertices()?, self.instances[b].lattice.vertices()?);
        let mut out = Vec::new();
        for va in &la {
            for vb in &lb {
                let j = va.intersection(vb);
                if let Some(g) = edge.group(&j) {
                    let (x, y) = if edge.a == a { (va, vb) } else { (vb, va) };
                    out.push((x.clone(), y.clone(), j, g.weight));
                }
            }
        }
        Ok(out)
    }

    /// Structured snapshot for debugging and reports.
    pub fn export(&self) -> GraphExport {
        GraphExport {
            instances: self
                .instances
                .iter()
                .map(|i| InstanceExport {
                    name: i.name().to_string(),
                    attributes: i.attrs(),
                    rows: i.relation.n_rows(),
                    as_vertices: i.lattice.vertex_count().to_string(),
                    afds: i.afds.iter().map(|e| e.fd.to_string()).collect(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeExport {
                    a: self.instances[e.a].name().to_string(),
                    b: self.instances[e.b].name().to_string(),
                    weight: e.weight,
                    groups: e.groups.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceExport {
    pub name: String,
    pub attributes: AttrSet,
    pub rows: usize,
    pub as_vertices: String,
    pub afds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeExport {
    pub a: String,
    pub b: String,
    pub weight: f64,
    pub groups: Vec<JoinGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub instances: Vec<InstanceExport>,
    pub edges: Vec<EdgeExport>,
}

/// Nonempty subsets ordered by size, then lexicographically by position.
pub fn nonempty_subsets(set: &AttrSet) -> Vec<AttrSet> {
    let items: Vec<&str> = set.iter().collect();
    let k = items.len();
    let mut masks: Vec<u32> = (1u32..(1 << k)).collect();
    masks.sort_by_key(|m| (m.count_ones(), m.reverse_bits()));
    masks
        .into_iter()
        .map(|m| (0..k).filter(|i| m & (1 << i) != 0).map(|i| items[i]).collect())
        .collect()
}

/// A candidate cover element: an identifier, its instance, and the requested attributes it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverCandidate<T> {
    pub id: T,
    pub instance: usize,
    pub covers: AttrSet,
}

/// All minimal covers of `attrs` using at most one candidate per instance.
/// Covers are returned as sorted id lists, deduplicated, in sorted order.
pub fn minimal_covers<T: Clone + Ord>(
    candidates: &[CoverCandidate<T>],
    attrs: &AttrSet,
    limit: usize,
) -> Result<Vec<Vec<T>>> {
    if attrs.is_empty() {
        return Err(Error::Argument("nothing to cover".into()));
    }
    for a in attrs.iter() {
        if !candidates.iter().any(|c| c.covers.contains(a)) {
            return Err(Error::Uncovered(a.to_string()));
        }
    }
    let want: Vec<&str> = attrs.iter().collect();
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut explored = 0usize;
    cover_search(candidates, &want, &mut chosen, &mut found, &mut explored, limit)?;
    Ok(found
        .into_iter()
        .map(|idx| {
            let mut ids: Vec<T> = idx.iter().map(|&i| candidates[i].id.clone()).collect();
            ids.sort();
            ids
        })
        .collect::<BTreeSet<Vec<T>>>()
        .into_iter()
        .collect())
}

fn covers_all<T>(candidates: &[CoverCandidate<T>], chosen: &[usize], want: &[&str]) -> bool {
    want.iter().all(|a| chosen.iter().any(|&c| candidates[c].covers.contains(a)))
}

fn cover_search<T>(
    candidates: &[CoverCandidate<T>],
    want: &[&str],
    chosen: &mut Vec<usize>,
    found: &mut BTreeSet<Vec<usize>>,
    explored: &mut usize,
    limit: usize,
) -> Result<()> {
    *explored += 1;
    if *explored > limit.saturating_mul(64).max(1 << 16) || found.len() > limit {
        return Err(Error::Capacity(format!("more than {limit} covers")));
    }
    let missing = want.iter().find(|a| !chosen.iter().any(|&c| candidates[c].covers.contains(a)));
    let Some(missing) = missing else {
        let minimal = (0..chosen.len()).all(|skip| {
            let rest: Vec<usize> = chosen.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &c)| c).collect();
            !covers_all(candidates, &rest, want)
        });
        if minimal {
            let mut key = chosen.clone();
            key.sort_unstable();
            found.insert(key);
        }
        return Ok(());
    };
    for (i, c) in candidates.iter().enumerate() {
        if c.covers.contains(missing) && !chosen.iter().any(|&x| candidates[x].instance == c.instance) {
            chosen.push(i);
            cover_search(candidates, want, chosen, found, explored, limit)?;
            chosen.pop();
        }
    }
    Ok(())
}

/// Every minimal set of AS-vertices (at most one per instance) whose attributes cover `attrs`.
pub fn enumerate_target_vertex_sets(graph: &JoinGraph, attrs: &AttrSet) -> Result<Vec<Vec<AsVertex>>> {
    if attrs.is_empty() {
        return Err(Error::Argument("attribute set is empty".into()));
    }
    let mut candidates = Vec::new();
    for (i, inst) in graph.instances().iter().enumerate() {
        if inst.attrs().intersection(attrs).is_empty() {
            continue;
        }
        for v in inst.lattice.vertices()? {
            let covers = v.intersection(attrs);
            if !covers.is_empty() {
                candidates.push(CoverCandidate { id: AsVertex { instance: i, attrs: v }, instance: i, covers });
            }
        }
    }
    minimal_covers(&candidates, attrs, 1_000_000)
}

/// Minimal sets of instances covering `attrs`, smallest first.
pub fn instance_covers(graph: &JoinGraph, attrs: &AttrSet, allowed: Option<&[usize]>) -> Result<Vec<Vec<usize>>> {
    let candidates: Vec<CoverCandidate<usize>> = (0..graph.n_instances())
        .filter(|i| allowed.map_or(true, |a| a.contains(i)))
        .map(|i| CoverCandidate { id: i, instance: i, covers: graph.instance(i).attrs().intersection(attrs) })
        .filter(|c| !c.covers.is_empty())
        .collect();
    let mut covers = minimal_covers(&candidates, attrs, 100_000)?;
    covers.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    Ok(covers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths over I-edge weights. Returns distances and predecessors.
pub fn dijkstra(graph: &JoinGraph, source: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = graph.n_instances();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem { dist: 0.0, vertex: source });
    while let Some(HeapItem { dist: d, vertex: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(u, e) in graph.neighbours(v) {
            let nd = d + graph.edges()[e].weight;
            if nd < dist[u] {
                dist[u] = nd;
                pred[u] = Some(v);
                heap.push(HeapItem { dist: nd, vertex: u });
            }
        }
    }
    (dist, pred)
}

/// Walks predecessors from `v` back to the Dijkstra source; `None` if unreachable.
pub fn path_to_source(pred: &[Option<usize>], dist: &[f64], v: usize) -> Option<Vec<usize>> {
    if !dist[v].is_finite() {
        return None;
    }
    let mut path = vec![v];
    let mut cur = v;
    while let Some(p) = pred[cur] {
        path.push(p);
        cur = p;
    }
    Some(path)
}

/// Shortest paths from every instance to a few randomly chosen landmark instances.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkIndex {
    pub landmarks: Vec<usize>,
    dist: Vec<Vec<f64>>,
    pred: Vec<Vec<Option<usize>>>,
}

impl LandmarkIndex {
    /// Distance from `v` to the `k`-th landmark.
    pub fn distance(&self, k: usize, v: usize) -> f64 {
        self.dist[k][v]
    }

    /// Stored path `v -> ... -> landmark k`, or `None` if `v` cannot reach it.
    pub fn path(&self, k: usize, v: usize) -> Option<Vec<usize>> {
        path_to_source(&self.pred[k], &self.dist[k], v)
    }

    /// Landmark positions reachable from `v`.
    pub fn reachable_from(&self, v: usize) -> BTreeSet<usize> {
        (0..self.landmarks.len()).filter(|&k| self.dist[k][v].is_finite()).collect()
    }
}

/// `ceil(log2 n)`, at least one.
pub fn default_landmark_count(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
    .min(n.max(1))
}

/// Picks `count` landmarks uniformly at random and stores exact shortest paths to each.
pub fn precompute_landmarks(graph: &JoinGraph, count: usize, seed: u64) -> Result<LandmarkIndex> {
    let n = graph.n_instances();
    if count == 0 || count > n {
        return Err(Error::Argument(format!("landmark count {count} not in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut landmarks = sample(&mut rng, n, count).into_vec();
    landmarks.sort_unstable();
    let mut dist = Vec::with_capacity(count);
    let mut pred = Vec::with_capacity(count);
    for &l in &landmarks {
        let (d, p) = dijkstra(graph, l);
        dist.push(d);
        pred.push(p);
    }
    Ok(LandmarkIndex { landmarks, dist, pred })
}

/// Sum of I-edge weights over a set of instance pairs.
pub fn edge_set_weight(graph: &JoinGraph, edges: &BTreeSet<(usize, usize)>) -> f64 {
    edges.iter().map(|&(a, b)| graph.edge_between(a, b).map_or(f64::INFINITY, |e| e.weight)).sum()
}

/// Adds the consecutive pairs of `path` to `edges` as ordered `(low, high)` pairs.
pub fn add_path(edges: &mut BTreeSet<(usize, usize)>, path: &[usize]) {
    for w in path.windows(2) {
        edges.insert((w[0].min(w[1]), w[0].max(w[1])));
    }
}

/// Groups weights by join attributes across all I-edges (for checking shared weights).
pub fn group_weights(graph: &JoinGraph) -> BTreeMap<(usize, usize, AttrSet), f64> {
    let mut out = BTreeMap::new();
    for e in graph.edges() {
        for g in &e.groups {
            out.insert((e.a, e.b, g.on.clone()), g.weight);
        }
    }
    out
}
