//! Seeded synthetic relations and marketplaces for tests, benchmarks and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::Result;
use crate::partition::Fd;
use crate::relation::{inject_inconsistency, Catalog, DirtSpec, Relation, Value};

fn tok(prefix: &str, k: usize) -> Value {
    Value::text(&format!("{prefix}{k}"))
}

/// `n` rows, `m` independent categorical columns `c0..`, each uniform over `card` tokens.
pub fn random_relation(seed: u64, n: usize, m: usize, card: usize) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..m).map(|i| format!("c{i}")).collect();
    let rows = (0..n)
        .map(|_| (0..m).map(|_| tok("v", rng.gen_range(0..card.max(1)))).collect())
        .collect();
    Relation::from_owned_rows("random", names, rows).expect("valid shape")
}

/// Random relation with an exact FD `x0,x1 -> y` (y is a random function of the pair)
/// plus `extra` independent noise columns.
pub fn planted_fd_relation(seed: u64, n: usize, card: usize, extra: usize) -> (Relation, Fd) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let card = card.max(2);
    let table: Vec<usize> = (0..card * card).map(|_| rng.gen_range(0..card)).collect();
    let mut names = vec!["x0".to_string(), "x1".to_string(), "y".to_string()];
    names.extend((0..extra).map(|i| format!("z{i}")));
    let rows = (0..n)
        .map(|_| {
            let (a, b) = (rng.gen_range(0..card), rng.gen_range(0..card));
            let mut row = vec![tok("a", a), tok("b", b), tok("y", table[a * card + b])];
            row.extend((0..extra).map(|_| tok("z", rng.gen_range(0..card))));
            row
        })
        .collect();
    let rel = Relation::from_owned_rows("planted", names, rows).expect("valid shape");
    (rel, Fd::new(["x0", "x1"].into_iter().collect(), "y").expect("valid fd"))
}

/// Two relations `left(id, a)` and `right(id, b)` with unique keys; the first
/// `n_left` ids go left, and the right side starts `n_left - overlap` ids later.
pub fn key_pair(seed: u64, n_left: usize, n_right: usize, overlap: usize) -> (Relation, Relation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = n_left.saturating_sub(overlap);
    let left = (0..n_left).map(|i| vec![Value::from(i as i64), tok("a", rng.gen_range(0..5))]).collect();
    let right = (start..start + n_right).map(|i| vec![Value::from(i as i64), tok("b", rng.gen_range(0..5))]).collect();
    (
        Relation::from_rows("left", &["id", "a"], left).expect("valid shape"),
        Relation::from_rows("right", &["id", "b"], right).expect("valid shape"),
    )
}

/// Same shape as [`key_pair`] but every key appears 1 to `max_mult` times on each side.
pub fn key_pair_with_multiplicity(seed: u64, n_left: usize, n_right: usize, overlap: usize, max_mult: usize) -> (Relation, Relation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = n_left.saturating_sub(overlap);
    let mut left = Vec::new();
    for i in 0..n_left {
        for _ in 0..rng.gen_range(1..=max_mult) {
            left.push(vec![Value::from(i as i64), tok("a", rng.gen_range(0..5))]);
        }
    }
    let mut right = Vec::new();
    for i in start..start + n_right {
        for _ in 0..rng.gen_range(1..=max_mult) {
            right.push(vec![Value::from(i as i64), tok("b", rng.gen_range(0..5))]);
        }
    }
    (
        Relation::from_rows("left", &["id", "a"], left).expect("valid shape"),
        Relation::from_rows("right", &["id", "b"], right).expect("valid shape"),
    )
}

/// A three-relation chain `first(k1, s, u) - middle(k1, k2) - last(k2, t, v)`.
///
/// `s` and `t` are noisy copies of a hidden binary class that `u` (and its copy `v`)
/// determine, so `u -> s` and `v -> t` hold approximately and `s`, `t` are correlated.
/// All keys are unique per relation; about 90% of each key domain survives each hop.
pub struct Chain3 {
    pub first: Relation,
    pub middle: Relation,
    pub last: Relation,
    pub fds: Vec<Fd>,
}

pub fn chain3(seed: u64, n: usize) -> Chain3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<usize> = (0..n).map(|_| rng.gen_range(0..10)).collect();
    let class = |e: usize| u[e] % 2;
    let flip = |rng: &mut ChaCha8Rng, c: usize, p: f64| if rng.gen::<f64>() < p { 1 - c } else { c };
    let first = (0..n)
        .map(|e| vec![Value::from(e as i64), tok("s", flip(&mut rng, class(e), 0.03)), tok("u", u[e])])
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut middle = Vec::new();
    for e in 0..n {
        if rng.gen::<f64>() < 0.9 {
            middle.push(vec![Value::from(e as i64), Value::from((perm[e] + 1_000_000) as i64)]);
        }
    }
    let mut last = Vec::new();
    for e in 0..n {
        if rng.gen::<f64>() < 0.9 {
            let t = flip(&mut rng, class(e), 0.04);
            last.push(vec![Value::from((perm[e] + 1_000_000) as i64), tok("t", t), tok("v", u[e])]);
        }
    }
    Chain3 {
        first: Relation::from_rows("first", &["k1", "s", "u"], first).expect("valid shape"),
        middle: Relation::from_rows("middle", &["k1", "k2"], middle).expect("valid shape"),
        last: Relation::from_rows("last", &["k2", "t", "v"], last).expect("valid shape"),
        fds: vec!["u->s".parse().expect("fd"), "v->t".parse().expect("fd")],
    }
}

/// Shape of a synthetic marketplace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketplaceSpec {
    pub instances: usize,
    pub rows: usize,
    /// Edges added on top of the random spanning tree.
    pub extra_edges: usize,
    /// Chance that the source or target value is replaced by noise.
    pub noise: f64,
    /// Share of rows whose coarse join attribute is corrupted.
    pub dirt: f64,
    pub seed: u64,
}

impl MarketplaceSpec {
    pub fn new(instances: usize, seed: u64) -> MarketplaceSpec {
        MarketplaceSpec { instances, rows: 200, extra_edges: 0, noise: 0.1, dirt: 0.0, seed }
    }
}

/// A generated catalog together with the request attributes it was built for.
#[derive(Debug, Clone)]
pub struct Marketplace {
    pub catalog: Catalog,
    pub source: AttrSet,
    pub target: AttrSet,
    pub source_instance: String,
    pub target_instance: String,
    /// Instance pairs joined by shared attributes.
    pub links: Vec<(usize, usize)>,
}

fn keyed(seed: u64, link: usize, e: usize, domain: usize) -> usize {
    let h = crate::sampling::stable_hash(seed, &(link as u64).to_le_bytes(), &(e as u64).to_le_bytes());
    (h % domain as u64) as usize
}

/// Instances `d0..` linked along a random tree (plus extra edges). Every link
/// `t` puts a key `k{t}` and a coarser `g{t} = k{t} / 2` in both endpoints.
/// `d0` holds the source attribute `s`; the deepest instance holds the target `t`.
/// Both are noisy copies of a hidden class of the row's entity.
pub fn marketplace(spec: &MarketplaceSpec) -> Result<Marketplace> {
    let k = spec.instances.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let entities = spec.rows * 2;
    let class: Vec<usize> = (0..entities).map(|_| rng.gen_range(0..4)).collect();
    let mut links = Vec::new();
    let mut depth = vec![0usize; k];
    for i in 1..k {
        let p = rng.gen_range(0..i);
        depth[i] = depth[p] + 1;
        links.push((p, i));
    }
    let mut tries = 0;
    while links.len() < k - 1 + spec.extra_edges && tries < 1000 {
        tries += 1;
        let (a, b) = (rng.gen_range(0..k), rng.gen_range(0..k));
        let (a, b) = (a.min(b), a.max(b));
        if a != b && !links.contains(&(a, b)) {
            links.push((a, b));
        }
    }
    let target = (0..k).max_by_key(|&i| (depth[i], std::cmp::Reverse(i))).unwrap();
    let domains: Vec<usize> = links.iter().map(|_| rng.gen_range(entities / 2..=entities)).collect();
    let mut rels = Vec::with_capacity(k);
    for i in 0..k {
        let incident: Vec<usize> = (0..links.len()).filter(|&t| links[t].0 == i || links[t].1 == i).collect();
        let mut names = Vec::new();
        for &t in &incident {
            names.push(format!("k{t}"));
            names.push(format!("g{t}"));
        }
        names.push(format!("x{i}"));
        if i == 0 {
            names.push("s".into());
        }
        if i == target {
            names.push("t".into());
        }
        let mut ents: Vec<usize> = (0..entities).collect();
        ents.shuffle(&mut rng);
        ents.truncate(spec.rows);
        ents.sort_unstable();
        let mut rows = Vec::with_capacity(spec.rows);
        for &e in &ents {
            let mut row = Vec::with_capacity(names.len());
            for &t in &incident {
                let key = keyed(spec.seed, t, e, domains[t]);
                row.push(Value::from(key as i64));
                row.push(Value::from((key / 2) as i64));
            }
            row.push(tok("x", rng.gen_range(0..5)));
            let noisy = |rng: &mut ChaCha8Rng| {
                if rng.gen::<f64>() < spec.noise {
                    rng.gen_range(0..4)
                } else {
                    class[e]
                }
            };
            if i == 0 {
                row.push(tok("s", noisy(&mut rng)));
            }
            if i == target {
                row.push(tok("t", noisy(&mut rng)));
            }
            rows.push(row);
        }
        let mut rel = Relation::from_owned_rows(&format!("d{i}"), names, rows)?;
        if spec.dirt > 0.0 && !incident.is_empty() {
            let fds: Vec<Fd> = incident
                .iter()
                .map(|t| Fd::new(AttrSet::single(&format!("k{t}")), &format!("g{t}")))
                .collect::<Result<_>>()?;
            let dirt = DirtSpec { fraction: spec.dirt, targets: Vec::new(), seed: spec.seed ^ (i as u64 + 1) };
            rel = inject_inconsistency(&rel, &dirt, &fds)?;
        }
        rels.push(rel);
    }
    Ok(Marketplace {
        catalog: Catalog::new(rels)?,
        source: AttrSet::single("s"),
        target: AttrSet::single("t"),
        source_instance: "d0".into(),
        target_instance: format!("d{target}"),
        links,
    })
}
