//! Partitions, functional dependencies and data quality.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::relation::{natural_join, Relation, Value};

/// Dense codes for one column, numbered in order of first appearance. NULL gets a code too.
pub fn column_codes(rel: &Relation, col: usize) -> Vec<u32> {
    let mut map: HashMap<&Value, u32> = HashMap::new();
    rel.column(col)
        .iter()
        .map(|v| {
            let next = map.len() as u32;
            *map.entry(v).or_insert(next)
        })
        .collect()
}

/// Combines per-column codes into one dense code per distinct tuple (first-appearance order).
pub fn combine_codes(parts: &[&[u32]], n_rows: usize) -> Vec<u32> {
    match parts {
        [] => vec![0; n_rows],
        [only] => only.to_vec(),
        [first, rest @ ..] => {
            let mut acc = first.to_vec();
            for part in rest {
                let mut map: HashMap<(u32, u32), u32> = HashMap::with_capacity(n_rows);
                for (a, &b) in acc.iter_mut().zip(part.iter()) {
                    let next = map.len() as u32;
                    *a = *map.entry((*a, b)).or_insert(next);
                }
            }
            acc
        }
    }
}

/// Dense tuple codes for an attribute set.
pub fn tuple_codes(rel: &Relation, attrs: &AttrSet) -> Result<Vec<u32>> {
    let cols = rel.indices_of(attrs)?;
    let codes: Vec<Vec<u32>> = cols.iter().map(|&c| column_codes(rel, c)).collect();
    let parts: Vec<&[u32]> = codes.iter().map(Vec::as_slice).collect();
    Ok(combine_codes(&parts, rel.n_rows()))
}

fn classes_from_codes(codes: &[u32]) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (row, &c) in codes.iter().enumerate() {
        let c = c as usize;
        if c == classes.len() {
            classes.push(Vec::new());
        }
        classes[c].push(row);
    }
    classes
}

/// Class sizes only, in first-appearance order.
pub fn class_sizes(codes: &[u32]) -> Vec<usize> {
    let mut sizes: Vec<usize> = Vec::new();
    for &c in codes {
        let c = c as usize;
        if c == sizes.len() {
            sizes.push(0);
        }
        sizes[c] += 1;
    }
    sizes
}

/// Equivalence classes of rows agreeing on `over`, ordered by smallest row id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub over: AttrSet,
    pub classes: Vec<Vec<usize>>,
}

impl Partition {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_rows(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    /// Entropy of the class-size distribution, in bits.
    pub fn entropy(&self) -> f64 {
        let sizes: Vec<usize> = self.classes.iter().map(Vec::len).collect();
        entropy_of_sizes(&sizes)
    }

    /// True if every class of `self` sits inside one class of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        let mut owner = vec![usize::MAX; self.n_rows().max(coarser.n_rows())];
        for (i, class) in coarser.classes.iter().enumerate() {
            for &r in class {
                owner[r] = i;
            }
        }
        self.classes.iter().all(|c| c.iter().all(|&r| owner[r] == owner[c[0]]))
    }
}

/// `-sum (s/n) log2 (s/n)` over the given counts.
pub fn entropy_of_sizes(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// The partition of `rel` by `attrs`.
pub fn compute_partition(rel: &Relation, attrs: &AttrSet) -> Result<Partition> {
    if attrs.is_empty() {
        return Err(Error::Argument("cannot partition on an empty attribute set".into()));
    }
    let codes = tuple_codes(rel, attrs)?;
    Ok(Partition { over: attrs.clone(), classes: classes_from_codes(&codes) })
}

/// A functional dependency `lhs -> rhs` with a single right-hand attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fd {
    pub lhs: AttrSet,
    pub rhs: String,
}

impl Fd {
    pub fn new(lhs: AttrSet, rhs: &str) -> Result<Fd> {
        if lhs.is_empty() {
            return Err(Error::Argument("FD left-hand side is empty".into()));
        }
        if lhs.contains(rhs) {
            return Err(Error::Argument(format!("FD right-hand side `{rhs}` appears on the left")));
        }
        Ok(Fd { lhs, rhs: rhs.to_string() })
    }

    /// Every attribute mentioned by the FD.
    pub fn attrs(&self) -> AttrSet {
        self.lhs.with(&self.rhs)
    }

    pub fn check(&self, rel: &Relation) -> Result<()> {
        for a in self.attrs().iter() {
            rel.index_of(a)?;
        }
        Ok(())
    }
}

impl fmt::Display for Fd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.lhs, self.rhs)
    }
}

impl FromStr for Fd {
    type Err = Error;
    fn from_str(s: &str) -> Result<Fd> {
        let (l, r) = s
            .split_once("->")
            .ok_or_else(|| Error::Argument(format!("`{s}` is not of the form X1,X2->Y")))?;
        Fd::new(l.parse()?, r.trim())
    }
}

/// Rows kept by the FD: in every lhs class, the largest lhs+rhs sub-class
/// (ties go to the sub-class holding the smallest row id). Returned sorted.
pub fn correct_rows(rel: &Relation, fd: &Fd) -> Result<Vec<usize>> {
    fd.check(rel)?;
    let x = tuple_codes(rel, &fd.lhs)?;
    let y = column_codes(rel, rel.index_of(&fd.rhs)?);
    Ok(correct_rows_from_codes(&x, &y))
}

pub(crate) fn correct_rows_from_codes(x: &[u32], y: &[u32]) -> Vec<usize> {
    // (x class, y code) -> (count, first row)
    let mut groups: HashMap<(u32, u32), (usize, usize)> = HashMap::new();
    for (row, (&a, &b)) in x.iter().zip(y).enumerate() {
        groups.entry((a, b)).or_insert((0, row)).0 += 1;
    }
    let n_x = x.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut best: Vec<Option<(usize, usize, u32)>> = vec![None; n_x];
    for (&(a, b), &(count, first)) in &groups {
        let slot = &mut best[a as usize];
        let better = match slot {
            None => true,
            Some((c, f, _)) => count > *c || (count == *c && first < *f),
        };
        if better {
            *slot = Some((count, first, b));
        }
    }
    x.iter()
        .zip(y)
        .enumerate()
        .filter(|(_, (&a, &b))| best[a as usize].map(|(_, _, yb)| yb) == Some(b))
        .map(|(row, _)| row)
        .collect()
}

/// Share of rows kept by [`correct_rows`].
pub fn quality_fd(rel: &Relation, fd: &Fd) -> Result<f64> {
    if rel.is_empty() {
        return Err(Error::UndefinedQuality);
    }
    Ok(correct_rows(rel, fd)?.len() as f64 / rel.n_rows() as f64)
}

/// Minimum share of rows to delete so that `fd` holds exactly.
pub fn g3_error(rel: &Relation, fd: &Fd) -> Result<f64> {
    Ok(1.0 - quality_fd(rel, fd)?)
}

/// Share of rows that are correct for every FD at once (1 when `fds` is empty).
pub fn quality_fds(rel: &Relation, fds: &[Fd]) -> Result<f64> {
    if rel.is_empty() {
        return Err(Error::UndefinedQuality);
    }
    let mut keep = vec![true; rel.n_rows()];
    for fd in fds {
        let mut ok = vec![false; rel.n_rows()];
        for r in correct_rows(rel, fd)? {
            ok[r] = true;
        }
        for (k, o) in keep.iter_mut().zip(ok) {
            *k &= o;
        }
    }
    Ok(keep.iter().filter(|&&k| k).count() as f64 / rel.n_rows() as f64)
}

/// Largest row count of a join that [`quality_join`] will materialize.
pub const DEFAULT_JOIN_CAP: usize = 1_000_000;

/// Quality of the natural join of `instances` (joined left to right) with respect to `fds`.
pub fn quality_join(instances: &[&Relation], fds: &[Fd], cap: usize) -> Result<f64> {
    let joined = join_chain(instances, cap)?;
    if joined.is_empty() {
        return Err(Error::UndefinedQuality);
    }
    quality_fds(&joined, fds)
}

/// Natural left-fold join of `instances`, refusing intermediates above `cap` rows.
pub fn join_chain(instances: &[&Relation], cap: usize) -> Result<Relation> {
    let (first, rest) = instances
        .split_first()
        .ok_or_else(|| Error::Argument("no instances to join".into()))?;
    let mut acc: Relation = (*first).clone();
    for r in rest {
        acc = natural_join(&acc, r)?;
        if acc.n_rows() > cap {
            return Err(Error::Capacity(format!(
                "join has {} rows, above the materialization cap {cap}; use the sampling estimator",
                acc.n_rows()
            )));
        }
    }
    Ok(acc)
}

/// Settings for approximate FD discovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AfdConfig {
    /// Largest tolerated g3 error.
    pub theta: f64,
    pub max_lhs: usize,
}

impl Default for AfdConfig {
    fn default() -> Self {
        AfdConfig { theta: 0.1, max_lhs: 3 }
    }
}

impl AfdConfig {
    pub fn new(theta: f64, max_lhs: usize) -> Result<AfdConfig> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Argument(format!("theta {theta} outside (0,1)")));
        }
        if max_lhs == 0 {
            return Err(Error::Argument("max_lhs must be positive".into()));
        }
        Ok(AfdConfig { theta, max_lhs })
    }
}

/// One discovered dependency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfdEntry {
    pub fd: Fd,
    pub quality: f64,
    /// Number of correct rows.
    pub support: usize,
}

/// All minimal FDs with `|lhs| <= max_lhs` and g3 error at most `theta`,
/// ordered by lhs size, then lhs, then rhs.
pub fn discover_afds(rel: &Relation, cfg: &AfdConfig) -> Result<Vec<AfdEntry>> {
    if rel.is_empty() {
        return Err(Error::UndefinedQuality);
    }
    let m = rel.n_attrs();
    if m > 63 {
        return Err(Error::Capacity(format!("{m} attributes exceed the discovery limit of 63")));
    }
    let n = rel.n_rows();
    let codes: Vec<Vec<u32>> = (0..m).map(|c| column_codes(rel, c)).collect();
    let floor = (1.0 - cfg.theta) * n as f64 - 1e-9;
    // qualified lhs masks per rhs
    let mut found: Vec<Vec<u64>> = vec![Vec::new(); m];
    let mut out = Vec::new();
    // partitions of the previous level, keyed by mask
    let mut level: Vec<(u64, Vec<u32>)> = (0..m).map(|c| (1u64 << c, codes[c].clone())).collect();
    for size in 1..=cfg.max_lhs.min(m.saturating_sub(1)) {
        for (mask, x) in &level {
            for rhs in 0..m {
                if mask & (1 << rhs) != 0 || found[rhs].iter().any(|f| f & mask == *f) {
                    continue;
                }
                let correct = correct_rows_from_codes(x, &codes[rhs]).len();
                if correct as f64 >= floor {
                    found[rhs].push(*mask);
                    let lhs: AttrSet = (0..m)
                        .filter(|c| mask & (1 << c) != 0)
                        .map(|c| rel.schema()[c].as_str())
                        .collect();
                    out.push(AfdEntry {
                        fd: Fd::new(lhs, &rel.schema()[rhs])?,
                        quality: correct as f64 / n as f64,
                        support: correct,
                    });
                }
            }
        }
        if size == cfg.max_lhs {
            break;
        }
        let mut next = Vec::new();
        for (mask, x) in &level {
            let top = 63 - mask.leading_zeros() as usize;
            for c in top + 1..m {
                let refined = combine_codes(&[x, &codes[c]], n);
                next.push((mask | (1 << c), refined));
            }
        }
        level = next;
    }
    out.sort_by(|a, b| {
        (a.fd.lhs.len(), &a.fd.lhs, &a.fd.rhs).cmp(&(b.fd.lhs.len(), &b.fd.lhs, &b.fd.rhs))
    });
    Ok(out)
}
