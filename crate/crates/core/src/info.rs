//! Entropy, join informativeness, correlation and entropy-based prices. All logs are base 2.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::partition::{class_sizes, entropy_of_sizes, tuple_codes};
use crate::relation::{full_outer_join_pairs, OuterJoinPairs, Relation};

/// A finite distribution over labelled outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<T> {
    pub support: Vec<T>,
    pub probs: Vec<f64>,
}

impl<T> DiscreteDistribution<T> {
    pub fn new(support: Vec<T>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::Argument("support and probabilities differ in length".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Argument("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteDistribution { support, probs })
    }

    /// Normalizes nonnegative counts.
    pub fn from_counts(support: Vec<T>, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Argument("all counts are zero".into()));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(support, probs)
    }
}

impl DiscreteDistribution<()> {
    /// Unlabelled distribution, convenient for quick calculations.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        Self::new(vec![(); probs.len()], probs.to_vec())
    }
}

/// `-sum p log2 p`, with `0 log 0 = 0`.
pub fn shannon_entropy<T>(d: &DiscreteDistribution<T>) -> f64 {
    d.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum::<f64>().max(0.0)
}

/// Empirical entropy of the attribute set taken as one compound variable.
pub fn entropy_of(rel: &Relation, attrs: &AttrSet) -> Result<f64> {
    if attrs.is_empty() {
        return Ok(0.0);
    }
    Ok(entropy_of_sizes(&class_sizes(&tuple_codes(rel, attrs)?)))
}

/// Empirical mutual information between two attribute sets.
pub fn mutual_information(rel: &Relation, x: &AttrSet, y: &AttrSet) -> Result<f64> {
    let hx = entropy_of(rel, x)?;
    let hy = entropy_of(rel, y)?;
    let hxy = entropy_of(rel, &x.union(y))?;
    Ok(hx + hy - hxy)
}

/// Join informativeness of a precomputed outer-join key distribution.
///
/// The joint entropy runs over every pair, unmatched ones included. The mutual
/// information sums only over matched values; a missing partner carries no
/// information about the other side. Result lies in `[0, 1]`.
pub fn ji_from_pairs(pairs: &OuterJoinPairs) -> Result<f64> {
    let total = pairs.total();
    if total == 0 {
        return Err(Error::Degenerate("outer join is empty".into()));
    }
    let n = total as f64;
    let mut h = 0.0;
    let mut left_marg: HashMap<&[crate::relation::Value], u64> = HashMap::new();
    let mut right_marg: HashMap<&[crate::relation::Value], u64> = HashMap::new();
    for p in &pairs.pairs {
        if let Some(l) = &p.left {
            *left_marg.entry(l).or_insert(0) += p.count;
        }
        if let Some(r) = &p.right {
            *right_marg.entry(r).or_insert(0) += p.count;
        }
        if p.count > 0 {
            let q = p.count as f64 / n;
            h -= q * q.log2();
        }
    }
    if h <= 1e-12 {
        return Err(Error::Degenerate("join key distribution has zero entropy".into()));
    }
    let mut i = 0.0;
    for p in pairs.pairs.iter().filter(|p| p.is_matched() && p.count > 0) {
        let (l, r) = (p.left.as_deref().unwrap(), p.right.as_deref().unwrap());
        let pxy = p.count as f64 / n;
        let px = left_marg[l] as f64 / n;
        let py = right_marg[r] as f64 / n;
        i += pxy * (pxy / (px * py)).log2();
    }
    Ok(((h - i) / h).clamp(0.0, 1.0))
}

/// Join informativeness of `left ⋈ right` on `on`; smaller means a tighter join.
pub fn join_informativeness(left: &Relation, right: &Relation, on: &AttrSet) -> Result<f64> {
    ji_from_pairs(&full_outer_join_pairs(left, right, on)?)
}

/// Cumulative entropy `-∫ F(x) log2 F(x) dx` of the empirical CDF, trapezoid rule over the sample points.
pub fn cumulative_entropy(values: &[f64]) -> f64 {
    let mut xs: Vec<f64> = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let grid = distinct_sorted(&xs);
    cumulative_entropy_on_grid(&xs, &grid)
}

fn distinct_sorted(sorted: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = Vec::with_capacity(sorted.len());
    for &x in sorted {
        if g.last() != Some(&x) {
            g.push(x);
        }
    }
    g
}

fn phi(f: f64) -> f64 {
    if f <= 0.0 || f >= 1.0 {
        0.0
    } else {
        -f * f.log2()
    }
}

/// `sorted` must be sorted; the ECDF of `sorted` is evaluated at each grid point.
fn cumulative_entropy_on_grid(sorted: &[f64], grid: &[f64]) -> f64 {
    if sorted.is_empty() || grid.len() < 2 {
        return 0.0;
    }
    let n = sorted.len() as f64;
    let mut idx = 0usize;
    let mut prev: Option<(f64, f64)> = None;
    let mut total = 0.0;
    for &g in grid {
        while idx < sorted.len() && sorted[idx] <= g {
            idx += 1;
        }
        let y = phi(idx as f64 / n);
        if let Some((px, py)) = prev {
            total += (g - px) * (py + y) / 2.0;
        }
        prev = Some((g, y));
    }
    total
}

/// Correlation of `x` with `y` on one table: `H(X) - H(X|Y)`.
///
/// When `x` is a single numeric attribute the cumulative entropy replaces the
/// Shannon entropy; the conditional term averages per-`y` cumulative entropies
/// on the common grid of observed `x` values, and rows with NULL `x` are skipped.
/// Otherwise `x` and `y` are compound categorical variables.
pub fn correlation(joined: &Relation, x: &AttrSet, y: &AttrSet) -> Result<f64> {
    if joined.is_empty() {
        return Err(Error::Argument("correlation of an empty relation".into()));
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::Argument("correlation needs nonempty attribute sets".into()));
    }
    let x_cols = joined.indices_of(x)?;
    joined.indices_of(y)?;
    if x_cols.len() == 1 && joined.is_numeric(x_cols[0]) {
        numeric_correlation(joined, x_cols[0], y)
    } else {
        Ok(mutual_information(joined, x, y)?.max(0.0))
    }
}

fn numeric_correlation(rel: &Relation, xc: usize, y: &AttrSet) -> Result<f64> {
    let ycodes = tuple_codes(rel, y)?;
    let mut all = Vec::new();
    let mut groups: HashMap<u32, Vec<f64>> = HashMap::new();
    for (r, &yc) in ycodes.iter().enumerate() {
        if let Some(v) = rel.value(r, xc).as_f64() {
            all.push(v);
            groups.entry(yc).or_default().push(v);
        }
    }
    if all.is_empty() {
        return Ok(0.0);
    }
    all.sort_by(f64::total_cmp);
    let grid = distinct_sorted(&all);
    let h = cumulative_entropy_on_grid(&all, &grid);
    let n = all.len() as f64;
    let mut keys: Vec<u32> = groups.keys().copied().collect();
    keys.sort_unstable();
    let mut cond = 0.0;
    for k in keys {
        let g = groups.get_mut(&k).unwrap();
        g.sort_by(f64::total_cmp);
        cond += (g.len() as f64 / n) * cumulative_entropy_on_grid(g, &grid);
    }
    Ok((h - cond).max(0.0))
}

/// Linear price in partition entropy: `a * H(π) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    pub a: f64,
    pub b: f64,
}

impl Default for PriceModel {
    fn default() -> Self {
        PriceModel { a: 1.0, b: 0.0 }
    }
}

impl PriceModel {
    pub fn new(a: f64, b: f64) -> Result<PriceModel> {
        if !(a > 0.0) || !(b >= 0.0) {
            return Err(Error::Argument(format!("price model needs a > 0 and b >= 0, got a={a}, b={b}")));
        }
        Ok(PriceModel { a, b })
    }

    pub fn price_of_entropy(&self, h: f64) -> f64 {
        self.a * h + self.b
    }
}

/// Price of the projection of `rel` onto `attrs`.
pub fn price_projection(rel: &Relation, attrs: &AttrSet, model: &PriceModel) -> Result<f64> {
    if rel.is_empty() {
        return Err(Error::Argument("cannot price an empty relation".into()));
    }
    Ok(model.price_of_entropy(entropy_of(rel, attrs)?))
}
