//! Budget-constrained purchase of attributes from a single relation.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::info::{price_projection, PriceModel};
use crate::partition::{discover_afds, quality_fds, AfdConfig, AfdEntry, Fd};
use crate::relation::Relation;

/// How attribute sets are priced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Pricing {
    /// `a * H(π_X) + b` on the relation.
    Entropy(PriceModel),
    /// Sum of fixed per-attribute prices.
    Additive(BTreeMap<String, f64>),
}

/// How the errors of several AFDs inside a set combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ErrorAggregate {
    /// Largest single-FD g3 error.
    #[default]
    Max,
    /// Share of rows violating at least one of the FDs.
    Joint,
}

/// A single-relation purchase request.
#[derive(Debug, Clone)]
pub struct PurchaseProblem {
    pub relation: Arc<Relation>,
    pub pricing: Pricing,
    pub budget: f64,
    pub theta: f64,
    pub ell: usize,
    pub seed: u64,
    pub max_lhs: usize,
    pub aggregate: ErrorAggregate,
}

impl PurchaseProblem {
    pub fn new(relation: Arc<Relation>, budget: f64, theta: f64) -> PurchaseProblem {
        PurchaseProblem {
            relation,
            pricing: Pricing::Entropy(PriceModel::default()),
            budget,
            theta,
            ell: 10_000,
            seed: 0,
            max_lhs: 3,
            aggregate: ErrorAggregate::Max,
        }
    }
}

/// The three parts of the objective and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub error: f64,
    pub error_term: f64,
    pub size_term: f64,
    pub useful_term: f64,
    pub useful_count: usize,
    pub amplification: f64,
    pub total: f64,
}

/// Precomputed state for evaluating subsets of one relation; subsets are bit masks over the schema.
#[derive(Debug)]
pub struct PurchaseSpace {
    problem: PurchaseProblem,
    attrs: Vec<String>,
    afds: Vec<(u64, AfdEntry)>,
    prices: HashMap<u64, f64>,
}

impl PurchaseSpace {
    pub fn new(problem: PurchaseProblem) -> Result<PurchaseSpace> {
        if !(problem.theta > 0.0 && problem.theta < 1.0) {
            return Err(Error::Argument(format!("theta {} outside (0,1)", problem.theta)));
        }
        if !(problem.budget >= 0.0) {
            return Err(Error::Argument("budget must be nonnegative".into()));
        }
        let rel = &problem.relation;
        if rel.n_attrs() == 0 || rel.n_attrs() > 63 {
            return Err(Error::Capacity(format!("{} attributes (supported: 1..=63)", rel.n_attrs())));
        }
        let attrs = rel.schema().to_vec();
        let afds = if rel.is_empty() {
            Vec::new()
        } else {
            discover_afds(rel, &AfdConfig::new(problem.theta, problem.max_lhs.max(1))?)?
        };
        let afds = afds
            .into_iter()
            .map(|e| {
                let mask = e.fd.attrs().iter().fold(0u64, |m, a| m | 1 << attrs.iter().position(|x| x == a).unwrap());
                (mask, e)
            })
            .collect();
        Ok(PurchaseSpace { problem, attrs, afds, prices: HashMap::new() })
    }

    pub fn m(&self) -> usize {
        self.attrs.len()
    }

    pub fn problem(&self) -> &PurchaseProblem {
        &self.problem
    }

    /// Minimal AFDs of the relation (fixed for the run).
    pub fn afds(&self) -> impl Iterator<Item = &AfdEntry> {
        self.afds.iter().map(|(_, e)| e)
    }

    pub fn set_of(&self, mask: u64) -> AttrSet {
        (0..self.m()).filter(|i| mask & (1 << i) != 0).map(|i| self.attrs[i].as_str()).collect()
    }

    pub fn mask_of(&self, set: &AttrSet) -> Result<u64> {
        set.iter().try_fold(0u64, |m, a| {
            let i = self.attrs.iter().position(|x| x == a).ok_or_else(|| Error::UnknownAttribute(a.to_string()))?;
            Ok(m | 1 << i)
        })
    }

    pub fn price(&mut self, mask: u64) -> Result<f64> {
        if let Some(&p) = self.prices.get(&mask) {
            return Ok(p);
        }
        let set = self.set_of(mask);
        let p = match &self.problem.pricing {
            Pricing::Entropy(model) => {
                if mask == 0 {
                    0.0
                } else {
                    price_projection(&self.problem.relation, &set, model)?
                }
            }
            Pricing::Additive(costs) => set.iter().map(|a| costs.get(a).copied().unwrap_or(0.0)).sum(),
        };
        self.prices.insert(mask, p);
        Ok(p)
    }

    pub fn affordable(&mut self, mask: u64) -> Result<bool> {
        Ok(self.price(mask)? <= self.problem.budget)
    }

    /// `S` plus every outside attribute whose addition keeps the price within budget.
    pub fn candidate_set(&mut self, mask: u64) -> Result<u64> {
        let mut c = mask;
        for i in 0..self.m() {
            let bit = 1u64 << i;
            if mask & bit == 0 && self.affordable(mask | bit)? {
                c |= bit;
            }
        }
        Ok(c)
    }

    /// Sum of `|lhs ∪ {rhs}|` over the minimal AFDs lying inside the set.
    pub fn useful_count(&self, mask: u64) -> usize {
        self.afds.iter().filter(|(m, _)| m & mask == *m).map(|(m, _)| m.count_ones() as usize).sum()
    }

    fn error(&self, mask: u64) -> Result<f64> {
        let inside: Vec<&AfdEntry> = self.afds.iter().filter(|(m, _)| m & mask == *m).map(|(_, e)| e).collect();
        if inside.is_empty() {
            return Ok(0.0);
        }
        Ok(match self.problem.aggregate {
            ErrorAggregate::Max => inside.iter().map(|e| 1.0 - e.quality).fold(0.0, f64::max),
            ErrorAggregate::Joint => {
                let fds: Vec<Fd> = inside.iter().map(|e| e.fd.clone()).collect();
                1.0 - quality_fds(&self.problem.relation, &fds)?
            }
        })
    }

    /// `(1 - error) + a |X| / m + |U| / |X|` with `a = m θ`.
    pub fn objective(&self, mask: u64) -> Result<ObjectiveBreakdown> {
        if mask == 0 {
            return Err(Error::Argument("objective of an empty attribute set".into()));
        }
        let m = self.m() as f64;
        let size = mask.count_ones() as f64;
        let error = self.error(mask)?;
        let amplification = m * self.problem.theta;
        let useful_count = self.useful_count(mask);
        let error_term = 1.0 - error;
        let size_term = amplification * size / m;
        let useful_term = useful_count as f64 / size;
        Ok(ObjectiveBreakdown {
            error,
            error_term,
            size_term,
            useful_term,
            useful_count,
            amplification,
            total: error_term + size_term + useful_term,
        })
    }

    fn f(&self, mask: u64) -> Result<f64> {
        if mask == 0 {
            return Ok(0.0);
        }
        let f = self.objective(mask)?.total;
        assert!(f > 0.0, "objective must be positive on nonempty sets");
        Ok(f)
    }
}

/// Output of [`mcmc_purchase`] and [`brute_force_bcqd`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurchaseResult {
    pub attributes: AttrSet,
    pub mask: u64,
    pub objective: ObjectiveBreakdown,
    pub price: f64,
    /// State after each step, as schema bit masks (empty for the oracle).
    #[serde(skip)]
    pub trace: Vec<u64>,
    pub trace_len: usize,
}

/// `|U|` for `x` using the minimal AFDs of `rel` at threshold `theta` (lhs up to three attributes).
pub fn useful_count(rel: &Relation, x: &AttrSet, theta: f64) -> Result<usize> {
    for a in x.iter() {
        rel.index_of(a)?;
    }
    if rel.is_empty() {
        return Ok(0);
    }
    Ok(discover_afds(rel, &AfdConfig::new(theta, 3)?)?
        .iter()
        .filter(|e| e.fd.attrs().is_subset(x))
        .map(|e| e.fd.attrs().len())
        .sum())
}

/// Metropolis-Hastings walk over affordable attribute sets with single-attribute flips.
///
/// From `S` an attribute is drawn uniformly from the candidate set `C(S)`;
/// it is removed if present, added otherwise, and the move is accepted with
/// probability `min(1, f(Y)|C(S)| / (f(S)|C(Y)|))`.
pub fn mcmc_purchase(problem: &PurchaseProblem) -> Result<PurchaseResult> {
    let mut space = PurchaseSpace::new(problem.clone())?;
    run_chain(&mut space)
}

/// Same as [`mcmc_purchase`] on a prepared space (reuses cached prices).
pub fn run_chain(space: &mut PurchaseSpace) -> Result<PurchaseResult> {
    let m = space.m();
    let full = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(space.problem.seed);
    let mut state = None;
    for _ in 0..10_000 {
        let draw = rng.gen::<u64>() & full;
        if draw != 0 && space.affordable(draw)? {
            state = Some(draw);
            break;
        }
    }
    let mut s = state.ok_or_else(|| Error::Infeasible("no affordable attribute set found in 10^4 draws".into()))?;
    let mut f_s = space.f(s)?;
    let mut c_s = space.candidate_set(s)?;
    let (mut best, mut best_f) = (s, f_s);
    let mut trace = Vec::with_capacity(space.problem.ell);
    for _ in 0..space.problem.ell {
        let k = c_s.count_ones() as usize;
        let pick = rng.gen_range(0..k);
        let u: f64 = rng.gen();
        let bit = nth_bit(c_s, pick);
        let y = s ^ bit;
        if y != 0 && space.affordable(y)? {
            let f_y = space.f(y)?;
            let c_y = space.candidate_set(y)?;
            let ratio = f_y * k as f64 / (f_s * c_y.count_ones() as f64);
            if u < ratio.min(1.0) {
                s = y;
                f_s = f_y;
                c_s = c_y;
                if f_s > best_f {
                    best = s;
                    best_f = f_s;
                }
            }
        }
        trace.push(s);
    }
    Ok(PurchaseResult {
        attributes: space.set_of(best),
        mask: best,
        objective: space.objective(best)?,
        price: space.price(best)?,
        trace_len: trace.len(),
        trace,
    })
}

fn nth_bit(mask: u64, n: usize) -> u64 {
    let mut m = mask;
    for _ in 0..n {
        m &= m - 1;
    }
    m & m.wrapping_neg()
}

/// Exact optimum over all affordable nonempty subsets (`m <= 16`).
pub fn brute_force_bcqd(problem: &PurchaseProblem) -> Result<PurchaseResult> {
    let mut space = PurchaseSpace::new(problem.clone())?;
    brute_force_space(&mut space)
}

pub fn brute_force_space(space: &mut PurchaseSpace) -> Result<PurchaseResult> {
    let m = space.m();
    if m > 16 {
        return Err(Error::Capacity(format!("{m} attributes exceed the exhaustive limit of 16")));
    }
    let mut best: Option<(u64, f64)> = None;
    for mask in 1u64..(1 << m) {
        if !space.affordable(mask)? {
            continue;
        }
        let f = space.f(mask)?;
        if best.map_or(true, |(_, bf)| f > bf) {
            best = Some((mask, f));
        }
    }
    let (mask, _) = best.ok_or_else(|| Error::Infeasible("no affordable attribute set".into()))?;
    Ok(PurchaseResult {
        attributes: space.set_of(mask),
        mask,
        objective: space.objective(mask)?,
        price: space.price(mask)?,
        trace: Vec::new(),
        trace_len: 0,
    })
}
