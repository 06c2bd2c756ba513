//! Commands behind the `datamarket` binary. Each command returns a
//! serializable report; the binary only parses flags and writes output.

pub mod config;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use datamarket::graph::GraphExport;
use datamarket::partition::quality_fds;
use datamarket::purchase::PurchaseResult;
use datamarket::search::{price_bounds, recompute, IGraph, TraceStep};
use datamarket::synth::{marketplace, MarketplaceSpec};
use datamarket::prelude::*;
use serde::Serialize;

pub use config::{config_hash, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] datamarket::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Fields every report starts with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

fn header<T: Serialize>(command: &str, cfg: &RunConfig, extra: &T) -> Header {
    Header {
        command: command.to_string(),
        seed: cfg.seed,
        config_hash: config_hash(&(command, cfg, extra)),
    }
}

fn load_catalog(cfg: &RunConfig) -> CliResult<Catalog> {
    let path = cfg.manifest()?;
    log::info!("loading catalog from {}", path.display());
    Ok(Catalog::from_manifest(path)?)
}

fn graph_config(cfg: &RunConfig, rate: f64, seed: u64) -> CliResult<GraphConfig> {
    let mut g = GraphConfig::new(rate, seed)?;
    g.price = PriceModel::new(cfg.price_a, cfg.price_b)?;
    g.afd = AfdConfig::new(cfg.theta, cfg.max_lhs)?;
    Ok(g)
}

fn estimator(cfg: &RunConfig, rate: f64, seed: u64) -> CliResult<SampleEstimator> {
    let resample = match cfg.eta {
        Some(eta) => ResampleConfig::new(eta, cfg.resample_rate, seed)?,
        None => ResampleConfig::unbounded(seed),
    };
    Ok(SampleEstimator { sampler: HashSampler::new(seed, rate)?, resample })
}

// ---------------------------------------------------------------- profile

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AfdLine {
    pub fd: String,
    pub quality: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationProfile {
    pub name: String,
    pub rows: usize,
    pub attributes: Vec<String>,
    pub afds: Vec<AfdLine>,
    /// Share of rows correct for all discovered dependencies at once.
    pub quality: Option<f64>,
    /// Price of the full relation.
    pub price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    #[serde(flatten)]
    pub header: Header,
    pub relations: Vec<RelationProfile>,
}

pub fn profile(cfg: &RunConfig) -> CliResult<ProfileReport> {
    cfg.validate()?;
    let catalog = load_catalog(cfg)?;
    let afd = AfdConfig::new(cfg.theta, cfg.max_lhs)?;
    let model = PriceModel::new(cfg.price_a, cfg.price_b)?;
    let mut relations = Vec::new();
    for rel in catalog.relations() {
        log::info!("profiling {}", rel.name());
        let (afds, quality, price) = if rel.is_empty() {
            (Vec::new(), None, None)
        } else {
            let found = discover_afds(rel, &afd)?;
            let fds: Vec<Fd> = found.iter().map(|e| e.fd.clone()).collect();
            let q = quality_fds(rel, &fds)?;
            let lines = found
                .into_iter()
                .map(|e| AfdLine { fd: e.fd.to_string(), quality: e.quality, support: e.support })
                .collect();
            (lines, Some(q), Some(price_projection(rel, &rel.attr_set(), &model)?))
        };
        relations.push(RelationProfile {
            name: rel.name().to_string(),
            rows: rel.n_rows(),
            attributes: rel.schema().to_vec(),
            afds,
            quality,
            price,
        });
    }
    Ok(ProfileReport { header: header("profile", cfg, &()), relations })
}

// ---------------------------------------------------------------- graph

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphReport {
    #[serde(flatten)]
    pub header: Header,
    pub graph: GraphExport,
    pub landmarks: Vec<String>,
}

pub fn graph(cfg: &RunConfig) -> CliResult<GraphReport> {
    cfg.validate()?;
    let catalog = load_catalog(cfg)?;
    let g = JoinGraph::build(&catalog, &graph_config(cfg, cfg.rate, cfg.seed)?)?;
    let count = cfg.landmarks.unwrap_or_else(|| default_landmark_count(g.n_instances()));
    let idx = precompute_landmarks(&g, count, cfg.seed)?;
    Ok(GraphReport {
        header: header("graph", cfg, &()),
        landmarks: idx.landmarks.iter().map(|&l| g.instance(l).name().to_string()).collect(),
        graph: g.export(),
    })
}

// ---------------------------------------------------------------- acquire

/// Attributes of one acquisition request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestArgs {
    pub source: AttrSet,
    pub target: AttrSet,
    pub source_instances: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Query {
    pub instance: String,
    pub attributes: AttrSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub queries: Vec<Query>,
    pub correlation: f64,
    pub quality: f64,
    pub weight: f64,
    pub price: f64,
    pub graph: TargetGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcquireReport {
    #[serde(flatten)]
    pub header: Header,
    pub request: RequestArgs,
    pub budget: Option<f64>,
    /// Cheapest and dearest candidate prices, when a budget ratio was given.
    pub price_bounds: Option<(f64, f64)>,
    pub instance_graph: Option<Vec<String>>,
    pub result: Option<Outcome>,
    pub reason: Option<String>,
    pub evaluations: usize,
    pub distinct_candidates: usize,
    pub trace: Vec<TraceStep>,
}

fn outcome(tg: TargetGraph) -> Outcome {
    Outcome {
        queries: tg.queries().into_iter().map(|(instance, attributes)| Query { instance, attributes }).collect(),
        correlation: tg.correlation,
        quality: tg.quality,
        weight: tg.weight,
        price: tg.price,
        graph: tg,
    }
}

fn request(cfg: &RunConfig, args: &RequestArgs, seed: u64) -> AcquisitionRequest {
    let mut req = AcquisitionRequest::new(args.source.clone(), args.target.clone());
    req.source_instances = args.source_instances.clone();
    req.alpha = cfg.alpha.unwrap_or(f64::INFINITY);
    req.beta = cfg.beta;
    req.budget = cfg.budget.unwrap_or(f64::INFINITY);
    req.ell = cfg.ell;
    req.seed = seed;
    req
}

fn igraph_names(g: &JoinGraph, ig: &IGraph) -> Vec<String> {
    ig.vertices.iter().map(|&v| g.instance(v).name().to_string()).collect()
}

pub fn acquire_report(cfg: &RunConfig, args: &RequestArgs) -> CliResult<AcquireReport> {
    cfg.validate()?;
    let catalog = load_catalog(cfg)?;
    let g = JoinGraph::build(&catalog, &graph_config(cfg, cfg.rate, cfg.seed)?)?;
    let est = estimator(cfg, cfg.rate, cfg.seed)?;
    let mut req = request(cfg, args, cfg.seed);
    let mut report = AcquireReport {
        header: header("acquire", cfg, args),
        request: args.clone(),
        budget: cfg.budget,
        price_bounds: None,
        instance_graph: None,
        result: None,
        reason: None,
        evaluations: 0,
        distinct_candidates: 0,
        trace: Vec::new(),
    };
    if let Some(r) = cfg.budget_ratio {
        let Some((lb, ub)) = price_bounds(&g, &req, &est, &OracleGuard::default())? else {
            report.reason = Some("no valid candidate graph exists, so no budget can be derived".into());
            return Ok(report);
        };
        report.price_bounds = Some((lb, ub));
        match datamarket::search::budget_from_ratio(r, lb, ub) {
            Ok(b) => {
                req.budget = b;
                report.budget = Some(b);
            }
            Err(Error::Infeasible(msg)) => {
                report.reason = Some(msg);
                return Ok(report);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let count = cfg.landmarks.unwrap_or_else(|| default_landmark_count(g.n_instances()));
    let idx = precompute_landmarks(&g, count.min(g.n_instances()), cfg.seed)?;
    let search = acquire(&g, &idx, &req, &est)?;
    report.instance_graph = search.igraph.as_ref().map(|ig| igraph_names(&g, ig));
    report.result = search.result.map(outcome);
    report.reason = search.reason;
    report.evaluations = search.evaluations;
    report.distinct_candidates = search.distinct_candidates;
    report.trace = search.trace;
    Ok(report)
}

// ---------------------------------------------------------------- eval

/// Correlations of one method: as estimated by that method and as measured exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub estimated: f64,
    pub real: f64,
    pub quality: f64,
    pub weight: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub rate: f64,
    pub seed: u64,
    pub heuristic: Option<MethodRow>,
    pub lp: Option<MethodRow>,
    pub gp: Option<MethodRow>,
    /// `(gp - heuristic) / gp` on exact correlations.
    pub cd_gp: Option<f64>,
    /// `(lp - heuristic) / lp` on estimated correlations.
    pub cd_lp: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub rate: f64,
    pub median_cd_gp: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub header: Header,
    pub request: RequestArgs,
    pub rows: Vec<EvalRow>,
    pub summary: Vec<RateSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalArgs {
    #[serde(flatten)]
    pub request: RequestArgs,
    pub rates: Vec<f64>,
    pub runs: usize,
}

fn method_row(g: &JoinGraph, tg: &TargetGraph, req: &AcquisitionRequest) -> CliResult<MethodRow> {
    let real = recompute(g, tg, req, &ExactEstimator::default())?.correlation;
    Ok(MethodRow { estimated: tg.correlation, real, quality: tg.quality, weight: tg.weight, price: tg.price })
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 })
}

/// Heuristic against the sample optimum and the exact optimum, per rate and seed.
/// Returns the report and the wall time spent on each row.
pub fn eval(cfg: &RunConfig, args: &EvalArgs) -> CliResult<(EvalReport, Vec<Duration>)> {
    cfg.validate()?;
    if args.runs == 0 {
        return Err(CliError::Config("runs must be positive".into()));
    }
    let catalog = load_catalog(cfg)?;
    let rates = if args.rates.is_empty() { vec![cfg.rate] } else { args.rates.clone() };
    let guard = OracleGuard::default();
    let mut rows = Vec::new();
    let mut times = Vec::new();
    for &rate in &rates {
        for run in 0..args.runs as u64 {
            let seed = cfg.seed.wrapping_add(run);
            let started = Instant::now();
            let g = JoinGraph::build(&catalog, &graph_config(cfg, rate, seed)?)?;
            let est = estimator(cfg, rate, seed)?;
            let req = request(cfg, &args.request, seed);
            let count = cfg.landmarks.unwrap_or_else(|| default_landmark_count(g.n_instances()));
            let idx = precompute_landmarks(&g, count.min(g.n_instances()), seed)?;
            let heur = acquire(&g, &idx, &req, &est)?.result;
            let heuristic = heur.as_ref().map(|t| method_row(&g, t, &req)).transpose()?;
            let mut row = EvalRow { rate, seed, heuristic, lp: None, gp: None, cd_gp: None, cd_lp: None, note: None };
            match (brute_force_lp(&g, &req, &est, &guard), brute_force_gp(&g, &req, &guard)) {
                (Ok(lp), Ok(gp)) => {
                    row.lp = lp.best.as_ref().map(|t| method_row(&g, t, &req)).transpose()?;
                    row.gp = gp.best.as_ref().map(|t| method_row(&g, t, &req)).transpose()?;
                }
                (Err(Error::Capacity(msg)), _) | (_, Err(Error::Capacity(msg))) => {
                    row.note = Some(format!("oracles skipped: {msg}"));
                }
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            }
            if let (Some(h), Some(gp)) = (&row.heuristic, &row.gp) {
                row.cd_gp = correlation_difference(gp.real, h.real).ok();
            }
            if let (Some(h), Some(lp)) = (&row.heuristic, &row.lp) {
                row.cd_lp = correlation_difference(lp.estimated, h.estimated).ok();
            }
            times.push(started.elapsed());
            log::info!("rate {rate} seed {seed} done");
            rows.push(row);
        }
    }
    let summary = rates
        .iter()
        .map(|&rate| {
            let cds: Vec<f64> = rows.iter().filter(|r| r.rate == rate).filter_map(|r| r.cd_gp).collect();
            RateSummary { rate, runs: cds.len(), median_cd_gp: median(cds) }
        })
        .collect();
    Ok((
        EvalReport { header: header("eval", cfg, args), request: args.request.clone(), rows, summary },
        times,
    ))
}

// ---------------------------------------------------------------- purchase

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurchaseReport {
    #[serde(flatten)]
    pub header: Header,
    pub relation: String,
    pub budget: f64,
    pub result: PurchaseResult,
    /// Exhaustive optimum, when requested.
    pub optimum: Option<PurchaseResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurchaseArgs {
    pub relation: String,
    pub oracle: bool,
}

pub fn purchase(cfg: &RunConfig, args: &PurchaseArgs) -> CliResult<PurchaseReport> {
    cfg.validate()?;
    let catalog = load_catalog(cfg)?;
    let rel: Arc<Relation> = catalog
        .get(&args.relation)
        .cloned()
        .ok_or_else(|| CliError::Config(format!("relation `{}` is not in the catalog", args.relation)))?;
    let model = PriceModel::new(cfg.price_a, cfg.price_b)?;
    let budget = match (cfg.budget, cfg.budget_ratio) {
        (Some(b), _) => b,
        (None, Some(r)) => r * price_projection(&rel, &rel.attr_set(), &model)?,
        (None, None) => f64::INFINITY,
    };
    let mut p = PurchaseProblem::new(rel, budget, cfg.theta);
    p.pricing = Pricing::Entropy(model);
    p.ell = cfg.ell;
    p.seed = cfg.seed;
    p.max_lhs = cfg.max_lhs;
    let result = mcmc_purchase(&p)?;
    let optimum = if args.oracle { Some(brute_force_bcqd(&p)?) } else { None };
    Ok(PurchaseReport { header: header("purchase", cfg, args), relation: args.relation.clone(), budget, result, optimum })
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthReport {
    #[serde(flatten)]
    pub header: Header,
    pub manifest: PathBuf,
    pub instances: Vec<String>,
    pub source: AttrSet,
    pub target: AttrSet,
    pub source_instance: String,
    pub target_instance: String,
}

/// Writes a synthetic marketplace catalog into `dir`.
pub fn synth(cfg: &RunConfig, spec: &MarketplaceSpec, dir: &Path) -> CliResult<SynthReport> {
    let m = marketplace(spec)?;
    let manifest = m.catalog.write_dir(dir)?;
    Ok(SynthReport {
        header: header("synth", cfg, spec),
        manifest,
        instances: m.catalog.names(),
        source: m.source,
        target: m.target,
        source_instance: m.source_instance,
        target_instance: m.target_instance,
    })
}

/// Pretty JSON with a trailing newline.
pub fn render<T: Serialize>(report: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}
