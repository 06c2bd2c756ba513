use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use datamarket::synth::MarketplaceSpec;
use datamarket::AttrSet;
use datamarket_cli::{render, CliError, CliResult, EvalArgs, PurchaseArgs, RequestArgs, RunConfig};

/// Data acquisition over a catalog of CSV relations.
///
/// Reports are JSON. Log verbosity follows DATAMARKET_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "datamarket", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover approximate dependencies, quality and price of every relation.
    Profile(Common),
    /// Build the join graph and print its instances, edges and landmarks.
    Graph(Common),
    /// Find the projections to buy for a source/target request.
    Acquire {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        request: Request,
    },
    /// Compare the heuristic with the exhaustive optima.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        request: Request,
        /// Sampling rates to sweep (comma separated); defaults to --rate.
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        /// Seeds per rate, starting at --seed.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Print per-row wall time to stderr.
        #[arg(long)]
        timings: bool,
    },
    /// Choose attributes of one relation under a budget.
    Purchase {
        #[command(flatten)]
        common: Common,
        /// Relation name in the catalog.
        #[arg(long)]
        relation: String,
        /// Also report the exhaustive optimum.
        #[arg(long)]
        oracle: bool,
    },
    /// Write a synthetic marketplace catalog.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Directory to write the CSV files and manifest.toml into.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        instances: usize,
        #[arg(long, default_value_t = 200)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        extra_edges: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Share of rows with a corrupted coarse key.
        #[arg(long, default_value_t = 0.0)]
        dirt: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Catalog manifest (TOML with a [relations] table of name = "file.csv").
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// TOML file with any of the settings below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, conflicts_with = "budget_ratio")]
    budget: Option<f64>,
    #[arg(long)]
    budget_ratio: Option<f64>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    resample_rate: Option<f64>,
    #[arg(long)]
    landmarks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    price_a: Option<f64>,
    #[arg(long)]
    price_b: Option<f64>,
    #[arg(long)]
    max_lhs: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Request {
    /// Source attributes, comma separated.
    #[arg(long)]
    source_attrs: AttrSet,
    /// Target attributes, comma separated.
    #[arg(long)]
    target_attrs: AttrSet,
    /// Instances already owned (comma separated).
    #[arg(long, value_delimiter = ',')]
    source_instances: Option<Vec<String>>,
}

impl Request {
    fn into_args(self) -> RequestArgs {
        RequestArgs { source: self.source_attrs, target: self.target_attrs, source_instances: self.source_instances }
    }
}

impl Common {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        take!(theta, beta, ell, rate, resample_rate, seed, price_a, price_b, max_lhs);
        macro_rules! take_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    cfg.$field = self.$field.clone();
                }
            )*};
        }
        take_opt!(manifest, alpha, eta, landmarks);
        // a flag budget replaces whichever budget form the file used
        if self.budget.is_some() {
            cfg.budget = self.budget;
            cfg.budget_ratio = None;
        }
        if self.budget_ratio.is_some() {
            cfg.budget_ratio = self.budget_ratio;
            cfg.budget = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Profile(common) => {
            let cfg = common.resolve()?;
            emit(&render(&datamarket_cli::profile(&cfg)?)?, common.out.as_ref())
        }
        Command::Graph(common) => {
            let cfg = common.resolve()?;
            emit(&render(&datamarket_cli::graph(&cfg)?)?, common.out.as_ref())
        }
        Command::Acquire { common, request } => {
            let cfg = common.resolve()?;
            let report = datamarket_cli::acquire_report(&cfg, &request.into_args())?;
            emit(&render(&report)?, common.out.as_ref())
        }
        Command::Eval { common, request, rates, runs, timings } => {
            let cfg = common.resolve()?;
            let args = EvalArgs { request: request.into_args(), rates, runs };
            let (report, times) = datamarket_cli::eval(&cfg, &args)?;
            if timings {
                for (row, t) in report.rows.iter().zip(&times) {
                    eprintln!("rate {} seed {}: {:.3} s", row.rate, row.seed, t.as_secs_f64());
                }
            }
            emit(&render(&report)?, common.out.as_ref())
        }
        Command::Purchase { common, relation, oracle } => {
            let cfg = common.resolve()?;
            let report = datamarket_cli::purchase(&cfg, &PurchaseArgs { relation, oracle })?;
            emit(&render(&report)?, common.out.as_ref())
        }
        Command::Synth { common, dir, instances, rows, extra_edges, noise, dirt } => {
            let cfg = common.resolve()?;
            if !(0.0..=1.0).contains(&noise) || !(0.0..=1.0).contains(&dirt) {
                return Err(CliError::Config("noise and dirt must lie in [0,1]".into()));
            }
            let spec = MarketplaceSpec { instances, rows, extra_edges, noise, dirt, seed: cfg.seed };
            let report = datamarket_cli::synth(&cfg, &spec, &dir)?;
            emit(&render(&report)?, common.out.as_ref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DATAMARKET_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
