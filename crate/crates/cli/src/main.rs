use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod cmd;

#[derive(Parser, Debug)]
#[command(
    name = "gcgarch",
    version,
    about = "Graphical copula GARCH: fitting, structure learning, forecasting and backtests"
)]
struct Cli {
    /// TOML file with backtest settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct PanelArgs {
    /// Wide return panel CSV (`date,<symbols>`).
    #[arg(long)]
    pub panel: PathBuf,
    /// Number of leading risk-factor columns.
    #[arg(long, conflicts_with = "manifest")]
    pub factors: Option<usize>,
    /// Universe manifest; its risk factor count is used.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DagArgs {
    /// Edges by symbol, e.g. "F1->F2,F2->F3".
    #[arg(long, conflicts_with = "dag")]
    pub edges: Option<String>,
    /// DAG as JSON (`{"m":..,"adjacency":..,"order":..}`).
    #[arg(long)]
    pub dag: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DagFitMethod {
    Sequential,
    Mcmc,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortfolioKind {
    Mv,
    Mcvar,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    Fixed,
    Refit,
    MapAvg,
    Known,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Long price CSV plus manifest to a return panel.
    Ingest {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a panel from a model document.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        days: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// GARCH(1,1)-t fits of every column.
    FitMarginals {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the DAG copulas for a given graph.
    FitDag {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        marginals: PathBuf,
        #[command(flatten)]
        dag: DagArgs,
        #[arg(long, value_enum, default_value_t = DagFitMethod::Mcmc)]
        method: DagFitMethod,
        #[arg(long, default_value_t = 5000)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Chain trace CSV (`iter,param,value,accepted`).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Structure MCMC over the reduced DAG space.
    LearnStructure {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        marginals: PathBuf,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Sampled-graph log (`iter,score,adjacency_bits`).
        #[arg(long)]
        log: PathBuf,
        /// Edge-feature matrix CSV.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Highest-scoring distinct graphs, in graph-log format.
        #[arg(long)]
        top: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        n_top: usize,
    },
    /// Fit the stock copulas and write the complete model.
    FitStocks {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        marginals: PathBuf,
        /// Output of fit-dag.
        #[arg(long)]
        dag_fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-copula CSV of the stock parameters.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Approximate BIC of a graph.
    Score {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        marginals: PathBuf,
        #[command(flatten)]
        dag: DagArgs,
    },
    /// One-day-ahead covariance and CVaR forecasts.
    Forecast {
        #[command(flatten)]
        panel: PanelArgs,
        /// One or more model documents; several are BIC-averaged.
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        /// BIC of each model, in the same order.
        #[arg(long = "bic", allow_negative_numbers = true)]
        bics: Vec<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long)]
        cov: PathBuf,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        cvar: Option<PathBuf>,
    },
    /// Portfolio weights from scenarios or a model.
    Optimize {
        #[arg(long, value_enum)]
        method: PortfolioKind,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Scenario CSV (`k,symbol,return`).
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Covariance CSV, as written by forecast.
        #[arg(long)]
        cov: Option<PathBuf>,
        #[arg(long)]
        nonneg: bool,
        /// Date stamped on the output rows.
        #[arg(long)]
        date: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cvar: Option<PathBuf>,
    },
    /// Weekly moving-window investment experiment.
    Backtest {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        strategy: Option<u8>,
        #[arg(long)]
        ws: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        n_g: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        structure: Option<Structure>,
        #[arg(long)]
        structure_iters: Option<usize>,
        #[arg(long)]
        mcmc_iters: Option<usize>,
        #[arg(long)]
        capital: Option<f64>,
        /// Generating model for `--structure known`.
        #[arg(long)]
        known_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot-ready CSVs from a backtest report.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { gcgarch::exec::Exec::Sequential } else { gcgarch::exec::Exec::Parallel };
    let config = match &cli.config {
        Some(p) => gcgarch::io::load_config(p).with_context(|| format!("reading {}", p.display()))?,
        None => gcgarch::backtest::BacktestConfig::default(),
    };
    let ctx = cmd::Ctx { exec, config };
    match cli.command {
        Command::Ingest { prices, manifest, out } => cmd::ingest(&prices, &manifest, &out),
        Command::Simulate { model, days, seed, out } => cmd::simulate(&model, days, seed, &out),
        Command::FitMarginals { panel, out } => cmd::fit_marginals(&ctx, &panel, &out),
        Command::FitDag { panel, marginals, dag, method, iters, seed, out, trace } => {
            cmd::fit_dag(&ctx, &panel, &marginals, &dag, method, iters, seed, &out, trace.as_deref())
        }
        Command::LearnStructure { panel, marginals, iters, seed, log, features, top, n_top } => cmd::learn_structure(
            &ctx,
            &panel,
            &marginals,
            iters,
            seed,
            &log,
            features.as_deref(),
            top.as_deref(),
            n_top,
        ),
        Command::FitStocks { panel, marginals, dag_fit, out, table } => {
            cmd::fit_stocks(&ctx, &panel, &marginals, &dag_fit, &out, table.as_deref())
        }
        Command::Score { panel, marginals, dag } => cmd::score(&ctx, &panel, &marginals, &dag),
        Command::Forecast { panel, models, bics, k, seed, alpha, cov, scenarios, cvar } => {
            if !bics.is_empty() && bics.len() != models.len() {
                bail!("give one --bic per --model, or none");
            }
            let k = k.unwrap_or(ctx.config.k);
            let seed = seed.unwrap_or(ctx.config.seed);
            let alphas = if alpha.is_empty() { ctx.config.alphas.clone() } else { alpha };
            cmd::forecast(&ctx, &panel, &models, &bics, k, seed, &alphas, &cov, scenarios.as_deref(), cvar.as_deref())
        }
        Command::Optimize { method, alpha, scenarios, cov, nonneg, date, out, cvar } => cmd::optimize(
            method,
            alpha,
            scenarios.as_deref(),
            cov.as_deref(),
            nonneg || ctx.config.nonneg,
            date.as_deref(),
            &out,
            cvar.as_deref(),
        ),
        Command::Backtest {
            panel,
            strategy,
            ws,
            window,
            k,
            alphas,
            n_g,
            seed,
            structure,
            structure_iters,
            mcmc_iters,
            capital,
            known_model,
            out,
        } => {
            let mut c = ctx.config.clone();
            if let Some(v) = strategy {
                c.strategy = v;
            }
            if let Some(v) = ws {
                c.w_s = v;
            }
            if let Some(v) = window {
                c.window = v;
            }
            if let Some(v) = k {
                c.k = v;
            }
            if let Some(v) = alphas {
                c.alphas = v;
            }
            if let Some(v) = n_g {
                c.n_g = v;
            }
            if let Some(v) = seed {
                c.seed = v;
            }
            if let Some(v) = structure_iters {
                c.structure_iters = v;
            }
            if let Some(v) = mcmc_iters {
                c.mcmc_iters = v;
            }
            if let Some(v) = capital {
                c.capital = v;
            }
            if let Some(s) = structure {
                use gcgarch::backtest::StructureMode as M;
                c.structure = match s {
                    Structure::Fixed => M::Fixed,
                    Structure::Refit => M::Refit,
                    Structure::MapAvg => M::MapAvg,
                    Structure::Known => M::Known,
                };
            }
            cmd::backtest(&ctx, &panel, c, known_model.as_deref(), &out)
        }
        Command::Report { report, out_dir } => cmd::report(&report, &out_dir),
    }
}
