use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use gcgarch::backtest::{run_backtest, BacktestConfig, BacktestReport};
use gcgarch::data::{Dag, DagCopula, FittedModel, GarchParams, ReturnPanel};
use gcgarch::estimation::{
    fit_dag_mcmc, fit_dag_sequential, fit_marginals as fit_garch_all, fit_stocks as fit_stock_copulas,
};
use gcgarch::exec::Exec;
use gcgarch::io::{self, DagFitDocument, Manifest, MODEL_SCHEMA_VERSION};
use gcgarch::pcc::{marginal_pits, DagLattice};
use gcgarch::portfolio::{estimate_cvar, forecast as forecast_one_day, solve_mcvar, solve_mv};
use gcgarch::simulate::{simulate_panel, ScenarioSet};
use gcgarch::structure::{edge_features, structure_mcmc, BicScorer};
use nalgebra::DMatrix;

use crate::{DagArgs, DagFitMethod, PanelArgs, PortfolioKind};

pub struct Ctx {
    pub exec: Exec,
    pub config: BacktestConfig,
}

fn load_panel(a: &PanelArgs) -> Result<ReturnPanel> {
    let m = match (a.factors, &a.manifest) {
        (Some(m), None) => m,
        (None, Some(p)) => Manifest::load(p)?.risk_factors.len(),
        _ => bail!("give --factors or --manifest with --panel"),
    };
    let panel = io::read_panel(io::open(&a.panel)?, m).with_context(|| format!("reading {}", a.panel.display()))?;
    if let Some(p) = &a.manifest {
        ensure!(Manifest::load(p)?.symbols() == panel.symbols, "panel columns do not match the manifest");
    }
    Ok(panel)
}

fn load_marginals(path: &Path, panel: &ReturnPanel) -> Result<Vec<GarchParams>> {
    let rows = io::read_marginals(io::open(path)?)?;
    ensure!(
        rows.iter().map(|r| &r.symbol).eq(panel.symbols.iter()),
        "{} does not list the panel symbols in panel order",
        path.display()
    );
    Ok(rows.iter().map(|r| GarchParams::new(r.omega, r.alpha, r.beta, r.v)).collect())
}

fn load_dag(a: &DagArgs, panel: &ReturnPanel) -> Result<Dag> {
    let dag = match (&a.edges, &a.dag) {
        (Some(e), None) => io::parse_edges(e, &panel.symbols, panel.m)?,
        (None, Some(p)) => io::read_json(io::open(p)?)?,
        (None, None) => Dag::empty(panel.m),
        _ => unreachable!("clap rejects both"),
    };
    ensure!(dag.m() == panel.m, "graph has {} nodes, panel has {} risk factors", dag.m(), panel.m);
    Ok(dag)
}

fn load_model(path: &Path) -> Result<io::ModelDocument> {
    io::load_model(io::open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn ingest(prices: &Path, manifest: &Path, out: &Path) -> Result<()> {
    let manifest = Manifest::load(manifest)?;
    let panel = io::read_prices(io::open(prices)?, &manifest)?;
    io::write_panel(io::create(out)?, &panel)?;
    log::info!("{} days x {} series", panel.n_days(), panel.n_series());
    Ok(())
}

pub fn simulate(model: &Path, days: usize, seed: u64, out: &Path) -> Result<()> {
    let doc = load_model(model)?;
    let mut panel = simulate_panel(&doc.model, days, seed)?;
    panel.symbols = doc.symbols;
    io::write_panel(io::create(out)?, &panel)?;
    Ok(())
}

pub fn fit_marginals(ctx: &Ctx, panel: &PanelArgs, out: &Path) -> Result<()> {
    let panel = load_panel(panel)?;
    let fits = fit_garch_all(&panel, ctx.exec)?;
    for (s, f) in panel.symbols.iter().zip(&fits) {
        if !f.converged {
            log::warn!("GARCH fit of {s} did not converge");
        }
    }
    io::write_marginals(io::create(out)?, &panel.symbols, &fits)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn fit_dag(
    ctx: &Ctx,
    panel: &PanelArgs,
    marginals: &Path,
    dag: &DagArgs,
    method: DagFitMethod,
    iters: usize,
    seed: u64,
    out: &Path,
    trace: Option<&Path>,
) -> Result<()> {
    let panel = load_panel(panel)?;
    let marg = load_marginals(marginals, &panel)?;
    let dag = load_dag(dag, &panel)?;
    let m_sc = ctx.config.m_sc;
    let pits = marginal_pits(&panel, &marg)?;
    let factor_pits = &pits[..panel.m];
    let theta2 = match method {
        DagFitMethod::Sequential => {
            ensure!(trace.is_none(), "--trace needs --method mcmc");
            fit_dag_sequential(factor_pits, &dag, m_sc)?.theta2()
        }
        DagFitMethod::Mcmc => {
            let post = fit_dag_mcmc(factor_pits, &dag, iters, seed, m_sc)?;
            log::info!(
                "acceptance {:.3}, burn-in {}",
                post.chain.acceptance_rate(0..post.chain.samples.len()),
                post.chain.burn_in
            );
            if let Some(t) = trace {
                let labels = io::copula_labels(&dag, &panel.symbols)?;
                io::write_chain_trace(io::create(t)?, &post.chain, &labels)?;
            }
            post.median
        }
    };
    let lattice = DagLattice::build(&dag, factor_pits, &theta2, m_sc)?;
    let doc = DagFitDocument {
        schema_version: MODEL_SCHEMA_VERSION,
        factors: panel.symbols[..panel.m].to_vec(),
        dag_copulas: dag_copulas(&lattice),
        dag,
        m_sc,
        method: format!("{method:?}").to_lowercase(),
        loglik: lattice.loglik(),
    };
    io::write_json(io::create(out)?, &doc)?;
    Ok(())
}

fn dag_copulas(lattice: &DagLattice) -> Vec<DagCopula> {
    lattice
        .slots()
        .iter()
        .zip(lattice.params())
        .map(|(s, p)| DagCopula { child: s.child, parent: s.parent, given: s.given.clone(), params: *p })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn learn_structure(
    ctx: &Ctx,
    panel: &PanelArgs,
    marginals: &Path,
    iters: usize,
    seed: u64,
    log_path: &Path,
    features: Option<&Path>,
    top: Option<&Path>,
    n_top: usize,
) -> Result<()> {
    let panel = load_panel(panel)?;
    let marg = load_marginals(marginals, &panel)?;
    let mut pits = marginal_pits(&panel, &marg)?;
    pits.truncate(panel.m);
    let mut scorer = BicScorer::new(pits, ctx.config.m_sc)?;
    let chain = structure_mcmc(&mut scorer, &Dag::empty(panel.m), iters, seed)?;
    log::info!("{} distinct copula fits, burn-in {}", scorer.cache_len(), chain.burn_in);
    io::write_graph_log(io::create(log_path)?, &chain)?;
    if let Some(f) = features {
        let p = edge_features(chain.post_burn())?;
        io::write_matrix(io::create(f)?, &panel.symbols[..panel.m], &p)?;
    }
    if let Some(t) = top {
        let mut w = csv::Writer::from_writer(io::create(t)?);
        w.write_record(["rank", "score", "adjacency_bits"])?;
        for (r, (g, s)) in chain.top_graphs(n_top).iter().enumerate() {
            w.write_record([(r + 1).to_string(), s.to_string(), g.adjacency_bits()])?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn fit_stocks(
    ctx: &Ctx,
    panel: &PanelArgs,
    marginals: &Path,
    dag_fit: &Path,
    out: &Path,
    table: Option<&Path>,
) -> Result<()> {
    let panel = load_panel(panel)?;
    let marg = load_marginals(marginals, &panel)?;
    let doc: DagFitDocument = io::read_json(io::open(dag_fit)?)?;
    ensure!(doc.factors[..] == panel.symbols[..panel.m], "DAG fit belongs to other risk factors");
    let pits = marginal_pits(&panel, &marg)?;
    let theta2: Vec<_> = doc.dag_copulas.iter().map(|c| c.params).collect();
    let lattice = DagLattice::build(&doc.dag, &pits[..panel.m], &theta2, doc.m_sc)?;
    let stocks = fit_stock_copulas(&pits[panel.m..], &lattice, &doc.dag, doc.m_sc, ctx.exec)?;
    let model = FittedModel {
        marginals: marg,
        dag: doc.dag,
        dag_copulas: doc.dag_copulas,
        stock_copulas: stocks.iter().map(|row| row.iter().map(|f| f.params).collect()).collect(),
        m_sc: doc.m_sc,
    };
    model.validate()?;
    io::save_model(io::create(out)?, &model, &panel.symbols)?;
    if let Some(t) = table {
        io::write_stock_copulas(io::create(t)?, &model, &panel.symbols)?;
    }
    Ok(())
}

pub fn score(ctx: &Ctx, panel: &PanelArgs, marginals: &Path, dag: &DagArgs) -> Result<()> {
    let panel = load_panel(panel)?;
    let marg = load_marginals(marginals, &panel)?;
    let dag = load_dag(dag, &panel)?;
    let mut pits = marginal_pits(&panel, &marg)?;
    pits.truncate(panel.m);
    let s = BicScorer::new(pits, ctx.config.m_sc)?.score(&dag)?;
    println!("bic,loglik,edges");
    println!("{},{},{}", s.bic, s.loglik, dag.n_edges());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn forecast(
    ctx: &Ctx,
    panel: &PanelArgs,
    models: &[std::path::PathBuf],
    bics: &[f64],
    k: usize,
    seed: u64,
    alphas: &[f64],
    cov_out: &Path,
    scen_out: Option<&Path>,
    cvar_out: Option<&Path>,
) -> Result<()> {
    let panel = load_panel(panel)?;
    let docs = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    for (d, p) in docs.iter().zip(models) {
        ensure!(d.symbols == panel.symbols, "{} was fitted on other symbols", p.display());
    }
    let bics = match (bics.is_empty(), docs.len()) {
        (false, _) => bics.to_vec(),
        (true, 1) => vec![0.0],
        (true, _) => bail!("averaging several models needs one --bic each"),
    };
    let refs: Vec<&FittedModel> = docs.iter().map(|d| &d.model).collect();
    let f = forecast_one_day(&refs, &bics, &panel, k, seed, ctx.exec)?;
    let stocks = &panel.symbols[panel.m..];
    let rows: Vec<Vec<f64>> = f.cov.row_iter().map(|r| r.iter().copied().collect()).collect();
    io::write_matrix(io::create(cov_out)?, stocks, &rows)?;
    if let Some(s) = scen_out {
        io::write_scenarios(io::create(s)?, &f.scenarios, stocks)?;
    }
    if let Some(c) = cvar_out {
        let date = *panel.dates.last().context("empty panel")?;
        let rows = alphas
            .iter()
            .map(|&a| Ok((date, a, solve_mcvar(&f.scenarios, a, ctx.config.nonneg)?.objective)))
            .collect::<Result<Vec<_>>>()?;
        io::write_cvars(io::create(c)?, &rows)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn optimize(
    method: PortfolioKind,
    alpha: f64,
    scenarios: Option<&Path>,
    cov: Option<&Path>,
    nonneg: bool,
    date: Option<&str>,
    out: &Path,
    cvar_out: Option<&Path>,
) -> Result<()> {
    let date: chrono::NaiveDate = date.context("--date is required")?.parse().context("--date")?;
    let scen: Option<(Vec<String>, ScenarioSet)> = scenarios.map(|p| io::read_scenarios(io::open(p)?)).transpose()?;
    let (symbols, sol) = match method {
        PortfolioKind::Mcvar => {
            let (symbols, set) = scen.as_ref().context("mcvar needs --scenarios")?;
            (symbols.clone(), solve_mcvar(set, alpha, nonneg)?)
        }
        PortfolioKind::Mv => {
            ensure!(!nonneg, "--nonneg applies to mcvar only");
            let (names, rows) = io::read_matrix(io::open(cov.context("mv needs --cov")?)?)?;
            let n = names.len();
            let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            if let Some((s, _)) = &scen {
                ensure!(*s == names, "scenario and covariance symbols differ");
            }
            (names, solve_mv(&m)?)
        }
    };
    io::write_weights(io::create(out)?, &[(date, sol.weights.clone())], &symbols)?;
    if let Some(c) = cvar_out {
        let cvar = match (method, &scen) {
            (PortfolioKind::Mcvar, _) => sol.objective,
            (PortfolioKind::Mv, Some((_, set))) => estimate_cvar(&set.portfolio_returns(&sol.weights), alpha)?,
            (PortfolioKind::Mv, None) => bail!("a CVaR for mv needs --scenarios"),
        };
        io::write_cvars(io::create(c)?, &[(date, alpha, cvar)])?;
    }
    Ok(())
}

pub fn backtest(ctx: &Ctx, panel: &PanelArgs, cfg: BacktestConfig, known: Option<&Path>, out: &Path) -> Result<()> {
    let panel = load_panel(panel)?;
    let known = known.map(load_model).transpose()?;
    if let Some(d) = &known {
        ensure!(d.symbols == panel.symbols, "known model was built for other symbols");
    }
    let rep = run_backtest(&panel, &cfg, known.as_ref().map(|d| &d.model), ctx.exec)?;
    for t in &rep.tracks {
        let values = if cfg.strategy == 2 { &t.values_s2 } else { &t.values_s1 };
        log::info!(
            "{} {:?}: strategy-{} final value {:.2}, exceedances {}",
            t.kind,
            t.alpha,
            cfg.strategy,
            values.last().copied().unwrap_or(cfg.capital),
            t.exceedances
        );
    }
    io::write_json(io::create(out)?, &rep)?;
    Ok(())
}

pub fn report(report: &Path, out_dir: &Path) -> Result<()> {
    let rep: BacktestReport = io::read_json(io::open(report)?)?;
    std::fs::create_dir_all(out_dir)?;
    io::write_cumulative(io::create(&out_dir.join("cumulative.csv"))?, &rep)?;
    io::write_cost_table(io::create(&out_dir.join("cost.csv"))?, &rep)?;
    let stocks = &rep.symbols
        [rep.symbols.len() - rep.tracks.first().map_or(0, |t| t.weeks.first().map_or(0, |w| w.weights.len()))..];
    let mut cvars = Vec::new();
    for t in &rep.tracks {
        let name = match t.alpha {
            Some(a) => format!("weights_{}_{a}.csv", t.kind),
            None => format!("weights_{}.csv", t.kind),
        };
        let rows: Vec<_> = t.weeks.iter().map(|w| (w.invest_date, w.weights.clone())).collect();
        io::write_weights(io::create(&out_dir.join(name))?, &rows, stocks)?;
        if let Some(a) = t.alpha {
            cvars.extend(t.weeks.iter().map(|w| (w.invest_date, a, w.cvar)));
        }
    }
    io::write_cvars(io::create(&out_dir.join("cvar.csv"))?, &cvars)?;
    Ok(())
}
