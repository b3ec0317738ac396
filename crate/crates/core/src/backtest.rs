//! Moving-window weekly investment experiment.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::data::{Dag, FittedModel, ReturnPanel, DEFAULT_M_SC};
use crate::error::{Error, Result};
use crate::estimation::{fit_marginals, fit_model_given_marginals, DagMethod};
use crate::exec::Exec;
use crate::garch::pit_series;
use crate::portfolio::{estimate_cvar, forecast, solve_mcvar, solve_mv};
use crate::structure::{structure_mcmc, BicScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureMode {
    /// Learn the MAP graph on the first window and keep it.
    Fixed,
    /// Relearn the MAP graph in every window.
    Refit,
    /// Relearn in every window and average the top `n_g` graphs.
    MapAvg,
    /// Forecast with the generating model; nothing is fitted.
    Known,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub window: usize,
    pub k: usize,
    pub alphas: Vec<f64>,
    pub n_g: usize,
    pub strategy: u8,
    pub w_s: usize,
    pub capital: f64,
    pub seed: u64,
    pub structure: StructureMode,
    pub structure_iters: usize,
    /// RAM iterations for the DAG copulas; 0 keeps the sequential estimates.
    pub mcmc_iters: usize,
    pub include_mv: bool,
    pub nonneg: bool,
    pub m_sc: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: 750,
            k: 20_000,
            alphas: vec![0.0005, 0.001, 0.005, 0.01, 0.05],
            n_g: 3,
            strategy: 1,
            w_s: 8,
            capital: 10_000.0,
            seed: 1,
            structure: StructureMode::Fixed,
            structure_iters: 200,
            mcmc_iters: 0,
            include_mv: true,
            nonneg: false,
            m_sc: DEFAULT_M_SC,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.window < 100 {
            bad.push(format!("window {} < 100", self.window));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            bad.push("alphas must be non-empty and in (0,1)".to_string());
        }
        let amin = self.alphas.iter().copied().fold(f64::INFINITY, f64::min);
        if (self.k as f64) * amin < 1.0 {
            bad.push(format!("K·min(alpha) = {} < 1", self.k as f64 * amin));
        }
        if !matches!(self.strategy, 1 | 2) {
            bad.push(format!("strategy {} is not 1 or 2", self.strategy));
        }
        if self.w_s == 0 || self.n_g == 0 || !(self.capital > 0.0) {
            bad.push("w_s, n_g and capital must be positive".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// `(fit day, invest day)` row indices: the last trading day of each ISO week
/// and the trading day after it.
pub fn weekly_schedule(dates: &[NaiveDate]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for t in 0..dates.len().saturating_sub(1) {
        if dates[t].iso_week() != dates[t + 1].iso_week() {
            out.push((t, t + 1));
        }
    }
    out
}

/// Compounded value path of simple returns.
pub fn compound(capital: f64, simple_returns: &[f64]) -> Vec<f64> {
    simple_returns
        .iter()
        .scan(capital, |v, r| {
            *v *= 1.0 + r;
            Some(*v)
        })
        .collect()
}

/// Mean absolute overshoot of losses at or beyond the CVaR, and the overshoot count.
pub fn cost_function(losses: &[f64], cvars: &[f64]) -> Result<(Option<f64>, usize)> {
    if losses.len() != cvars.len() {
        return Err(Error::InvalidInput("losses and CVaRs differ in length".into()));
    }
    let (sum, g) = losses
        .iter()
        .zip(cvars)
        .filter(|(l, c)| l >= c)
        .fold((0.0, 0usize), |(s, g), (l, c)| (s + (l - c).abs(), g + 1));
    Ok(((g > 0).then(|| sum / g as f64), g))
}

/// Strategy-2 rule: invest when the forecast is at most the mean of the previous `w_s`.
pub fn strategy2_invests(cvar: f64, previous: &[f64]) -> bool {
    previous.is_empty() || cvar <= previous.iter().sum::<f64>() / previous.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekRecord {
    pub fit_date: NaiveDate,
    pub invest_date: NaiveDate,
    pub weights: Vec<f64>,
    /// Predicted one-day CVaR, percent.
    pub cvar: f64,
    /// Simple return of the week, `Π(1+R) − 1`.
    pub week_return: f64,
    /// First-day loss, percent.
    pub first_day_loss: f64,
    pub exceeded: bool,
    pub reserved: bool,
    pub invested_s2: bool,
    pub carried_forward: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioTrack {
    /// `"mcvar"` or `"mv"`.
    pub kind: String,
    /// `None` for the MV portfolio.
    pub alpha: Option<f64>,
    pub weeks: Vec<WeekRecord>,
    pub values_s1: Vec<f64>,
    pub values_s2: Vec<f64>,
    pub cost: Option<f64>,
    pub exceedances: usize,
    pub weeks_invested_s2: usize,
    pub avg_excluded_return: Option<f64>,
    pub avg_return_s1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub symbols: Vec<String>,
    pub tracks: Vec<PortfolioTrack>,
    pub skipped_fits: usize,
}

impl BacktestReport {
    pub fn track(&self, kind: &str, alpha: Option<f64>) -> Option<&PortfolioTrack> {
        self.tracks.iter().find(|t| t.kind == kind && t.alpha == alpha)
    }
}

fn learn_graphs(pits: &[Vec<f64>], cfg: &BacktestConfig, seed: u64, n: usize) -> Result<Vec<(Dag, f64)>> {
    let mut scorer = BicScorer::new(pits.to_vec(), cfg.m_sc)?;
    let chain = structure_mcmc(&mut scorer, &Dag::empty(pits.len()), cfg.structure_iters, seed)?;
    Ok(chain.top_graphs(n))
}

struct Fitter<'a> {
    cfg: &'a BacktestConfig,
    known: Option<&'a FittedModel>,
    fixed: Option<Dag>,
    exec: Exec,
}

impl Fitter<'_> {
    fn models(&mut self, window: &ReturnPanel, week: usize) -> Result<Vec<(FittedModel, f64)>> {
        if let Some(m) = self.known {
            return Ok(vec![(m.clone(), 0.0)]);
        }
        let cfg = self.cfg;
        let marg: Vec<_> = fit_marginals(window, self.exec)?.into_iter().map(|f| f.params).collect();
        let pits: Vec<Vec<f64>> =
            (0..window.m).map(|j| pit_series(&marg[j], window.column(j))).collect::<Result<_>>()?;
        let seed = cfg.seed ^ ((week as u64) << 24);
        let graphs = match (cfg.structure, &self.fixed) {
            (StructureMode::Fixed, Some(d)) => vec![(d.clone(), 0.0)],
            (StructureMode::Fixed | StructureMode::Refit, _) => learn_graphs(&pits, cfg, seed, 1)?,
            (StructureMode::MapAvg, _) => learn_graphs(&pits, cfg, seed, cfg.n_g)?,
            (StructureMode::Known, _) => unreachable!("known model handled above"),
        };
        if cfg.structure == StructureMode::Fixed && self.fixed.is_none() {
            self.fixed = Some(graphs[0].0.clone());
        }
        let method =
            if cfg.mcmc_iters > 0 { DagMethod::Mcmc { n_iter: cfg.mcmc_iters, seed } } else { DagMethod::Sequential };
        graphs
            .into_iter()
            .map(|(dag, bic)| {
                fit_model_given_marginals(window, marg.clone(), &dag, method, cfg.m_sc, self.exec).map(|m| (m, bic))
            })
            .collect()
    }
}

struct Decision {
    weights: Vec<f64>,
    cvar: f64,
}

/// Runs the experiment; `known` is required for [`StructureMode::Known`].
pub fn run_backtest(
    panel: &ReturnPanel,
    cfg: &BacktestConfig,
    known: Option<&FittedModel>,
    exec: Exec,
) -> Result<BacktestReport> {
    cfg.validate()?;
    if (cfg.structure == StructureMode::Known) != known.is_some() {
        return Err(Error::Config("a known model goes with structure = \"known\" and only then".into()));
    }
    let schedule: Vec<(usize, usize)> =
        weekly_schedule(&panel.dates).into_iter().filter(|&(t, _)| t + 1 >= cfg.window).collect();
    if schedule.len() <= cfg.w_s {
        return Err(Error::InvalidInput(format!(
            "{} rebalance weeks after the first window, need more than w_S = {}",
            schedule.len(),
            cfg.w_s
        )));
    }
    let n_port = cfg.alphas.len() + cfg.include_mv as usize;
    let mut fitter = Fitter { cfg, known, fixed: None, exec };
    let mut last: Vec<Option<Decision>> = (0..n_port).map(|_| None).collect();
    let mut weeks: Vec<Vec<WeekRecord>> = vec![Vec::new(); n_port];
    let mut skipped = 0;
    for (e, &(t, inv)) in schedule.iter().enumerate() {
        let window = panel.window(t + 1 - cfg.window, t + 1);
        let week_seed = cfg.seed.wrapping_add((e as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let fresh = fitter.models(&window, e).and_then(|models| {
            let refs: Vec<&FittedModel> = models.iter().map(|m| &m.0).collect();
            let bics: Vec<f64> = models.iter().map(|m| m.1).collect();
            let f = forecast(&refs, &bics, &window, cfg.k, week_seed, exec)?;
            let mut out = Vec::with_capacity(n_port);
            for &a in &cfg.alphas {
                let s = solve_mcvar(&f.scenarios, a, cfg.nonneg)?;
                out.push(Decision { cvar: s.objective, weights: s.weights });
            }
            if cfg.include_mv {
                let s = solve_mv(&f.cov)?;
                let x = f.scenarios.portfolio_returns(&s.weights);
                let a = cfg.alphas.iter().copied().fold(f64::INFINITY, f64::min).max(0.05);
                out.push(Decision { cvar: estimate_cvar(&x, a)?, weights: s.weights });
            }
            Ok(out)
        });
        let carried = fresh.is_err();
        let decisions = match fresh {
            Ok(d) => d,
            Err(err) => {
                skipped += 1;
                log::warn!("week ending {}: fit failed ({err}), carrying weights forward", panel.dates[t]);
                if last.iter().any(Option::is_none) {
                    continue;
                }
                last.iter()
                    .map(|d| d.as_ref().map(|d| Decision { weights: d.weights.clone(), cvar: d.cvar }).unwrap())
                    .collect()
            }
        };
        let end = schedule.get(e + 1).map_or(panel.n_days() - 1, |s| s.0);
        for (q, d) in decisions.into_iter().enumerate() {
            let daily: Vec<f64> = (inv..=end)
                .map(|day| {
                    let r: f64 = (0..panel.p).map(|j| d.weights[j] * panel.value(day, panel.m + j)).sum();
                    (r / 100.0).exp() - 1.0
                })
                .collect();
            let week_return = daily.iter().map(|r| 1.0 + r).product::<f64>() - 1.0;
            let first_day_loss = -100.0 * daily[0];
            let reserved = e < cfg.w_s;
            let prev: Vec<f64> = weeks[q].iter().rev().take(cfg.w_s).map(|w| w.cvar).collect();
            weeks[q].push(WeekRecord {
                fit_date: panel.dates[t],
                invest_date: panel.dates[inv],
                weights: d.weights.clone(),
                cvar: d.cvar,
                week_return,
                first_day_loss,
                exceeded: !reserved && first_day_loss >= d.cvar,
                reserved,
                invested_s2: !reserved && strategy2_invests(d.cvar, &prev),
                carried_forward: carried,
            });
            last[q] = Some(d);
        }
    }
    let mut tracks = Vec::with_capacity(n_port);
    for (q, w) in weeks.into_iter().enumerate() {
        let (kind, alpha) = if q < cfg.alphas.len() { ("mcvar", Some(cfg.alphas[q])) } else { ("mv", None) };
        let live: Vec<&WeekRecord> = w.iter().filter(|r| !r.reserved).collect();
        let s1: Vec<f64> = live.iter().map(|r| r.week_return).collect();
        let s2: Vec<f64> = live.iter().map(|r| if r.invested_s2 { r.week_return } else { 0.0 }).collect();
        let excluded: Vec<f64> = live.iter().filter(|r| !r.invested_s2).map(|r| r.week_return).collect();
        let losses: Vec<f64> = live.iter().map(|r| r.first_day_loss).collect();
        let cvars: Vec<f64> = live.iter().map(|r| r.cvar).collect();
        let (cost, exceedances) = cost_function(&losses, &cvars)?;
        let mean = |x: &[f64]| (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64);
        tracks.push(PortfolioTrack {
            kind: kind.to_string(),
            alpha,
            values_s1: compound(cfg.capital, &s1),
            values_s2: compound(cfg.capital, &s2),
            cost,
            exceedances,
            weeks_invested_s2: live.iter().filter(|r| r.invested_s2).count(),
            avg_excluded_return: mean(&excluded),
            avg_return_s1: mean(&s1),
            weeks: w,
        });
    }
    Ok(BacktestReport {
        config: cfg.clone(),
        symbols: panel.symbols[panel.m..].to_vec(),
        tracks,
        skipped_fits: skipped,
    })
}
