//! Copula estimation: sequential maximum likelihood, RAM MCMC for the DAG
//! copulas, stock-copula fits and the Geweke burn-in rule.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{CopulaParams, Dag, DagCopula, FittedModel, GarchParams, ReturnPanel};
use crate::dist::norm_cdf;
use crate::error::{Error, Result};
use crate::exec::{stream_rng, Exec};
use crate::garch::{fit_garch, pit_series, GarchFit};
use crate::optim::{brent_min, logistic, logit, NelderMead};
use crate::pcc::{DagLattice, LatticeProposal};
use crate::tcopula::{copula_series, sample_corr, Scores, TKernel};

pub const V_MIN: f64 = 2.05;
pub const V_MAX: f64 = 100.0;
pub const MIN_COPULA_LEN: usize = 50;
const PHI_MAX: f64 = 0.999;
const S_MAX: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaFit {
    pub params: CopulaParams,
    pub loglik: f64,
    pub converged: bool,
}

fn unpack3(x: &[f64], v: f64) -> CopulaParams {
    let s = S_MAX * logistic(x[1]);
    let a = s * logistic(x[2]);
    CopulaParams { phi_bar: PHI_MAX * x[0].tanh(), a, b: s - a, v }
}

fn pack3(p: &CopulaParams) -> Vec<f64> {
    let phi = (p.phi_bar / PHI_MAX).clamp(-0.999_999, 0.999_999);
    let s = ((p.a + p.b) / S_MAX).clamp(1e-4, 1.0 - 1e-6);
    let share = if p.a + p.b > 0.0 { (p.a / (p.a + p.b)).clamp(1e-4, 1.0 - 1e-4) } else { 0.5 };
    vec![phi.atanh(), logit(s), logit(share)]
}

fn default_start(u1: &[f64], u2: &[f64]) -> CopulaParams {
    let k = TKernel::new(8.0);
    let x: Vec<f64> = u1.iter().map(|&u| k.score(u)).collect();
    let y: Vec<f64> = u2.iter().map(|&u| k.score(u)).collect();
    CopulaParams::new(sample_corr(&x, &y).clamp(-0.95, 0.95), 0.05, 0.9, 8.0)
}

/// Maximum likelihood for one dynamic t copula.
///
/// `v` is profiled out: an outer Brent search on `ln(v − 2)` wraps a
/// Nelder–Mead search over `(φ̄, a, b)` that reuses the t-scores for that `v`.
pub fn sequential_fit_copula(u1: &[f64], u2: &[f64], init: Option<CopulaParams>, m_sc: usize) -> Result<CopulaFit> {
    if u1.len() != u2.len() {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    if u1.len() < MIN_COPULA_LEN {
        return Err(Error::InvalidInput(format!("need at least {MIN_COPULA_LEN} observations, got {}", u1.len())));
    }
    if u1.iter().chain(u2).any(|&u| !(u > 0.0 && u < 1.0)) {
        return Err(Error::Domain("copula data must lie in (0,1)".into()));
    }
    let start = init.unwrap_or_else(|| default_start(u1, u2));
    let start_v = start.v.clamp(V_MIN, V_MAX);
    let nm = NelderMead { max_evals: 800, ftol: 1e-10, xtol: 1e-6, restarts: 1 };
    let mut inner_x = pack3(&start);
    let mut best: Option<(f64, CopulaParams)> = None;
    let mut converged = true;
    let mut profile = |z: f64| -> f64 {
        let v = 2.0 + z.exp();
        let scores = Scores::new(u1, u2, v);
        let res = nm.minimize(|x| -scores.loglik(&unpack3(x, v), m_sc), &inner_x, &[0.3, 0.5, 0.5]);
        converged &= res.converged;
        inner_x = res.x.clone();
        let ll = -res.f;
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, unpack3(&res.x, v)));
        }
        res.f
    };
    profile((start_v - 2.0).ln());
    let (_, _, _) = brent_min(&mut profile, (V_MIN - 2.0).ln(), (V_MAX - 2.0).ln(), 1e-3, 40);
    let (_, params) = best.expect("profile evaluated at least once");
    let loglik = copula_series(u1, u2, &params, m_sc, None);
    let init_ll = if start.is_valid() { copula_series(u1, u2, &start, m_sc, None) } else { f64::NEG_INFINITY };
    if init_ll > loglik {
        return Ok(CopulaFit { params: start, loglik: init_ll, converged });
    }
    Ok(CopulaFit { params, loglik, converged })
}

#[derive(Debug, Clone)]
pub struct DagFit {
    pub fits: Vec<CopulaFit>,
    pub lattice: DagLattice,
}

impl DagFit {
    pub fn theta2(&self) -> Vec<CopulaParams> {
        self.fits.iter().map(|f| f.params).collect()
    }

    pub fn loglik(&self) -> f64 {
        self.lattice.loglik()
    }
}

/// Sequential estimates of every DAG copula, fitted in lattice order.
pub fn fit_dag_sequential(factor_pits: &[Vec<f64>], dag: &Dag, m_sc: usize) -> Result<DagFit> {
    let mut fits = Vec::new();
    let lattice = DagLattice::build_with(dag, factor_pits, m_sc, |_, _, u1, u2| {
        let f = sequential_fit_copula(u1, u2, None, m_sc)?;
        if !f.converged {
            log::debug!("copula fit flagged as not converged");
        }
        fits.push(f);
        Ok(f.params)
    })?;
    Ok(DagFit { fits, lattice })
}

/// Log density known up to a constant, with support for incremental evaluation.
pub trait LogTarget {
    /// Log density at `theta`, which differs from the last committed point
    /// only in the coordinates `changed`.
    fn propose(&mut self, theta: &[f64], changed: Range<usize>) -> f64;
    /// Makes the last proposal the current point.
    fn commit(&mut self);
}

impl<F: FnMut(&[f64]) -> f64> LogTarget for F {
    fn propose(&mut self, theta: &[f64], _changed: Range<usize>) -> f64 {
        self(theta)
    }

    fn commit(&mut self) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamConfig {
    pub n_iter: usize,
    pub alpha_star: f64,
    pub gamma: f64,
    /// Coordinate blocks updated in turn; one block covering everything gives plain RAM.
    pub blocks: Vec<Range<usize>>,
    pub s0_diag: Vec<f64>,
    pub seed: u64,
}

impl RamConfig {
    pub fn new(d: usize, n_iter: usize, seed: u64) -> Self {
        Self { n_iter, alpha_star: 0.234, gamma: 2.0 / 3.0, blocks: vec![0..d], s0_diag: vec![1.0; d], seed }
    }
}

/// Robust adaptive Metropolis sampler; cloning it is a checkpoint.
#[derive(Debug, Clone)]
pub struct RamSampler {
    pub theta: Vec<f64>,
    pub log_post: f64,
    pub s: DMatrix<f64>,
    pub n: usize,
    pub s_fallbacks: usize,
    rng: ChaCha8Rng,
    cfg: RamConfig,
}

impl RamSampler {
    pub fn new<T: LogTarget>(target: &mut T, init: &[f64], cfg: RamConfig) -> Result<Self> {
        let d = init.len();
        if cfg.s0_diag.len() != d || cfg.blocks.iter().any(|b| b.end > d || b.is_empty()) {
            return Err(Error::InvalidInput("RAM configuration does not match dimension".into()));
        }
        let lp = target.propose(init, 0..d);
        if !lp.is_finite() {
            return Err(Error::InvalidInput("initial point outside the posterior support".into()));
        }
        target.commit();
        Ok(Self {
            theta: init.to_vec(),
            log_post: lp,
            s: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(cfg.s0_diag.clone())),
            n: 0,
            s_fallbacks: 0,
            rng: stream_rng(cfg.seed, 0),
            cfg,
        })
    }

    /// One RAM iteration; returns `(accepted, acceptance probability)`.
    pub fn step<T: LogTarget>(&mut self, target: &mut T) -> (bool, f64) {
        let d = self.theta.len();
        self.n += 1;
        let block = self.cfg.blocks[(self.n - 1) % self.cfg.blocks.len()].clone();
        let mut u = nalgebra::DVector::zeros(d);
        for i in block.clone() {
            u[i] = self.rng.sample::<f64, _>(StandardNormal);
        }
        let su = &self.s * &u;
        let nz: Vec<usize> = (0..d).filter(|&i| su[i] != 0.0).collect();
        let changed = match (nz.first(), nz.last()) {
            (Some(&a), Some(&b)) => a..b + 1,
            _ => block.clone(),
        };
        let prop: Vec<f64> = (0..d).map(|i| self.theta[i] + su[i]).collect();
        let lp = target.propose(&prop, changed);
        let alpha = if lp.is_finite() { (lp - self.log_post).exp().min(1.0) } else { 0.0 };
        let accepted = self.rng.random::<f64>() < alpha;
        if accepted {
            target.commit();
            self.theta = prop;
            self.log_post = lp;
        }
        let eta = (self.n as f64).powf(-self.cfg.gamma);
        let uu = u.norm_squared();
        if uu > 0.0 {
            let coef = eta * (alpha - self.cfg.alpha_star) / uu;
            let m = &self.s * self.s.transpose() + (&su * su.transpose()) * coef;
            match m.cholesky() {
                Some(ch) => self.s = ch.l(),
                None => self.s_fallbacks += 1,
            }
        }
        (accepted, alpha)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcChain {
    pub init: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
    pub log_post: Vec<f64>,
    pub burn_in: usize,
    pub s_fallbacks: usize,
    /// Final scale matrix, row-major.
    pub s_final: Vec<f64>,
}

impl McmcChain {
    pub fn acceptance_rate(&self, range: Range<usize>) -> f64 {
        let n = range.len().max(1);
        self.accepted[range].iter().filter(|&&a| a).count() as f64 / n as f64
    }

    pub fn trace(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[i]).collect()
    }

    pub fn post_burn(&self) -> &[Vec<f64>] {
        &self.samples[self.burn_in..]
    }
}

pub fn ram_mcmc<T: LogTarget>(target: &mut T, init: &[f64], cfg: RamConfig) -> Result<McmcChain> {
    let n_iter = cfg.n_iter;
    let mut sampler = RamSampler::new(target, init, cfg)?;
    let mut chain = McmcChain {
        init: init.to_vec(),
        samples: Vec::with_capacity(n_iter),
        accepted: Vec::with_capacity(n_iter),
        log_post: Vec::with_capacity(n_iter),
        burn_in: 0,
        s_fallbacks: 0,
        s_final: Vec::new(),
    };
    for _ in 0..n_iter {
        let (acc, _) = sampler.step(target);
        chain.samples.push(sampler.theta.clone());
        chain.accepted.push(acc);
        chain.log_post.push(sampler.log_post);
    }
    chain.s_fallbacks = sampler.s_fallbacks;
    chain.s_final = sampler.s.transpose().as_slice().to_vec();
    Ok(chain)
}

/// Uniform-prior posterior of the DAG copula parameters, evaluated incrementally.
pub struct DagTarget {
    lattice: DagLattice,
    current: f64,
    pending: Option<LatticeProposal>,
}

impl DagTarget {
    pub fn new(lattice: DagLattice) -> Self {
        Self { current: lattice.loglik(), lattice, pending: None }
    }

    pub fn lattice(&self) -> &DagLattice {
        &self.lattice
    }
}

pub fn in_prior_support(p: &CopulaParams) -> bool {
    p.phi_bar > -1.0 && p.phi_bar < 1.0 && p.a >= 0.0 && p.b >= 0.0 && p.a + p.b < 1.0 && p.v > 2.0 && p.v <= V_MAX
}

impl LogTarget for DagTarget {
    fn propose(&mut self, theta: &[f64], changed: Range<usize>) -> f64 {
        self.pending = None;
        let first = changed.start / 4;
        let last = changed.end.div_ceil(4);
        for s in 0..theta.len() / 4 {
            if !in_prior_support(&CopulaParams::from_slice(&theta[4 * s..4 * s + 4])) {
                return f64::NEG_INFINITY;
            }
        }
        if last - first != 1 {
            // Several copulas changed at once: rebuild from scratch.
            let mut lat = self.lattice.clone();
            for s in first..last {
                let prop = lat.propose(s, CopulaParams::from_slice(&theta[4 * s..4 * s + 4]));
                lat.commit(prop);
            }
            let ll = lat.loglik();
            let prop = LatticeProposal { updates: Vec::new(), params: (0, lat.params()[0]), delta: ll - self.current };
            self.lattice = lat;
            self.current = ll;
            self.pending = Some(prop);
            return ll;
        }
        let prop = self.lattice.propose(first, CopulaParams::from_slice(&theta[4 * first..4 * first + 4]));
        let ll = self.current + prop.delta;
        self.pending = Some(prop);
        ll
    }

    fn commit(&mut self) {
        if let Some(p) = self.pending.take() {
            if !p.updates.is_empty() {
                self.current += p.delta;
                self.lattice.commit(p);
            }
        }
    }
}

/// Coordinate-wise posterior summaries of the DAG copulas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagPosterior {
    pub sequential: Vec<CopulaFit>,
    pub median: Vec<CopulaParams>,
    pub mean: Vec<CopulaParams>,
    pub q05: Vec<CopulaParams>,
    pub q95: Vec<CopulaParams>,
    pub chain: McmcChain,
}

pub const DAG_S0: [f64; 4] = [0.02, 0.01, 0.02, 0.5];

/// Sequential fit followed by RAM sampling of the DAG copula posterior.
pub fn fit_dag_mcmc(
    factor_pits: &[Vec<f64>],
    dag: &Dag,
    n_iter: usize,
    seed: u64,
    m_sc: usize,
) -> Result<DagPosterior> {
    let seq = fit_dag_sequential(factor_pits, dag, m_sc)?;
    let n_cop = seq.fits.len();
    if n_cop == 0 {
        return Ok(DagPosterior {
            sequential: Vec::new(),
            median: Vec::new(),
            mean: Vec::new(),
            q05: Vec::new(),
            q95: Vec::new(),
            chain: McmcChain {
                init: Vec::new(),
                samples: Vec::new(),
                accepted: Vec::new(),
                log_post: Vec::new(),
                burn_in: 0,
                s_fallbacks: 0,
                s_final: Vec::new(),
            },
        });
    }
    let init: Vec<f64> = seq.fits.iter().flat_map(|f| f.params.to_array()).collect();
    let mut cfg = RamConfig::new(4 * n_cop, n_iter, seed);
    cfg.blocks = (0..n_cop).map(|s| 4 * s..4 * s + 4).collect();
    cfg.s0_diag = (0..n_cop).flat_map(|_| DAG_S0).collect();
    let mut target = DagTarget::new(seq.lattice.clone());
    let mut chain = ram_mcmc(&mut target, &init, cfg)?;
    let traces: Vec<Vec<f64>> = (0..4 * n_cop).map(|i| chain.trace(i)).collect();
    chain.burn_in = geweke_burnin_multi(&traces);
    let post = chain.post_burn();
    let summarize = |f: &dyn Fn(&mut Vec<f64>) -> f64| -> Vec<CopulaParams> {
        (0..n_cop)
            .map(|s| {
                let v: Vec<f64> = (0..4)
                    .map(|c| {
                        let mut xs: Vec<f64> = post.iter().map(|r| r[4 * s + c]).collect();
                        f(&mut xs)
                    })
                    .collect();
                CopulaParams::from_slice(&v)
            })
            .collect()
    };
    Ok(DagPosterior {
        sequential: seq.fits,
        median: summarize(&|x| quantile(x, 0.5)),
        mean: summarize(&|x| x.iter().sum::<f64>() / x.len() as f64),
        q05: summarize(&|x| quantile(x, 0.05)),
        q95: summarize(&|x| quantile(x, 0.95)),
        chain,
    })
}

/// Linear-interpolation sample quantile; sorts `xs` in place.
pub fn quantile(xs: &mut [f64], q: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// Sequential fits of every stock's `m` level copulas.
pub fn fit_stocks(
    stock_pits: &[Vec<f64>],
    lattice: &DagLattice,
    dag: &Dag,
    m_sc: usize,
    exec: Exec,
) -> Result<Vec<Vec<CopulaFit>>> {
    exec.map(stock_pits.len(), |j| fit_one_stock(&stock_pits[j], lattice, dag, m_sc)).into_iter().collect()
}

fn fit_one_stock(pit: &[f64], lattice: &DagLattice, dag: &Dag, m_sc: usize) -> Result<Vec<CopulaFit>> {
    let mut u = pit.to_vec();
    let mut fits = Vec::with_capacity(dag.m());
    for &node in dag.order() {
        let top = lattice.top(node);
        let f = sequential_fit_copula(&u, top, None, m_sc)?;
        if !f.converged {
            log::warn!("stock copula at factor {node} did not converge");
        }
        let mut h = Vec::new();
        copula_series(&u, top, &f.params, m_sc, Some(&mut h));
        u = h;
        fits.push(f);
    }
    Ok(fits)
}

/// Stage one: GARCH fits of every panel column.
pub fn fit_marginals(panel: &ReturnPanel, exec: Exec) -> Result<Vec<GarchFit>> {
    exec.map(panel.n_series(), |j| fit_garch(panel.column(j))).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DagMethod {
    Sequential,
    Mcmc { n_iter: usize, seed: u64 },
}

/// All three stages for a given DAG.
pub fn fit_model(panel: &ReturnPanel, dag: &Dag, method: DagMethod, m_sc: usize, exec: Exec) -> Result<FittedModel> {
    let marg = fit_marginals(panel, exec)?;
    let marginals: Vec<GarchParams> = marg.iter().map(|f| f.params).collect();
    fit_model_given_marginals(panel, marginals, dag, method, m_sc, exec)
}

pub fn fit_model_given_marginals(
    panel: &ReturnPanel,
    marginals: Vec<GarchParams>,
    dag: &Dag,
    method: DagMethod,
    m_sc: usize,
    exec: Exec,
) -> Result<FittedModel> {
    let pits: Vec<Vec<f64>> =
        (0..panel.n_series()).map(|j| pit_series(&marginals[j], panel.column(j))).collect::<Result<_>>()?;
    let (m, _) = (panel.m, panel.p);
    let theta2 = match method {
        DagMethod::Sequential => fit_dag_sequential(&pits[..m], dag, m_sc)?.theta2(),
        DagMethod::Mcmc { n_iter, seed } => fit_dag_mcmc(&pits[..m], dag, n_iter, seed, m_sc)?.median,
    };
    let lattice = DagLattice::build(dag, &pits[..m], &theta2, m_sc)?;
    let stocks = fit_stocks(&pits[m..], &lattice, dag, m_sc, exec)?;
    let dag_copulas = lattice
        .slots()
        .iter()
        .zip(&theta2)
        .map(|(s, p)| DagCopula { child: s.child, parent: s.parent, given: s.given.clone(), params: *p })
        .collect();
    Ok(FittedModel {
        marginals,
        dag: dag.clone(),
        dag_copulas,
        stock_copulas: stocks.iter().map(|row| row.iter().map(|f| f.params).collect()).collect(),
        m_sc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geweke {
    pub burn_in: usize,
    pub z: f64,
    pub p_value: f64,
}

pub const GEWEKE_BATCHES: usize = 20;

fn var_of_mean(seg: &[f64]) -> f64 {
    let nb = GEWEKE_BATCHES.min(seg.len() / 2).max(1);
    let size = seg.len() / nb;
    let means: Vec<f64> = (0..nb).map(|b| seg[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    if nb < 2 {
        return 0.0;
    }
    let mu = means.iter().sum::<f64>() / nb as f64;
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (nb - 1) as f64;
    var / nb as f64
}

/// Geweke z comparing the first 10% with the last 50% of `series`.
pub fn geweke_z(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 20 {
        return Err(Error::InvalidInput(format!("series of length {n} too short")));
    }
    let a = &series[..n / 10];
    let b = &series[n - n / 2..];
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let den = (var_of_mean(a) + var_of_mean(b)).sqrt();
    if den > 0.0 && den.is_finite() {
        Ok((ma - mb) / den)
    } else {
        Err(Error::Undefined("Geweke statistic has zero spectral variance".into()))
    }
}

fn burn_grid(n: usize) -> impl Iterator<Item = usize> {
    (0..=10).map(move |i| i * n / 20)
}

/// Burn-in on a 5% grid (up to half the chain) minimizing `|z|`.
pub fn geweke_burnin(series: &[f64]) -> Result<Geweke> {
    let n = series.len();
    if n < 40 {
        return Err(Error::InvalidInput(format!("need at least 40 draws, got {n}")));
    }
    if series.iter().all(|&x| x == series[0]) {
        return Err(Error::Undefined("constant series".into()));
    }
    let mut best: Option<Geweke> = None;
    for b in burn_grid(n) {
        if let Ok(z) = geweke_z(&series[b..]) {
            if best.is_none_or(|g| z.abs() < g.z.abs()) {
                best = Some(Geweke { burn_in: b, z, p_value: 2.0 * norm_cdf(-z.abs()) });
            }
        }
    }
    best.ok_or_else(|| Error::Undefined("no burn-in candidate gives a defined statistic".into()))
}

/// Common burn-in minimizing the average `|z|` over several traces.
pub fn geweke_burnin_multi(traces: &[Vec<f64>]) -> usize {
    let n = traces.first().map_or(0, Vec::len);
    if n < 40 {
        return 0;
    }
    let mut best = (f64::INFINITY, 0);
    for b in burn_grid(n) {
        let zs: Vec<f64> = traces.iter().filter_map(|t| geweke_z(&t[b..]).ok()).map(f64::abs).collect();
        if zs.is_empty() {
            continue;
        }
        let avg = zs.iter().sum::<f64>() / zs.len() as f64;
        if avg < best.0 {
            best = (avg, b);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::stream_rng;

    fn gaussian_trace(seed: u64, n: usize) -> Vec<f64> {
        let mut r = stream_rng(seed, 0);
        (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn geweke_constant_is_undefined() {
        assert!(matches!(geweke_burnin(&[1.0; 100]), Err(Error::Undefined(_))));
        assert!(geweke_burnin(&[1.0; 10]).is_err());
    }

    #[test]
    fn geweke_finds_level_shift() {
        let mut ok = 0;
        for seed in 0..20 {
            let mut x = gaussian_trace(seed, 1000);
            for v in &mut x[..300] {
                *v += 3.0;
            }
            if geweke_burnin(&x).unwrap().burn_in >= 300 {
                ok += 1;
            }
        }
        assert!(ok >= 18, "{ok}");
    }

    #[test]
    fn ram_checkpoint_reproduces() {
        let mut f = |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let mut s = RamSampler::new(&mut f, &[0.5, -0.5], RamConfig::new(2, 0, 3)).unwrap();
        for _ in 0..50 {
            s.step(&mut f);
        }
        let mut c = s.clone();
        for _ in 0..50 {
            s.step(&mut f);
            c.step(&mut f);
        }
        assert_eq!(s.theta, c.theta);
        assert_eq!(s.s, c.s);
    }

    #[test]
    fn ram_scale_stays_triangular() {
        let mut f = |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let mut s = RamSampler::new(&mut f, &[0.0; 4], RamConfig::new(4, 0, 8)).unwrap();
        for _ in 0..500 {
            s.step(&mut f);
            for i in 0..4 {
                assert!(s.s[(i, i)] > 0.0);
                for j in i + 1..4 {
                    assert_eq!(s.s[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn unit_quantile() {
        let mut x = vec![3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&mut x, 0.5), 3.0);
        assert_eq!(quantile(&mut x, 0.0), 1.0);
        assert_eq!(quantile(&mut x, 1.0), 5.0);
    }

    #[test]
    fn short_series_rejected() {
        assert!(sequential_fit_copula(&[0.5; 10], &[0.5; 10], None, 2).is_err());
    }
}
