//! Forward simulation of return panels and one-day-ahead scenarios.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FittedModel, ReturnPanel};
use crate::dist::{clip_unit, StudentT};
use crate::error::{Error, Result};
use crate::exec::{stream_id, stream_rng, Exec};
use crate::garch::forecast_variance;
use crate::pcc::{copula_slots, Slot};
use crate::tcopula::{DynCorrState, TKernel};

/// `K × p` one-day-ahead stock returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub returns: Vec<Vec<f64>>,
    pub model_id: String,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn k(&self) -> usize {
        self.returns.len()
    }

    pub fn p(&self) -> usize {
        self.returns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.returns.iter().map(|r| r[j]).collect()
    }

    /// Portfolio returns `wᵀr_k` for every scenario.
    pub fn portfolio_returns(&self, w: &[f64]) -> Vec<f64> {
        self.returns.iter().map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Every recursion of the model, positioned at one day.
///
/// The day-by-day counterpart of the columnar lattice in `pcc`.
#[derive(Debug, Clone)]
pub struct ModelState<'a> {
    model: &'a FittedModel,
    slots: Vec<Slot>,
    /// Slot index of copula `(node, k)` is `first_slot[node] + k − 1`.
    first_slot: Vec<usize>,
    dag_kernels: Vec<TKernel>,
    stock_kernels: Vec<Vec<TKernel>>,
    margins: Vec<StudentT>,
    pub sigma2: Vec<f64>,
    pub dag_states: Vec<DynCorrState>,
    pub stock_states: Vec<Vec<DynCorrState>>,
    days_seen: usize,
}

/// Uniforms and transformed pairs produced for one day.
struct DayPass {
    chains: Vec<Vec<f64>>,
    dag_xy: Vec<(f64, f64)>,
    stock_xy: Vec<Vec<(f64, f64)>>,
    returns: Vec<f64>,
}

impl<'a> ModelState<'a> {
    /// States before the first day: stationary variances, correlations at `φ̄`.
    pub fn new(model: &'a FittedModel) -> Result<Self> {
        model.validate()?;
        let slots = copula_slots(&model.dag)?;
        let m = model.m();
        let mut first_slot = vec![0; m];
        let mut acc = 0;
        for &i in model.dag.order() {
            first_slot[i] = acc;
            acc += model.dag.parents(i).len();
        }
        let dag_kernels = model.dag_copulas.iter().map(|c| TKernel::new(c.params.v)).collect();
        let stock_kernels =
            model.stock_copulas.iter().map(|row| row.iter().map(|c| TKernel::new(c.v)).collect()).collect();
        Ok(Self {
            margins: model.marginals.iter().map(|g| StudentT::new(g.v)).collect(),
            sigma2: model.marginals.iter().map(|g| g.unconditional_variance()).collect(),
            dag_states: model.dag_copulas.iter().map(|c| DynCorrState::new(&c.params, model.m_sc)).collect(),
            stock_states: model
                .stock_copulas
                .iter()
                .map(|row| row.iter().map(|c| DynCorrState::new(c, model.m_sc)).collect())
                .collect(),
            model,
            slots,
            first_slot,
            dag_kernels,
            stock_kernels,
            days_seen: 0,
        })
    }

    pub fn days_seen(&self) -> usize {
        self.days_seen
    }

    fn scale(&self, j: usize) -> f64 {
        let v = self.model.marginals[j].v;
        (v / ((v - 2.0) * self.sigma2[j])).sqrt()
    }

    fn n_parents(&self, i: usize) -> usize {
        self.model.dag.parents(i).len()
    }

    /// Forward h-recursion for observed returns `r` (length m+p).
    fn forward(&self, r: &[f64]) -> DayPass {
        let model = self.model;
        let m = model.m();
        let mut chains: Vec<Vec<f64>> = vec![Vec::new(); m];
        let mut dag_xy = vec![(0.0, 0.0); self.slots.len()];
        for &i in model.dag.order() {
            let u = clip_unit(self.margins[i].cdf(r[i] * self.scale(i)));
            chains[i].push(u);
            for k in 1..=self.n_parents(i) {
                let s = self.first_slot[i] + k - 1;
                let src = self.slots[s].src;
                let ker = &self.dag_kernels[s];
                let x = ker.score(chains[i][k - 1]);
                let y = ker.score(chains[src.node][src.len]);
                chains[i].push(ker.h_xy(x, y, self.dag_states[s].phi_t));
                dag_xy[s] = (x, y);
            }
        }
        let stock_xy = (0..model.p())
            .map(|j| {
                let col = m + j;
                let mut u = clip_unit(self.margins[col].cdf(r[col] * self.scale(col)));
                let mut xy = Vec::with_capacity(m);
                for (q, &node) in model.dag.order().iter().enumerate() {
                    let ker = &self.stock_kernels[j][q];
                    let x = ker.score(u);
                    let y = ker.score(*chains[node].last().expect("marginal present"));
                    u = ker.h_xy(x, y, self.stock_states[j][q].phi_t);
                    xy.push((x, y));
                }
                xy
            })
            .collect();
        DayPass { chains, dag_xy, stock_xy, returns: r.to_vec() }
    }

    /// Inverse h-recursion from top-level uniforms `w` (length m+p).
    fn inverse(&self, w: &[f64], with_pairs: bool) -> DayPass {
        let model = self.model;
        let m = model.m();
        let mut chains: Vec<Vec<f64>> = vec![Vec::new(); m];
        let mut dag_xy = vec![(0.0, 0.0); self.slots.len()];
        let mut returns = vec![0.0; m + model.p()];
        for &i in model.dag.order() {
            let n = self.n_parents(i);
            let mut c = vec![0.0; n + 1];
            c[n] = clip_unit(w[i]);
            for k in (1..=n).rev() {
                let s = self.first_slot[i] + k - 1;
                let src = self.slots[s].src;
                let ker = &self.dag_kernels[s];
                let y = ker.score(chains[src.node][src.len]);
                c[k - 1] = ker.h_inv_y(c[k], y, self.dag_states[s].phi_t);
                if with_pairs {
                    dag_xy[s] = (ker.score(c[k - 1]), y);
                }
            }
            returns[i] = self.margins[i].quantile(c[0]) / self.scale(i);
            chains[i] = c;
        }
        let mut stock_xy = Vec::with_capacity(model.p());
        for j in 0..model.p() {
            let mut c = vec![0.0; m + 1];
            c[m] = clip_unit(w[m + j]);
            let mut xy = vec![(0.0, 0.0); m];
            for (q, &node) in model.dag.order().iter().enumerate().rev() {
                let ker = &self.stock_kernels[j][q];
                let y = ker.score(*chains[node].last().expect("chain filled"));
                c[q] = ker.h_inv_y(c[q + 1], y, self.stock_states[j][q].phi_t);
                if with_pairs {
                    xy[q] = (ker.score(c[q]), y);
                }
            }
            let col = m + j;
            returns[col] = self.margins[col].quantile(c[0]) / self.scale(col);
            stock_xy.push(xy);
        }
        DayPass { chains, dag_xy, stock_xy, returns }
    }

    fn advance(&mut self, pass: &DayPass) {
        let model = self.model;
        for (s, c) in model.dag_copulas.iter().enumerate() {
            self.dag_states[s].advance(&c.params, pass.dag_xy[s]);
        }
        for j in 0..model.p() {
            for q in 0..model.m() {
                self.stock_states[j][q].advance(&model.stock_copulas[j][q], pass.stock_xy[j][q]);
            }
        }
        for (k, g) in model.marginals.iter().enumerate() {
            self.sigma2[k] = forecast_variance(g, pass.returns[k], self.sigma2[k]);
        }
        self.days_seen += 1;
    }

    /// Conditions on one observed day and moves every recursion forward.
    pub fn observe(&mut self, r: &[f64]) {
        let pass = self.forward(r);
        self.advance(&pass);
    }

    /// `F(node | parents)` uniforms and marginal PITs of an observed day, without advancing.
    pub fn conditional_uniforms(&self, r: &[f64]) -> Vec<Vec<f64>> {
        self.forward(r).chains
    }

    /// Draws one day from the current states without advancing them.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let w: Vec<f64> = (0..self.sigma2.len()).map(|_| rng.random::<f64>()).collect();
        self.inverse(&w, false).returns
    }

    /// Maps given top-level uniforms to returns without advancing.
    pub fn returns_from_uniforms(&self, w: &[f64]) -> Vec<f64> {
        self.inverse(w, false).returns
    }

    /// Draws one day and advances all states with it.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Vec<f64> {
        let w: Vec<f64> = (0..self.sigma2.len()).map(|_| rng.random::<f64>()).collect();
        let pass = self.inverse(&w, true);
        self.advance(&pass);
        pass.returns
    }
}

/// Simulates `t` days from the stationary start.
pub fn simulate_panel(model: &FittedModel, t: usize, seed: u64) -> Result<ReturnPanel> {
    let mut state = ModelState::new(model)?;
    let n = model.marginals.len();
    let mut cols = vec![Vec::with_capacity(t); n];
    for day in 0..t {
        let mut rng = stream_rng(seed, stream_id(0, day as u64, 0));
        let r = state.step(&mut rng);
        for (c, x) in cols.iter_mut().zip(r) {
            c.push(x);
        }
    }
    ReturnPanel::from_columns(cols, model.m())
}

/// States after conditioning on every day of `history`.
pub fn filtered_state<'a>(model: &'a FittedModel, history: &ReturnPanel) -> Result<ModelState<'a>> {
    if history.m != model.m() || history.p != model.p() {
        return Err(Error::InvalidInput("history shape does not match model".into()));
    }
    if history.n_days() < model.m_sc {
        return Err(Error::InvalidInput(format!(
            "history of {} days cannot warm a window of {}",
            history.n_days(),
            model.m_sc
        )));
    }
    let mut state = ModelState::new(model)?;
    let n = history.n_series();
    let mut row = vec![0.0; n];
    for t in 0..history.n_days() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = history.value(t, j);
        }
        state.observe(&row);
    }
    Ok(state)
}

/// `K` conditionally independent next-day cross-sections of the stocks.
pub fn simulate_one_day(
    model: &FittedModel,
    history: &ReturnPanel,
    k: usize,
    seed: u64,
    exec: Exec,
) -> Result<ScenarioSet> {
    let state = filtered_state(model, history)?;
    Ok(draw_scenarios(&state, k, seed, exec))
}

pub fn draw_scenarios(state: &ModelState<'_>, k: usize, seed: u64, exec: Exec) -> ScenarioSet {
    let m = state.model.m();
    let returns = exec.map(k, |i| {
        let mut rng = stream_rng(seed, stream_id(1, i as u64, 0));
        state.draw(&mut rng)[m..].to_vec()
    });
    ScenarioSet { returns, model_id: model_id(state.model), seed }
}

impl ModelState<'_> {
    /// Exact next-day variances of the stock returns.
    pub fn stock_variances(&self) -> Vec<f64> {
        self.sigma2[self.model.m()..].to_vec()
    }

    pub fn model(&self) -> &FittedModel {
        self.model
    }
}

/// Short fingerprint of the model parameters for provenance columns.
pub fn model_id(model: &FittedModel) -> String {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    model.dag.hash(&mut h);
    for g in &model.marginals {
        for x in [g.omega, g.alpha, g.beta, g.v] {
            x.to_bits().hash(&mut h);
        }
    }
    for c in model.theta2().iter().chain(model.stock_copulas.iter().flatten()) {
        for x in c.to_array() {
            x.to_bits().hash(&mut h);
        }
    }
    format!("{:016x}", h.finish())
}
