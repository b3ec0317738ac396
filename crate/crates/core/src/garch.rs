//! GARCH(1,1) with standardized Student-t innovations.

use serde::{Deserialize, Serialize};

use crate::data::{validate_garch_params, GarchParams};
use crate::dist::{clip_unit, StudentT};
use crate::error::{Error, Result};
use crate::optim::{logistic, logit, NelderMead};

pub const MIN_FIT_LEN: usize = 50;

fn check(params: &GarchParams) -> Result<()> {
    let v = validate_garch_params(params);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidParams(v.join("; ")))
    }
}

/// Conditional variances, started at the unconditional variance.
pub fn garch_filter(params: &GarchParams, returns: &[f64]) -> Result<Vec<f64>> {
    check(params)?;
    Ok(filter_unchecked(params, returns))
}

fn filter_unchecked(p: &GarchParams, returns: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len());
    let mut s2 = p.unconditional_variance();
    for t in 0..returns.len() {
        if t > 0 {
            s2 = p.omega + p.alpha * returns[t - 1] * returns[t - 1] + p.beta * s2;
        }
        out.push(s2);
    }
    out
}

/// σ²_{t+1} given the last return and variance.
pub fn forecast_variance(params: &GarchParams, last_r: f64, last_sigma2: f64) -> f64 {
    params.omega + params.alpha * last_r * last_r + params.beta * last_sigma2
}

#[inline]
fn scale(sigma2: f64, v: f64) -> f64 {
    (v / ((v - 2.0) * sigma2)).sqrt()
}

/// Density of a return whose standardized innovation is t with `v` dof.
pub fn std_t_density(r: f64, sigma2: f64, v: f64) -> f64 {
    std_t_ln_density(r, sigma2, &StudentT::new(v)).exp()
}

pub fn std_t_ln_density(r: f64, sigma2: f64, t: &StudentT) -> f64 {
    let s = scale(sigma2, t.dof());
    t.ln_pdf(r * s) + s.ln()
}

pub fn marginal_cdf(r: f64, sigma2: f64, v: f64) -> f64 {
    StudentT::new(v).cdf(r * scale(sigma2, v))
}

pub fn marginal_quantile(u: f64, sigma2: f64, v: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("u = {u} outside (0,1)")));
    }
    Ok(StudentT::new(v).quantile(u) / scale(sigma2, v))
}

/// Probability integral transforms of a whole series, clipped into the open unit interval.
pub fn pit_series(params: &GarchParams, returns: &[f64]) -> Result<Vec<f64>> {
    let s2 = garch_filter(params, returns)?;
    let t = StudentT::new(params.v);
    Ok(returns.iter().zip(&s2).map(|(&r, &s)| clip_unit(t.cdf(r * scale(s, params.v)))).collect())
}

pub fn garch_loglik(params: &GarchParams, returns: &[f64]) -> Result<f64> {
    check(params)?;
    Ok(loglik_unchecked(params, returns))
}

fn loglik_unchecked(p: &GarchParams, returns: &[f64]) -> f64 {
    let t = StudentT::new(p.v);
    let c = (p.v - 2.0).ln();
    let half = 0.5 * (p.v + 1.0);
    let ln_norm = t.ln_pdf(0.0) + 0.5 * p.v.ln();
    let mut s2 = p.unconditional_variance();
    let mut ll = 0.0;
    for (k, &r) in returns.iter().enumerate() {
        if k > 0 {
            let prev = returns[k - 1];
            s2 = p.omega + p.alpha * prev * prev + p.beta * s2;
        }
        ll += ln_norm - 0.5 * (c + s2.ln()) - half * (r * r / ((p.v - 2.0) * s2)).ln_1p();
    }
    ll
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub loglik: f64,
    pub converged: bool,
}

const PERSIST_MAX: f64 = 0.9999;
const V_SPAN: f64 = 198.0;

fn unpack(x: &[f64]) -> GarchParams {
    let s = PERSIST_MAX * logistic(x[1]);
    let alpha = s * logistic(x[2]);
    GarchParams { omega: x[0].exp(), alpha, beta: s - alpha, v: 2.0 + V_SPAN * logistic(x[3]) }
}

fn pack(p: &GarchParams) -> Vec<f64> {
    let s = p.alpha + p.beta;
    vec![p.omega.ln(), logit(s / PERSIST_MAX), logit(p.alpha / s), logit((p.v - 2.0) / V_SPAN)]
}

/// Constrained MLE of the GARCH(1,1)-t parameters.
pub fn fit_garch(returns: &[f64]) -> Result<GarchFit> {
    if returns.len() < MIN_FIT_LEN {
        return Err(Error::InvalidInput(format!("need at least {MIN_FIT_LEN} returns, got {}", returns.len())));
    }
    let n = returns.len() as f64;
    let var = returns.iter().map(|r| r * r).sum::<f64>() / n;
    if !(var > 1e-12) || !var.is_finite() {
        return Err(Error::Degenerate("returns have zero variance".into()));
    }
    let start = GarchParams::new(var * 0.05, 0.05, 0.90, 8.0);
    let nm = NelderMead { max_evals: 6000, ftol: 1e-12, xtol: 1e-9, restarts: 3 };
    let res = nm.minimize(|x| -loglik_unchecked(&unpack(x), returns), &pack(&start), &[0.5, 0.5, 0.5, 0.5]);
    let params = unpack(&res.x);
    let loglik = loglik_unchecked(&params, returns);
    if !res.converged {
        log::warn!("GARCH fit did not converge after {} evaluations", res.evals);
    }
    Ok(GarchFit { params, loglik, converged: res.converged })
}
