//! Scenario covariance, minimum-variance and minimum-CVaR portfolios, model averaging.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FittedModel, ReturnPanel};
use crate::error::{Error, Result};
use crate::exec::{stream_id, stream_rng, Exec};
use crate::lp::{self, Lp};
use crate::simulate::{draw_scenarios, filtered_state, ScenarioSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSolution {
    pub weights: Vec<f64>,
    /// Variance (percent²) for MV, CVaR (percent) for MCVaR.
    pub objective: f64,
    /// Return quantile `a` of the MCVaR program.
    pub var_level: Option<f64>,
}

const BLOCK: usize = 1024;

/// Uncentered scenario second moments rescaled to the exact variances `lambda`.
pub fn covariance_from_scenarios(scen: &ScenarioSet, lambda: &[f64], exec: Exec) -> Result<DMatrix<f64>> {
    let (k, p) = (scen.k(), scen.p());
    if k < p + 1 {
        return Err(Error::InvalidInput(format!("{k} scenarios for {p} assets")));
    }
    if lambda.len() != p || lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput("variances must be positive, one per asset".into()));
    }
    let partial = exec.map(k.div_ceil(BLOCK), |b| {
        let mut s = DMatrix::<f64>::zeros(p, p);
        for r in &scen.returns[b * BLOCK..((b + 1) * BLOCK).min(k)] {
            let v = DVector::from_column_slice(r);
            s.ger(1.0, &v, &v, 1.0);
        }
        s
    });
    let mut s = DMatrix::<f64>::zeros(p, p);
    for part in partial {
        s += part;
    }
    s /= k as f64;
    let d: Vec<f64> = (0..p).map(|i| s[(i, i)]).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Degenerate("a scenario column is identically zero".into()));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            lambda[i]
        } else {
            (lambda[i] * lambda[j]).sqrt() * s[(i, j)] / (d[i] * d[j]).sqrt()
        }
    }))
}

/// `w = Σ⁻¹1 / 1ᵀΣ⁻¹1`.
pub fn solve_mv(cov: &DMatrix<f64>) -> Result<PortfolioSolution> {
    let p = cov.nrows();
    if p == 0 || cov.ncols() != p {
        return Err(Error::InvalidInput("covariance must be square and non-empty".into()));
    }
    let ones = DVector::from_element(p, 1.0);
    let x = match cov.clone().cholesky() {
        Some(ch) => ch.solve(&ones),
        None => {
            let ridge = 1e-8 * cov.trace() / p as f64;
            log::warn!("covariance not positive definite, adding ridge {ridge:.3e}");
            let reg = cov + DMatrix::identity(p, p) * ridge;
            reg.cholesky().ok_or_else(|| Error::Numerical("singular covariance after ridge".into()))?.solve(&ones)
        }
    };
    let w = &x / x.sum();
    let objective = (w.transpose() * cov * &w)[(0, 0)];
    Ok(PortfolioSolution { weights: w.iter().copied().collect(), objective, var_level: None })
}

/// `−a + (1/(Kα)) Σ (a − x_k)⁺`.
pub fn cvar_objective(returns: &[f64], alpha: f64, a: f64) -> f64 {
    let c = 1.0 / (returns.len() as f64 * alpha);
    -a + c * returns.iter().map(|&x| (a - x).max(0.0)).sum::<f64>()
}

/// Minimum-CVaR weights over the scenarios, solved through the LP dual.
pub fn solve_mcvar(scen: &ScenarioSet, alpha: f64, nonneg: bool) -> Result<PortfolioSolution> {
    let (k, p) = (scen.k(), scen.p());
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0,1)")));
    }
    if k == 0 || p == 0 {
        return Err(Error::InvalidInput("empty scenario set".into()));
    }
    if (k as f64) * alpha < 1.0 {
        log::warn!("K·alpha = {} < 1", k as f64 * alpha);
    }
    let cap = 1.0 / (k as f64 * alpha);
    let mut cols: Vec<Vec<f64>> =
        scen.returns.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
    let mu: Vec<f64> = std::iter::once(0.0).chain(std::iter::repeat_n(1.0, p)).collect();
    cols.push(mu.clone());
    cols.push(mu.iter().map(|v| -v).collect());
    let mut c = vec![0.0; k];
    c.extend([-1.0, 1.0]);
    let mut upper = vec![cap; k];
    upper.extend([f64::INFINITY; 2]);
    if nonneg {
        for j in 0..p {
            let mut e = vec![0.0; p + 1];
            e[j + 1] = 1.0;
            cols.push(e);
            c.push(0.0);
            upper.push(f64::INFINITY);
        }
    }
    let n = cols.len();
    let mut b = vec![0.0; p + 1];
    b[0] = 1.0;
    let sol = lp::solve(&Lp { cols, b, c, lower: vec![0.0; n], upper }).map_err(|e| match e {
        Error::Numerical(msg) if msg.contains("infeasible") => {
            Error::Numerical("minimum-CVaR portfolio is unbounded (some asset mix dominates)".into())
        }
        e => e,
    })?;
    let weights: Vec<f64> = sol.y[1..].iter().map(|v| -v).collect();
    let a = sol.y[0];
    let x = scen.portfolio_returns(&weights);
    Ok(PortfolioSolution { objective: cvar_objective(&x, alpha, a), weights, var_level: Some(a) })
}

/// Mean loss of the returns strictly below the empirical `alpha`-quantile,
/// taken as the ascending order statistic at 0-based index `⌈Kα⌉`.
pub fn estimate_cvar(returns: &[f64], alpha: f64) -> Result<f64> {
    if returns.is_empty() || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput("need returns and alpha in (0,1)".into()));
    }
    let mut s = returns.to_vec();
    s.sort_by(f64::total_cmp);
    let idx = ((s.len() as f64 * alpha - 1e-9).ceil() as usize).min(s.len() - 1);
    estimate_cvar_at(returns, s[idx])
}

/// Mean loss of the returns strictly below `q`.
pub fn estimate_cvar_at(returns: &[f64], q: f64) -> Result<f64> {
    let (sum, g) = returns.iter().filter(|&&r| r < q).fold((0.0, 0usize), |(s, g), &r| (s + r, g + 1));
    if g == 0 {
        return Err(Error::Undefined("no scenario lies below the quantile".into()));
    }
    Ok(-sum / g as f64)
}

/// Posterior model probabilities from BIC scores.
pub fn bic_weights(bics: &[f64]) -> Vec<f64> {
    let mx = bics.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = bics.iter().map(|b| (b - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

/// One-day forecast from a single model or a BIC-weighted mixture.
#[derive(Debug, Clone)]
pub struct Forecast {
    pub model_weights: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub scenarios: ScenarioSet,
}

/// Each model draws the same `K` streams; scenario `k` of the mixture is
/// taken from the model picked by stream `(2, k)`.
pub fn forecast(
    models: &[&FittedModel],
    bics: &[f64],
    history: &ReturnPanel,
    k: usize,
    seed: u64,
    exec: Exec,
) -> Result<Forecast> {
    if models.is_empty() || models.len() != bics.len() {
        return Err(Error::InvalidInput("one BIC per model, at least one model".into()));
    }
    let weights = bic_weights(bics);
    let p = models[0].p();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    let mut sets = Vec::with_capacity(models.len());
    for (m, &w) in models.iter().zip(&weights) {
        if m.p() != p {
            return Err(Error::InvalidInput("models disagree on the number of stocks".into()));
        }
        let state = filtered_state(m, history)?;
        let set = draw_scenarios(&state, k, seed, exec);
        cov += covariance_from_scenarios(&set, &state.stock_variances(), exec)? * w;
        sets.push(set);
    }
    if sets.len() == 1 {
        let scenarios = sets.pop().expect("one set");
        return Ok(Forecast { model_weights: weights, cov, scenarios });
    }
    let cum: Vec<f64> = weights
        .iter()
        .scan(0.0, |s, w| {
            *s += w;
            Some(*s)
        })
        .collect();
    let returns = (0..k)
        .map(|i| {
            let u: f64 = stream_rng(seed, stream_id(2, i as u64, 0)).random();
            let j = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
            sets[j].returns[i].clone()
        })
        .collect();
    let model_id = sets.iter().map(|s| s.model_id.as_str()).collect::<Vec<_>>().join("+");
    Ok(Forecast { model_weights: weights, cov, scenarios: ScenarioSet { returns, model_id, seed } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(returns: Vec<Vec<f64>>) -> ScenarioSet {
        ScenarioSet { returns, model_id: String::new(), seed: 0 }
    }

    #[test]
    fn cvar_hand_example() {
        assert_eq!(estimate_cvar(&[-3.0, -1.0, 0.0, 1.0, 2.0], 0.2).unwrap(), 3.0);
        assert!(matches!(estimate_cvar(&[2.0; 10], 0.1), Err(Error::Undefined(_))));
    }

    #[test]
    fn mv_closed_forms() {
        let w = solve_mv(&DMatrix::identity(4, 4)).unwrap().weights;
        assert!(w.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let w = solve_mv(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap().weights;
        assert!((w[0] - 0.8).abs() < 1e-15 && (w[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn identical_columns_are_perfectly_correlated() {
        let s = set((0..50).map(|k| vec![(k as f64 * 0.37).sin(); 3]).collect());
        let c = covariance_from_scenarios(&s, &[1.0, 1.0, 1.0], Exec::Sequential).unwrap();
        assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_asset_mcvar() {
        let x: Vec<f64> = (0..200).map(|k| ((k * 7919) % 200) as f64 / 10.0 - 10.0).collect();
        let s = set(x.iter().map(|&v| vec![v]).collect());
        let sol = solve_mcvar(&s, 0.05, false).unwrap();
        assert!((sol.weights[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective - estimate_cvar(&x, 0.05).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn weights_from_bic() {
        assert_eq!(bic_weights(&[-5.0, -5.0]), vec![0.5, 0.5]);
        let w = bic_weights(&[0.0, -20.0]);
        assert!(w[1] < 1e-8 && ((w[0] / w[1]).ln() - 20.0).abs() < 1e-9);
    }
}
