//! Bivariate Student-t copula: density, h-function, inverse and the dynamic
//! correlation recursion.

use std::f64::consts::PI;

use crate::data::CopulaParams;
use crate::dist::{clip_unit, StudentT};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check_phi(phi: f64) -> Result<()> {
    if phi.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("|phi| = {} must be < 1", phi.abs())))
    }
}

fn check_unit(u: f64, name: &str) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {u} outside (0,1)")))
    }
}

/// `ln f₂` of the standard bivariate t with correlation `phi`.
#[inline]
pub fn ln_bvt_density(x: f64, y: f64, v: f64, phi: f64) -> f64 {
    let one_m = 1.0 - phi * phi;
    let q = (x * x - 2.0 * phi * x * y + y * y) / (v * one_m);
    -LN_2PI - 0.5 * one_m.ln() - 0.5 * (v + 2.0) * q.ln_1p()
}

pub fn bvt_density(x: f64, y: f64, v: f64, phi: f64) -> Result<f64> {
    check_phi(phi)?;
    Ok(ln_bvt_density(x, y, v, phi).exp())
}

/// Univariate kernels for a fixed `v`, reused across many evaluations.
#[derive(Debug, Clone, Copy)]
pub struct TKernel {
    pub t: StudentT,
    pub t1: StudentT,
}

impl TKernel {
    pub fn new(v: f64) -> Self {
        Self { t: StudentT::new(v), t1: StudentT::new(v + 1.0) }
    }

    pub fn v(&self) -> f64 {
        self.t.dof()
    }

    /// `t_v⁻¹(u)` after clipping `u` into the open interval.
    #[inline]
    pub fn score(&self, u: f64) -> f64 {
        self.t.quantile(clip_unit(u))
    }

    /// Copula log density in the transformed coordinates.
    #[inline]
    pub fn ln_density_xy(&self, x: f64, y: f64, phi: f64) -> f64 {
        ln_bvt_density(x, y, self.v(), phi) - self.t.ln_pdf(x) - self.t.ln_pdf(y)
    }

    /// `h(u_x | u_y)` in transformed coordinates.
    #[inline]
    pub fn h_xy(&self, x: f64, y: f64, phi: f64) -> f64 {
        let v = self.v();
        let s = ((v + y * y) * (1.0 - phi * phi) / (v + 1.0)).sqrt();
        clip_unit(self.t1.cdf((x - phi * y) / s))
    }

    /// Inverse of [`h_xy`] in `x`, returned on the unit scale.
    #[inline]
    pub fn h_inv_y(&self, u: f64, y: f64, phi: f64) -> f64 {
        let v = self.v();
        let s = ((v + y * y) * (1.0 - phi * phi) / (v + 1.0)).sqrt();
        let x = self.t1.quantile(clip_unit(u)) * s + phi * y;
        clip_unit(self.t.cdf(x))
    }
}

pub fn tcopula_density(u_x: f64, u_y: f64, v: f64, phi: f64) -> Result<f64> {
    check_unit(u_x, "u_x")?;
    check_unit(u_y, "u_y")?;
    check_phi(phi)?;
    let k = TKernel::new(v);
    Ok(k.ln_density_xy(k.score(u_x), k.score(u_y), phi).exp())
}

/// Conditional CDF `F(x | y) = ∂C(u_x, u_y)/∂u_y`.
pub fn h_func(u_x: f64, u_y: f64, v: f64, phi: f64) -> Result<f64> {
    check_unit(u_x, "u_x")?;
    check_unit(u_y, "u_y")?;
    check_phi(phi)?;
    let k = TKernel::new(v);
    Ok(k.h_xy(k.score(u_x), k.score(u_y), phi))
}

pub fn h_inv(u: f64, u_y: f64, v: f64, phi: f64) -> Result<f64> {
    check_unit(u, "u")?;
    check_unit(u_y, "u_y")?;
    check_phi(phi)?;
    let k = TKernel::new(v);
    Ok(k.h_inv_y(u, k.score(u_y), phi))
}

/// Lower/upper tail dependence coefficient of the t copula.
pub fn tail_dependence(phi: f64, v: f64) -> f64 {
    if phi <= -1.0 {
        return 0.0;
    }
    if phi >= 1.0 {
        return 1.0;
    }
    2.0 * StudentT::new(v + 1.0).cdf(-((v + 1.0) * (1.0 - phi) / (1.0 + phi)).sqrt())
}

/// Removes one conditioning variable from a partial correlation.
pub fn uncond_corr(phi_xy_z: f64, phi_xz: f64, phi_yz: f64) -> f64 {
    phi_xy_z * ((1.0 - phi_xz * phi_xz) * (1.0 - phi_yz * phi_yz)).sqrt() + phi_xz * phi_yz
}

/// Un-centered sample correlation; zero when either vector is all zeros.
pub fn sample_corr(xs: &[f64], ys: &[f64]) -> f64 {
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    let den = (sxx * syy).sqrt();
    if den > 0.0 {
        (sxy / den).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// `(1−a−b)φ̄ + aξ + bφ_prev`.
#[inline]
pub fn corr_update(p: &CopulaParams, xi: f64, phi_prev: f64) -> f64 {
    (1.0 - p.a - p.b) * p.phi_bar + p.a * xi + p.b * phi_prev
}

/// Correlation for the current day plus the residuals of up to `m_sc` previous days.
#[derive(Debug, Clone, PartialEq)]
pub struct DynCorrState {
    pub phi_t: f64,
    pub history_x: Vec<f64>,
    pub history_y: Vec<f64>,
    pub m_sc: usize,
}

impl DynCorrState {
    pub fn new(p: &CopulaParams, m_sc: usize) -> Self {
        Self { phi_t: p.phi_bar, history_x: Vec::with_capacity(m_sc), history_y: Vec::with_capacity(m_sc), m_sc }
    }
}

/// Records today's transformed residuals and returns the state for tomorrow.
pub fn dyn_corr_step(state: &DynCorrState, p: &CopulaParams, new_xy: (f64, f64)) -> DynCorrState {
    let mut next = state.clone();
    next.advance(p, new_xy);
    next
}

impl DynCorrState {
    pub fn advance(&mut self, p: &CopulaParams, (x, y): (f64, f64)) {
        if self.history_x.len() == self.m_sc {
            self.history_x.remove(0);
            self.history_y.remove(0);
        }
        self.history_x.push(x);
        self.history_y.push(y);
        let xi =
            if self.history_x.len() < self.m_sc { p.phi_bar } else { sample_corr(&self.history_x, &self.history_y) };
        self.phi_t = corr_update(p, xi, self.phi_t);
    }
}

/// Transformed pair series `(t_v⁻¹(u₁), t_v⁻¹(u₂))` with the marginal log-density total.
#[derive(Debug, Clone)]
pub struct Scores {
    pub v: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ln_marg: f64,
}

impl Scores {
    pub fn new(u1: &[f64], u2: &[f64], v: f64) -> Self {
        let k = TKernel::new(v);
        let x: Vec<f64> = u1.iter().map(|&u| k.score(u)).collect();
        let y: Vec<f64> = u2.iter().map(|&u| k.score(u)).collect();
        let ln_marg = x.iter().chain(&y).map(|&z| k.t.ln_pdf(z)).sum();
        Self { v, x, y, ln_marg }
    }

    /// Log-likelihood of the dynamic copula with this `v` (the `v` in `p` is ignored).
    pub fn loglik(&self, p: &CopulaParams, m_sc: usize) -> f64 {
        let v = self.v;
        let mut ll = -self.ln_marg;
        let mut phi = p.phi_bar;
        let n = self.x.len();
        for t in 0..n {
            let (x, y) = (self.x[t], self.y[t]);
            ll += ln_bvt_density(x, y, v, phi);
            let start = (t + 1).saturating_sub(m_sc);
            let xi = if t + 1 < m_sc { p.phi_bar } else { sample_corr(&self.x[start..=t], &self.y[start..=t]) };
            phi = corr_update(p, xi, phi);
        }
        ll
    }
}

/// Correlation path `φ^{[1..T]}` for a transformed series.
pub fn corr_path(x: &[f64], y: &[f64], p: &CopulaParams, m_sc: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut phi = p.phi_bar;
    for t in 0..x.len() {
        out.push(phi);
        let start = (t + 1).saturating_sub(m_sc);
        let xi = if t + 1 < m_sc { p.phi_bar } else { sample_corr(&x[start..=t], &y[start..=t]) };
        phi = corr_update(p, xi, phi);
    }
    out
}

/// Log-likelihood of one dynamic copula and, optionally, the h-series `F(x | y)`.
pub fn copula_series(u1: &[f64], u2: &[f64], p: &CopulaParams, m_sc: usize, h_out: Option<&mut Vec<f64>>) -> f64 {
    let k = TKernel::new(p.v);
    let x: Vec<f64> = u1.iter().map(|&u| k.score(u)).collect();
    let y: Vec<f64> = u2.iter().map(|&u| k.score(u)).collect();
    let path = corr_path(&x, &y, p, m_sc);
    let mut ll = 0.0;
    for t in 0..x.len() {
        ll += k.ln_density_xy(x[t], y[t], path[t]);
    }
    if let Some(h) = h_out {
        h.clear();
        h.extend((0..x.len()).map(|t| k.h_xy(x[t], y[t], path[t])));
    }
    ll
}

/// `1/(2π)`, the bivariate density at the origin with zero correlation.
pub const BVT_ORIGIN_INDEPENDENT: f64 = 1.0 / (2.0 * PI);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bvt_origin() {
        assert!((bvt_density(0.0, 0.0, 5.0, 0.0).unwrap() - BVT_ORIGIN_INDEPENDENT).abs() < 1e-15);
        assert!(bvt_density(0.0, 0.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn bvt_symmetry() {
        for &(x, y, phi) in &[(0.3, -1.2, 0.4), (2.0, 0.5, -0.7)] {
            let a = bvt_density(x, y, 4.0, phi).unwrap();
            assert!((a - bvt_density(y, x, 4.0, phi).unwrap()).abs() < 1e-15);
            assert!((a - bvt_density(-x, -y, 4.0, phi).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn copula_center_value() {
        // f₁;₅(0) = Γ(3)/(√(5π)Γ(2.5)) = 2/(√(5π)·1.329340388179137)
        let f1 = 2.0 / ((5.0 * PI).sqrt() * 1.329_340_388_179_137);
        let want = BVT_ORIGIN_INDEPENDENT / (f1 * f1);
        assert!((tcopula_density(0.5, 0.5, 5.0, 0.0).unwrap() - want).abs() < 1e-12);
        assert!(tcopula_density(0.0, 0.5, 5.0, 0.0).is_err());
    }

    #[test]
    fn copula_symmetries() {
        for &(a, b) in &[(0.1, 0.7), (0.33, 0.92), (0.5, 0.05)] {
            let c = tcopula_density(a, b, 4.0, 0.6).unwrap();
            assert!((c - tcopula_density(b, a, 4.0, 0.6).unwrap()).abs() < 1e-10 * c);
            assert!((c - tcopula_density(1.0 - a, 1.0 - b, 4.0, 0.6).unwrap()).abs() < 1e-10 * c);
        }
    }

    #[test]
    fn h_independent_center() {
        let v = 6.0;
        for &ux in &[0.05, 0.3, 0.5, 0.8, 0.99] {
            let x = StudentT::new(v).quantile(ux);
            let want = StudentT::new(v + 1.0).cdf(x * ((v + 1.0) / v).sqrt());
            assert!((h_func(ux, 0.5, v, 0.0).unwrap() - want).abs() < 1e-14);
            assert!((h_inv(want, 0.5, v, 0.0).unwrap() - ux).abs() < 1e-12);
        }
    }

    #[test]
    fn h_monotone_in_ux() {
        for &phi in &[-0.8, 0.0, 0.7] {
            let mut prev = 0.0;
            for i in 1..100 {
                let h = h_func(i as f64 / 100.0, 0.3, 4.0, phi).unwrap();
                assert!(h > prev);
                prev = h;
            }
        }
    }

    #[test]
    fn h_inv_matches_bisection() {
        for &(u, uy, phi, v) in &[(0.2, 0.7, 0.5, 3.0), (0.9, 0.1, -0.8, 10.0), (0.5, 0.5, 0.9, 4.0)] {
            let (mut lo, mut hi) = (1e-14, 1.0 - 1e-14);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h_func(mid, uy, v, phi).unwrap() < u {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            assert!((h_inv(u, uy, v, phi).unwrap() - 0.5 * (lo + hi)).abs() < 1e-9);
        }
    }

    #[test]
    fn dyn_corr_examples() {
        let p = CopulaParams::new(0.5, 0.05, 0.9, 5.0);
        assert!((corr_update(&p, 1.0, 0.5) - 0.525).abs() < 1e-15);
        assert!((sample_corr(&[1.0, 2.0], &[2.0, 4.0]) - 1.0).abs() < 1e-15);
        assert_eq!(sample_corr(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        let fixed = CopulaParams::new(0.3, 0.0, 0.0, 5.0);
        let mut s = DynCorrState::new(&fixed, 2);
        for k in 0..10 {
            s = dyn_corr_step(&s, &fixed, (k as f64, -(k as f64) * 0.5));
            assert!((s.phi_t - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn cold_start_keeps_phi_bar() {
        let p = CopulaParams::new(-0.4, 0.1, 0.8, 5.0);
        let mut s = DynCorrState::new(&p, 2);
        assert_eq!(s.phi_t, -0.4);
        s.advance(&p, (1.0, 1.0));
        assert!((s.phi_t + 0.4).abs() < 1e-15);
        s.advance(&p, (1.0, 1.0));
        assert!((s.phi_t - (0.1 * -0.4 + 0.1 + 0.8 * -0.4)).abs() < 1e-15);
        assert!(s.history_x.len() <= 2);
    }

    #[test]
    fn state_and_path_agree() {
        let p = CopulaParams::new(0.2, 0.1, 0.85, 5.0);
        let x = [0.3, -1.0, 2.0, 0.1, -0.7, 1.5];
        let y = [0.1, -0.5, 1.0, 0.9, 0.2, -1.1];
        let path = corr_path(&x, &y, &p, 2);
        let mut s = DynCorrState::new(&p, 2);
        for t in 0..x.len() {
            assert!((s.phi_t - path[t]).abs() < 1e-15);
            s.advance(&p, (x[t], y[t]));
        }
    }

    #[test]
    fn tail_dependence_values() {
        assert!((tail_dependence(1.0, 5.0) - 1.0).abs() < 1e-15);
        assert!((tail_dependence(1.0 - 1e-12, 5.0) - 1.0).abs() < 1e-5);
        assert_eq!(tail_dependence(-1.0, 5.0), 0.0);
        let want = 2.0 * StudentT::new(6.0).cdf(-(6.0f64).sqrt());
        assert!((tail_dependence(0.0, 5.0) - want).abs() < 1e-15);
        for v in [3.0, 8.0] {
            let mut prev = 0.0;
            for i in -9..=9 {
                let l = tail_dependence(i as f64 / 10.0, v);
                assert!(l > prev);
                prev = l;
            }
        }
        assert!(tail_dependence(0.3, 4.0) > tail_dependence(0.3, 9.0));
    }

    #[test]
    fn uncond_corr_examples() {
        assert_eq!(uncond_corr(0.37, 0.0, 0.0), 0.37);
        assert!((uncond_corr(0.0, 0.5, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scores_loglik_matches_series() {
        let u1 = [0.2, 0.7, 0.55, 0.9, 0.05, 0.4];
        let u2 = [0.3, 0.8, 0.45, 0.95, 0.2, 0.35];
        let p = CopulaParams::new(0.4, 0.08, 0.85, 6.0);
        let a = Scores::new(&u1, &u2, 6.0).loglik(&p, 2);
        let b = copula_series(&u1, &u2, &p, 2, None);
        assert!((a - b).abs() < 1e-12);
    }
}
