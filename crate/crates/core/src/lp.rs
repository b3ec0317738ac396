//! Dense bounded-variable revised simplex for `min cᵀx, Ax = b, l ≤ x ≤ u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Lp {
    /// Constraint columns, each of length `rows`.
    pub cols: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Simplex multipliers of the equality rows.
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
}

const TOL: f64 = 1e-9;
const REFACTOR: usize = 64;

struct Simplex<'a> {
    cols: &'a [Vec<f64>],
    b: &'a [f64],
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl Simplex<'_> {
    fn rows(&self) -> usize {
        self.b.len()
    }

    fn refactor(&mut self) -> Result<()> {
        let r = self.rows();
        let mut bm = DMatrix::zeros(r, r);
        for (q, &j) in self.basis.iter().enumerate() {
            for i in 0..r {
                bm[(i, q)] = self.cols[j][i];
            }
        }
        self.binv = bm.try_inverse().ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;
        // recompute basic values from the nonbasic ones
        let mut rhs = DVector::from_column_slice(self.b);
        for (j, s) in self.state.iter().enumerate() {
            if !matches!(s, State::Basic(_)) && self.x[j] != 0.0 {
                for i in 0..r {
                    rhs[i] -= self.cols[j][i] * self.x[j];
                }
            }
        }
        let xb = &self.binv * rhs;
        for (q, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[q];
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self) -> DVector<f64> {
        let cb = DVector::from_iterator(self.rows(), self.basis.iter().map(|&j| self.cost[j]));
        self.binv.tr_mul(&cb)
    }

    fn run(&mut self, max_iter: usize) -> Result<()> {
        let r = self.rows();
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(Error::Numerical(format!("simplex did not converge in {max_iter} iterations")));
            }
            let y = self.duals();
            let bland = degenerate > 50;
            let mut enter: Option<(usize, f64, f64)> = None;
            for (j, s) in self.state.iter().enumerate() {
                let dir = match s {
                    State::Basic(_) => continue,
                    State::Lower => 1.0,
                    State::Upper => -1.0,
                };
                if self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let d = self.cost[j] - self.cols[j].iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>();
                if d * dir < -TOL {
                    if bland {
                        enter = Some((j, d, dir));
                        break;
                    }
                    if enter.is_none_or(|(_, best, _)| d.abs() > best.abs()) {
                        enter = Some((j, d, dir));
                    }
                }
            }
            let Some((j, _, dir)) = enter else { return Ok(()) };
            let alpha = &self.binv * DVector::from_column_slice(&self.cols[j]);
            let mut theta = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, bool)> = None;
            for q in 0..r {
                let a = alpha[q] * dir;
                let bj = self.basis[q];
                let t = if a > TOL {
                    (self.x[bj] - self.lower[bj]) / a
                } else if a < -TOL {
                    (self.upper[bj] - self.x[bj]) / -a
                } else {
                    continue;
                };
                let t = t.max(0.0);
                let better = match leave {
                    None => t < theta,
                    Some((lq, _)) => t < theta - TOL || (bland && t <= theta + TOL && bj < self.basis[lq]),
                };
                if better {
                    theta = t;
                    leave = Some((q, a < 0.0));
                }
            }
            if !theta.is_finite() {
                return Err(Error::Numerical("linear program is unbounded".into()));
            }
            degenerate = if theta <= TOL { degenerate + 1 } else { 0 };
            self.x[j] += dir * theta;
            for q in 0..r {
                let bj = self.basis[q];
                self.x[bj] -= dir * theta * alpha[q];
            }
            self.iterations += 1;
            match leave {
                None => {
                    self.state[j] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((q, to_upper)) => {
                    let out = self.basis[q];
                    self.state[out] = if to_upper { State::Upper } else { State::Lower };
                    self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    self.basis[q] = j;
                    self.state[j] = State::Basic(q);
                    let piv = alpha[q];
                    let row: Vec<f64> = (0..r).map(|k| self.binv[(q, k)] / piv).collect();
                    for i in 0..r {
                        if i == q {
                            continue;
                        }
                        let f = alpha[i];
                        if f != 0.0 {
                            for k in 0..r {
                                self.binv[(i, k)] -= f * row[k];
                            }
                        }
                    }
                    for k in 0..r {
                        self.binv[(q, k)] = row[k];
                    }
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR {
                        self.refactor()?;
                    }
                }
            }
        }
    }
}

/// Two-phase solve; every lower bound must be finite.
pub fn solve(lp: &Lp) -> Result<LpSolution> {
    let n = lp.cols.len();
    let r = lp.b.len();
    if lp.c.len() != n || lp.lower.len() != n || lp.upper.len() != n || lp.cols.iter().any(|c| c.len() != r) {
        return Err(Error::InvalidInput("inconsistent LP dimensions".into()));
    }
    if lp.lower.iter().any(|l| !l.is_finite()) || lp.lower.iter().zip(&lp.upper).any(|(l, u)| u < l) {
        return Err(Error::InvalidInput("LP bounds must be finite below and ordered".into()));
    }
    // nonbasic start at lower bounds; artificials absorb the residual
    let mut resid = lp.b.clone();
    for (j, col) in lp.cols.iter().enumerate() {
        for i in 0..r {
            resid[i] -= col[i] * lp.lower[j];
        }
    }
    let mut cols = lp.cols.clone();
    for (i, &ri) in resid.iter().enumerate() {
        let mut e = vec![0.0; r];
        e[i] = if ri >= 0.0 { 1.0 } else { -1.0 };
        cols.push(e);
    }
    let mut x = lp.lower.clone();
    x.extend(resid.iter().map(|v| v.abs()));
    let mut state = vec![State::Lower; n];
    state.extend((0..r).map(State::Basic));
    let mut lower = lp.lower.clone();
    lower.extend(std::iter::repeat_n(0.0, r));
    let mut upper = lp.upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, r));
    let mut cost = vec![0.0; n];
    cost.extend(std::iter::repeat_n(1.0, r));
    let mut s = Simplex {
        cols: &cols,
        b: &lp.b,
        cost,
        lower,
        upper,
        x,
        state,
        basis: (n..n + r).collect(),
        binv: DMatrix::identity(r, r),
        iterations: 0,
        since_refactor: 0,
    };
    for (i, &ri) in resid.iter().enumerate() {
        if ri < 0.0 {
            s.binv[(i, i)] = -1.0;
        }
    }
    let max_iter = 50 * (n + r) + 1000;
    s.run(max_iter)?;
    let infeas: f64 = (n..n + r).map(|j| s.x[j]).sum();
    let scale = lp.b.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if infeas > 1e-7 * scale {
        return Err(Error::Numerical(format!("linear program is infeasible (residual {infeas:.3e})")));
    }
    for j in n..n + r {
        s.upper[j] = 0.0;
        s.cost[j] = 0.0;
        if !matches!(s.state[j], State::Basic(_)) {
            s.x[j] = 0.0;
        }
    }
    s.cost[..n].copy_from_slice(&lp.c);
    s.refactor()?;
    s.run(max_iter)?;
    s.refactor()?;
    let y = s.duals();
    let x: Vec<f64> = s.x[..n].iter().zip(lp.lower.iter().zip(&lp.upper)).map(|(v, (l, u))| v.clamp(*l, *u)).collect();
    let objective = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, y: y.iter().copied().collect(), objective, iterations: s.iterations })
}
