//! Domain types shared by every stage of the model.

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Daily log returns in percent. Columns `0..m` are risk factors, `m..m+p` stocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub symbols: Vec<String>,
    columns: Vec<Vec<f64>>,
    pub m: usize,
    pub p: usize,
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, symbols: Vec<String>, columns: Vec<Vec<f64>>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("need at least one risk factor".into()));
        }
        if columns.len() < m {
            return Err(Error::InvalidInput(format!("{} columns but m = {m}", columns.len())));
        }
        if symbols.len() != columns.len() {
            return Err(Error::InvalidInput("symbol count != column count".into()));
        }
        let t = dates.len();
        for (j, c) in columns.iter().enumerate() {
            if c.len() != t {
                return Err(Error::InvalidInput(format!("column {} has {} rows, expected {t}", symbols[j], c.len())));
            }
            if let Some(k) = c.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite return at row {k} of {}", symbols[j])));
            }
        }
        let p = columns.len() - m;
        Ok(Self { dates, symbols, columns, m, p })
    }

    /// Panel with synthetic business-day dates and generated symbols.
    pub fn from_columns(columns: Vec<Vec<f64>>, m: usize) -> Result<Self> {
        let t = columns.first().map_or(0, Vec::len);
        let n = columns.len();
        let symbols = (0..n).map(|j| if j < m { format!("F{}", j + 1) } else { format!("S{}", j - m + 1) }).collect();
        Self::new(business_days(default_start(), t), symbols, columns, m)
    }

    /// Build from `(T+1)` price rows, one column per symbol.
    pub fn from_prices(dates: Vec<NaiveDate>, symbols: Vec<String>, prices: &[Vec<f64>], m: usize) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::InvalidInput("one date per price row required".into()));
        }
        let cols = log_returns(prices)?;
        Self::new(dates[1..].to_vec(), symbols, cols, m)
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn value(&self, t: usize, j: usize) -> f64 {
        self.columns[j][t]
    }

    /// Rows `start..end` as a new panel.
    pub fn window(&self, start: usize, end: usize) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates[start..end].to_vec(),
            symbols: self.symbols.clone(),
            columns: self.columns.iter().map(|c| c[start..end].to_vec()).collect(),
            m: self.m,
            p: self.p,
        }
    }

    /// Same rows, stock columns replaced.
    pub fn with_stock_columns(&self, stocks: Vec<Vec<f64>>) -> Result<ReturnPanel> {
        let mut cols = self.columns[..self.m].to_vec();
        let mut symbols = self.symbols[..self.m].to_vec();
        for (k, c) in stocks.into_iter().enumerate() {
            symbols.push(format!("S{}", k + 1));
            cols.push(c);
        }
        ReturnPanel::new(self.dates.clone(), symbols, cols, self.m)
    }
}

pub(crate) fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

/// `n` consecutive Monday–Friday dates starting at `start` (or the next weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    out
}

/// Percent log returns `100·(ln S_t − ln S_{t−1})`, returned column-wise.
pub fn log_returns(prices: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if prices.len() < 2 {
        return Err(Error::InvalidInput("need at least two price rows".into()));
    }
    let n = prices[0].len();
    for (t, row) in prices.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidInput(format!("row {t} has {} prices, expected {n}", row.len())));
        }
        if let Some(j) = row.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!("nonpositive price {} at row {t}, column {j}", row[j])));
        }
    }
    Ok((0..n).map(|j| prices.windows(2).map(|w| 100.0 * (w[1][j].ln() - w[0][j].ln())).collect()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub v: f64,
}

impl GarchParams {
    pub fn new(omega: f64, alpha: f64, beta: f64, v: f64) -> Self {
        Self { omega, alpha, beta, v }
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaParams {
    pub phi_bar: f64,
    pub a: f64,
    pub b: f64,
    pub v: f64,
}

impl CopulaParams {
    pub fn new(phi_bar: f64, a: f64, b: f64, v: f64) -> Self {
        Self { phi_bar, a, b, v }
    }

    /// Static copula with correlation `phi`.
    pub fn fixed(phi: f64, v: f64) -> Self {
        Self { phi_bar: phi, a: 0.0, b: 0.0, v }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.phi_bar, self.a, self.b, self.v]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self { phi_bar: x[0], a: x[1], b: x[2], v: x[3] }
    }

    pub fn is_valid(&self) -> bool {
        validate_copula_params(self).is_empty()
    }
}

pub fn validate_copula_params(p: &CopulaParams) -> Vec<String> {
    let mut out = Vec::new();
    if !(p.a >= 0.0 && p.a < 1.0) {
        out.push(format!("0 <= a < 1 violated (a = {})", p.a));
    }
    if !(p.b >= 0.0 && p.b < 1.0) {
        out.push(format!("0 <= b < 1 violated (b = {})", p.b));
    }
    if !(p.a + p.b < 1.0) {
        out.push(format!("a + b < 1 violated (a + b = {})", p.a + p.b));
    }
    if !(p.phi_bar > -1.0 && p.phi_bar < 1.0) {
        out.push(format!("-1 < phi_bar < 1 violated (phi_bar = {})", p.phi_bar));
    }
    if !(p.v > 2.0) {
        out.push(format!("v > 2 violated (v = {})", p.v));
    }
    out
}

pub fn validate_garch_params(p: &GarchParams) -> Vec<String> {
    let mut out = Vec::new();
    if !(p.omega > 0.0) {
        out.push(format!("omega > 0 violated (omega = {})", p.omega));
    }
    if !(p.alpha >= 0.0) {
        out.push(format!("alpha >= 0 violated (alpha = {})", p.alpha));
    }
    if !(p.beta >= 0.0) {
        out.push(format!("beta >= 0 violated (beta = {})", p.beta));
    }
    if !(p.alpha + p.beta < 1.0) {
        out.push(format!("alpha + beta < 1 violated (alpha + beta = {})", p.alpha + p.beta));
    }
    if !(p.v > 2.0) {
        out.push(format!("v > 2 violated (v = {})", p.v));
    }
    out
}

/// Directed acyclic graph over `m` risk-factor nodes (0-based labels).
///
/// `order` is the topological order produced by Kahn's algorithm taking the
/// smallest available label first, so it is a function of the adjacency.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct Dag {
    m: usize,
    adj: Vec<bool>,
    order: Vec<usize>,
    pos: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DagRepr {
    m: usize,
    adjacency: Vec<Vec<u8>>,
    order: Vec<usize>,
}

impl TryFrom<DagRepr> for Dag {
    type Error = Error;
    fn try_from(r: DagRepr) -> Result<Self> {
        let dag = Dag::from_adjacency(&r.adjacency)?;
        if dag.m != r.m {
            return Err(Error::InvalidInput("dag size mismatch".into()));
        }
        if !dag.is_topological(&r.order) {
            return Err(Error::InvalidInput("stored order is not topological".into()));
        }
        Ok(dag)
    }
}

impl From<Dag> for DagRepr {
    fn from(d: Dag) -> Self {
        DagRepr { m: d.m, adjacency: d.adjacency(), order: d.order.clone() }
    }
}

impl Dag {
    pub fn empty(m: usize) -> Self {
        Self { m, adj: vec![false; m * m], order: (0..m).collect(), pos: (0..m).collect() }
    }

    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![false; m * m];
        for &(i, j) in edges {
            if i >= m || j >= m || i == j {
                return Err(Error::InvalidInput(format!("bad edge {i}->{j}")));
            }
            adj[i * m + j] = true;
        }
        Self::from_flat(m, adj)
    }

    pub fn from_adjacency(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.len();
        let mut adj = vec![false; m * m];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::InvalidInput("adjacency must be square".into()));
            }
            for (j, &x) in r.iter().enumerate() {
                match x {
                    0 => {}
                    1 if i != j => adj[i * m + j] = true,
                    _ => return Err(Error::InvalidInput(format!("bad entry ({i},{j})"))),
                }
            }
        }
        Self::from_flat(m, adj)
    }

    fn from_flat(m: usize, adj: Vec<bool>) -> Result<Self> {
        let order = kahn_order(m, &adj).ok_or_else(|| Error::InvalidInput("graph contains a cycle".into()))?;
        let mut pos = vec![0; m];
        for (q, &i) in order.iter().enumerate() {
            pos[i] = q;
        }
        Ok(Self { m, adj, order, pos })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.m + j]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of node `i` in the topological order.
    pub fn position(&self, i: usize) -> usize {
        self.pos[i]
    }

    /// Parents of `j`, sorted by topological position.
    pub fn parents(&self, j: usize) -> Vec<usize> {
        let mut pa: Vec<usize> = (0..self.m).filter(|&i| self.has_edge(i, j)).collect();
        pa.sort_by_key(|&i| self.pos[i]);
        pa
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().filter(|&&x| x).count()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in 0..self.m {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        (0..self.m).map(|i| (0..self.m).map(|j| self.has_edge(i, j) as u8).collect()).collect()
    }

    /// Row-major 0/1 string, the compact form used in graph logs.
    pub fn adjacency_bits(&self) -> String {
        self.adj.iter().map(|&x| if x { '1' } else { '0' }).collect()
    }

    pub fn from_bits(m: usize, bits: &str) -> Result<Self> {
        if bits.len() != m * m {
            return Err(Error::InvalidInput("bit string length != m*m".into()));
        }
        let mut adj = Vec::with_capacity(m * m);
        for c in bits.chars() {
            match c {
                '0' => adj.push(false),
                '1' => adj.push(true),
                _ => return Err(Error::InvalidInput(format!("bad bit {c:?}"))),
            }
        }
        if (0..m).any(|i| adj[i * m + i]) {
            return Err(Error::InvalidInput("self-loop".into()));
        }
        Self::from_flat(m, adj)
    }

    pub fn with_edge(&self, i: usize, j: usize) -> Result<Self> {
        let mut adj = self.adj.clone();
        adj[i * self.m + j] = true;
        Self::from_flat(self.m, adj)
    }

    pub fn without_edge(&self, i: usize, j: usize) -> Self {
        let mut adj = self.adj.clone();
        adj[i * self.m + j] = false;
        Self::from_flat(self.m, adj).expect("removing an edge keeps a DAG acyclic")
    }

    pub fn is_topological(&self, order: &[usize]) -> bool {
        if order.len() != self.m {
            return false;
        }
        let mut pos = vec![usize::MAX; self.m];
        for (q, &i) in order.iter().enumerate() {
            if i >= self.m || pos[i] != usize::MAX {
                return false;
            }
            pos[i] = q;
        }
        self.edges().iter().all(|&(i, j)| pos[i] < pos[j])
    }

    /// Same graph with node `order[q]` renamed to `q`.
    pub fn relabeled(&self) -> Dag {
        let edges: Vec<_> = self.edges().into_iter().map(|(i, j)| (self.pos[i], self.pos[j])).collect();
        Dag::from_edges(self.m, &edges).expect("relabeling preserves acyclicity")
    }
}

fn kahn_order(m: usize, adj: &[bool]) -> Option<Vec<usize>> {
    let mut indeg: Vec<usize> = (0..m).map(|j| (0..m).filter(|&i| adj[i * m + j]).count()).collect();
    let mut ready: std::collections::BTreeSet<usize> = (0..m).filter(|&j| indeg[j] == 0).collect();
    let mut order = Vec::with_capacity(m);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for j in 0..m {
            if adj[i * m + j] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
    }
    (order.len() == m).then_some(order)
}

/// A DAG copula `c_{child, parent | given}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagCopula {
    pub child: usize,
    pub parent: usize,
    pub given: Vec<usize>,
    pub params: CopulaParams,
}

pub const DEFAULT_M_SC: usize = 2;

/// Full GC-GARCH parameterization.
///
/// `marginals[j]` belongs to panel column `j`. `stock_copulas[j][i]` couples
/// stock `j` with the risk factor at topological position `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub marginals: Vec<GarchParams>,
    pub dag: Dag,
    pub dag_copulas: Vec<DagCopula>,
    pub stock_copulas: Vec<Vec<CopulaParams>>,
    pub m_sc: usize,
}

impl FittedModel {
    pub fn m(&self) -> usize {
        self.dag.m()
    }

    pub fn p(&self) -> usize {
        self.stock_copulas.len()
    }

    /// DAG copula parameters in lattice order.
    pub fn theta2(&self) -> Vec<CopulaParams> {
        self.dag_copulas.iter().map(|c| c.params).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if self.marginals.len() != m + self.p() {
            return Err(Error::InvalidParams(format!(
                "{} marginals for m + p = {}",
                self.marginals.len(),
                m + self.p()
            )));
        }
        for (j, g) in self.marginals.iter().enumerate() {
            let v = validate_garch_params(g);
            if !v.is_empty() {
                return Err(Error::InvalidParams(format!("marginal {j}: {}", v.join("; "))));
            }
        }
        let expected = crate::pcc::copula_slots(&self.dag)?;
        if expected.len() != self.dag_copulas.len() {
            return Err(Error::InvalidParams(format!(
                "{} dag copulas, structure needs {}",
                self.dag_copulas.len(),
                expected.len()
            )));
        }
        for (slot, c) in expected.iter().zip(&self.dag_copulas) {
            if slot.child != c.child || slot.parent != c.parent || slot.given != c.given {
                return Err(Error::InvalidParams(format!(
                    "dag copula ({},{}) out of lattice order",
                    c.child, c.parent
                )));
            }
            let v = validate_copula_params(&c.params);
            if !v.is_empty() {
                return Err(Error::InvalidParams(v.join("; ")));
            }
        }
        for (j, row) in self.stock_copulas.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidParams(format!("stock {j} needs {m} copulas")));
            }
            for c in row {
                let v = validate_copula_params(c);
                if !v.is_empty() {
                    return Err(Error::InvalidParams(format!("stock {j}: {}", v.join("; "))));
                }
            }
        }
        if self.m_sc == 0 {
            return Err(Error::InvalidParams("m_sc must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_return_examples() {
        let r = log_returns(&[vec![100.0, 50.0], vec![110.0, 50.0]]).unwrap();
        assert!((r[0][0] - 9.531017980432493).abs() < 1e-12);
        assert_eq!(r[1][0], 0.0);
        let r = log_returns(&[vec![100.0], vec![90.0], vec![99.0]]).unwrap();
        assert!((r[0][0] + 10.536051565782628).abs() < 1e-12);
        assert!((r[0][1] - 9.531017980432493).abs() < 1e-12);
    }

    #[test]
    fn log_returns_reject_bad_prices() {
        assert!(log_returns(&[vec![1.0], vec![0.0]]).is_err());
        assert!(log_returns(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn copula_validation() {
        assert!(validate_copula_params(&CopulaParams::new(0.9911, 0.0102, 0.9776, 5.59)).is_empty());
        assert!(validate_copula_params(&CopulaParams::new(0.0, 0.0, 0.0, 3.0)).is_empty());
        let v = validate_copula_params(&CopulaParams::new(0.5, 0.5, 0.5, 5.0));
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("a + b < 1"));
    }

    #[test]
    fn garch_validation() {
        assert!(validate_garch_params(&GarchParams::new(0.1, 0.05, 0.9, 6.0)).is_empty());
        let v = validate_garch_params(&GarchParams::new(0.0, 0.05, 0.9, 6.0));
        assert!(v.len() == 1 && v[0].contains("omega > 0"));
        let v = validate_garch_params(&GarchParams::new(0.1, 0.3, 0.8, 6.0));
        assert!(v.len() == 1 && v[0].contains("alpha + beta < 1"));
    }

    #[test]
    fn cycles_rejected() {
        assert!(Dag::from_edges(2, &[(0, 1), (1, 0)]).is_err());
        assert!(Dag::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(Dag::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).is_ok());
    }

    #[test]
    fn order_is_topological_and_relabel_idempotent() {
        let d = Dag::from_edges(4, &[(3, 0), (2, 3), (1, 0)]).unwrap();
        assert!(d.is_topological(d.order()));
        assert_eq!(d.order(), &[1, 2, 3, 0]);
        let r = d.relabeled();
        assert_eq!(r.order(), &[0, 1, 2, 3]);
        assert_eq!(r.relabeled(), r);
    }

    #[test]
    fn dag_serde_round_trip() {
        let d = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: Dag = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
        assert_eq!(Dag::from_bits(3, &d.adjacency_bits()).unwrap(), d);
    }
}
