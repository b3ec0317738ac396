//! Structure learning over the reduced DAG space.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CopulaParams, Dag};
use crate::error::{Error, Result};
use crate::estimation::{sequential_fit_copula, CopulaFit};
use crate::exec::stream_rng;
use crate::pcc::copula_slots;
use crate::tcopula::copula_series;

/// Result of the cumulative-parent recursion for one conditional CDF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CumulativeTest {
    Pass,
    /// `F(node | given)` needs numerical integration.
    Fail {
        node: usize,
        given: Vec<usize>,
    },
}

/// Recursion for the second argument of copula `(i, k)`, `k` 1-based.
pub fn cumulative_parent_test(dag: &Dag, i: usize, k: usize) -> CumulativeTest {
    let mut pi: Vec<usize> = dag.parents(i)[..k].to_vec();
    loop {
        let (&plus, minus) = pi.split_last().expect("pi is never empty");
        let pa = dag.parents(plus);
        let tilde: Vec<usize> = pa.iter().copied().filter(|x| minus.contains(x)).collect();
        if tilde.is_empty() {
            return CumulativeTest::Pass;
        }
        if pa[..tilde.len()] != tilde[..] {
            return CumulativeTest::Fail { node: plus, given: minus.to_vec() };
        }
        pi = tilde;
    }
}

/// First failing `(child, k, outcome)` in lattice order, if any.
pub fn first_failure(dag: &Dag) -> Option<(usize, usize, CumulativeTest)> {
    for &i in dag.order() {
        for k in 1..=dag.parents(i).len() {
            let t = cumulative_parent_test(dag, i, k);
            if t != CumulativeTest::Pass {
                return Some((i, k, t));
            }
        }
    }
    None
}

pub fn in_reduced_space(dag: &Dag) -> bool {
    first_failure(dag).is_none()
}

/// Single-edge additions and deletions that stay acyclic and in the reduced space.
pub fn neighborhood(dag: &Dag) -> Vec<Dag> {
    let m = dag.m();
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let g = if dag.has_edge(i, j) {
                dag.without_edge(i, j)
            } else {
                match dag.with_edge(i, j) {
                    Ok(g) => g,
                    Err(_) => continue,
                }
            };
            if in_reduced_space(&g) {
                out.push(g);
            }
        }
    }
    out
}

pub fn graph_distance(a: &Dag, b: &Dag) -> Result<usize> {
    if a.m() != b.m() {
        return Err(Error::InvalidInput(format!("graphs on {} and {} nodes", a.m(), b.m())));
    }
    let m = a.m();
    Ok((0..m).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|&(i, j)| a.has_edge(i, j) != b.has_edge(i, j)).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredGraph {
    pub dag: Dag,
    pub bic: f64,
    pub loglik: f64,
    pub theta2_tilde: Vec<CopulaParams>,
}

#[derive(Debug, Clone)]
struct CachedSlot {
    fit: CopulaFit,
    out: usize,
}

/// Approximate BIC of DAGs on fixed factor PITs.
///
/// A copula's fit depends only on its two input series, so each input series
/// gets an id (marginal PITs are `0..m`, every h-output a fresh id) and fits
/// are cached under the pair of input ids.
#[derive(Debug, Clone)]
pub struct BicScorer {
    series: Vec<Vec<f64>>,
    slots: HashMap<(usize, usize), CachedSlot>,
    m_sc: usize,
    m: usize,
    t: usize,
    pub fits_computed: usize,
}

impl BicScorer {
    pub fn new(factor_pits: Vec<Vec<f64>>, m_sc: usize) -> Result<Self> {
        let t = factor_pits.first().map_or(0, Vec::len);
        if factor_pits.iter().any(|c| c.len() != t) {
            return Err(Error::InvalidInput("PIT series lengths differ".into()));
        }
        Ok(Self { m: factor_pits.len(), series: factor_pits, slots: HashMap::new(), m_sc, t, fits_computed: 0 })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_obs(&self) -> usize {
        self.t
    }

    pub fn cache_len(&self) -> usize {
        self.slots.len()
    }

    /// Per-slot log-likelihoods at the sequential estimates, in lattice order.
    pub fn slot_fits(&mut self, dag: &Dag) -> Result<Vec<CopulaFit>> {
        if dag.m() != self.m {
            return Err(Error::InvalidInput(format!("graph on {} nodes, {} factors", dag.m(), self.m)));
        }
        let slots = copula_slots(dag)?;
        let mut ids: HashMap<(usize, usize), usize> = (0..dag.m()).map(|j| ((j, 0), j)).collect();
        let mut fits = Vec::with_capacity(slots.len());
        for s in &slots {
            let a = ids[&(s.child, s.k - 1)];
            let b = ids[&(s.src.node, s.src.len)];
            let entry = match self.slots.get(&(a, b)) {
                Some(e) => e.clone(),
                None => {
                    let fit = sequential_fit_copula(&self.series[a], &self.series[b], None, self.m_sc)?;
                    let mut h = Vec::with_capacity(self.t);
                    copula_series(&self.series[a], &self.series[b], &fit.params, self.m_sc, Some(&mut h));
                    self.series.push(h);
                    self.fits_computed += 1;
                    let e = CachedSlot { fit, out: self.series.len() - 1 };
                    self.slots.insert((a, b), e.clone());
                    e
                }
            };
            ids.insert((s.child, s.k), entry.out);
            fits.push(entry.fit);
        }
        Ok(fits)
    }

    /// `ℓ₂(Θ̃₂) − (|Θ₂|/2)·ln T` with four parameters per copula.
    pub fn score(&mut self, dag: &Dag) -> Result<ScoredGraph> {
        let fits = self.slot_fits(dag)?;
        let loglik: f64 = fits.iter().map(|f| f.loglik).sum();
        let bic = loglik - 2.0 * fits.len() as f64 * (self.t as f64).ln();
        Ok(ScoredGraph { dag: dag.clone(), bic, loglik, theta2_tilde: fits.iter().map(|f| f.params).collect() })
    }
}

/// Per-node sums of slot log-likelihoods.
pub fn node_contributions(dag: &Dag, fits: &[CopulaFit]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dag.m()];
    for (s, f) in copula_slots(dag)?.iter().zip(fits) {
        out[s.child] += f.loglik;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureChain {
    pub graphs: Vec<Dag>,
    pub scores: Vec<f64>,
    pub accepted: Vec<bool>,
    pub burn_in: usize,
}

impl StructureChain {
    pub fn post_burn(&self) -> &[Dag] {
        &self.graphs[self.burn_in..]
    }

    /// Distinct graphs by decreasing score.
    pub fn top_graphs(&self, n: usize) -> Vec<(Dag, f64)> {
        let mut seen: HashMap<String, (Dag, f64)> = HashMap::new();
        for (g, s) in self.graphs.iter().zip(&self.scores) {
            seen.entry(g.adjacency_bits()).or_insert_with(|| (g.clone(), *s));
        }
        let mut v: Vec<(Dag, f64)> = seen.into_values().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.adjacency_bits().cmp(&b.0.adjacency_bits())));
        v.truncate(n);
        v
    }
}

/// Metropolis–Hastings over graphs with uniform single-edge proposals. The
/// burn-in minimizes the Geweke statistic of the score trace, or is 0 when
/// that is undefined.
pub fn structure_mcmc_with<F>(init: &Dag, n_iter: usize, seed: u64, mut score: F) -> Result<StructureChain>
where
    F: FnMut(&Dag) -> Result<f64>,
{
    if !in_reduced_space(init) {
        return Err(Error::Structural("initial graph is outside the reduced space".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut g = init.clone();
    let mut s = score(&g)?;
    let mut nbd = neighborhood(&g);
    let mut chain = StructureChain {
        graphs: Vec::with_capacity(n_iter),
        scores: Vec::with_capacity(n_iter),
        accepted: Vec::with_capacity(n_iter),
        burn_in: 0,
    };
    for _ in 0..n_iter {
        let mut acc = false;
        if !nbd.is_empty() {
            let cand = nbd[rng.random_range(0..nbd.len())].clone();
            let s_new = score(&cand)?;
            let nbd_new = neighborhood(&cand);
            let log_ratio = s_new - s + (nbd.len() as f64).ln() - (nbd_new.len() as f64).ln();
            if rng.random::<f64>().ln() < log_ratio {
                g = cand;
                s = s_new;
                nbd = nbd_new;
                acc = true;
            }
        }
        chain.graphs.push(g.clone());
        chain.scores.push(s);
        chain.accepted.push(acc);
    }
    chain.burn_in = crate::estimation::geweke_burnin(&chain.scores).map_or(0, |g| g.burn_in);
    Ok(chain)
}

/// Structure MCMC scored by the approximate BIC.
pub fn structure_mcmc(scorer: &mut BicScorer, init: &Dag, n_iter: usize, seed: u64) -> Result<StructureChain> {
    structure_mcmc_with(init, n_iter, seed, |g| scorer.score(g).map(|s| s.bic))
}

/// Burn-in and Geweke p-value of a graph chain, via its distance to `reference`.
pub fn structure_geweke(chain: &StructureChain, reference: &Dag) -> Result<crate::estimation::Geweke> {
    let d: Vec<f64> =
        chain.graphs.iter().map(|g| graph_distance(g, reference).map(|x| x as f64)).collect::<Result<_>>()?;
    crate::estimation::geweke_burnin(&d)
}

pub fn edge_features(samples: &[Dag]) -> Result<Vec<Vec<f64>>> {
    let first = samples.first().ok_or_else(|| Error::InvalidInput("no sampled graphs".into()))?;
    let m = first.m();
    let mut p = vec![vec![0.0; m]; m];
    for g in samples {
        if g.m() != m {
            return Err(Error::InvalidInput("sampled graphs differ in size".into()));
        }
        for (i, j) in g.edges() {
            p[i][j] += 1.0;
        }
    }
    let n = samples.len() as f64;
    p.iter_mut().flatten().for_each(|x| *x /= n);
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeMark {
    None,
    Directed,
    Bidirected,
}

/// Completed PDAG; `mark(i, j) == Directed` means `i → j` is compelled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cpdag {
    m: usize,
    marks: Vec<EdgeMark>,
}

impl Cpdag {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mark(&self, i: usize, j: usize) -> EdgeMark {
        self.marks[i * self.m + j]
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) != EdgeMark::None || self.mark(j, i) != EdgeMark::None
    }
}

pub fn cpdag(dag: &Dag) -> Cpdag {
    let m = dag.m();
    let adj = |i: usize, j: usize| dag.has_edge(i, j) || dag.has_edge(j, i);
    // directed[i][j]: i → j compelled so far; undirected otherwise
    let mut dir = vec![false; m * m];
    for c in 0..m {
        let pa = dag.parents(c);
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !adj(a, b) {
                    dir[a * m + c] = true;
                    dir[b * m + c] = true;
                }
            }
        }
    }
    let und = |dir: &[bool], i: usize, j: usize| adj(i, j) && !dir[i * m + j] && !dir[j * m + i];
    loop {
        let mut changed = false;
        for a in 0..m {
            for b in 0..m {
                if !und(&dir, a, b) {
                    continue;
                }
                // R1: c → a − b, c and b nonadjacent
                let r1 = (0..m).any(|c| c != b && dir[c * m + a] && !adj(c, b));
                // R2: a → c → b
                let r2 = (0..m).any(|c| dir[a * m + c] && dir[c * m + b]);
                // R3: a − c → b, a − d → b, c and d nonadjacent
                let r3 = (0..m).any(|c| {
                    und(&dir, a, c)
                        && dir[c * m + b]
                        && (c + 1..m).any(|d| und(&dir, a, d) && dir[d * m + b] && !adj(c, d))
                });
                if r1 || r2 || r3 {
                    dir[a * m + b] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut marks = vec![EdgeMark::None; m * m];
    for i in 0..m {
        for j in 0..m {
            if dir[i * m + j] {
                marks[i * m + j] = EdgeMark::Directed;
            } else if und(&dir, i, j) {
                marks[i * m + j] = EdgeMark::Bidirected;
            }
        }
    }
    Cpdag { m, marks }
}

/// Scored units: an undirected truth edge `{i, j}` is one unit scored
/// `P_ij + P_ji`; every other ordered pair is a unit scored `P_ij`.
pub fn scored_units(features: &[Vec<f64>], truth: &Cpdag) -> Result<Vec<(f64, bool)>> {
    let m = truth.m();
    if features.len() != m || features.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput("feature matrix does not match the CPDAG size".into()));
    }
    let mut units = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            match truth.mark(i, j) {
                EdgeMark::Bidirected if i < j => units.push((features[i][j] + features[j][i], true)),
                EdgeMark::Bidirected => {}
                EdgeMark::Directed => units.push((features[i][j], true)),
                EdgeMark::None => {
                    if truth.mark(j, i) != EdgeMark::Bidirected {
                        units.push((features[i][j], false));
                    }
                }
            }
        }
    }
    Ok(units)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

impl Confusion {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self { threshold: f64::NAN, tp, fp, fn_, tn }
    }

    pub fn acc(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    pub fn fdr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tp)
    }

    pub fn for_(&self) -> Option<f64> {
        ratio(self.fn_, self.fn_ + self.tn)
    }

    pub fn sen(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn spe(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }
}

fn confusion(units: &[(f64, bool)], c: f64) -> Confusion {
    let mut k = Confusion { threshold: c, tp: 0, fp: 0, fn_: 0, tn: 0 };
    for &(s, pos) in units {
        match (s > c, pos) {
            (true, true) => k.tp += 1,
            (true, false) => k.fp += 1,
            (false, true) => k.fn_ += 1,
            (false, false) => k.tn += 1,
        }
    }
    k
}

/// Confusion counts at each threshold; an edge is predicted when its score exceeds the threshold.
pub fn classification_metrics(features: &[Vec<f64>], truth: &Cpdag, thresholds: &[f64]) -> Result<Vec<Confusion>> {
    let units = scored_units(features, truth)?;
    Ok(thresholds.iter().map(|&c| confusion(&units, c)).collect())
}

/// Trapezoidal area under the ROC curve over every distinct threshold.
pub fn auroc(features: &[Vec<f64>], truth: &Cpdag) -> Result<f64> {
    let units = scored_units(features, truth)?;
    let n_pos = units.iter().filter(|u| u.1).count();
    let n_neg = units.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("AUROC needs both edges and non-edges".into()));
    }
    let mut cuts: Vec<f64> = units.iter().map(|u| u.0).collect();
    cuts.push(f64::NEG_INFINITY);
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for c in cuts {
        let k = confusion(&units, c);
        pts.push((k.fp as f64 / n_neg as f64, k.tp as f64 / n_pos as f64));
    }
    Ok(pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum())
}
