//! Pair-copula lattice over the DAG and the stock levels.
//!
//! The lattice is evaluated copula by copula over the whole sample. Each
//! copula only reads conditional CDFs produced by copulas earlier in the
//! plan, so this is the same computation as a day-by-day forward pass.

use serde::{Deserialize, Serialize};

use crate::data::{CopulaParams, Dag, FittedModel, GarchParams, ReturnPanel};
use crate::error::{Error, Result};
use crate::garch::{garch_loglik, pit_series};
use crate::tcopula::copula_series;

/// Location of a conditional CDF series: `F(node | first len parents of node)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainRef {
    pub node: usize,
    pub len: usize,
}

/// One DAG copula `c_{child, parent | given}` and where its arguments come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub child: usize,
    pub parent: usize,
    pub given: Vec<usize>,
    /// 1-based parent position `k`.
    pub k: usize,
    /// Source of the second argument `F(parent | given ∩ pa(parent))`.
    pub src: ChainRef,
}

impl Slot {
    pub fn u1(&self) -> ChainRef {
        ChainRef { node: self.child, len: self.k - 1 }
    }

    pub fn out(&self) -> ChainRef {
        ChainRef { node: self.child, len: self.k }
    }
}

/// Outcome of looking up the second argument of copula `(i, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrefixCheck {
    /// `pa(i[k]) ∩ {i[1..k−1]}` is the first `len` parents of `i[k]`.
    Cumulative(usize),
    /// The intersection is not a prefix of `i[k]`'s parents.
    NotCumulative { intersection: Vec<usize> },
}

pub fn prefix_check(dag: &Dag, i: usize, k: usize) -> PrefixCheck {
    let pa = dag.parents(i);
    let target = pa[k - 1];
    let earlier = &pa[..k - 1];
    let pa_t = dag.parents(target);
    let inter: Vec<usize> = pa_t.iter().copied().filter(|x| earlier.contains(x)).collect();
    if pa_t[..inter.len()] == inter[..] {
        PrefixCheck::Cumulative(inter.len())
    } else {
        PrefixCheck::NotCumulative { intersection: inter }
    }
}

/// All DAG copulas in evaluation order (children by topological position, then `k`).
pub fn copula_slots(dag: &Dag) -> Result<Vec<Slot>> {
    let mut slots = Vec::new();
    for &i in dag.order() {
        let pa = dag.parents(i);
        for k in 1..=pa.len() {
            let len = match prefix_check(dag, i, k) {
                PrefixCheck::Cumulative(l) => l,
                PrefixCheck::NotCumulative { .. } => {
                    return Err(Error::Structural(format!(
                        "F({} | {:?}) is not reachable by h-recursion",
                        pa[k - 1],
                        &pa[..k - 1]
                    )))
                }
            };
            slots.push(Slot {
                child: i,
                parent: pa[k - 1],
                given: pa[..k - 1].to_vec(),
                k,
                src: ChainRef { node: pa[k - 1], len },
            });
        }
    }
    Ok(slots)
}

/// PIT series of every panel column under its marginal.
pub fn marginal_pits(panel: &ReturnPanel, marginals: &[GarchParams]) -> Result<Vec<Vec<f64>>> {
    if marginals.len() != panel.n_series() {
        return Err(Error::InvalidInput("one marginal per panel column required".into()));
    }
    (0..panel.n_series()).map(|j| pit_series(&marginals[j], panel.column(j))).collect()
}

/// Conditional-CDF lattice of the DAG for one sample.
#[derive(Debug, Clone)]
pub struct DagLattice {
    slots: Vec<Slot>,
    params: Vec<CopulaParams>,
    /// `chains[node][len]` is `F(node | first len parents)`; `len = 0` is the marginal PIT.
    chains: Vec<Vec<Vec<f64>>>,
    slot_ll: Vec<f64>,
    m_sc: usize,
    dependents: Vec<Vec<usize>>,
}

/// Slot outputs computed for a candidate parameter value.
#[derive(Debug, Clone)]
pub struct LatticeProposal {
    pub updates: Vec<(usize, f64, Vec<f64>)>,
    pub params: (usize, CopulaParams),
    pub delta: f64,
}

impl DagLattice {
    /// `factor_pits[i]` is the PIT series of risk factor `i`.
    pub fn build(dag: &Dag, factor_pits: &[Vec<f64>], theta2: &[CopulaParams], m_sc: usize) -> Result<Self> {
        let n = copula_slots(dag)?.len();
        if n != theta2.len() {
            return Err(Error::InvalidParams(format!("{} parameter sets for {n} copulas", theta2.len())));
        }
        Self::build_with(dag, factor_pits, m_sc, |s, _, _, _| Ok(theta2[s]))
    }

    /// Builds the lattice slot by slot, asking `choose(index, slot, u1, u2)` for each
    /// copula's parameters once its arguments are known.
    pub fn build_with<F>(dag: &Dag, factor_pits: &[Vec<f64>], m_sc: usize, mut choose: F) -> Result<Self>
    where
        F: FnMut(usize, &Slot, &[f64], &[f64]) -> Result<CopulaParams>,
    {
        let slots = copula_slots(dag)?;
        if factor_pits.len() != dag.m() {
            return Err(Error::InvalidInput("one PIT series per node required".into()));
        }
        let mut chains: Vec<Vec<Vec<f64>>> = factor_pits.iter().map(|u| vec![u.clone()]).collect();
        let mut slot_ll = Vec::with_capacity(slots.len());
        let mut params = Vec::with_capacity(slots.len());
        for (q, s) in slots.iter().enumerate() {
            let mut h = Vec::new();
            let ll = {
                let u1 = &chains[s.child][s.k - 1];
                let u2 = &chains[s.src.node][s.src.len];
                let p = choose(q, s, u1, u2)?;
                params.push(p);
                copula_series(u1, u2, &p, m_sc, Some(&mut h))
            };
            chains[s.child].push(h);
            slot_ll.push(ll);
        }
        let dependents = dependents(&slots);
        Ok(Self { slots, params, chains, slot_ll, m_sc, dependents })
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn params(&self) -> &[CopulaParams] {
        &self.params
    }

    pub fn loglik(&self) -> f64 {
        self.slot_ll.iter().sum()
    }

    pub fn slot_loglik(&self) -> &[f64] {
        &self.slot_ll
    }

    pub fn chain(&self, r: ChainRef) -> &[f64] {
        &self.chains[r.node][r.len]
    }

    /// `F(node | all parents of node)`.
    pub fn top(&self, node: usize) -> &[f64] {
        self.chains[node].last().expect("chain holds the marginal")
    }

    /// Argument series `(u1, u2)` feeding slot `s`.
    pub fn slot_inputs(&self, s: usize) -> (&[f64], &[f64]) {
        let sl = &self.slots[s];
        (self.chain(sl.u1()), self.chain(sl.src))
    }

    /// Recomputes slot `s` under `p` plus every slot downstream of it.
    pub fn propose(&self, s: usize, p: CopulaParams) -> LatticeProposal {
        let mut affected = vec![false; self.slots.len()];
        affected[s] = true;
        for q in s..self.slots.len() {
            if affected[q] {
                for &d in &self.dependents[q] {
                    affected[d] = true;
                }
            }
        }
        let mut updates: Vec<(usize, f64, Vec<f64>)> = Vec::new();
        let mut delta = 0.0;
        for q in s..self.slots.len() {
            if !affected[q] {
                continue;
            }
            let sl = &self.slots[q];
            let lookup = |r: ChainRef| -> &[f64] {
                updates
                    .iter()
                    .find(|(u, _, _)| self.slots[*u].out() == r)
                    .map(|(_, _, h)| h.as_slice())
                    .unwrap_or_else(|| self.chain(r))
            };
            let u1 = lookup(sl.u1());
            let u2 = lookup(sl.src);
            let par = if q == s { p } else { self.params[q] };
            let mut h = Vec::new();
            let ll = copula_series(u1, u2, &par, self.m_sc, Some(&mut h));
            delta += ll - self.slot_ll[q];
            updates.push((q, ll, h));
        }
        LatticeProposal { updates, params: (s, p), delta }
    }

    pub fn commit(&mut self, prop: LatticeProposal) {
        let (s, p) = prop.params;
        self.params[s] = p;
        for (q, ll, h) in prop.updates {
            self.slot_ll[q] = ll;
            let out = self.slots[q].out();
            self.chains[out.node][out.len] = h;
        }
    }
}

fn dependents(slots: &[Slot]) -> Vec<Vec<usize>> {
    slots
        .iter()
        .map(|s| {
            let out = s.out();
            slots.iter().enumerate().filter(|(_, d)| d.u1() == out || d.src == out).map(|(q, _)| q).collect()
        })
        .collect()
}

/// `ℓ₂` and the lattice it was computed on.
pub fn dag_loglik(
    panel: &ReturnPanel,
    marginals: &[GarchParams],
    dag: &Dag,
    theta2: &[CopulaParams],
    m_sc: usize,
) -> Result<(f64, DagLattice)> {
    let pits: Vec<Vec<f64>> =
        (0..panel.m).map(|i| pit_series(&marginals[i], panel.column(i))).collect::<Result<_>>()?;
    let lat = DagLattice::build(dag, &pits, theta2, m_sc)?;
    Ok((lat.loglik(), lat))
}

/// Stock level log-likelihoods and the stock's conditional-CDF chain.
///
/// Level `q` couples `F(j | first q factors)` with `F(order[q] | its parents)`.
pub fn stock_chain(
    stock_pit: &[f64],
    lattice: &DagLattice,
    dag: &Dag,
    theta3: &[CopulaParams],
    m_sc: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut chain = vec![stock_pit.to_vec()];
    let mut lls = Vec::with_capacity(theta3.len());
    for (q, &node) in dag.order().iter().enumerate() {
        let mut h = Vec::new();
        let ll = copula_series(&chain[q], lattice.top(node), &theta3[q], m_sc, Some(&mut h));
        lls.push(ll);
        chain.push(h);
    }
    (lls, chain)
}

/// `ℓ₃ⱼ` for the stock whose PIT series is `stock_pit`.
pub fn stock_loglik(
    stock_pit: &[f64],
    lattice: &DagLattice,
    dag: &Dag,
    theta3: &[CopulaParams],
    m_sc: usize,
) -> Result<f64> {
    if theta3.len() != dag.m() {
        return Err(Error::InvalidParams(format!("{} stock copulas for m = {}", theta3.len(), dag.m())));
    }
    Ok(stock_chain(stock_pit, lattice, dag, theta3, m_sc).0.iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikBreakdown {
    pub marginal: Vec<f64>,
    pub dag: f64,
    pub stocks: Vec<f64>,
    pub total: f64,
}

pub fn full_loglik(panel: &ReturnPanel, model: &FittedModel) -> Result<LoglikBreakdown> {
    model.validate()?;
    if panel.m != model.m() || panel.p != model.p() {
        return Err(Error::InvalidInput("panel shape does not match model".into()));
    }
    let marginal: Vec<f64> =
        (0..panel.n_series()).map(|j| garch_loglik(&model.marginals[j], panel.column(j))).collect::<Result<_>>()?;
    let (dag_ll, lat) = dag_loglik(panel, &model.marginals, &model.dag, &model.theta2(), model.m_sc)?;
    let stocks: Vec<f64> = (0..panel.p)
        .map(|j| {
            let pit = pit_series(&model.marginals[panel.m + j], panel.column(panel.m + j))?;
            stock_loglik(&pit, &lat, &model.dag, &model.stock_copulas[j], model.m_sc)
        })
        .collect::<Result<_>>()?;
    let total = marginal.iter().sum::<f64>() + dag_ll + stocks.iter().sum::<f64>();
    Ok(LoglikBreakdown { marginal, dag: dag_ll, stocks, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcopula::tcopula_density;

    fn fig1a() -> Dag {
        Dag::from_edges(4, &[(0, 2), (0, 3), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn fig1a_copula_set() {
        let slots = copula_slots(&fig1a()).unwrap();
        let names: Vec<(usize, usize, Vec<usize>)> =
            slots.iter().map(|s| (s.child, s.parent, s.given.clone())).collect();
        assert_eq!(names, vec![(2, 0, vec![]), (3, 0, vec![]), (3, 1, vec![0]), (3, 2, vec![0, 1])]);
    }

    #[test]
    fn empty_dag_has_zero_loglik() {
        let pits = vec![vec![0.3, 0.6, 0.9]; 3];
        let lat = DagLattice::build(&Dag::empty(3), &pits, &[], 2).unwrap();
        assert_eq!(lat.loglik(), 0.0);
    }

    #[test]
    fn static_pair_matches_loop() {
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let u0 = [0.1, 0.4, 0.75, 0.9, 0.33];
        let u1 = [0.2, 0.35, 0.8, 0.6, 0.5];
        let p = CopulaParams::fixed(0.45, 5.0);
        let lat = DagLattice::build(&dag, &[u0.to_vec(), u1.to_vec()], &[p], 2).unwrap();
        let direct: f64 = (0..5).map(|t| tcopula_density(u1[t], u0[t], 5.0, 0.45).unwrap().ln()).sum();
        assert!((lat.loglik() - direct).abs() < 1e-10);
    }

    #[test]
    fn fig2_is_unreachable() {
        let d = Dag::from_edges(5, &[(0, 4), (1, 3), (2, 3), (2, 4), (3, 4)]).unwrap();
        assert!(matches!(copula_slots(&d), Err(Error::Structural(_))));
    }

    #[test]
    fn proposal_matches_rebuild() {
        let dag = Dag::from_edges(4, &[(0, 1), (0, 2), (1, 2), (2, 3)]).unwrap();
        let pits: Vec<Vec<f64>> =
            (0..4).map(|i| (0..60).map(|t| ((t * 7 + i * 13) % 59) as f64 / 60.0 + 0.005).collect()).collect();
        let theta: Vec<CopulaParams> = (0..4).map(|k| CopulaParams::new(0.1 * k as f64, 0.05, 0.9, 6.0)).collect();
        let mut lat = DagLattice::build(&dag, &pits, &theta, 2).unwrap();
        let newp = CopulaParams::new(-0.3, 0.1, 0.7, 4.0);
        let prop = lat.propose(0, newp);
        let before = lat.loglik();
        let delta = prop.delta;
        lat.commit(prop);
        let mut theta2 = theta.clone();
        theta2[0] = newp;
        let fresh = DagLattice::build(&dag, &pits, &theta2, 2).unwrap();
        assert!((lat.loglik() - fresh.loglik()).abs() < 1e-9);
        assert!((before + delta - fresh.loglik()).abs() < 1e-9);
        assert_eq!(lat.top(3), fresh.top(3));
    }
}
