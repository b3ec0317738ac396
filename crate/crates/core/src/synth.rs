//! Synthetic models for simulation studies.

use rand::Rng;

use crate::data::{CopulaParams, Dag, DagCopula, FittedModel, GarchParams};
use crate::error::{Error, Result};
use crate::exec::{stream_id, stream_rng};
use crate::pcc::copula_slots;

/// Edges of the eight-factor design, 0-based.
pub const S1_EDGES: [(usize, usize); 8] = [(0, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (2, 6), (4, 7)];

/// `(child, parent, given, φ̄, a, b, v)`, 0-based.
pub type CopulaRow = (usize, usize, &'static [usize], f64, f64, f64, f64);

/// True DAG copulas of the eight-factor design.
pub const S1_COPULAS: [CopulaRow; 8] = [
    (1, 0, &[], -0.1, 0.04, 0.89, 5.29),
    (2, 1, &[], 0.4, 0.04, 0.91, 5.22),
    (3, 1, &[], 0.76, 0.04, 0.88, 7.26),
    (4, 1, &[], 0.59, 0.05, 0.84, 9.71),
    (5, 1, &[], 0.34, 0.02, 0.96, 5.18),
    (6, 1, &[], 0.27, 0.06, 0.81, 7.07),
    (6, 2, &[1], 0.41, 0.09, 0.86, 6.59),
    (7, 4, &[], -0.49, 0.12, 0.80, 7.27),
];

pub fn s1_dag() -> Dag {
    Dag::from_edges(8, &S1_EDGES).expect("S1 graph is acyclic")
}

pub fn draw_garch<R: Rng>(rng: &mut R) -> GarchParams {
    let omega = rng.random_range(0.01..0.2);
    let beta = rng.random_range(0.8..0.96);
    let alpha = (1.0 - beta) * rng.random_range(0.3..0.7);
    GarchParams::new(omega, alpha, beta, rng.random_range(5.0..10.0))
}

pub fn draw_copula<R: Rng>(rng: &mut R) -> CopulaParams {
    let b = rng.random_range(0.8..0.96);
    let a = (1.0 - b) * rng.random_range(0.3..0.7);
    CopulaParams::new(rng.random_range(-1.0..1.0), a, b, rng.random_range(5.0..10.0))
}

/// Assembles a model, pairing `dag_params` with the lattice slots in order.
pub fn build_model(
    dag: Dag,
    dag_params: &[CopulaParams],
    marginals: Vec<GarchParams>,
    stock_copulas: Vec<Vec<CopulaParams>>,
    m_sc: usize,
) -> Result<FittedModel> {
    let slots = copula_slots(&dag)?;
    if slots.len() != dag_params.len() {
        return Err(Error::InvalidParams(format!(
            "{} copula parameter sets for {} slots",
            dag_params.len(),
            slots.len()
        )));
    }
    let dag_copulas = slots
        .iter()
        .zip(dag_params)
        .map(|(s, p)| DagCopula { child: s.child, parent: s.parent, given: s.given.clone(), params: *p })
        .collect();
    let model = FittedModel { marginals, dag, dag_copulas, stock_copulas, m_sc };
    model.validate()?;
    Ok(model)
}

/// Model on `dag` with every parameter drawn at random.
pub fn random_model(dag: Dag, p: usize, seed: u64, m_sc: usize) -> Result<FittedModel> {
    let mut rng = stream_rng(seed, stream_id(3, 0, 0));
    let n = copula_slots(&dag)?.len();
    let m = dag.m();
    let dag_params: Vec<_> = (0..n).map(|_| draw_copula(&mut rng)).collect();
    let marginals = (0..m + p).map(|_| draw_garch(&mut rng)).collect();
    let stocks = (0..p).map(|_| (0..m).map(|_| draw_copula(&mut rng)).collect()).collect();
    build_model(dag, &dag_params, marginals, stocks, m_sc)
}

/// Eight-factor design: fixed DAG copulas, random marginals and stock copulas.
pub fn s1_model(p: usize, seed: u64, m_sc: usize) -> Result<FittedModel> {
    let dag = s1_dag();
    let slots = copula_slots(&dag)?;
    let mut params = Vec::with_capacity(slots.len());
    for s in &slots {
        let c = S1_COPULAS
            .iter()
            .find(|c| c.0 == s.child && c.1 == s.parent && c.2 == s.given.as_slice())
            .ok_or_else(|| Error::Structural(format!("no true copula for slot {s:?}")))?;
        params.push(CopulaParams::new(c.3, c.4, c.5, c.6));
    }
    let mut rng = stream_rng(seed, stream_id(3, 0, 0));
    let marginals = (0..8 + p).map(|_| draw_garch(&mut rng)).collect();
    let stocks = (0..p).map(|_| (0..8).map(|_| draw_copula(&mut rng)).collect()).collect();
    build_model(dag, &params, marginals, stocks, m_sc)
}
