use std::collections::HashMap;

use gcgarch::data::Dag;
use gcgarch::pcc::marginal_pits;
use gcgarch::simulate::simulate_panel;
use gcgarch::structure::*;
use gcgarch::synth::random_model;

fn all_dags(m: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let e: Vec<_> = pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &p)| p).collect();
        if let Ok(g) = Dag::from_edges(m, &e) {
            out.push(g);
        }
    }
    out
}

#[test]
fn detailed_balance_on_three_nodes() {
    let dags = all_dags(3);
    assert_eq!(dags.len(), 25);
    let table: HashMap<String, f64> =
        dags.iter().enumerate().map(|(k, g)| (g.adjacency_bits(), ((k * 7919) % 13) as f64 / 10.0)).collect();
    let z: f64 = table.values().map(|s| s.exp()).sum();
    let chain = structure_mcmc_with(&Dag::empty(3), 1_000_000, 17, |g| Ok(table[&g.adjacency_bits()])).unwrap();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for g in &chain.graphs {
        *counts.entry(g.adjacency_bits()).or_default() += 1;
    }
    for (bits, s) in &table {
        let want = s.exp() / z;
        let got = counts.get(bits).copied().unwrap_or(0) as f64 / 1e6;
        assert!((got / want - 1.0).abs() < 0.05, "{bits}: {got} vs {want}");
    }
}

fn pits_for(dag: &Dag, t: usize, seed: u64) -> Vec<Vec<f64>> {
    let model = random_model(dag.clone(), 0, seed, 2).unwrap();
    let panel = simulate_panel(&model, t, seed).unwrap();
    marginal_pits(&panel, &model.marginals).unwrap()
}

#[test]
fn empty_graph_scores_zero() {
    let pits = pits_for(&Dag::from_edges(3, &[(0, 1)]).unwrap(), 200, 1);
    let mut sc = BicScorer::new(pits, 2).unwrap();
    let s = sc.score(&Dag::empty(3)).unwrap();
    assert_eq!(s.bic, 0.0);
    assert!(s.theta2_tilde.is_empty());
}

#[test]
fn spurious_edge_lowers_score() {
    let truth = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let extra = truth.with_edge(0, 2).unwrap();
    let mut lower = 0;
    for seed in 0..20 {
        let mut sc = BicScorer::new(pits_for(&truth, 1000, 100 + seed), 2).unwrap();
        if sc.score(&extra).unwrap().bic < sc.score(&truth).unwrap().bic {
            lower += 1;
        }
    }
    assert!(lower >= 16, "{lower}/20");
}

#[test]
fn cache_is_exact_and_decomposes() {
    let truth = Dag::from_edges(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
    let pits = pits_for(&truth, 300, 5);
    let mut sc = BicScorer::new(pits.clone(), 2).unwrap();
    let a = sc.slot_fits(&truth).unwrap();
    let changed = truth.with_edge(2, 3).unwrap();
    let b = sc.slot_fits(&changed).unwrap();
    let ca = node_contributions(&truth, &a).unwrap();
    let cb = node_contributions(&changed, &b).unwrap();
    // node 3's parent set changed; nodes 0..2 are not its descendants
    for i in 0..3 {
        assert_eq!(ca[i].to_bits(), cb[i].to_bits());
    }
    let mut fresh = BicScorer::new(pits, 2).unwrap();
    assert_eq!(fresh.score(&changed).unwrap().bic.to_bits(), sc.score(&changed).unwrap().bic.to_bits());
}

#[test]
fn chain_stays_in_reduced_space() {
    let truth = Dag::from_edges(4, &[(0, 1), (1, 2), (1, 3)]).unwrap();
    let mut sc = BicScorer::new(pits_for(&truth, 200, 9), 2).unwrap();
    let chain = structure_mcmc(&mut sc, &Dag::empty(4), 30, 3).unwrap();
    assert_eq!(chain.graphs.len(), 30);
    assert!(chain.graphs.iter().all(in_reduced_space));
    let top = chain.top_graphs(3);
    assert!(top.windows(2).all(|w| w[0].1 >= w[1].1));
}
