use gcgarch::data::{CopulaParams, Dag, GarchParams};
use gcgarch::estimation::*;
use gcgarch::exec::{stream_rng, Exec};
use gcgarch::pcc::{marginal_pits, DagLattice};
use gcgarch::simulate::simulate_panel;
use gcgarch::synth::{build_model, s1_model};
use rand::Rng;
use rand_distr::StandardNormal;

fn pair_pits(p: CopulaParams, t: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
    let model = build_model(dag, &[p], vec![GarchParams::new(0.1, 0.05, 0.9, 8.0); 2], vec![], 2).unwrap();
    let panel = simulate_panel(&model, t, seed).unwrap();
    let mut pits = marginal_pits(&panel, &model.marginals).unwrap();
    let y = pits.pop().unwrap();
    let x = pits.pop().unwrap();
    // slot (child=1, parent=0): u1 is the child's series
    (y, x)
}

#[test]
fn pair_recovery() {
    let truth = CopulaParams::new(0.5, 0.05, 0.9, 6.0);
    let mut hits = 0;
    for seed in 0..20 {
        let (u1, u2) = pair_pits(truth, 2000, seed);
        let f = sequential_fit_copula(&u1, &u2, None, 2).unwrap();
        if (f.params.phi_bar - truth.phi_bar).abs() <= 0.06 {
            hits += 1;
        }
        // the optimizer must do at least as well as the generating parameters
        assert!(f.loglik >= gcgarch::tcopula::copula_series(&u1, &u2, &truth, 2, None) - 1e-6);
        let init = CopulaParams::new(0.1, 0.1, 0.5, 20.0);
        let g = sequential_fit_copula(&u1, &u2, Some(init), 2).unwrap();
        assert!(g.loglik >= gcgarch::tcopula::copula_series(&u1, &u2, &init, 2, None));
    }
    // about 77% of seeds land within 0.06 at T=2000 (100-seed run)
    assert!(hits >= 14, "{hits}/20");
}

#[test]
fn independent_uniforms_give_zero_phi() {
    let mut r = stream_rng(42, 0);
    let u1: Vec<f64> = (0..1000).map(|_| r.random_range(1e-9..1.0)).collect();
    let u2: Vec<f64> = (0..1000).map(|_| r.random_range(1e-9..1.0)).collect();
    let f = sequential_fit_copula(&u1, &u2, None, 2).unwrap();
    assert!(f.params.phi_bar.abs() < 0.1, "{:?}", f.params);
}

#[test]
fn chain_graph_fit_order_and_empty() {
    let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let model = gcgarch::synth::random_model(dag.clone(), 0, 3, 2).unwrap();
    let panel = simulate_panel(&model, 300, 1).unwrap();
    let pits = marginal_pits(&panel, &model.marginals).unwrap();
    let fit = fit_dag_sequential(&pits, &dag, 2).unwrap();
    let order: Vec<_> = fit.lattice.slots().iter().map(|s| (s.child, s.parent)).collect();
    assert_eq!(order, vec![(1, 0), (2, 1)]);
    let empty = fit_dag_sequential(&pits, &Dag::empty(3), 2).unwrap();
    assert!(empty.fits.is_empty());
}

#[test]
fn s1_sequential_mae() {
    let model = s1_model(0, 11, 2).unwrap();
    let panel = simulate_panel(&model, 1000, 11).unwrap();
    let pits = marginal_pits(&panel, &model.marginals).unwrap();
    let fit = fit_dag_sequential(&pits, &model.dag, 2).unwrap();
    let mae: f64 =
        fit.fits.iter().zip(model.theta2()).map(|(f, t)| (f.params.phi_bar - t.phi_bar).abs()).sum::<f64>() / 8.0;
    assert!(mae <= 0.10, "{mae}");
}

#[test]
fn ram_gaussian_acceptance() {
    let mut f = |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>();
    let chain = ram_mcmc(&mut f, &[0.0; 10], RamConfig::new(10, 50_000, 1)).unwrap();
    let rate = chain.acceptance_rate(25_000..50_000);
    assert!((0.184..=0.284).contains(&rate), "{rate}");
}

#[test]
fn ram_gaussian_mean() {
    let mu = [1.0, -2.0];
    let mut f = |x: &[f64]| -0.5 * ((x[0] - mu[0]).powi(2) + (x[1] - mu[1]).powi(2) / 4.0);
    let chain = ram_mcmc(&mut f, &[0.0, 0.0], RamConfig::new(2, 40_000, 2)).unwrap();
    let post = &chain.samples[4000..];
    for (i, sd) in [(0, 1.0), (1, 2.0)] {
        let xs: Vec<f64> = post.iter().map(|s| s[i]).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        // batch-means standard error
        let nb = 40;
        let bs = xs.len() / nb;
        let bm: Vec<f64> = (0..nb).map(|b| xs[b * bs..(b + 1) * bs].iter().sum::<f64>() / bs as f64).collect();
        let se = (bm.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nb - 1) as f64 / nb as f64).sqrt();
        assert!((m - mu[i]).abs() < 3.0 * se.max(0.01 * sd), "param {i}: {m} se {se}");
    }
}

#[test]
fn geweke_null_pvalues() {
    let mut ok = 0;
    for seed in 0..100 {
        let mut r = stream_rng(seed, 9);
        let x: Vec<f64> = (0..1000).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        if geweke_burnin(&x).unwrap().p_value > 0.01 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}");
}

#[test]
fn stocks_permutation_invariant() {
    let model = s1_model(3, 4, 2).unwrap();
    let panel = simulate_panel(&model, 400, 4).unwrap();
    let pits = marginal_pits(&panel, &model.marginals).unwrap();
    let lat = DagLattice::build(&model.dag, &pits[..8], &model.theta2(), 2).unwrap();
    let a = fit_stocks(&pits[8..], &lat, &model.dag, 2, Exec::Parallel).unwrap();
    let rev: Vec<Vec<f64>> = pits[8..].iter().rev().cloned().collect();
    let b = fit_stocks(&rev, &lat, &model.dag, 2, Exec::Sequential).unwrap();
    for j in 0..3 {
        assert_eq!(a[j], b[2 - j]);
    }
}

#[test]
fn dag_mcmc_respects_prior_and_starts_at_sequential() {
    let dag = Dag::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
    let model = gcgarch::synth::random_model(dag.clone(), 0, 8, 2).unwrap();
    let panel = simulate_panel(&model, 500, 8).unwrap();
    let pits = marginal_pits(&panel, &model.marginals).unwrap();
    let post = fit_dag_mcmc(&pits, &dag, 1500, 3, 2).unwrap();
    let init: Vec<f64> = post.sequential.iter().flat_map(|f| f.params.to_array()).collect();
    assert_eq!(post.chain.init, init);
    for (s, lp) in post.chain.samples.iter().zip(&post.chain.log_post) {
        assert!(lp.is_finite());
        for c in s.chunks(4) {
            let p = CopulaParams::from_slice(c);
            assert!(p.a + p.b < 1.0 && p.v > 2.0 && p.a >= 0.0 && p.b >= 0.0);
        }
    }
    assert!(post.chain.burn_in < post.chain.samples.len());
    // incremental evaluation agrees with a rebuild at the final draw
    let last: Vec<CopulaParams> = post.chain.samples.last().unwrap().chunks(4).map(CopulaParams::from_slice).collect();
    let lat = DagLattice::build(&dag, &pits, &last, 2).unwrap();
    assert!((lat.loglik() - post.chain.log_post.last().unwrap()).abs() < 1e-6);
    for (m, t) in post.median.iter().zip(model.theta2()) {
        assert!((m.phi_bar - t.phi_bar).abs() < 0.25, "{m:?} vs {t:?}");
    }
}
