use gcgarch::data::Dag;
use gcgarch::exec::Exec;
use gcgarch::io::*;
use gcgarch::simulate::{simulate_one_day, simulate_panel};
use gcgarch::structure::StructureChain;
use gcgarch::synth::random_model;

#[test]
fn prices_to_panel() {
    let csv = "date,symbol,close\n\
        2024-01-02,SPX,100\n2024-01-02,AAA,10\n\
        2024-01-03,SPX,101\n2024-01-03,AAA,10.5\n\
        2024-01-04,SPX,99\n\
        2024-01-05,SPX,100\n2024-01-05,AAA,10\n2024-01-05,ZZZ,1\n";
    let man: Manifest = toml::from_str("risk_factors = [\"SPX\"]\nstocks = [\"AAA\"]").unwrap();
    let p = read_prices(csv.as_bytes(), &man).unwrap();
    assert_eq!((p.n_days(), p.m, p.p), (2, 1, 1));
    assert!((p.value(0, 0) - 100.0 * (1.01f64).ln()).abs() < 1e-12);
    assert!((p.value(1, 1) - 100.0 * (10.0f64 / 10.5).ln()).abs() < 1e-12);
    assert!(toml::from_str::<Manifest>("risk_factors = []\nstock = []").is_err());
}

#[test]
fn round_trips() {
    let model = random_model(Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap(), 2, 4, 2).unwrap();
    let panel = simulate_panel(&model, 30, 4).unwrap();
    let mut buf = Vec::new();
    write_panel(&mut buf, &panel).unwrap();
    let back = read_panel(buf.as_slice(), 3).unwrap();
    assert_eq!(back, panel);

    let mut buf = Vec::new();
    save_model(&mut buf, &model, &panel.symbols).unwrap();
    let doc = load_model(buf.as_slice()).unwrap();
    assert_eq!(doc.model, model);
    assert_eq!(doc.schema_version, MODEL_SCHEMA_VERSION);
    let text = String::from_utf8(buf).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 9");
    assert!(load_model(text.as_bytes()).is_err());

    let scen = simulate_one_day(&model, &panel, 5, 1, Exec::Sequential).unwrap();
    let mut buf = Vec::new();
    write_scenarios(&mut buf, &scen, &panel.symbols[3..]).unwrap();
    let (syms, s2) = read_scenarios(buf.as_slice()).unwrap();
    assert_eq!(syms, panel.symbols[3..].to_vec());
    assert_eq!(s2.returns, scen.returns);

    let chain = StructureChain {
        graphs: vec![Dag::empty(3), model.dag.clone()],
        scores: vec![0.0, 12.5],
        accepted: vec![false, true],
        burn_in: 0,
    };
    let mut buf = Vec::new();
    write_graph_log(&mut buf, &chain).unwrap();
    let g = read_graph_log(buf.as_slice(), 3).unwrap();
    assert_eq!(g[1], (model.dag.clone(), 12.5));
    let labels = copula_labels(&model.dag, &panel.symbols).unwrap();
    assert_eq!(labels[0], "phi_bar[F2,F1]");
}
