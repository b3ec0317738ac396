use std::path::{Path, PathBuf};
use std::process::Command;

use gcgarch::data::Dag;
use gcgarch::io;
use gcgarch::synth::random_model;

fn gcgarch(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_gcgarch"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn gcgarch");
    assert!(out.status.success(), "gcgarch {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn lines(p: PathBuf) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

fn write_model(dir: &Path) {
    let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let model = random_model(dag, 3, 11, 2).unwrap();
    let symbols: Vec<String> = ["F1", "F2", "F3", "S1", "S2", "S3"].iter().map(|s| s.to_string()).collect();
    io::save_model(io::create(&dir.join("truth.json")).unwrap(), &model, &symbols).unwrap();
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_model(d);
    let panel = ["--panel", "panel.csv", "--factors", "3"];
    let with = |extra: &[&'static str], head: &[&'static str]| -> Vec<&'static str> {
        head.iter().chain(&panel).chain(extra).copied().collect()
    };

    gcgarch(d, &["simulate", "--model", "truth.json", "--days", "400", "--seed", "3", "--out", "panel.csv"]);
    assert_eq!(lines(d.join("panel.csv")), 401);

    gcgarch(d, &with(&["--out", "marg.csv"], &["fit-marginals"]));
    assert_eq!(lines(d.join("marg.csv")), 7);

    gcgarch(
        d,
        &with(
            &["--marginals", "marg.csv", "--edges", "F1->F2,F2->F3", "--method", "sequential", "--out", "seq.json"],
            &["fit-dag"],
        ),
    );
    gcgarch(
        d,
        &with(
            &[
                "--marginals",
                "marg.csv",
                "--edges",
                "F1->F2,F2->F3",
                "--iters",
                "300",
                "--out",
                "dag.json",
                "--trace",
                "trace.csv",
            ],
            &["fit-dag"],
        ),
    );
    // header plus 300 iterations of 2 copulas x 4 parameters
    assert_eq!(lines(d.join("trace.csv")), 1 + 300 * 8);

    let bic = gcgarch(d, &with(&["--marginals", "marg.csv", "--edges", "F1->F2,F2->F3"], &["score"]));
    let row: Vec<&str> = bic.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "2");
    assert!(row[0].parse::<f64>().unwrap().is_finite());

    gcgarch(
        d,
        &with(
            &[
                "--marginals",
                "marg.csv",
                "--iters",
                "20",
                "--log",
                "graphs.csv",
                "--features",
                "edges.csv",
                "--top",
                "top.csv",
            ],
            &["learn-structure"],
        ),
    );
    assert_eq!(lines(d.join("graphs.csv")), 21);
    assert_eq!(lines(d.join("edges.csv")), 4);

    gcgarch(
        d,
        &with(
            &["--marginals", "marg.csv", "--dag-fit", "dag.json", "--out", "model.json", "--table", "stocks.csv"],
            &["fit-stocks"],
        ),
    );
    let fitted = io::load_model(io::open(&d.join("model.json")).unwrap()).unwrap();
    assert_eq!(fitted.model.p(), 3);
    assert_eq!(lines(d.join("stocks.csv")), 1 + 9);

    gcgarch(
        d,
        &with(
            &[
                "--model",
                "model.json",
                "--model",
                "truth.json",
                "--bic",
                "-10",
                "--bic",
                "-12",
                "--k",
                "500",
                "--alpha",
                "0.05,0.1",
                "--cov",
                "cov.csv",
                "--scenarios",
                "scen.csv",
                "--cvar",
                "fc_cvar.csv",
            ],
            &["forecast"],
        ),
    );
    assert_eq!(lines(d.join("cov.csv")), 4);
    assert_eq!(lines(d.join("scen.csv")), 1 + 1500);
    assert_eq!(lines(d.join("fc_cvar.csv")), 3);

    gcgarch(
        d,
        &[
            "optimize",
            "--method",
            "mcvar",
            "--alpha",
            "0.05",
            "--scenarios",
            "scen.csv",
            "--date",
            "2020-01-06",
            "--out",
            "w_cvar.csv",
            "--cvar",
            "cvar.csv",
        ],
    );
    gcgarch(
        d,
        &[
            "optimize",
            "--method",
            "mv",
            "--cov",
            "cov.csv",
            "--scenarios",
            "scen.csv",
            "--date",
            "2020-01-06",
            "--out",
            "w_mv.csv",
            "--cvar",
            "cvar_mv.csv",
        ],
    );
    for f in ["w_cvar.csv", "w_mv.csv"] {
        let s = std::fs::read_to_string(d.join(f)).unwrap();
        let total: f64 = s.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{f}: weights sum to {total}");
    }

    std::fs::write(d.join("bt.toml"), "window = 250\nk = 300\nalphas = [0.05]\nw_s = 2\nstructure = \"known\"\n")
        .unwrap();
    gcgarch(
        d,
        &with(
            &["--strategy", "2", "--known-model", "truth.json", "--out", "report.json"],
            &["--config", "bt.toml", "backtest"],
        ),
    );
    gcgarch(d, &["report", "--report", "report.json", "--out-dir", "plots"]);
    for f in ["cumulative.csv", "cost.csv", "cvar.csv", "weights_mcvar_0.05.csv", "weights_mv.csv"] {
        assert!(lines(d.join("plots").join(f)) > 1, "{f} is empty");
    }
}

#[test]
fn ingest_prices() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("universe.toml"), "risk_factors = [\"F1\"]\nstocks = [\"A\", \"B\"]\n").unwrap();
    let mut csv = String::from("date,symbol,close\n");
    for (i, day) in ["2021-03-01", "2021-03-02", "2021-03-03"].iter().enumerate() {
        for (j, s) in ["B", "F1", "A"].iter().enumerate() {
            csv += &format!("{day},{s},{}\n", 100.0 + (i * 3 + j) as f64);
        }
    }
    std::fs::write(d.join("prices.csv"), csv).unwrap();
    gcgarch(d, &["ingest", "--prices", "prices.csv", "--manifest", "universe.toml", "--out", "panel.csv"]);
    let s = std::fs::read_to_string(d.join("panel.csv")).unwrap();
    assert_eq!(s.lines().next().unwrap(), "date,F1,A,B");
    assert_eq!(s.lines().count(), 3);
}

#[test]
fn rejects_unknown_config_keys() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "windw = 10\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gcgarch"))
        .args(["--config", "c.toml", "report", "--report", "x", "--out-dir", "y"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("windw"));
}
