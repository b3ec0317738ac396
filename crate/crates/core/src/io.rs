//! File formats: price and panel CSVs, the universe manifest, model JSON and
//! the CSV exports of every stage.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::BacktestReport;
use crate::data::{CopulaParams, Dag, FittedModel, ReturnPanel};
use crate::error::{Error, Result};
use crate::estimation::McmcChain;
use crate::garch::GarchFit;
use crate::simulate::ScenarioSet;
use crate::structure::StructureChain;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Which symbols are risk factors and which are stocks, in panel order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub risk_factors: Vec<String>,
    pub stocks: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let mut s = String::new();
        File::open(path)?.read_to_string(&mut s)?;
        toml::from_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn symbols(&self) -> Vec<String> {
        self.risk_factors.iter().chain(&self.stocks).cloned().collect()
    }
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: NaiveDate,
    symbol: String,
    close: f64,
}

/// Long `date,symbol,close` prices to a return panel. Dates missing any
/// manifest symbol are dropped with a warning.
pub fn read_prices<R: Read>(reader: R, manifest: &Manifest) -> Result<ReturnPanel> {
    let symbols = manifest.symbols();
    let index: HashMap<&str, usize> = symbols.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut by_date: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: PriceRow = row?;
        let Some(&j) = index.get(row.symbol.as_str()) else { continue };
        if !(row.close > 0.0 && row.close.is_finite()) {
            return Err(Error::InvalidInput(format!("non-positive close for {} on {}", row.symbol, row.date)));
        }
        let slot = by_date.entry(row.date).or_insert_with(|| vec![None; symbols.len()]);
        if slot[j].replace(row.close).is_some() {
            return Err(Error::InvalidInput(format!("duplicate price for {} on {}", row.symbol, row.date)));
        }
    }
    let total = by_date.len();
    let (dates, prices): (Vec<NaiveDate>, Vec<Vec<f64>>) = by_date
        .into_iter()
        .filter_map(|(d, row)| row.into_iter().collect::<Option<Vec<f64>>>().map(|r| (d, r)))
        .unzip();
    if dates.len() < total {
        log::warn!("dropped {} dates with missing prices", total - dates.len());
    }
    if dates.len() < 2 {
        return Err(Error::InvalidInput("need prices on at least two complete dates".into()));
    }
    ReturnPanel::from_prices(dates, symbols, &prices, manifest.risk_factors.len())
}

/// Wide panel CSV: `date,<symbol>...`; the first `m` symbol columns are risk factors.
pub fn write_panel<W: Write>(writer: W, panel: &ReturnPanel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(std::iter::once("date".to_string()).chain(panel.symbols.iter().cloned()))?;
    for t in 0..panel.n_days() {
        let mut rec = vec![panel.dates[t].to_string()];
        rec.extend((0..panel.n_series()).map(|j| panel.value(t, j).to_string()));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel<R: Read>(reader: R, m: usize) -> Result<ReturnPanel> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.get(0) != Some("date") || header.len() < 2 {
        return Err(Error::InvalidInput("panel CSV must start with a date column".into()));
    }
    let symbols: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut cols = vec![Vec::new(); symbols.len()];
    for rec in r.records() {
        let rec = rec?;
        let d = rec.get(0).unwrap_or_default();
        dates.push(
            NaiveDate::parse_from_str(d, "%Y-%m-%d")
                .map_err(|e| Error::InvalidInput(format!("bad date {d:?}: {e}")))?,
        );
        for (j, c) in cols.iter_mut().enumerate() {
            let v = rec.get(j + 1).unwrap_or_default();
            c.push(v.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad value {v:?}: {e}")))?);
        }
    }
    ReturnPanel::new(dates, symbols, cols, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub symbol: String,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub v: f64,
    pub loglik: f64,
}

pub fn write_marginals<W: Write>(writer: W, symbols: &[String], fits: &[GarchFit]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (s, f) in symbols.iter().zip(fits) {
        w.serialize(MarginalRow {
            symbol: s.clone(),
            omega: f.params.omega,
            alpha: f.params.alpha,
            beta: f.params.beta,
            v: f.params.v,
            loglik: f.loglik,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_marginals<R: Read>(reader: R) -> Result<Vec<MarginalRow>> {
    Ok(csv::Reader::from_reader(reader).deserialize().collect::<std::result::Result<_, _>>()?)
}

/// The persisted model: parameters plus the panel symbols they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub symbols: Vec<String>,
    #[serde(flatten)]
    pub model: FittedModel,
}

pub fn save_model<W: Write>(writer: W, model: &FittedModel, symbols: &[String]) -> Result<()> {
    let doc = ModelDocument { schema_version: MODEL_SCHEMA_VERSION, symbols: symbols.to_vec(), model: model.clone() };
    serde_json::to_writer_pretty(writer, &doc)?;
    Ok(())
}

pub fn load_model<R: Read>(reader: R) -> Result<ModelDocument> {
    let doc: ModelDocument = serde_json::from_reader(reader)?;
    if doc.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "model schema version {} (this build reads {MODEL_SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    if doc.symbols.len() != doc.model.marginals.len() {
        return Err(Error::InvalidParams("one symbol per marginal required".into()));
    }
    doc.model.validate()?;
    Ok(doc)
}

const COPULA_FIELDS: [&str; 4] = ["phi_bar", "a", "b", "v"];

/// Parameter labels of the DAG copulas, e.g. `phi_bar[F3,F2|F1]`.
pub fn copula_labels(model_dag: &Dag, symbols: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for s in crate::pcc::copula_slots(model_dag)? {
        let given: Vec<&str> = s.given.iter().map(|&g| symbols[g].as_str()).collect();
        let tag = if given.is_empty() {
            format!("{},{}", symbols[s.child], symbols[s.parent])
        } else {
            format!("{},{}|{}", symbols[s.child], symbols[s.parent], given.join(","))
        };
        out.extend(COPULA_FIELDS.iter().map(|f| format!("{f}[{tag}]")));
    }
    Ok(out)
}

pub fn write_chain_trace<W: Write>(writer: W, chain: &McmcChain, labels: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iter", "param", "value", "accepted"])?;
    for (n, (s, acc)) in chain.samples.iter().zip(&chain.accepted).enumerate() {
        for (label, v) in labels.iter().zip(s) {
            w.write_record([(n + 1).to_string(), label.clone(), v.to_string(), (*acc as u8).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_graph_log<W: Write>(writer: W, chain: &StructureChain) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iter", "score", "adjacency_bits"])?;
    for (n, (g, s)) in chain.graphs.iter().zip(&chain.scores).enumerate() {
        w.write_record([(n + 1).to_string(), s.to_string(), g.adjacency_bits()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph_log<R: Read>(reader: R, m: usize) -> Result<Vec<(Dag, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        score: f64,
        adjacency_bits: String,
    }
    csv::Reader::from_reader(reader)
        .deserialize::<Row>()
        .map(|r| {
            let r = r?;
            Ok((Dag::from_bits(m, &r.adjacency_bits)?, r.score))
        })
        .collect()
}

/// Square matrix with a leading `from` column and one column per target.
pub fn write_matrix<W: Write>(writer: W, names: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(std::iter::once("from".to_string()).chain(names.iter().cloned()))?;
    for (name, row) in names.iter().zip(rows) {
        w.write_record(std::iter::once(name.clone()).chain(row.iter().map(f64::to_string)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scenarios<W: Write>(writer: W, scen: &ScenarioSet, symbols: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "symbol", "return"])?;
    for (k, r) in scen.returns.iter().enumerate() {
        for (s, v) in symbols.iter().zip(r) {
            w.write_record([(k + 1).to_string(), s.clone(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_scenarios<R: Read>(reader: R) -> Result<(Vec<String>, ScenarioSet)> {
    #[derive(Deserialize)]
    struct Row {
        k: usize,
        symbol: String,
        #[serde(rename = "return")]
        ret: f64,
    }
    let mut symbols: Vec<String> = Vec::new();
    let mut returns: Vec<Vec<f64>> = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize::<Row>() {
        let row = row?;
        if row.k == 0 {
            return Err(Error::InvalidInput("scenario index starts at 1".into()));
        }
        if row.k > returns.len() {
            returns.resize(row.k, Vec::new());
        }
        if row.k == 1 {
            symbols.push(row.symbol);
        } else if symbols.get(returns[row.k - 1].len()) != Some(&row.symbol) {
            return Err(Error::InvalidInput(format!("scenario {} lists symbols out of order", row.k)));
        }
        returns[row.k - 1].push(row.ret);
    }
    if returns.is_empty() || returns.iter().any(|r| r.len() != symbols.len()) {
        return Err(Error::InvalidInput("every scenario needs one return per symbol".into()));
    }
    Ok((symbols, ScenarioSet { returns, model_id: "file".into(), seed: 0 }))
}

pub fn write_weights<W: Write>(writer: W, rows: &[(NaiveDate, Vec<f64>)], symbols: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "symbol", "weight"])?;
    for (d, ws) in rows {
        for (s, x) in symbols.iter().zip(ws) {
            w.write_record([d.to_string(), s.clone(), x.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_cvars<W: Write>(writer: W, rows: &[(NaiveDate, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "alpha", "cvar"])?;
    for (d, a, c) in rows {
        w.write_record([d.to_string(), a.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn alpha_label(a: Option<f64>) -> String {
    a.map_or_else(String::new, |a| a.to_string())
}

/// Plot-ready cumulative values: `kind,alpha,strategy,week,date,value`.
pub fn write_cumulative<W: Write>(writer: W, rep: &BacktestReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kind", "alpha", "strategy", "week", "date", "value"])?;
    for tr in &rep.tracks {
        let live: Vec<_> = tr.weeks.iter().filter(|r| !r.reserved).collect();
        for (strategy, values) in [("1", &tr.values_s1), ("2", &tr.values_s2)] {
            for (i, (r, v)) in live.iter().zip(values.iter()).enumerate() {
                w.write_record([
                    tr.kind.clone(),
                    alpha_label(tr.alpha),
                    strategy.to_string(),
                    (i + 1).to_string(),
                    r.invest_date.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per portfolio: cost, exceedances and the strategy-2 summary.
pub fn write_cost_table<W: Write>(writer: W, rep: &BacktestReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "kind",
        "alpha",
        "cost",
        "exceedances",
        "weeks",
        "weeks_invested_s2",
        "avg_excluded_return",
        "avg_return_s1",
        "final_value_s1",
        "final_value_s2",
    ])?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    for tr in &rep.tracks {
        w.write_record([
            tr.kind.clone(),
            alpha_label(tr.alpha),
            opt(tr.cost),
            tr.exceedances.to_string(),
            tr.values_s1.len().to_string(),
            tr.weeks_invested_s2.to_string(),
            opt(tr.avg_excluded_return),
            opt(tr.avg_return_s1),
            opt(tr.values_s1.last().copied()),
            opt(tr.values_s2.last().copied()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters of one copula as a flat CSV row set, used by `fit-stocks`.
pub fn write_stock_copulas<W: Write>(writer: W, model: &FittedModel, symbols: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["stock", "level", "factor", "phi_bar", "a", "b", "v"])?;
    let m = model.m();
    for (j, row) in model.stock_copulas.iter().enumerate() {
        for (q, c) in row.iter().enumerate() {
            let CopulaParams { phi_bar, a, b, v } = *c;
            w.write_record([
                symbols[m + j].clone(),
                (q + 1).to_string(),
                symbols[model.dag.order()[q]].clone(),
                phi_bar.to_string(),
                a.to_string(),
                b.to_string(),
                v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<std::io::BufReader<File>> {
    File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Output of `fit-dag`: the DAG copulas without any stock layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagFitDocument {
    pub schema_version: u32,
    pub factors: Vec<String>,
    pub dag: Dag,
    pub dag_copulas: Vec<crate::data::DagCopula>,
    pub m_sc: usize,
    pub method: String,
    pub loglik: f64,
}

pub fn write_json<T: Serialize, W: Write>(writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(writer, value)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned, R: Read>(reader: R) -> Result<T> {
    Ok(serde_json::from_reader(reader)?)
}

/// Backtest settings from a TOML document; absent keys take defaults.
pub fn load_config(path: &Path) -> Result<crate::backtest::BacktestConfig> {
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    toml::from_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// `"F1->F2, F2->F3"` in symbol names to a DAG on the first `m` symbols.
pub fn parse_edges(text: &str, symbols: &[String], m: usize) -> Result<Dag> {
    let idx = |s: &str| {
        symbols[..m]
            .iter()
            .position(|x| x == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown risk factor {:?}", s.trim())))
    };
    let mut edges = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (a, b) = part
            .split_once("->")
            .ok_or_else(|| Error::InvalidInput(format!("edge {part:?} is not of the form A->B")))?;
        edges.push((idx(a)?, idx(b)?));
    }
    Dag::from_edges(m, &edges)
}

/// Inverse of [`write_matrix`].
pub fn read_matrix<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(reader);
    let names: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.get(0) != names.get(i).map(String::as_str) {
            return Err(Error::InvalidInput(format!("matrix row {} is not labelled {:?}", i + 1, names.get(i))));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad value {v:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != names.len() {
            return Err(Error::InvalidInput("matrix is not square".into()));
        }
        rows.push(row);
    }
    if rows.len() != names.len() {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    Ok((names, rows))
}
