//! Run orchestration and CSV output: single runs, sweeps, file comparison and
//! the MPS budget.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{deviation_dr, mps_budget, trapezoid, MpsBudget};
use crate::config::{Coupling, RunConfig, SweepGrid};
use crate::ensemble::{run_mean_field, run_psa, Axis, Observables};
use crate::error::{Error, Result};
use crate::model::LatticeSpec;
use crate::observables::ObservableSeries;
use crate::oracle::{exact_observables, prepare_product_state};
use crate::sampling::ProductStateSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Phase-space trajectory ensemble.
    Psa,
    /// Single mean-field trajectory from the exact Bloch vectors.
    Mf,
    /// Statevector evolution.
    Exact,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "psa" => Some(Self::Psa),
            "mf" => Some(Self::Mf),
            "exact" => Some(Self::Exact),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Psa => "psa",
            Self::Mf => "mf",
            Self::Exact => "exact",
        }
    }
}

/// Evolves `cfg` in the given mode and collects the configured observables.
/// PSA runs use the ambient rayon pool.
pub fn run_observables(mode: Mode, cfg: &RunConfig) -> Result<ObservableSeries> {
    let graph = cfg.graph()?;
    let model = cfg.model(&graph)?;
    let obs = &cfg.ensemble.observables;
    match mode {
        Mode::Psa => run_psa(&model, &graph, &cfg.initial_state, &cfg.integrator, &cfg.ensemble)?.observable_series(obs),
        Mode::Mf => {
            run_mean_field(&model, &graph, &cfg.initial_state, &cfg.integrator, &cfg.ensemble)?.observable_series(obs)
        }
        Mode::Exact => {
            let psi0 = prepare_product_state(&cfg.initial_state, graph.n_qubits(), &cfg.oracle)?;
            exact_observables(&psi0, &model, &graph, &cfg.integrator, &cfg.oracle, obs)
        }
    }
}

/// Column name of a subsystem entropy: `S_ent_m<m>` for the leftmost `m`
/// qubits, otherwise the qubit list joined by underscores.
pub fn entropy_column(subsystem: &[usize]) -> String {
    if subsystem.iter().enumerate().all(|(i, &q)| i == q) {
        format!("S_ent_m{}", subsystem.len())
    } else {
        let parts: Vec<String> = subsystem.iter().map(|q| q.to_string()).collect();
        format!("S_ent_{}", parts.join("_"))
    }
}

/// Named columns sharing a time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    /// `columns[0]` is `t`.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn to_csv(&self, precision: usize) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_error)?;
        let digits = precision.clamp(1, 17) - 1;
        let mut row = Vec::with_capacity(self.header.len());
        for r in 0..self.n_rows() {
            row.clear();
            row.extend(self.columns.iter().map(|c| format!("{:.*e}", digits, c[r])));
            w.write_record(&row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("ascii output"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Contract("first CSV column must be `t`".into()));
        }
        let mut columns = vec![Vec::new(); header.len()];
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            for (c, field) in rec.iter().enumerate() {
                let v = field
                    .parse::<f64>()
                    .map_err(|_| Error::Contract(format!("row {}: {field:?} is not a number", line + 2)))?;
                columns[c].push(v);
            }
        }
        Ok(Self { header, columns })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Contract(format!("CSV: {e}"))
}

/// Lays the series out in the CSV column order: `t, Sx, Sy, Sz`, pair
/// fluctuations, subsystem entropies, then `S_avg` when requested.
pub fn observable_table(series: &ObservableSeries, obs: &Observables) -> Table {
    let mut header = vec!["t".to_string()];
    let mut columns = vec![series.times.clone()];
    for axis in Axis::ALL {
        header.push(format!("S{}", axis.name()));
        columns.push(series.qubit_averaged(axis));
    }
    for axis in Axis::ALL {
        if let Some(v) = series.fluctuation(axis) {
            header.push(format!("sigma2_{}", axis.name()));
            columns.push(v.to_vec());
        }
    }
    for (sub, values) in &series.entropies {
        header.push(entropy_column(sub));
        columns.push(values.clone());
    }
    if obs.single_qubit_entropy {
        header.push("S_avg".into());
        columns.push(series.average_entropy());
    }
    Table { header, columns }
}

/// Runs one mode and renders the CSV text.
pub fn run_to_csv(mode: Mode, cfg: &RunConfig) -> Result<String> {
    let series = run_observables(mode, cfg)?;
    observable_table(&series, &cfg.ensemble.observables).to_csv(cfg.output.precision)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(Error::Io)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: Option<usize>,
    pub eta: f64,
    pub initial_state: String,
    pub status: String,
    pub dr_mf: Option<f64>,
    pub dr_psa: Option<f64>,
}

/// Base config with one grid cell's parameters substituted.
pub fn sweep_cell(base: &RunConfig, k: usize, eta: f64, state: &ProductStateSpec) -> RunConfig {
    let mut cfg = base.clone();
    if let LatticeSpec::Chain1d { n_qubits, .. } = cfg.lattice {
        cfg.lattice = LatticeSpec::Chain1d { n_qubits, k };
    }
    cfg.coupling = Coupling::Eta(eta);
    cfg.initial_state = state.clone();
    cfg.ensemble.observables = Observables::default();
    cfg
}

fn sweep_one(cfg: &RunConfig) -> Result<(Option<f64>, Option<f64>, &'static str)> {
    if cfg.n_qubits() > cfg.oracle.max_qubits {
        return Ok((None, None, "exact_unavailable"));
    }
    let graph = cfg.graph()?;
    let model = cfg.model(&graph)?;
    let t = cfg.integrator.stored_times().last().copied().unwrap_or(cfg.integrator.t_final);
    let exact = run_observables(Mode::Exact, cfg)?.bloch_series();
    let mf = run_mean_field(&model, &graph, &cfg.initial_state, &cfg.integrator, &cfg.ensemble)?.bloch_means()?;
    let psa = run_psa(&model, &graph, &cfg.initial_state, &cfg.integrator, &cfg.ensemble)?.bloch_means()?;
    Ok((Some(deviation_dr(&exact, &mf, t)?), Some(deviation_dr(&exact, &psa, t)?), "ok"))
}

/// Evaluates every grid cell (concurrently, reported in grid order).
pub fn sweep(base: &RunConfig, grid: &SweepGrid) -> Vec<SweepRow> {
    let ks: Vec<Option<usize>> = if grid.k.is_empty() { vec![None] } else { grid.k.iter().map(|&k| Some(k)).collect() };
    let mut cells = Vec::new();
    for &k in &ks {
        for &eta in &grid.eta {
            for &p in &grid.initial_states {
                cells.push((k, eta, p));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(k, eta, p)| {
            let state = ProductStateSpec::Preset(p);
            let cfg = sweep_cell(base, k.unwrap_or(0), eta, &state);
            let (dr_mf, dr_psa, status) = match sweep_one(&cfg) {
                Ok((a, b, s)) => (a, b, s.to_string()),
                Err(e) => (None, None, format!("error: {e}")),
            };
            SweepRow {
                k,
                eta,
                initial_state: p.name().to_string(),
                status,
                dr_mf,
                dr_psa,
            }
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow], precision: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "eta", "initial_state", "status", "dr_mf", "dr_psa"])
        .map_err(csv_error)?;
    let digits = precision.clamp(1, 17) - 1;
    let num = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.digits$e}"));
    for r in rows {
        w.write_record([
            r.k.map_or_else(|| "NA".to_string(), |k| k.to_string()),
            format!("{}", r.eta),
            r.initial_state.clone(),
            r.status.clone(),
            num(r.dr_mf),
            num(r.dr_psa),
        ])
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDiff {
    pub column: String,
    pub max_abs: f64,
    /// `(1/T) ∫ |a − b| dt` over the shared time range.
    pub integrated: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub n_times: usize,
    pub columns: Vec<ColumnDiff>,
    /// Columns present in only one of the files.
    pub unmatched: Vec<String>,
}

impl Comparison {
    pub fn render(&self) -> String {
        let mut out = String::from("column,max_abs,integrated\n");
        for c in &self.columns {
            let _ = writeln!(out, "{},{:.6e},{:.6e}", c.column, c.max_abs, c.integrated);
        }
        out
    }
}

/// Aligns two observable tables on `t` and reports per-column deviations.
pub fn compare_tables(a: &Table, b: &Table) -> Result<Comparison> {
    let (ta, tb) = (&a.columns[0], &b.columns[0]);
    let mut rows = Vec::new();
    let mut j = 0;
    for (i, &t) in ta.iter().enumerate() {
        let tol = 1e-9 * t.abs().max(1.0);
        while j < tb.len() && tb[j] < t - tol {
            j += 1;
        }
        if j < tb.len() && (tb[j] - t).abs() <= tol {
            rows.push((i, j));
        }
    }
    if rows.len() < 2 {
        return Err(Error::Contract("the files share fewer than two time points".into()));
    }
    let times: Vec<f64> = rows.iter().map(|&(i, _)| ta[i]).collect();
    let span = times[times.len() - 1] - times[0];
    let mut columns = Vec::new();
    let mut unmatched = Vec::new();
    for (ci, name) in a.header.iter().enumerate().skip(1) {
        let Some(cb) = b.column(name) else {
            unmatched.push(name.clone());
            continue;
        };
        let diffs: Vec<f64> = rows.iter().map(|&(i, j)| (a.columns[ci][i] - cb[j]).abs()).collect();
        let max_abs = diffs.iter().copied().fold(0.0, f64::max);
        let integrated = if span > 0.0 {
            trapezoid(&times, &diffs, times[0], times[times.len() - 1])? / span
        } else {
            max_abs
        };
        columns.push(ColumnDiff {
            column: name.clone(),
            max_abs,
            integrated,
        });
    }
    unmatched.extend(b.header.iter().skip(1).filter(|h| a.column(h).is_none()).cloned());
    Ok(Comparison {
        n_times: rows.len(),
        columns,
        unmatched,
    })
}

pub fn compare_csv(a: &str, b: &str) -> Result<Comparison> {
    compare_tables(&Table::from_csv(a)?, &Table::from_csv(b)?)
}

pub fn budget(m: u32, n_sites: u64, d: u64) -> Result<MpsBudget> {
    mps_budget(m, n_sites, d)
}
