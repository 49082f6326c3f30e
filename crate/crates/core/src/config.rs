//! Run configuration files.
//!
//! Configs are TOML documents with flat sections. Every key except the
//! coupling and the lattice size has a default:
//!
//! ```toml
//! [model]
//! h = 1.0            # transverse field
//! eta = 1.0          # mean-field coupling; or J = ..., never both
//! k = 1              # chain locality (chain1d only)
//!
//! [lattice]
//! kind = "chain1d"   # chain1d | grid2d | grid3d
//! L = 10             # chain1d
//! # dims = [4, 3]    # grid2d / grid3d
//! boundary = "open"
//!
//! [initial_state]
//! preset = "plus_all"            # plus_all | zero_all | neel
//! # angles = [[theta, phi], ...] # one pair per qubit, instead of preset
//!
//! [integrator]
//! dt = 0.01
//! t_final = 10.0
//! store_stride = 1
//! neighbor_sums = "auto"         # auto | adjacency | window
//!
//! [ensemble]
//! n_traj = 10000
//! master_seed = 0               # quote seeds above 2^63 - 1
//! pair_axes = []                 # any of "x", "y", "z"
//! pairs = "all"                  # or [[i, j], ...]
//! subsystems = []                # e.g. [[0], [0, 1], [0, 1, 2]]
//! single_qubit_entropy = false
//! n_blocks = 20
//! pair_cap = 64
//! max_subsystem = 3
//!
//! [oracle]
//! max_qubits = 14
//! substep_phase = 0.01
//! propagator = "rk4"             # rk4 | chebyshev
//!
//! [output]
//! # path = "run.csv"
//! precision = 17
//! ```
//!
//! Parsing reports every problem found, not just the first.

use std::str::FromStr;

use toml::{Table, Value};

use crate::dynamics::{IntegratorConfig, NeighborKernel};
use crate::ensemble::{Axis, EnsembleConfig, Observables, PairSelection};
use crate::error::{Error, FieldError, Result};
use crate::model::{build_coupling_graph, CouplingGraph, LatticeSpec, ModelParams};
use crate::oracle::{OracleConfig, Propagator};
use crate::sampling::{ProductStateSpec, StatePreset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    J(f64),
    Eta(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub path: Option<String>,
    /// Significant digits in CSV output.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: None,
            precision: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub h: f64,
    pub coupling: Coupling,
    pub lattice: LatticeSpec,
    pub initial_state: ProductStateSpec,
    pub integrator: IntegratorConfig,
    pub ensemble: EnsembleConfig,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn n_qubits(&self) -> usize {
        self.lattice.n_qubits()
    }

    pub fn graph(&self) -> Result<CouplingGraph> {
        build_coupling_graph(&self.lattice)
    }

    pub fn model(&self, graph: &CouplingGraph) -> Result<ModelParams> {
        match self.coupling {
            Coupling::J(j) => ModelParams::with_coupling(self.h, j, graph),
            Coupling::Eta(eta) => ModelParams::with_eta(self.h, eta, graph),
        }
    }

    /// Serializes to the config syntax; `parse_config` reads it back unchanged.
    pub fn to_toml(&self) -> String {
        let mut doc = Table::new();

        let mut model = Table::new();
        model.insert("h".into(), Value::Float(self.h));
        match self.coupling {
            Coupling::J(j) => model.insert("J".into(), Value::Float(j)),
            Coupling::Eta(e) => model.insert("eta".into(), Value::Float(e)),
        };
        let mut lattice = Table::new();
        match &self.lattice {
            LatticeSpec::Chain1d { n_qubits, k } => {
                model.insert("k".into(), int(*k));
                lattice.insert("kind".into(), "chain1d".into());
                lattice.insert("L".into(), int(*n_qubits));
            }
            LatticeSpec::Grid2d { nx, ny } => {
                lattice.insert("kind".into(), "grid2d".into());
                lattice.insert("dims".into(), Value::Array(vec![int(*nx), int(*ny)]));
            }
            LatticeSpec::Grid3d { nx, ny, nz } => {
                lattice.insert("kind".into(), "grid3d".into());
                lattice.insert("dims".into(), Value::Array(vec![int(*nx), int(*ny), int(*nz)]));
            }
        }
        lattice.insert("boundary".into(), "open".into());

        let mut state = Table::new();
        match &self.initial_state {
            ProductStateSpec::Preset(p) => {
                state.insert("preset".into(), p.name().into());
            }
            ProductStateSpec::Angles(a) => {
                let pairs = a
                    .iter()
                    .map(|&(t, p)| Value::Array(vec![Value::Float(t), Value::Float(p)]))
                    .collect();
                state.insert("angles".into(), Value::Array(pairs));
            }
        }

        let mut integ = Table::new();
        integ.insert("dt".into(), Value::Float(self.integrator.dt));
        integ.insert("t_final".into(), Value::Float(self.integrator.t_final));
        integ.insert("store_stride".into(), int(self.integrator.store_stride));
        integ.insert("neighbor_sums".into(), self.ensemble.kernel.name().into());

        let e = &self.ensemble;
        let mut ens = Table::new();
        ens.insert("n_traj".into(), wide(e.n_traj));
        ens.insert("master_seed".into(), wide(e.master_seed));
        ens.insert(
            "pair_axes".into(),
            Value::Array(e.observables.pair_axes.iter().map(|a| a.name().into()).collect()),
        );
        ens.insert(
            "pairs".into(),
            match &e.observables.pairs {
                PairSelection::All => "all".into(),
                PairSelection::Explicit(p) => {
                    Value::Array(p.iter().map(|&(i, j)| Value::Array(vec![int(i), int(j)])).collect())
                }
            },
        );
        ens.insert(
            "subsystems".into(),
            Value::Array(
                e.observables
                    .subsystems
                    .iter()
                    .map(|s| Value::Array(s.iter().map(|&q| int(q)).collect()))
                    .collect(),
            ),
        );
        ens.insert("single_qubit_entropy".into(), Value::Boolean(e.observables.single_qubit_entropy));
        ens.insert("n_blocks".into(), int(e.n_blocks));
        ens.insert("pair_cap".into(), int(e.pair_cap));
        ens.insert("max_subsystem".into(), int(e.max_subsystem));

        let mut oracle = Table::new();
        oracle.insert("max_qubits".into(), int(self.oracle.max_qubits));
        oracle.insert("substep_phase".into(), Value::Float(self.oracle.substep_phase));
        oracle.insert("propagator".into(), self.oracle.propagator.name().into());

        let mut output = Table::new();
        if let Some(p) = &self.output.path {
            output.insert("path".into(), p.as_str().into());
        }
        output.insert("precision".into(), int(self.output.precision));

        for (name, t) in [
            ("model", model),
            ("lattice", lattice),
            ("initial_state", state),
            ("integrator", integ),
            ("ensemble", ens),
            ("oracle", oracle),
            ("output", output),
        ] {
            doc.insert(name.into(), Value::Table(t));
        }
        doc.to_string()
    }
}

fn int(v: usize) -> Value {
    wide(v as u64)
}

/// TOML integers are signed 64-bit; larger values are written as strings.
fn wide(v: u64) -> Value {
    i64::try_from(v).map_or_else(|_| Value::String(v.to_string()), Value::Integer)
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s)
    }
}

/// Parses TOML text into a table, mapping syntax errors to their line.
pub(crate) fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| {
        let line = e
            .span()
            .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Syntax {
            line,
            message: e.message().trim().to_string(),
        }
    })
}

/// Collects validation failures while reading typed fields.
struct Fields {
    errors: Vec<FieldError>,
}

impl Fields {
    fn push(&mut self, field: &str, msg: impl Into<String>) {
        self.errors.push(FieldError::new(field, msg));
    }

    fn section<'a>(&mut self, doc: &'a Table, name: &str, allowed: &[&str]) -> Option<&'a Table> {
        match doc.get(name) {
            None => None,
            Some(Value::Table(t)) => {
                for key in t.keys() {
                    if !allowed.contains(&key.as_str()) {
                        self.push(&format!("{name}.{key}"), "unknown key");
                    }
                }
                Some(t)
            }
            Some(_) => {
                self.push(name, "expected a section");
                None
            }
        }
    }

    fn float(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<f64> {
        let field = format!("{section}.{key}");
        match t?.get(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.push(&field, "expected a number");
                None
            }
        }
    }

    fn uint(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<u64> {
        let field = format!("{section}.{key}");
        match t?.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::String(s) => match s.parse::<u64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.push(&field, "expected a non-negative integer");
                    None
                }
            },
            _ => {
                self.push(&field, "expected a non-negative integer");
                None
            }
        }
    }

    fn size(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<usize> {
        self.uint(t, section, key).map(|v| v as usize)
    }

    fn string<'a>(&mut self, t: Option<&'a Table>, section: &str, key: &str) -> Option<&'a str> {
        match t?.get(key)? {
            Value::String(s) => Some(s.as_str()),
            _ => {
                self.push(&format!("{section}.{key}"), "expected a string");
                None
            }
        }
    }

    fn boolean(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<bool> {
        match t?.get(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.push(&format!("{section}.{key}"), "expected true or false");
                None
            }
        }
    }

    fn index_list(&mut self, v: &Value, field: &str) -> Option<Vec<usize>> {
        let Value::Array(items) = v else {
            self.push(field, "expected a list of qubit indices");
            return None;
        };
        let mut out = Vec::new();
        for item in items {
            match item {
                Value::Integer(i) if *i >= 0 => out.push(*i as usize),
                _ => {
                    self.push(field, "qubit indices must be non-negative integers");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn nested_indices(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<Vec<Vec<usize>>> {
        let field = format!("{section}.{key}");
        let Value::Array(items) = t?.get(key)? else {
            self.push(&field, "expected a list of lists");
            return None;
        };
        items.iter().map(|v| self.index_list(v, &field)).collect()
    }
}

const TOP: &[&str] = &["model", "lattice", "initial_state", "integrator", "ensemble", "oracle", "output"];

/// Parses and validates a run configuration, reporting all errors at once.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc = parse_table(text)?;
    let mut f = Fields { errors: Vec::new() };
    for key in doc.keys() {
        if !TOP.contains(&key.as_str()) {
            f.push(key, "unknown section");
        }
    }

    let model = f.section(&doc, "model", &["h", "J", "eta", "k"]);
    let lattice = f.section(&doc, "lattice", &["kind", "L", "dims", "boundary"]);
    let state = f.section(&doc, "initial_state", &["preset", "angles"]);
    let integ = f.section(&doc, "integrator", &["dt", "t_final", "store_stride", "neighbor_sums"]);
    let ens = f.section(
        &doc,
        "ensemble",
        &[
            "n_traj",
            "master_seed",
            "pair_axes",
            "pairs",
            "subsystems",
            "single_qubit_entropy",
            "n_blocks",
            "pair_cap",
            "max_subsystem",
        ],
    );
    let oracle = f.section(&doc, "oracle", &["max_qubits", "substep_phase", "propagator"]);
    let output = f.section(&doc, "output", &["path", "precision"]);

    // model
    let h = f.float(model, "model", "h").unwrap_or(1.0);
    if !(h > 0.0 && h.is_finite()) {
        f.push("model.h", format!("must be a positive finite number, got {h}"));
    }
    let j = f.float(model, "model", "J");
    let eta = f.float(model, "model", "eta");
    let coupling = match (j, eta) {
        (Some(j), None) => Some(Coupling::J(j)),
        (None, Some(e)) => Some(Coupling::Eta(e)),
        _ => {
            f.push("model", "exactly one of J, eta must be given");
            None
        }
    };
    if let Some(Coupling::J(v) | Coupling::Eta(v)) = coupling {
        if !v.is_finite() {
            f.push("model", "coupling must be finite");
        }
    }
    let k = f.size(model, "model", "k");

    // lattice
    let kind = f.string(lattice, "lattice", "kind").unwrap_or("chain1d");
    if let Some(b) = f.string(lattice, "lattice", "boundary") {
        if b != "open" {
            f.push("lattice.boundary", format!("only open boundaries are supported, got {b:?}"));
        }
    }
    let n = f.size(lattice, "lattice", "L");
    let dims = lattice.and_then(|t| t.get("dims")).and_then(|v| f.index_list(v, "lattice.dims"));
    let lattice_spec = match kind {
        "chain1d" => {
            if dims.is_some() {
                f.push("lattice.dims", "not used by chain1d; give L");
            }
            match (n, k) {
                (Some(n), Some(k)) => {
                    if n < 2 {
                        f.push("lattice.L", format!("need at least 2 qubits, got {n}"));
                    }
                    if k < 1 || k >= n {
                        f.push("model.k", format!("must satisfy 1 <= k <= L-1 = {}, got {k}", n.saturating_sub(1)));
                    }
                    Some(LatticeSpec::Chain1d { n_qubits: n, k })
                }
                (n, k) => {
                    if n.is_none() {
                        f.push("lattice.L", "required for chain1d");
                    }
                    if k.is_none() {
                        f.push("model.k", "required for chain1d");
                    }
                    None
                }
            }
        }
        "grid2d" | "grid3d" => {
            let want = if kind == "grid2d" { 2 } else { 3 };
            if n.is_some() {
                f.push("lattice.L", format!("not used by {kind}; give dims"));
            }
            if k.is_some() {
                f.push("model.k", format!("not used by {kind}"));
            }
            match dims {
                Some(d) if d.len() == want => {
                    if d.iter().any(|&x| x == 0) || d.iter().product::<usize>() < 2 {
                        f.push("lattice.dims", "grid must have nonzero sides and at least 2 sites");
                    }
                    Some(if want == 2 {
                        LatticeSpec::Grid2d { nx: d[0], ny: d[1] }
                    } else {
                        LatticeSpec::Grid3d {
                            nx: d[0],
                            ny: d[1],
                            nz: d[2],
                        }
                    })
                }
                Some(d) => {
                    f.push("lattice.dims", format!("{kind} needs {want} sides, got {}", d.len()));
                    None
                }
                None => {
                    f.push("lattice.dims", format!("required for {kind}"));
                    None
                }
            }
        }
        other => {
            f.push("lattice.kind", format!("unknown lattice {other:?}"));
            None
        }
    };
    let n_qubits = lattice_spec.as_ref().map(|l| l.n_qubits());

    // initial state
    let preset = f.string(state, "initial_state", "preset");
    let angles = state.and_then(|t| t.get("angles"));
    let initial_state = match (preset, angles) {
        (Some(p), None) => match StatePreset::parse(p) {
            Some(StatePreset::Neel) if n_qubits.is_some_and(|n| n % 2 == 1) => {
                f.push(
                    "initial_state.preset",
                    format!("neel: even L required, got L = {}", n_qubits.unwrap()),
                );
                None
            }
            Some(p) => Some(ProductStateSpec::Preset(p)),
            None => {
                f.push("initial_state.preset", format!("unknown preset {p:?}"));
                None
            }
        },
        (None, Some(v)) => parse_angles(&mut f, v, n_qubits).map(ProductStateSpec::Angles),
        (Some(_), Some(_)) => {
            f.push("initial_state", "give either preset or angles, not both");
            None
        }
        (None, None) => {
            f.push("initial_state", "a preset or an angle list is required");
            None
        }
    };

    // integrator
    let defaults = IntegratorConfig::default();
    let integrator = IntegratorConfig {
        dt: f.float(integ, "integrator", "dt").unwrap_or(defaults.dt),
        t_final: f.float(integ, "integrator", "t_final").unwrap_or(defaults.t_final),
        store_stride: f.size(integ, "integrator", "store_stride").unwrap_or(defaults.store_stride),
    };
    if let Err(Error::Config(errs)) = integrator.validate() {
        f.errors.extend(errs);
    }
    let kernel = match f.string(integ, "integrator", "neighbor_sums") {
        None => NeighborKernel::Auto,
        Some(s) => NeighborKernel::parse(s).unwrap_or_else(|| {
            f.push("integrator.neighbor_sums", format!("unknown kernel {s:?}"));
            NeighborKernel::Auto
        }),
    };
    if kernel == NeighborKernel::Window && !matches!(lattice_spec, Some(LatticeSpec::Chain1d { .. }) | None) {
        f.push("integrator.neighbor_sums", "window sums need a chain1d lattice");
    }

    // ensemble
    let ed = EnsembleConfig::default();
    let n_traj = f.uint(ens, "ensemble", "n_traj").unwrap_or(ed.n_traj);
    if n_traj == 0 {
        f.push("ensemble.n_traj", "must be >= 1");
    }
    let master_seed = f.uint(ens, "ensemble", "master_seed").unwrap_or(ed.master_seed);
    let mut pair_axes = Vec::new();
    match ens.and_then(|t| t.get("pair_axes")) {
        None => {}
        Some(Value::Array(items)) => {
            for item in items {
                match item.as_str().and_then(Axis::parse) {
                    Some(a) if !pair_axes.contains(&a) => pair_axes.push(a),
                    Some(a) => f.push("ensemble.pair_axes", format!("axis {} listed twice", a.name())),
                    None => f.push("ensemble.pair_axes", format!("unknown axis {item}")),
                }
            }
        }
        Some(_) => f.push("ensemble.pair_axes", "expected a list such as [\"x\", \"z\"]"),
    }
    let pairs = match ens.and_then(|t| t.get("pairs")) {
        None => PairSelection::All,
        Some(Value::String(s)) if s == "all" => PairSelection::All,
        Some(v @ Value::Array(_)) => {
            let lists = f.nested_indices(ens, "ensemble", "pairs").unwrap_or_default();
            let _ = v;
            let mut out = Vec::new();
            for l in lists {
                match l.as_slice() {
                    [i, j] if i != j => out.push((*i.min(j), *i.max(j))),
                    _ => f.push("ensemble.pairs", format!("{l:?} is not a pair of distinct qubits")),
                }
            }
            PairSelection::Explicit(out)
        }
        Some(_) => {
            f.push("ensemble.pairs", "expected \"all\" or a list of pairs");
            PairSelection::All
        }
    };
    let subsystems = f.nested_indices(ens, "ensemble", "subsystems").unwrap_or_default();
    let single_qubit_entropy = f.boolean(ens, "ensemble", "single_qubit_entropy").unwrap_or(false);
    let n_blocks = f.size(ens, "ensemble", "n_blocks").unwrap_or(ed.n_blocks);
    if n_blocks == 0 {
        f.push("ensemble.n_blocks", "must be >= 1");
    }
    let pair_cap = f.size(ens, "ensemble", "pair_cap").unwrap_or(ed.pair_cap);
    let max_subsystem = f.size(ens, "ensemble", "max_subsystem").unwrap_or(ed.max_subsystem);
    for s in &subsystems {
        if s.is_empty() || s.len() > max_subsystem {
            f.push(
                "ensemble.subsystems",
                format!("{s:?}: size must be between 1 and max_subsystem = {max_subsystem}"),
            );
        }
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != s.len() {
            f.push("ensemble.subsystems", format!("{s:?} repeats a qubit"));
        }
    }
    if let Some(n) = n_qubits {
        let out_of_range = |q: &usize| *q >= n;
        if subsystems.iter().flatten().any(out_of_range) {
            f.push("ensemble.subsystems", format!("qubit index beyond L = {n}"));
        }
        if let PairSelection::Explicit(p) = &pairs {
            if p.iter().any(|&(_, j)| j >= n) {
                f.push("ensemble.pairs", format!("qubit index beyond L = {n}"));
            }
        }
    }

    // oracle and output
    let od = OracleConfig::default();
    let oracle_cfg = OracleConfig {
        max_qubits: f.size(oracle, "oracle", "max_qubits").unwrap_or(od.max_qubits),
        substep_phase: f.float(oracle, "oracle", "substep_phase").unwrap_or(od.substep_phase),
        propagator: match f.string(oracle, "oracle", "propagator") {
            None => od.propagator,
            Some(s) => Propagator::parse(s).unwrap_or_else(|| {
                f.push("oracle.propagator", format!("unknown propagator {s:?}; use rk4 or chebyshev"));
                od.propagator
            }),
        },
    };
    if oracle_cfg.max_qubits > 30 {
        f.push("oracle.max_qubits", "must be at most 30");
    }
    if !(oracle_cfg.substep_phase > 0.0) {
        f.push("oracle.substep_phase", "must be positive");
    }
    let path = f.string(output, "output", "path").map(str::to_string);
    let precision = f.size(output, "output", "precision").unwrap_or(17);
    if !(1..=17).contains(&precision) {
        f.push("output.precision", format!("must be between 1 and 17, got {precision}"));
    }

    if !f.errors.is_empty() {
        return Err(Error::Config(f.errors));
    }
    Ok(RunConfig {
        h,
        coupling: coupling.unwrap(),
        lattice: lattice_spec.unwrap(),
        initial_state: initial_state.unwrap(),
        integrator,
        ensemble: EnsembleConfig {
            n_traj,
            master_seed,
            observables: Observables {
                pair_axes,
                pairs,
                subsystems,
                single_qubit_entropy,
            },
            n_blocks,
            pair_cap,
            max_subsystem,
            kernel,
        },
        oracle: oracle_cfg,
        output: OutputConfig { path, precision },
    })
}

fn parse_angles(f: &mut Fields, v: &Value, n_qubits: Option<usize>) -> Option<Vec<(f64, f64)>> {
    let field = "initial_state.angles";
    let Value::Array(items) = v else {
        f.push(field, "expected a list of [theta, phi] pairs");
        return None;
    };
    let num = |v: &Value| match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    };
    let mut out = Vec::new();
    for item in items {
        match item.as_array().map(|a| a.as_slice()) {
            Some([t, p]) => match (num(t), num(p)) {
                (Some(t), Some(p)) if t.is_finite() && p.is_finite() => out.push((t, p)),
                _ => {
                    f.push(field, "angles must be finite numbers");
                    return None;
                }
            },
            _ => {
                f.push(field, "each entry must be a [theta, phi] pair");
                return None;
            }
        }
    }
    if let Some(n) = n_qubits {
        if out.len() != n {
            f.push(field, format!("{} pairs given for L = {n}", out.len()));
            return None;
        }
    }
    Some(out)
}

/// Parameter grid of a sweep: every combination of `k`, `eta` and initial
/// state. Absent lists fall back to the base config's value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub k: Vec<usize>,
    pub eta: Vec<f64>,
    pub initial_states: Vec<StatePreset>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.k.len() * self.eta.len() * self.initial_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads a grid file with optional lists `k`, `eta` and `initial_state`.
pub fn parse_grid(text: &str, base: &RunConfig) -> Result<SweepGrid> {
    let doc = parse_table(text)?;
    let mut f = Fields { errors: Vec::new() };
    for key in doc.keys() {
        if !["k", "eta", "initial_state"].contains(&key.as_str()) {
            f.push(&format!("grid.{key}"), "unknown key");
        }
    }
    let base_k = match base.lattice {
        LatticeSpec::Chain1d { k, .. } => Some(k),
        _ => None,
    };
    let k = match doc.get("k") {
        None => base_k.into_iter().collect(),
        Some(v) => {
            let ks = f.index_list(v, "grid.k").unwrap_or_default();
            match base.lattice {
                LatticeSpec::Chain1d { n_qubits, .. } => {
                    if let Some(bad) = ks.iter().find(|&&k| k < 1 || k >= n_qubits) {
                        f.push("grid.k", format!("k = {bad} outside [1, {}]", n_qubits - 1));
                    }
                }
                _ => f.push("grid.k", "k sweeps need a chain1d lattice"),
            }
            ks
        }
    };
    let eta = match doc.get("eta") {
        None => match base.coupling {
            Coupling::Eta(e) => vec![e],
            Coupling::J(_) => {
                f.push("grid.eta", "required when the base config gives J");
                Vec::new()
            }
        },
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|v| match v {
                Value::Float(x) => Some(*x),
                Value::Integer(i) => Some(*i as f64),
                _ => {
                    f.push("grid.eta", "expected numbers");
                    None
                }
            })
            .collect(),
        Some(_) => {
            f.push("grid.eta", "expected a list of numbers");
            Vec::new()
        }
    };
    let initial_states = match doc.get("initial_state") {
        None => match base.initial_state {
            ProductStateSpec::Preset(p) => vec![p],
            ProductStateSpec::Angles(_) => {
                f.push("grid.initial_state", "required when the base config lists angles");
                Vec::new()
            }
        },
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|v| {
                let p = v.as_str().and_then(StatePreset::parse);
                if p.is_none() {
                    f.push("grid.initial_state", format!("unknown preset {v}"));
                }
                p
            })
            .collect(),
        Some(_) => {
            f.push("grid.initial_state", "expected a list of preset names");
            Vec::new()
        }
    };
    if !f.errors.is_empty() {
        return Err(Error::Config(f.errors));
    }
    Ok(SweepGrid { k, eta, initial_states })
}
