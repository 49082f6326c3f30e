//! Exact statevector evolution of the TFIM for small registers.
//!
//! Amplitudes are indexed little-endian: qubit 0 is the least significant
//! bit. The Schrödinger equation is integrated on the same grid as the
//! mean-field dynamics, in the Hadamard-rotated basis where the couplings are
//! diagonal. The default propagator is classic RK4 with each grid step
//! subdivided so that `dt_sub · ‖H‖ ≤ substep_phase`, `‖H‖` being bounded by
//! `h L + |J| |E|`. A Chebyshev expansion jumps directly between stored
//! times, which is much cheaper for large registers.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::density::{von_neumann_entropy_bits, ReducedDensityMatrix, C64};
use crate::dynamics::{BlochConfig, IntegratorConfig, TimeSeries};
use crate::ensemble::{Axis, Observables};
use crate::error::{Error, Result};
use crate::model::{CouplingGraph, ModelParams};
use crate::observables::ObservableSeries;
use crate::sampling::ProductStateSpec;

/// Registers at least this large apply the Hamiltonian in parallel.
const PARALLEL_DIM: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Propagator {
    #[default]
    Rk4,
    Chebyshev,
}

impl Propagator {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rk4" => Some(Self::Rk4),
            "chebyshev" => Some(Self::Chebyshev),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Rk4 => "rk4",
            Self::Chebyshev => "chebyshev",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub max_qubits: usize,
    /// Largest `dt_sub · ‖H‖` of an RK4 substep.
    pub substep_phase: f64,
    pub propagator: Propagator,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_qubits: 14,
            substep_phase: 0.01,
            propagator: Propagator::Rk4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Contract(format!("{n} amplitudes is not a qubit register")));
        }
        Ok(Self {
            n_qubits: n.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Bloch vector of every qubit.
    pub fn bloch(&self) -> BlochConfig {
        BlochConfig((0..self.n_qubits).map(|q| self.qubit_bloch(q)).collect())
    }

    fn qubit_bloch(&self, q: usize) -> [f64; 3] {
        let m = 1usize << q;
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for b in (0..self.amps.len()).filter(|b| b & m == 0) {
            let (a0, a1) = (self.amps[b], self.amps[b | m]);
            let c = a0.conj() * a1;
            x += 2.0 * c.re;
            y += 2.0 * c.im;
            z += a0.norm_sqr() - a1.norm_sqr();
        }
        [x, y, z]
    }
}

fn check_capacity(n_qubits: usize, cfg: &OracleConfig) -> Result<()> {
    if n_qubits > cfg.max_qubits {
        Err(Error::Capacity {
            what: "exact statevector (qubits)",
            requested: n_qubits,
            limit: cfg.max_qubits,
        })
    } else {
        Ok(())
    }
}

/// `⊗_i (cos(θ_i/2)|0⟩ + e^{iφ_i} sin(θ_i/2)|1⟩)`.
pub fn prepare_product_state(spec: &ProductStateSpec, n_qubits: usize, cfg: &OracleConfig) -> Result<StateVector> {
    check_capacity(n_qubits, cfg)?;
    let singles: Vec<[C64; 2]> = spec
        .angles(n_qubits)?
        .into_iter()
        .map(|(t, p)| [C64::new((t / 2.0).cos(), 0.0), C64::from_polar((t / 2.0).sin(), p)])
        .collect();
    let amps = (0..1usize << n_qubits)
        .map(|b| {
            singles
                .iter()
                .enumerate()
                .fold(C64::new(1.0, 0.0), |acc, (q, s)| acc * s[(b >> q) & 1])
        })
        .collect();
    Ok(StateVector { n_qubits, amps })
}

/// Precomputed action of `H = -h Σ Z_i - J Σ_edges X_i X_j`.
#[derive(Debug, Clone)]
struct TfimOperator {
    h: f64,
    j: f64,
    n_qubits: usize,
    edge_masks: Vec<usize>,
}

impl TfimOperator {
    fn new(h: f64, j: f64, graph: &CouplingGraph) -> Self {
        Self {
            h,
            j,
            n_qubits: graph.n_qubits(),
            edge_masks: graph.edges().iter().map(|&(a, b)| (1 << a) | (1 << b)).collect(),
        }
    }

    #[inline]
    fn element(&self, psi: &[C64], b: usize) -> C64 {
        let field = self.n_qubits as f64 - 2.0 * b.count_ones() as f64;
        let flips: C64 = self.edge_masks.iter().map(|&m| psi[b ^ m]).sum();
        psi[b] * (-self.h * field) - flips * self.j
    }

    /// `out = scale · H psi`.
    fn apply_scaled(&self, psi: &[C64], scale: C64, out: &mut [C64]) {
        if psi.len() >= PARALLEL_DIM {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(b, o)| *o = scale * self.element(psi, b));
        } else {
            for (b, o) in out.iter_mut().enumerate() {
                *o = scale * self.element(psi, b);
            }
        }
    }
}

/// Matrix-free `H |ψ⟩` for `H = -h Σ Z_i - J Σ_edges X_i X_j`.
pub fn apply_hamiltonian(psi: &StateVector, h: f64, j: f64, graph: &CouplingGraph) -> Result<StateVector> {
    if psi.n_qubits != graph.n_qubits() {
        return Err(Error::Contract(format!(
            "state has {} qubits, graph has {}",
            psi.n_qubits,
            graph.n_qubits()
        )));
    }
    let op = TfimOperator::new(h, j, graph);
    let mut out = vec![C64::new(0.0, 0.0); psi.amps.len()];
    op.apply_scaled(&psi.amps, C64::new(1.0, 0.0), &mut out);
    Ok(StateVector {
        n_qubits: psi.n_qubits,
        amps: out,
    })
}

/// `⟨ψ|H|ψ⟩` for the physical (unreduced) Hamiltonian.
pub fn exact_energy(psi: &StateVector, params: &ModelParams, graph: &CouplingGraph) -> Result<f64> {
    Ok(psi.inner(&apply_hamiltonian(psi, params.h, params.j, graph)?).re)
}

/// `H` in the Hadamard-rotated basis, in units of `h`: the couplings
/// `-(J/h) Z_i Z_j` are diagonal and the field `-Σ X_i` flips single bits.
struct RotatedTfim {
    n_qubits: usize,
    diagonal: Vec<f64>,
    bound: f64,
}

impl RotatedTfim {
    fn new(j_over_h: f64, graph: &CouplingGraph) -> Self {
        let n = graph.n_qubits();
        let masks: Vec<usize> = graph.edges().iter().map(|&(a, b)| (1 << a) | (1 << b)).collect();
        let n_edges = masks.len() as f64;
        let diagonal = (0..1usize << n)
            .map(|b| {
                let anti = masks.iter().filter(|&&m| (b & m).count_ones() == 1).count() as f64;
                -j_over_h * (n_edges - 2.0 * anti)
            })
            .collect();
        Self {
            n_qubits: n,
            diagonal,
            bound: n as f64 + j_over_h.abs() * n_edges,
        }
    }

    #[inline]
    fn element(&self, psi: &[C64], b: usize) -> C64 {
        let flips: C64 = (0..self.n_qubits).map(|q| psi[b ^ (1 << q)]).sum();
        psi[b] * self.diagonal[b] - flips
    }

    /// `out = scale · H psi + shift · prev`.
    fn apply(&self, psi: &[C64], scale: C64, prev: Option<(&[C64], f64)>, out: &mut [C64]) {
        let f = |b: usize| {
            let v = scale * self.element(psi, b);
            match prev {
                Some((p, s)) => v + p[b] * s,
                None => v,
            }
        };
        if psi.len() >= PARALLEL_DIM {
            out.par_iter_mut().enumerate().for_each(|(b, o)| *o = f(b));
        } else {
            for (b, o) in out.iter_mut().enumerate() {
                *o = f(b);
            }
        }
    }
}

/// In-place `H^{⊗L}` (unitary Walsh–Hadamard transform).
fn hadamard_all(amps: &mut [C64]) {
    let n = amps.len();
    let s = 1.0 / (n as f64).sqrt();
    let mut half = 1;
    while half < n {
        for block in amps.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
    for a in amps {
        *a *= s;
    }
}

/// `J_0(x), …, J_n(x)` for `x > 0` by Miller's backward recurrence.
fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let start = n.max(x as usize) + 40 + (8.0 * x.cbrt()) as usize;
    let start = start + start % 2;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in &mut vals[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    // J_0 + 2 Σ J_{2k} = 1
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    vals.truncate(n + 1);
    vals.iter().map(|v| v / norm).collect()
}

struct Workspace {
    a: Vec<C64>,
    b: Vec<C64>,
    c: Vec<C64>,
    d: Vec<C64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self {
            a: z.clone(),
            b: z.clone(),
            c: z.clone(),
            d: z,
        }
    }
}

fn rk4_advance(op: &RotatedTfim, psi: &mut [C64], span: f64, max_phase: f64, w: &mut Workspace) {
    let substeps = (span * op.bound / max_phase).ceil().max(1.0) as usize;
    let h = span / substeps as f64;
    let minus_i = C64::new(0.0, -1.0);
    let Workspace { a: k, b: stage, c: acc, .. } = w;
    for _ in 0..substeps {
        op.apply(psi, minus_i, None, k);
        for i in 0..psi.len() {
            acc[i] = k[i];
            stage[i] = psi[i] + k[i] * (0.5 * h);
        }
        op.apply(stage, minus_i, None, k);
        for i in 0..psi.len() {
            acc[i] += k[i] * 2.0;
            stage[i] = psi[i] + k[i] * (0.5 * h);
        }
        op.apply(stage, minus_i, None, k);
        for i in 0..psi.len() {
            acc[i] += k[i] * 2.0;
            stage[i] = psi[i] + k[i] * h;
        }
        op.apply(stage, minus_i, None, k);
        for i in 0..psi.len() {
            psi[i] += (acc[i] + k[i]) * (h / 6.0);
        }
    }
}

/// `e^{-iH span} ψ` by a Chebyshev expansion on the spectral interval
/// `[-bound, bound]`, truncated once the Bessel weights drop below 1e-16.
fn chebyshev_advance(op: &RotatedTfim, psi: &mut [C64], span: f64, w: &mut Workspace) {
    let scale = op.bound * 1.01;
    let x = scale * span;
    let max_terms = (x + 20.0 * x.cbrt() + 40.0) as usize;
    let weights = bessel_j_sequence(x, max_terms);
    let n_terms = (0..weights.len())
        .rev()
        .find(|&k| weights[k].abs() > 1e-16)
        .map_or(1, |k| k + 1)
        .max(2);
    let inv = C64::new(1.0 / scale, 0.0);
    let Workspace { a: prev, b: cur, c: next, d: out } = w;
    prev.copy_from_slice(psi);
    op.apply(psi, inv, None, cur);
    let mut phase = C64::new(0.0, -1.0);
    for i in 0..psi.len() {
        out[i] = prev[i] * weights[0] + cur[i] * (phase * 2.0 * weights[1]);
    }
    for &wk in &weights[2..n_terms] {
        phase *= C64::new(0.0, -1.0);
        op.apply(cur, inv * 2.0, Some((prev, -1.0)), next);
        let coef = phase * 2.0 * wk;
        for i in 0..psi.len() {
            out[i] += next[i] * coef;
        }
        std::mem::swap(prev, cur);
        std::mem::swap(cur, next);
    }
    psi.copy_from_slice(out);
}

/// Drives the exact evolution, calling `on_store(slot, t, ψ)` at every stored
/// grid time. Time is in units of `1/h`.
pub fn evolve_exact_with(
    psi0: &StateVector,
    params: &ModelParams,
    graph: &CouplingGraph,
    integ: &IntegratorConfig,
    cfg: &OracleConfig,
    mut on_store: impl FnMut(usize, f64, &StateVector) -> Result<()>,
) -> Result<()> {
    integ.validate()?;
    check_capacity(psi0.n_qubits, cfg)?;
    if psi0.n_qubits != graph.n_qubits() {
        return Err(Error::Contract("state and graph sizes differ".into()));
    }
    let op = RotatedTfim::new(params.j_over_h(), graph);
    let mut work = Workspace::new(psi0.amps.len());
    let mut rotated = psi0.amps.clone();
    hadamard_all(&mut rotated);
    let mut snapshot = psi0.clone();
    let mut warned = false;

    on_store(0, 0.0, psi0)?;
    let stored = integ.stored_steps();
    let mut advance = |rotated: &mut Vec<C64>, steps: usize| match cfg.propagator {
        Propagator::Rk4 => {
            for _ in 0..steps {
                rk4_advance(&op, rotated, integ.dt, cfg.substep_phase, &mut work);
            }
        }
        Propagator::Chebyshev => chebyshev_advance(&op, rotated, steps as f64 * integ.dt, &mut work),
    };
    for (slot, pair) in stored.windows(2).enumerate() {
        let step = pair[1];
        match cfg.propagator {
            Propagator::Rk4 => {
                // renormalize per grid step, matching the RK4 step contract
                for _ in pair[0]..step {
                    advance(&mut rotated, 1);
                    check_norm(&mut rotated, step, integ.dt, &mut warned)?;
                }
            }
            Propagator::Chebyshev => {
                advance(&mut rotated, step - pair[0]);
                check_norm(&mut rotated, step, integ.dt, &mut warned)?;
            }
        }
        snapshot.amps.copy_from_slice(&rotated);
        hadamard_all(&mut snapshot.amps);
        on_store(slot + 1, step as f64 * integ.dt, &snapshot)?;
    }
    Ok(())
}

fn check_norm(amps: &mut [C64], step: usize, dt: f64, warned: &mut bool) -> Result<()> {
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::Divergence {
            step,
            time: step as f64 * dt,
            trajectory: None,
        });
    }
    if (norm - 1.0).abs() > 1e-9 {
        if !*warned {
            log::warn!("exact evolution: norm drift {:.3e} at step {step}, renormalizing", norm - 1.0);
            *warned = true;
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
    }
    Ok(())
}

/// Exact evolution keeping every stored state.
pub fn exact_evolve(
    psi0: &StateVector,
    params: &ModelParams,
    graph: &CouplingGraph,
    integ: &IntegratorConfig,
    cfg: &OracleConfig,
) -> Result<TimeSeries<StateVector>> {
    let mut series = TimeSeries {
        times: Vec::new(),
        values: Vec::new(),
    };
    evolve_exact_with(psi0, params, graph, integ, cfg, |_, t, psi| {
        series.times.push(t);
        series.values.push(psi.clone());
        Ok(())
    })?;
    Ok(series)
}

/// Exact evolution reporting only the observables requested in `obs`.
pub fn exact_observables(
    psi0: &StateVector,
    params: &ModelParams,
    graph: &CouplingGraph,
    integ: &IntegratorConfig,
    cfg: &OracleConfig,
    obs: &Observables,
) -> Result<ObservableSeries> {
    let mut out = ObservableSeries {
        times: Vec::new(),
        bloch: Vec::new(),
        fluctuations: obs.pair_axes.iter().map(|&a| (a, Vec::new())).collect(),
        entropies: obs.subsystems.iter().map(|s| (s.clone(), Vec::new())).collect(),
    };
    evolve_exact_with(psi0, params, graph, integ, cfg, |_, t, psi| {
        out.times.push(t);
        let bloch = psi.bloch();
        for (axis, values) in &mut out.fluctuations {
            values.push(pair_fluctuations_with(psi, *axis, &bloch));
        }
        for (sub, values) in &mut out.entropies {
            values.push(exact_entropy(psi, sub)?);
        }
        out.bloch.push(bloch);
        Ok(())
    })?;
    Ok(out)
}

/// A product of single-qubit Paulis, e.g. `"X0 Z3"` or dense `"XIZI"`
/// (character `k` acts on qubit `k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliString {
    ops: Vec<(usize, Axis)>,
}

impl PauliString {
    pub fn new(ops: Vec<(usize, Axis)>) -> Result<Self> {
        let mut seen: Vec<usize> = ops.iter().map(|o| o.0).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::PauliParse {
                input: format!("{ops:?}"),
                reason: "qubit repeated".into(),
            });
        }
        Ok(Self { ops })
    }

    pub fn parse(input: &str) -> Result<Self> {
        let err = |reason: &str| Error::PauliParse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = input.trim();
        if trimmed.is_empty() {
            return Err(err("empty string"));
        }
        let mut ops = Vec::new();
        if trimmed.chars().all(|c| "IXYZ".contains(c)) {
            for (q, c) in trimmed.chars().enumerate() {
                if c != 'I' {
                    ops.push((q, Axis::parse(&c.to_string()).unwrap()));
                }
            }
        } else {
            for token in trimmed.split(|c: char| c.is_whitespace() || c == '*').filter(|t| !t.is_empty()) {
                let mut chars = token.chars();
                let letter = chars.next().unwrap();
                let axis = match letter {
                    'X' | 'Y' | 'Z' => Axis::parse(&letter.to_string()).unwrap(),
                    'I' => continue,
                    _ => return Err(err(&format!("unknown Pauli {letter:?}"))),
                };
                let idx: usize = chars
                    .as_str()
                    .parse()
                    .map_err(|_| err(&format!("missing or bad qubit index in {token:?}")))?;
                ops.push((idx, axis));
            }
        }
        Self::new(ops).map_err(|_| err("qubit repeated"))
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.ops.iter().map(|o| o.0).max()
    }
}

/// `⟨ψ|P|ψ⟩` for a Pauli string `P`.
pub fn exact_expectation(psi: &StateVector, pauli: &PauliString) -> Result<f64> {
    if pauli.max_qubit().is_some_and(|q| q >= psi.n_qubits) {
        return Err(Error::PauliParse {
            input: format!("{pauli:?}"),
            reason: format!("qubit index beyond register of {}", psi.n_qubits),
        });
    }
    let (mut flip, mut zmask, mut ymask) = (0usize, 0usize, 0usize);
    for &(q, a) in &pauli.ops {
        match a {
            Axis::X => flip |= 1 << q,
            Axis::Y => {
                flip |= 1 << q;
                ymask |= 1 << q;
            }
            Axis::Z => zmask |= 1 << q,
        }
    }
    let n_y = ymask.count_ones();
    // Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
    let y_phase = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)][(n_y % 4) as usize];
    let mut total = C64::new(0.0, 0.0);
    for (b, a) in psi.amps.iter().enumerate() {
        let sign = if ((b & zmask).count_ones() + (b & ymask).count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        total += psi.amps[b ^ flip].conj() * a * sign;
    }
    Ok((total * y_phase).re)
}

fn pair_fluctuations_with(psi: &StateVector, axis: Axis, bloch: &BlochConfig) -> f64 {
    let l = psi.n_qubits;
    let mut total = 0.0;
    for i in 0..l {
        for j in (i + 1)..l {
            let p = PauliString { ops: vec![(i, axis), (j, axis)] };
            let oo = exact_expectation(psi, &p).expect("indices in range");
            total += oo - bloch.0[i][axis.index()] * bloch.0[j][axis.index()];
        }
    }
    total / l as f64
}

/// `σ²_O = (1/L) Σ_{i<j} (⟨O_i O_j⟩ - ⟨O_i⟩⟨O_j⟩)`.
pub fn exact_pair_fluctuations(psi: &StateVector, axis: Axis) -> f64 {
    pair_fluctuations_with(psi, axis, &psi.bloch())
}

/// Partial trace onto `subsystem` (at most 10 qubits). Bit `k` of the reduced
/// index belongs to `subsystem[k]`.
pub fn exact_reduced_density(psi: &StateVector, subsystem: &[usize]) -> Result<ReducedDensityMatrix> {
    if subsystem.len() > 10 {
        return Err(Error::Capacity {
            what: "partial trace (subsystem qubits)",
            requested: subsystem.len(),
            limit: 10,
        });
    }
    let mut sorted = subsystem.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != subsystem.len() || subsystem.iter().any(|&q| q >= psi.n_qubits) {
        return Err(Error::Contract(format!("invalid subsystem {subsystem:?}")));
    }
    let m = subsystem.len();
    let dim = 1usize << m;
    let sub_mask: usize = subsystem.iter().map(|&q| 1 << q).sum();
    let rest: Vec<usize> = (0..psi.n_qubits).filter(|q| sub_mask & (1 << q) == 0).collect();
    let embed = |a: usize| -> usize { subsystem.iter().enumerate().map(|(k, &q)| ((a >> k) & 1) << q).sum() };
    let embedded: Vec<usize> = (0..dim).map(embed).collect();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for r in 0..(1usize << rest.len()) {
        let base: usize = rest.iter().enumerate().map(|(k, &q)| ((r >> k) & 1) << q).sum();
        for a in 0..dim {
            let va = psi.amps[base | embedded[a]];
            if va == C64::new(0.0, 0.0) {
                continue;
            }
            for a2 in 0..dim {
                rho[(a, a2)] += va * psi.amps[base | embedded[a2]].conj();
            }
        }
    }
    Ok(ReducedDensityMatrix {
        subsystem: subsystem.to_vec(),
        matrix: rho,
    })
}

/// Von Neumann entropy (bits) of the reduced state on `subsystem`.
pub fn exact_entropy(psi: &StateVector, subsystem: &[usize]) -> Result<f64> {
    Ok(von_neumann_entropy_bits(&exact_reduced_density(psi, subsystem)?.matrix))
}
