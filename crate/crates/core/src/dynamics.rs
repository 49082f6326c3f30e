//! Mean-field equations of motion for Bloch vectors and their fixed-step RK4
//! integration.
//!
//! Time is measured in units of `1/h`: the equations are integrated with the
//! field normalized to one and the coupling replaced by `J/h`.

use crate::error::{Error, Result};
use crate::model::{CouplingGraph, ModelParams};

/// Per-qubit Bloch coordinates `(x, y, z)` of one mean-field trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochConfig(pub Vec<[f64; 3]>);

impl BlochConfig {
    pub fn uniform(n_qubits: usize, r: [f64; 3]) -> Self {
        Self(vec![r; n_qubits])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|r| norm3(r))
    }

    /// Qubit average of one coordinate.
    pub fn mean_axis(&self, axis: usize) -> f64 {
        self.0.iter().map(|r| r[axis]).sum::<f64>() / self.0.len() as f64
    }
}

pub(crate) fn norm3(r: &[f64; 3]) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// Fixed-step integration grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub store_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_final: 10.0,
            store_stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64, store_stride: usize) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            store_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errors.push(crate::error::FieldError::new("integrator.dt", "must be > 0"));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            errors.push(crate::error::FieldError::new(
                "integrator.t_final",
                "must be >= dt",
            ));
        }
        if self.store_stride == 0 {
            errors.push(crate::error::FieldError::new(
                "integrator.store_stride",
                "must be >= 1",
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Step indices at which snapshots are kept: every `store_stride`-th step,
    /// plus the final step.
    pub fn stored_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.store_stride).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        steps
    }

    pub fn stored_times(&self) -> Vec<f64> {
        self.stored_steps()
            .into_iter()
            .map(|s| s as f64 * self.dt)
            .collect()
    }
}

/// Observables sampled on the stored time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub times: Vec<f64>,
    pub values: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> TimeSeries<U> {
        TimeSeries {
            times: self.times.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }
}

/// How the neighbour sums `S_i = Σ_{j ∈ N(i)} x_j` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborKernel {
    /// Windowed prefix sums on k-local chains with `k >= 2`, adjacency
    /// lists otherwise.
    #[default]
    Auto,
    /// Walk the CSR neighbour lists: `O(|E|)` per evaluation.
    Adjacency,
    /// Sliding window over a k-local chain: `O(L)` per evaluation.
    Window,
}

impl NeighborKernel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Self::Auto),
            "adjacency" => Some(Self::Adjacency),
            "window" => Some(Self::Window),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Adjacency => "adjacency",
            Self::Window => "window",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ResolvedKernel {
    Adjacency,
    Window(usize),
}

fn resolve(kernel: NeighborKernel, graph: &CouplingGraph) -> Result<ResolvedKernel> {
    match (kernel, graph.chain_locality()) {
        (NeighborKernel::Adjacency, _) => Ok(ResolvedKernel::Adjacency),
        (NeighborKernel::Window, Some(k)) => Ok(ResolvedKernel::Window(k)),
        (NeighborKernel::Window, None) => Err(Error::Contract(
            "windowed neighbour sums need a k-local chain".into(),
        )),
        (NeighborKernel::Auto, Some(k)) if k >= 2 => Ok(ResolvedKernel::Window(k)),
        (NeighborKernel::Auto, _) => Ok(ResolvedKernel::Adjacency),
    }
}

/// Mean-field flow of the TFIM on a coupling graph, in reduced units.
#[derive(Debug, Clone)]
pub struct MeanFieldSystem<'g> {
    graph: &'g CouplingGraph,
    coupling: f64,
    kernel: ResolvedKernel,
}

impl<'g> MeanFieldSystem<'g> {
    pub fn new(params: &ModelParams, graph: &'g CouplingGraph, kernel: NeighborKernel) -> Result<Self> {
        if params.n_qubits != graph.n_qubits() {
            return Err(Error::Contract(format!(
                "model has {} qubits, graph has {}",
                params.n_qubits,
                graph.n_qubits()
            )));
        }
        Ok(Self {
            graph,
            coupling: params.j_over_h(),
            kernel: resolve(kernel, graph)?,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.graph.n_qubits()
    }

    fn neighbor_sums(&self, state: &[[f64; 3]], sums: &mut [f64], prefix: &mut [f64]) {
        match self.kernel {
            ResolvedKernel::Adjacency => {
                for (i, s) in sums.iter_mut().enumerate() {
                    *s = self.graph.neighbors(i).iter().map(|&j| state[j][0]).sum();
                }
            }
            ResolvedKernel::Window(k) => {
                let n = state.len();
                prefix[0] = 0.0;
                for i in 0..n {
                    prefix[i + 1] = prefix[i] + state[i][0];
                }
                for (i, s) in sums.iter_mut().enumerate() {
                    let lo = i.saturating_sub(k);
                    let hi = (i + k).min(n - 1);
                    // window [lo, i) and (i, hi] kept separate to avoid x_i cancellation
                    *s = (prefix[i] - prefix[lo]) + (prefix[hi + 1] - prefix[i + 1]);
                }
            }
        }
    }

    fn eval(&self, state: &[[f64; 3]], out: &mut [[f64; 3]], sums: &mut [f64], prefix: &mut [f64]) {
        self.neighbor_sums(state, sums, prefix);
        let c = 2.0 * self.coupling;
        for ((d, r), &s) in out.iter_mut().zip(state).zip(sums.iter()) {
            let field = c * s;
            *d = [2.0 * r[1], -2.0 * r[0] + field * r[2], -field * r[1]];
        }
    }

    /// Time derivative of `state` with respect to reduced time `h t`.
    pub fn rhs(&self, state: &BlochConfig) -> Result<BlochConfig> {
        self.check_len(state.len())?;
        let n = state.len();
        let mut out = vec![[0.0; 3]; n];
        let mut sums = vec![0.0; n];
        let mut prefix = vec![0.0; n + 1];
        self.eval(&state.0, &mut out, &mut sums, &mut prefix);
        Ok(BlochConfig(out))
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == self.n_qubits() {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "Bloch configuration has {n} qubits, graph has {}",
                self.n_qubits()
            )))
        }
    }
}

/// Mean-field right-hand side: for every qubit
/// `(ẋ, ẏ, ż) = (2y, -2x + 2(J/h) z S, -2(J/h) y S)` with `S` the sum of `x`
/// over the symmetric neighbourhood.
pub fn mf_rhs(state: &BlochConfig, params: &ModelParams, graph: &CouplingGraph) -> Result<BlochConfig> {
    MeanFieldSystem::new(params, graph, NeighborKernel::Auto)?.rhs(state)
}

/// Classic fourth-order Runge–Kutta with reusable stage buffers.
#[derive(Debug)]
pub struct Rk4<'g> {
    system: MeanFieldSystem<'g>,
    dt: f64,
    k: [Vec<[f64; 3]>; 4],
    stage: Vec<[f64; 3]>,
    sums: Vec<f64>,
    prefix: Vec<f64>,
}

impl<'g> Rk4<'g> {
    pub fn new(system: MeanFieldSystem<'g>, dt: f64) -> Self {
        let n = system.n_qubits();
        let buf = || vec![[0.0; 3]; n];
        Self {
            system,
            dt,
            k: [buf(), buf(), buf(), buf()],
            stage: buf(),
            sums: vec![0.0; n],
            prefix: vec![0.0; n + 1],
        }
    }

    pub fn step(&mut self, state: &mut [[f64; 3]]) {
        let dt = self.dt;
        let [k1, k2, k3, k4] = &mut self.k;
        let sys = &self.system;
        sys.eval(state, k1, &mut self.sums, &mut self.prefix);
        axpy(&mut self.stage, state, 0.5 * dt, k1);
        sys.eval(&self.stage, k2, &mut self.sums, &mut self.prefix);
        axpy(&mut self.stage, state, 0.5 * dt, k2);
        sys.eval(&self.stage, k3, &mut self.sums, &mut self.prefix);
        axpy(&mut self.stage, state, dt, k3);
        sys.eval(&self.stage, k4, &mut self.sums, &mut self.prefix);
        let w = dt / 6.0;
        for q in 0..state.len() {
            for a in 0..3 {
                state[q][a] += w * (k1[q][a] + 2.0 * (k2[q][a] + k3[q][a]) + k4[q][a]);
            }
        }
    }

    /// Integrates `state` in place over the grid of `integ`, calling
    /// `on_store(slot, t, state)` at each stored step (including t = 0).
    pub fn integrate(
        &mut self,
        state: &mut [[f64; 3]],
        integ: &IntegratorConfig,
        mut on_store: impl FnMut(usize, f64, &[[f64; 3]]),
    ) -> Result<()> {
        self.system.check_len(state.len())?;
        let stored = integ.stored_steps();
        on_store(0, 0.0, state);
        let mut slot = 1;
        for step in 1..=integ.n_steps() {
            self.step(state);
            if !state.iter().all(|r| r.iter().all(|v| v.is_finite())) {
                return Err(Error::Divergence {
                    step,
                    time: step as f64 * self.dt,
                    trajectory: None,
                });
            }
            if slot < stored.len() && stored[slot] == step {
                on_store(slot, step as f64 * self.dt, state);
                slot += 1;
            }
        }
        Ok(())
    }
}

fn axpy(out: &mut [[f64; 3]], base: &[[f64; 3]], a: f64, dir: &[[f64; 3]]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = [b[0] + a * d[0], b[1] + a * d[1], b[2] + a * d[2]];
    }
}

/// Integrates one mean-field trajectory and returns the stored snapshots.
pub fn evolve_mf(
    initial: &BlochConfig,
    params: &ModelParams,
    graph: &CouplingGraph,
    integ: &IntegratorConfig,
) -> Result<TimeSeries<BlochConfig>> {
    evolve_mf_with(initial, params, graph, integ, NeighborKernel::Auto)
}

pub fn evolve_mf_with(
    initial: &BlochConfig,
    params: &ModelParams,
    graph: &CouplingGraph,
    integ: &IntegratorConfig,
    kernel: NeighborKernel,
) -> Result<TimeSeries<BlochConfig>> {
    integ.validate()?;
    let mut rk = Rk4::new(MeanFieldSystem::new(params, graph, kernel)?, integ.dt);
    let mut state = initial.0.clone();
    let mut series = TimeSeries {
        times: Vec::new(),
        values: Vec::new(),
    };
    rk.integrate(&mut state, integ, |_, t, s| {
        series.times.push(t);
        series.values.push(BlochConfig(s.to_vec()));
    })?;
    Ok(series)
}

/// Mean-field energy `-h Σ z_i - J Σ_edges x_i x_j`, conserved by the flow.
pub fn mf_energy_functional(state: &BlochConfig, params: &ModelParams, graph: &CouplingGraph) -> f64 {
    let field: f64 = state.0.iter().map(|r| r[2]).sum();
    let bonds: f64 = graph
        .edges()
        .iter()
        .map(|&(i, j)| state.0[i][0] * state.0[j][0])
        .sum();
    -params.h * field - params.j * bonds
}
