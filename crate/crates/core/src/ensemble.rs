//! Trajectory ensembles: sampling, parallel mean-field evolution, and the
//! streaming moment sums behind every PSA estimator.
//!
//! Trajectories are split into a fixed number of contiguous blocks. Each block
//! is folded sequentially in trajectory order and the blocks are merged in
//! block order, so results are bit-identical for any thread count. The
//! per-block accumulators double as jackknife samples.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::density::{
    hermitize_normalize, product_density_into, qubit_entropy_from_norm, ReducedDensityMatrix, C64,
};
use crate::dynamics::{norm3, BlochConfig, IntegratorConfig, MeanFieldSystem, NeighborKernel, Rk4, TimeSeries};
use crate::error::{Error, FieldError, Result};
use crate::model::{CouplingGraph, ModelParams};
use crate::sampling::{InitialSampler, ProductStateSpec, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "x" | "X" => Some(Axis::X),
            "y" | "Y" => Some(Axis::Y),
            "z" | "Z" => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        ["x", "y", "z"][self.index()]
    }
}

/// Which qubit pairs carry second-moment sums.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum PairSelection {
    /// Every `i < j`, as long as `L` stays under the pair cap.
    #[default]
    All,
    Explicit(Vec<(usize, usize)>),
}

/// Observables requested before a run. Per-qubit first moments are always
/// accumulated.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Observables {
    pub pair_axes: Vec<Axis>,
    pub pairs: PairSelection,
    pub subsystems: Vec<Vec<usize>>,
    pub single_qubit_entropy: bool,
}

impl Observables {
    /// Leftmost `m = 1..=max_m` qubit blocks.
    pub fn leftmost_subsystems(max_m: usize) -> Vec<Vec<usize>> {
        (1..=max_m).map(|m| (0..m).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: u64,
    pub master_seed: u64,
    pub observables: Observables,
    /// Number of contiguous trajectory blocks (work units and jackknife
    /// samples); clamped to `n_traj`.
    pub n_blocks: usize,
    /// Largest `L` for which all-pairs accumulation is allowed.
    pub pair_cap: usize,
    /// Largest subsystem for tensor-product accumulation.
    pub max_subsystem: usize,
    pub kernel: NeighborKernel,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_traj: 10_000,
            master_seed: 0,
            observables: Observables::default(),
            n_blocks: 20,
            pair_cap: 64,
            max_subsystem: 3,
            kernel: NeighborKernel::Auto,
        }
    }
}

/// Shape of the sums kept per stored time.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatorLayout {
    pub n_qubits: usize,
    pub n_times: usize,
    pub pairs: Vec<(usize, usize)>,
    pub pair_axes: Vec<Axis>,
    pub subsystems: Vec<Vec<usize>>,
}

impl AccumulatorLayout {
    pub fn new(n_qubits: usize, n_times: usize, obs: &Observables, pair_cap: usize, max_subsystem: usize) -> Result<Self> {
        let mut errors = Vec::new();
        let pairs = if obs.pair_axes.is_empty() {
            Vec::new()
        } else {
            match &obs.pairs {
                PairSelection::All if n_qubits > pair_cap => {
                    log::warn!("all-pairs accumulation disabled: L = {n_qubits} exceeds pair cap {pair_cap}");
                    Vec::new()
                }
                PairSelection::All => (0..n_qubits)
                    .flat_map(|i| ((i + 1)..n_qubits).map(move |j| (i, j)))
                    .collect(),
                PairSelection::Explicit(list) => {
                    let mut v = Vec::with_capacity(list.len());
                    for &(a, b) in list {
                        if a == b || a >= n_qubits || b >= n_qubits {
                            errors.push(FieldError::new("ensemble.pairs", format!("invalid pair ({a}, {b})")));
                        } else {
                            v.push((a.min(b), a.max(b)));
                        }
                    }
                    v.sort_unstable();
                    v.dedup();
                    v
                }
            }
        };
        let pair_axes = if pairs.is_empty() { Vec::new() } else { obs.pair_axes.clone() };
        for sub in &obs.subsystems {
            if sub.is_empty() || sub.len() > max_subsystem {
                errors.push(FieldError::new(
                    "ensemble.subsystems",
                    format!("subsystem {sub:?} must have 1..={max_subsystem} qubits"),
                ));
            }
            let mut sorted = sub.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != sub.len() || sub.iter().any(|&q| q >= n_qubits) {
                errors.push(FieldError::new(
                    "ensemble.subsystems",
                    format!("subsystem {sub:?} has repeated or out-of-range qubits"),
                ));
            }
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        Ok(Self {
            n_qubits,
            n_times,
            pairs,
            pair_axes,
            subsystems: obs.subsystems.clone(),
        })
    }

    fn pair_stride(&self) -> usize {
        self.pairs.len() * self.pair_axes.len()
    }
}

/// Streaming first- and second-moment sums over trajectories. Memory is
/// independent of the trajectory count.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    layout: Arc<AccumulatorLayout>,
    count: u64,
    first: Vec<f64>,
    pair_sums: Vec<f64>,
    tensor_sums: Vec<Vec<C64>>,
}

impl EnsembleAccumulator {
    pub fn new(layout: Arc<AccumulatorLayout>) -> Self {
        let t = layout.n_times;
        let tensor_sums = layout
            .subsystems
            .iter()
            .map(|s| vec![C64::new(0.0, 0.0); t * (1usize << (2 * s.len()))])
            .collect();
        Self {
            first: vec![0.0; t * layout.n_qubits * 3],
            pair_sums: vec![0.0; t * layout.pair_stride()],
            tensor_sums,
            count: 0,
            layout,
        }
    }

    pub fn layout(&self) -> &AccumulatorLayout {
        &self.layout
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Adds one trajectory snapshot at stored time `slot`.
    pub fn fold_snapshot(&mut self, slot: usize, state: &[[f64; 3]], scratch: &mut Vec<C64>) {
        let l = &*self.layout;
        let base = slot * l.n_qubits * 3;
        for (acc, r) in self.first[base..base + 3 * l.n_qubits].chunks_exact_mut(3).zip(state) {
            acc[0] += r[0];
            acc[1] += r[1];
            acc[2] += r[2];
        }
        if !l.pairs.is_empty() {
            let stride = l.pairs.len();
            let base = slot * l.pair_stride();
            for (a, axis) in l.pair_axes.iter().enumerate() {
                let ax = axis.index();
                let row = &mut self.pair_sums[base + a * stride..base + (a + 1) * stride];
                for (s, &(i, j)) in row.iter_mut().zip(&l.pairs) {
                    *s += state[i][ax] * state[j][ax];
                }
            }
        }
        let mut rs = [[0.0; 3]; 8];
        for (sub, sums) in l.subsystems.iter().zip(self.tensor_sums.iter_mut()) {
            let m = sub.len();
            let block = 1usize << (2 * m);
            for (dst, &q) in rs.iter_mut().zip(sub) {
                *dst = state[q];
            }
            scratch.resize(block, C64::new(0.0, 0.0));
            if m <= rs.len() {
                product_density_into(&rs[..m], scratch);
            } else {
                let owned: Vec<[f64; 3]> = sub.iter().map(|&q| state[q]).collect();
                product_density_into(&owned, scratch);
            }
            for (s, v) in sums[slot * block..(slot + 1) * block].iter_mut().zip(scratch.iter()) {
                *s += v;
            }
        }
    }

    pub fn finish_trajectory(&mut self) {
        self.count += 1;
    }

    /// Adds another accumulator with the same layout.
    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Contract("merging accumulators with different layouts".into()));
        }
        self.count += other.count;
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.pair_sums.iter_mut().zip(&other.pair_sums) {
            *a += b;
        }
        for (sa, sb) in self.tensor_sums.iter_mut().zip(&other.tensor_sums) {
            for (a, b) in sa.iter_mut().zip(sb) {
                *a += b;
            }
        }
        Ok(())
    }

    fn inv_count(&self) -> Result<f64> {
        if self.count == 0 {
            Err(Error::Query("accumulator holds no trajectories".into()))
        } else {
            Ok(1.0 / self.count as f64)
        }
    }

    /// Trajectory-averaged Bloch vector of one qubit.
    pub fn mean_bloch(&self, slot: usize, qubit: usize) -> Result<[f64; 3]> {
        let w = self.inv_count()?;
        let i = (slot * self.layout.n_qubits + qubit) * 3;
        Ok([self.first[i] * w, self.first[i + 1] * w, self.first[i + 2] * w])
    }

    pub fn bloch_means_at(&self, slot: usize) -> Result<BlochConfig> {
        (0..self.layout.n_qubits)
            .map(|q| self.mean_bloch(slot, q))
            .collect::<Result<Vec<_>>>()
            .map(BlochConfig)
    }

    pub fn bloch_means(&self) -> Result<Vec<BlochConfig>> {
        (0..self.layout.n_times).map(|s| self.bloch_means_at(s)).collect()
    }

    /// `(1/L) Σ_i ō_i` at every stored time.
    pub fn qubit_averaged(&self, axis: Axis) -> Result<Vec<f64>> {
        let w = self.inv_count()?;
        let l = self.layout.n_qubits;
        Ok((0..self.layout.n_times)
            .map(|s| {
                let row = &self.first[s * l * 3..(s + 1) * l * 3];
                row.iter().skip(axis.index()).step_by(3).sum::<f64>() * w / l as f64
            })
            .collect())
    }

    /// `Σ²_O(t) = (1/L) Σ_{pairs} (mean(o_i o_j) - mean(o_i) mean(o_j))`.
    pub fn pair_fluctuations(&self, axis: Axis) -> Result<Vec<f64>> {
        let l = &*self.layout;
        let a = l
            .pair_axes
            .iter()
            .position(|&x| x == axis)
            .ok_or_else(|| Error::Query(format!("pair products for axis {} were not accumulated", axis.name())))?;
        let w = self.inv_count()?;
        let stride = l.pairs.len();
        Ok((0..l.n_times)
            .map(|s| {
                let row = &self.pair_sums[s * l.pair_stride() + a * stride..][..stride];
                let mean = |q: usize| self.first[(s * l.n_qubits + q) * 3 + axis.index()] * w;
                row.iter()
                    .zip(&l.pairs)
                    .map(|(&sum, &(i, j))| sum * w - mean(i) * mean(j))
                    .sum::<f64>()
                    / l.n_qubits as f64
            })
            .collect())
    }

    fn subsystem_index(&self, subsystem: &[usize]) -> Result<usize> {
        self.layout
            .subsystems
            .iter()
            .position(|s| s == subsystem)
            .ok_or_else(|| Error::Query(format!("subsystem {subsystem:?} was not accumulated")))
    }

    /// Trajectory mean of `⊗_{i∈I} (1 + r_i·σ)/2`, Hermitized and trace
    /// normalized.
    pub fn reduced_density_matrix(&self, subsystem: &[usize], slot: usize) -> Result<ReducedDensityMatrix> {
        let w = self.inv_count()?;
        let idx = self.subsystem_index(subsystem)?;
        let dim = 1usize << subsystem.len();
        let block = dim * dim;
        let data: Vec<C64> = self.tensor_sums[idx][slot * block..(slot + 1) * block]
            .iter()
            .map(|v| v * w)
            .collect();
        let mut matrix = DMatrix::from_row_slice(dim, dim, &data);
        hermitize_normalize(&mut matrix);
        Ok(ReducedDensityMatrix {
            subsystem: subsystem.to_vec(),
            matrix,
        })
    }

    pub fn subsystem_entropy(&self, subsystem: &[usize], slot: usize) -> Result<f64> {
        Ok(self.reduced_density_matrix(subsystem, slot)?.entropy_bits())
    }

    pub fn single_qubit_entropy(&self, qubit: usize, slot: usize) -> Result<f64> {
        Ok(qubit_entropy_from_norm(norm3(&self.mean_bloch(slot, qubit)?)))
    }

    /// `(1/L) Σ_i S_i` at one stored time.
    pub fn average_entropy(&self, slot: usize) -> Result<f64> {
        let l = self.layout.n_qubits;
        let mut total = 0.0;
        for q in 0..l {
            total += self.single_qubit_entropy(q, slot)?;
        }
        Ok(total / l as f64)
    }

    pub fn average_entropy_series(&self) -> Result<Vec<f64>> {
        (0..self.layout.n_times).map(|s| self.average_entropy(s)).collect()
    }
}

/// Accumulated estimators of a finished run.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub total: EnsembleAccumulator,
    /// Per-block accumulators in trajectory order; empty for single-trajectory
    /// runs.
    pub blocks: Vec<EnsembleAccumulator>,
}

impl EnsembleResult {
    pub fn n_traj(&self) -> u64 {
        self.total.count()
    }

    pub fn bloch_means(&self) -> Result<TimeSeries<BlochConfig>> {
        Ok(TimeSeries {
            times: self.times.clone(),
            values: self.total.bloch_means()?,
        })
    }

    pub fn qubit_averaged_observable(&self, axis: Axis) -> Result<TimeSeries<f64>> {
        self.series(self.total.qubit_averaged(axis)?)
    }

    pub fn pair_fluctuations(&self, axis: Axis) -> Result<TimeSeries<f64>> {
        self.series(self.total.pair_fluctuations(axis)?)
    }

    pub fn reduced_density_matrix(&self, subsystem: &[usize], t: f64) -> Result<ReducedDensityMatrix> {
        self.total.reduced_density_matrix(subsystem, self.slot(t)?)
    }

    pub fn subsystem_entropy(&self, subsystem: &[usize], t: f64) -> Result<f64> {
        self.total.subsystem_entropy(subsystem, self.slot(t)?)
    }

    pub fn subsystem_entropy_series(&self, subsystem: &[usize]) -> Result<TimeSeries<f64>> {
        let v = (0..self.times.len())
            .map(|s| self.total.subsystem_entropy(subsystem, s))
            .collect::<Result<Vec<_>>>()?;
        self.series(v)
    }

    pub fn single_qubit_entropy(&self, qubit: usize, t: f64) -> Result<f64> {
        self.total.single_qubit_entropy(qubit, self.slot(t)?)
    }

    pub fn average_entropy(&self, t: f64) -> Result<f64> {
        self.total.average_entropy(self.slot(t)?)
    }

    pub fn average_entropy_series(&self) -> Result<TimeSeries<f64>> {
        self.series(self.total.average_entropy_series()?)
    }

    /// Index of the stored time closest to `t` (within half a grid spacing).
    pub fn slot(&self, t: f64) -> Result<usize> {
        let (idx, dist) = self
            .times
            .iter()
            .enumerate()
            .map(|(i, &s)| (i, (s - t).abs()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or_else(|| Error::Query("empty time grid".into()))?;
        let spacing = if self.times.len() > 1 { self.times[1] - self.times[0] } else { 0.0 };
        if dist > 0.5 * spacing + 1e-9 {
            return Err(Error::Query(format!("t = {t} is not on the stored grid")));
        }
        Ok(idx)
    }

    fn series(&self, values: Vec<f64>) -> Result<TimeSeries<f64>> {
        Ok(TimeSeries {
            times: self.times.clone(),
            values,
        })
    }

    /// Delete-one-block jackknife of a vector-valued estimator: returns the
    /// full-sample estimate and its standard error, elementwise.
    pub fn jackknife<F>(&self, estimator: F) -> Result<(Vec<f64>, Vec<f64>)>
    where
        F: Fn(&EnsembleAccumulator) -> Result<Vec<f64>>,
    {
        let b = self.blocks.len();
        if b < 2 {
            return Err(Error::Query("jackknife needs at least two trajectory blocks".into()));
        }
        let estimate = estimator(&self.total)?;
        let mut leave_out = Vec::with_capacity(b);
        for skip in 0..b {
            let mut acc = EnsembleAccumulator::new(self.total.layout.clone());
            for (i, block) in self.blocks.iter().enumerate() {
                if i != skip {
                    acc.merge(block)?;
                }
            }
            leave_out.push(estimator(&acc)?);
        }
        let bf = b as f64;
        let se = (0..estimate.len())
            .map(|k| {
                let mean = leave_out.iter().map(|v| v[k]).sum::<f64>() / bf;
                let ss: f64 = leave_out.iter().map(|v| (v[k] - mean).powi(2)).sum();
                ((bf - 1.0) / bf * ss).sqrt()
            })
            .collect();
        Ok((estimate, se))
    }
}

/// Everything needed to evolve one ensemble.
#[derive(Debug, Clone, Copy)]
pub struct PsaProblem<'a> {
    pub model: &'a ModelParams,
    pub graph: &'a CouplingGraph,
    pub state: &'a ProductStateSpec,
    pub integ: &'a IntegratorConfig,
    pub ensemble: &'a EnsembleConfig,
}

impl<'a> PsaProblem<'a> {
    pub fn layout(&self) -> Result<Arc<AccumulatorLayout>> {
        let cfg = self.ensemble;
        AccumulatorLayout::new(
            self.graph.n_qubits(),
            self.integ.stored_steps().len(),
            &cfg.observables,
            cfg.pair_cap,
            cfg.max_subsystem,
        )
        .map(Arc::new)
    }

    /// Folds trajectories `range` sequentially, in index order.
    pub fn accumulate(&self, range: Range<u64>) -> Result<EnsembleAccumulator> {
        self.accumulate_with(self.layout()?, &InitialSampler::new(self.state, self.graph.n_qubits())?, range)
    }

    fn accumulate_with(
        &self,
        layout: Arc<AccumulatorLayout>,
        sampler: &InitialSampler,
        range: Range<u64>,
    ) -> Result<EnsembleAccumulator> {
        let system = MeanFieldSystem::new(self.model, self.graph, self.ensemble.kernel)?;
        let mut rk = Rk4::new(system, self.integ.dt);
        let mut acc = EnsembleAccumulator::new(layout);
        let mut state = vec![[0.0; 3]; self.graph.n_qubits()];
        let mut scratch = Vec::new();
        let seed = self.ensemble.master_seed;
        for n in range {
            sampler.sample_into(RngStream::new(seed, n), &mut state);
            rk.integrate(&mut state, self.integ, |slot, _, s| acc.fold_snapshot(slot, s, &mut scratch))
                .map_err(|e| match e {
                    Error::Divergence { step, time, .. } => Error::Divergence {
                        step,
                        time,
                        trajectory: Some((n, seed)),
                    },
                    other => other,
                })?;
            acc.finish_trajectory();
        }
        Ok(acc)
    }
}

/// Contiguous trajectory ranges of the block decomposition.
pub fn block_ranges(n_traj: u64, n_blocks: usize) -> Vec<Range<u64>> {
    let b = (n_blocks.max(1) as u64).min(n_traj.max(1));
    (0..b)
        .map(|i| (i * n_traj / b)..((i + 1) * n_traj / b))
        .collect()
}

/// Runs the phase-space approximation: samples `n_traj` initial
/// configurations, evolves each with the mean-field flow and accumulates
/// the requested moments. Uses the ambient rayon pool.
pub fn run_psa(
    model: &ModelParams,
    graph: &CouplingGraph,
    state: &ProductStateSpec,
    integ: &IntegratorConfig,
    ensemble: &EnsembleConfig,
) -> Result<EnsembleResult> {
    integ.validate()?;
    if ensemble.n_traj == 0 {
        return Err(Error::config("ensemble.n_traj", "must be >= 1"));
    }
    let problem = PsaProblem {
        model,
        graph,
        state,
        integ,
        ensemble,
    };
    let layout = problem.layout()?;
    let sampler = InitialSampler::new(state, graph.n_qubits())?;
    let blocks = block_ranges(ensemble.n_traj, ensemble.n_blocks)
        .into_par_iter()
        .map(|r| problem.accumulate_with(layout.clone(), &sampler, r))
        .collect::<Result<Vec<_>>>()?;
    let mut total = EnsembleAccumulator::new(layout);
    for b in &blocks {
        total.merge(b)?;
    }
    Ok(EnsembleResult {
        times: integ.stored_times(),
        total,
        blocks: if blocks.len() > 1 { blocks } else { Vec::new() },
    })
}

/// Plain mean-field evolution from the exact initial Bloch vectors, reported
/// through the same estimators as a one-trajectory ensemble.
pub fn run_mean_field(
    model: &ModelParams,
    graph: &CouplingGraph,
    state: &ProductStateSpec,
    integ: &IntegratorConfig,
    ensemble: &EnsembleConfig,
) -> Result<EnsembleResult> {
    integ.validate()?;
    let problem = PsaProblem {
        model,
        graph,
        state,
        integ,
        ensemble,
    };
    let layout = problem.layout()?;
    let mut rk = Rk4::new(MeanFieldSystem::new(model, graph, ensemble.kernel)?, integ.dt);
    let mut acc = EnsembleAccumulator::new(layout);
    let mut current = state.bloch(graph.n_qubits())?.0;
    let mut scratch = Vec::new();
    rk.integrate(&mut current, integ, |slot, _, s| acc.fold_snapshot(slot, s, &mut scratch))?;
    acc.finish_trajectory();
    Ok(EnsembleResult {
        times: integ.stored_times(),
        total: acc,
        blocks: Vec::new(),
    })
}
