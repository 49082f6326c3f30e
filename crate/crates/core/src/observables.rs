//! Observable time series shared by the PSA, mean-field and exact paths.

use crate::density::qubit_entropy_from_norm;
use crate::dynamics::{norm3, BlochConfig, TimeSeries};
use crate::ensemble::{Axis, EnsembleResult, Observables};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    /// Per-qubit Bloch vectors (ensemble means for PSA).
    pub bloch: Vec<BlochConfig>,
    /// `σ²_O` / `Σ²_O` per requested axis.
    pub fluctuations: Vec<(Axis, Vec<f64>)>,
    /// Subsystem entropies in bits per requested subsystem.
    pub entropies: Vec<(Vec<usize>, Vec<f64>)>,
}

impl ObservableSeries {
    pub fn n_qubits(&self) -> usize {
        self.bloch.first().map_or(0, |b| b.len())
    }

    /// `(1/L) Σ_i o_i(t)`.
    pub fn qubit_averaged(&self, axis: Axis) -> Vec<f64> {
        self.bloch.iter().map(|b| b.mean_axis(axis.index())).collect()
    }

    /// Average single-qubit entropy from the Bloch norms.
    pub fn average_entropy(&self) -> Vec<f64> {
        self.bloch
            .iter()
            .map(|b| b.0.iter().map(|r| qubit_entropy_from_norm(norm3(r))).sum::<f64>() / b.len() as f64)
            .collect()
    }

    pub fn bloch_series(&self) -> TimeSeries<BlochConfig> {
        TimeSeries {
            times: self.times.clone(),
            values: self.bloch.clone(),
        }
    }

    pub fn fluctuation(&self, axis: Axis) -> Option<&[f64]> {
        self.fluctuations.iter().find(|(a, _)| *a == axis).map(|(_, v)| v.as_slice())
    }

    pub fn entropy(&self, subsystem: &[usize]) -> Option<&[f64]> {
        self.entropies.iter().find(|(s, _)| s == subsystem).map(|(_, v)| v.as_slice())
    }
}

impl EnsembleResult {
    /// Collects the estimators accumulated for `obs` into plain series.
    pub fn observable_series(&self, obs: &Observables) -> Result<ObservableSeries> {
        let layout = self.total.layout();
        let mut fluctuations = Vec::new();
        for &axis in &layout.pair_axes {
            fluctuations.push((axis, self.total.pair_fluctuations(axis)?));
        }
        let mut entropies = Vec::new();
        for sub in &obs.subsystems {
            entropies.push((sub.clone(), self.subsystem_entropy_series(sub)?.values));
        }
        Ok(ObservableSeries {
            times: self.times.clone(),
            bloch: self.total.bloch_means()?,
            fluctuations,
            entropies,
        })
    }
}
