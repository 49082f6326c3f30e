//! Product initial states and their biased Rademacher sampling.
//!
//! Each Bloch coordinate of each qubit is drawn independently as `±1` with
//! the Born-rule probability of the corresponding Pauli outcome, so every
//! moment of `X_i`, `Y_i`, `Z_i` is reproduced on average while every sampled
//! vector has norm `√3`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::BlochConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatePreset {
    /// `|+⟩^L`
    PlusAll,
    /// `|0⟩^L`
    ZeroAll,
    /// `|01⟩^{L/2}`: even qubits in `|0⟩`, odd qubits in `|1⟩`.
    Neel,
}

impl StatePreset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plus_all" => Some(Self::PlusAll),
            "zero_all" => Some(Self::ZeroAll),
            "neel" => Some(Self::Neel),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PlusAll => "plus_all",
            Self::ZeroAll => "zero_all",
            Self::Neel => "neel",
        }
    }
}

/// A product state `⊗_i (cos(θ_i/2)|0⟩ + e^{iφ_i} sin(θ_i/2)|1⟩)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProductStateSpec {
    Preset(StatePreset),
    /// Explicit `(θ, φ)` per qubit.
    Angles(Vec<(f64, f64)>),
}

impl ProductStateSpec {
    pub fn angles(&self, n_qubits: usize) -> Result<Vec<(f64, f64)>> {
        match self {
            Self::Preset(StatePreset::PlusAll) => Ok(vec![(FRAC_PI_2, 0.0); n_qubits]),
            Self::Preset(StatePreset::ZeroAll) => Ok(vec![(0.0, 0.0); n_qubits]),
            Self::Preset(StatePreset::Neel) => {
                if n_qubits % 2 != 0 {
                    return Err(Error::config(
                        "initial_state.preset",
                        format!("neel state requires even L, got {n_qubits}"),
                    ));
                }
                Ok((0..n_qubits)
                    .map(|i| if i % 2 == 0 { (0.0, 0.0) } else { (PI, 0.0) })
                    .collect())
            }
            Self::Angles(a) => {
                if a.len() != n_qubits {
                    return Err(Error::config(
                        "initial_state.angles",
                        format!("{} angle pairs given for {n_qubits} qubits", a.len()),
                    ));
                }
                Ok(a.clone())
            }
        }
    }

    /// Exact Bloch vectors of the state.
    pub fn bloch(&self, n_qubits: usize) -> Result<BlochConfig> {
        Ok(BlochConfig(
            self.angles(n_qubits)?
                .into_iter()
                .map(|(t, p)| bloch_of_pure_state(t, p))
                .collect(),
        ))
    }

    pub fn label(&self) -> String {
        match self {
            Self::Preset(p) => p.name().to_string(),
            Self::Angles(_) => "angles".to_string(),
        }
    }
}

/// `(cos φ sin θ, sin φ sin θ, cos θ)`.
pub fn bloch_of_pure_state(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [cp * st, sp * st, ct]
}

/// Born probabilities `P(o = +1) = (1 + ⟨O⟩)/2` for `O = X, Y, Z`.
pub fn born_probabilities(bloch: [f64; 3]) -> Result<[f64; 3]> {
    let norm = crate::dynamics::norm3(&bloch);
    if !(norm <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "Bloch vector norm {norm} exceeds 1: not a single-qubit state"
        )));
    }
    Ok(bloch.map(|o| (0.5 * (1.0 + o)).clamp(0.0, 1.0)))
}

/// Identifies the random stream of one trajectory. The stream depends only on
/// `(master_seed, trajectory_index)`, never on which thread draws it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub trajectory_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        Self {
            master_seed,
            trajectory_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trajectory_index);
        rng
    }
}

/// Precomputed Born probabilities for repeated sampling of one product state.
#[derive(Debug, Clone)]
pub struct InitialSampler {
    probs: Vec<[f64; 3]>,
}

impl InitialSampler {
    pub fn new(spec: &ProductStateSpec, n_qubits: usize) -> Result<Self> {
        let probs = spec
            .bloch(n_qubits)?
            .0
            .into_iter()
            .map(born_probabilities)
            .collect::<Result<_>>()?;
        Ok(Self { probs })
    }

    pub fn n_qubits(&self) -> usize {
        self.probs.len()
    }

    /// Draws qubit by qubit, axes in `x, y, z` order.
    pub fn sample_into(&self, stream: RngStream, out: &mut [[f64; 3]]) {
        let mut rng = stream.rng();
        for (r, p) in out.iter_mut().zip(&self.probs) {
            for a in 0..3 {
                let u: f64 = rng.random();
                r[a] = if u < p[a] { 1.0 } else { -1.0 };
            }
        }
    }

    pub fn sample(&self, stream: RngStream) -> BlochConfig {
        let mut out = vec![[0.0; 3]; self.probs.len()];
        self.sample_into(stream, &mut out);
        BlochConfig(out)
    }
}

/// Draws one PSA initial configuration.
pub fn sample_initial_config(
    spec: &ProductStateSpec,
    n_qubits: usize,
    stream: RngStream,
) -> Result<BlochConfig> {
    Ok(InitialSampler::new(spec, n_qubits)?.sample(stream))
}
