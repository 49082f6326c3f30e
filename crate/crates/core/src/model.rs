//! Lattices, coupling graphs and the k-local transverse-field Ising model.
//!
//! The Hamiltonian is `H = -h Σ_i Z_i - J Σ_{(i,j) ∈ E} X_i X_j` with every
//! coupled pair counted once. All lattices use open boundaries.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Geometry of the qubit register. Boundaries are always open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeSpec {
    /// 1D chain where every pair at distance `<= k` is coupled.
    Chain1d { n_qubits: usize, k: usize },
    /// Nearest-neighbour square lattice.
    Grid2d { nx: usize, ny: usize },
    /// Nearest-neighbour cubic lattice.
    Grid3d { nx: usize, ny: usize, nz: usize },
}

impl LatticeSpec {
    pub fn n_qubits(&self) -> usize {
        match *self {
            LatticeSpec::Chain1d { n_qubits, .. } => n_qubits,
            LatticeSpec::Grid2d { nx, ny } => nx * ny,
            LatticeSpec::Grid3d { nx, ny, nz } => nx * ny * nz,
        }
    }

    /// Locality radius; grids are strictly nearest neighbour.
    pub fn locality(&self) -> usize {
        match *self {
            LatticeSpec::Chain1d { k, .. } => k,
            _ => 1,
        }
    }
}

/// Undirected interaction graph. Edges are stored once with `i < j`; the
/// neighbour lists hold the symmetric closure in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    chain_locality: Option<usize>,
}

impl CouplingGraph {
    /// Builds a graph from an explicit edge list. Edges may be given in either
    /// orientation but must not repeat or form self-loops.
    pub fn from_edges(n_qubits: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::config("edges", format!("self-loop on qubit {a}")));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(Error::config(
                    "edges",
                    format!("edge ({a}, {b}) outside register of {n_qubits} qubits"),
                ));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(
                "edges",
                format!("duplicate edge ({}, {})", w[0].0, w[0].1),
            ));
        }
        Ok(Self::from_sorted_edges(n_qubits, normalized, None))
    }

    fn from_sorted_edges(
        n_qubits: usize,
        edges: Vec<(usize, usize)>,
        chain_locality: Option<usize>,
    ) -> Self {
        let mut degree = vec![0usize; n_qubits];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n_qubits + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n_qubits].to_vec();
        let mut neighbors = vec![0usize; offsets[n_qubits]];
        for &(i, j) in &edges {
            neighbors[fill[i]] = j;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            fill[j] += 1;
        }
        for q in 0..n_qubits {
            neighbors[offsets[q]..offsets[q + 1]].sort_unstable();
        }
        Self {
            n_qubits,
            edges,
            offsets,
            neighbors,
            chain_locality,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, qubit: usize) -> &[usize] {
        &self.neighbors[self.offsets[qubit]..self.offsets[qubit + 1]]
    }

    /// `Some(k)` when the graph is a k-local open chain, which enables the
    /// windowed neighbour-sum kernel.
    pub fn chain_locality(&self) -> Option<usize> {
        self.chain_locality
    }

    /// Mean number of edges per qubit, `|E| / L`.
    pub fn edge_density(&self) -> f64 {
        self.edges.len() as f64 / self.n_qubits as f64
    }
}

/// Builds the coupling graph of a lattice with open boundaries.
pub fn build_coupling_graph(spec: &LatticeSpec) -> Result<CouplingGraph> {
    match *spec {
        LatticeSpec::Chain1d { n_qubits, k } => {
            if n_qubits < 2 {
                return Err(Error::config("lattice.L", "chain needs at least 2 qubits"));
            }
            if k < 1 || k >= n_qubits {
                return Err(Error::config(
                    "model.k",
                    format!("k = {k} must satisfy 1 <= k <= L-1 = {}", n_qubits - 1),
                ));
            }
            let mut edges = Vec::with_capacity(k * n_qubits);
            for i in 0..n_qubits {
                for j in (i + 1)..=(i + k).min(n_qubits - 1) {
                    edges.push((i, j));
                }
            }
            Ok(CouplingGraph::from_sorted_edges(n_qubits, edges, Some(k)))
        }
        LatticeSpec::Grid2d { nx, ny } => grid_graph(&[nx, ny]),
        LatticeSpec::Grid3d { nx, ny, nz } => grid_graph(&[nx, ny, nz]),
    }
}

/// Qubit index of a grid site: `x + nx * (y + ny * z)`.
pub fn grid_index(dims: &[usize], coords: &[usize]) -> usize {
    coords
        .iter()
        .zip(dims)
        .rev()
        .fold(0, |acc, (&c, &d)| acc * d + c)
}

fn grid_graph(dims: &[usize]) -> Result<CouplingGraph> {
    const AXES: [&str; 3] = ["nx", "ny", "nz"];
    for (axis, &d) in dims.iter().enumerate() {
        if d == 0 {
            return Err(Error::config(
                format!("lattice.{}", AXES[axis]),
                "grid dimension must be >= 1",
            ));
        }
    }
    let n: usize = dims.iter().product();
    if n < 2 {
        return Err(Error::config("lattice", "grid needs at least 2 qubits"));
    }
    let mut edges = Vec::new();
    let mut coords = vec![0usize; dims.len()];
    for site in 0..n {
        let mut rem = site;
        for (c, &d) in coords.iter_mut().zip(dims) {
            *c = rem % d;
            rem /= d;
        }
        for axis in 0..dims.len() {
            if coords[axis] + 1 < dims[axis] {
                let mut next = coords.clone();
                next[axis] += 1;
                edges.push((site, grid_index(dims, &next)));
            }
        }
    }
    edges.sort_unstable();
    Ok(CouplingGraph::from_sorted_edges(n, edges, None))
}

/// `η = (J/h)(k - k(k+1)/(2L))` for a k-local chain.
pub fn eta_from_coupling(j: f64, h: f64, k: usize, n_qubits: usize) -> Result<f64> {
    Ok(j / h * chain_edge_density(k, n_qubits)?)
}

/// Inverse of [`eta_from_coupling`].
pub fn coupling_from_eta(eta: f64, h: f64, k: usize, n_qubits: usize) -> Result<f64> {
    Ok(eta * h / chain_edge_density(k, n_qubits)?)
}

fn chain_edge_density(k: usize, n_qubits: usize) -> Result<f64> {
    if k < 1 || k + 1 > n_qubits {
        return Err(Error::Domain(format!(
            "locality k = {k} outside [1, L-1] for L = {n_qubits}"
        )));
    }
    let (k, l) = (k as f64, n_qubits as f64);
    Ok(k - k * (k + 1.0) / (2.0 * l))
}

/// Physical parameters of one TFIM instance.
///
/// `eta` is the mean-field coupling `J |E| / (h L)`, which reduces to the
/// k-local chain formula on chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub h: f64,
    pub j: f64,
    pub k: usize,
    pub n_qubits: usize,
    pub eta: f64,
}

impl ModelParams {
    pub fn with_coupling(h: f64, j: f64, graph: &CouplingGraph) -> Result<Self> {
        check_field(h)?;
        let eta = match graph.chain_locality() {
            Some(k) => eta_from_coupling(j, h, k, graph.n_qubits())?,
            None => j / h * graph.edge_density(),
        };
        Ok(Self::assemble(h, j, eta, graph))
    }

    pub fn with_eta(h: f64, eta: f64, graph: &CouplingGraph) -> Result<Self> {
        check_field(h)?;
        let j = match graph.chain_locality() {
            Some(k) => coupling_from_eta(eta, h, k, graph.n_qubits())?,
            None => eta * h / graph.edge_density(),
        };
        Ok(Self::assemble(h, j, eta, graph))
    }

    fn assemble(h: f64, j: f64, eta: f64, graph: &CouplingGraph) -> Self {
        Self {
            h,
            j,
            k: graph.chain_locality().unwrap_or(1),
            n_qubits: graph.n_qubits(),
            eta,
        }
    }

    /// Coupling in units of the transverse field; the dynamics run in
    /// reduced time `h t`.
    pub fn j_over_h(&self) -> f64 {
        self.j / self.h
    }
}

fn check_field(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::config("model.h", format!("h = {h} must be > 0")))
    }
}

/// Energy of the translation-invariant product ansatz `|θ, φ⟩^L`:
/// `-hL (cos θ + η cos²φ sin²θ)`.
pub fn mf_energy(theta: f64, phi: f64, h: f64, n_qubits: usize, eta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let cp = phi.cos();
    -h * n_qubits as f64 * (c + eta * cp * cp * s * s)
}

/// Local minima of `θ ↦ mf_energy(θ, 0)` inside `(-π/2, π/2)`, sorted.
///
/// Stationary points satisfy `sin θ (2η cos θ - 1) = 0`; each candidate is
/// polished by a bracketed Newton iteration on the derivative and kept only if
/// it is a genuine minimum.
pub fn mf_energy_minima(h: f64, n_qubits: usize, eta: f64) -> Vec<f64> {
    let energy = |t: f64| mf_energy(t, 0.0, h, n_qubits, eta);
    // Derivatives divided by hL.
    let slope = |t: f64| t.sin() * (1.0 - 2.0 * eta * t.cos());
    let curvature = |t: f64| t.cos() - 2.0 * eta * (2.0 * t).cos();

    let mut seeds = vec![0.0];
    if 2.0 * eta >= 1.0 {
        let t0 = (1.0 / (2.0 * eta)).acos();
        seeds.push(t0);
        seeds.push(-t0);
    }

    let mut minima: Vec<f64> = Vec::new();
    for seed in seeds {
        let lo = (seed - 0.25).max(-FRAC_PI_2 + 1e-12);
        let hi = (seed + 0.25).min(FRAC_PI_2 - 1e-12);
        let t = polish_root(seed, lo, hi, slope, curvature);
        if t <= -FRAC_PI_2 || t >= FRAC_PI_2 {
            continue;
        }
        let c = curvature(t);
        let is_min = if c > 1e-9 {
            true
        } else if c < -1e-9 {
            false
        } else {
            // degenerate (quartic) stationary point
            let e = energy(t);
            energy(t + 1e-4) >= e && energy(t - 1e-4) >= e
        };
        if is_min && minima.iter().all(|m| (m - t).abs() > 1e-8) {
            minima.push(t);
        }
    }
    minima.sort_by(|a, b| a.partial_cmp(b).unwrap());
    minima
}

fn polish_root(
    seed: f64,
    mut lo: f64,
    mut hi: f64,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
) -> f64 {
    let mut t = seed;
    for _ in 0..60 {
        let v = f(t);
        if v == 0.0 {
            break;
        }
        let d = df(t);
        let mut next = t - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        // shrink the bracket only when it actually brackets a sign change
        if f(lo).signum() != f(hi).signum() {
            if f(next).signum() == f(lo).signum() {
                lo = next;
            } else {
                hi = next;
            }
        }
        let done = (next - t).abs() < 1e-15;
        t = next;
        if done {
            break;
        }
    }
    t
}

/// Smallest η at which the product-ansatz landscape has two minima, located
/// by bisection on the minimum count of [`mf_energy_minima`].
pub fn mf_bifurcation_eta(h: f64, n_qubits: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 8.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mf_energy_minima(h, n_qubits, mid).len() > 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
