//! Independent reference implementations used only by tests: dense
//! Hamiltonians from Kronecker products and propagation by full
//! diagonalization.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

pub fn pauli(axis: usize) -> DMatrix<C> {
    let (o, i, z) = (C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(0.0, 0.0));
    match axis {
        0 => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        1 => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        _ => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Operator acting as `ops[q]` on qubit `q` (identity elsewhere). Qubit 0 is
/// the least significant bit, so it is the rightmost Kronecker factor.
pub fn embed(n: usize, ops: &[(usize, DMatrix<C>)]) -> DMatrix<C> {
    let mut m = DMatrix::<C>::identity(1, 1);
    for q in (0..n).rev() {
        let f = ops
            .iter()
            .find(|(p, _)| *p == q)
            .map_or_else(|| DMatrix::<C>::identity(2, 2), |(_, o)| o.clone());
        m = m.kronecker(&f);
    }
    m
}

pub fn dense_hamiltonian(n: usize, h: f64, j: f64, edges: &[(usize, usize)]) -> DMatrix<C> {
    let dim = 1 << n;
    let mut hm = DMatrix::<C>::zeros(dim, dim);
    for q in 0..n {
        hm -= embed(n, &[(q, pauli(2))]) * C::new(h, 0.0);
    }
    for &(a, b) in edges {
        hm -= embed(n, &[(a, pauli(0)), (b, pauli(0))]) * C::new(j, 0.0);
    }
    hm
}

/// `e^{-iHt}` through the eigendecomposition of the Hermitian `H`.
pub struct DensePropagator {
    vecs: DMatrix<C>,
    vals: Vec<f64>,
}

impl DensePropagator {
    pub fn new(h: &DMatrix<C>) -> Self {
        let eig = h.clone().symmetric_eigen();
        Self {
            vecs: eig.eigenvectors,
            vals: eig.eigenvalues.iter().copied().collect(),
        }
    }

    pub fn evolve(&self, psi: &DVector<C>, t: f64) -> DVector<C> {
        let mut coeffs = self.vecs.adjoint() * psi;
        for (c, &l) in coeffs.iter_mut().zip(&self.vals) {
            *c *= C::from_polar(1.0, -l * t);
        }
        &self.vecs * coeffs
    }
}

pub fn expectation(op: &DMatrix<C>, psi: &DVector<C>) -> f64 {
    (psi.adjoint() * op * psi)[(0, 0)].re
}

/// Product state from `(θ, φ)` per qubit via Kronecker products.
pub fn product_state(angles: &[(f64, f64)]) -> DVector<C> {
    let mut v = DVector::<C>::from_element(1, C::new(1.0, 0.0));
    for &(t, p) in angles.iter().rev() {
        let single = DVector::from_vec(vec![C::new((t / 2.0).cos(), 0.0), C::from_polar((t / 2.0).sin(), p)]);
        v = v.kronecker(&single);
    }
    v
}

/// Reduced density matrix on `keep` (bit k of the index is `keep[k]`),
/// built from `Tr_rest |ψ⟩⟨ψ|` by explicit index loops.
pub fn partial_trace(n: usize, psi: &DVector<C>, keep: &[usize]) -> DMatrix<C> {
    let m = keep.len();
    let mut rho = DMatrix::<C>::zeros(1 << m, 1 << m);
    for a in 0..1usize << n {
        for b in 0..1usize << n {
            let rest_equal = (0..n).filter(|q| !keep.contains(q)).all(|q| (a >> q) & 1 == (b >> q) & 1);
            if !rest_equal {
                continue;
            }
            let ra: usize = keep.iter().enumerate().map(|(k, &q)| ((a >> q) & 1) << k).sum();
            let rb: usize = keep.iter().enumerate().map(|(k, &q)| ((b >> q) & 1) << k).sum();
            rho[(ra, rb)] += psi[a] * psi[b].conj();
        }
    }
    rho
}

pub fn entropy_bits(rho: &DMatrix<C>) -> f64 {
    rho.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-12)
        .map(|&l| -l * l.log2())
        .sum()
}

/// `(1/L) Σ_{i<j} (⟨O_i O_j⟩ − ⟨O_i⟩⟨O_j⟩)` from dense operators.
pub fn pair_fluctuation(n: usize, psi: &DVector<C>, axis: usize) -> f64 {
    let single: Vec<f64> = (0..n).map(|q| expectation(&embed(n, &[(q, pauli(axis))]), psi)).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let oo = expectation(&embed(n, &[(i, pauli(axis)), (j, pauli(axis))]), psi);
            total += oo - single[i] * single[j];
        }
    }
    total / n as f64
}
