//! Small dense density matrices and von Neumann entropies (base 2).
//!
//! Subsystem matrices use little-endian ordering: the first listed qubit is
//! the least significant bit of the row/column index.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

/// Eigenvalues at or below this threshold are dropped from entropy sums.
pub const EIGEN_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensityMatrix {
    pub subsystem: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

impl ReducedDensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn entropy_bits(&self) -> f64 {
        von_neumann_entropy_bits(&self.matrix)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

/// `(1 + r·σ)/2` as row-major `[[ρ00, ρ01], [ρ10, ρ11]]`.
pub fn bloch_density(r: &[f64; 3]) -> [[C64; 2]; 2] {
    [
        [C64::new(0.5 * (1.0 + r[2]), 0.0), C64::new(0.5 * r[0], -0.5 * r[1])],
        [C64::new(0.5 * r[0], 0.5 * r[1]), C64::new(0.5 * (1.0 - r[2]), 0.0)],
    ]
}

/// Entries of `⊗_k (1 + r_k·σ)/2` written into `out` (row-major,
/// `2^m × 2^m`), bit `k` of the index belonging to `rs[k]`.
pub fn product_density_into(rs: &[[f64; 3]], out: &mut [C64]) {
    let m = rs.len();
    let dim = 1usize << m;
    debug_assert_eq!(out.len(), dim * dim);
    let singles: Vec<[[C64; 2]; 2]> = rs.iter().map(bloch_density).collect();
    for row in 0..dim {
        for col in 0..dim {
            let mut v = C64::new(1.0, 0.0);
            for (k, s) in singles.iter().enumerate() {
                v *= s[(row >> k) & 1][(col >> k) & 1];
            }
            out[row * dim + col] = v;
        }
    }
}

/// Replaces `m` by `(m + m†)/2` scaled to unit trace.
pub fn hermitize_normalize(m: &mut DMatrix<C64>) {
    let h = (&*m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = h.trace().re;
    *m = if tr != 0.0 { h / C64::new(tr, 0.0) } else { h };
}

pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// `-Σ λ log₂ λ` over eigenvalues above [`EIGEN_CUTOFF`].
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > EIGEN_CUTOFF)
        .map(|&l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

pub fn von_neumann_entropy_bits(m: &DMatrix<C64>) -> f64 {
    entropy_of_spectrum(&hermitian_eigenvalues(m))
}

/// Entropy of a single-qubit state with Bloch norm `norm`, clamped to 1.
pub fn qubit_entropy_from_norm(norm: f64) -> f64 {
    let n = norm.clamp(0.0, 1.0);
    let plus = 0.5 * (1.0 + n);
    let minus = 0.5 * (1.0 - n);
    let term = |l: f64| if l > 0.0 { -l * l.log2() } else { 0.0 };
    term(plus) + term(minus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_entropies() {
        let half = DMatrix::<C64>::identity(2, 2) * C64::new(0.5, 0.0);
        assert_eq!(von_neumann_entropy_bits(&half), 1.0);
        let quarter = DMatrix::<C64>::identity(4, 4) * C64::new(0.25, 0.0);
        assert_eq!(von_neumann_entropy_bits(&quarter), 2.0);
        let mut pure = DMatrix::<C64>::zeros(4, 4);
        pure[(2, 2)] = C64::new(1.0, 0.0);
        assert_eq!(von_neumann_entropy_bits(&pure), 0.0);
    }

    #[test]
    fn qubit_entropy_values() {
        assert_eq!(qubit_entropy_from_norm(1.0), 0.0);
        assert_eq!(qubit_entropy_from_norm(0.0), 1.0);
        assert!((qubit_entropy_from_norm(0.5) - 0.811_278_124_459_132_9).abs() < 1e-12);
        assert_eq!(qubit_entropy_from_norm(1.3), 0.0);
    }

    #[test]
    fn product_density_ordering() {
        // qubit listed first is the least significant bit: |0⟩ ⊗-ordered after |1⟩
        let mut out = vec![C64::new(0.0, 0.0); 16];
        product_density_into(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]], &mut out);
        // basis index 0b10 = qubit 0 in |0⟩, qubit 1 in |1⟩
        assert_eq!(out[2 * 4 + 2], C64::new(1.0, 0.0));
        let tr: C64 = (0..4).map(|i| out[i * 4 + i]).sum();
        assert_eq!(tr, C64::new(1.0, 0.0));
    }

    #[test]
    fn single_qubit_matrix_entropy_matches_norm_formula() {
        let r = [0.3, -0.2, 0.5];
        let mut out = vec![C64::new(0.0, 0.0); 4];
        product_density_into(&[r], &mut out);
        let m = DMatrix::from_row_slice(2, 2, &out);
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) as f64;
        assert!((von_neumann_entropy_bits(&m) - qubit_entropy_from_norm(n.sqrt())).abs() < 1e-12);
    }
}
