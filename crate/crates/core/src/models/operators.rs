//! Standard qubit and fermion-mode operators.
//!
//! Qubit convention: `|0⟩` is the ground (empty) level, `|1⟩` excited
//! (occupied); `σ₋ = |0⟩⟨1|` and `σ_z = diag(1, −1)`. Multi-qubit operators
//! use [`kron`] ordering, first qubit most significant.

use num_complex::Complex64;

use crate::operator_space::linalg::{c, from_real_rows, identity};
use crate::operator_space::{kron, ComplexMatrix};

pub fn sigma_x() -> ComplexMatrix {
    from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn sigma_z() -> ComplexMatrix {
    from_real_rows(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn sigma_minus() -> ComplexMatrix {
    from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0])
}

pub fn sigma_plus() -> ComplexMatrix {
    sigma_minus().adjoint()
}

/// `op` acting on qubit `which` of `n`.
pub fn embed(op: &ComplexMatrix, which: usize, n: usize) -> ComplexMatrix {
    (0..n).fold(identity(1), |acc, q| {
        if q == which {
            kron(&acc, op)
        } else {
            kron(&acc, &identity(2))
        }
    })
}

/// Jordan–Wigner annihilators for two fermion modes:
/// `a₁ = σ₋ ⊗ I`, `a₂ = σ_z ⊗ σ₋`.
pub fn two_mode_annihilators() -> (ComplexMatrix, ComplexMatrix) {
    (kron(&sigma_minus(), &identity(2)), kron(&sigma_z(), &sigma_minus()))
}

/// `A = (a₁ + e^{iφ} a₂)/√2`.
pub fn collective_mode(phase: f64) -> ComplexMatrix {
    let (a1, a2) = two_mode_annihilators();
    (a1 + a2 * Complex64::from_polar(1.0, phase)) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0)
}
