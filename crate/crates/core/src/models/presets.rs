//! Ready-made generator families.

use super::operators::{collective_mode, embed, sigma_minus, sigma_z, two_mode_annihilators};
use super::{GeneratorModel, GeneratorTerm, RateFunction};
use crate::error::{Error, Result};

pub const MAX_DEPHASING_QUBITS: usize = 4;

/// Qubit spontaneous decay: one jump `σ₋` with the given rate.
pub fn amplitude_damping(rate: RateFunction) -> GeneratorModel {
    GeneratorModel::new(2, "amplitude-damping")
        .with_description("single qubit, jump σ₋")
        .with_term(GeneratorTerm::dissipator(sigma_minus(), rate).expect("σ₋ is square"))
        .expect("dimension 2")
}

/// Independent dephasing of `n` qubits: jump `σ_z` on each qubit.
pub fn pure_dephasing(n: usize, rates: &[RateFunction]) -> Result<GeneratorModel> {
    if n == 0 || n > MAX_DEPHASING_QUBITS {
        return Err(Error::InvalidParameter {
            name: "qubits".into(),
            message: format!("must be between 1 and {MAX_DEPHASING_QUBITS}, got {n}"),
        });
    }
    if rates.len() != n {
        return Err(Error::InvalidParameter {
            name: "rates".into(),
            message: format!("expected {n} rates, got {}", rates.len()),
        });
    }
    let mut model = GeneratorModel::new(1 << n, "pure-dephasing").with_description(format!("{n} qubit(s), jump σ_z on each"));
    for (q, rate) in rates.iter().enumerate() {
        model.push(GeneratorTerm::dissipator(embed(&sigma_z(), q, n), rate.clone())?)?;
    }
    Ok(model)
}

/// Two qubits under `(γ₁−γ₂)/2 · 𝓛₁ + (γ₁+γ₂)/2 · 𝓛₂`, with `𝓛₁` built
/// from the jump `σ_z^A − σ_z^B` and `𝓛₂` from `σ_z^A + σ_z^B`.
///
/// When `γ₁` and `γ₂` are the same rate (or their difference folds to the
/// constant zero) only the collective `𝓛₂` term is emitted.
pub fn two_qubit_dephasing(gamma1: RateFunction, gamma2: RateFunction) -> GeneratorModel {
    let za = embed(&sigma_z(), 0, 2);
    let zb = embed(&sigma_z(), 1, 2);
    let mut model = GeneratorModel::new(4, "two-qubit-dephasing");
    let (diff_rate, sum_rate) = if gamma1 == gamma2 {
        (RateFunction::Constant(0.0), gamma1.clone())
    } else {
        (
            RateFunction::linear_combination(&[(0.5, &gamma1), (-0.5, &gamma2)]),
            RateFunction::linear_combination(&[(0.5, &gamma1), (0.5, &gamma2)]),
        )
    };
    if diff_rate.is_identically_zero() {
        model.description = "collective dephasing, jump σ_z^A + σ_z^B".into();
    } else {
        model.description = "two-qubit dephasing, jumps σ_z^A ∓ σ_z^B".into();
        model
            .push(GeneratorTerm::dissipator(&za - &zb, diff_rate).expect("square"))
            .expect("dimension 4");
    }
    model
        .push(GeneratorTerm::dissipator(&za + &zb, sum_rate).expect("square"))
        .expect("dimension 4");
    model
}

#[derive(Debug, Clone)]
pub struct DoubleDotParams {
    /// Relative coupling phase `α₁ − α₂`.
    pub phase: f64,
    /// Level energy `ε`.
    pub energy: f64,
    pub kappa: RateFunction,
    pub kappa_tilde: RateFunction,
    pub include_hamiltonian: bool,
}

/// Double quantum dot coupled to a reservoir through the effective mode
/// `A = (a₁ + e^{iφ}a₂)/√2`. The displayed `2AρA† − {A†A, ρ}` form is
/// carried by unit-rate dissipators with rates `2κ(t)` (jump `A`) and
/// `2κ̃(t)` (jump `A†`).
pub fn double_dot(params: DoubleDotParams) -> GeneratorModel {
    let a = collective_mode(params.phase);
    let mut model = GeneratorModel::new(4, "double-dot")
        .with_description(format!("double quantum dot, phase {}", params.phase));
    if params.include_hamiltonian {
        let (a1, a2) = two_mode_annihilators();
        let h = (a1.adjoint() * &a1 + a2.adjoint() * &a2).scale(params.energy);
        model
            .push(GeneratorTerm::hamiltonian(h, RateFunction::Constant(1.0)).expect("number operator is Hermitian"))
            .expect("dimension 4");
    }
    model
        .push(GeneratorTerm::dissipator(a.clone(), params.kappa.scaled(2.0)).expect("square"))
        .expect("dimension 4");
    model
        .push(GeneratorTerm::dissipator(a.adjoint(), params.kappa_tilde.scaled(2.0)).expect("square"))
        .expect("dimension 4");
    model
}
