//! Steady-state projectors and the structure of the steady manifold.
//!
//! For each `t` the Cesàro limit `P_∞(t)` of `{Λ(t)ⁿ}` projects onto the
//! fixed points of `Λ(t)`. Under commutation the family has finitely many
//! distinct members and their product `𝓟` projects onto the states fixed at
//! every time. `𝓟(I/d)` has maximal support `H̃`; on `H̃` the fixed algebra
//! of the dual map splits into blocks `M_{d₁} ⊗ I_{d₂}`, which gives
//! `𝓟(ρ) = Σ_α V_α (Tr₂(V_α† ρ V_α) ⊗ ρ_{α,2}) V_α†`.

mod projector;
mod structure;

pub use projector::{
    cesaro_mean, cesaro_projector, fixed_point_space, project_to_manifold, reference_state, steady_projector,
    steady_projector_at, ReferenceState, SamplingOptions, SteadyProjector, SteadyProjectorReport,
};
pub use structure::{
    assemble_steady_state, structure_decomposition, structure_decomposition_seeded, Block, ManifoldStructure,
    StructureReport,
};

/// Eigenvalues within this distance of 1 count as fixed.
pub const EIGENVALUE_ONE_TOL: f64 = 1e-9;
/// Projectors closer than this (Frobenius) are the same projector.
pub const DEDUP_TOL: f64 = 1e-8;
/// Maximum distance between the finite Cesàro mean and the spectral limit.
pub const CESARO_CHECK_TOL: f64 = 0.05;
/// Number of terms in the finite Cesàro mean.
pub const CESARO_TERMS: usize = 1 << 10;
