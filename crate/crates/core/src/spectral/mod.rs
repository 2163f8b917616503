//! Common damping basis of a commuting generator family and the exact
//! propagator it yields.
//!
//! For pairwise commuting rate-class pieces `G_k` there is one set of right
//! and left eigenmatrices `{R_μ, L_μ}` with `Tr(L_μ† R_ν) = δ_μν` such that
//! `G_k(X) = Σ_μ λ_μ^{(k)} R_μ Tr(L_μ† X)`. The propagator is then
//! `Λ(t) = Σ_μ exp(Σ_k F_k(t) λ_μ^{(k)}) R_μ Tr(L_μ† ·)` with
//! `F_k(t) = ∫₀ᵗ f_k`.

mod attract;

pub use attract::{attractiveness, attractiveness_of, AttractivenessOptions, AttractivenessReport, ModeClass, ModeReport};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{require_commuting, GeneratorModel, RateFunction};
use crate::operator_space::linalg::{self, condition_number, eigenspaces, expm, real, ComplexMatrix};
use crate::operator_space::{devectorize, SuperOperator};

/// Relative tolerance for grouping eigenvalues of the combined generator.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Eigenvector matrices worse conditioned than this are treated as defective.
pub const MAX_CONDITION: f64 = 1e8;
const SIMULTANEITY_TOL: f64 = 1e-8;
const ATTEMPTS: u64 = 3;

#[derive(Debug, Clone)]
pub struct DampingMode {
    /// `λ_μ^{(k)}`, one per rate class, so that `λ_μ(t) = Σ_k f_k(t) λ_μ^{(k)}`.
    pub coefficients: Vec<Complex64>,
    pub right: ComplexMatrix,
    pub left: ComplexMatrix,
}

impl DampingMode {
    pub fn eigenvalue_at(&self, rates: &[RateFunction], t: f64) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for (c, r) in self.coefficients.iter().zip(rates) {
            sum += c * r.eval(t)?;
        }
        Ok(sum)
    }
}

#[derive(Debug, Clone)]
pub struct DampingBasis {
    hilbert_dim: usize,
    rates: Vec<RateFunction>,
    pieces: Vec<SuperOperator>,
    modes: Vec<DampingMode>,
    /// Columns are `vec(R_μ)`.
    right: ComplexMatrix,
    /// Rows are `vec(L_μ)†`.
    left_adjoint: ComplexMatrix,
    pub diagonalizable: bool,
    pub condition_number: f64,
    /// Largest off-diagonal weight of `L† G_k R` relative to `‖G_k‖`.
    pub simultaneity_residual: f64,
}

/// Simultaneous eigendecomposition of the rate-class pieces of a commuting
/// model. Defective families are flagged (`diagonalizable == false`), not
/// rejected.
pub fn damping_basis(model: &GeneratorModel) -> Result<DampingBasis> {
    damping_basis_seeded(model, crate::DEFAULT_SEED)
}

pub fn damping_basis_seeded(model: &GeneratorModel, seed: u64) -> Result<DampingBasis> {
    require_commuting(model)?;
    let classes = model.rate_classes();
    let d = model.hilbert_dim();
    let n = d * d;
    let rates: Vec<RateFunction> = classes.iter().map(|c| c.rate.clone()).collect();
    let pieces: Vec<SuperOperator> = classes.into_iter().map(|c| c.piece).collect();

    let mut best: Option<DampingBasis> = None;
    for attempt in 0..ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let coeffs = linalg::random_normal_coeffs(pieces.len(), &mut rng);
        let mut combined = ComplexMatrix::zeros(n, n);
        for (p, c) in pieces.iter().zip(&coeffs) {
            let norm = p.norm();
            if norm > 0.0 {
                combined += p.matrix().scale(c / norm);
            }
        }
        let candidate = decompose(d, &combined, &rates, &pieces)?;
        let done = candidate.diagonalizable;
        let better = best
            .as_ref()
            .is_none_or(|b| candidate.simultaneity_residual < b.simultaneity_residual);
        if better {
            best = Some(candidate);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one attempt"))
}

fn decompose(d: usize, combined: &ComplexMatrix, rates: &[RateFunction], pieces: &[SuperOperator]) -> Result<DampingBasis> {
    let n = d * d;
    let spaces = eigenspaces(combined, CLUSTER_TOL)?;
    let mut right = ComplexMatrix::zeros(n, n);
    let mut col = 0;
    for sp in &spaces {
        for v in sp.vectors.column_iter() {
            if col < n {
                right.set_column(col, &v);
            }
            col += 1;
        }
    }
    let cond = condition_number(&right);
    let inverse = if cond.is_finite() { right.clone().try_inverse() } else { None };
    let (left_adjoint, mut diagonalizable) = match inverse {
        Some(inv) => (inv, cond <= MAX_CONDITION),
        None => (right.adjoint(), false),
    };

    let mut coefficients = vec![Vec::with_capacity(pieces.len()); n];
    let mut simultaneity: f64 = 0.0;
    for piece in pieces {
        let projected = &left_adjoint * piece.matrix() * &right;
        let scale = piece.norm().max(1e-300);
        let mut off = projected.clone();
        for (mu, coeff) in coefficients.iter_mut().enumerate() {
            coeff.push(projected[(mu, mu)]);
            off[(mu, mu)] = real(0.0);
        }
        simultaneity = simultaneity.max(off.norm() / scale);
    }
    if simultaneity > SIMULTANEITY_TOL {
        diagonalizable = false;
    }

    let modes = (0..n)
        .map(|mu| DampingMode {
            coefficients: coefficients[mu].clone(),
            right: devectorize(&right.column(mu).into_owned(), d).expect("n = d²"),
            left: devectorize(&left_adjoint.row(mu).adjoint(), d).expect("n = d²"),
        })
        .collect();

    Ok(DampingBasis {
        hilbert_dim: d,
        rates: rates.to_vec(),
        pieces: pieces.to_vec(),
        modes,
        right,
        left_adjoint,
        diagonalizable,
        condition_number: cond,
        simultaneity_residual: simultaneity,
    })
}

impl DampingBasis {
    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn modes(&self) -> &[DampingMode] {
        &self.modes
    }

    pub fn rates(&self) -> &[RateFunction] {
        &self.rates
    }

    pub fn pieces(&self) -> &[SuperOperator] {
        &self.pieces
    }

    /// `max |Tr(L_μ† R_ν) − δ_μν|` (entrywise, via the Gram matrix).
    pub fn biorthonormality_residual(&self) -> f64 {
        let gram = &self.left_adjoint * &self.right;
        let n = gram.nrows();
        (gram - linalg::identity(n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Σ_k F_k(t) λ_μ^{(k)}` for every mode.
    pub fn accumulated_exponents(&self, t: f64) -> Result<Vec<Complex64>> {
        let integrals = self.rate_integrals(t)?;
        Ok(self
            .modes
            .iter()
            .map(|m| m.coefficients.iter().zip(&integrals).map(|(c, f)| c * f).sum())
            .collect())
    }

    fn rate_integrals(&self, t: f64) -> Result<Vec<f64>> {
        self.rates.iter().map(|r| r.integral(t)).collect()
    }

    /// `Re ∫₀ᵀ λ_μ`.
    pub fn mode_rate_integral(&self, mu: usize, t: f64) -> Result<f64> {
        let mode = self
            .modes
            .get(mu)
            .ok_or_else(|| Error::InvalidInput(format!("mode index {mu} out of range ({} modes)", self.modes.len())))?;
        let integrals = self.rate_integrals(t)?;
        Ok(mode
            .coefficients
            .iter()
            .zip(&integrals)
            .map(|(c, f)| c.re * f)
            .sum())
    }

    /// Exact propagator; spectral sum when diagonalizable, otherwise
    /// `exp(Σ_k F_k(t) G_k)`.
    pub fn propagator(&self, t: f64) -> Result<SuperOperator> {
        if self.diagonalizable {
            self.propagator_spectral(t)
        } else {
            self.propagator_expm(t)
        }
    }

    pub fn propagator_spectral(&self, t: f64) -> Result<SuperOperator> {
        let exps = self.accumulated_exponents(t)?;
        let mut scaled = self.right.clone();
        for (mu, e) in exps.iter().enumerate() {
            let factor = e.exp();
            for v in scaled.column_mut(mu).iter_mut() {
                *v *= factor;
            }
        }
        SuperOperator::new(scaled * &self.left_adjoint, self.hilbert_dim)
    }

    pub fn propagator_expm(&self, t: f64) -> Result<SuperOperator> {
        let integrals = self.rate_integrals(t)?;
        let n = self.hilbert_dim * self.hilbert_dim;
        let mut exponent = ComplexMatrix::zeros(n, n);
        for (p, f) in self.pieces.iter().zip(&integrals) {
            exponent += p.matrix().scale(*f);
        }
        SuperOperator::new(expm(&exponent), self.hilbert_dim)
    }

    pub fn report(&self) -> SpectrumReport {
        SpectrumReport {
            schema_version: 1,
            hilbert_dim: self.hilbert_dim,
            diagonalizable: self.diagonalizable,
            condition_number: self.condition_number,
            simultaneity_residual: self.simultaneity_residual,
            biorthonormality_residual: self.biorthonormality_residual(),
            rates: self.rates.iter().map(RateFunction::to_json).collect(),
            modes: self
                .modes
                .iter()
                .map(|m| ModeEntry {
                    coefficients: m.coefficients.iter().map(|z| [z.re, z.im]).collect(),
                    right: crate::models::json::MatrixDoc::from_matrix(&m.right),
                    left: crate::models::json::MatrixDoc::from_matrix(&m.left),
                })
                .collect(),
        }
    }
}

/// Exact propagator `Λ(t)` of a commuting model.
pub fn propagator(model: &GeneratorModel, t: f64) -> Result<SuperOperator> {
    damping_basis(model)?.propagator(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeEntry {
    pub coefficients: Vec<[f64; 2]>,
    pub right: crate::models::json::MatrixDoc,
    pub left: crate::models::json::MatrixDoc,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub schema_version: u32,
    pub hilbert_dim: usize,
    pub diagonalizable: bool,
    pub condition_number: f64,
    pub simultaneity_residual: f64,
    pub biorthonormality_residual: f64,
    pub rates: Vec<serde_json::Value>,
    pub modes: Vec<ModeEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::operators::{sigma_minus, sigma_x, sigma_y, sigma_z};
    use crate::models::{parse_rate_expression, presets, GeneratorTerm};
    use crate::operator_space::linalg::random_complex_matrix;
    use crate::operator_space::{hs_inner, vectorize, DensityOperator};

    fn sorted_eigs(basis: &DampingBasis, class: usize) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = basis.modes().iter().map(|m| m.coefficients[class]).collect();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn dephasing_spectrum_and_modes() {
        let gamma = 0.8;
        let model = presets::pure_dephasing(1, &[RateFunction::Constant(gamma)]).unwrap();
        let basis = damping_basis(&model).unwrap();
        assert!(basis.diagonalizable);
        let eigs = sorted_eigs(&basis, 0);
        for (got, want) in eigs.iter().zip([-2.0 * gamma, -2.0 * gamma, 0.0, 0.0]) {
            assert!((got - real(want)).norm() < 1e-10);
        }
        // steady modes span {I, σ_z}, decaying ones {σ_x, σ_y}
        for mode in basis.modes() {
            let r = &mode.right;
            let lam = mode.coefficients[0];
            let (inside, outside) = if lam.norm() < 1e-10 {
                ([linalg::identity(2), sigma_z()], [sigma_x(), sigma_y()])
            } else {
                ([sigma_x(), sigma_y()], [linalg::identity(2), sigma_z()])
            };
            for o in &outside {
                assert!(hs_inner(o, r).unwrap().norm() < 1e-10);
            }
            let weight: f64 = inside.iter().map(|b| hs_inner(b, r).unwrap().norm_sqr() / 2.0).sum();
            assert!((weight - r.norm().powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn amplitude_damping_spectrum() {
        let gamma = 1.3;
        let model = presets::amplitude_damping(RateFunction::Constant(gamma));
        let basis = damping_basis(&model).unwrap();
        let eigs = sorted_eigs(&basis, 0);
        for (got, want) in eigs.iter().zip([-gamma, -gamma / 2.0, -gamma / 2.0, 0.0]) {
            assert!((got - real(want)).norm() < 1e-10, "{eigs:?}");
        }
        assert!(basis.biorthonormality_residual() < 1e-8);
    }

    #[test]
    fn completeness_reconstructs_operators() {
        let model = presets::two_qubit_dephasing(RateFunction::Constant(1.0), parse_rate_expression("exp(-t)").unwrap());
        let basis = damping_basis(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_complex_matrix(4, 4, &mut rng);
        let mut rebuilt = ComplexMatrix::zeros(4, 4);
        for m in basis.modes() {
            rebuilt += &m.right * hs_inner(&m.left, &x).unwrap();
        }
        assert!((rebuilt - &x).norm() < 1e-8);
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let model = presets::amplitude_damping(parse_rate_expression("exp(-t)").unwrap());
        let p = propagator(&model, 0.0).unwrap();
        assert!(p.distance(&SuperOperator::identity(2)) < 1e-12);
    }

    #[test]
    fn amplitude_damping_population_decays_exponentially() {
        let model = presets::amplitude_damping(RateFunction::Constant(1.0));
        let basis = damping_basis(&model).unwrap();
        let excited = DensityOperator::basis(2, 1).unwrap();
        for t in [0.1, 1.0, 4.0] {
            let out = basis.propagator(t).unwrap().apply(excited.matrix()).unwrap();
            assert!((out[(1, 1)].re - (-t as f64).exp()).abs() < 1e-12);
            let alt = basis.propagator_expm(t).unwrap().apply(excited.matrix()).unwrap();
            assert!((out - alt).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_and_expm_paths_agree_for_time_dependent_rates() {
        let model = presets::two_qubit_dephasing(RateFunction::Constant(1.0), parse_rate_expression("exp(-t)").unwrap());
        let basis = damping_basis(&model).unwrap();
        assert!(basis.diagonalizable);
        for t in [0.5, 1.0, 5.0] {
            let a = basis.propagator_spectral(t).unwrap();
            // independent oracle: nalgebra's Padé exponential of the integrated generator
            let b = model.integrated_generator(t).unwrap().matrix().exp();
            assert!((a.matrix() - b).norm() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn mode_rate_integrals() {
        let model = presets::amplitude_damping(RateFunction::Constant(1.0));
        let basis = damping_basis(&model).unwrap();
        let slow = basis
            .modes()
            .iter()
            .position(|m| (m.coefficients[0] - real(-0.5)).norm() < 1e-10)
            .unwrap();
        let steady = basis.modes().iter().position(|m| m.coefficients[0].norm() < 1e-10).unwrap();
        for t in [1.0, 10.0, 100.0] {
            assert!((basis.mode_rate_integral(slow, t).unwrap() + t / 2.0).abs() < 1e-9);
            assert!(basis.mode_rate_integral(steady, t).unwrap().abs() < 1e-9);
        }
        assert!(basis.mode_rate_integral(99, 1.0).is_err());

        let decaying = presets::pure_dephasing(1, &[RateFunction::exp_decay(0.5, 1.0)]).unwrap();
        let basis = damping_basis(&decaying).unwrap();
        let mu = basis.modes().iter().position(|m| (m.coefficients[0] - real(-2.0)).norm() < 1e-10).unwrap();
        // λ^{(1)} = −2 on rate ½e^{−t}: −2·½(1 − e^{−T}) = −(1 − e^{−T})
        for t in [0.5, 3.0, 40.0] {
            assert!((basis.mode_rate_integral(mu, t).unwrap() + (1.0 - (-t as f64).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn non_commuting_model_rejected() {
        let model = GeneratorModel::new(2, "nc")
            .with_term(GeneratorTerm::dissipator(sigma_minus(), RateFunction::Constant(1.0)).unwrap())
            .unwrap()
            .with_term(GeneratorTerm::dissipator(sigma_x(), parse_rate_expression("exp(-t)").unwrap()).unwrap())
            .unwrap();
        assert!(matches!(damping_basis(&model), Err(Error::NonCommuting(_))));
    }

    #[test]
    fn defective_generator_falls_back_to_expm() {
        // H = σ_x with a σ₋ jump at rate 4 sits at the exceptional point of
        // the coherence block, so the Liouvillian has a Jordan block.
        let gamma = 4.0;
        let model = GeneratorModel::new(2, "ep")
            .with_term(GeneratorTerm::hamiltonian(sigma_x(), RateFunction::Constant(1.0)).unwrap())
            .unwrap()
            .with_term(GeneratorTerm::dissipator(sigma_minus(), RateFunction::Constant(gamma)).unwrap())
            .unwrap();
        let basis = damping_basis(&model).unwrap();
        let p = basis.propagator(0.7).unwrap();
        let oracle = model.generator_at(0.0).unwrap().matrix().scale(0.7).exp();
        assert!((p.matrix() - oracle).norm() < 1e-10);
        if !basis.diagonalizable {
            assert!(basis.condition_number > MAX_CONDITION || basis.simultaneity_residual > SIMULTANEITY_TOL);
        }
    }

    #[test]
    fn biorthonormal_and_vectorization_consistent() {
        let model = presets::double_dot(presets::DoubleDotParams {
            phase: 0.4,
            energy: 1.0,
            kappa: parse_rate_expression("1+0.5*sin(t)").unwrap(),
            kappa_tilde: RateFunction::Constant(0.0),
            include_hamiltonian: true,
        });
        let basis = damping_basis(&model).unwrap();
        assert!(basis.biorthonormality_residual() < 1e-8);
        for (mu, m) in basis.modes().iter().enumerate().take(4) {
            for (nu, n) in basis.modes().iter().enumerate().take(4) {
                let v = hs_inner(&m.left, &n.right).unwrap();
                let want = if mu == nu { 1.0 } else { 0.0 };
                assert!((v - real(want)).norm() < 1e-8);
            }
            assert_eq!(vectorize(&m.right).len(), 16);
        }
    }
}
