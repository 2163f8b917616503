use log::{debug, warn};
use serde::Serialize;

use super::{CESARO_CHECK_TOL, CESARO_TERMS, DEDUP_TOL, EIGENVALUE_ONE_TOL};
use crate::error::{Error, Result};
use crate::models::json::MatrixDoc;
use crate::models::GeneratorModel;
use crate::operator_space::linalg::{self, identity, null_space, smallest_singular_subspace, ComplexMatrix};
use crate::operator_space::{
    is_cptp, support_of, DensityOperator, OperatorSubspace, Projector, SuperOperator, RANK_TOL,
};
use crate::spectral::{damping_basis, DampingBasis};

/// Kernel of `Λ − id` with an HS-orthonormal basis.
pub fn fixed_point_space(map: &SuperOperator, tol: f64) -> OperatorSubspace {
    let n = map.matrix().nrows();
    let kernel = null_space(&(map.matrix() - identity(n)), tol);
    OperatorSubspace::from_vectorized(&kernel, map.hilbert_dim()).expect("d² rows")
}

/// `(1/N) Σ_{n<N} Λⁿ`, for `N` a power of two, by repeated doubling.
pub fn cesaro_mean(map: &SuperOperator, terms: usize) -> Result<SuperOperator> {
    if !terms.is_power_of_two() {
        return Err(Error::InvalidInput(format!("Cesàro length {terms} is not a power of two")));
    }
    let n = map.matrix().nrows();
    let mut sum = identity(n);
    let mut power = map.matrix().clone();
    let mut len = 1;
    while len < terms {
        sum = &sum + &power * &sum;
        power = &power * &power;
        len *= 2;
    }
    SuperOperator::new(sum.unscale(terms as f64), map.hilbert_dim())
}

#[derive(Debug, Clone)]
pub struct SteadyProjector {
    pub map: SuperOperator,
    pub hilbert_dim: usize,
    pub fixed_space: OperatorSubspace,
    /// `‖𝓟² − 𝓟‖_F / ‖𝓟‖_F`.
    pub idempotence_residual: f64,
    /// Distance to the finite Cesàro mean (single-map projectors only).
    pub cesaro_residual: Option<f64>,
    /// Distance from 1 of the nearest eigenvalue left out of the fixed
    /// cluster (single-map projectors only).
    pub spectral_gap: Option<f64>,
    pub sample_times: Vec<f64>,
    pub distinct_projectors: usize,
    pub warnings: Vec<String>,
}

impl SteadyProjector {
    fn from_map(map: SuperOperator) -> Self {
        let d = map.hilbert_dim();
        let norm = map.norm().max(f64::MIN_POSITIVE);
        let idempotence_residual = (map.matrix() * map.matrix() - map.matrix()).norm() / norm;
        let fixed_space = fixed_point_space(&map, RANK_TOL);
        SteadyProjector {
            map,
            hilbert_dim: d,
            fixed_space,
            idempotence_residual,
            cesaro_residual: None,
            spectral_gap: None,
            sample_times: Vec::new(),
            distinct_projectors: 1,
            warnings: Vec::new(),
        }
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.map.apply(x)
    }

    pub fn fixed_dimension(&self) -> usize {
        self.fixed_space.dimension()
    }

    pub fn report(&self) -> Result<SteadyProjectorReport> {
        let reference = reference_state(self)?;
        let cptp = is_cptp(&self.map, 1e-8);
        Ok(SteadyProjectorReport {
            schema_version: 1,
            hilbert_dim: self.hilbert_dim,
            fixed_dimension: self.fixed_dimension(),
            distinct_projectors: self.distinct_projectors,
            sample_times: self.sample_times.clone(),
            idempotence_residual: self.idempotence_residual,
            choi_min_eigenvalue: cptp.choi_min_eigenvalue,
            cesaro_residual: self.cesaro_residual,
            reference_state: MatrixDoc::from_matrix(reference.state.matrix()),
            support_rank: reference.support.rank(),
            projector: MatrixDoc::from_matrix(self.map.matrix()),
            warnings: self.warnings.clone(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyProjectorReport {
    pub schema_version: u32,
    pub hilbert_dim: usize,
    pub fixed_dimension: usize,
    pub distinct_projectors: usize,
    pub sample_times: Vec<f64>,
    pub idempotence_residual: f64,
    pub choi_min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cesaro_residual: Option<f64>,
    pub reference_state: MatrixDoc,
    pub support_rank: usize,
    pub projector: MatrixDoc,
    pub warnings: Vec<String>,
}

/// Spectral projection of `Λ` onto its eigenvalue-1 cluster, which is the
/// Cesàro limit `lim (1/N) Σ Λⁿ`.
pub fn cesaro_projector(map: &SuperOperator, tol: f64) -> Result<SteadyProjector> {
    let n = map.matrix().nrows();
    let values = linalg::eigenvalues(map.matrix())?;
    let one = linalg::real(1.0);
    let k = values.iter().filter(|v| (*v - one).norm() <= tol).count();
    if k == 0 {
        return Err(Error::InvalidInput(
            "map has no eigenvalue 1; it is not trace preserving".into(),
        ));
    }
    let gap = values
        .iter()
        .map(|v| (v - one).norm())
        .filter(|&dist| dist > tol)
        .fold(f64::INFINITY, f64::min);
    let shifted = map.matrix() - identity(n);
    let (right, _, _) = smallest_singular_subspace(&shifted, k);
    let (left, _, _) = smallest_singular_subspace(&shifted.adjoint(), k);
    let overlap = left.adjoint() * &right;
    let inverse = overlap
        .try_inverse()
        .ok_or_else(|| Error::Linalg("left and right fixed spaces are not in duality".into()))?;
    let p = SuperOperator::new(&right * inverse * left.adjoint(), map.hilbert_dim())?;

    let mut out = SteadyProjector::from_map(p);
    out.spectral_gap = gap.is_finite().then_some(gap);
    let widest = values.iter().map(|v| (v - one).norm()).filter(|&dist| dist <= tol).fold(0.0, f64::max);
    if gap < 10.0 * tol {
        let msg = format!(
            "eigenvalue-1 cluster is not well separated: farthest member at {widest:.3e}, nearest excluded at {gap:.3e}"
        );
        warn!("{msg}");
        out.warnings.push(msg);
    }
    let mean = cesaro_mean(map, CESARO_TERMS)?;
    let residual = mean.distance(&out.map);
    out.cesaro_residual = Some(residual);
    // each excluded mode contributes at most 2/(N|1 − λ|) to the finite mean
    let expected = 2.0 * (n as f64).sqrt() / (CESARO_TERMS as f64 * gap);
    if residual > CESARO_CHECK_TOL {
        let msg = format!("finite Cesàro mean (N = {CESARO_TERMS}) is {residual:.3e} from the spectral projector");
        if expected < CESARO_CHECK_TOL {
            warn!("{msg}");
            out.warnings.push(msg);
        } else {
            debug!("{msg}; slow convergence expected, nearest excluded eigenvalue at {gap:.3e}");
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    /// The grid spans `[horizon/1000, horizon]`.
    pub horizon: f64,
    pub points: usize,
    pub verify_points: usize,
    /// Refinement rounds after a failed verification.
    pub refinements: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            horizon: 10.0,
            points: 16,
            verify_points: 64,
            refinements: 3,
        }
    }
}

fn geometric_grid(horizon: f64, points: usize) -> Vec<f64> {
    let lo = horizon / 1000.0;
    if points <= 1 {
        return vec![horizon];
    }
    let ratio = (horizon / lo).powf(1.0 / (points - 1) as f64);
    (0..points).map(|i| lo * ratio.powi(i as i32)).collect()
}

/// `𝓟 = Π P_∞(t_i)` over the distinct Cesàro projectors on a geometric grid.
pub fn steady_projector(model: &GeneratorModel, opts: SamplingOptions) -> Result<SteadyProjector> {
    if !(opts.horizon > 0.0) || opts.points == 0 {
        return Err(Error::InvalidInput("sampling needs a positive horizon and at least one point".into()));
    }
    let basis = damping_basis(model)?;
    let mut times = geometric_grid(opts.horizon, opts.points);
    let mut verify = geometric_grid(opts.horizon, opts.verify_points.max(opts.points));
    for round in 0..=opts.refinements {
        let out = from_basis(&basis, &times)?;
        let failures = verification_failures(&basis, &out, &verify)?;
        if failures.is_empty() {
            return Ok(out);
        }
        if round == opts.refinements {
            let worst = failures.iter().map(|f| f.1).fold(0.0, f64::max);
            return Err(Error::Verification {
                what: format!("steady projector on {} verification times", verify.len()),
                residual: worst,
            });
        }
        warn!(
            "steady projector missed {} sampled projector(s); refining grid",
            failures.len()
        );
        times.extend(failures.iter().map(|f| f.0));
        times.sort_by(f64::total_cmp);
        verify = geometric_grid(opts.horizon, 2 * verify.len());
    }
    unreachable!("loop returns on its last round")
}

/// `𝓟` from explicit sample times, without grid verification.
pub fn steady_projector_at(model: &GeneratorModel, times: &[f64]) -> Result<SteadyProjector> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidInput("sample times must be nonempty and positive".into()));
    }
    from_basis(&damping_basis(model)?, times)
}

fn from_basis(basis: &DampingBasis, times: &[f64]) -> Result<SteadyProjector> {
    let d = basis.hilbert_dim();
    let mut distinct: Vec<SuperOperator> = Vec::new();
    let mut warnings = Vec::new();
    for &t in times {
        let p = cesaro_projector(&basis.propagator(t)?, EIGENVALUE_ONE_TOL)?;
        warnings.extend(p.warnings.iter().map(|w| format!("t = {t}: {w}")));
        if !distinct.iter().any(|q| q.distance(&p.map) <= DEDUP_TOL) {
            distinct.push(p.map);
        }
    }
    let mut product = SuperOperator::identity(d);
    for p in &distinct {
        product = product.compose(p)?;
    }
    let mut out = SteadyProjector::from_map(product);
    out.sample_times = times.to_vec();
    out.distinct_projectors = distinct.len();
    out.warnings = warnings;
    Ok(out)
}

/// Times on `grid` where `P_∞(t)𝓟 = 𝓟P_∞(t) = 𝓟` fails, with the residual.
fn verification_failures(basis: &DampingBasis, p: &SteadyProjector, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let scale = p.map.norm().max(1.0);
    let mut failures = Vec::new();
    if p.idempotence_residual > 1e-9 {
        failures.push((grid[grid.len() - 1], p.idempotence_residual));
    }
    for &t in grid {
        let q = cesaro_projector(&basis.propagator(t)?, EIGENVALUE_ONE_TOL)?;
        let left = (q.map.matrix() * p.map.matrix() - p.map.matrix()).norm();
        let right = (p.map.matrix() * q.map.matrix() - p.map.matrix()).norm();
        let residual = left.max(right) / scale;
        if residual > 1e-8 {
            failures.push((t, residual));
        }
    }
    Ok(failures)
}

/// `𝓟(ρ)`, a steady state.
pub fn project_to_manifold(p: &SteadyProjector, rho: &DensityOperator) -> Result<DensityOperator> {
    let out = p.apply(rho.matrix())?;
    let out = (&out + out.adjoint()).scale(0.5);
    DensityOperator::with_tolerance(out, 1e-8)
}

#[derive(Debug, Clone)]
pub struct ReferenceState {
    pub state: DensityOperator,
    pub support: Projector,
    /// Largest weight of `𝓟(σ)` outside the support over the maximality
    /// witnesses.
    pub maximality_residual: f64,
    /// Convex-combination repairs applied to the initial candidate.
    pub repairs: usize,
}

const SUPPORT_TOL: f64 = 1e-10;
const MAXIMALITY_TOL: f64 = 1e-8;

/// `ρ₀ = 𝓟(I/d)` and its support, checked to contain the support of every
/// steady state built from the fixed-space basis.
pub fn reference_state(p: &SteadyProjector) -> Result<ReferenceState> {
    let d = p.hilbert_dim;
    let mut rho = hermitian_state(p.apply(&identity(d).scale(1.0 / d as f64))?)?;
    let witnesses = maximality_witnesses(p)?;
    let mut repairs = 0;
    loop {
        let support = support_of(&rho, SUPPORT_TOL);
        let outside = support.complement();
        let mut worst = 0.0_f64;
        let mut failing = None;
        for w in &witnesses {
            let leak = (outside.matrix() * w * outside.matrix()).trace().re.abs()
                + (outside.matrix() * w * support.matrix()).norm();
            if leak > worst {
                worst = leak;
                if leak > MAXIMALITY_TOL {
                    failing = Some(w.clone());
                }
            }
        }
        match failing {
            Some(w) if repairs < witnesses.len() => {
                warn!("reference state support is not maximal (leak {worst:.3e}); mixing in a witness");
                rho = (&rho + w).scale(0.5);
                repairs += 1;
            }
            Some(_) => {
                return Err(Error::Verification {
                    what: "maximal support of the reference state".into(),
                    residual: worst,
                })
            }
            None => {
                return Ok(ReferenceState {
                    state: DensityOperator::with_tolerance(rho, 1e-8)?,
                    support,
                    maximality_residual: worst,
                    repairs,
                })
            }
        }
    }
}

fn hermitian_state(m: ComplexMatrix) -> Result<ComplexMatrix> {
    let h = (&m + m.adjoint()).scale(0.5);
    let tr = h.trace().re;
    if !(tr > 0.0) {
        return Err(Error::InvalidTrace(tr));
    }
    Ok(h.unscale(tr))
}

/// `𝓟(I/d + εH)` for each Hermitian part `H` of the fixed-space basis.
fn maximality_witnesses(p: &SteadyProjector) -> Result<Vec<ComplexMatrix>> {
    let d = p.hilbert_dim;
    let eps = 1.0 / (2.0 * d as f64);
    let mixed = identity(d).scale(1.0 / d as f64);
    let mut out = Vec::new();
    for e in p.fixed_space.basis() {
        let parts = [
            (e + e.adjoint()).scale(0.5),
            (e - e.adjoint()) * linalg::c(0.0, -0.5),
        ];
        for h in parts {
            let norm = h.norm();
            if norm < 1e-12 {
                continue;
            }
            let sigma = &mixed + h.scale(eps / norm);
            out.push(hermitian_state(p.apply(&sigma)?)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::operators::sigma_z;
    use crate::models::{presets, RateFunction};
    use crate::operator_space::linalg::real;
    use crate::spectral::propagator;

    fn assert_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
        assert!((a - b).norm() < tol, "{a} vs {b}");
    }

    #[test]
    fn fixed_spaces() {
        assert_eq!(fixed_point_space(&SuperOperator::identity(2), 1e-9).dimension(), 4);
        let deph = presets::pure_dephasing(1, &[RateFunction::Constant(1.0)]).unwrap();
        assert_eq!(fixed_point_space(&propagator(&deph, 1.0).unwrap(), 1e-9).dimension(), 2);
        let ad = presets::amplitude_damping(RateFunction::Constant(1.0));
        let fs = fixed_point_space(&propagator(&ad, 1.0).unwrap(), 1e-9);
        assert_eq!(fs.dimension(), 1);
        let ground = DensityOperator::basis(2, 0).unwrap();
        assert!(fs.distance_to(ground.matrix()) < 1e-10);
    }

    #[test]
    fn cesaro_of_identity() {
        let p = cesaro_projector(&SuperOperator::identity(3), 1e-9).unwrap();
        assert!(p.map.distance(&SuperOperator::identity(3)) < 1e-12);
        assert_eq!(p.spectral_gap, None);
    }

    #[test]
    fn cesaro_kills_peripheral_minus_one() {
        let z = sigma_z();
        let flip = SuperOperator::sandwich(&z, &z).unwrap();
        let p = cesaro_projector(&flip, 1e-9).unwrap();
        let pinch = SuperOperator::identity(2).add(&flip).unwrap().scale(0.5);
        assert!(p.map.distance(&pinch) < 1e-12);
        // oracle: the finite mean, exact here because N is even
        let mean = cesaro_mean(&flip, 1024).unwrap();
        assert!(mean.distance(&pinch) < 1e-12);
        assert!(p.cesaro_residual.unwrap() < 1e-12);
        assert!((p.spectral_gap.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cesaro_of_amplitude_damping() {
        let ad = presets::amplitude_damping(RateFunction::Constant(1.0));
        let lam = propagator(&ad, 1.0).unwrap();
        let p = cesaro_projector(&lam, 1e-9).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        for _ in 0..5 {
            let x = linalg::random_complex_matrix(2, 2, &mut rng);
            let mut want = ComplexMatrix::zeros(2, 2);
            want[(0, 0)] = x.trace();
            assert_close(&p.apply(&x).unwrap(), &want, 1e-10);
        }
        let m = p.map.matrix();
        let l = lam.matrix();
        let scale = p.map.norm();
        assert!((m * l - m).norm() <= 1e-9 * scale);
        assert!((l * m - m).norm() <= 1e-9 * scale);
        assert!(p.idempotence_residual <= 1e-9);
        assert!(p.cesaro_residual.unwrap() <= CESARO_CHECK_TOL);
    }

    #[test]
    fn cesaro_rejects_maps_without_fixed_points() {
        let half = SuperOperator::identity(2).scale(0.5);
        assert!(cesaro_projector(&half, 1e-9).is_err());
        assert!(cesaro_mean(&half, 1000).is_err());
    }

    #[test]
    fn cesaro_warns_on_small_gap() {
        let near = SuperOperator::sandwich(&identity(2), &identity(2))
            .unwrap()
            .add(&SuperOperator::from_fn(2, |x| {
                let mut y = ComplexMatrix::zeros(2, 2);
                y[(0, 1)] = x[(0, 1)] * real(-5e-9);
                y
            }))
            .unwrap();
        let p = cesaro_projector(&near, 1e-9).unwrap();
        assert!(p.warnings.iter().any(|w| w.contains("not well separated")));
    }

    #[test]
    fn single_term_projector_is_one_cesaro_limit() {
        let ad = presets::amplitude_damping(RateFunction::Constant(0.7));
        let p = steady_projector(&ad, SamplingOptions::default()).unwrap();
        assert_eq!(p.distinct_projectors, 1);
        let first = cesaro_projector(&propagator(&ad, p.sample_times[0]).unwrap(), 1e-9).unwrap();
        assert!(p.map.distance(&first.map) < 1e-8);
        assert_eq!(p.sample_times.len(), 16);
        assert!((p.sample_times[0] - 0.01).abs() < 1e-15 && (p.sample_times[15] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_dephasing_projectors() {
        let generic = presets::two_qubit_dephasing(RateFunction::Constant(1.0), RateFunction::Constant(0.3));
        let p = steady_projector(&generic, SamplingOptions::default()).unwrap();
        assert_eq!(p.fixed_dimension(), 4);
        // pinching onto the diagonal
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(2);
        let x = linalg::random_complex_matrix(4, 4, &mut rng);
        let want = ComplexMatrix::from_diagonal(&x.diagonal());
        assert_close(&p.apply(&x).unwrap(), &want, 1e-9);

        let collective = presets::two_qubit_dephasing(RateFunction::Constant(1.0), RateFunction::Constant(1.0));
        let p = steady_projector(&collective, SamplingOptions::default()).unwrap();
        assert_eq!(p.fixed_dimension(), 6);
        assert!(is_cptp(&p.map, 1e-8).passes(1e-8, 1e-8));
    }

    #[test]
    fn explicit_times() {
        let ad = presets::amplitude_damping(RateFunction::Constant(1.0));
        assert!(steady_projector_at(&ad, &[]).is_err());
        assert!(steady_projector_at(&ad, &[1.0, -1.0]).is_err());
        assert!(steady_projector_at(&ad, &[0.5, 2.0]).unwrap().idempotence_residual < 1e-9);
        assert!(steady_projector(&ad, SamplingOptions { horizon: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn reference_states() {
        let id = SteadyProjector::from_map(SuperOperator::identity(3));
        let r = reference_state(&id).unwrap();
        assert_close(r.state.matrix(), &identity(3).scale(1.0 / 3.0), 1e-12);
        assert_eq!(r.support.rank(), 3);
        assert_eq!(r.repairs, 0);

        let ad = presets::amplitude_damping(RateFunction::Constant(1.0));
        let p = steady_projector(&ad, SamplingOptions::default()).unwrap();
        let r = reference_state(&p).unwrap();
        assert_close(r.state.matrix(), DensityOperator::basis(2, 0).unwrap().matrix(), 1e-10);
        assert_eq!(r.support.complement().rank(), 1);
        assert!(r.support.complement().matrix()[(1, 1)].re > 1.0 - 1e-10);

        let collective = presets::two_qubit_dephasing(RateFunction::Constant(1.0), RateFunction::Constant(1.0));
        // oracle: the Hermitian jump annihilates the identity under the generator
        let gen = collective.generator_at(0.0).unwrap();
        assert!(gen.apply(&identity(4)).unwrap().norm() < 1e-12);
        let p = steady_projector(&collective, SamplingOptions::default()).unwrap();
        let r = reference_state(&p).unwrap();
        assert_close(r.state.matrix(), &identity(4).scale(0.25), 1e-10);
        assert_eq!(r.support.rank(), 4);
    }

    #[test]
    fn projections_onto_the_manifold() {
        let ad = presets::amplitude_damping(RateFunction::Constant(1.0));
        let p = steady_projector(&ad, SamplingOptions::default()).unwrap();
        let excited = DensityOperator::basis(2, 1).unwrap();
        let ground = DensityOperator::basis(2, 0).unwrap();
        assert_close(project_to_manifold(&p, &excited).unwrap().matrix(), ground.matrix(), 1e-10);
        assert_close(project_to_manifold(&p, &ground).unwrap().matrix(), ground.matrix(), 1e-10);

        let deph = presets::pure_dephasing(1, &[RateFunction::Constant(1.0)]).unwrap();
        let p = steady_projector(&deph, SamplingOptions::default()).unwrap();
        let plus = DensityOperator::pure(&crate::operator_space::ComplexVector::from_vec(vec![real(1.0), real(1.0)])).unwrap();
        assert_close(project_to_manifold(&p, &plus).unwrap().matrix(), &identity(2).scale(0.5), 1e-10);
    }

    #[test]
    fn time_dependent_projector_is_fixed_at_all_times() {
        let model = presets::double_dot(presets::DoubleDotParams {
            phase: 0.9,
            energy: 0.0,
            kappa: RateFunction::sinusoidal(1.0, 0.5, 1.0),
            kappa_tilde: RateFunction::Constant(0.0),
            include_hamiltonian: false,
        });
        let p = steady_projector(&model, SamplingOptions::default()).unwrap();
        let rho0 = reference_state(&p).unwrap().state;
        for t in [0.3, 1.7, 6.0] {
            let lam = propagator(&model, t).unwrap();
            assert_close(&lam.apply(rho0.matrix()).unwrap(), rho0.matrix(), 1e-8);
        }
    }
}
