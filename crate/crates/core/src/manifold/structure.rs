use std::cmp::Ordering;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::projector::{reference_state, SteadyProjector};
use crate::error::{Error, Result};
use crate::models::json::MatrixDoc;
use crate::operator_space::linalg::{
    self, cluster_values, hermitian_eigen, identity, null_space, real, ComplexMatrix, ComplexVector,
};
use crate::operator_space::{devectorize, kron, partial_trace, vectorize, DensityOperator, Projector};

const ATTEMPTS: u64 = 5;
const RECONSTRUCTION_TOL: f64 = 1e-8;
const RECONSTRUCTION_SAMPLES: usize = 20;
const ISOMETRY_TOL: f64 = 1e-9;
const ALGEBRA_TOL: f64 = 1e-8;
const CLUSTER_TOL: f64 = 1e-7;
const COMMUTANT_PROBES: usize = 4;

/// One summand `H_{α,1} ⊗ H_{α,2}` of the support.
#[derive(Debug, Clone)]
pub struct Block {
    /// `d × d₁d₂` isometry; column `i·d₂ + j` is the image of `|i⟩ ⊗ |j⟩`.
    pub isometry: ComplexMatrix,
    pub d1: usize,
    pub d2: usize,
    pub rho2: DensityOperator,
}

impl Block {
    pub fn projector(&self) -> Projector {
        Projector::from_isometry(&self.isometry)
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldStructure {
    pub blocks: Vec<Block>,
    pub decaying_projector: Projector,
    pub reference_state: DensityOperator,
    pub reconstruction_residual: f64,
    /// `‖P̃*(I) − I‖_F` on the support.
    pub unitality_residual: f64,
    pub attempts: usize,
}

impl ManifoldStructure {
    pub fn hilbert_dim(&self) -> usize {
        self.decaying_projector.dim()
    }

    pub fn decaying_dim(&self) -> usize {
        self.decaying_projector.rank()
    }

    /// `Σ_α d_{α,1}²`, the dimension of the steady operator space.
    pub fn steady_dimension(&self) -> usize {
        self.blocks.iter().map(|b| b.d1 * b.d1).sum()
    }

    pub fn report(&self) -> StructureReport {
        StructureReport {
            schema_version: 1,
            hilbert_dim: self.hilbert_dim(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockEntry {
                    d1: b.d1,
                    d2: b.d2,
                    isometry: MatrixDoc::from_matrix(&b.isometry),
                    rho2: MatrixDoc::from_matrix(b.rho2.matrix()),
                })
                .collect(),
            decaying_dim: self.decaying_dim(),
            steady_dimension: self.steady_dimension(),
            reference_state: MatrixDoc::from_matrix(self.reference_state.matrix()),
            reconstruction_residual: self.reconstruction_residual,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockEntry {
    pub d1: usize,
    pub d2: usize,
    pub isometry: MatrixDoc,
    pub rho2: MatrixDoc,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub schema_version: u32,
    pub hilbert_dim: usize,
    pub blocks: Vec<BlockEntry>,
    pub decaying_dim: usize,
    pub steady_dimension: usize,
    pub reference_state: MatrixDoc,
    pub reconstruction_residual: f64,
}

pub fn structure_decomposition(p: &SteadyProjector) -> Result<ManifoldStructure> {
    structure_decomposition_seeded(p, crate::DEFAULT_SEED)
}

/// Noiseless/noisy block decomposition of the steady projector, verified by
/// reconstructing `𝓟` on the support from the blocks.
pub fn structure_decomposition_seeded(p: &SteadyProjector, seed: u64) -> Result<ManifoldStructure> {
    let reference = reference_state(p)?;
    let w = reference.support.isometry();
    let r = w.ncols();

    // 𝓟 compressed to the support: X ↦ W†𝓟(WXW†)W
    let lift = kron(&w.conjugate(), &w);
    let restricted = lift.adjoint() * p.map.matrix() * &lift;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_leak = 0.0_f64;
    for _ in 0..RECONSTRUCTION_SAMPLES {
        let sigma = DensityOperator::random(r, &mut rng);
        let kept = devectorize(&(&restricted * vectorize(sigma.matrix())), r)?.trace().re;
        worst_leak = worst_leak.max(1.0 - kept);
    }
    if worst_leak > RECONSTRUCTION_TOL {
        return Err(Error::Verification {
            what: "invariance of the reference support".into(),
            residual: worst_leak,
        });
    }

    let dual = restricted.adjoint();
    let unit = vectorize(&identity(r));
    let unitality_residual = (&dual * &unit - &unit).norm();
    if unitality_residual > 1e-9 {
        return Err(Error::Verification {
            what: "unitality of the dual map on the support".into(),
            residual: unitality_residual,
        });
    }
    let algebra = null_space(&(&dual - identity(r * r)), ALGEBRA_TOL);
    let rho0 = w.adjoint() * reference.state.matrix() * &w;

    let mut best = f64::INFINITY;
    for attempt in 0..ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt + 1));
        match attempt_blocks(&algebra, r, &restricted, &rho0, &mut rng) {
            Ok((blocks, residual)) => {
                let mut blocks: Vec<Block> = blocks
                    .into_iter()
                    .map(|(v, d1, d2, rho2)| Block {
                        isometry: &w * v,
                        d1,
                        d2,
                        rho2,
                    })
                    .collect();
                blocks.sort_by(block_order);
                return Ok(ManifoldStructure {
                    blocks,
                    decaying_projector: reference.support.complement(),
                    reference_state: reference.state,
                    reconstruction_residual: residual,
                    unitality_residual,
                    attempts: attempt as usize + 1,
                });
            }
            Err(residual) => {
                debug!("structure attempt {attempt} rejected (residual {residual:.3e})");
                best = best.min(residual);
            }
        }
    }
    Err(Error::Verification {
        what: format!("structure decomposition after {ATTEMPTS} attempts"),
        residual: best,
    })
}

fn first_index(v: &ComplexMatrix) -> usize {
    (0..v.nrows())
        .find(|&i| v.row(i).norm() > 1e-6)
        .unwrap_or(v.nrows())
}

fn block_order(a: &Block, b: &Block) -> Ordering {
    b.d1
        .cmp(&a.d1)
        .then(b.d2.cmp(&a.d2))
        .then(first_index(&a.isometry).cmp(&first_index(&b.isometry)))
}

fn random_element(algebra: &ComplexMatrix, r: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = linalg::random_complex_matrix(algebra.ncols(), 1, rng);
    let v: ComplexVector = (algebra * g).column(0).into_owned();
    devectorize(&v, r).expect("r² rows")
}

fn hermitian_part(x: &ComplexMatrix) -> ComplexMatrix {
    x + x.adjoint()
}

/// Groups of eigenvector columns of a Hermitian matrix, one per eigenvalue
/// cluster.
fn eigen_groups(h: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(h);
    let scale = values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let as_complex: Vec<_> = values.iter().map(|&v| real(v)).collect();
    let mut groups = cluster_values(&as_complex, CLUSTER_TOL * scale);
    groups.sort_by(|a, b| values[a[0]].total_cmp(&values[b[0]]));
    groups
        .into_iter()
        .map(|g| ComplexMatrix::from_fn(h.nrows(), g.len(), |row, col| vectors[(row, g[col])]))
        .collect()
}

type RawBlock = (ComplexMatrix, usize, usize, DensityOperator);

/// One randomized pass; on rejection returns the residual that failed.
fn attempt_blocks(
    algebra: &ComplexMatrix,
    r: usize,
    restricted: &ComplexMatrix,
    rho0: &ComplexMatrix,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(Vec<RawBlock>, f64), f64> {
    let m = algebra.ncols();
    // center: algebra elements commuting with a few random algebra elements
    let mut stacked = ComplexMatrix::zeros(COMMUTANT_PROBES * r * r, m);
    for k in 0..COMMUTANT_PROBES {
        let x = random_element(algebra, r, rng);
        // vec(XZ − ZX) = (I⊗X − Xᵀ⊗I) vec Z
        let ad = kron(&identity(r), &x) - kron(&x.transpose(), &identity(r));
        stacked.rows_mut(k * r * r, r * r).copy_from(&(ad * algebra));
    }
    let center = algebra * null_space(&stacked, ALGEBRA_TOL);
    let central = hermitian_part(&random_element(&center, r, rng));
    let sectors = eigen_groups(&central);
    if sectors.len() != center.ncols() {
        return Err(f64::INFINITY);
    }

    let h = hermitian_part(&random_element(algebra, r, rng));
    let x = random_element(algebra, r, rng);
    let mut blocks = Vec::with_capacity(sectors.len());
    for u in &sectors {
        let n = u.ncols();
        let levels = eigen_groups(&(u.adjoint() * &h * u));
        let d1 = levels.len();
        let d2 = n / d1;
        if levels.iter().any(|e| e.ncols() != d2) {
            return Err(f64::INFINITY);
        }
        // Q_i X Q_1 carries the first level onto the i-th one
        let y = u.adjoint() * &x * u;
        let mut frame = ComplexMatrix::zeros(n, n);
        for (i, e) in levels.iter().enumerate() {
            let link = if i == 0 {
                identity(d2)
            } else {
                let t = e.adjoint() * &y * &levels[0];
                let norm = t.norm() / (d2 as f64).sqrt();
                if norm < 1e-8 {
                    return Err(f64::INFINITY);
                }
                t.unscale(norm)
            };
            frame.columns_mut(i * d2, d2).copy_from(&(e * link));
        }
        let v = u * frame;
        let isometry_residual = (v.adjoint() * &v - identity(n)).norm();
        if isometry_residual > ISOMETRY_TOL {
            return Err(isometry_residual);
        }
        let compressed = v.adjoint() * rho0 * &v;
        let reduced = partial_trace(&compressed, &[d1, d2], &[1]).map_err(|_| f64::INFINITY)?;
        let reduced = (&reduced + reduced.adjoint()).scale(0.5);
        let tr = reduced.trace().re;
        let rho2 = reduced.unscale(tr);
        if linalg::min_hermitian_eigenvalue(&rho2) <= 1e-10 {
            return Err(f64::INFINITY);
        }
        let rho2 = DensityOperator::with_tolerance(rho2, 1e-9).map_err(|_| f64::INFINITY)?;
        blocks.push((v, d1, d2, rho2));
    }

    let residual = reconstruction_residual(&blocks, r, restricted, rng);
    if residual > RECONSTRUCTION_TOL {
        return Err(residual);
    }
    Ok((blocks, residual))
}

/// Worst `‖P̃ρ − Σ_α V_α(Tr₂(V_α†ρV_α) ⊗ ρ_{α,2})V_α†‖_F` over random states.
fn reconstruction_residual(blocks: &[RawBlock], r: usize, restricted: &ComplexMatrix, rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0_f64;
    for _ in 0..RECONSTRUCTION_SAMPLES {
        let rho = DensityOperator::random(r, rng);
        let direct = devectorize(&(restricted * vectorize(rho.matrix())), r).expect("r² rows");
        let mut rebuilt = ComplexMatrix::zeros(r, r);
        for (v, d1, d2, rho2) in blocks {
            let inner = v.adjoint() * rho.matrix() * v;
            let noiseless = partial_trace(&inner, &[*d1, *d2], &[0]).expect("d₁d₂ = dim");
            rebuilt += v * kron(&noiseless, rho2.matrix()) * v.adjoint();
        }
        worst = worst.max((direct - rebuilt).norm());
    }
    worst
}

/// `ρ = Σ_α p_α V_α(ρ_{α,1} ⊗ ρ_{α,2})V_α†`, a steady state.
pub fn assemble_steady_state(
    structure: &ManifoldStructure,
    weights: &[f64],
    factors: &[DensityOperator],
) -> Result<DensityOperator> {
    let n = structure.blocks.len();
    if weights.len() != n {
        return Err(Error::dims("steady-state weights", n, weights.len()));
    }
    if factors.len() != n {
        return Err(Error::dims("noiseless factors", n, factors.len()));
    }
    if let Some(p) = weights.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::WeightNormalization(format!("negative weight {p}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::WeightNormalization(format!("weights sum to {total}, not 1")));
    }
    let d = structure.hilbert_dim();
    let mut rho = ComplexMatrix::zeros(d, d);
    for (i, ((block, p), f)) in structure.blocks.iter().zip(weights).zip(factors).enumerate() {
        if f.dim() != block.d1 {
            return Err(Error::dims(format!("noiseless factor {i}"), block.d1, f.dim()));
        }
        rho += (&block.isometry * kron(f.matrix(), block.rho2.matrix()) * block.isometry.adjoint()).scale(*p);
    }
    let rho = (&rho + rho.adjoint()).scale(0.5);
    DensityOperator::with_tolerance(rho, 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{steady_projector, SamplingOptions};
    use crate::models::{presets, RateFunction};
    use crate::spectral::propagator;
    use crate::operator_space::SuperOperator;

    fn shapes(s: &ManifoldStructure) -> Vec<(usize, usize)> {
        s.blocks.iter().map(|b| (b.d1, b.d2)).collect()
    }

    fn projector_of(model: &crate::models::GeneratorModel) -> SteadyProjector {
        steady_projector(model, SamplingOptions::default()).unwrap()
    }

    #[test]
    fn identity_channel_is_one_noiseless_block() {
        let p = crate::manifold::cesaro_projector(&SuperOperator::identity(2), 1e-9).unwrap();
        let s = structure_decomposition(&p).unwrap();
        assert_eq!(shapes(&s), vec![(2, 1)]);
        assert_eq!(s.decaying_dim(), 0);
        assert_eq!(s.steady_dimension(), 4);
    }

    #[test]
    fn collective_dephasing_has_a_decoherence_free_qubit() {
        let model = presets::two_qubit_dephasing(RateFunction::Constant(1.0), RateFunction::Constant(1.0));
        let p = projector_of(&model);
        let s = structure_decomposition(&p).unwrap();
        assert_eq!(shapes(&s), vec![(2, 1), (1, 1), (1, 1)]);
        assert_eq!(s.decaying_dim(), 0);
        assert_eq!(s.steady_dimension(), p.fixed_dimension());
        // the 2-dimensional block spans |01⟩, |10⟩
        let proj = s.blocks[0].projector();
        for (i, want) in [0.0, 1.0, 1.0, 0.0].into_iter().enumerate() {
            assert!((proj.matrix()[(i, i)].re - want).abs() < 1e-9);
        }
        assert!(s.reconstruction_residual <= RECONSTRUCTION_TOL);
    }

    #[test]
    fn amplitude_damping_structure() {
        let model = presets::amplitude_damping(RateFunction::Constant(1.0));
        let s = structure_decomposition(&projector_of(&model)).unwrap();
        assert_eq!(shapes(&s), vec![(1, 1)]);
        assert_eq!(s.decaying_dim(), 1);
        assert!((s.blocks[0].rho2.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(s.blocks[0].isometry[(0, 0)].norm() > 1.0 - 1e-10);
    }

    #[test]
    fn noisy_factor_from_a_non_unital_block() {
        // jumps |0⟩⟨1| and |1⟩⟨0| at unequal rates: a single (1,1) block with a
        // full-rank thermal-like ρ₂ = diag(2/3, 1/3)
        let mut down = ComplexMatrix::zeros(2, 2);
        down[(0, 1)] = real(1.0);
        let model = crate::models::GeneratorModel::new(2, "thermal")
            .with_term(crate::models::GeneratorTerm::dissipator(down.clone(), RateFunction::Constant(2.0)).unwrap())
            .unwrap()
            .with_term(crate::models::GeneratorTerm::dissipator(down.adjoint(), RateFunction::Constant(1.0)).unwrap())
            .unwrap();
        let s = structure_decomposition(&projector_of(&model)).unwrap();
        assert_eq!(shapes(&s), vec![(1, 2)]);
        let rho2 = s.blocks[0].rho2.eigenvalues();
        assert!((rho2[0] - 1.0 / 3.0).abs() < 1e-9 && (rho2[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn assembled_states_are_fixed() {
        let model = presets::two_qubit_dephasing(RateFunction::Constant(1.0), RateFunction::Constant(1.0));
        let s = structure_decomposition(&projector_of(&model)).unwrap();
        let v = &s.blocks[0].isometry;
        // ρ_{1,1} = |01⟩⟨01| pulled back into the block's noiseless factor
        let mut ket = ComplexVector::zeros(4);
        ket[1] = real(1.0);
        let local = v.adjoint() * ket;
        let factor = DensityOperator::pure(&local).unwrap();
        let one = DensityOperator::maximally_mixed(1);
        let rho = assemble_steady_state(&s, &[0.5, 0.25, 0.25], &[factor, one.clone(), one.clone()]).unwrap();
        assert!((rho.matrix()[(1, 1)].re - 0.5).abs() < 1e-10);
        for t in [0.5, 2.0] {
            let lam = propagator(&model, t).unwrap();
            assert!((lam.apply(rho.matrix()).unwrap() - rho.matrix()).norm() < 1e-8);
        }
        let two = DensityOperator::maximally_mixed(2);
        assert!(matches!(
            assemble_steady_state(&s, &[0.6, 0.6, -0.2], &[two.clone(), one.clone(), one.clone()]),
            Err(Error::WeightNormalization(_))
        ));
        assert!(matches!(
            assemble_steady_state(&s, &[0.5, 0.3, 0.3], &[two.clone(), one.clone(), one.clone()]),
            Err(Error::WeightNormalization(_))
        ));
        assert!(matches!(
            assemble_steady_state(&s, &[1.0, 0.0, 0.0], &[one.clone(), one.clone(), one.clone()]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_block_output_ignores_inputs() {
        let model = presets::amplitude_damping(RateFunction::Constant(1.0));
        let s = structure_decomposition(&projector_of(&model)).unwrap();
        let rho = assemble_steady_state(&s, &[1.0], &[DensityOperator::maximally_mixed(1)]).unwrap();
        assert!((rho.matrix() - DensityOperator::basis(2, 0).unwrap().matrix()).norm() < 1e-12);
    }

    #[test]
    fn seeds_do_not_change_the_shape() {
        let model = presets::pure_dephasing(2, &[RateFunction::Constant(1.0), RateFunction::Constant(0.5)]).unwrap();
        let p = projector_of(&model);
        for seed in [1, 2, 3] {
            let s = structure_decomposition_seeded(&p, seed).unwrap();
            assert_eq!(shapes(&s), vec![(1, 1); 4]);
            assert_eq!(s.steady_dimension(), 4);
        }
    }

    #[test]
    fn report_shape() {
        let model = presets::amplitude_damping(RateFunction::Constant(1.0));
        let s = structure_decomposition(&projector_of(&model)).unwrap();
        let v = serde_json::to_value(s.report()).unwrap();
        assert_eq!(v["decaying_dim"], 1);
        assert_eq!(v["blocks"][0]["d1"], 1);
        assert!(v["blocks"][0]["isometry"].is_array());
        assert!(v["reference_state"].is_array());
    }
}
