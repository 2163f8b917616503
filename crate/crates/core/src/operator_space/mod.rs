//! Hilbert space and Liouville space primitives.
//!
//! Operators are `d × d` complex matrices; superoperators are `d² × d²`
//! matrices acting on column-stacked operators, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

pub mod linalg;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector};
use linalg::{hermitian_eigen, identity, real, ONE, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const RANK_TOL: f64 = 1e-9;

/// Column-stacking vectorization.
pub fn vectorize(x: &ComplexMatrix) -> ComplexVector {
    // nalgebra stores matrices column-major, so this is a plain copy
    DVector::from_column_slice(x.as_slice())
}

pub fn devectorize(v: &ComplexVector, d: usize) -> Result<ComplexMatrix> {
    if v.len() != d * d {
        return Err(Error::dims("devectorize", d * d, v.len()));
    }
    Ok(ComplexMatrix::from_column_slice(d, d, v.as_slice()))
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Hilbert–Schmidt inner product `Tr(X† Y)`.
pub fn hs_inner(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<Complex64> {
    if x.shape() != y.shape() {
        return Err(Error::dims("hs_inner", x.len(), y.len()));
    }
    Ok(x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum())
}

/// Trace out every tensor factor not listed in `keep`.
///
/// `dims` gives the factor dimensions, first factor most significant (the
/// same ordering as [`kron`]). An empty `keep` returns the 1×1 trace.
pub fn partial_trace(x: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let n: usize = dims.iter().product();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::dims("partial_trace", n, x.nrows()));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::InvalidInput(format!(
            "partial_trace: factor index {bad} out of range for {} factors",
            dims.len()
        )));
    }
    let kept: Vec<bool> = (0..dims.len()).map(|i| keep.contains(&i)).collect();
    let out_dim: usize = dims
        .iter()
        .zip(&kept)
        .filter(|(_, &k)| k)
        .map(|(d, _)| d)
        .product();

    // split a flat index into (kept index, traced index)
    let split = |mut idx: usize| -> (usize, usize) {
        let (mut k_idx, mut k_mul) = (0, 1);
        let (mut t_idx, mut t_mul) = (0, 1);
        for (f, &d) in dims.iter().enumerate().rev() {
            let digit = idx % d;
            idx /= d;
            if kept[f] {
                k_idx += digit * k_mul;
                k_mul *= d;
            } else {
                t_idx += digit * t_mul;
                t_mul *= d;
            }
        }
        (k_idx, t_idx)
    };

    let parts: Vec<(usize, usize)> = (0..n).map(split).collect();
    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for r in 0..n {
        for col in 0..n {
            let (kr, tr) = parts[r];
            let (kc, tc) = parts[col];
            if tr == tc {
                out[(kr, kc)] += x[(r, col)];
            }
        }
    }
    Ok(out)
}

/// Density operator: Hermitian, PSD, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, HERMITIAN_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        Self::validate(&matrix, tol)?;
        Ok(Self { matrix })
    }

    /// Check the density-operator invariants with slack `tol`.
    pub fn validate(m: &ComplexMatrix, tol: f64) -> Result<()> {
        if m.nrows() != m.ncols() {
            return Err(Error::dims("density operator (square)", m.nrows(), m.ncols()));
        }
        let herm = linalg::hermitian_residual(m);
        if herm > tol * m.norm().max(1.0) {
            return Err(Error::NotHermitian(herm));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min = linalg::min_hermitian_eigenvalue(m);
        if min < -tol {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let v = psi / real(norm);
        Ok(Self {
            matrix: &v * v.adjoint(),
        })
    }

    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::InvalidInput(format!("basis index {i} out of range for dimension {d}")));
        }
        let mut m = ComplexMatrix::zeros(d, d);
        m[(i, i)] = ONE;
        Ok(Self { matrix: m })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: identity(d).scale(1.0 / d as f64),
        }
    }

    /// Random full-rank state from the Ginibre ensemble.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let g = linalg::random_complex_matrix(d, d, rng);
        let m = &g * g.adjoint();
        let tr = m.trace();
        Self { matrix: m / tr }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityOperator) -> f64 {
        trace_distance(&self.matrix, &other.matrix)
    }
}

/// Half the trace norm of the Hermitian difference.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    0.5 * linalg::hermitian_trace_norm(&(a - b))
}

/// Linear map on `d × d` operators, stored as its `d² × d²` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    matrix: ComplexMatrix,
    dim: usize,
}

impl SuperOperator {
    pub fn new(matrix: ComplexMatrix, hilbert_dim: usize) -> Result<Self> {
        let n = hilbert_dim * hilbert_dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::dims("superoperator", n, matrix.nrows()));
        }
        Ok(Self {
            matrix,
            dim: hilbert_dim,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            matrix: identity(d * d),
            dim: d,
        }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(d * d, d * d),
            dim: d,
        }
    }

    /// `X ↦ A X B`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() || b.shape() != a.shape() {
            return Err(Error::dims("sandwich", a.nrows(), b.nrows()));
        }
        Ok(Self {
            matrix: kron(&b.transpose(), a),
            dim: a.nrows(),
        })
    }

    /// Build the matrix of an arbitrary linear map by applying it to the
    /// matrix units.
    pub fn from_fn(d: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let n = d * d;
        let mut m = ComplexMatrix::zeros(n, n);
        for j in 0..d {
            for i in 0..d {
                let mut e = ComplexMatrix::zeros(d, d);
                e[(i, j)] = ONE;
                let img = f(&e);
                m.set_column(i + j * d, &vectorize(&img));
            }
        }
        Self { matrix: m, dim: d }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::dims("superoperator apply", self.dim, x.nrows()));
        }
        devectorize(&(&self.matrix * vectorize(x)), self.dim)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SuperOperator) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::dims("superoperator compose", self.dim, other.dim));
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            dim: self.dim,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale(s),
            dim: self.dim,
        }
    }

    pub fn add(&self, other: &SuperOperator) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::dims("superoperator add", self.dim, other.dim));
        }
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
            dim: self.dim,
        })
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn distance(&self, other: &SuperOperator) -> f64 {
        (&self.matrix - &other.matrix).norm()
    }

    pub fn dual(&self) -> Self {
        dual_map(self)
    }
}

/// Adjoint with respect to the Hilbert–Schmidt inner product. Under column
/// stacking this is the conjugate transpose of the matrix.
pub fn dual_map(s: &SuperOperator) -> SuperOperator {
    SuperOperator {
        matrix: s.matrix.adjoint(),
        dim: s.dim,
    }
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ S(|i⟩⟨j|)` (input factor first).
pub fn choi_matrix(s: &SuperOperator) -> ComplexMatrix {
    let d = s.dim;
    let m = &s.matrix;
    ComplexMatrix::from_fn(d * d, d * d, |row, col| {
        let (i, k) = (row / d, row % d);
        let (j, l) = (col / d, col % d);
        m[(k + l * d, i + j * d)]
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CptpReport {
    pub choi_min_eigenvalue: f64,
    /// `‖Tr_out(Choi) − I‖_F`.
    pub trace_preservation_residual: f64,
    /// Hermiticity-preservation residual of the Choi matrix.
    pub choi_hermitian_residual: f64,
    pub choi_rank: usize,
    pub tolerance: f64,
    pub is_cptp: bool,
}

impl CptpReport {
    pub fn passes(&self, psd_tol: f64, tp_tol: f64) -> bool {
        self.choi_min_eigenvalue >= -psd_tol
            && self.trace_preservation_residual <= tp_tol
            && self.choi_hermitian_residual <= psd_tol.max(tp_tol)
    }
}

pub fn is_cptp(s: &SuperOperator, tol: f64) -> CptpReport {
    let d = s.dim;
    let choi = choi_matrix(s);
    let herm = linalg::hermitian_residual(&choi);
    let (values, _) = hermitian_eigen(&choi);
    let min = values.first().copied().unwrap_or(0.0);
    let max = values.last().copied().unwrap_or(0.0).abs().max(1.0);
    let rank = values.iter().filter(|&&v| v > RANK_TOL * max).count();
    let reduced = partial_trace(&choi, &[d, d], &[0]).expect("Choi dims are consistent");
    let tp = (reduced - identity(d)).norm();
    let mut report = CptpReport {
        choi_min_eigenvalue: min,
        trace_preservation_residual: tp,
        choi_hermitian_residual: herm,
        choi_rank: rank,
        tolerance: tol,
        is_cptp: false,
    };
    report.is_cptp = report.passes(tol, tol);
    report
}

/// Orthogonal projector on the Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: ComplexMatrix,
    rank: usize,
}

impl Projector {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let herm = linalg::hermitian_residual(&matrix);
        let idem = (&matrix * &matrix - &matrix).norm();
        let resid = herm.max(idem);
        if resid > HERMITIAN_TOL * matrix.norm().max(1.0) {
            return Err(Error::Verification {
                what: "projector".into(),
                residual: resid,
            });
        }
        let rank = matrix.trace().re.round() as usize;
        Ok(Self { matrix, rank })
    }

    /// Projector onto the span of orthonormal columns.
    pub fn from_isometry(v: &ComplexMatrix) -> Self {
        Self {
            matrix: v * v.adjoint(),
            rank: v.ncols(),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn complement(&self) -> Self {
        let d = self.dim();
        Self {
            matrix: identity(d) - &self.matrix,
            rank: d - self.rank,
        }
    }

    /// Orthonormal basis of the range, as columns.
    pub fn isometry(&self) -> ComplexMatrix {
        let (values, vectors) = hermitian_eigen(&self.matrix);
        let d = self.dim();
        let start = values.iter().filter(|&&v| v <= 0.5).count();
        vectors.columns(start, d - start).into_owned()
    }
}

/// Smallest projector `P` with `Tr(ρP) = 1`: the span of eigenvectors whose
/// eigenvalue exceeds `tol`.
pub fn support_projector(rho: &DensityOperator, tol: f64) -> Projector {
    support_of(rho.matrix(), tol)
}

pub(crate) fn support_of(m: &ComplexMatrix, tol: f64) -> Projector {
    let (values, vectors) = hermitian_eigen(m);
    let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] > tol).collect();
    let v = ComplexMatrix::from_fn(m.nrows(), keep.len(), |r, col| vectors[(r, keep[col])]);
    Projector::from_isometry(&v)
}

/// Subspace of operator space with a Hilbert–Schmidt orthonormal basis.
#[derive(Debug, Clone)]
pub struct OperatorSubspace {
    hilbert_dim: usize,
    basis: Vec<ComplexMatrix>,
}

impl OperatorSubspace {
    /// From orthonormal columns in vectorized (column-stacked) form.
    pub fn from_vectorized(columns: &ComplexMatrix, hilbert_dim: usize) -> Result<Self> {
        if columns.nrows() != hilbert_dim * hilbert_dim {
            return Err(Error::dims("operator subspace", hilbert_dim * hilbert_dim, columns.nrows()));
        }
        let basis = columns
            .column_iter()
            .map(|c| ComplexMatrix::from_column_slice(hilbert_dim, hilbert_dim, c.clone_owned().as_slice()))
            .collect();
        Ok(Self { hilbert_dim, basis })
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// Basis as columns of a `d² × k` matrix.
    pub fn vectorized(&self) -> ComplexMatrix {
        let n = self.hilbert_dim * self.hilbert_dim;
        let mut m = ComplexMatrix::zeros(n, self.basis.len());
        for (j, b) in self.basis.iter().enumerate() {
            m.set_column(j, &vectorize(b));
        }
        m
    }

    /// Distance from `x` to the subspace, in Frobenius norm.
    pub fn distance_to(&self, x: &ComplexMatrix) -> f64 {
        let mut residual = x.clone();
        for b in &self.basis {
            let coeff = hs_inner(b, x).unwrap_or(ZERO);
            residual -= b * coeff;
        }
        residual.norm()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let v = self.vectorized();
        (v.adjoint() * &v - identity(self.basis.len())).norm()
    }
}
