//! Dense complex linear-algebra kernels shared by every module.
//!
//! Everything here works on `DMatrix<Complex64>`. Hermitian problems go
//! through nalgebra's tridiagonal eigensolver; general (non-normal) spectra
//! come from the complex Schur form, with eigenspaces recovered as SVD null
//! spaces of `M - λI` so that exactly degenerate clusters get a well
//! conditioned basis.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Build a matrix from real row-major entries.
pub fn from_real_rows(n: usize, m: usize, rows: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_row_iterator(n, m, rows.iter().map(|&x| real(x)))
}

pub fn hermitian_residual(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), ComplexMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn min_hermitian_eigenvalue(m: &ComplexMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Sum of absolute eigenvalues of the Hermitian part (trace norm).
pub fn hermitian_trace_norm(m: &ComplexMatrix) -> f64 {
    hermitian_eigen(m).0.iter().map(|x| x.abs()).sum()
}

/// Singular values in descending order together with the matching right
/// singular vectors as columns of an `ncols × ncols` matrix.
pub fn svd_sorted(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return (Vec::new(), ComplexMatrix::zeros(0, 0));
    }
    // Pad wide inputs so that V is complete.
    let padded = if rows < cols {
        let mut p = ComplexMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v = svd.v_t.expect("requested V").adjoint();
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let values = order.iter().map(|&i| sv[i]).collect();
    let vectors = ComplexMatrix::from_fn(cols, cols, |r, col| v[(r, order[col])]);
    (values, vectors)
}

/// Orthonormal basis (as columns) of the numerical kernel of `m`: right
/// singular vectors whose singular value is at most `rel_tol` times the
/// largest one (or `rel_tol` itself when `m` is tiny).
pub fn null_space(m: &ComplexMatrix, rel_tol: f64) -> ComplexMatrix {
    let (values, vectors) = svd_sorted(m);
    let cols = m.ncols();
    let scale = values.first().copied().unwrap_or(0.0).max(1.0);
    let cutoff = rel_tol * scale;
    let rank = values.iter().filter(|&&s| s > cutoff).count();
    vectors.columns(rank, cols - rank).into_owned()
}

/// The `k` right singular vectors of `m` with smallest singular values,
/// plus the k-th smallest and (k+1)-th smallest singular values.
pub fn smallest_singular_subspace(m: &ComplexMatrix, k: usize) -> (ComplexMatrix, f64, f64) {
    let (values, vectors) = svd_sorted(m);
    let n = m.ncols();
    let k = k.min(n);
    let kth = if k == 0 { 0.0 } else { values[n - k] };
    let next = if k < n { values[n - k - 1] } else { f64::INFINITY };
    (vectors.columns(n - k, k).into_owned(), kth, next)
}

/// Orthonormal basis of the column span of `m`.
pub fn column_span(m: &ComplexMatrix, rel_tol: f64) -> ComplexMatrix {
    let (rows, cols) = m.shape();
    if cols == 0 || rows == 0 {
        return ComplexMatrix::zeros(rows, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let scale = sv.iter().cloned().fold(0.0, f64::max).max(1.0);
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > rel_tol * scale).collect();
    ComplexMatrix::from_fn(rows, keep.len(), |r, col| u[(r, keep[col])])
}

pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let (values, _) = svd_sorted(m);
    match (values.first(), values.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Eigenvalues of a general complex matrix from its Schur form.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, 10_000 * n) {
        return Ok(schur_diagonal(schur));
    }
    // The shifted QR iteration can stall on highly structured inputs; a
    // random unitary similarity leaves the spectrum unchanged.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0x5c4);
    for _ in 0..4 {
        let q = random_complex_matrix(n, n, &mut rng).qr().q();
        let rotated = q.adjoint() * m * &q;
        if let Some(schur) = Schur::try_new(rotated, f64::EPSILON, 10_000 * n) {
            return Ok(schur_diagonal(schur));
        }
    }
    Err(Error::Linalg("Schur iteration did not converge".into()))
}

fn schur_diagonal(schur: Schur<Complex64, nalgebra::Dyn>) -> Vec<Complex64> {
    let (_, t) = schur.unpack();
    t.diagonal().iter().copied().collect()
}

/// Group values by single linkage: two values share a cluster when a chain
/// of pairwise distances `≤ tol` connects them.
pub fn cluster_values(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let nxt = p[j];
            p[j] = r;
            j = nxt;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// An eigenvalue cluster with an orthonormal basis of its right eigenspace.
#[derive(Debug, Clone)]
pub struct Eigenspace {
    pub value: Complex64,
    pub multiplicity: usize,
    pub vectors: ComplexMatrix,
    /// k-th smallest singular value of `M - value·I`; small iff the cluster
    /// is semisimple.
    pub residual: f64,
}

/// Right eigenspaces of a general matrix, one per eigenvalue cluster.
/// `rel_tol` is relative to `max(1, spectral radius)`.
pub fn eigenspaces(m: &ComplexMatrix, rel_tol: f64) -> Result<Vec<Eigenspace>> {
    let n = m.nrows();
    let values = eigenvalues(m)?;
    let radius = values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let clusters = cluster_values(&values, rel_tol * radius);
    let mut spaces = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let k = cluster.len();
        let mean = cluster.iter().map(|&i| values[i]).sum::<Complex64>() / real(k as f64);
        let shifted = m - identity(n) * mean;
        let (vectors, kth, _) = smallest_singular_subspace(&shifted, k);
        spaces.push(Eigenspace {
            value: mean,
            multiplicity: k,
            vectors,
            residual: kth / radius,
        });
    }
    Ok(spaces)
}

fn one_norm(m: &ComplexMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a [13/13] Padé
/// approximant.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(0.5f64.powi(squarings));
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (a6.scale(B[13]) + a4.scale(B[11]) + a2.scale(B[9]))
        + a6.scale(B[7])
        + a4.scale(B[5])
        + a2.scale(B[3])
        + id.scale(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (a6.scale(B[12]) + a4.scale(B[10]) + a2.scale(B[8]))
        + a6.scale(B[6])
        + a4.scale(B[4])
        + a2.scale(B[2])
        + id.scale(B[0]);
    let lu = (&v - &u).lu();
    let mut r = lu.solve(&(&v + &u)).expect("Padé denominator is nonsingular");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = random_complex_matrix(n, n, rng);
    (&g + g.adjoint()).scale(0.5)
}

pub fn random_normal_coeffs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
