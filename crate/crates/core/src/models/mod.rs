//! Time-dependent generators `L(t) = Σ_k f_k(t) G_k`.
//!
//! Each term pairs a scalar [`RateFunction`] with a static superoperator
//! built from either a Hamiltonian (`−i[H, ·]`) or a jump operator (the
//! unit-rate Lindblad dissipator). Terms whose rates are proportional are
//! merged into a single [`RateClass`] before any spectral work, which is
//! what makes the commutativity question decidable on the pieces alone.

pub mod expr;
pub mod json;
pub mod operators;
pub mod presets;
pub mod rate;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator_space::linalg::{commutator, hermitian_residual, identity};
use crate::operator_space::{kron, ComplexMatrix, SuperOperator, HERMITIAN_TOL};
pub use rate::{parse_rate_expression, RateFunction, RatePreset};

/// `−i(I ⊗ H − Hᵀ ⊗ I)`, the matrix of `X ↦ −i[H, X]`.
pub fn hamiltonian_piece(h: &ComplexMatrix) -> Result<SuperOperator> {
    if h.nrows() != h.ncols() {
        return Err(Error::dims("hamiltonian (square)", h.nrows(), h.ncols()));
    }
    let resid = hermitian_residual(h);
    if resid > HERMITIAN_TOL * h.norm().max(1.0) {
        return Err(Error::NotHermitian(resid));
    }
    let d = h.nrows();
    let id = identity(d);
    let m = (kron(&id, h) - kron(&h.transpose(), &id)) * crate::operator_space::linalg::c(0.0, -1.0);
    SuperOperator::new(m, d)
}

/// `(Ā ⊗ A) − ½(I ⊗ A†A) − ½((A†A)ᵀ ⊗ I)`, the unit-rate dissipator
/// `X ↦ A X A† − ½{A†A, X}`.
pub fn dissipator_piece(a: &ComplexMatrix) -> Result<SuperOperator> {
    if a.nrows() != a.ncols() {
        return Err(Error::dims("jump operator (square)", a.nrows(), a.ncols()));
    }
    let d = a.nrows();
    let id = identity(d);
    let ada = a.adjoint() * a;
    let m = kron(&a.conjugate(), a) - (kron(&id, &ada) + kron(&ada.transpose(), &id)).scale(0.5);
    SuperOperator::new(m, d)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermSource {
    Hamiltonian(ComplexMatrix),
    Dissipator(ComplexMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTerm {
    rate: RateFunction,
    piece: SuperOperator,
    source: TermSource,
}

impl GeneratorTerm {
    pub fn hamiltonian(h: ComplexMatrix, rate: RateFunction) -> Result<Self> {
        Ok(Self {
            piece: hamiltonian_piece(&h)?,
            source: TermSource::Hamiltonian(h),
            rate,
        })
    }

    pub fn dissipator(jump: ComplexMatrix, rate: RateFunction) -> Result<Self> {
        Ok(Self {
            piece: dissipator_piece(&jump)?,
            source: TermSource::Dissipator(jump),
            rate,
        })
    }

    pub fn rate(&self) -> &RateFunction {
        &self.rate
    }

    pub fn piece(&self) -> &SuperOperator {
        &self.piece
    }

    pub fn source(&self) -> &TermSource {
        &self.source
    }

    /// `‖G*(I)‖_F`; zero for trace-preserving generator pieces.
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.piece.hilbert_dim();
        self.piece.dual().apply(&identity(d)).map(|m| m.norm()).unwrap_or(f64::INFINITY)
    }

    /// `‖G(X†) − G(X)†‖_F` for a given `X`.
    pub fn hermiticity_residual(&self, x: &ComplexMatrix) -> Result<f64> {
        let lhs = self.piece.apply(&x.adjoint())?;
        let rhs = self.piece.apply(x)?.adjoint();
        Ok((lhs - rhs).norm())
    }
}

/// Terms sharing a rate shape, summed with their multipliers.
#[derive(Debug, Clone)]
pub struct RateClass {
    pub rate: RateFunction,
    pub piece: SuperOperator,
    /// Indices of the model terms folded into this class.
    pub terms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    dim: usize,
    terms: Vec<GeneratorTerm>,
    pub name: String,
    pub description: String,
}

impl GeneratorModel {
    pub fn new(dim: usize, name: impl Into<String>) -> Self {
        Self {
            dim,
            terms: Vec::new(),
            name: name.into(),
            description: String::new(),
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn push(&mut self, term: GeneratorTerm) -> Result<()> {
        let d = term.piece.hilbert_dim();
        if d != self.dim {
            return Err(Error::dims(format!("terms[{}]", self.terms.len()), self.dim, d));
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn with_term(mut self, term: GeneratorTerm) -> Result<Self> {
        self.push(term)?;
        Ok(self)
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[GeneratorTerm] {
        &self.terms
    }

    pub fn generator_at(&self, t: f64) -> Result<SuperOperator> {
        let mut total = SuperOperator::zero(self.dim).into_matrix();
        for term in &self.terms {
            let f = term.rate.eval(t)?;
            if f != 0.0 {
                total += term.piece.matrix().scale(f);
            }
        }
        SuperOperator::new(total, self.dim)
    }

    /// Merge terms with proportional rates. Terms whose rate is
    /// structurally zero are dropped.
    pub fn rate_classes(&self) -> Vec<RateClass> {
        let mut classes: Vec<RateClass> = Vec::new();
        for (k, term) in self.terms.iter().enumerate() {
            if term.rate.is_identically_zero() {
                continue;
            }
            let (shape, mult) = term.rate.shape();
            let scaled = term.piece.scale(mult);
            match classes.iter_mut().find(|c| c.rate == shape) {
                Some(class) => {
                    class.piece = class.piece.add(&scaled).expect("uniform dimension");
                    class.terms.push(k);
                }
                None => classes.push(RateClass {
                    rate: shape,
                    piece: scaled,
                    terms: vec![k],
                }),
            }
        }
        classes
    }

    /// `Σ_k F_k(t) G_k` with `F_k(t) = ∫₀ᵗ f_k`, summed over rate classes.
    pub fn integrated_generator(&self, t: f64) -> Result<SuperOperator> {
        let mut total = SuperOperator::zero(self.dim).into_matrix();
        for class in self.rate_classes() {
            total += class.piece.matrix().scale(class.rate.integral(t)?);
        }
        SuperOperator::new(total, self.dim)
    }
}

fn normalized_commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = a.norm() * b.norm();
    if scale == 0.0 {
        return 0.0;
    }
    commutator(a, b).norm() / scale
}

#[derive(Debug, Clone, Copy)]
pub struct CommutativityOptions {
    pub tol: f64,
    pub samples: usize,
    /// Sampled times are drawn from `(0, horizon]`.
    pub horizon: f64,
    pub seed: u64,
}

impl Default for CommutativityOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            samples: 10,
            horizon: 10.0,
            seed: crate::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutativityReport {
    pub commuting: bool,
    /// Max of `‖[G_j, G_k]‖ / (‖G_j‖‖G_k‖)` over rate-class pairs; decides
    /// the verdict.
    pub max_pair_residual: f64,
    /// Same quantity over the raw (unmerged) model terms.
    pub term_pair_residual: f64,
    /// Max normalized `‖[L(tᵢ), L(tⱼ)]‖` over random time pairs. Necessary,
    /// not sufficient.
    pub sampled_residual: f64,
    pub rate_classes: usize,
    pub tolerance: f64,
    pub samples: usize,
}

pub fn check_commutativity(model: &GeneratorModel, opts: CommutativityOptions) -> Result<CommutativityReport> {
    let classes = model.rate_classes();
    let mut class_resid: f64 = 0.0;
    for (i, a) in classes.iter().enumerate() {
        for b in &classes[i + 1..] {
            class_resid = class_resid.max(normalized_commutator(a.piece.matrix(), b.piece.matrix()));
        }
    }
    let active: Vec<&GeneratorTerm> = model.terms.iter().filter(|t| !t.rate.is_identically_zero()).collect();
    let mut term_resid: f64 = 0.0;
    for (i, a) in active.iter().enumerate() {
        for b in &active[i + 1..] {
            term_resid = term_resid.max(normalized_commutator(a.piece.matrix(), b.piece.matrix()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sampled: f64 = 0.0;
    for _ in 0..opts.samples {
        let t1 = opts.horizon * (1.0 - rng.random::<f64>());
        let t2 = opts.horizon * (1.0 - rng.random::<f64>());
        let l1 = model.generator_at(t1)?;
        let l2 = model.generator_at(t2)?;
        sampled = sampled.max(normalized_commutator(l1.matrix(), l2.matrix()));
    }
    Ok(CommutativityReport {
        commuting: class_resid <= opts.tol,
        max_pair_residual: class_resid,
        term_pair_residual: term_resid,
        sampled_residual: sampled,
        rate_classes: classes.len(),
        tolerance: opts.tol,
        samples: opts.samples,
    })
}

/// Convenience: reject non-commuting models with [`Error::NonCommuting`].
pub fn require_commuting(model: &GeneratorModel) -> Result<()> {
    let report = check_commutativity(
        model,
        CommutativityOptions {
            samples: 0,
            ..Default::default()
        },
    )?;
    if report.commuting {
        Ok(())
    } else {
        Err(Error::NonCommuting(report.max_pair_residual))
    }
}
