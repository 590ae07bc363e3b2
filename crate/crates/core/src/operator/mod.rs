//! Dense complex operator algebra on finite-dimensional Hilbert spaces.
//!
//! Every type here validates its invariants at construction and is immutable
//! afterwards: a [`DensityOperator`] is always positive semi-definite with unit
//! trace, a [`MeasurementOperator`] always satisfies `0 <= Λ <= I`, and so on.
//! The wrappers dereference to [`HermitianOperator`] so generic operator
//! arithmetic is available on all of them.

mod channel;
pub mod json;
pub mod random;
mod subsystem;

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use channel::QuantumChannel;
pub use subsystem::{apply_local, kron, left_mul_local, partial_trace_matrix, permute_subsystems};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Max-abs tolerance for `A = A†`.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Eigenvalues above `-POSITIVITY_TOL` are clipped to zero in density operators.
pub const POSITIVITY_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;
/// Allowed excursion of a measurement operator's spectrum outside `[0, 1]`.
pub const SPECTRUM_TOL: f64 = 1e-9;
pub const IDEMPOTENCE_TOL: f64 = 1e-8;
pub const NORM_TOL: f64 = 1e-9;
pub const TRACE_PRESERVING_TOL: f64 = 1e-8;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest entry modulus of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Real part of `Tr{A B}`.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

/// A square complex matrix equal to its adjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Validates `A = A†` to [`HERMITIAN_TOL`] and stores the symmetrized part.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let adj = matrix.adjoint();
        let deviation = max_abs_diff(&matrix, &adj);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::from_matrix_unchecked((matrix + adj) * c(0.5)))
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix_unchecked(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_matrix_unchecked(CMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x)));
        Self::from_matrix_unchecked(CMatrix::from_diagonal(&d))
    }

    /// `|v⟩⟨v|` for an arbitrary (not necessarily normalized) vector.
    pub fn outer(v: &CVector) -> Self {
        Self::from_matrix_unchecked(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// `Tr{A B}`; real for Hermitian pairs.
    pub fn trace_with(&self, other: &HermitianOperator) -> f64 {
        trace_product(&self.matrix, &other.matrix)
    }

    /// `⟨v|A|v⟩`.
    pub fn expectation_vector(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.matrix * v)).re
    }

    pub fn spectral_decompose(&self) -> SpectralDecomposition {
        SpectralDecomposition::of(&self.matrix)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Functional calculus `f(A) = Σ f(λ) |u⟩⟨u|`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let sd = self.spectral_decompose();
        let mapped: Vec<f64> = sd.eigenvalues.iter().map(|&l| f(l)).collect();
        Self::from_matrix_unchecked(sd.reconstruct_with(&mapped))
    }

    pub fn tensor(&self, other: &HermitianOperator) -> HermitianOperator {
        Self::from_matrix_unchecked(kron(&self.matrix, &other.matrix))
    }

    /// Traces out every subsystem not listed in `keep`; kept factors stay in
    /// their original order.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<HermitianOperator> {
        Ok(Self::from_matrix_unchecked(partial_trace_matrix(&self.matrix, dims, keep)?))
    }

    pub fn add(&self, other: &HermitianOperator) -> HermitianOperator {
        Self::from_matrix_unchecked(&self.matrix + &other.matrix)
    }

    pub fn sub(&self, other: &HermitianOperator) -> HermitianOperator {
        Self::from_matrix_unchecked(&self.matrix - &other.matrix)
    }

    pub fn scale(&self, s: f64) -> HermitianOperator {
        Self::from_matrix_unchecked(&self.matrix * c(s))
    }

    /// Projector onto the eigenspace with eigenvalues strictly above `threshold`.
    pub fn spectral_projector_above(&self, threshold: f64) -> Projector {
        let sd = self.spectral_decompose();
        sd.projector_where(|l| l > threshold)
    }
}

/// Rank-one eigen-decomposition `A = Σ λ_x |u_x⟩⟨u_x|` with descending eigenvalues.
///
/// Degenerate eigenvalues are not grouped: every eigenvector gets its own
/// rank-one piece.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    fn of(m: &CMatrix) -> Self {
        let eig = m.clone().symmetric_eigen();
        let d = m.nrows();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = CMatrix::from_fn(d, d, |r, col| eig.eigenvectors[(r, order[col])]);
        Self { eigenvalues, eigenvectors }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, i: usize) -> CVector {
        self.eigenvectors.column(i).into_owned()
    }

    pub fn projector(&self, i: usize) -> Projector {
        Projector::from_parts(HermitianOperator::outer(&self.eigenvector(i)), 1)
    }

    pub fn projectors(&self) -> Vec<Projector> {
        (0..self.len()).map(|i| self.projector(i)).collect()
    }

    /// Sum of the rank-one pieces whose eigenvalue satisfies `pred`.
    pub fn projector_where(&self, pred: impl Fn(f64) -> bool) -> Projector {
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| if pred(l) { 1.0 } else { 0.0 }).collect();
        let rank = weights.iter().filter(|&&w| w > 0.5).count();
        Projector::from_parts(HermitianOperator::from_matrix_unchecked(self.reconstruct_with(&weights)), rank)
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(&self.eigenvalues)
    }

    /// `Σ w_x |u_x⟩⟨u_x|` with caller-supplied weights.
    pub fn reconstruct_with(&self, weights: &[f64]) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &w) in weights.iter().enumerate() {
            scaled.column_mut(j).scale_mut(w);
        }
        scaled * u.adjoint()
    }

    /// Matrix of squared overlaps `|⟨u_x|v_y⟩|² = Tr{P_x Q_y}`.
    pub fn overlaps(&self, other: &SpectralDecomposition) -> DMatrix<f64> {
        let g = self.eigenvectors.adjoint() * &other.eigenvectors;
        g.map(|z| z.norm_sqr())
    }
}

/// Positive semi-definite operator with unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    /// Eigenvalues in `[-1e-9, 0)` are clipped to zero; anything more negative
    /// is rejected.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceNotOne { trace, tolerance: TRACE_TOL });
        }
        let sd = op.spectral_decompose();
        let min = sd.eigenvalues.last().copied().unwrap_or(0.0);
        if min < -POSITIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min, tolerance: POSITIVITY_TOL });
        }
        if min < 0.0 {
            let clipped: Vec<f64> = sd.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
            return Ok(Self { op: HermitianOperator::from_matrix_unchecked(sd.reconstruct_with(&clipped)) });
        }
        Ok(Self { op })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::from_diagonal(probs))
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self { op: HermitianOperator::outer(psi.amplitudes()) }
    }

    /// Mixture `Σ p_j |ψ_j⟩⟨ψ_j|`.
    pub fn mixture(weights: &[f64], states: &[PureState]) -> Result<Self> {
        let dim = states.first().map(|s| s.dim()).unwrap_or(0);
        let mut m = CMatrix::zeros(dim, dim);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: s.dim() });
            }
            m += s.amplitudes() * s.amplitudes().adjoint() * c(*w);
        }
        Self::from_matrix(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim).scale(1.0 / dim as f64) }
    }

    /// Basis state `|i⟩⟨i|`.
    pub fn basis(dim: usize, i: usize) -> Self {
        Self::from_pure(&PureState::basis(dim, i))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        Self { op: self.op.tensor(&other.op) }
    }

    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<DensityOperator> {
        Ok(Self { op: self.op.partial_trace(dims, keep)? })
    }

    /// Renormalizes a positive operator whose trace is known to be 1 up to
    /// accumulated rounding; used for outputs of validated maps.
    pub(crate) fn from_trusted(m: CMatrix) -> Result<Self> {
        let h = HermitianOperator::new(m)?;
        let t = h.trace();
        Self::new(h.scale(1.0 / t))
    }
}

impl Deref for DensityOperator {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.op
    }
}

/// Effect operator `0 <= Λ <= I`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOperator {
    op: HermitianOperator,
}

impl MeasurementOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        Self::with_tolerance(op, SPECTRUM_TOL)
    }

    /// Accepts spectra within `[-tol, 1 + tol]`.
    pub fn with_tolerance(op: HermitianOperator, tol: f64) -> Result<Self> {
        let ev = op.eigenvalues();
        let max = ev.first().copied().unwrap_or(0.0);
        let min = ev.last().copied().unwrap_or(0.0);
        if min < -tol || max > 1.0 + tol {
            return Err(Error::SpectrumOutOfRange { min, max });
        }
        Ok(Self { op })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    pub(crate) fn from_parts(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn identity(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { op: HermitianOperator::zeros(dim) }
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    /// `I - Λ`.
    pub fn complement(&self) -> MeasurementOperator {
        Self { op: HermitianOperator::identity(self.dim()).sub(&self.op) }
    }

    /// `√Λ` and `√(I-Λ)` from one eigen-decomposition, with the spectrum
    /// clipped to `[0, 1]` first.
    pub fn square_roots(&self) -> (CMatrix, CMatrix) {
        let sd = self.op.spectral_decompose();
        let clipped: Vec<f64> = sd.eigenvalues.iter().map(|&l| l.clamp(0.0, 1.0)).collect();
        let root: Vec<f64> = clipped.iter().map(|l| l.sqrt()).collect();
        let co_root: Vec<f64> = clipped.iter().map(|l| (1.0 - l).sqrt()).collect();
        (sd.reconstruct_with(&root), sd.reconstruct_with(&co_root))
    }

    /// `Tr{Λ ρ}`.
    pub fn probability(&self, rho: &DensityOperator) -> f64 {
        self.op.trace_with(rho)
    }
}

impl Deref for MeasurementOperator {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.op
    }
}

/// Orthogonal projector.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    effect: MeasurementOperator,
    rank: usize,
}

impl Projector {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let m = op.matrix();
        let deviation = max_abs_diff(&(m * m), m);
        if deviation > IDEMPOTENCE_TOL {
            return Err(Error::NotIdempotent { deviation });
        }
        let effect = MeasurementOperator::new(op)?;
        let rank = effect.eigenvalues().iter().filter(|&&l| l >= 0.5).count();
        Ok(Self { effect, rank })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    pub(crate) fn from_parts(op: HermitianOperator, rank: usize) -> Self {
        Self { effect: MeasurementOperator::from_parts(op), rank }
    }

    /// `V V†` for a matrix `V` with orthonormal columns.
    pub fn from_orthonormal_columns(v: &CMatrix) -> Result<Self> {
        let gram = v.adjoint() * v;
        let deviation = max_abs_diff(&gram, &CMatrix::identity(v.ncols(), v.ncols()));
        if deviation > IDEMPOTENCE_TOL {
            return Err(Error::NotIdempotent { deviation });
        }
        Ok(Self::from_parts(HermitianOperator::from_matrix_unchecked(v * v.adjoint()), v.ncols()))
    }

    /// `|ψ⟩⟨ψ|` for a unit vector.
    pub fn onto(psi: &PureState) -> Self {
        Self::from_parts(HermitianOperator::outer(psi.amplitudes()), 1)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(HermitianOperator::identity(dim), dim)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_parts(HermitianOperator::zeros(dim), 0)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn effect(&self) -> &MeasurementOperator {
        &self.effect
    }

    pub fn operator(&self) -> &HermitianOperator {
        self.effect.operator()
    }

    /// `Q = I - P`.
    pub fn complement(&self) -> Projector {
        Self { effect: self.effect.complement(), rank: self.dim() - self.rank }
    }
}

impl Deref for Projector {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.effect
    }
}

/// State vector; normalized unless built with [`PureState::unnormalized`].
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amplitudes: amplitudes.unscale(norm) })
    }

    /// Skips the norm check; used for scaled instances of the pure-state bound.
    pub fn unnormalized(amplitudes: CVector) -> Self {
        Self { amplitudes }
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[i] = c(1.0);
        Self { amplitudes: v }
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(CVector::from_iterator(amps.len(), amps.iter().map(|&a| c(a))))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        Self { amplitudes: self.amplitudes.kronecker(&other.amplitudes) }
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator::from_pure(self)
    }
}
