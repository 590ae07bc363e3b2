//! Naimark dilation of a binary measurement `{Λ, I - Λ}` to a projector on
//! system ⊗ qubit probe, and the union bound for sequences of such
//! measurements.
//!
//! Index ordering is system ⊗ probe: basis vector `|s⟩|p⟩` sits at `2s + p`.
//! With the probe starting in `|0⟩`,
//!
//! ```text
//! U = √(I-Λ) ⊗ I + √Λ ⊗ (|1⟩⟨0| - |0⟩⟨1|),   Π = U† (I ⊗ |1⟩⟨1|) U.
//! ```
//!
//! Tracing the probe out after projecting with `Π` (outcome "yes") or
//! `Π̂ = I - Π` ("no") leaves the completely positive maps with Kraus pairs
//! `{Λ, √(I-Λ)√Λ}` and `{I-Λ, √Λ√(I-Λ)}`. Sequential decoders use these maps
//! directly and never materialize probes.

use crate::error::{Error, Result};
use crate::operator::{
    apply_local, c, kron, CMatrix, DensityOperator, HermitianOperator, MeasurementOperator, Projector,
};
use crate::union_bound::BoundReport;

/// Allowed excursion of `Λ`'s spectrum outside `[0, 1]` before dilating.
pub const DILATION_SPECTRUM_TOL: f64 = 1e-6;

/// Largest `d · 2^L` for which the explicit-probe evaluation is attempted.
pub const MAX_DILATED_DIM: usize = 4096;

#[derive(Clone, Debug)]
pub struct NaimarkDilation {
    lambda: MeasurementOperator,
    sqrt_lambda: CMatrix,
    sqrt_complement: CMatrix,
    unitary: CMatrix,
    pi: Projector,
}

/// Dilates a measurement operator already known to satisfy `0 <= Λ <= I`.
pub fn dilate(lambda: &MeasurementOperator) -> NaimarkDilation {
    let d = lambda.dim();
    let (sqrt_lambda, sqrt_complement) = lambda.square_roots();
    let probe_identity = CMatrix::identity(2, 2);
    let mut rotation = CMatrix::zeros(2, 2);
    rotation[(1, 0)] = c(1.0);
    rotation[(0, 1)] = c(-1.0);
    let unitary = kron(&sqrt_complement, &probe_identity) + kron(&sqrt_lambda, &rotation);
    let mut flag = CMatrix::zeros(2, 2);
    flag[(1, 1)] = c(1.0);
    let pi_matrix = unitary.adjoint() * kron(&CMatrix::identity(d, d), &flag) * &unitary;
    let pi = Projector::from_parts(HermitianOperator::from_matrix_unchecked(pi_matrix), d);
    NaimarkDilation { lambda: lambda.clone(), sqrt_lambda, sqrt_complement, unitary, pi }
}

/// Validates `op` as a measurement operator with [`DILATION_SPECTRUM_TOL`] and
/// dilates it.
pub fn dilate_operator(op: HermitianOperator) -> Result<NaimarkDilation> {
    Ok(dilate(&MeasurementOperator::with_tolerance(op, DILATION_SPECTRUM_TOL)?))
}

impl NaimarkDilation {
    pub fn lambda(&self) -> &MeasurementOperator {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.dim()
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn pi(&self) -> &Projector {
        &self.pi
    }

    pub fn pi_hat(&self) -> Projector {
        self.pi.complement()
    }

    /// `Tr{Π (ρ ⊗ |0⟩⟨0|)}`, evaluated on the dilated space.
    pub fn probability(&self, rho: &DensityOperator) -> f64 {
        let mut probe = CMatrix::zeros(2, 2);
        probe[(0, 0)] = c(1.0);
        crate::operator::trace_product(self.pi.matrix(), &kron(rho.matrix(), &probe))
    }

    /// Kraus pair of the probe-elided "yes" map.
    pub fn yes_kraus(&self) -> [CMatrix; 2] {
        [self.lambda.matrix().clone(), &self.sqrt_complement * &self.sqrt_lambda]
    }

    /// Kraus pair of the probe-elided "no" map.
    pub fn no_kraus(&self) -> [CMatrix; 2] {
        [self.lambda.complement().matrix().clone(), &self.sqrt_lambda * &self.sqrt_complement]
    }

    /// `Tr_P{Π (X ⊗ |0⟩⟨0|) Π}` without the probe.
    pub fn yes_update(&self, x: &CMatrix) -> CMatrix {
        conjugate_pair(&self.yes_kraus(), x)
    }

    /// `Tr_P{Π̂ (X ⊗ |0⟩⟨0|) Π̂}` without the probe.
    pub fn no_update(&self, x: &CMatrix) -> CMatrix {
        conjugate_pair(&self.no_kraus(), x)
    }
}

fn conjugate_pair(kraus: &[CMatrix; 2], x: &CMatrix) -> CMatrix {
    kraus.iter().map(|k| k * x * k.adjoint()).fold(CMatrix::zeros(x.nrows(), x.ncols()), |acc, t| acc + t)
}

fn check_sequence(state: &DensityOperator, lambdas: &[MeasurementOperator]) -> Result<()> {
    if lambdas.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "union bound needs at least two measurement operators, got {}",
            lambdas.len()
        )));
    }
    if let Some(l) = lambdas.iter().find(|l| l.dim() != state.dim()) {
        return Err(Error::DimensionMismatch { expected: state.dim(), actual: l.dim() });
    }
    Ok(())
}

/// `Tr{Π_L..Π_1 (ρ ⊗ |0..0⟩⟨0..0|) Π_1..Π_L}` with one explicit probe qubit per
/// measurement. The state is split into eigenvectors and each is pushed
/// through the projectors as a `d · 2^L` vector.
pub fn explicit_success_prob(state: &DensityOperator, lambdas: &[MeasurementOperator]) -> Result<f64> {
    let d = state.dim();
    let l = lambdas.len();
    let total = (l < 32).then(|| d.checked_mul(1usize << l)).flatten().unwrap_or(usize::MAX);
    if total > MAX_DILATED_DIM {
        return Err(Error::DimensionCap { dim: total, cap: MAX_DILATED_DIM });
    }
    let dilations: Vec<NaimarkDilation> = lambdas.iter().map(dilate).collect();
    let mut dims = vec![d];
    dims.extend(std::iter::repeat(2).take(l));
    let stride = total / d;
    let sd = state.spectral_decompose();
    let mut success = 0.0;
    for (j, &p) in sd.eigenvalues.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        // |v_j⟩ ⊗ |0..0⟩ has its weight at index s · 2^L
        let v = sd.eigenvector(j);
        let mut x = CMatrix::zeros(total, 1);
        for s in 0..d {
            x[(s * stride, 0)] = v[s];
        }
        for (i, dil) in dilations.iter().enumerate() {
            x = apply_local(&x, &dims, &[0, i + 1], dil.pi().matrix())?;
        }
        success += p * x.norm_squared();
    }
    Ok(success)
}

/// The same probability through the probe-elided "yes" maps.
pub fn elided_success_prob(state: &DensityOperator, lambdas: &[MeasurementOperator]) -> f64 {
    let mut x = state.matrix().clone();
    for lambda in lambdas {
        x = dilate(lambda).yes_update(&x);
    }
    x.diagonal().iter().map(|z| z.re).sum()
}

/// Union bound for a sequence of binary measurements, with the left-hand side
/// `Tr{ρ} - Tr{Π_L..Π_1 (ρ ⊗ |0̄⟩⟨0̄|) Π_1..Π_L}` evaluated on explicit probes
/// and `a_i = Tr{(I - Λ_i) ρ}`.
pub fn povm_union_bound(state: &DensityOperator, lambdas: &[MeasurementOperator], c: f64) -> Result<BoundReport> {
    check_sequence(state, lambdas)?;
    let lhs = state.trace() - explicit_success_prob(state, lambdas)?;
    let a: Vec<f64> = lambdas.iter().map(|l| l.complement().probability(state)).collect();
    BoundReport::assemble(lhs, a, c)?.check("POVM union bound")
}
