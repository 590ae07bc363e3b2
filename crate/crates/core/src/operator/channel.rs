use super::subsystem::{inverse_permutation, left_mul_local, permute_subsystems};
use super::{c, max_abs, CMatrix, DensityOperator, Error, Result, TRACE_PRESERVING_TOL};

/// Completely positive trace-preserving map `ρ ↦ Σ K ρ K†`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<CMatrix>,
}

impl QuantumChannel {
    pub fn new(dim_in: usize, dim_out: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidParameter("channel needs at least one Kraus operator".into()));
        }
        let mut completeness = CMatrix::zeros(dim_in, dim_in);
        for k in &kraus {
            if k.nrows() != dim_out {
                return Err(Error::DimensionMismatch { expected: dim_out, actual: k.nrows() });
            }
            if k.ncols() != dim_in {
                return Err(Error::DimensionMismatch { expected: dim_in, actual: k.ncols() });
            }
            completeness += k.adjoint() * k;
        }
        let deviation = max_abs(&(completeness - CMatrix::identity(dim_in, dim_in)));
        if deviation > TRACE_PRESERVING_TOL {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self { dim_in, dim_out, kraus })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim_in: dim, dim_out: dim, kraus: vec![CMatrix::identity(dim, dim)] }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        let d = u.nrows();
        Self::new(d, d, vec![u])
    }

    /// Replaces every input with `I/d` via Kraus operators `|i⟩⟨j| / √d`.
    pub fn completely_depolarizing(dim: usize) -> Self {
        let s = 1.0 / (dim as f64).sqrt();
        let mut kraus = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut k = CMatrix::zeros(dim, dim);
                k[(i, j)] = c(s);
                kraus.push(k);
            }
        }
        Self { dim_in: dim, dim_out: dim, kraus }
    }

    /// `ρ ↦ (1-p) ρ + p I/d`.
    pub fn depolarizing(dim: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("depolarizing probability {p} outside [0, 1]")));
        }
        let mut kraus = vec![CMatrix::identity(dim, dim) * c((1.0 - p).sqrt())];
        kraus.extend(Self::completely_depolarizing(dim).kraus.into_iter().map(|k| k * c(p.sqrt())));
        Self::new(dim, dim, kraus)
    }

    /// Qubit amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("damping {gamma} outside [0, 1]")));
        }
        let k0 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - gamma).sqrt())]);
        let k1 = CMatrix::from_row_slice(2, 2, &[c(0.0), c(gamma.sqrt()), c(0.0), c(0.0)]);
        Self::new(2, 2, vec![k0, k1])
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `Σ K X K†` on a raw matrix.
    pub fn apply_matrix(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    pub fn apply(&self, state: &DensityOperator) -> Result<DensityOperator> {
        if state.dim() != self.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, actual: state.dim() });
        }
        DensityOperator::from_trusted(self.apply_matrix(state.matrix()))
    }

    /// Applies the channel to factor `subsystem` of a state on `dims`; the
    /// output lives on `dims` with that factor's dimension replaced by
    /// `dim_out`.
    pub fn apply_on(&self, state: &DensityOperator, subsystem: usize, dims: &[usize]) -> Result<DensityOperator> {
        let total: usize = dims.iter().product();
        if total != state.dim() || subsystem >= dims.len() {
            return Err(Error::InconsistentSubsystems { dims: dims.to_vec(), dim: state.dim() });
        }
        if dims[subsystem] != self.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, actual: dims[subsystem] });
        }
        let mut perm = vec![subsystem];
        perm.extend((0..dims.len()).filter(|&i| i != subsystem));
        let moved = permute_subsystems(state.matrix(), dims, &perm)?;
        let r = total / self.dim_in;
        let mut out = CMatrix::zeros(self.dim_out * r, self.dim_out * r);
        for k in &self.kraus {
            let left = left_mul_local(k, &moved, r);
            out += left_mul_local(k, &left.adjoint(), r).adjoint();
        }
        let mut new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
        new_dims[0] = self.dim_out;
        let back = permute_subsystems(&out, &new_dims, &inverse_permutation(&perm))?;
        DensityOperator::from_trusted(back)
    }
}
