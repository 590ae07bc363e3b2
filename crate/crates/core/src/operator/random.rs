//! Seeded instance generators.
//!
//! Every campaign owns a master seed; trial `k` draws from ChaCha20 stream `k`
//! of that seed, so trials are independent of each other and of the order in
//! which they are evaluated.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{
    c, CMatrix, DensityOperator, Error, HermitianOperator, MeasurementOperator, Projector, PureState, QuantumChannel,
    Result,
};

pub type TrialRng = ChaCha20Rng;

/// Independent stream `stream` under `master_seed`.
pub fn trial_rng(master_seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Matrix of i.i.d. standard complex Gaussians (`E|z|² = 1`).
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Haar-distributed unitary via QR with the phases of `R` fixed.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Normalized `G G†` with `G` a `dim × rank` complex Gaussian matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> Result<DensityOperator> {
    if rank == 0 || rank > dim {
        return Err(Error::InvalidRank { rank, dim });
    }
    let g = gaussian_matrix(rng, dim, rank);
    let m = &g * g.adjoint();
    let t: f64 = m.diagonal().iter().map(|z| z.re).sum();
    DensityOperator::from_matrix(m * c(1.0 / t))
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> PureState {
    let g = gaussian_matrix(rng, dim, 1);
    let v = DVector::from_iterator(dim, g.iter().copied());
    PureState::normalized(v).expect("Gaussian vector is nonzero almost surely")
}

/// Projector onto the span of the first `rank` columns of a Haar unitary.
/// `rank = 0` gives the zero projector.
pub fn random_projector<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> Result<Projector> {
    if rank > dim || dim == 0 {
        return Err(Error::InvalidRank { rank, dim });
    }
    if rank == dim {
        return Ok(Projector::identity(dim));
    }
    let u = random_unitary(rng, dim);
    Projector::from_orthonormal_columns(&u.columns(0, rank).into_owned())
}

/// `U diag(u_1..u_d) U†` with `u_i` uniform on `[0, 1]`.
pub fn random_measurement_operator<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> MeasurementOperator {
    let u = random_unitary(rng, dim);
    let diag: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let d = CMatrix::from_diagonal(&DVector::from_iterator(dim, diag.into_iter().map(c)));
    let op = HermitianOperator::new(&u * d * u.adjoint()).expect("unitary conjugate of a real diagonal");
    MeasurementOperator::new(op).expect("spectrum in [0, 1] by construction")
}

/// Random CPTP map: an isometry `V: C^dim_in → C^(num_kraus·dim_out)` from the
/// QR factor of stacked Gaussian blocks, cut into `num_kraus` Kraus operators.
pub fn random_channel<R: Rng + ?Sized>(
    rng: &mut R,
    dim_in: usize,
    dim_out: usize,
    num_kraus: usize,
) -> Result<QuantumChannel> {
    let rows = num_kraus * dim_out;
    if num_kraus == 0 || rows < dim_in {
        return Err(Error::InvalidParameter(format!(
            "{num_kraus} Kraus operators of size {dim_out}x{dim_in} cannot form an isometry"
        )));
    }
    let (q, _) = gaussian_matrix(rng, rows, dim_in).qr().unpack();
    let kraus = (0..num_kraus).map(|k| q.rows(k * dim_out, dim_out).into_owned()).collect();
    QuantumChannel::new(dim_in, dim_out, kraus)
}
