//! Hypothesis-testing relative entropy and the relative-entropy moments.
//!
//! For states `ρ = Σ λ_x P_x` and `σ = Σ μ_y Q_y`, the log-likelihood ratio
//! `Z` takes the value `log₂(λ_x / μ_y)` with probability `λ_x Tr{P_x Q_y}`.
//! Its mean, variance and absolute third central moment are `D`, `V`, `T`.
//!
//! `D_H^ε(ρ‖σ) = -log₂ min { Tr{Λσ} : 0 <= Λ <= I, Tr{Λρ} >= 1 - ε }` is
//! bracketed: the lower end is achieved by an explicit test, the upper end is
//! certified by a dual feasible point `(s, (sρ - σ)_+)` of the semidefinite
//! program, giving `min Tr{Λσ} >= s(1-ε) - Tr{(sρ - σ)_+}` for every `s > 0`.
//! All logarithms are base 2.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::operator::{c, CMatrix, DensityOperator, HermitianOperator, MeasurementOperator, Projector};

/// Eigenvalues at or below this are treated as exact zeros.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Overlaps `Tr{P_x Q_y}` at or below this contribute no atom.
pub const OVERLAP_TOL: f64 = 1e-12;
/// Eigenvalues closer than this are merged into one eigenprojector.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-10;
pub const BISECTION_ITERS: usize = 200;
pub const BISECTION_REL_WIDTH: f64 = 1e-12;

/// A quantity in bits that may be `+∞` (orthogonal supports). Serialized as
/// a JSON number, or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bits {
    Finite(f64),
    Infinite,
}

impl Bits {
    /// `-log₂ x`, infinite at `x <= 0`.
    pub fn neg_log2(x: f64) -> Self {
        if x > 0.0 {
            Bits::Finite(-x.log2())
        } else {
            Bits::Infinite
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Bits::Finite(v) => Some(v),
            Bits::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Bits::Infinite)
    }

    /// `f64::INFINITY` for the sentinel; for arithmetic only, never for output.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bits::Finite(v) => write!(f, "{v:.16e}"),
            Bits::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bits::Finite(v) => s.serialize_f64(*v),
            Bits::Infinite => s.serialize_str("inf"),
        }
    }
}

fn check_pair(rho: &DensityOperator, sigma: &DensityOperator) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: sigma.dim() });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub z: f64,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogLikelihoodDistribution {
    pub atoms: Vec<Atom>,
    /// Mass `λ_x Tr{P_x Q_y}` with `λ_x > 0`, `μ_y = 0`; `Z = +∞` there.
    pub infinite_mass: f64,
}

impl LogLikelihoodDistribution {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.p).sum::<f64>() + self.infinite_mass
    }

    /// `supp(ρ) ⊆ supp(σ)` up to [`SUPPORT_TOL`].
    pub fn support_contained(&self) -> bool {
        self.infinite_mass <= SUPPORT_TOL
    }

    /// `Pr{Z >= z}`, counting the infinite mass.
    pub fn prob_at_least(&self, z: f64) -> f64 {
        self.atoms.iter().filter(|a| a.z >= z).map(|a| a.p).sum::<f64>() + self.infinite_mass
    }
}

/// Distribution of `Z` over rank-one spectral pairs.
pub fn z_distribution(rho: &DensityOperator, sigma: &DensityOperator) -> Result<LogLikelihoodDistribution> {
    check_pair(rho, sigma)?;
    let sr = rho.spectral_decompose();
    let ss = sigma.spectral_decompose();
    let overlaps = sr.overlaps(&ss);
    let mut atoms = Vec::new();
    let mut infinite_mass = 0.0;
    for (x, &lambda) in sr.eigenvalues.iter().enumerate() {
        if lambda <= SUPPORT_TOL {
            continue;
        }
        for (y, &mu) in ss.eigenvalues.iter().enumerate() {
            let overlap = overlaps[(x, y)];
            if overlap <= OVERLAP_TOL {
                continue;
            }
            if mu <= SUPPORT_TOL {
                infinite_mass += lambda * overlap;
            } else {
                atoms.push(Atom { z: (lambda / mu).log2(), p: lambda * overlap });
            }
        }
    }
    Ok(LogLikelihoodDistribution { atoms, infinite_mass })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DvtTriple {
    /// Mean of `Z` (bits).
    pub d: f64,
    /// Variance of `Z` (bits²).
    pub v: f64,
    /// `E|Z - D|³` (bits³).
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dvt {
    Finite(DvtTriple),
    /// `supp(ρ) ⊄ supp(σ)`: `D = +∞` and the moments are undefined.
    Infinite { excluded_mass: f64 },
}

impl Dvt {
    pub fn triple(&self) -> Option<DvtTriple> {
        match self {
            Dvt::Finite(t) => Some(*t),
            Dvt::Infinite { .. } => None,
        }
    }

    pub fn relative_entropy(&self) -> Bits {
        self.triple().map_or(Bits::Infinite, |t| Bits::Finite(t.d))
    }
}

impl LogLikelihoodDistribution {
    pub fn moments(&self) -> Dvt {
        if !self.support_contained() {
            return Dvt::Infinite { excluded_mass: self.infinite_mass };
        }
        let d: f64 = self.atoms.iter().map(|a| a.p * a.z).sum();
        let v: f64 = self.atoms.iter().map(|a| a.p * (a.z - d).powi(2)).sum();
        let t: f64 = self.atoms.iter().map(|a| a.p * (a.z - d).abs().powi(3)).sum();
        Dvt::Finite(DvtTriple { d, v, t })
    }
}

/// `D(ρ‖σ)`, `V(ρ‖σ)`, `T(ρ‖σ)`.
pub fn dvt(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Dvt> {
    Ok(z_distribution(rho, sigma)?.moments())
}

#[derive(Clone, Debug, Serialize)]
pub struct DhBracket {
    pub lower: Bits,
    pub upper: Bits,
    /// Test achieving `lower`: `Tr{Λρ} >= 1 - ε` and `-log₂ Tr{Λσ} = lower`.
    #[serde(skip)]
    pub witness: MeasurementOperator,
    /// Threshold `t` of the bracketing tests `{ρ - tσ > 0}`; absent when the
    /// value is infinite.
    pub t: Option<f64>,
}

impl DhBracket {
    pub fn width(&self) -> f64 {
        match (self.lower, self.upper) {
            (Bits::Finite(l), Bits::Finite(u)) => u - l,
            (Bits::Infinite, Bits::Infinite) => 0.0,
            _ => f64::INFINITY,
        }
    }
}

/// Projector onto the strictly positive eigenspace of `ρ - tσ` and its
/// `ρ`-weight.
fn threshold_test(rho: &DensityOperator, sigma: &DensityOperator, t: f64) -> (Projector, f64) {
    let p = rho.sub(&sigma.scale(t)).spectral_projector_above(0.0);
    let g = p.trace_with(rho);
    (p, g)
}

/// `s w - Tr{(sρ - σ)_+}`: for every `s > 0`, a lower bound on `Tr{Λσ}` over
/// tests with `Tr{Λρ} >= w`.
fn dual_value(rho: &DensityOperator, sigma: &DensityOperator, target: f64, s: f64) -> f64 {
    let positive: f64 = rho.scale(s).sub(sigma).eigenvalues().iter().filter(|&&e| e > 0.0).sum();
    s * target - positive
}

/// `D_H^ε(ρ‖σ)` as a certified bracket.
///
/// If the kernel of `σ` already carries `ρ`-weight `1 - ε`, the projector
/// onto it is a zero-cost test and both ends are `+∞`. Otherwise `t` is
/// bisected on `Tr{Λ_t ρ}`, which is non-increasing in `t` because `Λ_t`
/// minimizes `Tr{Λ(tσ - ρ)}` over all tests.
pub fn dh_epsilon(rho: &DensityOperator, sigma: &DensityOperator, eps: f64) -> Result<DhBracket> {
    check_pair(rho, sigma)?;
    check_eps(eps)?;
    neyman_pearson(rho, sigma, 1.0 - eps)
}

/// Least `σ`-weight over tests with `ρ`-weight at least `target ∈ (0, 1]`,
/// bracketed as `-log₂` of it.
pub(crate) fn neyman_pearson(rho: &DensityOperator, sigma: &DensityOperator, target: f64) -> Result<DhBracket> {
    let ss = sigma.spectral_decompose();
    let kernel = ss.projector_where(|mu| mu <= SUPPORT_TOL);
    if kernel.rank() > 0 && kernel.trace_with(rho) >= target - SUPPORT_TOL {
        return Ok(DhBracket {
            lower: Bits::Infinite,
            upper: Bits::Infinite,
            witness: kernel.effect().clone(),
            t: None,
        });
    }

    let lambda_max = rho.eigenvalues()[0];
    let mu_min = ss.eigenvalues.iter().copied().filter(|&mu| mu > SUPPORT_TOL).fold(f64::INFINITY, f64::min);
    // above λ_max(ρ) / μ_min⁺(σ), ρ - tσ <= 0 whenever supp ρ ⊆ supp σ
    let mut t_hi = 2.0 * lambda_max / mu_min;
    let (mut p_hi, mut g_hi) = threshold_test(rho, sigma, t_hi);
    let mut doublings = 0;
    while g_hi >= target {
        if doublings == 1000 || !t_hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "no threshold test drops below weight {target}; the kernel of sigma carries almost all of it"
            )));
        }
        t_hi *= 2.0;
        (p_hi, g_hi) = threshold_test(rho, sigma, t_hi);
        doublings += 1;
    }
    let mut t_lo = 0.0;
    let (mut p_lo, mut g_lo) = threshold_test(rho, sigma, t_lo);
    // the support of ρ has weight 1 up to rounding
    let target = target.min(g_lo);
    for _ in 0..BISECTION_ITERS {
        if t_hi - t_lo <= BISECTION_REL_WIDTH * t_hi {
            break;
        }
        let mid = 0.5 * (t_lo + t_hi);
        let (p, g) = threshold_test(rho, sigma, mid);
        if g >= target {
            (t_lo, p_lo, g_lo) = (mid, p, g);
        } else {
            (t_hi, p_hi, g_hi) = (mid, p, g);
        }
    }

    let gamma = ((g_lo - target) / (g_lo - g_hi)).clamp(0.0, 1.0);
    let witness_matrix: CMatrix = p_lo.matrix() * c(1.0 - gamma) + p_hi.matrix() * c(gamma);
    let witness = MeasurementOperator::from_parts(HermitianOperator::from_matrix_unchecked(witness_matrix));
    let lower = Bits::neg_log2(witness.trace_with(sigma));

    let mut best_dual = f64::NEG_INFINITY;
    for t in [t_lo, t_hi] {
        if t > 0.0 {
            best_dual = best_dual.max(dual_value(rho, sigma, target, 1.0 / t));
        }
    }
    let upper = Bits::neg_log2(best_dual);
    Ok(DhBracket { lower, upper, witness, t: Some(t_hi) })
}

/// Exact `D_H^ε` for commuting states with eigenvalues `lambda`, `mu` in a
/// common basis: a fractional knapsack filling `ρ`-weight `1 - ε` at least
/// `σ`-cost, taking outcomes in decreasing order of `λ/μ`.
pub fn dh_commuting_oracle(lambda: &[f64], mu: &[f64], eps: f64) -> Result<Bits> {
    if lambda.len() != mu.len() {
        return Err(Error::DimensionMismatch { expected: lambda.len(), actual: mu.len() });
    }
    check_eps(eps)?;
    let mut items: Vec<(f64, f64)> = lambda.iter().zip(mu).map(|(&l, &m)| (l, m)).filter(|&(l, _)| l > 0.0).collect();
    // free items (μ = 0) first, then by λ/μ descending, compared as l1 μ2 vs l2 μ1
    items.sort_by(|a, b| (b.0 * a.1).partial_cmp(&(a.0 * b.1)).expect("finite weights"));
    let mut need = 1.0 - eps;
    let mut cost = 0.0;
    for (l, m) in items {
        if need <= 0.0 {
            break;
        }
        let take = (need / l).min(1.0);
        cost += take * m;
        need -= take * l;
    }
    Ok(Bits::neg_log2(cost))
}

/// Distinct eigenvalues of `op` with their eigenprojectors, merging values
/// within [`EIGEN_CLUSTER_TOL`] and flushing values at or below
/// [`SUPPORT_TOL`] to an exact zero.
pub fn eigenspaces(op: &HermitianOperator) -> Vec<(f64, CMatrix)> {
    let sd = op.spectral_decompose();
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &e) in sd.eigenvalues.iter().enumerate() {
        let e = if e <= SUPPORT_TOL { 0.0 } else { e };
        match groups.last_mut() {
            Some((head, members)) if (*head - e).abs() <= EIGEN_CLUSTER_TOL || (*head == 0.0 && e == 0.0) => {
                members.push(i)
            }
            _ => groups.push((e, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let value = members.iter().map(|&i| sd.eigenvalues[i]).sum::<f64>() / members.len() as f64;
            let value = if value <= SUPPORT_TOL { 0.0 } else { value };
            let mut p = CMatrix::zeros(op.dim(), op.dim());
            for &i in &members {
                let v = sd.eigenvector(i);
                p += &v * v.adjoint();
            }
            (value, p)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TestOperatorReport {
    pub thresh: f64,
    /// `Pr{Z >= log₂ thresh}`.
    pub pr_z: f64,
    /// Least-`σ`-weight test with `ρ`-weight `pr_z`.
    #[serde(skip)]
    pub test: MeasurementOperator,
    pub tr_rho: f64,
    pub tr_sigma: f64,
    /// Projector onto the support of `Σ_{λ_x/μ_y >= thresh} Q_y P_x Q_y`.
    #[serde(skip)]
    pub support_projector: Projector,
    pub support_rank: usize,
    pub support_tr_rho: f64,
    pub support_tr_sigma: f64,
}

impl TestOperatorReport {
    /// `Tr{Tρ} >= Pr{Z >= log₂ L} - tol` and `Tr{Tσ} <= 1/L + tol` for the
    /// optimal test.
    pub fn holds(&self, tol: f64) -> bool {
        self.tr_rho >= self.pr_z - tol && self.tr_sigma <= 1.0 / self.thresh + tol
    }

    /// The same two inequalities for the support projector.
    pub fn support_holds(&self, tol: f64) -> bool {
        self.support_tr_rho >= self.pr_z - tol && self.support_tr_sigma <= 1.0 / self.thresh + tol
    }
}

/// Support projector of `T̃_L = Σ_{λ_x/μ_y >= L} Q_y P_x Q_y`, where `P_x`,
/// `Q_y` are the eigenprojectors of distinct eigenvalues and the kernel of `σ`
/// counts as `μ = 0`, ratio `+∞`.
///
/// It always carries `ρ`-weight at least `Pr{Z >= log₂ L}`, and for commuting
/// pairs `σ`-weight at most `1/L`. For non-commuting pairs the `σ`-weight can
/// exceed `1/L` (the span of `{Q_y P_x}` over several `y` is larger than
/// `P_x`), so [`build_tl`] also returns the Neyman–Pearson test of the same
/// `ρ`-weight, which is the least-`σ` test meeting the first inequality.
pub fn support_test(rho: &DensityOperator, sigma: &DensityOperator, thresh: f64) -> Result<Projector> {
    check_pair(rho, sigma)?;
    check_thresh(thresh)?;
    let d = rho.dim();
    let mut tilde = CMatrix::zeros(d, d);
    let qy = eigenspaces(sigma);
    for (lambda, p) in eigenspaces(rho) {
        if lambda == 0.0 {
            continue;
        }
        for (mu, q) in &qy {
            if *mu == 0.0 || lambda >= thresh * mu {
                tilde += q * &p * q;
            }
        }
    }
    let tilde = HermitianOperator::new(tilde)?;
    let norm = tilde.eigenvalues()[0].max(0.0);
    Ok(if norm > 0.0 { tilde.spectral_projector_above(1e-10 * norm) } else { Projector::zeros(d) })
}

fn check_thresh(thresh: f64) -> Result<()> {
    if !(thresh > 0.0) || !thresh.is_finite() {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {thresh}")));
    }
    Ok(())
}

/// Test operators for `Tr{Tρ} >= Pr{Z >= log₂ L}`, `Tr{Tσ} <= 1/L`.
pub fn build_tl(rho: &DensityOperator, sigma: &DensityOperator, thresh: f64) -> Result<TestOperatorReport> {
    let support_projector = support_test(rho, sigma, thresh)?;
    let pr_z = z_distribution(rho, sigma)?.prob_at_least(thresh.log2());
    let test = if pr_z > SUPPORT_TOL {
        neyman_pearson(rho, sigma, pr_z.min(1.0))?.witness
    } else {
        MeasurementOperator::zeros(rho.dim())
    };
    Ok(TestOperatorReport {
        thresh,
        pr_z,
        tr_rho: test.trace_with(rho),
        tr_sigma: test.trace_with(sigma),
        test,
        support_rank: support_projector.rank(),
        support_tr_rho: support_projector.trace_with(rho),
        support_tr_sigma: support_projector.trace_with(sigma),
        support_projector,
    })
}

fn marginals(zeta: &DensityOperator, d_r: usize, d_b: usize) -> Result<(DensityOperator, DensityOperator)> {
    if d_r * d_b != zeta.dim() {
        return Err(Error::InconsistentSubsystems { dims: vec![d_r, d_b], dim: zeta.dim() });
    }
    Ok((zeta.partial_trace(&[d_r, d_b], &[0])?, zeta.partial_trace(&[d_r, d_b], &[1])?))
}

/// `ζ_R ⊗ ζ_B` for a state on `R ⊗ B`.
pub fn product_of_marginals(zeta: &DensityOperator, d_r: usize, d_b: usize) -> Result<DensityOperator> {
    let (r, b) = marginals(zeta, d_r, d_b)?;
    Ok(r.tensor(&b))
}

/// `I(R;B)`, `V(R;B)`, `T(R;B)`: the moments of `ζ_RB` against `ζ_R ⊗ ζ_B`.
pub fn mutual_information_dvt(zeta: &DensityOperator, d_r: usize, d_b: usize) -> Result<Dvt> {
    dvt(zeta, &product_of_marginals(zeta, d_r, d_b)?)
}

/// `I_H^ε(R;B) = D_H^ε(ζ_RB ‖ ζ_R ⊗ ζ_B)`.
pub fn mutual_information_dh(zeta: &DensityOperator, d_r: usize, d_b: usize, eps: f64) -> Result<DhBracket> {
    dh_epsilon(zeta, &product_of_marginals(zeta, d_r, d_b)?, eps)
}
