//! Sequential binary projective measurements and the tunable quantum union
//! bound.
//!
//! For projectors `P_1..P_L`, a state `ρ`, individual failure probabilities
//! `a_i = Tr{(I - P_i) ρ}` and any `c > 0`:
//!
//! ```text
//! 1 - Tr{P_L..P_1 ρ P_1..P_{L-1}}
//!     <= (1+c) a_L + (2+c+1/c) Σ_{i=2}^{L-1} a_i + (2+1/c) a_1
//! ```
//!
//! This module evaluates both sides, minimizes the right-hand side over `c`,
//! compares it with the `4 Σ a_i` and `2 √(Σ a_i)` bounds, and checks the
//! intermediate identities used to establish the inequality for pure states.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, CVector, DensityOperator, Projector, PureState};

/// Slack allowed when asserting `lhs <= rhs`.
pub const BOUND_TOL: f64 = 1e-8;

/// Fixed `c` values swept by campaigns, in addition to the optimum.
pub const C_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

#[derive(Clone, Debug)]
pub enum BoundState {
    Mixed(DensityOperator),
    /// A vector state; may be unnormalized, in which case both sides scale by `‖ψ‖²`.
    Pure(PureState),
}

/// A state together with an ordered list of at least two projectors.
#[derive(Clone, Debug)]
pub struct UnionBoundInstance {
    state: BoundState,
    projectors: Vec<Projector>,
}

impl UnionBoundInstance {
    pub fn new(state: BoundState, projectors: Vec<Projector>) -> Result<Self> {
        if projectors.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "union bound needs at least two projectors, got {}",
                projectors.len()
            )));
        }
        let dim = match &state {
            BoundState::Mixed(rho) => rho.dim(),
            BoundState::Pure(psi) => psi.dim(),
        };
        if let Some(p) = projectors.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: p.dim() });
        }
        Ok(Self { state, projectors })
    }

    pub fn mixed(rho: DensityOperator, projectors: Vec<Projector>) -> Result<Self> {
        Self::new(BoundState::Mixed(rho), projectors)
    }

    pub fn pure(psi: PureState, projectors: Vec<Projector>) -> Result<Self> {
        Self::new(BoundState::Pure(psi), projectors)
    }

    pub fn state(&self) -> &BoundState {
        &self.state
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    /// `Tr{ρ}` or `‖ψ‖²`.
    pub fn norm(&self) -> f64 {
        match &self.state {
            BoundState::Mixed(rho) => rho.trace(),
            BoundState::Pure(psi) => psi.norm_sqr(),
        }
    }

    /// `a_i = Tr{(I - P_i) ρ}` (or `‖(I - P_i) ψ‖²`).
    pub fn individual_errors(&self) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|p| {
                let q = p.complement();
                match &self.state {
                    BoundState::Mixed(rho) => q.trace_with(rho),
                    BoundState::Pure(psi) => q.expectation_vector(psi.amplitudes()),
                }
            })
            .collect()
    }

    /// The same instance with one more projector appended.
    pub fn with_appended(&self, p: Projector) -> Result<Self> {
        let mut projectors = self.projectors.clone();
        projectors.push(p);
        Self::new(self.state.clone(), projectors)
    }
}

/// `Tr{P_L..P_1 ρ P_1..P_{L-1}}`, evaluated by literal matrix products (or
/// `‖P_L..P_1 ψ‖²` for vector states).
pub fn sequential_success_prob(inst: &UnionBoundInstance) -> f64 {
    let ps = inst.projectors();
    match inst.state() {
        BoundState::Mixed(rho) => {
            let mut left: CMatrix = rho.matrix().clone();
            for p in ps {
                left = p.matrix() * left;
            }
            let mut right = CMatrix::identity(inst.dim(), inst.dim());
            for p in &ps[..ps.len() - 1] {
                right *= p.matrix();
            }
            crate::operator::trace_product(&left, &right)
        }
        BoundState::Pure(psi) => {
            let mut v: CVector = psi.amplitudes().clone();
            for p in ps {
                v = p.matrix() * v;
            }
            v.norm_squared()
        }
    }
}

fn check_coefficients(a: &[f64]) -> Result<()> {
    if a.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least two failure probabilities, got {}", a.len())));
    }
    Ok(())
}

/// The three coefficient groups of the bound: `rhs(c) = K + c·A + B/c` with
/// `A = Σ_{i=2}^{L} a_i`, `B = Σ_{i=1}^{L-1} a_i`.
fn decompose(a: &[f64]) -> (f64, f64, f64) {
    let l = a.len();
    let middle: f64 = a[1..l - 1].iter().sum();
    let k = a[l - 1] + 2.0 * middle + 2.0 * a[0];
    let coeff_c = a[l - 1] + middle;
    let coeff_inv_c = middle + a[0];
    (k, coeff_c, coeff_inv_c)
}

/// `(1+c) a_L + (2+c+1/c) Σ_{i=2}^{L-1} a_i + (2+1/c) a_1`.
pub fn union_rhs(a: &[f64], c: f64) -> Result<f64> {
    check_coefficients(a)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be positive and finite, got {c}")));
    }
    let l = a.len();
    let middle: f64 = a[1..l - 1].iter().sum();
    Ok((1.0 + c) * a[l - 1] + (2.0 + c + 1.0 / c) * middle + (2.0 + 1.0 / c) * a[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimumBranch {
    /// `c* = √(B/A)` with both sums positive.
    Interior,
    /// `a_2 = .. = a_L = 0`: the bound decreases in `c`; infimum at `c → ∞`.
    InfimumAtInfinity,
    /// `a_1 = .. = a_{L-1} = 0`: the bound increases in `c`; infimum at `c → 0⁺`.
    InfimumAtZero,
    /// Every `a_i` is zero; the bound is zero for all `c`.
    AllZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimalC {
    /// Minimizer when it is attained.
    pub c_star: Option<f64>,
    /// Minimum (or infimum) of the right-hand side over `c > 0`.
    pub rhs_min: f64,
    pub branch: OptimumBranch,
}

pub fn optimal_c(a: &[f64]) -> Result<OptimalC> {
    check_coefficients(a)?;
    let (k, coeff_c, coeff_inv_c) = decompose(a);
    let out = match (coeff_c > 0.0, coeff_inv_c > 0.0) {
        (true, true) => {
            let c_star = (coeff_inv_c / coeff_c).sqrt();
            OptimalC {
                c_star: Some(c_star),
                rhs_min: k + 2.0 * (coeff_c * coeff_inv_c).sqrt(),
                branch: OptimumBranch::Interior,
            }
        }
        (false, true) => OptimalC { c_star: None, rhs_min: k, branch: OptimumBranch::InfimumAtInfinity },
        (true, false) => OptimalC { c_star: None, rhs_min: k, branch: OptimumBranch::InfimumAtZero },
        (false, false) => OptimalC { c_star: None, rhs_min: k, branch: OptimumBranch::AllZero },
    };
    Ok(out)
}

/// `4 Σ a_i`.
pub fn gao_rhs(a: &[f64]) -> f64 {
    4.0 * a.iter().sum::<f64>()
}

/// `2 √(Σ a_i)`.
pub fn sen_rhs(a: &[f64]) -> f64 {
    2.0 * a.iter().sum::<f64>().max(0.0).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    /// `1 - Tr{P_L..P_1 ρ P_1..P_{L-1}}` (or `‖ψ‖² - ‖P_L..P_1 ψ‖²`).
    pub lhs: f64,
    pub individual_errors: Vec<f64>,
    pub c: f64,
    pub rhs_ours: f64,
    pub rhs_gao: f64,
    pub rhs_sen: f64,
    pub optimum: OptimalC,
}

impl BoundReport {
    pub(crate) fn assemble(lhs: f64, a: Vec<f64>, c: f64) -> Result<Self> {
        let rhs_ours = union_rhs(&a, c)?;
        let optimum = optimal_c(&a)?;
        Ok(Self { lhs, rhs_gao: gao_rhs(&a), rhs_sen: sen_rhs(&a), individual_errors: a, c, rhs_ours, optimum })
    }

    pub fn slack(&self) -> f64 {
        self.rhs_ours - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs_ours + BOUND_TOL
    }

    pub(crate) fn check(self, context: &str) -> Result<Self> {
        if self.holds() {
            Ok(self)
        } else {
            Err(Error::BoundViolated {
                context: format!("{context}: lhs {} > rhs {} at c = {}", self.lhs, self.rhs_ours, self.c),
                excess: self.lhs - self.rhs_ours,
            })
        }
    }
}

/// Both sides of the bound at `c`. A violation beyond [`BOUND_TOL`] is returned
/// as [`Error::BoundViolated`]; callers persist the instance as a counterexample.
pub fn verify_union_bound(inst: &UnionBoundInstance, c: f64) -> Result<BoundReport> {
    let lhs = inst.norm() - sequential_success_prob(inst);
    BoundReport::assemble(lhs, inst.individual_errors(), c)?.check("union bound")
}

/// Residuals of the projector identities and slacks of the inequalities that
/// lead from Cauchy–Schwarz to the pure-state bound.
///
/// Identity residuals are absolute values of complex differences; slacks are
/// `rhs - lhs` and must be non-negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LemmaResiduals {
    /// `Σ ⟨Q_i P_{i-1}..P_1⟩ - (1 - ⟨P_L..P_1⟩)`.
    pub forward: f64,
    /// `Σ ⟨P_1..P_{i-1} Q_i⟩ - (1 - ⟨P_1..P_L⟩)`.
    pub reversed: f64,
    /// `Σ ⟨P_1..P_{i-1} Q_i P_{i-1}..P_1⟩ - (1 - ⟨P_1..P_L..P_1⟩)`.
    pub sandwiched: f64,
    /// Cauchy–Schwarz inequality between `1 - √⟨P_L⟩ √⟨P_1..P_L..P_1⟩` and
    /// `Σ √⟨Q_i⟩ √⟨P_1..Q_i..P_1⟩`.
    pub cauchy_schwarz_slack: f64,
    /// `Σ_{i<L} ‖Q_i ψ‖² - Σ_{i>=2} ‖Q_i (I - P_{i-1}..P_1) ψ‖²`.
    pub telescoping_slack: f64,
}

impl LemmaResiduals {
    pub fn max_identity_residual(&self) -> f64 {
        self.forward.max(self.reversed).max(self.sandwiched)
    }

    pub fn min_slack(&self) -> f64 {
        self.cauchy_schwarz_slack.min(self.telescoping_slack)
    }
}

/// Evaluates the identities on `|ψ⟩` with `P_{i-1}..P_1 = I` for `i = 1`.
/// "1" in each identity is `⟨ψ|ψ⟩`, so scaled vectors are handled too.
pub fn check_lemma_identities(psi: &PureState, projectors: &[Projector]) -> Result<LemmaResiduals> {
    if projectors.is_empty() {
        return Err(Error::InvalidParameter("no projectors".into()));
    }
    if let Some(p) = projectors.iter().find(|p| p.dim() != psi.dim()) {
        return Err(Error::DimensionMismatch { expected: psi.dim(), actual: p.dim() });
    }
    let l = projectors.len();
    let v = psi.amplitudes();
    let one = psi.norm_sqr();

    // chain[i] = P_i..P_1 ψ, chain[0] = ψ
    let mut chain: Vec<CVector> = Vec::with_capacity(l + 1);
    chain.push(v.clone());
    for p in projectors {
        let next = p.matrix() * chain.last().expect("non-empty");
        chain.push(next);
    }

    let mut sum_forward = num_complex::Complex64::new(0.0, 0.0);
    let mut sum_reversed = num_complex::Complex64::new(0.0, 0.0);
    let mut sum_sandwiched = 0.0;
    let mut sum_cs = 0.0;
    let mut telescoping_lhs = 0.0;
    let mut telescoping_rhs = 0.0;
    for (i, p) in projectors.iter().enumerate() {
        let q = p.complement();
        let phi = &chain[i];
        let q_phi = q.matrix() * phi;
        let q_psi = q.matrix() * v;
        sum_forward += v.dotc(&q_phi);
        sum_reversed += phi.dotc(&q_psi);
        let sandwich = phi.dotc(&q_phi).re;
        sum_sandwiched += sandwich;
        let q_expect = v.dotc(&q_psi).re;
        sum_cs += q_expect.max(0.0).sqrt() * sandwich.max(0.0).sqrt();
        if i + 1 < l {
            telescoping_rhs += q_psi.norm_squared();
        }
        if i >= 1 {
            telescoping_lhs += (&q_psi - &q_phi).norm_squared();
        }
    }

    let full_forward = v.dotc(&chain[l]);
    let head = &chain[l - 1];
    let p_last = projectors[l - 1].matrix();
    let full_reversed = head.dotc(&(p_last * v));
    let full_sandwich = head.dotc(&(p_last * head)).re;
    let last_expect = projectors[l - 1].expectation_vector(v);

    let cs_lhs = one - last_expect.max(0.0).sqrt() * full_sandwich.max(0.0).sqrt();
    Ok(LemmaResiduals {
        forward: (sum_forward - (one - full_forward)).norm(),
        reversed: (sum_reversed - (one - full_reversed)).norm(),
        sandwiched: (sum_sandwiched - (one - full_sandwich)).abs(),
        cauchy_schwarz_slack: sum_cs - cs_lhs,
        telescoping_slack: telescoping_rhs - telescoping_lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{random, HermitianOperator};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const A3: [f64; 3] = [0.01, 0.02, 0.03];

    /// Independent minimizer: brute-force grid over c in (0, 10] with step 1e-5.
    fn grid_minimum(a: &[f64]) -> (f64, f64) {
        (1..=1_000_000)
            .map(|k| {
                let c = k as f64 * 1e-5;
                (c, union_rhs(a, c).unwrap())
            })
            .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    fn plus() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::from_real(&[s, s]).unwrap()
    }

    #[test]
    fn all_identity_projectors_succeed() {
        let rho = random::random_density(&mut random::trial_rng(1, 0), 3, 3).unwrap();
        let inst = UnionBoundInstance::mixed(rho, vec![Projector::identity(3); 4]).unwrap();
        assert_abs_diff_eq!(sequential_success_prob(&inst), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn repeated_commuting_projector_gives_single_probability() {
        let rho = DensityOperator::from_diagonal(&[0.7, 0.2, 0.1]).unwrap();
        let p = Projector::new(HermitianOperator::from_diagonal(&[1.0, 1.0, 0.0])).unwrap();
        let inst = UnionBoundInstance::mixed(rho, vec![p.clone(), p.clone(), p]).unwrap();
        assert_abs_diff_eq!(sequential_success_prob(&inst), 0.9, epsilon = 1e-14);
    }

    #[test]
    fn plus_then_zero_on_zero_is_quarter() {
        // P_2 P_1 |0⟩ = |0⟩⟨0|+⟩⟨+|0⟩ = ½|0⟩, squared norm ¼
        let rho = DensityOperator::basis(2, 0);
        let ps = vec![Projector::onto(&plus()), Projector::onto(&PureState::basis(2, 0))];
        let inst = UnionBoundInstance::mixed(rho, ps.clone()).unwrap();
        assert_abs_diff_eq!(sequential_success_prob(&inst), 0.25, epsilon = 1e-14);
        let pure = UnionBoundInstance::pure(PureState::basis(2, 0), ps).unwrap();
        assert_abs_diff_eq!(sequential_success_prob(&pure), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn single_projector_rejected() {
        let err = UnionBoundInstance::mixed(DensityOperator::basis(2, 0), vec![Projector::identity(2)]);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
        assert!(union_rhs(&[0.1], 1.0).is_err());
    }

    #[test]
    fn rhs_coefficient_arithmetic() {
        assert_abs_diff_eq!(union_rhs(&A3, 1.0).unwrap(), 0.17, epsilon = 1e-15);
        assert_abs_diff_eq!(union_rhs(&A3, 0.5).unwrap(), 0.175, epsilon = 1e-15);
        assert_eq!(union_rhs(&[0.0; 5], 3.0).unwrap(), 0.0);
        assert!(union_rhs(&A3, 0.0).is_err());
        assert!(union_rhs(&A3, -1.0).is_err());
    }

    #[test]
    fn two_projectors_have_empty_middle_sum() {
        // (1+c) a_2 + (2+1/c) a_1
        assert_abs_diff_eq!(union_rhs(&[0.1, 0.2], 2.0).unwrap(), 3.0 * 0.2 + 2.5 * 0.1, epsilon = 1e-15);
    }

    #[test]
    fn optimal_c_matches_grid_search() {
        let opt = optimal_c(&A3).unwrap();
        assert_eq!(opt.branch, OptimumBranch::Interior);
        assert_abs_diff_eq!(opt.c_star.unwrap(), 0.774_596_669_241_483_4, epsilon = 1e-12);
        // frozen from the grid oracle: min at c = 0.77460, rhs = 0.16745966692486
        assert_abs_diff_eq!(opt.rhs_min, 0.167_459_666_924_148_3, epsilon = 1e-12);
        let (c_grid, rhs_grid) = grid_minimum(&A3);
        assert_abs_diff_eq!(c_grid, 0.7746, epsilon = 1e-5);
        assert!(opt.rhs_min <= rhs_grid + 1e-15);
        assert_abs_diff_eq!(opt.rhs_min, rhs_grid, epsilon = 1e-6);
    }

    #[test]
    fn uniform_errors_give_unit_c() {
        let opt = optimal_c(&[0.05; 6]).unwrap();
        assert_abs_diff_eq!(opt.c_star.unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_optimum_branches() {
        assert_eq!(optimal_c(&[0.0; 4]).unwrap(), OptimalC { c_star: None, rhs_min: 0.0, branch: OptimumBranch::AllZero });
        let inf = optimal_c(&[0.1, 0.0, 0.0]).unwrap();
        assert_eq!(inf.branch, OptimumBranch::InfimumAtInfinity);
        assert_abs_diff_eq!(inf.rhs_min, 0.2, epsilon = 1e-15);
        assert!(union_rhs(&[0.1, 0.0, 0.0], 1e6).unwrap() - inf.rhs_min < 1e-6);
        let zero = optimal_c(&[0.0, 0.0, 0.3]).unwrap();
        assert_eq!(zero.branch, OptimumBranch::InfimumAtZero);
        assert_abs_diff_eq!(zero.rhs_min, 0.3, epsilon = 1e-15);
        assert!(optimal_c(&[]).is_err());
    }

    #[test]
    fn comparison_bounds() {
        assert_abs_diff_eq!(gao_rhs(&A3), 0.24, epsilon = 1e-15);
        assert_abs_diff_eq!(sen_rhs(&A3), 2.0 * 0.06f64.sqrt(), epsilon = 1e-15);
        assert_eq!(gao_rhs(&[0.0]), 0.0);
        assert_eq!(sen_rhs(&[0.0]), 0.0);
        assert_abs_diff_eq!(gao_rhs(&[0.25; 4]), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sen_rhs(&[0.25; 4]), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn commuting_events_obey_classical_union_bound() {
        let rho = DensityOperator::from_diagonal(&[0.4, 0.3, 0.2, 0.1]).unwrap();
        let ps: Vec<Projector> = [[1.0, 1.0, 1.0, 0.0], [1.0, 1.0, 0.0, 1.0], [1.0, 0.0, 1.0, 1.0]]
            .iter()
            .map(|d| Projector::new(HermitianOperator::from_diagonal(d)).unwrap())
            .collect();
        let inst = UnionBoundInstance::mixed(rho, ps).unwrap();
        for c in C_GRID {
            let r = verify_union_bound(&inst, c).unwrap();
            let classical: f64 = r.individual_errors.iter().sum();
            assert!(r.lhs <= classical + 1e-14 && classical <= r.rhs_ours + 1e-14);
        }
    }

    #[test]
    fn stabilized_state_has_zero_bound() {
        let psi = PureState::basis(3, 0);
        let mut rng = random::trial_rng(4, 0);
        let ps: Vec<Projector> = (0..3)
            .map(|_| {
                // projector containing |0⟩: |0⟩⟨0| plus a random direction orthogonal to it
                let v = random::random_pure_state(&mut rng, 2);
                let w = CVector::from_iterator(3, [num_complex::Complex64::new(0.0, 0.0), v.amplitudes()[0], v.amplitudes()[1]]);
                Projector::new(HermitianOperator::outer(psi.amplitudes()).add(&HermitianOperator::outer(&w))).unwrap()
            })
            .collect();
        let r = verify_union_bound(&UnionBoundInstance::mixed(psi.density(), ps).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.rhs_ours, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn random_mixed_instance_is_ordered() {
        let mut rng = random::trial_rng(8, 0);
        let rho = random::random_density(&mut rng, 8, 8).unwrap();
        let ps = (0..4).map(|i| random::random_projector(&mut rng, 8, 5 + i % 3).unwrap()).collect();
        let r = verify_union_bound(&UnionBoundInstance::mixed(rho, ps).unwrap(), 1.0).unwrap();
        assert!(r.lhs <= r.rhs_ours && r.rhs_ours <= r.rhs_gao);
    }

    #[test]
    fn orthogonal_rank_one_projectors_forward_identity() {
        // L = 2, P_1 = |0⟩⟨0|, P_2 = |1⟩⟨1|, ψ = |0⟩: ⟨Q_2 P_1⟩ = 1 = 1 - ⟨P_2 P_1⟩
        let ps = vec![Projector::onto(&PureState::basis(2, 0)), Projector::onto(&PureState::basis(2, 1))];
        let res = check_lemma_identities(&PureState::basis(2, 0), &ps).unwrap();
        assert!(res.max_identity_residual() < 1e-15);
        assert!(res.min_slack() >= 0.0);
    }

    #[test]
    fn identity_projectors_have_zero_residuals() {
        let psi = random::random_pure_state(&mut random::trial_rng(3, 0), 4);
        let res = check_lemma_identities(&psi, &vec![Projector::identity(4); 3]).unwrap();
        assert!(res.max_identity_residual() < 1e-14);
        assert!(res.min_slack() >= -1e-14);
    }

    #[test]
    fn random_four_dim_identities() {
        let mut rng = random::trial_rng(12, 0);
        let psi = random::random_pure_state(&mut rng, 4);
        let ps: Vec<Projector> = (1..=3).map(|r| random::random_projector(&mut rng, 4, r).unwrap()).collect();
        let res = check_lemma_identities(&psi, &ps).unwrap();
        assert!(res.max_identity_residual() <= 1e-10, "{res:?}");
        assert!(res.min_slack() >= -1e-10, "{res:?}");
    }

    fn random_instance(seed: u64, dim: usize, l: usize, pure: bool) -> UnionBoundInstance {
        let mut rng = random::trial_rng(seed, 0);
        let ps = (0..l).map(|_| random::random_projector(&mut rng, dim, dim / 2 + 1).unwrap()).collect();
        if pure {
            UnionBoundInstance::pure(random::random_pure_state(&mut rng, dim), ps).unwrap()
        } else {
            UnionBoundInstance::mixed(random::random_density(&mut rng, dim, dim).unwrap(), ps).unwrap()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bound_holds_on_random_instances(seed in any::<u64>(), dim in 2usize..12, l in 2usize..7, pure in any::<bool>()) {
            let inst = random_instance(seed, dim, l, pure);
            let opt = optimal_c(&inst.individual_errors()).unwrap();
            for c in C_GRID.iter().copied().chain(opt.c_star) {
                prop_assert!(verify_union_bound(&inst, c).is_ok());
            }
        }

        #[test]
        fn c_equal_one_never_exceeds_gao(a in prop::collection::vec(0.0f64..1.0, 2..10)) {
            prop_assert!(union_rhs(&a, 1.0).unwrap() <= gao_rhs(&a) + 1e-12);
        }

        #[test]
        fn closed_form_optimum_is_minimal(a in prop::collection::vec(0.0f64..1.0, 2..8), c in 1e-3f64..1e3) {
            let opt = optimal_c(&a).unwrap();
            prop_assert!(opt.rhs_min <= union_rhs(&a, c).unwrap() + 1e-12);
            if let Some(cs) = opt.c_star {
                prop_assert!((union_rhs(&a, cs).unwrap() - opt.rhs_min).abs() < 1e-12);
            }
        }

        #[test]
        fn appending_identity_keeps_lhs(seed in any::<u64>(), dim in 2usize..8, l in 2usize..6) {
            let inst = random_instance(seed, dim, l, false);
            let longer = inst.with_appended(Projector::identity(dim)).unwrap();
            let before = verify_union_bound(&inst, 1.0).unwrap();
            let after = verify_union_bound(&longer, 1.0).unwrap();
            prop_assert!((before.lhs - after.lhs).abs() < 1e-12);
            prop_assert!(after.individual_errors.last().unwrap().abs() < 1e-12);
            // a_L moves from the (1+c) role to the (2+c+1/c) role
            let a = &before.individual_errors;
            let expected = before.rhs_ours + a[a.len() - 1] * (1.0 + 1.0);
            prop_assert!((after.rhs_ours - expected).abs() < 1e-12);
        }

        #[test]
        fn mixed_lhs_is_average_of_pure_lhs(seed in any::<u64>(), dim in 2usize..8, l in 2usize..5) {
            let inst = random_instance(seed, dim, l, false);
            let BoundState::Mixed(rho) = inst.state() else { unreachable!() };
            let sd = rho.spectral_decompose();
            let mixed = verify_union_bound(&inst, 1.0).unwrap().lhs;
            let mut averaged = 0.0;
            for (j, &p) in sd.eigenvalues.iter().enumerate() {
                let psi = PureState::unnormalized(sd.eigenvector(j));
                let pure = UnionBoundInstance::pure(psi, inst.projectors().to_vec()).unwrap();
                averaged += p * verify_union_bound(&pure, 1.0).unwrap().lhs;
            }
            prop_assert!((mixed - averaged).abs() < 1e-8);
        }

        #[test]
        fn lemma_identities_hold(seed in any::<u64>(), dim in 2usize..10, l in 1usize..7) {
            let mut rng = random::trial_rng(seed, 1);
            let psi = random::random_pure_state(&mut rng, dim);
            let ps: Vec<Projector> = (0..l).map(|k| random::random_projector(&mut rng, dim, 1 + k % dim).unwrap()).collect();
            let res = check_lemma_identities(&psi, &ps).unwrap();
            prop_assert!(res.max_identity_residual() <= 1e-9);
            prop_assert!(res.min_slack() >= -1e-9);
        }
    }
}
