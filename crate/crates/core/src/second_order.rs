//! Gaussian CDF, the Berry–Esseen corrected expansion of the i.i.d.
//! hypothesis-testing relative entropy, and coding-rate lower bounds.
//!
//! For `n` copies, with `(D, V, T)` the relative-entropy triple and `C` the
//! Berry–Esseen constant,
//!
//! ```text
//! D_H^ε(ρ^⊗n ‖ σ^⊗n) >= nD + √(nV) Φ⁻¹(ε - C T / √(n V³))
//! ```
//!
//! whenever the argument of `Φ⁻¹` is positive.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypotest::DvtTriple;
use crate::operator::{CMatrix, DensityOperator, HermitianOperator};

/// Upper end of the known range `0.40973 <= C <= 0.4784`; any upper bound on
/// the constant keeps the expansion valid.
pub const BERRY_ESSEEN_C: f64 = 0.4784;

/// Largest dimension `d^n` for which `Ḡ_n` is formed densely.
pub const MAX_EXTENSION_DIM: usize = 4096;

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Φ⁻¹(p)` by Newton steps on [`phi`] kept inside a shrinking bracket, so the
/// result inverts `phi` itself to rounding.
pub fn phi_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("phi_inv needs p in (0, 1), got {p}")));
    }
    let mut x = 0.0;
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let f = phi(x) - p;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = f / density(x);
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpansionInput {
    pub n: u64,
    pub eps: f64,
    pub triple: DvtTriple,
    pub c_be: f64,
}

impl ExpansionInput {
    pub fn new(n: u64, eps: f64, triple: DvtTriple) -> Self {
        Self { n, eps, triple, c_be: BERRY_ESSEEN_C }
    }

    /// `C T / √(n V³)`.
    pub fn correction(&self) -> f64 {
        self.c_be * self.triple.t / (self.n as f64 * self.triple.v.powi(3)).sqrt()
    }

    /// Smallest `n` with `ε - C T / √(n V³) > 0`.
    pub fn min_blocklength(&self) -> u64 {
        let root = self.c_be * self.triple.t / (self.eps * self.triple.v.powf(1.5));
        (root * root).floor() as u64 + 1
    }
}

/// `nD + √(nV) Φ⁻¹(ε - C T / √(n V³))`.
pub fn expansion_lower_bound(inp: &ExpansionInput) -> Result<f64> {
    if inp.n == 0 {
        return Err(Error::InvalidParameter("blocklength must be at least 1".into()));
    }
    if !(inp.eps > 0.0 && inp.eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {}", inp.eps)));
    }
    if !(inp.triple.v > 0.0) || !(inp.triple.t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "expansion needs V > 0 and T >= 0, got V = {}, T = {}",
            inp.triple.v, inp.triple.t
        )));
    }
    let corrected = inp.eps - inp.correction();
    if corrected <= 0.0 {
        return Err(Error::BlocklengthTooSmall { n: inp.n, min_n: inp.min_blocklength() });
    }
    let n = inp.n as f64;
    Ok(n * inp.triple.d + (n * inp.triple.v).sqrt() * phi_inv(corrected)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateBound {
    pub n: u64,
    pub eps: f64,
    pub eta: f64,
    /// `I_H^{ε-η}` (or its lower bound) in bits over all `n` uses.
    pub information_bits: f64,
    /// `log₂(4ε/η²)`.
    pub penalty_bits: f64,
    /// `log₂ M` achievable over `n` uses.
    pub total_bits: f64,
    pub rate_bits_per_use: f64,
}

fn check_eps_eta(eps: f64, eta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if !(eta > 0.0 && eta < eps) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, eps) = (0, {eps}), got {eta}")));
    }
    Ok(())
}

/// `log₂(4ε/η²)`.
pub fn rate_penalty(eps: f64, eta: f64) -> f64 {
    (4.0 * eps / (eta * eta)).log2()
}

/// One-shot rate `I_H^{ε-η}(R;B) - log₂(4ε/η²)`.
pub fn ea_rate_lower_bound(i_h: f64, eps: f64, eta: f64) -> Result<RateBound> {
    check_eps_eta(eps, eta)?;
    let penalty_bits = rate_penalty(eps, eta);
    let total_bits = i_h - penalty_bits;
    Ok(RateBound { n: 1, eps, eta, information_bits: i_h, penalty_bits, total_bits, rate_bits_per_use: total_bits })
}

/// Finite-`n` rate with `η = 1/√n`: the expansion at `ε - η` minus
/// `log₂(4εn)`, divided by `n`. No term is dropped.
pub fn ea_second_order_rate(triple: DvtTriple, n: u64, eps: f64) -> Result<RateBound> {
    if n == 0 {
        return Err(Error::InvalidParameter("blocklength must be at least 1".into()));
    }
    let eta = 1.0 / (n as f64).sqrt();
    if !(eta < eps) {
        // η < ε needs n > 1/ε²
        return Err(Error::BlocklengthTooSmall { n, min_n: (1.0 / (eps * eps)).floor() as u64 + 1 });
    }
    check_eps_eta(eps, eta)?;
    let information_bits = expansion_lower_bound(&ExpansionInput::new(n, eps - eta, triple))?;
    let penalty_bits = rate_penalty(eps, eta);
    let total_bits = information_bits - penalty_bits;
    Ok(RateBound { n, eps, eta, information_bits, penalty_bits, total_bits, rate_bits_per_use: total_bits / n as f64 })
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    let ln_gamma = |x: f64| libm::lgamma_r(x).0;
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Exact `D_H^ε(ρ^⊗n ‖ σ^⊗n)` for `ρ = diag(p, 1-p)`, `σ = diag(q, 1-q)`.
///
/// Outcome strings with `k` zeros share one likelihood ratio, so the `2^n`
/// outcomes collapse to `n + 1` classes; the fractional knapsack runs over the
/// classes with `σ`-weights kept in the log domain.
pub fn dh_iid_binary(p: f64, q: f64, n: u64, eps: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("need p, q in (0, 1), got p = {p}, q = {q}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    struct Class {
        log_ratio: f64,
        ln_rho: f64,
        ln_sigma: f64,
    }
    let mut classes: Vec<Class> = (0..=n)
        .map(|k| {
            let (kf, rest) = (k as f64, (n - k) as f64);
            let lb = ln_binomial(n, k);
            let ln_rho = lb + kf * p.ln() + rest * (1.0 - p).ln();
            let ln_sigma = lb + kf * q.ln() + rest * (1.0 - q).ln();
            Class { log_ratio: ln_rho - ln_sigma, ln_rho, ln_sigma }
        })
        .collect();
    classes.sort_by(|a, b| b.log_ratio.partial_cmp(&a.log_ratio).expect("finite ratios"));
    let mut need = 1.0 - eps;
    let mut ln_costs = Vec::new();
    for class in &classes {
        if need <= 0.0 {
            break;
        }
        let mass = class.ln_rho.exp();
        let take = if mass > 0.0 { (need / mass).min(1.0) } else { 1.0 };
        if take > 0.0 {
            ln_costs.push(take.ln() + class.ln_sigma);
        }
        need -= take * mass;
    }
    let top = ln_costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_cost = top + ln_costs.iter().map(|c| (c - top).exp()).sum::<f64>().ln();
    Ok(-ln_cost / std::f64::consts::LN_2)
}

/// `(D, V, T)` of `diag(p, 1-p)` against `diag(q, 1-q)`.
pub fn binary_triple(p: f64, q: f64) -> DvtTriple {
    let z0 = (p / q).log2();
    let z1 = ((1.0 - p) / (1.0 - q)).log2();
    let d = p * z0 + (1.0 - p) * z1;
    let v = p * (z0 - d).powi(2) + (1.0 - p) * (z1 - d).powi(2);
    let t = p * (z0 - d).abs().powi(3) + (1.0 - p) * (z1 - d).abs().powi(3);
    DvtTriple { d, v, t }
}

/// Positive operator `G = Σ g_j |e_j⟩⟨e_j|`.
#[derive(Clone, Debug)]
pub struct EnergyObservable {
    eigenvalues: Vec<f64>,
    eigenbasis: CMatrix,
}

impl EnergyObservable {
    /// `basis` holds the eigenvectors as columns.
    pub fn new(eigenvalues: Vec<f64>, basis: CMatrix) -> Result<Self> {
        let d = eigenvalues.len();
        if basis.nrows() != d || basis.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: basis.ncols() });
        }
        if let Some(&g) = eigenvalues.iter().find(|&&g| !(g >= 0.0)) {
            return Err(Error::NotPositive { min_eigenvalue: g, tolerance: 0.0 });
        }
        let deviation = crate::operator::max_abs_diff(&(basis.adjoint() * &basis), &CMatrix::identity(d, d));
        if deviation > 1e-8 {
            return Err(Error::InvalidParameter(format!("energy eigenbasis is not orthonormal (deviation {deviation:.3e})")));
        }
        Ok(Self { eigenvalues, eigenbasis: basis })
    }

    pub fn from_diagonal(g: &[f64]) -> Result<Self> {
        Self::new(g.to_vec(), CMatrix::identity(g.len(), g.len()))
    }

    pub fn from_operator(op: &HermitianOperator) -> Result<Self> {
        let sd = op.spectral_decompose();
        let min = sd.eigenvalues.last().copied().unwrap_or(0.0);
        if min < -crate::operator::POSITIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min, tolerance: crate::operator::POSITIVITY_TOL });
        }
        let g = sd.eigenvalues.iter().map(|&e| e.max(0.0)).collect();
        Self::new(g, sd.eigenvectors)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn operator(&self) -> HermitianOperator {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for (j, &g) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenbasis.column(j);
            m += &v * v.adjoint() * crate::operator::c(g);
        }
        HermitianOperator::from_matrix_unchecked(m)
    }

    /// `Ḡ_n = (1/n) Σ_i I ⊗ .. ⊗ G_i ⊗ .. ⊗ I`, formed densely.
    pub fn nth_extension(&self, n: usize) -> Result<HermitianOperator> {
        let d = self.dim();
        let total = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(d)).filter(|&t| t <= MAX_EXTENSION_DIM);
        let total = total.ok_or(Error::DimensionCap { dim: usize::MAX, cap: MAX_EXTENSION_DIM })?;
        let g = self.operator();
        let mut sum = CMatrix::zeros(total, total);
        for i in 0..n {
            let left = CMatrix::identity(d.pow(i as u32), d.pow(i as u32));
            let right = CMatrix::identity(d.pow((n - 1 - i) as u32), d.pow((n - 1 - i) as u32));
            sum += crate::operator::kron(&crate::operator::kron(&left, g.matrix()), &right);
        }
        Ok(HermitianOperator::from_matrix_unchecked(sum * crate::operator::c(1.0 / n as f64)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `(1/M) Σ_m Tr{Ḡ_n ρ^m}`.
    pub average: f64,
    pub budget: f64,
    /// `budget - average`; negative when the constraint is violated.
    pub margin: f64,
    pub satisfied: bool,
}

/// Average energy of codeword states on `n` uses, each of dimension
/// `G.dim()^n`, evaluated through single-use marginals.
pub fn energy_check(states: &[DensityOperator], g: &EnergyObservable, n: usize, budget: f64) -> Result<EnergyReport> {
    if states.is_empty() || n == 0 {
        return Err(Error::InvalidParameter("energy check needs at least one state and n >= 1".into()));
    }
    let d = g.dim();
    let dims = vec![d; n];
    let total = d.checked_pow(n as u32).ok_or(Error::DimensionCap { dim: usize::MAX, cap: usize::MAX })?;
    let op = g.operator();
    let mut sum = 0.0;
    for rho in states {
        if rho.dim() != total {
            return Err(Error::InconsistentSubsystems { dims: dims.clone(), dim: rho.dim() });
        }
        let mut per_state = 0.0;
        for i in 0..n {
            let marginal = if n == 1 { rho.clone() } else { rho.partial_trace(&dims, &[i])? };
            per_state += op.trace_with(&marginal);
        }
        sum += per_state / n as f64;
    }
    let average = sum / states.len() as f64;
    let margin = budget - average;
    Ok(EnergyReport { average, budget, margin, satisfied: margin >= -1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotest::dh_commuting_oracle;
    use crate::operator::random;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Adaptive Simpson quadrature of the Gaussian density.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    fn phi_oracle(x: f64) -> f64 {
        let g = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if x >= 0.0 {
            0.5 + simpson(&g, 0.0, x, 1e-15)
        } else {
            0.5 - simpson(&g, x, 0.0, 1e-15)
        }
    }

    fn phi_inv_oracle(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if phi_oracle(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    const UNIT: DvtTriple = DvtTriple { d: 1.0, v: 1.0, t: 1.0 };

    #[test]
    fn phi_fixed_points() {
        assert_eq!(phi(0.0), 0.5);
        assert_abs_diff_eq!(phi_inv(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert!(phi_inv(0.0).is_err() && phi_inv(1.0).is_err());
    }

    #[test]
    fn phi_matches_quadrature() {
        assert_abs_diff_eq!(phi(1.96), 0.975_002_104_851_779_5, epsilon = 1e-15);
        for x in [-5.0, -2.5, -1.0, -0.1, 0.3, 1.7, 4.0] {
            assert_abs_diff_eq!(phi(x), phi_oracle(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn phi_inv_matches_bisected_quadrature() {
        for p in [1e-6, 0.01, 0.2, 0.495216, 0.8, 0.999] {
            assert_abs_diff_eq!(phi_inv(p).unwrap(), phi_inv_oracle(p), epsilon = 1e-9);
        }
    }

    #[test]
    fn expansion_at_unit_triple() {
        // 10⁴ + 100 Φ⁻¹(0.5 - 0.4784/100), Φ⁻¹(0.495216) = -0.0119923...
        let b = expansion_lower_bound(&ExpansionInput::new(10_000, 0.5, UNIT)).unwrap();
        assert_abs_diff_eq!(b, 10_000.0 + 100.0 * phi_inv_oracle(0.495_216), epsilon = 1e-6);
        assert_abs_diff_eq!(b, 9998.8008, epsilon = 1e-3);
    }

    #[test]
    fn expansion_with_half_corrected_eps_is_n_d() {
        let inp = ExpansionInput::new(400, 0.5 + BERRY_ESSEEN_C / 20.0, UNIT);
        assert_abs_diff_eq!(inp.eps - inp.correction(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(expansion_lower_bound(&inp).unwrap(), 400.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_third_moment_drops_correction() {
        let triple = DvtTriple { d: 0.3, v: 2.0, t: 0.0 };
        let b = expansion_lower_bound(&ExpansionInput::new(50, 0.1, triple)).unwrap();
        assert_abs_diff_eq!(b, 15.0 + 10.0 * phi_inv(0.1).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn short_blocklength_names_threshold() {
        let inp = ExpansionInput::new(3, 0.1, UNIT);
        match expansion_lower_bound(&inp) {
            Err(Error::BlocklengthTooSmall { n: 3, min_n }) => {
                assert_eq!(min_n, 23);
                assert!(expansion_lower_bound(&ExpansionInput::new(min_n, 0.1, UNIT)).is_ok());
                assert!(expansion_lower_bound(&ExpansionInput::new(min_n - 1, 0.1, UNIT)).is_err());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_shot_rate_arithmetic() {
        let r = ea_rate_lower_bound(10.0, 0.1, 0.05).unwrap();
        assert_abs_diff_eq!(r.rate_bits_per_use, 10.0 - 160f64.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.rate_bits_per_use, 2.678_071_905_112_638, epsilon = 1e-9);
        let near = ea_rate_lower_bound(0.0, 0.3, 0.3 - 1e-12).unwrap();
        assert_abs_diff_eq!(near.penalty_bits, (4.0f64 / 0.3).log2(), epsilon = 1e-9);
        assert!(ea_rate_lower_bound(1.0, 0.1, 0.2).is_err());
        assert!(ea_rate_lower_bound(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn zero_penalty_keeps_information() {
        // 4ε/η² = 1 needs η = 2√ε > ε, outside the admissible range of the
        // rate bound, so the identity is checked on the penalty alone
        assert_eq!(rate_penalty(0.25, 1.0), 0.0);
        assert!(ea_rate_lower_bound(1.0, 0.25, 1.0).is_err());
    }

    #[test]
    fn second_order_rate_assembly() {
        let n = 10_000u64;
        let r = ea_second_order_rate(UNIT, n, 0.5).unwrap();
        let eta = 0.01;
        let corrected = 0.5 - eta - BERRY_ESSEEN_C / 100.0;
        let expected = (n as f64 + 100.0 * phi_inv_oracle(corrected) - (4.0 * 0.5 * n as f64).log2()) / n as f64;
        assert_abs_diff_eq!(r.rate_bits_per_use, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(r.eta, eta, epsilon = 1e-15);
        assert!(ea_second_order_rate(UNIT, 3, 0.5).is_err());
    }

    #[test]
    fn second_order_rate_approaches_information() {
        let triple = DvtTriple { d: 0.7, v: 0.4, t: 0.3 };
        let gaps: Vec<f64> = [1e3 as u64, 1e5 as u64, 1e7 as u64]
            .iter()
            .map(|&n| triple.d - ea_second_order_rate(triple, n, 0.3).unwrap().rate_bits_per_use)
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] > 0.0 && gaps[2] < 1e-3);
    }

    #[test]
    fn binary_iid_matches_explicit_tensor_power() {
        for &(p, q) in &[(0.3, 0.6), (0.9, 0.2), (0.5, 0.5)] {
            for n in 1..=9u64 {
                let mut lambda = vec![1.0];
                let mut mu = vec![1.0];
                for _ in 0..n {
                    lambda = lambda.iter().flat_map(|l| [l * p, l * (1.0 - p)]).collect();
                    mu = mu.iter().flat_map(|m| [m * q, m * (1.0 - q)]).collect();
                }
                for eps in [0.05, 0.4, 0.8] {
                    let oracle = dh_commuting_oracle(&lambda, &mu, eps).unwrap().finite().unwrap();
                    assert_abs_diff_eq!(dh_iid_binary(p, q, n, eps).unwrap(), oracle, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn binary_triple_matches_dvt() {
        let rho = DensityOperator::from_diagonal(&[0.3, 0.7]).unwrap();
        let sigma = DensityOperator::from_diagonal(&[0.6, 0.4]).unwrap();
        let t = crate::hypotest::dvt(&rho, &sigma).unwrap().triple().unwrap();
        let b = binary_triple(0.3, 0.6);
        assert_abs_diff_eq!(t.d, b.d, epsilon = 1e-12);
        assert_abs_diff_eq!(t.v, b.v, epsilon = 1e-12);
        assert_abs_diff_eq!(t.t, b.t, epsilon = 1e-12);
    }

    #[test]
    fn energy_examples() {
        let rho = random::random_density(&mut random::trial_rng(1, 0), 3, 3).unwrap();
        let identity = EnergyObservable::from_diagonal(&[1.0, 1.0, 1.0]).unwrap();
        let r = energy_check(&[rho], &identity, 1, 1.0).unwrap();
        assert!(r.satisfied);
        assert_abs_diff_eq!(r.margin, 0.0, epsilon = 1e-12);

        let number = EnergyObservable::from_diagonal(&[0.0, 1.0]).unwrap();
        let r = energy_check(&[DensityOperator::basis(2, 0)], &number, 1, 0.0).unwrap();
        assert!(r.satisfied);
        assert_eq!(r.margin, 0.0);
        let r = energy_check(&[DensityOperator::maximally_mixed(2)], &number, 1, 0.4).unwrap();
        assert!(!r.satisfied);
        assert_abs_diff_eq!(r.margin, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn energy_of_n_uses_matches_dense_extension() {
        let mut rng = random::trial_rng(2, 0);
        let g = EnergyObservable::from_operator(&random::random_density(&mut rng, 2, 2).unwrap().scale(3.0)).unwrap();
        let states: Vec<_> = (0..3).map(|_| random::random_density(&mut rng, 8, 4).unwrap()).collect();
        let report = energy_check(&states, &g, 3, 1.0).unwrap();
        let ext = g.nth_extension(3).unwrap();
        let dense: f64 = states.iter().map(|s| ext.trace_with(s)).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(report.average, dense, epsilon = 1e-12);
    }

    #[test]
    fn energy_observable_validation() {
        assert!(EnergyObservable::from_diagonal(&[-1.0, 1.0]).is_err());
        assert!(EnergyObservable::new(vec![1.0, 1.0], CMatrix::from_element(2, 2, crate::operator::c(1.0))).is_err());
    }

    proptest! {
        #[test]
        fn phi_inv_is_inverse(p in 1e-6f64..(1.0 - 1e-6)) {
            prop_assert!((phi(phi_inv(p).unwrap()) - p).abs() <= 1e-12);
        }

        #[test]
        fn phi_is_monotone(x in -8.0f64..8.0, dx in 1e-6f64..1.0) {
            prop_assert!(phi(x + dx) >= phi(x));
        }

        #[test]
        fn expansion_monotone_in_eps(eps in 0.05f64..0.9, de in 1e-4f64..0.09, n in 200u64..5000) {
            let triple = DvtTriple { d: 0.4, v: 0.8, t: 0.6 };
            let a = expansion_lower_bound(&ExpansionInput::new(n, eps, triple));
            let b = expansion_lower_bound(&ExpansionInput::new(n, eps + de, triple));
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!(b >= a);
            }
        }

        #[test]
        fn doubling_n_gains_more_than_n_d(n in 100u64..100_000, d in 0.0f64..2.0, v in 0.1f64..3.0, t in 0.0f64..3.0) {
            // the √n term is non-negative once the corrected ε reaches 1/2
            let triple = DvtTriple { d, v, t };
            let inp = ExpansionInput::new(n, 0.9, triple);
            prop_assume!(inp.eps - inp.correction() >= 0.5);
            let one = expansion_lower_bound(&inp).unwrap();
            let two = expansion_lower_bound(&ExpansionInput::new(2 * n, 0.9, triple)).unwrap();
            prop_assert!(two - one > d * n as f64);
        }
    }
}
