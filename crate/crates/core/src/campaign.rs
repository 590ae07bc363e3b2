//! Seeded randomized campaigns over every bound in the crate.
//!
//! Trial `k` of a campaign draws only from stream `k` of the master seed, and
//! results come back in trial order, so output does not depend on the thread
//! count.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coding_sim::{messages_for, run_decoding_experiment, CodingScenario, DecodingResult};
use crate::error::{Error, Result};
use crate::hypotest::{build_tl, dh_commuting_oracle, dh_epsilon, z_distribution, Bits, TestOperatorReport};
use crate::naimark::{dilate, elided_success_prob, explicit_success_prob};
use crate::operator::random::{
    gaussian_matrix, random_channel, random_density, random_measurement_operator, random_projector,
    random_pure_state, random_unitary, trial_rng, TrialRng,
};
use crate::operator::{
    c, kron, max_abs_diff, partial_trace_matrix, CMatrix, DensityOperator, HermitianOperator, MeasurementOperator,
    Projector, PureState, QuantumChannel,
};
use crate::second_order::{binary_triple, dh_iid_binary, expansion_lower_bound, phi_inv, ExpansionInput};
use crate::union_bound::{
    check_lemma_identities, optimal_c, BoundReport, BoundState, LemmaResiduals, UnionBoundInstance, C_GRID,
};

pub const EPS_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Mixed,
    Pure,
}

impl StateKind {
    pub fn name(self) -> &'static str {
        match self {
            StateKind::Mixed => "mixed",
            StateKind::Pure => "pure",
        }
    }
}

fn pick<T: Copy>(rng: &mut TrialRng, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())]
}

fn check_choices(dims: &[usize], lengths: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidParameter(format!("dimensions must be at least 2, got {dims:?}")));
    }
    if lengths.is_empty() || lengths.iter().any(|&l| l < 2) {
        return Err(Error::InvalidParameter(format!("sequence lengths must be at least 2, got {lengths:?}")));
    }
    Ok(())
}

/// `exp(iθH)` for a Gaussian Hermitian `H`.
fn small_unitary(rng: &mut TrialRng, dim: usize, theta: f64) -> CMatrix {
    let g = gaussian_matrix(rng, dim, dim);
    let h = HermitianOperator::new((&g + g.adjoint()) * c(0.5)).expect("symmetrized");
    let sd = h.spectral_decompose();
    let v = &sd.eigenvectors;
    let phases = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        sd.eigenvalues.iter().map(|&l| num_complex::Complex64::from_polar(1.0, theta * l)),
    ));
    v * phases * v.adjoint()
}

fn rotate(p: &Projector, u: &CMatrix) -> Projector {
    Projector::from_matrix(u * p.matrix() * u.adjoint()).expect("unitary conjugate of a projector")
}

/// Rank-`rank` projector whose range contains `anchor`.
fn projector_containing(rng: &mut TrialRng, anchor: &CMatrix, rank: usize) -> Projector {
    let dim = anchor.nrows();
    let mut g = gaussian_matrix(rng, dim, rank);
    g.set_column(0, &anchor.column(0));
    let (q, _) = g.qr().unpack();
    Projector::from_orthonormal_columns(&q).expect("QR columns are orthonormal")
}

/// Mix of Haar projectors, projectors nearly containing the state's dominant
/// direction (small `a_i`) and small rotations of the previous projector
/// (nearly commuting neighbours).
fn projector_sequence(rng: &mut TrialRng, anchor: &CMatrix, l: usize) -> Vec<Projector> {
    let dim = anchor.nrows();
    let mut out: Vec<Projector> = Vec::with_capacity(l);
    for _ in 0..l {
        let rank = rng.random_range(1..dim);
        let mode = rng.random_range(0..3);
        let theta = 10f64.powf(-rng.random_range(0.5..3.0));
        let p = match (mode, out.last()) {
            (0, _) => random_projector(rng, dim, rank).expect("rank below dim"),
            (2, Some(prev)) => {
                let u = small_unitary(rng, dim, theta);
                rotate(prev, &u)
            }
            _ => {
                let p = projector_containing(rng, anchor, rank);
                let u = small_unitary(rng, dim, theta);
                rotate(&p, &u)
            }
        };
        out.push(p);
    }
    out
}

/// Instance for trial `trial`: even trials mixed, odd trials pure.
pub fn union_instance(seed: u64, trial: usize, dims: &[usize], lengths: &[usize]) -> Result<UnionBoundInstance> {
    check_choices(dims, lengths)?;
    let mut rng = trial_rng(seed, trial as u64);
    let dim = pick(&mut rng, dims);
    let l = pick(&mut rng, lengths);
    let state = if trial % 2 == 0 {
        let rank = rng.random_range(1..=dim);
        BoundState::Mixed(random_density(&mut rng, dim, rank)?)
    } else {
        BoundState::Pure(random_pure_state(&mut rng, dim))
    };
    let anchor = match &state {
        BoundState::Mixed(rho) => rho.spectral_decompose().eigenvector(0),
        BoundState::Pure(psi) => psi.amplitudes().clone(),
    };
    let anchor = CMatrix::from_column_slice(dim, 1, anchor.as_slice());
    UnionBoundInstance::new(state, projector_sequence(&mut rng, &anchor, l))
}

#[derive(Clone, Debug)]
pub struct UnionTrial {
    pub trial: usize,
    pub kind: StateKind,
    pub instance: UnionBoundInstance,
    /// One report per evaluated `c`.
    pub reports: Vec<BoundReport>,
}

impl UnionTrial {
    pub fn violations(&self) -> impl Iterator<Item = &BoundReport> {
        self.reports.iter().filter(|r| !r.holds())
    }

    /// Smallest right-hand side over [`C_GRID`].
    pub fn grid_min(&self) -> f64 {
        self.reports.iter().filter(|r| C_GRID.contains(&r.c)).map(|r| r.rhs_ours).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct UnionCampaign {
    pub dims: Vec<usize>,
    pub lengths: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// A single `c`; otherwise [`C_GRID`] plus the optimum when attained.
    pub c: Option<f64>,
}

pub fn run_union(cfg: &UnionCampaign) -> Result<Vec<UnionTrial>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let instance = union_instance(cfg.seed, trial, &cfg.dims, &cfg.lengths)?;
            let lhs = instance.norm() - crate::union_bound::sequential_success_prob(&instance);
            let a = instance.individual_errors();
            let cs: Vec<f64> = match cfg.c {
                Some(c) => vec![c],
                None => C_GRID.iter().copied().chain(optimal_c(&a)?.c_star).collect(),
            };
            let reports = cs.into_iter().map(|c| BoundReport::assemble(lhs, a.clone(), c)).collect::<Result<_>>()?;
            let kind = if trial % 2 == 0 { StateKind::Mixed } else { StateKind::Pure };
            Ok(UnionTrial { trial, kind, instance, reports })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LemmaTrial {
    pub trial: usize,
    pub dim: usize,
    pub psi: PureState,
    pub projectors: Vec<Projector>,
    pub residuals: LemmaResiduals,
}

/// Pure-state instances from the same generator as [`run_union`] (odd streams).
pub fn run_lemmas(dims: &[usize], lengths: &[usize], trials: usize, seed: u64) -> Result<Vec<LemmaTrial>> {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let inst = union_instance(seed, 2 * trial + 1, dims, lengths)?;
            let BoundState::Pure(psi) = inst.state().clone() else { unreachable!("odd trials are pure") };
            let residuals = check_lemma_identities(&psi, inst.projectors())?;
            Ok(LemmaTrial { trial, dim: inst.dim(), psi, projectors: inst.projectors().to_vec(), residuals })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PovmTrial {
    pub trial: usize,
    pub state: DensityOperator,
    pub lambdas: Vec<MeasurementOperator>,
    pub reports: Vec<BoundReport>,
    /// `|explicit - elided|` success probability of the whole chain.
    pub elision_residual: f64,
    /// Largest `|Tr{Π(ρ ⊗ |0⟩⟨0|)} - Tr{Λρ}|` along the chain.
    pub preservation_residual: f64,
    /// Largest entrywise gap between the probe-traced post-measurement
    /// operators and the two-Kraus maps, over the chain.
    pub map_residual: f64,
}

impl PovmTrial {
    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn violations(&self) -> impl Iterator<Item = &BoundReport> {
        self.reports.iter().filter(|r| !r.holds())
    }
}

/// `Tr_P{Π (ρ ⊗ |0⟩⟨0|) Π}` and the same with `Π̂`, by explicit matrices.
pub fn probe_traced_updates(lambda: &MeasurementOperator, rho: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let d = lambda.dim();
    let dil = dilate(lambda);
    let mut probe = CMatrix::zeros(2, 2);
    probe[(0, 0)] = c(1.0);
    let x = kron(rho, &probe);
    let pi = dil.pi().matrix();
    let pi_hat = dil.pi_hat().matrix().clone();
    let yes = partial_trace_matrix(&(pi * &x * pi), &[d, 2], &[0])?;
    let no = partial_trace_matrix(&(&pi_hat * &x * &pi_hat), &[d, 2], &[0])?;
    Ok((yes, no))
}

fn random_effect(rng: &mut TrialRng, dim: usize) -> MeasurementOperator {
    match rng.random_range(0..4) {
        0 => {
            let rank = rng.random_range(1..dim);
            random_projector(rng, dim, rank).expect("rank below dim").effect().clone()
        }
        1 => {
            // close to the identity, so a_i is small
            let m = random_measurement_operator(rng, dim);
            let s = 10f64.powf(-rng.random_range(0.5..2.5));
            MeasurementOperator::new(HermitianOperator::identity(dim).sub(&m.complement().operator().scale(s)))
                .expect("convex combination of effects")
        }
        _ => random_measurement_operator(rng, dim),
    }
}

pub fn run_povm(
    dims: &[usize],
    lengths: &[usize],
    trials: usize,
    seed: u64,
    c_value: Option<f64>,
) -> Result<Vec<PovmTrial>> {
    check_choices(dims, lengths)?;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let dim = pick(&mut rng, dims);
            let l = pick(&mut rng, lengths);
            let rank = rng.random_range(1..=dim);
            let state = random_density(&mut rng, dim, rank)?;
            let lambdas: Vec<MeasurementOperator> = (0..l).map(|_| random_effect(&mut rng, dim)).collect();
            let explicit = explicit_success_prob(&state, &lambdas)?;
            let elided = elided_success_prob(&state, &lambdas);
            let lhs = state.trace() - explicit;
            let a: Vec<f64> = lambdas.iter().map(|m| m.complement().probability(&state)).collect();
            let cs: Vec<f64> = match c_value {
                Some(c) => vec![c],
                None => C_GRID.iter().copied().chain(optimal_c(&a)?.c_star).collect(),
            };
            let reports = cs.into_iter().map(|c| BoundReport::assemble(lhs, a.clone(), c)).collect::<Result<_>>()?;
            let mut preservation_residual: f64 = 0.0;
            let mut map_residual: f64 = 0.0;
            let mut x = state.matrix().clone();
            for lambda in &lambdas {
                let dil = dilate(lambda);
                preservation_residual =
                    preservation_residual.max((dil.probability(&state) - lambda.probability(&state)).abs());
                let (yes, no) = probe_traced_updates(lambda, &x)?;
                map_residual = map_residual
                    .max(max_abs_diff(&yes, &dil.yes_update(&x)))
                    .max(max_abs_diff(&no, &dil.no_update(&x)));
                x = dil.yes_update(&x);
            }
            Ok(PovmTrial {
                trial,
                state,
                lambdas,
                reports,
                elision_residual: (explicit - elided).abs(),
                preservation_residual,
                map_residual,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// Diagonal in the computational basis.
    Diagonal,
    /// Diagonal in a shared random basis.
    Rotated,
    NonCommuting,
}

impl PairKind {
    pub fn commuting(self) -> bool {
        self != PairKind::NonCommuting
    }
}

/// Probability vector with Gamma(1) weights; each entry is zeroed with
/// probability `p_zero` (at least one stays positive).
fn random_simplex(rng: &mut TrialRng, dim: usize, p_zero: f64) -> Vec<f64> {
    let keep = rng.random_range(0..dim);
    let mut w: Vec<f64> = (0..dim)
        .map(|i| {
            let x: f64 = -(1.0 - rng.random::<f64>()).ln();
            if i != keep && rng.random::<f64>() < p_zero { 0.0 } else { x }
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn conjugated_diagonal(probs: &[f64], u: &CMatrix) -> Result<DensityOperator> {
    let d = DensityOperator::from_diagonal(probs)?;
    DensityOperator::from_matrix(u * d.matrix() * u.adjoint())
}

#[derive(Clone, Debug)]
pub struct RandomPair {
    pub kind: PairKind,
    pub rho: DensityOperator,
    pub sigma: DensityOperator,
    /// Common eigenvalues for commuting pairs.
    pub spectra: Option<(Vec<f64>, Vec<f64>)>,
}

/// Trials cycle through diagonal, rotated and non-commuting pairs.
pub fn random_pair(rng: &mut TrialRng, trial: usize, dim: usize) -> Result<RandomPair> {
    let kind = match trial % 3 {
        0 => PairKind::Diagonal,
        1 => PairKind::Rotated,
        _ => PairKind::NonCommuting,
    };
    if kind == PairKind::NonCommuting {
        let rank = rng.random_range(1..=dim);
        let rho = random_density(rng, dim, rank)?;
        let rank = rng.random_range(1..=dim);
        let sigma = random_density(rng, dim, rank)?;
        return Ok(RandomPair { kind, rho, sigma, spectra: None });
    }
    let p_zero = if rng.random::<f64>() < 0.3 { 0.3 } else { 0.0 };
    let lam = random_simplex(rng, dim, p_zero);
    let mu = random_simplex(rng, dim, p_zero);
    let u = if kind == PairKind::Rotated { random_unitary(rng, dim) } else { CMatrix::identity(dim, dim) };
    Ok(RandomPair {
        kind,
        rho: conjugated_diagonal(&lam, &u)?,
        sigma: conjugated_diagonal(&mu, &u)?,
        spectra: Some((lam, mu)),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DhTrial {
    pub trial: usize,
    pub dim: usize,
    pub kind: PairKind,
    pub eps: f64,
    pub lower: Bits,
    pub upper: Bits,
    /// Exact value for commuting pairs.
    pub oracle: Option<Bits>,
    /// `Tr{Λρ}` of the witness.
    pub witness_rho: f64,
    pub witness_sigma: f64,
    #[serde(skip)]
    pub rho: DensityOperator,
    #[serde(skip)]
    pub sigma: DensityOperator,
}

impl DhTrial {
    pub fn width(&self) -> f64 {
        match (self.lower, self.upper) {
            (Bits::Finite(l), Bits::Finite(u)) => u - l,
            (Bits::Infinite, Bits::Infinite) => 0.0,
            _ => f64::INFINITY,
        }
    }

    /// `|lower - oracle|`, zero when both are infinite.
    pub fn oracle_gap(&self) -> Option<f64> {
        self.oracle.map(|o| match (self.lower, o) {
            (Bits::Finite(l), Bits::Finite(o)) => (l - o).abs(),
            (Bits::Infinite, Bits::Infinite) => 0.0,
            _ => f64::INFINITY,
        })
    }
}

pub fn run_dh(dims: &[usize], trials: usize, seed: u64) -> Result<Vec<DhTrial>> {
    check_choices(dims, &[2])?;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let dim = pick(&mut rng, dims);
            let eps = pick(&mut rng, &EPS_GRID);
            let pair = random_pair(&mut rng, trial, dim)?;
            let b = dh_epsilon(&pair.rho, &pair.sigma, eps)?;
            let oracle = pair.spectra.as_ref().map(|(l, m)| dh_commuting_oracle(l, m, eps)).transpose()?;
            Ok(DhTrial {
                trial,
                dim,
                kind: pair.kind,
                eps,
                lower: b.lower,
                upper: b.upper,
                oracle,
                witness_rho: b.witness.probability(&pair.rho),
                witness_sigma: b.witness.probability(&pair.sigma),
                rho: pair.rho,
                sigma: pair.sigma,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TlTrial {
    pub trial: usize,
    pub dim: usize,
    pub kind: PairKind,
    pub rho: DensityOperator,
    pub sigma: DensityOperator,
    pub report: TestOperatorReport,
}

/// Threshold `2^z` with `z` uniform over the range of the atoms of `Z`,
/// widened by one bit each side.
pub fn run_tl(dims: &[usize], trials: usize, seed: u64) -> Result<Vec<TlTrial>> {
    check_choices(dims, &[2])?;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let dim = pick(&mut rng, dims);
            let pair = random_pair(&mut rng, trial, dim)?;
            let z = z_distribution(&pair.rho, &pair.sigma)?;
            let lo = z.atoms.iter().map(|a| a.z).fold(f64::INFINITY, f64::min);
            let hi = z.atoms.iter().map(|a| a.z).fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if lo.is_finite() { (lo - 1.0, hi + 1.0) } else { (-2.0, 2.0) };
            let thresh = rng.random_range(lo..=hi).exp2();
            let report = build_tl(&pair.rho, &pair.sigma, thresh)?;
            Ok(TlTrial { trial, dim, kind: pair.kind, rho: pair.rho, sigma: pair.sigma, report })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondOrderTrial {
    pub pair: usize,
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub n: u64,
    /// Exact `D_H^ε(ρ^⊗n ‖ σ^⊗n)`.
    pub exact: f64,
    /// Berry–Esseen lower bound; absent below the blocklength threshold.
    pub expansion: Option<f64>,
    /// `nD + √(nV) Φ⁻¹(ε)`.
    pub normal_approx: f64,
}

/// Qubit pairs `diag(p, 1-p)`, `diag(q, 1-q)` with `p, q ∈ [0.05, 0.95]`
/// and `|p - q| >= 0.1`.
pub fn run_second_order(pairs: usize, ns: &[u64], seed: u64) -> Result<Vec<SecondOrderTrial>> {
    let per_pair = (0..pairs)
        .into_par_iter()
        .map(|pair| {
            let mut rng = trial_rng(seed, pair as u64);
            let (p, q) = loop {
                let p: f64 = rng.random_range(0.05..0.95);
                let q: f64 = rng.random_range(0.05..0.95);
                if (p - q).abs() >= 0.1 {
                    break (p, q);
                }
            };
            let eps = pick(&mut rng, &EPS_GRID);
            let triple = binary_triple(p, q);
            ns.iter()
                .map(|&n| {
                    let exact = dh_iid_binary(p, q, n, eps)?;
                    let expansion = match expansion_lower_bound(&ExpansionInput::new(n, eps, triple)) {
                        Ok(v) => Some(v),
                        Err(Error::BlocklengthTooSmall { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    let nf = n as f64;
                    let normal_approx = nf * triple.d + (nf * triple.v).sqrt() * phi_inv(eps)?;
                    Ok(SecondOrderTrial { pair, p, q, eps, n, exact, expansion, normal_approx })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

fn bell(d: usize) -> DensityOperator {
    let s = 1.0 / (d as f64).sqrt();
    let mut amps = vec![0.0; d * d];
    for i in 0..d {
        amps[i * d + i] = s;
    }
    PureState::from_real(&amps).expect("unit vector").density()
}

#[derive(Clone, Debug)]
pub struct NamedScenario {
    pub label: String,
    pub scenario: CodingScenario,
}

/// Qubit scenarios: identity, depolarizing, amplitude-damping and random
/// channels against Bell, random pure and random mixed resources, two
/// parameter sets each, with `M` cycling through 2, 3, 4.
pub fn qubit_scenarios(seed: u64) -> Result<Vec<NamedScenario>> {
    let mut rng = trial_rng(seed, 0);
    let channels: Vec<(String, QuantumChannel)> = vec![
        ("identity".into(), QuantumChannel::identity(2)),
        ("depolarizing_0.2".into(), QuantumChannel::depolarizing(2, 0.2)?),
        ("depolarizing_0.6".into(), QuantumChannel::depolarizing(2, 0.6)?),
        ("amplitude_damping_0.3".into(), QuantumChannel::amplitude_damping(0.3)?),
        ("random_kraus2".into(), random_channel(&mut rng, 2, 2, 2)?),
        ("random_kraus3".into(), random_channel(&mut rng, 2, 2, 3)?),
    ];
    let resources: Vec<(String, DensityOperator)> = vec![
        ("bell".into(), bell(2)),
        ("random_pure".into(), random_pure_state(&mut rng, 4).density()),
        ("random_rank2".into(), random_density(&mut rng, 4, 2)?),
    ];
    let params = [(0.3, 0.1), (0.5, 0.2), (0.9, 0.5), (0.2, 0.05)];
    let mut out = Vec::new();
    for (ci, (cn, ch)) in channels.iter().enumerate() {
        for (ri, (rn, res)) in resources.iter().enumerate() {
            for rep in 0..2 {
                let k = 2 * (ci * resources.len() + ri) + rep;
                let m = 2 + k % 3;
                let (eps, eta) = params[k % params.len()];
                out.push(NamedScenario {
                    label: format!("{cn}/{rn}/M={m}/eps={eps}/eta={eta}"),
                    scenario: CodingScenario::new(ch.clone(), res.clone(), 2, m, eps, eta)?,
                });
            }
        }
    }
    Ok(out)
}

/// Ququart scenarios where the witness supports several messages
/// (`ε = 0.9`, `η = 0.8`).
pub fn ququart_scenarios(seed: u64) -> Result<Vec<NamedScenario>> {
    let mut rng = trial_rng(seed, 1);
    let u = random_unitary(&mut rng, 4);
    let channels: Vec<(String, QuantumChannel)> = vec![
        ("identity".into(), QuantumChannel::identity(4)),
        ("depolarizing_0.05".into(), QuantumChannel::depolarizing(4, 0.05)?),
        ("random_unitary".into(), QuantumChannel::unitary(u)?),
    ];
    channels
        .into_iter()
        .map(|(name, ch)| {
            Ok(NamedScenario {
                label: format!("{name}/bell4/eps=0.9/eta=0.8"),
                scenario: CodingScenario::new(ch, bell(4), 4, 1, 0.9, 0.8)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct DecodingTrial {
    pub label: String,
    /// `M` was derived from the witness rather than fixed.
    pub auto_messages: bool,
    pub result: DecodingResult,
}

/// Runs each scenario at its own `M`, then again with `M` derived from the
/// witness's `I_H`.
pub fn run_decoding(scenarios: &[NamedScenario]) -> Result<Vec<DecodingTrial>> {
    let per = scenarios
        .par_iter()
        .map(|ns| {
            let w = ns.scenario.witness()?;
            let mut out = Vec::with_capacity(2);
            if ns.scenario.messages() > 1 {
                let result = run_decoding_experiment(&ns.scenario, Some(&w.witness))?;
                out.push(DecodingTrial { label: ns.label.clone(), auto_messages: false, result });
            }
            let m = messages_for(w.lower, ns.scenario.eps(), ns.scenario.eta())?;
            let auto = ns.scenario.clone().with_messages(m)?;
            let result = run_decoding_experiment(&auto, Some(&w.witness))?;
            out.push(DecodingTrial { label: format!("{}/auto_M={m}", ns.label), auto_messages: true, result });
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per.into_iter().flatten().collect())
}
