//! Exact simulation of position-based coding with a sequential decoder.
//!
//! Alice and Bob share `M` copies of `ρ_RA`. To send `m`, Alice pushes her
//! half of copy `m` through the channel. Bob holds `R_1 .. R_M ⊗ B` and asks
//! "is it slot 1?", "slot 2?", ... with the binary test `{Λ, I - Λ}` on
//! `R_i ⊗ B`, stopping at the first "yes". Probes are elided: each answer
//! applies the corresponding two-Kraus map from [`crate::naimark`].
//!
//! Bob's space is ordered `R_1, .., R_M, B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotest::{dh_commuting_oracle, dh_epsilon, product_of_marginals, Bits, DhBracket};
use crate::naimark::{dilate, NaimarkDilation};
use crate::operator::json::{ChannelJson, MatrixJson};
use crate::operator::{
    apply_local, kron, permute_subsystems, CMatrix, DensityOperator, MeasurementOperator, QuantumChannel,
};
use crate::second_order::{ea_rate_lower_bound, rate_penalty, RateBound};

pub const DEFAULT_DIM_CAP: usize = 4096;

/// Slack allowed on `Tr{(I - Λ)ζ} <= ε - η` and on the simulated bound.
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const BOUND_TOL: f64 = 1e-8;

/// `c = η/(2ε - η)`.
pub fn default_c(eps: f64, eta: f64) -> f64 {
    eta / (2.0 * eps - eta)
}

/// `(1+c)(ε-η) + (2+c+1/c)·M·β`.
pub fn analytic_bound(eps: f64, eta: f64, c: f64, messages: usize, beta: f64) -> f64 {
    (1.0 + c) * (eps - eta) + (2.0 + c + 1.0 / c) * messages as f64 * beta
}

/// Largest `M` with `log₂ M <= I_H - log₂(4ε/η²)`, at least 1.
pub fn messages_for(i_h: Bits, eps: f64, eta: f64) -> Result<usize> {
    let Bits::Finite(i_h) = i_h else {
        return Err(Error::InvalidParameter("infinite I_H admits any number of messages; pass M explicitly".into()));
    };
    let m = (i_h - rate_penalty(eps, eta)).exp2().floor();
    Ok(if m >= 1.0 { m.min(usize::MAX as f64) as usize } else { 1 })
}

#[derive(Clone, Debug)]
pub struct CodingScenario {
    channel: QuantumChannel,
    resource: DensityOperator,
    d_r: usize,
    messages: usize,
    eps: f64,
    eta: f64,
    c: f64,
    cap: usize,
}

impl CodingScenario {
    pub fn new(
        channel: QuantumChannel,
        resource: DensityOperator,
        d_r: usize,
        messages: usize,
        eps: f64,
        eta: f64,
    ) -> Result<Self> {
        if d_r == 0 || d_r * channel.dim_in() != resource.dim() {
            return Err(Error::InconsistentSubsystems { dims: vec![d_r, channel.dim_in()], dim: resource.dim() });
        }
        if !(eps > 0.0 && eps < 1.0 && eta > 0.0 && eta < eps) {
            return Err(Error::InvalidParameter(format!("need 0 < eta < eps < 1, got eps = {eps}, eta = {eta}")));
        }
        let c = default_c(eps, eta);
        let s = Self { channel, resource, d_r, messages, eps, eta, c, cap: DEFAULT_DIM_CAP };
        s.check_size()?;
        Ok(s)
    }

    fn check_size(&self) -> Result<()> {
        if self.messages == 0 {
            return Err(Error::InvalidParameter("need at least one message".into()));
        }
        let dim = u32::try_from(self.messages)
            .ok()
            .and_then(|m| self.d_r.checked_pow(m))
            .and_then(|r| r.checked_mul(self.d_b()))
            .unwrap_or(usize::MAX);
        if dim > self.cap {
            return Err(Error::DimensionCap { dim, cap: self.cap });
        }
        Ok(())
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c must be positive and finite, got {c}")));
        }
        self.c = c;
        Ok(self)
    }

    pub fn with_cap(mut self, cap: usize) -> Result<Self> {
        self.cap = cap;
        self.check_size()?;
        Ok(self)
    }

    pub fn with_messages(mut self, messages: usize) -> Result<Self> {
        self.messages = messages;
        self.check_size()?;
        Ok(self)
    }

    pub fn channel(&self) -> &QuantumChannel {
        &self.channel
    }

    pub fn resource(&self) -> &DensityOperator {
        &self.resource
    }

    pub fn d_r(&self) -> usize {
        self.d_r
    }

    pub fn d_a(&self) -> usize {
        self.channel.dim_in()
    }

    pub fn d_b(&self) -> usize {
        self.channel.dim_out()
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `ζ_RB = (id ⊗ N)(ρ_RA)`.
    pub fn zeta(&self) -> Result<DensityOperator> {
        self.channel.apply_on(&self.resource, 1, &[self.d_r, self.d_a()])
    }

    /// `ρ_R ⊗ N(ρ_A)`, the state of `R_i ⊗ B` for an unused slot.
    pub fn product(&self) -> Result<DensityOperator> {
        product_of_marginals(&self.zeta()?, self.d_r, self.d_b())
    }

    /// `D_H^{ε-η}(ζ_RB ‖ ζ_R ⊗ ζ_B)` with its feasible witness.
    pub fn witness(&self) -> Result<DhBracket> {
        dh_epsilon(&self.zeta()?, &self.product()?, self.eps - self.eta)
    }

    fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.d_r; self.messages];
        dims.push(self.d_b());
        dims
    }
}

/// `ρ_{R_1} ⊗ .. ⊗ ζ_{R_m B} ⊗ .. ⊗ ρ_{R_M}`, reordered to `R_1..R_M ⊗ B`.
pub fn bob_marginal(scenario: &CodingScenario, m: usize) -> Result<DensityOperator> {
    let big_m = scenario.messages;
    if m == 0 || m > big_m {
        return Err(Error::InvalidParameter(format!("message index {m} outside 1..={big_m}")));
    }
    let zeta = scenario.zeta()?;
    let rho_r = scenario.resource.partial_trace(&[scenario.d_r, scenario.d_a()], &[0])?;
    let mut acc = CMatrix::identity(1, 1);
    let mut dims = Vec::with_capacity(big_m + 1);
    for slot in 1..=big_m {
        if slot == m {
            acc = kron(&acc, zeta.matrix());
            dims.extend([scenario.d_r, scenario.d_b()]);
        } else {
            acc = kron(&acc, rho_r.matrix());
            dims.push(scenario.d_r);
        }
    }
    // B sits right after R_m; move it to the end
    let mut perm: Vec<usize> = (0..m).collect();
    perm.extend(m + 1..=big_m);
    perm.push(m);
    DensityOperator::from_trusted(permute_subsystems(&acc, &dims, &perm)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecodingRow {
    pub transmitted: usize,
    /// Probability that Bob announces `i`, for `i = 1..M`.
    pub decoded: Vec<f64>,
    pub no_detection: f64,
    pub error: f64,
}

impl DecodingRow {
    pub fn total(&self) -> f64 {
        self.decoded.iter().sum::<f64>() + self.no_detection
    }
}

fn conjugate_local(x: &CMatrix, dims: &[usize], targets: &[usize], kraus: &[CMatrix; 2]) -> Result<CMatrix> {
    Ok(apply_local(x, dims, targets, &kraus[0])? + apply_local(x, dims, targets, &kraus[1])?)
}

fn decode_with(scenario: &CodingScenario, dilation: &NaimarkDilation, m: usize) -> Result<DecodingRow> {
    let big_m = scenario.messages;
    let dims = scenario.dims();
    let yes = dilation.yes_kraus();
    let no = dilation.no_kraus();
    let mut x = bob_marginal(scenario, m)?.matrix().clone();
    let mut decoded = Vec::with_capacity(big_m);
    for slot in 0..big_m {
        let targets = [slot, big_m];
        decoded.push(conjugate_local(&x, &dims, &targets, &yes)?.trace().re);
        x = conjugate_local(&x, &dims, &targets, &no)?;
    }
    let no_detection = x.trace().re;
    let error = (1.0 - decoded[m - 1]).clamp(0.0, 1.0);
    Ok(DecodingRow { transmitted: m, decoded, no_detection, error })
}

fn check_lambda(scenario: &CodingScenario, lambda: &MeasurementOperator) -> Result<()> {
    let local = scenario.d_r * scenario.d_b();
    if lambda.dim() != local {
        return Err(Error::DimensionMismatch { expected: local, actual: lambda.dim() });
    }
    Ok(())
}

/// `Tr{(I - Λ) ζ_RB}`, the chance the right slot answers "no".
pub fn premise_error(scenario: &CodingScenario, lambda: &MeasurementOperator) -> Result<f64> {
    check_lambda(scenario, lambda)?;
    Ok(lambda.complement().probability(&scenario.zeta()?))
}

fn check_premise(scenario: &CodingScenario, lambda: &MeasurementOperator) -> Result<f64> {
    let err = premise_error(scenario, lambda)?;
    let budget = scenario.eps - scenario.eta;
    if err > budget + FEASIBILITY_TOL {
        return Err(Error::PremiseViolated { error_prob: err, budget });
    }
    Ok(err)
}

/// Decoder statistics when message `m` is sent. Not detecting anything
/// counts as an error.
pub fn sequential_decode(scenario: &CodingScenario, lambda: &MeasurementOperator, m: usize) -> Result<DecodingRow> {
    check_premise(scenario, lambda)?;
    decode_with(scenario, &dilate(lambda), m)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecodingResult {
    pub messages: usize,
    pub eps: f64,
    pub eta: f64,
    pub c: f64,
    /// `Tr{(I - Λ) ζ_RB}`.
    pub premise_error: f64,
    /// `Tr{Λ (ρ_R ⊗ N(ρ_A))}`.
    pub beta: f64,
    pub analytic_bound: f64,
    pub per_message_error: Vec<f64>,
    pub outcome_distribution: Vec<DecodingRow>,
}

impl DecodingResult {
    pub fn max_error(&self) -> f64 {
        self.per_message_error.iter().fold(0.0, |a: f64, &b| a.max(b))
    }

    /// `max_m p_e(m) - bound`.
    pub fn excess(&self) -> f64 {
        self.max_error() - self.analytic_bound
    }

    pub fn holds(&self) -> bool {
        self.excess() <= BOUND_TOL
    }

    pub fn check(&self) -> Result<()> {
        if self.holds() {
            return Ok(());
        }
        Err(Error::BoundViolated {
            context: format!(
                "max_m p_e(m) = {:.17e} against the analytic bound {:.17e} (M = {}, c = {})",
                self.max_error(),
                self.analytic_bound,
                self.messages,
                self.c
            ),
            excess: self.excess(),
        })
    }
}

/// Runs every message through the decoder and evaluates the analytic bound
/// with this `Λ`'s own `β`. Without `lambda`, the witness of
/// `D_H^{ε-η}(ζ_RB ‖ ζ_R ⊗ ζ_B)` is used.
pub fn run_decoding_experiment(
    scenario: &CodingScenario,
    lambda: Option<&MeasurementOperator>,
) -> Result<DecodingResult> {
    let lambda = match lambda {
        Some(l) => l.clone(),
        None => scenario.witness()?.witness,
    };
    let premise_error = check_premise(scenario, &lambda)?;
    let beta = lambda.probability(&scenario.product()?);
    let dilation = dilate(&lambda);
    let rows = (1..=scenario.messages).map(|m| decode_with(scenario, &dilation, m)).collect::<Result<Vec<_>>>()?;
    Ok(DecodingResult {
        messages: scenario.messages,
        eps: scenario.eps,
        eta: scenario.eta,
        c: scenario.c,
        premise_error,
        beta,
        analytic_bound: analytic_bound(scenario.eps, scenario.eta, scenario.c, scenario.messages, beta),
        per_message_error: rows.iter().map(|r| r.error).collect(),
        outcome_distribution: rows,
    })
}

/// Off-block entries of `ρ_XA` above this are rejected.
pub const CQ_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct CqRatePoint {
    pub information: DhBracket,
    /// True when `ζ_XB` and `ζ_X ⊗ ζ_B` are diagonal and the knapsack was used.
    pub commuting: bool,
    pub rate: RateBound,
}

/// Rate `I_H^{ε-η}(X;B) - log₂(4ε/η²)` for a classical-quantum input
/// `Σ p(x) |x⟩⟨x| ⊗ ρ_A^x`.
pub fn cq_rate_point(
    rho_xa: &DensityOperator,
    d_x: usize,
    channel: &QuantumChannel,
    eps: f64,
    eta: f64,
) -> Result<CqRatePoint> {
    let d_a = channel.dim_in();
    if d_x == 0 || d_x * d_a != rho_xa.dim() {
        return Err(Error::InconsistentSubsystems { dims: vec![d_x, d_a], dim: rho_xa.dim() });
    }
    let m = rho_xa.matrix();
    let mut deviation: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i / d_a != j / d_a {
                deviation = deviation.max(m[(i, j)].norm());
            }
        }
    }
    if deviation > CQ_TOL {
        return Err(Error::NotClassicalQuantum { deviation });
    }
    if !(eps > 0.0 && eps < 1.0 && eta > 0.0 && eta < eps) {
        return Err(Error::InvalidParameter(format!("need 0 < eta < eps < 1, got eps = {eps}, eta = {eta}")));
    }
    let zeta = channel.apply_on(rho_xa, 1, &[d_x, d_a])?;
    let product = product_of_marginals(&zeta, d_x, channel.dim_out())?;
    let mut information = dh_epsilon(&zeta, &product, eps - eta)?;
    let diag = |x: &DensityOperator| -> Option<Vec<f64>> {
        let m = x.matrix();
        let off = (0..m.nrows()).flat_map(|i| (0..m.ncols()).filter(move |&j| j != i).map(move |j| (i, j)));
        off.into_iter().all(|(i, j)| m[(i, j)].norm() <= CQ_TOL).then(|| (0..m.nrows()).map(|i| m[(i, i)].re).collect())
    };
    let commuting = match (diag(&zeta), diag(&product)) {
        (Some(l), Some(mu)) => {
            let exact = dh_commuting_oracle(&l, &mu, eps - eta)?;
            information.lower = exact;
            information.upper = exact;
            true
        }
        _ => false,
    };
    let i_h = match information.lower {
        Bits::Finite(v) => v,
        Bits::Infinite => return Err(Error::InvalidParameter("I_H is infinite; no finite rate to report".into())),
    };
    let rate = ea_rate_lower_bound(i_h, eps, eta)?;
    Ok(CqRatePoint { information, commuting, rate })
}

/// File form of a scenario. `messages` omitted means "largest `M` the
/// witness supports".
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioJson {
    pub d_r: usize,
    pub resource: MatrixJson,
    pub channel: ChannelJson,
    #[serde(default)]
    pub messages: Option<usize>,
    pub eps: f64,
    pub eta: f64,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub lambda: Option<MatrixJson>,
}

impl ScenarioJson {
    /// The scenario and the supplied `Λ`, if any.
    pub fn build(&self) -> Result<(CodingScenario, Option<MeasurementOperator>)> {
        let channel = self.channel.to_channel()?;
        let resource = self.resource.to_density()?;
        let mut s = CodingScenario::new(channel, resource, self.d_r, 1, self.eps, self.eta)?;
        if let Some(c) = self.c {
            s = s.with_c(c)?;
        }
        let lambda = self.lambda.as_ref().map(|l| MeasurementOperator::new(l.to_hermitian()?)).transpose()?;
        let messages = match self.messages {
            Some(m) => m,
            None => messages_for(s.witness()?.lower, self.eps, self.eta)?,
        };
        Ok((s.with_messages(messages)?, lambda))
    }
}
