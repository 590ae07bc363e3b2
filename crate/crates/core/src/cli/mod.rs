//! `qunion` command line.
//!
//! Every run writes its data file(s) plus `<out>.manifest.json` listing their
//! sha256 digests. Exit status: 0 on success, 1 on usage or input errors, 2
//! when a checked inequality fails (the offending instances are written to a
//! counterexample file named on stderr).
//!
//! `--config file.toml` supplies defaults: top-level keys are global flags,
//! a `[subcommand]` table holds that subcommand's flags. Flags given on the
//! command line win.

mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::campaign::{run_lemmas, run_povm, run_tl, run_union, UnionCampaign};
use crate::coding_sim::{cq_rate_point, ScenarioJson};
use crate::error::{Error, Result};
use crate::hypotest::{build_tl, dh_epsilon, dvt, mutual_information_dh, Bits, DvtTriple};
use crate::operator::json::{read_channel, read_density, read_json, MatrixJson};
use crate::operator::DensityOperator;
use crate::second_order::{
    ea_rate_lower_bound, ea_second_order_rate, energy_check, expansion_lower_bound, EnergyObservable,
    ExpansionInput, BERRY_ESSEEN_C,
};
use crate::union_bound::BoundState;

pub use output::{num, sha256_hex, OutputDigest, RunManifest};
use output::{now, opt, sibling, Csv, Outputs};

/// Tolerance for the residual-type checks (identities, probe elision).
const IDENTITY_TOL: f64 = 1e-9;
const ELISION_TOL: f64 = 1e-8;
const TL_TOL: f64 = 1e-8;

const SUBCOMMANDS: [&str; 9] = [
    "verify-union-bound",
    "verify-lemmas",
    "povm-bound",
    "dh",
    "dvt",
    "tl-check",
    "second-order",
    "rate",
    "simulate-decoding",
];

#[derive(Parser, Debug)]
#[command(name = "qunion", version, about = "Quantum union bound toolkit")]
struct Cli {
    /// Worker threads for campaigns (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with default flag values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Random projector sequences: both sides of the union bound.
    VerifyUnionBound(UnionArgs),
    /// Random pure-state instances: projector identities and inequalities.
    VerifyLemmas(LemmaArgs),
    /// Random binary-measurement chains through explicit Naimark probes.
    PovmBound(PovmArgs),
    /// Hypothesis-testing relative entropy bracket for two states.
    Dh(DhArgs),
    /// Relative entropy, variance and third absolute moment.
    Dvt(DvtArgs),
    /// Test-operator inequalities, for two states or a random campaign.
    TlCheck(TlArgs),
    /// Berry–Esseen lower bound on i.i.d. D_H over a blocklength sweep.
    SecondOrder(SecondOrderArgs),
    /// Achievable coding rates.
    Rate(RateArgs),
    /// Exact sequential decoding of a position-based code.
    SimulateDecoding(DecodeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyUnionBound(_) => "verify-union-bound",
            Command::VerifyLemmas(_) => "verify-lemmas",
            Command::PovmBound(_) => "povm-bound",
            Command::Dh(_) => "dh",
            Command::Dvt(_) => "dvt",
            Command::TlCheck(_) => "tl-check",
            Command::SecondOrder(_) => "second-order",
            Command::Rate(_) => "rate",
            Command::SimulateDecoding(_) => "simulate-decoding",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::VerifyUnionBound(a) => Some(a.seed),
            Command::VerifyLemmas(a) => Some(a.seed),
            Command::PovmBound(a) => Some(a.seed),
            Command::TlCheck(a) if a.rho.is_none() => Some(a.seed),
            _ => None,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct UnionArgs {
    /// Dimension(s), comma separated; each trial picks one.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    dim: Vec<usize>,
    /// Sequence length(s) L, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    num_projectors: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Single c; default sweeps 0.01, 0.1, 1, 10 and the optimum.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct LemmaArgs {
    #[arg(long, value_delimiter = ',', default_value = "8")]
    dim: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    num_projectors: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PovmArgs {
    #[arg(long, value_delimiter = ',', default_value = "4")]
    dim: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    num_measurements: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DhArgs {
    #[arg(long)]
    rho: PathBuf,
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DvtArgs {
    #[arg(long)]
    rho: PathBuf,
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct TlArgs {
    /// With --sigma and --thresh, checks one pair; otherwise runs a campaign.
    #[arg(long, requires_all = ["sigma", "thresh"])]
    rho: Option<PathBuf>,
    #[arg(long, requires = "rho")]
    sigma: Option<PathBuf>,
    #[arg(long, requires = "rho")]
    thresh: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,8,16")]
    dim: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SecondOrderArgs {
    /// D,V,T in bits.
    #[arg(long, value_delimiter = ',', required = true)]
    triple: Vec<f64>,
    #[arg(long)]
    eps: f64,
    /// start:end:step, inclusive.
    #[arg(long)]
    n_range: String,
    /// Berry–Esseen constant.
    #[arg(long, default_value_t = BERRY_ESSEEN_C)]
    c_be: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RateMode {
    /// Entanglement-assisted: shared resource ρ_RA, or an i.i.d. sweep from D,V,T.
    Ea,
    /// Classical-quantum input ρ_XA.
    Unassisted,
}

#[derive(Args, Debug, Serialize)]
struct RateArgs {
    #[arg(long, value_enum)]
    mode: RateMode,
    #[arg(long)]
    eps: f64,
    /// Required for one-shot rates; the sweep uses η = 1/√n.
    #[arg(long)]
    eta: Option<f64>,
    /// ea: shared state on R ⊗ A.
    #[arg(long)]
    resource: Option<PathBuf>,
    #[arg(long)]
    d_r: Option<usize>,
    /// unassisted: classical-quantum state on X ⊗ A.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    d_x: Option<usize>,
    #[arg(long)]
    channel: Option<PathBuf>,
    /// ea sweep: D,V,T of the channel's mutual-information pair.
    #[arg(long, value_delimiter = ',')]
    triple: Option<Vec<f64>>,
    #[arg(long)]
    n_range: Option<String>,
    /// Diagonal energy observable on A, comma separated.
    #[arg(long, value_delimiter = ',', requires = "budget")]
    energy: Option<Vec<f64>>,
    #[arg(long, requires = "energy")]
    budget: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DecodeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Status {
    Ok,
    Falsified(PathBuf),
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match inject_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Falsified(path)) => {
            eprintln!("invariant falsified; counterexample written to {}", path.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn flag_present(args: &[OsString], flag: &str) -> bool {
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&format!("{flag}="))
    })
}

fn toml_flags(table: &toml::Table, user: &[OsString]) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{key}");
        if flag_present(user, &flag) {
            continue;
        }
        let text = match value {
            toml::Value::Table(_) => continue,
            toml::Value::Boolean(true) => {
                out.push(flag.into());
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Array(xs) => xs
                .iter()
                .map(|x| match x {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            toml::Value::Datetime(d) => d.to_string(),
        };
        out.push(flag.into());
        out.push(text.into());
    }
    Ok(out)
}

/// Splices config-file flags into `args` ahead of the user's own.
fn inject_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path)?;
    let table: toml::Table = toml::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("config {}: {e}", path.display())))?;
    let sub = args.iter().position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()));
    let Some(sub) = sub else { return Ok(args) };
    let name = args[sub].to_string_lossy().into_owned();
    let mut out: Vec<OsString> = args[..1].to_vec();
    out.extend(toml_flags(&table, &args)?);
    out.extend_from_slice(&args[1..=sub]);
    if let Some(toml::Value::Table(t)) = table.get(&name) {
        out.extend(toml_flags(t, &args)?);
    }
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn out_path(out: &Option<PathBuf>, cmd: &str, ext: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(format!("{cmd}.{ext}")))
}

fn execute(cmd: &Command) -> Result<Status> {
    let started_at = now();
    let mut outputs = Outputs::new();
    let (primary, status) = match cmd {
        Command::VerifyUnionBound(a) => verify_union_bound(a, &mut outputs)?,
        Command::VerifyLemmas(a) => verify_lemmas(a, &mut outputs)?,
        Command::PovmBound(a) => povm_bound(a, &mut outputs)?,
        Command::Dh(a) => dh(a, &mut outputs)?,
        Command::Dvt(a) => dvt_cmd(a, &mut outputs)?,
        Command::TlCheck(a) => tl_check(a, &mut outputs)?,
        Command::SecondOrder(a) => second_order(a, &mut outputs)?,
        Command::Rate(a) => rate(a, &mut outputs)?,
        Command::SimulateDecoding(a) => simulate_decoding(a, &mut outputs)?,
    };
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cmd.seed(),
        config: serde_json::to_value(cmd)?,
        started_at,
        finished_at: now(),
        outputs: outputs.into_digests(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(sibling(&primary, "manifest.json"), text)?;
    Ok(status)
}

fn a_columns(max_l: usize) -> Vec<String> {
    (1..=max_l).map(|i| format!("a_{i}")).collect()
}

fn padded(a: &[f64], max_l: usize) -> Vec<String> {
    (0..max_l).map(|i| a.get(i).map(|&x| num(x)).unwrap_or_default()).collect()
}

fn state_json(state: &BoundState) -> serde_json::Value {
    match state {
        BoundState::Mixed(rho) => json!({ "kind": "mixed", "rho": MatrixJson::from_matrix(rho.matrix()) }),
        BoundState::Pure(psi) => json!({
            "kind": "pure",
            "re": psi.amplitudes().iter().map(|z| z.re).collect::<Vec<_>>(),
            "im": psi.amplitudes().iter().map(|z| z.im).collect::<Vec<_>>(),
        }),
    }
}

fn finish(
    outputs: &mut Outputs,
    primary: PathBuf,
    counterexamples: Vec<serde_json::Value>,
) -> Result<(PathBuf, Status)> {
    if counterexamples.is_empty() {
        return Ok((primary, Status::Ok));
    }
    let path = sibling(&primary, "counterexamples.json");
    outputs.write_json(&path, &counterexamples)?;
    Ok((primary, Status::Falsified(path)))
}

fn verify_union_bound(a: &UnionArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    let cfg = UnionCampaign {
        dims: a.dim.clone(),
        lengths: a.num_projectors.clone(),
        trials: a.trials,
        seed: a.seed,
        c: a.c,
    };
    let trials = run_union(&cfg)?;
    let max_l = a.num_projectors.iter().copied().max().unwrap_or(0);
    let mut header = vec!["trial".to_string(), "lhs".into()];
    header.extend(a_columns(max_l));
    header.extend(["c", "rhs_ours", "rhs_gao", "rhs_sen", "c_star", "rhs_min"].map(String::from));
    let mut csv = Csv::new(&header);
    let mut bad = Vec::new();
    for t in &trials {
        for r in &t.reports {
            let mut row = vec![t.trial.to_string(), num(r.lhs)];
            row.extend(padded(&r.individual_errors, max_l));
            row.extend([
                num(r.c),
                num(r.rhs_ours),
                num(r.rhs_gao),
                num(r.rhs_sen),
                opt(r.optimum.c_star),
                num(r.optimum.rhs_min),
            ]);
            csv.row(row);
        }
        let violations: Vec<_> = t.violations().collect();
        if !violations.is_empty() {
            bad.push(json!({
                "trial": t.trial,
                "seed": a.seed,
                "state_kind": t.kind.name(),
                "state": state_json(t.instance.state()),
                "projectors": t.instance.projectors().iter().map(|p| MatrixJson::from_matrix(p.matrix())).collect::<Vec<_>>(),
                "violations": violations,
            }));
        }
    }
    let path = out_path(&a.out, "verify-union-bound", "csv");
    outputs.write(&path, &csv.into_string())?;
    finish(outputs, path, bad)
}

fn verify_lemmas(a: &LemmaArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    let trials = run_lemmas(&a.dim, &a.num_projectors, a.trials, a.seed)?;
    let mut csv = Csv::new(&[
        "trial",
        "dim",
        "num_projectors",
        "forward",
        "reversed",
        "sandwiched",
        "cauchy_schwarz_slack",
        "telescoping_slack",
    ]);
    let mut bad = Vec::new();
    for t in &trials {
        let r = &t.residuals;
        csv.row(vec![
            t.trial.to_string(),
            t.dim.to_string(),
            t.projectors.len().to_string(),
            num(r.forward),
            num(r.reversed),
            num(r.sandwiched),
            num(r.cauchy_schwarz_slack),
            num(r.telescoping_slack),
        ]);
        if r.max_identity_residual() > IDENTITY_TOL || r.min_slack() < -IDENTITY_TOL {
            bad.push(json!({
                "trial": t.trial,
                "seed": a.seed,
                "state": state_json(&BoundState::Pure(t.psi.clone())),
                "projectors": t.projectors.iter().map(|p| MatrixJson::from_matrix(p.matrix())).collect::<Vec<_>>(),
                "residuals": r,
            }));
        }
    }
    let path = out_path(&a.out, "verify-lemmas", "csv");
    outputs.write(&path, &csv.into_string())?;
    finish(outputs, path, bad)
}

fn povm_bound(a: &PovmArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    let trials = run_povm(&a.dim, &a.num_measurements, a.trials, a.seed, a.c)?;
    let max_l = a.num_measurements.iter().copied().max().unwrap_or(0);
    let mut header = vec!["trial".to_string(), "dim".into(), "lhs".into()];
    header.extend(a_columns(max_l));
    header.extend(
        [
            "c",
            "rhs_ours",
            "rhs_gao",
            "rhs_sen",
            "c_star",
            "rhs_min",
            "elision_residual",
            "preservation_residual",
            "map_residual",
        ]
        .map(String::from),
    );
    let mut csv = Csv::new(&header);
    let mut bad = Vec::new();
    for t in &trials {
        for r in &t.reports {
            let mut row = vec![t.trial.to_string(), t.dim().to_string(), num(r.lhs)];
            row.extend(padded(&r.individual_errors, max_l));
            row.extend([
                num(r.c),
                num(r.rhs_ours),
                num(r.rhs_gao),
                num(r.rhs_sen),
                opt(r.optimum.c_star),
                num(r.optimum.rhs_min),
                num(t.elision_residual),
                num(t.preservation_residual),
                num(t.map_residual),
            ]);
            csv.row(row);
        }
        let residual = t.elision_residual.max(t.preservation_residual).max(t.map_residual);
        if t.violations().count() > 0 || residual > ELISION_TOL {
            bad.push(json!({
                "trial": t.trial,
                "seed": a.seed,
                "rho": MatrixJson::from_matrix(t.state.matrix()),
                "lambdas": t.lambdas.iter().map(|l| MatrixJson::from_matrix(l.matrix())).collect::<Vec<_>>(),
                "reports": t.reports,
                "elision_residual": t.elision_residual,
                "preservation_residual": t.preservation_residual,
                "map_residual": t.map_residual,
            }));
        }
    }
    let path = out_path(&a.out, "povm-bound", "csv");
    outputs.write(&path, &csv.into_string())?;
    finish(outputs, path, bad)
}

fn read_pair(rho: &Path, sigma: &Path) -> Result<(DensityOperator, DensityOperator)> {
    Ok((read_density(rho)?, read_density(sigma)?))
}

fn dh(a: &DhArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    let (rho, sigma) = read_pair(&a.rho, &a.sigma)?;
    let b = dh_epsilon(&rho, &sigma, a.eps)?;
    let path = out_path(&a.out, "dh", "json");
    let witness_path = sibling(&path, "witness.json");
    outputs.write_json(&witness_path, &MatrixJson::from_matrix(b.witness.matrix()))?;
    let witness_rho = b.witness.probability(&rho);
    let witness_sigma = b.witness.probability(&sigma);
    outputs.write_json(
        &path,
        &json!({
            "lower": b.lower,
            "upper": b.upper,
            "t": b.t,
            "width": b.width(),
            "witness_tr_rho": witness_rho,
            "witness_tr_sigma": witness_sigma,
            "witness_path": witness_path.display().to_string(),
        }),
    )?;
    let sandwich = b.lower.as_f64() <= b.upper.as_f64() + IDENTITY_TOL || b.lower == b.upper;
    let feasible = witness_rho >= 1.0 - a.eps - IDENTITY_TOL;
    let bad = if sandwich && feasible {
        vec![]
    } else {
        vec![json!({
            "rho": MatrixJson::from_matrix(rho.matrix()),
            "sigma": MatrixJson::from_matrix(sigma.matrix()),
            "eps": a.eps,
            "lower": b.lower,
            "upper": b.upper,
            "witness_tr_rho": witness_rho,
        })]
    };
    finish(outputs, path, bad)
}

fn dvt_cmd(a: &DvtArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    let (rho, sigma) = read_pair(&a.rho, &a.sigma)?;
    let v = dvt(&rho, &sigma)?;
    let path = out_path(&a.out, "dvt", "json");
    outputs.write_json(&path, &json!({ "dvt": v, "relative_entropy": v.relative_entropy() }))?;
    Ok((path, Status::Ok))
}

fn tl_check(a: &TlArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    if let (Some(rho), Some(sigma), Some(thresh)) = (&a.rho, &a.sigma, a.thresh) {
        let (rho, sigma) = read_pair(rho, sigma)?;
        let report = build_tl(&rho, &sigma, thresh)?;
        let path = out_path(&a.out, "tl-check", "json");
        outputs.write_json(
            &path,
            &json!({ "report": report, "holds": report.holds(TL_TOL), "support_holds": report.support_holds(TL_TOL) }),
        )?;
        let bad = if report.holds(TL_TOL) {
            vec![]
        } else {
            vec![json!({
                "rho": MatrixJson::from_matrix(rho.matrix()),
                "sigma": MatrixJson::from_matrix(sigma.matrix()),
                "report": report,
            })]
        };
        return finish(outputs, path, bad);
    }
    let trials = run_tl(&a.dim, a.trials, a.seed)?;
    let mut csv = Csv::new(&[
        "trial",
        "kind",
        "dim",
        "thresh",
        "pr_z",
        "tr_rho",
        "tr_sigma",
        "inv_thresh",
        "support_rank",
        "support_tr_rho",
        "support_tr_sigma",
    ]);
    let mut bad = Vec::new();
    for t in &trials {
        let r = &t.report;
        let kind = serde_json::to_value(t.kind)?.as_str().unwrap_or_default().to_string();
        csv.row(vec![
            t.trial.to_string(),
            kind,
            t.dim.to_string(),
            num(r.thresh),
            num(r.pr_z),
            num(r.tr_rho),
            num(r.tr_sigma),
            num(1.0 / r.thresh),
            r.support_rank.to_string(),
            num(r.support_tr_rho),
            num(r.support_tr_sigma),
        ]);
        if !r.holds(TL_TOL) {
            bad.push(json!({
                "trial": t.trial,
                "seed": a.seed,
                "rho": MatrixJson::from_matrix(t.rho.matrix()),
                "sigma": MatrixJson::from_matrix(t.sigma.matrix()),
                "report": r,
            }));
        }
    }
    let path = out_path(&a.out, "tl-check", "csv");
    outputs.write(&path, &csv.into_string())?;
    finish(outputs, path, bad)
}

fn parse_range(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidParameter(format!("n range must be start:end:step with positive step, got {s:?}"));
    let parts: Vec<u64> = s.split(':').map(|p| p.trim().parse::<u64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let (start, end, step) = match parts.as_slice() {
        [a, b] => (*a, *b, 1),
        [a, b, c] => (*a, *b, *c),
        _ => return Err(bad()),
    };
    if step == 0 || start == 0 || end < start {
        return Err(bad());
    }
    Ok((start..=end).step_by(step as usize).collect())
}

fn triple_of(v: &[f64]) -> Result<DvtTriple> {
    match v {
        [d, v, t] if *v >= 0.0 && *t >= 0.0 => Ok(DvtTriple { d: *d, v: *v, t: *t }),
        _ => Err(Error::InvalidParameter(format!("triple must be D,V,T with V, T >= 0, got {v:?}"))),
    }
}

fn second_order(a: &SecondOrderArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    let triple = triple_of(&a.triple)?;
    let mut csv = Csv::new(&["n", "lower_bound_bits", "per_use_rate"]);
    for n in parse_range(&a.n_range)? {
        let input = ExpansionInput { c_be: a.c_be, ..ExpansionInput::new(n, a.eps, triple) };
        let (lb, rate) = match expansion_lower_bound(&input) {
            Ok(v) => (Some(v), Some(v / n as f64)),
            Err(Error::BlocklengthTooSmall { .. }) => (None, None),
            Err(e) => return Err(e),
        };
        csv.row(vec![n.to_string(), opt(lb), opt(rate)]);
    }
    let path = out_path(&a.out, "second-order", "csv");
    outputs.write(&path, &csv.into_string())?;
    Ok((path, Status::Ok))
}

fn need<'a, T>(x: &'a Option<T>, flag: &str) -> Result<&'a T> {
    x.as_ref().ok_or_else(|| Error::InvalidParameter(format!("--{flag} is required here")))
}

fn rate(a: &RateArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    if a.mode == RateMode::Ea && a.triple.is_some() {
        let triple = triple_of(need(&a.triple, "triple")?)?;
        let mut csv =
            Csv::new(&["n", "eta", "information_bits", "penalty_bits", "total_bits", "rate_bits_per_use"]);
        for n in parse_range(need(&a.n_range, "n-range")?)? {
            match ea_second_order_rate(triple, n, a.eps) {
                Ok(r) => csv.row(vec![
                    n.to_string(),
                    num(r.eta),
                    num(r.information_bits),
                    num(r.penalty_bits),
                    num(r.total_bits),
                    num(r.rate_bits_per_use),
                ]),
                Err(Error::BlocklengthTooSmall { .. }) => {
                    let eta = 1.0 / (n as f64).sqrt();
                    csv.row(vec![n.to_string(), num(eta), String::new(), String::new(), String::new(), String::new()])
                }
                Err(e) => return Err(e),
            }
        }
        let path = out_path(&a.out, "rate", "csv");
        outputs.write(&path, &csv.into_string())?;
        return Ok((path, Status::Ok));
    }
    let eta = *need(&a.eta, "eta")?;
    let channel = read_channel(need(&a.channel, "channel")?)?;
    let (body, input_state, d_ref) = match a.mode {
        RateMode::Ea => {
            let d_r = *need(&a.d_r, "d-r")?;
            let resource = read_density(need(&a.resource, "resource")?)?;
            let zeta = channel.apply_on(&resource, 1, &[d_r, channel.dim_in()])?;
            let info = mutual_information_dh(&zeta, d_r, channel.dim_out(), a.eps - eta)?;
            let Bits::Finite(i_h) = info.lower else {
                return Err(Error::InvalidParameter("I_H is infinite; no finite rate to report".into()));
            };
            let rate = ea_rate_lower_bound(i_h, a.eps, eta)?;
            (json!({ "mode": "ea", "information": info, "rate": rate }), resource, d_r)
        }
        RateMode::Unassisted => {
            let d_x = *need(&a.d_x, "d-x")?;
            let input = read_density(need(&a.input, "input")?)?;
            let point = cq_rate_point(&input, d_x, &channel, a.eps, eta)?;
            (json!({ "mode": "unassisted", "point": point }), input, d_x)
        }
    };
    let mut body = body;
    if let (Some(g), Some(budget)) = (&a.energy, a.budget) {
        let g = EnergyObservable::from_diagonal(g)?;
        let marginal = input_state.partial_trace(&[d_ref, channel.dim_in()], &[1])?;
        body["energy"] = serde_json::to_value(energy_check(&[marginal], &g, 1, budget)?)?;
    }
    let path = out_path(&a.out, "rate", "json");
    outputs.write_json(&path, &body)?;
    Ok((path, Status::Ok))
}

fn simulate_decoding(a: &DecodeArgs, outputs: &mut Outputs) -> Result<(PathBuf, Status)> {
    let sj: ScenarioJson = read_json(&a.scenario)?;
    let (scenario, lambda) = sj.build()?;
    let witness = if lambda.is_none() { Some(scenario.witness()?) } else { None };
    let lambda = lambda.unwrap_or_else(|| witness.as_ref().expect("set above").witness.clone());
    let result = crate::coding_sim::run_decoding_experiment(&scenario, Some(&lambda))?;
    let body = json!({
        "d_r": scenario.d_r(),
        "d_a": scenario.d_a(),
        "d_b": scenario.d_b(),
        "messages": scenario.messages(),
        "eps": scenario.eps(),
        "eta": scenario.eta(),
        "c": scenario.c(),
        "witness": witness.as_ref().map(|w| json!({ "lower": w.lower, "upper": w.upper })),
        "holds": result.holds(),
        "result": result,
    });
    let path = out_path(&a.out, "simulate-decoding", "json");
    outputs.write_json(&path, &body)?;
    let bad = if result.holds() {
        vec![]
    } else {
        vec![json!({
            "scenario": sj,
            "lambda": MatrixJson::from_matrix(lambda.matrix()),
            "result": result,
        })]
    };
    finish(outputs, path, bad)
}
