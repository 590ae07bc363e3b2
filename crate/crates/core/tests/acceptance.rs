//! Acceptance criteria AC1–AC9. Runs as a plain binary (no libtest harness)
//! so every criterion prints one PASS/FAIL line; exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qunion::campaign::{
    qubit_scenarios, ququart_scenarios, run_dh, run_lemmas, run_povm, run_second_order, run_decoding, run_tl,
    run_union, UnionCampaign, EPS_GRID,
};
use qunion::hypotest::{dh_epsilon, Bits};
use qunion::operator::json::{ChannelJson, MatrixJson};
use qunion::operator::random::{random_channel, random_density, trial_rng};
use qunion::operator::QuantumChannel;
use qunion::union_bound::{BOUND_TOL, C_GRID};

const SEED: u64 = 20240601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn ac1_and_3() -> (Verdict, Verdict) {
    let start = Instant::now();
    let cfg = UnionCampaign {
        dims: vec![2, 4, 8, 16, 32],
        lengths: (2..=8).collect(),
        trials: 10_000,
        seed: SEED,
        c: None,
    };
    let trials = run_union(&cfg).expect("union campaign");
    let elapsed = start.elapsed().as_secs_f64();
    let evaluations: usize = trials.iter().map(|t| t.reports.len()).sum();
    let violations: usize = trials.iter().map(|t| t.violations().count()).sum();
    let infimum_violations = trials.iter().filter(|t| t.reports[0].lhs > t.reports[0].optimum.rhs_min + BOUND_TOL).count();
    let worst = trials
        .iter()
        .flat_map(|t| t.reports.iter())
        .map(|r| r.lhs - r.rhs_ours)
        .fold(f64::NEG_INFINITY, f64::max);
    let ac1 = verdict(
        violations == 0 && infimum_violations == 0 && elapsed < 300.0,
        format!(
            "10000 instances, {evaluations} (instance, c) evaluations: {violations} violations at tol 1e-8, \
             {infimum_violations} above the c-optimum; max lhs - rhs = {worst:.3e}; {elapsed:.1}s"
        ),
    );

    // c = 1 against 4Σa: termwise 2, 4, 3 <= 4, checked up to rounding of the sums
    let mut c1_failures = 0;
    let mut nonzero = 0;
    let mut strict = 0;
    for t in &trials {
        let at1 = t.reports.iter().find(|r| r.c == 1.0).expect("c = 1 evaluated");
        if at1.rhs_ours > at1.rhs_gao * (1.0 + 4.0 * f64::EPSILON) {
            c1_failures += 1;
        }
        if at1.individual_errors.iter().any(|&a| a > 0.0) {
            nonzero += 1;
            if t.grid_min() < at1.rhs_gao {
                strict += 1;
            }
        }
    }
    let frac = strict as f64 / nonzero.max(1) as f64;
    let ac3 = verdict(
        c1_failures == 0 && frac >= 0.99,
        format!(
            "rhs(c=1) > gao on {c1_failures} instances; grid {C_GRID:?} minimum strictly below gao on \
             {strict}/{nonzero} = {:.4}% of instances with nonzero a",
            100.0 * frac
        ),
    );
    (ac1, ac3)
}

fn ac2() -> Verdict {
    let trials = run_lemmas(&[2, 4, 8, 16, 32], &(2..=8).collect::<Vec<_>>(), 10_000, SEED).expect("lemma campaign");
    let max_residual = trials.iter().map(|t| t.residuals.max_identity_residual()).fold(0.0, f64::max);
    let min_slack = trials.iter().map(|t| t.residuals.min_slack()).fold(f64::INFINITY, f64::min);
    verdict(
        max_residual <= 1e-9 && min_slack >= -1e-9,
        format!("10000 pure-state instances: max identity residual {max_residual:.3e}, min slack {min_slack:.3e}"),
    )
}

fn ac4() -> Verdict {
    let trials = run_povm(&[2, 3, 4, 8], &[2, 3, 4, 5], 1000, SEED, None).expect("povm campaign");
    let pairs: usize = trials.iter().map(|t| t.lambdas.len()).sum();
    let preservation = trials.iter().map(|t| t.preservation_residual).fold(0.0, f64::max);
    let elision = trials.iter().map(|t| t.elision_residual.max(t.map_residual)).fold(0.0, f64::max);
    let violations: usize = trials.iter().map(|t| t.violations().count()).sum();
    verdict(
        preservation <= 1e-8 && elision <= 1e-8 && violations == 0,
        format!(
            "{pairs} (Λ, ρ) pairs: max preservation residual {preservation:.3e}; 1000 chains (d <= 8, L <= 5): \
             {violations} bound violations; max probe-elision residual {elision:.3e}"
        ),
    )
}

fn ac5() -> Verdict {
    let dims: Vec<usize> = (2..=16).collect();
    let trials = run_dh(&dims, 1500, SEED).expect("dh campaign");
    let commuting: Vec<_> = trials.iter().filter(|t| t.kind.commuting()).collect();
    let max_gap = commuting.iter().map(|t| t.oracle_gap().unwrap()).fold(0.0, f64::max);
    let max_width = commuting.iter().map(|t| t.width()).fold(0.0, f64::max);
    let noncommuting: Vec<_> = trials.iter().filter(|t| !t.kind.commuting()).collect();
    let sandwich_fail = noncommuting
        .iter()
        .filter(|t| match (t.lower, t.upper) {
            (Bits::Finite(l), Bits::Finite(u)) => l > u + 1e-9,
            (Bits::Infinite, Bits::Finite(_)) => true,
            _ => false,
        })
        .count();
    let infeasible = trials.iter().filter(|t| t.witness_rho < 1.0 - t.eps - 1e-9).count();

    let mut same_gap: f64 = 0.0;
    for (k, d) in (2..=16).enumerate() {
        let mut rng = trial_rng(SEED ^ 0x5eed, k as u64);
        let rho = random_density(&mut rng, d, d).unwrap();
        for eps in EPS_GRID {
            let b = dh_epsilon(&rho, &rho, eps).unwrap();
            same_gap = same_gap.max((b.lower.as_f64() + (1.0 - eps).log2()).abs());
        }
    }
    verdict(
        commuting.len() >= 1000 && max_gap <= 1e-6 && max_width <= 1e-4 && sandwich_fail == 0 && infeasible == 0 && same_gap <= 1e-9,
        format!(
            "{} commuting pairs: max |lower - LP| {max_gap:.3e}, max width {max_width:.3e}; {} non-commuting: \
             {sandwich_fail} sandwich failures; {infeasible} infeasible witnesses (tol 1e-9); ρ = σ max error {same_gap:.3e}",
            commuting.len(),
            noncommuting.len()
        ),
    )
}

fn ac6() -> Verdict {
    let dims: Vec<usize> = (2..=16).collect();
    let trials = run_tl(&dims, 1000, SEED).expect("tl campaign");
    let failures = trials.iter().filter(|t| !t.report.holds(1e-8)).count();
    let noncommuting = trials.iter().filter(|t| !t.kind.commuting()).count();
    let overshoot = trials.iter().filter(|t| !t.report.support_holds(1e-8)).count();
    let worst_rho = trials.iter().map(|t| t.report.pr_z - t.report.tr_rho).fold(f64::NEG_INFINITY, f64::max);
    let worst_sigma =
        trials.iter().map(|t| t.report.tr_sigma - 1.0 / t.report.thresh).fold(f64::NEG_INFINITY, f64::max);
    verdict(
        failures == 0,
        format!(
            "1000 instances ({noncommuting} non-commuting): {failures} failures; max Pr{{Z}} - Tr{{Tρ}} = {worst_rho:.3e}, \
             max Tr{{Tσ}} - 1/L = {worst_sigma:.3e}; support-projector variant exceeds 1/L on {overshoot}"
        ),
    )
}

fn ac7() -> Verdict {
    let start = Instant::now();
    let ns = [50, 100, 200, 500, 1000];
    let rows = run_second_order(50, &ns, SEED).expect("second-order campaign");
    let elapsed = start.elapsed().as_secs_f64();
    let checked = rows.iter().filter(|r| r.expansion.is_some()).count();
    let below = rows.iter().filter(|r| r.expansion.is_some_and(|e| r.exact + 1e-6 < e)).count();
    let min_margin = rows.iter().filter_map(|r| r.expansion.map(|e| r.exact - e)).fold(f64::INFINITY, f64::min);
    let band = rows.iter().filter(|r| (r.exact - r.normal_approx).abs() > 10.0 * (r.n as f64).log2()).count();
    let worst_band = rows
        .iter()
        .map(|r| (r.exact - r.normal_approx).abs() / (r.n as f64).log2())
        .fold(0.0, f64::max);
    verdict(
        below == 0 && band == 0 && elapsed < 120.0,
        format!(
            "{} points, {checked} above the blocklength threshold: {below} with exact < expansion (min margin \
             {min_margin:.3}); remainder band: {band} outside, max |exact - normal|/log2 n = {worst_band:.3}; {elapsed:.1}s",
            rows.len()
        ),
    )
}

fn ac8() -> Verdict {
    let mut scenarios = qubit_scenarios(SEED).expect("scenarios");
    let fixed_count = scenarios.len();
    scenarios.extend(ququart_scenarios(SEED).expect("scenarios"));
    let trials = run_decoding(&scenarios).expect("decoding campaign");
    let fixed: Vec<_> = trials.iter().filter(|t| !t.auto_messages).collect();
    let auto: Vec<_> = trials.iter().filter(|t| t.auto_messages).collect();
    let bound_fail = trials.iter().filter(|t| !t.result.holds()).count();
    let max_excess = trials.iter().map(|t| t.result.excess()).fold(f64::NEG_INFINITY, f64::max);
    let eps_fail = auto.iter().filter(|t| t.result.max_error() > t.result.eps + 1e-8).count();
    let auto_multi = auto.iter().filter(|t| t.result.messages >= 2).count();
    let complete = trials
        .iter()
        .flat_map(|t| t.result.outcome_distribution.iter())
        .map(|r| (r.total() - 1.0).abs())
        .fold(0.0, f64::max);
    let c_ok = trials.iter().all(|t| t.result.c == t.result.eta / (2.0 * t.result.eps - t.result.eta));
    verdict(
        fixed_count >= 20 && bound_fail == 0 && eps_fail == 0 && complete <= 1e-8 && c_ok,
        format!(
            "{} fixed-M qubit scenarios (M in 2..=4): {bound_fail} bound failures over all runs, max p_e - bound = \
             {max_excess:.3e}; {} runs with M from I_H ({auto_multi} with M >= 2): {eps_fail} with p_e > eps; \
             outcome completeness {complete:.1e}",
            fixed.len(),
            auto.len()
        ),
    )
}

fn qunion(dir: &Path, threads: usize, args: &[&str]) -> std::process::ExitStatus {
    Command::new(env!("CARGO_BIN_EXE_qunion"))
        .current_dir(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .status()
        .expect("run qunion")
}

fn ac9() -> Verdict {
    let work = tempfile::tempdir().unwrap();
    let inputs = work.path();
    let mut rng = trial_rng(SEED, 99);
    let rho = random_density(&mut rng, 4, 3).unwrap();
    let sigma = random_density(&mut rng, 4, 4).unwrap();
    let write = |name: &str, v: serde_json::Value| std::fs::write(inputs.join(name), v.to_string()).unwrap();
    write("rho.json", serde_json::to_value(MatrixJson::from_matrix(rho.matrix())).unwrap());
    write("sigma.json", serde_json::to_value(MatrixJson::from_matrix(sigma.matrix())).unwrap());
    let resource = random_density(&mut rng, 4, 2).unwrap();
    let ch: QuantumChannel = random_channel(&mut rng, 2, 2, 2).unwrap();
    write(
        "scenario.json",
        serde_json::json!({
            "d_r": 2,
            "resource": MatrixJson::from_matrix(resource.matrix()),
            "channel": ChannelJson::from_channel(&ch),
            "messages": 3,
            "eps": 0.5,
            "eta": 0.2,
        }),
    );
    let rho_path = inputs.join("rho.json").display().to_string();
    let sigma_path = inputs.join("sigma.json").display().to_string();
    let scenario_path = inputs.join("scenario.json").display().to_string();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("ub.csv", "verify-union-bound --dim 2,4,8,16,32 --num-projectors 2,3,4,5,6,7,8 --trials 10000 --seed 11"),
        ("lemmas.csv", "verify-lemmas --dim 2,4,8,16,32 --num-projectors 2,3,4,5,6,7,8 --trials 10000 --seed 11"),
        ("povm.csv", "povm-bound --dim 2,3,4,8 --num-measurements 2,3,4,5 --trials 1000 --seed 11"),
        ("tl.csv", "tl-check --dim 2,4,8,16 --trials 1000 --seed 11"),
        ("so.csv", "second-order --triple 1,1,1 --eps 0.5 --n-range 100:1000:100"),
        ("rate.csv", "rate --mode ea --triple 0.5,0.8,1.2 --eps 0.3 --n-range 50:1000:50"),
    ]
    .into_iter()
    .map(|(out, cmd)| (out, cmd.split(' ').map(String::from).collect()))
    .chain([
        ("dh.json", vec!["dh".into(), "--rho".into(), rho_path.clone(), "--sigma".into(), sigma_path.clone(), "--eps".into(), "0.25".into()]),
        ("dvt.json", vec!["dvt".into(), "--rho".into(), rho_path, "--sigma".into(), sigma_path]),
        ("decode.json", vec!["simulate-decoding".into(), "--scenario".into(), scenario_path]),
    ])
    .collect();

    let runs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut mismatched = Vec::new();
    let mut failed = Vec::new();
    let mut files = 0;
    for (out, cmd) in &commands {
        for (k, dir) in runs.iter().enumerate() {
            let mut args: Vec<&str> = cmd.iter().map(String::as_str).collect();
            args.extend(["--out", out]);
            // different thread counts on purpose
            let status = qunion(dir.path(), if k == 0 { 1 } else { 4 }, &args);
            if !status.success() {
                failed.push(format!("{} (run {k}): {status}", cmd[0]));
            }
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(runs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| !n.ends_with(".manifest.json"))
        .collect();
    names.sort();
    for name in &names {
        files += 1;
        let a = std::fs::read(runs[0].path().join(name)).unwrap();
        let b = std::fs::read(runs[1].path().join(name)).unwrap_or_default();
        if a != b {
            mismatched.push(name.clone());
        }
    }
    verdict(
        failed.is_empty() && mismatched.is_empty() && files >= commands.len(),
        format!(
            "{} commands run twice (1 vs 4 threads): {files} data files compared, mismatched {mismatched:?}, failed runs {failed:?}",
            commands.len()
        ),
    )
}

fn main() {
    let mut verdicts: Vec<(&str, Verdict)> = Vec::new();
    let (v1, v3) = ac1_and_3();
    verdicts.push(("AC1 union bound campaign", v1));
    verdicts.push(("AC2 projector identities", ac2()));
    verdicts.push(("AC3 improvement ordering", v3));
    verdicts.push(("AC4 Naimark dilation", ac4()));
    verdicts.push(("AC5 D_H bracket", ac5()));
    verdicts.push(("AC6 test operator", ac6()));
    verdicts.push(("AC7 second-order validity", ac7()));
    verdicts.push(("AC8 sequential decoding", ac8()));
    verdicts.push(("AC9 determinism", ac9()));
    let mut failures = 0;
    for (name, v) in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failures += 1;
        }
        println!("[{tag}] {name}: {}", v.detail);
    }
    println!("acceptance: {} passed, {failures} failed", verdicts.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
