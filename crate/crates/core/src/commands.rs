//! The four CLI commands. Each writes its artifacts under `out` and reports
//! whether its checks passed; hard failures come back as errors.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::ladder::{
    estimate_lambda_window, lambda_sweep, run_ladder, run_ladder_on, rung_lambdas, scan_ladder, verify_norm_claims,
    LadderResult, NormClaims, Problem, SweepResult, WindowEstimate,
};
use crate::operator::{assemble_mass, assemble_stiffness, oracle_gagliardo_extrapolated, oracle_test_vectors, MassKind, StiffnessForm};
use crate::report::{csv_bytes, write_atomic, write_csv, write_json};
use crate::verify::{run_verify, VerifyReport};

/// What a command found. `passed == false` maps to exit status 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub messages: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

fn stiffness_for(cfg: &RunConfig) -> Result<StiffnessForm> {
    assemble_stiffness(&cfg.grid()?, cfg.operator.s, &cfg.operator.quadrature)
}

fn problem_for(cfg: &RunConfig, stiffness: Arc<StiffnessForm>) -> Result<Problem> {
    let t_max = cfg.ladder_options()?.scan.range.1;
    Problem::new(stiffness, &cfg.spec()?, cfg.construction.clone(), t_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub vector: String,
    pub assembled: f64,
    pub oracle: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssembleReport {
    pub n_interior: usize,
    pub s: f64,
    pub max_asymmetry: f64,
    pub symmetric: bool,
    pub smallest_eigenvalue: f64,
    pub positive_definite: bool,
    pub mass_positive_definite: bool,
    pub oracle_refinement: usize,
    pub oracle: Vec<OracleRow>,
    pub oracle_ok: bool,
    pub passed: bool,
}

/// Refinement of the brute-force oracle used by `assemble-check`.
pub const ORACLE_REFINEMENT: usize = 16;

/// Relative tolerance of oracle equivalence.
pub const ORACLE_TOL: f64 = 0.01;

/// Symmetry, definiteness and oracle agreement of the assembled matrices.
/// `stiffness` replaces the assembled form when given.
pub fn cmd_assemble_check(cfg: &RunConfig, out: &Path, stiffness: Option<StiffnessForm>) -> Result<(Outcome, AssembleReport)> {
    let grid = cfg.grid()?;
    let a = match stiffness {
        Some(a) => a,
        None => stiffness_for(cfg)?,
    };
    let max_asymmetry = a.max_asymmetry();
    let smallest_eigenvalue = a.smallest_eigenvalue();
    let positive_definite = smallest_eigenvalue > 1e-12 * a.matrix().amax();
    let mass_positive_definite = [MassKind::Consistent, MassKind::Lumped].into_iter().all(|k| {
        let m = assemble_mass(&grid, k);
        m.matrix().clone().symmetric_eigenvalues().min() > 0.0
    });
    let oracle: Vec<OracleRow> = oracle_test_vectors(&grid, cfg.solver.rng_seed)
        .into_iter()
        .map(|(name, u)| {
            let assembled = a.seminorm_squared(&u);
            let oracle = oracle_gagliardo_extrapolated(&grid, &u, cfg.operator.s, ORACLE_REFINEMENT);
            OracleRow {
                vector: name,
                assembled,
                oracle,
                relative_gap: ((assembled - oracle) / oracle).abs(),
            }
        })
        .collect();
    let oracle_ok = oracle.iter().all(|r| r.relative_gap <= ORACLE_TOL);
    let symmetric = max_asymmetry == 0.0;
    let passed = symmetric && positive_definite && mass_positive_definite && oracle_ok;
    let report = AssembleReport {
        n_interior: grid.n_interior(),
        s: cfg.operator.s,
        max_asymmetry,
        symmetric,
        smallest_eigenvalue,
        positive_definite,
        mass_positive_definite,
        oracle_refinement: ORACLE_REFINEMENT,
        oracle,
        oracle_ok,
        passed,
    };
    write_json(&out.join("assemble_check.json"), &report)?;

    let mut messages = Vec::new();
    let mut note = |ok: bool, name: &str, detail: String| {
        messages.push(format!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" }));
    };
    note(symmetric, "stiffness symmetry", format!("max |A - Aᵀ| = {max_asymmetry:e}"));
    note(positive_definite, "stiffness definiteness", format!("λ_min = {smallest_eigenvalue:e}"));
    note(mass_positive_definite, "mass definiteness", String::new());
    let worst = report.oracle.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    note(oracle_ok, "oracle equivalence", format!("worst relative gap {worst:e}"));
    Ok((Outcome { passed, messages }, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct LadderDocument<'a> {
    config: &'a RunConfig,
    passed: bool,
    result: &'a LadderResult,
    norm_claims: NormClaims,
}

/// Runs the configured ladder and writes `summary.csv`, `solution_k{k}.csv`
/// and `result.json`.
pub fn cmd_ladder(cfg: &RunConfig, out: &Path) -> Result<(Outcome, LadderResult)> {
    let problem = problem_for(cfg, Arc::new(stiffness_for(cfg)?))?;
    let result = run_ladder(&problem, cfg.direction()?, &cfg.ladder_options()?)?;
    let claims = verify_norm_claims(&result);
    if cfg.output.wants(Format::Csv) {
        write_atomic(&out.join("summary.csv"), &result.summary_csv()?)?;
        for k in 0..result.rungs.len() {
            write_csv(&out.join(format!("solution_k{}.csv", k + 1)), &["x", "u"], &result.solution_rows(k))?;
        }
    }
    if cfg.output.wants(Format::Json) {
        let doc = LadderDocument {
            config: cfg,
            passed: result.passed(),
            result: &result,
            norm_claims: claims,
        };
        write_json(&out.join("result.json"), &doc)?;
    }
    let mut messages: Vec<String> = result
        .rungs
        .iter()
        .map(|r| {
            format!(
                "k={} η={:e} E={:e} ‖u‖∞={:e} ‖u‖X={:e} start={}",
                r.k, r.eta, r.solution.energy, r.solution.linf, r.solution.xnorm, r.solution.label
            )
        })
        .collect();
    messages.push(format!("verdicts: {:?}", result.verdicts));
    Ok((
        Outcome {
            passed: result.passed(),
            messages,
        },
        result,
    ))
}

/// One entry of `--lambda-list`: a real, or a multiple of `λ̃_K` written with
/// a `w` suffix (`-0.5w`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Value(f64),
    WindowFraction(f64),
}

pub fn parse_lambda_list(text: &str) -> Result<Vec<LambdaSpec>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (body, window) = match s.strip_suffix('w') {
                Some(b) => (b, true),
                None => (s, false),
            };
            let v: f64 = body
                .parse()
                .map_err(|_| Error::invalid(format!("bad λ value {s:?} in list")))?;
            if !v.is_finite() {
                return Err(Error::invalid(format!("λ value {s:?} is not finite")));
            }
            Ok(if window {
                LambdaSpec::WindowFraction(v)
            } else {
                LambdaSpec::Value(v)
            })
        })
        .collect()
}

fn default_lambdas() -> Vec<LambdaSpec> {
    [-1.0, -0.5, 0.0, 0.5, 1.0]
        .into_iter()
        .map(LambdaSpec::WindowFraction)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub base: LadderResult,
    pub window: WindowEstimate,
    pub sweep: SweepResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct WindowDocument<'a> {
    p: f64,
    alpha: &'a [f64],
    beta: &'a [f64],
    theta: &'a [f64],
    rung_lambdas: &'a [f64],
    lambda_tilde: &'a [f64],
    base_energies: Vec<f64>,
}

/// Estimates `λ̃_K` from the `λ = 0` ladder and reruns that ladder at each
/// listed `λ`. Passes when every listed `|λ| ≤ λ̃_K` keeps `K` ordered,
/// distinct solutions; rows outside the window are informational.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path, lambdas: Option<&[LambdaSpec]>) -> Result<(Outcome, SweepReport)> {
    let stiffness = Arc::new(stiffness_for(cfg)?);
    let base_cfg = RunConfig {
        construction: cfg.construction.with_lambda(0.0),
        ..cfg.clone()
    };
    let problem = problem_for(&base_cfg, stiffness)?;
    let opts = cfg.ladder_options()?;
    let direction = cfg.direction()?;
    let ladder = scan_ladder(&problem, direction, &opts)?;
    let base = run_ladder_on(&problem, 0.0, &ladder, &opts)?;
    let p = problem.construction().power();
    let g0 = problem.composite(0.0)?;
    let rl = rung_lambdas(&g0, &ladder, p, cfg.sweep.rung_samples);
    let window = estimate_lambda_window(&base, p, &rl)?;
    let lt = window.last();

    let specs: Vec<LambdaSpec> = match (lambdas, &cfg.sweep.lambdas) {
        (Some(l), _) => l.to_vec(),
        (None, Some(l)) => l.iter().copied().map(LambdaSpec::Value).collect(),
        (None, None) => default_lambdas(),
    };
    let values: Vec<f64> = specs
        .iter()
        .map(|s| match *s {
            LambdaSpec::Value(v) => v,
            LambdaSpec::WindowFraction(c) => c * lt,
        })
        .collect();
    let sweep = lambda_sweep(&problem, &ladder, &values, Some(lt), &opts);
    let passed = sweep.window_holds.unwrap_or(false);

    if cfg.output.wants(Format::Csv) {
        write_atomic(&out.join("sweep.csv"), &csv_bytes(&SweepResult::HEADER, &sweep.rows())?)?;
    }
    if cfg.output.wants(Format::Json) {
        let doc = WindowDocument {
            p,
            alpha: &window.alpha,
            beta: &window.beta,
            theta: &window.theta,
            rung_lambdas: &window.rung_lambdas,
            lambda_tilde: &window.lambda_tilde,
            base_energies: base.energies(),
        };
        write_json(&out.join("window.json"), &doc)?;
        write_json(&out.join("sweep.json"), &sweep)?;
    }
    let mut messages = vec![format!("λ̃ = {lt:e} (p = {p})")];
    for r in &sweep.rows {
        let inside = r.lambda.abs() <= lt * (1.0 + 1e-12);
        let flag = if r.count >= sweep.depth && r.ordered {
            "ok  "
        } else if inside {
            "FAIL"
        } else {
            "note"
        };
        messages.push(format!(
            "{flag} λ={:e} count={} ordered={}{}",
            r.lambda,
            r.count,
            r.ordered,
            if inside { "" } else { " (outside window)" }
        ));
    }
    Ok((Outcome { passed, messages }, SweepReport { base, window, sweep }))
}

/// Runs the property suite and writes `verify.json`. `stiffness` replaces the
/// assembled matrix, for fault injection.
pub fn cmd_verify(cfg: &RunConfig, out: &Path, stiffness: Option<StiffnessForm>) -> Result<(Outcome, VerifyReport)> {
    let report = run_verify(cfg, stiffness)?;
    write_json(&out.join("verify.json"), &report)?;
    let messages = report
        .properties
        .iter()
        .map(|p| {
            format!(
                "{} {}::{}{}",
                if p.passed { "ok  " } else { "FAIL" },
                p.module,
                p.name,
                if p.detail.is_empty() {
                    String::new()
                } else {
                    format!(": {}", p.detail)
                }
            )
        })
        .collect();
    Ok((
        Outcome {
            passed: report.passed,
            messages,
        },
        report,
    ))
}
