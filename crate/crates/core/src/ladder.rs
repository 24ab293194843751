//! Ladder pipelines: scan the negativity intervals of `g`, minimize the
//! truncated energy on every rung, and check the ordering and norm claims.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{BumpFamily, EnergyModel};
use crate::error::{Error, Result};
use crate::grid::{Grid, NodalVector};
use crate::nonlinearity::{
    scan_sign_ladder, Antiderivative, Composite, Construction, Direction, NonlinearitySpec, ScanOptions,
    TruncationLadder,
};
use crate::operator::StiffnessForm;
use crate::report::{csv_bytes, fmt_f64};
use crate::solver::{
    check_box_membership, distinctness, minimize_in_box, BoxConstraint, BoxMembership, SolutionRecord,
    SolverOptions,
};

/// Search range used when none is configured.
pub fn default_search_range(direction: Direction) -> (f64, f64) {
    match direction {
        Direction::Origin => (1e-3, 0.3),
        Direction::Infinity => (20.0, 30.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderOptions {
    pub depth: usize,
    pub scan: ScanOptions,
    pub solver: SolverOptions,
    /// Plateau radius of the certificate bump; `None` uses `L/2`.
    pub bump_radius: Option<f64>,
    pub height_samples: usize,
    /// Box-membership slack as a fraction of `η_k`.
    pub box_tol: f64,
    /// Distinctness threshold as a fraction of the smallest `η_k`.
    pub separation: f64,
}

impl LadderOptions {
    pub fn new(direction: Direction, depth: usize) -> Self {
        let (lo, hi) = default_search_range(direction);
        Self {
            depth,
            scan: ScanOptions::new(lo, hi),
            solver: SolverOptions::default(),
            bump_radius: None,
            height_samples: 2000,
            box_tol: 1e-10,
            separation: 1e-4,
        }
    }

    fn check(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::invalid("ladder depth must be at least 1"));
        }
        if self.height_samples < 8 {
            return Err(Error::invalid("height_samples must be at least 8"));
        }
        if !(self.box_tol >= 0.0 && self.separation > 0.0) {
            return Err(Error::invalid("box_tol must be non-negative and separation positive"));
        }
        self.solver.check()
    }
}

/// Stiffness form, tabulated `f` and the construction that turns it into `g`.
#[derive(Debug, Clone)]
pub struct Problem {
    stiffness: Arc<StiffnessForm>,
    table: Arc<Antiderivative>,
    construction: Construction,
}

impl Problem {
    /// Tabulates `F` up to `t_max`, which must cover every truncation level.
    pub fn new(
        stiffness: Arc<StiffnessForm>,
        spec: &NonlinearitySpec,
        construction: Construction,
        t_max: f64,
    ) -> Result<Self> {
        let table = Arc::new(Antiderivative::build(spec, t_max)?);
        Composite::compose_with(Arc::clone(&table), &construction)?;
        Ok(Self {
            stiffness,
            table,
            construction,
        })
    }

    pub fn stiffness(&self) -> &Arc<StiffnessForm> {
        &self.stiffness
    }

    pub fn grid(&self) -> &Grid {
        self.stiffness.grid()
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        self.table.spec()
    }

    pub fn composite(&self, lambda: f64) -> Result<Arc<Composite>> {
        let c = self.construction.with_lambda(lambda);
        Ok(Arc::new(Composite::compose_with(Arc::clone(&self.table), &c)?))
    }

    /// Direction implied by the construction, if it has one.
    pub fn direction(&self) -> Option<Direction> {
        self.construction.natural_direction()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RungRecord {
    /// One-based rung index.
    pub k: usize,
    pub delta: f64,
    pub eta: f64,
    #[serde(flatten)]
    pub solution: SolutionRecord,
    /// `E_k(z_k)` for the best bump in the box.
    pub certificate: f64,
    pub bump_height: f64,
    pub lower_bound: f64,
    /// Lowest energy over every iterate of every start on this rung.
    pub lowest_iterate: f64,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    pub converged: bool,
    pub negative: bool,
    pub certificate: bool,
    pub box_membership: bool,
    pub energy_order: bool,
    pub linf_trend: bool,
    pub xnorm_trend: bool,
    pub distinct: bool,
    pub lower_bound: bool,
    /// Infinity ladders: `‖u_k‖_∞ > δ_{k−1}`. Always true for the origin.
    pub exceeds_previous: bool,
}

impl Verdicts {
    /// Every claim of the pipeline for its direction.
    pub fn passed(&self, direction: Direction) -> bool {
        let common = self.converged
            && self.certificate
            && self.box_membership
            && self.energy_order
            && self.linf_trend
            && self.distinct
            && self.lower_bound;
        match direction {
            Direction::Origin => common && self.negative && self.xnorm_trend,
            Direction::Infinity => common && self.exceeds_previous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderResult {
    pub direction: Direction,
    pub s: f64,
    pub half_width: f64,
    pub n_interior: usize,
    pub lambda: f64,
    pub ladder: TruncationLadder,
    pub rungs: Vec<RungRecord>,
    pub distinct_count: usize,
    /// Energy separators when the energies are strictly ordered.
    pub theta: Option<Vec<f64>>,
    /// `‖z₁‖²_X` for the unit-height certificate bump.
    pub bump_constant: f64,
    pub verdicts: Verdicts,
}

impl LadderResult {
    pub fn energies(&self) -> Vec<f64> {
        self.rungs.iter().map(|r| r.solution.energy).collect()
    }

    pub fn solutions(&self) -> Vec<&NodalVector> {
        self.rungs.iter().map(|r| &r.solution.u).collect()
    }

    pub fn passed(&self) -> bool {
        self.verdicts.passed(self.direction)
    }

    pub const SUMMARY_HEADER: [&'static str; 17] = [
        "k",
        "delta",
        "eta",
        "energy",
        "certificate",
        "linf",
        "xnorm",
        "residual",
        "pg_norm",
        "iterations",
        "start",
        "converged",
        "box_inside",
        "box_margin",
        "certificate_ok",
        "lower_bound",
        "lowest_iterate",
    ];

    /// One row per rung, in the column order of [`Self::SUMMARY_HEADER`].
    pub fn summary_rows(&self) -> Vec<Vec<String>> {
        self.rungs
            .iter()
            .map(|r| {
                let s = &r.solution;
                let m = s.delta.unwrap_or(BoxMembership {
                    inside: false,
                    margin: f64::NAN,
                });
                vec![
                    r.k.to_string(),
                    fmt_f64(r.delta),
                    fmt_f64(r.eta),
                    fmt_f64(s.energy),
                    fmt_f64(r.certificate),
                    fmt_f64(s.linf),
                    fmt_f64(s.xnorm),
                    fmt_f64(s.residual),
                    fmt_f64(s.pg_norm),
                    s.iterations.to_string(),
                    s.label.clone(),
                    s.converged.to_string(),
                    m.inside.to_string(),
                    fmt_f64(m.margin),
                    (s.energy <= r.certificate).to_string(),
                    fmt_f64(r.lower_bound),
                    fmt_f64(r.lowest_iterate),
                ]
            })
            .collect()
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(&Self::SUMMARY_HEADER, &self.summary_rows())
    }

    /// `(x, u)` rows of rung `k` (zero-based), boundary zeros included.
    pub fn solution_rows(&self, k: usize) -> Vec<Vec<String>> {
        let u = &self.rungs[k].solution.u;
        let grid = u.grid();
        let n = grid.n_interior();
        let mut rows = vec![vec![fmt_f64(-grid.half_width()), fmt_f64(0.0)]];
        for (i, v) in u.as_slice().iter().enumerate() {
            rows.push(vec![fmt_f64(grid.coordinate(i + 1)), fmt_f64(*v)]);
        }
        rows.push(vec![fmt_f64(grid.coordinate(n + 1)), fmt_f64(0.0)]);
        rows
    }
}

pub fn scan_ladder(problem: &Problem, direction: Direction, opts: &LadderOptions) -> Result<TruncationLadder> {
    let g = problem.composite(problem.construction.lambda())?;
    scan_sign_ladder(|t| g.eval(t), direction, opts.depth, &opts.scan)
}

/// Scans the ladder of the problem's `g` and runs every rung.
pub fn run_ladder(problem: &Problem, direction: Direction, opts: &LadderOptions) -> Result<LadderResult> {
    opts.check()?;
    let ladder = scan_ladder(problem, direction, opts)?;
    run_ladder_on(problem, problem.construction.lambda(), &ladder, opts)
}

pub fn run_origin_ladder(problem: &Problem, opts: &LadderOptions) -> Result<LadderResult> {
    expect_direction(problem, Direction::Origin)?;
    run_ladder(problem, Direction::Origin, opts)
}

pub fn run_infinity_ladder(problem: &Problem, opts: &LadderOptions) -> Result<LadderResult> {
    expect_direction(problem, Direction::Infinity)?;
    run_ladder(problem, Direction::Infinity, opts)
}

fn expect_direction(problem: &Problem, direction: Direction) -> Result<()> {
    match problem.direction() {
        Some(d) if d != direction => Err(Error::invalid(format!(
            "construction {:?} belongs to the {d:?} direction",
            problem.construction
        ))),
        _ => Ok(()),
    }
}

/// Runs every rung of a fixed ladder with `g` rebuilt at `lambda`.
///
/// Rungs are solved from the innermost box outward so each solution, scaled to
/// the next `δ`, seeds the following rung.
pub fn run_ladder_on(problem: &Problem, lambda: f64, ladder: &TruncationLadder, opts: &LadderOptions) -> Result<LadderResult> {
    opts.check()?;
    ladder.check_nesting()?;
    if ladder.is_empty() {
        return Err(Error::invalid("empty ladder"));
    }
    let g = problem.composite(lambda)?;
    let grid = *problem.grid();
    let radius = opts.bump_radius.unwrap_or(0.5 * grid.half_width());
    let k_count = ladder.len();
    let order: Vec<usize> = match ladder.direction {
        Direction::Origin => (0..k_count).rev().collect(),
        Direction::Infinity => (0..k_count).collect(),
    };

    let mut rungs: Vec<Option<RungRecord>> = vec![None; k_count];
    let mut bump_constant = 0.0;
    let mut neighbor: Option<(NodalVector, f64)> = None;
    for idx in order {
        let (delta, eta) = ladder.pairs[idx];
        let model = EnergyModel::new(Arc::clone(&problem.stiffness), g.truncate(eta)?)?;
        let family = BumpFamily::new(&model, radius, 0.0)?;
        bump_constant = problem.stiffness.seminorm_squared(family.unit());
        let (zeta, _) = family.best_height(&model, eta, opts.height_samples);
        let bump = family.unit().scaled(zeta);
        let certificate = model.energy(&bump);

        let mut starts = vec![
            ("zero".to_string(), grid.zeros()),
            ("bump".to_string(), bump),
            ("bump-delta".to_string(), family.unit().scaled(delta)),
        ];
        if let Some((u, d)) = &neighbor {
            starts.push(("neighbor".to_string(), u.clone()));
            starts.push(("neighbor-scaled".to_string(), u.scaled(delta / d)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.solver.rng_seed ^ (idx as u64 + 1));
        for j in 0..opts.solver.random_starts {
            let values: Vec<f64> = (0..grid.n_interior()).map(|_| rng.random_range(0.0..=eta)).collect();
            starts.push((format!("random-{j}"), NodalVector::from_slice(grid, &values)?));
        }

        let bounds = BoxConstraint::new(eta)?;
        let out = minimize_in_box(&model, &bounds, &starts, &opts.solver)?;
        let mut solution = out.best;
        solution.delta = Some(check_box_membership(&solution, delta, opts.box_tol * eta));
        let lowest_iterate = out.runs.iter().map(|r| r.lowest_visited).fold(f64::INFINITY, f64::min);
        let runs = out
            .runs
            .iter()
            .map(|r| RunSummary {
                label: r.label.clone(),
                energy: r.energy,
                converged: r.converged,
                iterations: r.iterations,
            })
            .collect();
        neighbor = Some((solution.u.clone(), delta));
        rungs[idx] = Some(RungRecord {
            k: idx + 1,
            delta,
            eta,
            certificate,
            bump_height: zeta,
            lower_bound: model.lower_bound(),
            lowest_iterate,
            runs,
            solution,
        });
    }
    let rungs: Vec<RungRecord> = rungs.into_iter().map(|r| r.expect("every rung solved")).collect();

    let min_eta = ladder.pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let records: Vec<SolutionRecord> = rungs.iter().map(|r| r.solution.clone()).collect();
    let distinct_count = distinctness(&records, opts.separation * min_eta).count;
    let verdicts = judge(ladder.direction, &rungs, distinct_count);
    let energies: Vec<f64> = rungs.iter().map(|r| r.solution.energy).collect();
    let theta = if verdicts.energy_order {
        separators(ladder.direction, &energies).ok()
    } else {
        None
    };
    Ok(LadderResult {
        direction: ladder.direction,
        s: problem.stiffness.order(),
        half_width: grid.half_width(),
        n_interior: grid.n_interior(),
        lambda,
        ladder: ladder.clone(),
        rungs,
        distinct_count,
        theta,
        bump_constant,
        verdicts,
    })
}

fn strictly<F: Fn(f64, f64) -> bool>(values: &[f64], ok: F) -> bool {
    values.windows(2).all(|w| ok(w[0], w[1]))
}

fn judge(direction: Direction, rungs: &[RungRecord], distinct_count: usize) -> Verdicts {
    let energies: Vec<f64> = rungs.iter().map(|r| r.solution.energy).collect();
    let linf: Vec<f64> = rungs.iter().map(|r| r.solution.linf).collect();
    let xnorm: Vec<f64> = rungs.iter().map(|r| r.solution.xnorm).collect();
    let (energy_order, linf_trend, xnorm_trend) = match direction {
        Direction::Origin => (
            strictly(&energies, |a, b| a < b),
            strictly(&linf, |a, b| a > b),
            strictly(&xnorm, |a, b| a > b),
        ),
        Direction::Infinity => (
            strictly(&energies, |a, b| a > b),
            strictly(&linf, |a, b| a < b),
            strictly(&xnorm, |a, b| a < b),
        ),
    };
    let exceeds_previous = match direction {
        Direction::Origin => true,
        Direction::Infinity => rungs.windows(2).all(|w| w[1].solution.linf > w[0].delta),
    };
    Verdicts {
        converged: rungs.iter().all(|r| r.solution.converged),
        negative: energies.iter().all(|&e| e < 0.0),
        certificate: rungs.iter().all(|r| r.solution.energy <= r.certificate),
        box_membership: rungs
            .iter()
            .all(|r| r.solution.delta.is_some_and(|m| m.inside) && r.solution.u.as_slice().iter().all(|&v| v >= 0.0)),
        energy_order,
        linf_trend,
        xnorm_trend,
        distinct: distinct_count == rungs.len(),
        lower_bound: rungs.iter().all(|r| r.lowest_iterate >= r.lower_bound - 1e-9),
        exceeds_previous,
    }
}

/// Separators `θ` interleaving the energies in rung order.
///
/// Origin: `θ_k < E_k < θ_{k+1} < 0`. Infinity: `θ_{k+1} < E_k < θ_k`.
/// Interior separators are midpoints; the outer ones sit half a neighboring gap
/// beyond the extreme energies. Returns `K + 1` values.
pub fn separators(direction: Direction, energies: &[f64]) -> Result<Vec<f64>> {
    let k = energies.len();
    if k == 0 {
        return Err(Error::InvalidState("no energies to separate".into()));
    }
    let ordered = match direction {
        Direction::Origin => strictly(energies, |a, b| a < b),
        Direction::Infinity => strictly(energies, |a, b| a > b),
    };
    if !ordered {
        return Err(Error::InvalidState(format!("energies are not strictly ordered: {energies:?}")));
    }
    if direction == Direction::Origin && energies[k - 1] >= 0.0 {
        return Err(Error::InvalidState("origin energies must be negative".into()));
    }
    let gap = |i: usize| 0.5 * (energies[i + 1] - energies[i]).abs();
    let (first, last) = if k == 1 {
        let g = 0.5 * energies[0].abs();
        (g, g)
    } else {
        (gap(0), gap(k - 2))
    };
    let sign = match direction {
        Direction::Origin => 1.0,
        Direction::Infinity => -1.0,
    };
    let mut theta = Vec::with_capacity(k + 1);
    theta.push(energies[0] - sign * first);
    for i in 0..k - 1 {
        theta.push(0.5 * (energies[i] + energies[i + 1]));
    }
    theta.push(energies[k - 1] + sign * last);
    Ok(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowEstimate {
    pub p: f64,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub rung_lambdas: Vec<f64>,
    /// Running minimum `λ̃_k`.
    pub lambda_tilde: Vec<f64>,
}

impl WindowEstimate {
    pub fn last(&self) -> f64 {
        *self.lambda_tilde.last().expect("non-empty window")
    }
}

/// `λ_k = min_{[δ_k, η_k]} (−g₀(t)) / t^p`, the largest `|λ|` for which adding
/// `±λ t^p` keeps `g ≤ 0` on the rung.
pub fn rung_lambdas(g0: &Composite, ladder: &TruncationLadder, p: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(2);
    ladder
        .pairs
        .iter()
        .map(|&(d, e)| {
            (0..=samples)
                .map(|i| {
                    let t = d + (e - d) * i as f64 / samples as f64;
                    -g0.eval(t) / t.powf(p)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `α_k`, `β_k` and `λ̃_k` from a λ = 0 ladder.
///
/// The certificate in `α_k` is the minimizer itself, which lies in the box and
/// has energy between the separators. Denominators are `‖u_k‖^p_{L^p}` for the
/// origin and `δ_k^{p+1}` at infinity. An empty `ladder_lambdas` leaves `λ_k`
/// out of the minimum.
pub fn estimate_lambda_window(result: &LadderResult, p: f64, ladder_lambdas: &[f64]) -> Result<WindowEstimate> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::invalid(format!("p must be positive, got {p}")));
    }
    let k = result.rungs.len();
    if !ladder_lambdas.is_empty() && ladder_lambdas.len() != k {
        return Err(Error::invalid(format!(
            "expected {k} rung lambdas, got {}",
            ladder_lambdas.len()
        )));
    }
    let energies = result.energies();
    let theta = separators(result.direction, &energies)?;
    let mut alpha = Vec::with_capacity(k);
    let mut beta = Vec::with_capacity(k);
    for (i, rung) in result.rungs.iter().enumerate() {
        let e = rung.solution.energy;
        let (den, upper, lower) = match result.direction {
            Direction::Origin => {
                let h = rung.solution.u.grid().spacing();
                let lp: f64 = rung.solution.u.as_slice().iter().map(|v| v.abs().powf(p)).sum::<f64>() * h;
                (lp, theta[i + 1], theta[i])
            }
            Direction::Infinity => (rung.delta.powf(p + 1.0), theta[i], theta[i + 1]),
        };
        if !(den > 0.0) {
            return Err(Error::InvalidState(format!("rung {} has a zero denominator", i + 1)));
        }
        alpha.push((p + 1.0) * (upper - e) / den);
        beta.push((p + 1.0) * (e - lower) / den);
    }
    let mut lambda_tilde = Vec::with_capacity(k);
    let mut running = f64::INFINITY;
    for i in 0..k {
        running = running.min(alpha[i]).min(beta[i]);
        if let Some(l) = ladder_lambdas.get(i) {
            running = running.min(*l);
        }
        lambda_tilde.push(running);
    }
    if lambda_tilde.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidState(format!("window estimate is not positive: {lambda_tilde:?}")));
    }
    Ok(WindowEstimate {
        p,
        theta,
        alpha,
        beta,
        rung_lambdas: ladder_lambdas.to_vec(),
        lambda_tilde,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub count: usize,
    pub ordered: bool,
    pub converged: bool,
    pub box_membership: bool,
    pub energies: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub direction: Direction,
    pub depth: usize,
    pub ladder: TruncationLadder,
    pub lambda_tilde: Option<f64>,
    pub rows: Vec<SweepRow>,
    /// Every row with `|λ| ≤ λ̃` has `count ≥ K` and ordered energies.
    pub window_holds: Option<bool>,
}

/// Reruns a fixed ladder at every `λ` (in parallel). Failures are recorded per
/// row and the sweep continues.
pub fn lambda_sweep(
    problem: &Problem,
    ladder: &TruncationLadder,
    lambdas: &[f64],
    lambda_tilde: Option<f64>,
    opts: &LadderOptions,
) -> SweepResult {
    let rows: Vec<SweepRow> = lambdas
        .par_iter()
        .map(|&lambda| match run_ladder_on(problem, lambda, ladder, opts) {
            Ok(r) => SweepRow {
                lambda,
                count: r.distinct_count,
                ordered: r.verdicts.energy_order,
                converged: r.verdicts.converged,
                box_membership: r.verdicts.box_membership,
                energies: r.energies(),
                error: None,
            },
            Err(e) => SweepRow {
                lambda,
                count: 0,
                ordered: false,
                converged: false,
                box_membership: false,
                energies: vec![],
                error: Some(e.to_string()),
            },
        })
        .collect();
    let depth = ladder.len();
    let window_holds = lambda_tilde.map(|lt| {
        rows.iter()
            .filter(|r| r.lambda.abs() <= lt * (1.0 + 1e-12))
            .all(|r| r.count >= depth && r.ordered)
    });
    SweepResult {
        direction: ladder.direction,
        depth,
        ladder: ladder.clone(),
        lambda_tilde,
        rows,
        window_holds,
    }
}

impl SweepResult {
    pub const HEADER: [&'static str; 8] = [
        "lambda",
        "distinct_count",
        "ordering_ok",
        "converged",
        "box_ok",
        "in_window",
        "energies",
        "error",
    ];

    pub fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let in_window = self
                    .lambda_tilde
                    .map_or(String::new(), |lt| (r.lambda.abs() <= lt * (1.0 + 1e-12)).to_string());
                vec![
                    fmt_f64(r.lambda),
                    r.count.to_string(),
                    r.ordered.to_string(),
                    r.converged.to_string(),
                    r.box_membership.to_string(),
                    in_window,
                    r.energies.iter().map(|e| fmt_f64(*e)).collect::<Vec<_>>().join(";"),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormClaims {
    pub direction: Direction,
    /// Smallest re-indexing shift for which every claim holds.
    pub shift: Option<usize>,
    pub holds: bool,
    /// Rungs left after the shift.
    pub witnessed: usize,
}

/// Origin: `‖u_i‖_X < 1/i` and `‖u_i‖_∞ < 1/i`. Infinity: `‖u_i‖_∞ > i − 1`.
/// Rung `i` of the claim is rung `i + shift` of the ladder.
pub fn verify_norm_claims(result: &LadderResult) -> NormClaims {
    let k = result.rungs.len();
    let holds_at = |shift: usize| {
        (1..=k - shift).all(|i| {
            let r = &result.rungs[i - 1 + shift].solution;
            let i = i as f64;
            match result.direction {
                Direction::Origin => r.xnorm < 1.0 / i && r.linf < 1.0 / i,
                Direction::Infinity => r.linf > i - 1.0,
            }
        })
    };
    let shift = (0..k).find(|&s| holds_at(s));
    NormClaims {
        direction: result.direction,
        shift,
        holds: shift.is_some(),
        witnessed: shift.map_or(0, |s| k - s),
    }
}
