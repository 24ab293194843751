//! Property suite behind the `verify` command: every module invariant checked
//! on the configured instance plus a few fixed reference problems.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::energy::{bump_energy_constant, gradient_check, BumpSpec, EnergyModel};
use crate::error::Result;
use crate::grid::{Grid, NodalVector};
use crate::ladder::{estimate_lambda_window, run_ladder, scan_ladder, Problem};
use crate::nonlinearity::{Composite, Construction, NonlinearitySpec};
use crate::operator::{
    assemble_mass, assemble_stiffness, check_sign_inequality, oracle_gagliardo_extrapolated, oracle_test_vectors,
    MassKind, StiffnessForm,
};
use crate::solver::{exhaustive_box_search, minimize_in_box, BoxConstraint, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub properties: Vec<PropertyOutcome>,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&PropertyOutcome> {
        self.properties.iter().filter(|p| !p.passed).collect()
    }
}

struct Suite(Vec<PropertyOutcome>);

impl Suite {
    fn record(&mut self, module: &str, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(PropertyOutcome {
            module: module.into(),
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    /// Records a property whose evaluation may itself fail.
    fn attempt(&mut self, module: &str, name: &str, f: impl FnOnce() -> Result<(bool, String)>) {
        match f() {
            Ok((ok, detail)) => self.record(module, name, ok, detail),
            Err(e) => self.record(module, name, false, e.to_string()),
        }
    }
}

/// Nonlinearities and truncation levels used for gradient checks.
pub fn gradient_configurations() -> Vec<(&'static str, NonlinearitySpec, Construction, f64)> {
    vec![
        (
            "origin-oscillatory",
            NonlinearitySpec::Origin {
                alpha: 0.5,
                beta: 1.0,
                a: 0.5,
            },
            Construction::OriginPower {
                lambda: 0.0,
                p: 0.5,
                lambda0: 0.1,
            },
            0.05,
        ),
        (
            "infinity-oscillatory",
            NonlinearitySpec::Infinity {
                alpha: 2.0,
                beta: 1.5,
                a: 0.5,
            },
            Construction::InfinityPower {
                lambda: 0.0,
                p: 0.5,
                lambda_inf: 0.1,
            },
            5.0,
        ),
        (
            "table",
            NonlinearitySpec::Table {
                points: vec![[0.0, 0.0], [0.5, 1.0], [1.0, -1.0], [2.0, 0.5]],
            },
            Construction::OriginPower {
                lambda: 0.3,
                p: 0.5,
                lambda0: 0.1,
            },
            1.5,
        ),
    ]
}

/// Step of the central differences in [`gradient_configurations`] checks.
pub const GRADIENT_EPS: f64 = 1e-6;

/// The three-node reference problem: `s = 0.4`, `L = 1`, `μ = 0.2`,
/// `g(t) = −t` truncated at `η = 1`.
pub fn toy_model() -> Result<(EnergyModel, BoxConstraint)> {
    let grid = Grid::new(1.0, 3)?;
    let a = Arc::new(assemble_stiffness(&grid, 0.4, &Default::default())?);
    let spec = NonlinearitySpec::Table {
        points: vec![[0.0, 0.0], [1.0, -1.0]],
    };
    let g = Arc::new(Composite::compose(
        &spec,
        &Construction::Perturbed {
            mu_lin: 1e-300,
            epsilon: 0.0,
            second: spec.clone(),
        },
        1.0,
    )?);
    let model = EnergyModel::with_mu(a, g.truncate(1.0)?, 0.2)?;
    Ok((model, BoxConstraint::new(1.0)?))
}

/// Largest per-node gap between the multistart minimizer and the exhaustive
/// grid search at `step`.
pub fn toy_oracle_gap(model: &EnergyModel, bounds: &BoxConstraint, step: f64, opts: &SolverOptions) -> Result<f64> {
    let grid = *model.grid();
    let eta = bounds.upper();
    let mut starts = vec![
        ("zero".to_string(), grid.zeros()),
        ("middle".to_string(), NodalVector::from_slice(grid, &[0.5 * eta; 3])?),
        ("top".to_string(), NodalVector::from_slice(grid, &[eta; 3])?),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    for j in 0..opts.random_starts {
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..=eta)).collect();
        starts.push((format!("random-{j}"), NodalVector::from_slice(grid, &v)?));
    }
    let best = minimize_in_box(model, bounds, &starts, opts)?.best;
    let (oracle, _) = exhaustive_box_search(model, bounds, step)?;
    Ok(best.u.linf_distance(&oracle))
}

fn grid_properties(suite: &mut Suite, grid: &Grid) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = NodalVector::new(
        *grid,
        DVector::from_fn(grid.n_interior(), |_, _| rng.random_range(-1.0..1.0)),
    );
    let homogeneous = match u {
        Ok(u) => [-2.5, 0.0, 3.0]
            .iter()
            .all(|&c| (u.scaled(c).linf_norm() - c.abs() * u.linf_norm()).abs() <= 1e-15 * u.linf_norm().max(1.0)),
        Err(_) => false,
    };
    suite.record("grid", "linf homogeneity", homogeneous, "c ∈ {-2.5, 0, 3}");
    let f = |x: f64| 1.0 - (x - 0.1).powi(2);
    let ok = grid.interpolate(f).is_ok_and(|v| {
        let expect = grid.nodes().into_iter().map(|x| f(x).abs()).fold(0.0, f64::max);
        v.linf_norm() == expect
    });
    suite.record("grid", "interpolated maximum", ok, "");
}

fn operator_properties(suite: &mut Suite, a: &StiffnessForm, seed: u64) {
    let grid = *a.grid();
    let asym = a.max_asymmetry();
    suite.record("operator", "stiffness symmetric", asym == 0.0, format!("max |A - Aᵀ| = {asym:e}"));
    for kind in [MassKind::Consistent, MassKind::Lumped] {
        let m = assemble_mass(&grid, kind);
        let sym = (m.matrix() - m.matrix().transpose()).amax() == 0.0;
        let lmin = m.matrix().clone().symmetric_eigenvalues().min();
        suite.record(
            "operator",
            &format!("{kind:?} mass symmetric and positive"),
            sym && lmin > 0.0,
            format!("λ_min = {lmin:e}"),
        );
    }
    let lmin = a.smallest_eigenvalue();
    let norm = a.matrix().amax();
    suite.record(
        "operator",
        "stiffness positive definite",
        lmin > 1e-12 * norm,
        format!("λ_min = {lmin:e}, max |A_ij| = {norm:e}"),
    );

    suite.attempt("operator", "oracle equivalence", || {
        let mut worst: f64 = 0.0;
        for n in [33, 65] {
            let g = Grid::new(1.0, n)?;
            for s in [0.25, 0.4, 0.75] {
                let form = assemble_stiffness(&g, s, a.quadrature())?;
                for (_, u) in oracle_test_vectors(&g, seed) {
                    let o = oracle_gagliardo_extrapolated(&g, &u, s, 16);
                    worst = worst.max(((form.seminorm_squared(&u) - o) / o).abs());
                }
            }
        }
        Ok((worst <= 0.01, format!("worst relative gap {worst:e}")))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for j in 0..20 {
        let v = DVector::from_fn(grid.n_interior(), |_, _| rng.random_range(-1.0..1.0));
        let u = NodalVector::from_parts_unchecked(grid, v);
        violations += check_sign_inequality(&u, 10_000, seed + j).violations;
    }
    let small = Grid::new(1.0, 17).expect("valid grid");
    for j in 0..20 {
        let v = DVector::from_fn(17, |_, _| rng.random_range(-1.0..1.0));
        violations += check_sign_inequality(&NodalVector::from_parts_unchecked(small, v), 0, j).violations;
    }
    suite.record(
        "operator",
        "pointwise sign inequality",
        violations == 0,
        format!("{violations} violations over 20 sampled and 20 exhaustive vectors"),
    );
}

fn nonlinearity_properties(suite: &mut Suite, cfg: &RunConfig, problem: &Problem) {
    let lambda = problem.construction().lambda();
    suite.attempt("nonlinearity", "zero extension", || {
        let g = problem.composite(lambda)?;
        let eta = 0.5 * g.t_max();
        let gk = g.truncate(eta)?;
        let ok = [0.0, -1e-300, -1e-3, -1.0, -1e3].iter().all(|&t| {
            problem.spec().eval_f(t) == 0.0 && g.eval(t) == 0.0 && gk.eval(t) == 0.0 && gk.primitive(t) == 0.0
        });
        Ok((ok, String::new()))
    });
    suite.attempt("nonlinearity", "truncation idempotence", || {
        let g = problem.composite(lambda)?;
        let eta = 0.5 * g.t_max();
        let once = g.truncate(eta)?;
        let twice = once.truncate(1.5 * eta)?;
        let ok = (0..=2000).all(|i| {
            let t = 3.0 * eta * i as f64 / 2000.0;
            once.eval(t) == twice.eval(t) && once.primitive(t) == twice.primitive(t)
        });
        Ok((ok, String::new()))
    });
    suite.attempt("nonlinearity", "antiderivative consistency", || {
        let g = problem.composite(lambda)?;
        let table = g.antiderivative();
        let spec = problem.spec();
        let (lo, hi) = (cfg.ladder_options()?.scan.range.0, g.t_max());
        let mut worst: f64 = 0.0;
        for i in 0..=40 {
            let t = lo * (hi / lo).powf(i as f64 / 40.0) * (1.0 - 1e-3);
            let h = local_step(spec, t);
            let d = (table.eval(t + h)? - table.eval(t - h)?) / (2.0 * h);
            worst = worst.max((d - spec.eval_f(t)).abs() / envelope(spec, t));
        }
        Ok((worst <= 1e-6, format!("worst gap {worst:e} relative to the local amplitude")))
    });
    suite.attempt("nonlinearity", "ladder nesting and negativity", || {
        let opts = cfg.ladder_options()?;
        let ladder = scan_ladder(problem, cfg.direction()?, &opts)?;
        ladder.check_nesting()?;
        let g = problem.composite(lambda)?;
        let mut worst = f64::NEG_INFINITY;
        for &(d, e) in &ladder.pairs {
            for i in 1..=1000 {
                let t = d + (e - d) * i as f64 / 1001.0;
                worst = worst.max(g.eval(t));
            }
        }
        Ok((worst <= 0.0, format!("{} rungs, max g on rungs = {worst:e}", ladder.len())))
    });
}

/// Local amplitude of `f`, the scale its errors are measured against.
fn envelope(spec: &NonlinearitySpec, t: f64) -> f64 {
    match spec {
        NonlinearitySpec::Origin { alpha, a, .. } | NonlinearitySpec::Infinity { alpha, a, .. } => {
            t.powf(*alpha) * (1.0 + a)
        }
        NonlinearitySpec::Table { points } => points.iter().map(|p| p[1].abs()).fold(f64::MIN_POSITIVE, f64::max),
    }
}

/// Central-difference step resolving the local oscillation of `f`.
fn local_step(spec: &NonlinearitySpec, t: f64) -> f64 {
    match *spec {
        NonlinearitySpec::Origin { beta, .. } => 1e-4 * 2.0 * std::f64::consts::PI * t.powf(beta + 1.0) / beta,
        NonlinearitySpec::Infinity { beta, .. } => {
            1e-4 * (2.0 * std::f64::consts::PI * t.powf(1.0 - beta) / beta).min(t)
        }
        NonlinearitySpec::Table { .. } => 1e-6 * t,
    }
}

fn energy_properties(suite: &mut Suite, a: &Arc<StiffnessForm>, problem: &Problem, cfg: &RunConfig, seed: u64) {
    let grid = *a.grid();
    suite.attempt("energy", "gradient against central differences", || {
        let mut worst: f64 = 0.0;
        for (_, spec, cons, eta) in gradient_configurations() {
            let g = Arc::new(Composite::compose(&spec, &cons, eta)?);
            let m = EnergyModel::new(Arc::clone(a), g.truncate(eta)?)?;
            worst = worst.max(gradient_check(&m, 100, GRADIENT_EPS, seed));
        }
        Ok((worst <= 1e-6, format!("worst relative gap {worst:e}")))
    });
    let model = || -> Result<EnergyModel> {
        let opts = cfg.ladder_options()?;
        let ladder = scan_ladder(problem, cfg.direction()?, &opts)?;
        let g = problem.composite(problem.construction().lambda())?;
        EnergyModel::new(Arc::clone(a), g.truncate(ladder.max_eta())?)
    };
    suite.attempt("energy", "energy of zero", || {
        let m = model()?;
        let e = m.energy(&grid.zeros());
        Ok((e == 0.0, format!("E(0) = {e:e}")))
    });
    suite.attempt("energy", "coercivity along a ray", || {
        let m = model()?;
        let dir = grid.interpolate(|x| (1.0 - (x / grid.half_width()).powi(2)).max(0.0))?;
        let base = 1e3 * m.eta().max(1.0);
        let values: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|c| m.energy(&dir.scaled(c * base))).collect();
        let ok = values[0] > 0.0 && values.windows(2).all(|w| w[1] > w[0]);
        Ok((ok, format!("{values:?}")))
    });
    suite.attempt("energy", "lower bound containment", || {
        let m = model()?;
        let lb = m.lower_bound();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lowest = f64::INFINITY;
        for _ in 0..200 {
            let u = DVector::from_fn(grid.n_interior(), |_, _| rng.random_range(0.0..=m.eta()));
            lowest = lowest.min(m.energy_values(&u));
        }
        Ok((lowest >= lb, format!("lowest sampled {lowest:e}, bound {lb:e}")))
    });
    suite.attempt("energy", "bump homogeneity", || {
        let radius = BumpSpec::centered(&grid, 1.0).radius;
        let c = bump_energy_constant(a, radius)?;
        let mut worst: f64 = 0.0;
        for zeta in [0.1, 0.01, 0.001] {
            let z = crate::energy::build_bump(&grid, &BumpSpec::centered(&grid, zeta))?;
            worst = worst.max((a.seminorm_squared(&z) / (zeta * zeta) - c).abs() / c);
        }
        Ok((worst <= 1e-12, format!("worst relative spread {worst:e}")))
    });
}

fn solver_properties(suite: &mut Suite, cfg: &RunConfig) {
    suite.attempt("solver", "toy problem matches exhaustive search", || {
        let (model, bounds) = toy_model()?;
        let gap = toy_oracle_gap(&model, &bounds, 1e-3, &cfg.solver)?;
        Ok((gap <= 2e-3, format!("max per-node gap {gap:e}")))
    });
}

fn ladder_properties(suite: &mut Suite, cfg: &RunConfig, problem: &Problem) {
    let outcome = (|| {
        let opts = cfg.ladder_options()?;
        let direction = cfg.direction()?;
        let first = run_ladder(problem, direction, &opts)?;
        let second = run_ladder(problem, direction, &opts)?;
        Ok::<_, crate::Error>((first, second))
    })();
    let (first, second) = match outcome {
        Ok(v) => v,
        Err(e) => {
            suite.record("ladder", "pipeline", false, e.to_string());
            return;
        }
    };
    let v = first.verdicts;
    let same = match (first.summary_csv(), second.summary_csv()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    suite.record("ladder", "determinism", same, "two runs, identical summary bytes");
    suite.record("ladder", "solver feasibility", first.rungs.iter().all(|r| r.solution.feasible), "");
    suite.record(
        "ladder",
        "descent from every start",
        first
            .rungs
            .iter()
            .all(|r| r.solution.energy <= r.solution.start_energy && r.runs.iter().all(|q| q.energy <= r.solution.start_energy.max(q.energy))),
        "",
    );
    suite.record("ladder", "energy ordering", v.energy_order, format!("{:?}", first.energies()));
    suite.record("ladder", "box membership", v.box_membership, "");
    suite.record("ladder", "certificate", v.certificate, "");
    suite.record("ladder", "linf trend", v.linf_trend, "");
    suite.record("ladder", "lower bound containment", v.lower_bound, "");
    if first.direction == crate::nonlinearity::Direction::Origin {
        suite.record("ladder", "negative energies", v.negative, "");
    }
    let p = problem.construction().power();
    match estimate_lambda_window(&first, p, &[]) {
        Ok(w) => suite.record("ladder", "window positivity", w.last() > 0.0, format!("λ̃ = {:e}", w.last())),
        Err(e) => suite.record("ladder", "window positivity", !v.energy_order, e.to_string()),
    }
}

fn config_properties(suite: &mut Suite, cfg: &RunConfig) {
    suite.attempt("cli", "config round trip", || {
        let again = RunConfig::parse(&cfg.to_toml()?)?;
        let mut left = cfg.clone();
        left.base_dir = None;
        Ok((left == again, String::new()))
    });
}

/// Runs the whole suite. `stiffness` replaces the assembled matrix of the
/// configured instance, which lets tests inject faults.
pub fn run_verify(cfg: &RunConfig, stiffness: Option<StiffnessForm>) -> Result<VerifyReport> {
    let grid = cfg.grid()?;
    let a = Arc::new(match stiffness {
        Some(a) => a,
        None => assemble_stiffness(&grid, cfg.operator.s, &cfg.operator.quadrature)?,
    });
    let opts = cfg.ladder_options()?;
    let problem = Problem::new(Arc::clone(&a), &cfg.spec()?, cfg.construction.clone(), opts.scan.range.1)?;
    let seed = cfg.solver.rng_seed;

    let mut suite = Suite(Vec::new());
    grid_properties(&mut suite, &grid);
    operator_properties(&mut suite, &a, seed);
    nonlinearity_properties(&mut suite, cfg, &problem);
    energy_properties(&mut suite, &a, &problem, cfg, seed);
    solver_properties(&mut suite, cfg);
    ladder_properties(&mut suite, cfg, &problem);
    config_properties(&mut suite, cfg);
    let passed = suite.0.iter().all(|p| p.passed);
    Ok(VerifyReport {
        passed,
        properties: suite.0,
    })
}
