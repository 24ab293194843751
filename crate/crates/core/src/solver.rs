//! Box-constrained minimization of the truncated energy over
//! `{u : 0 ≤ uᵢ ≤ η}` by spectral projected gradients.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::NodalVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxConstraint {
    upper: f64,
}

impl BoxConstraint {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid(format!("box bound must be positive, got {eta}")));
        }
        Ok(Self { upper: eta })
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    fn clamp_values(&self, u: &mut DVector<f64>) {
        for v in u.iter_mut() {
            *v = v.clamp(0.0, self.upper);
        }
    }
}

pub fn project(u: &NodalVector, bounds: &BoxConstraint) -> NodalVector {
    let mut v = u.values().clone();
    bounds.clamp_values(&mut v);
    NodalVector::from_parts_unchecked(*u.grid(), v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Convergence tolerance on the projected gradient, scaled by `√n`.
    pub tol: f64,
    pub max_iter: usize,
    pub random_starts: usize,
    pub rng_seed: u64,
    /// Memory of the non-monotone line search.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub gamma: f64,
    /// Rounds of coordinate well hopping after projected-gradient convergence.
    pub polish_rounds: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50_000,
            random_starts: 4,
            rng_seed: 20240917,
            memory: 10,
            gamma: 1e-4,
            polish_rounds: 20,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid(format!("solver tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 || self.memory == 0 {
            return Err(Error::invalid("max_iter and memory must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxMembership {
    pub inside: bool,
    /// `δ − max uᵢ`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionRecord {
    #[serde(skip)]
    pub u: NodalVector,
    pub label: String,
    pub energy: f64,
    pub start_energy: f64,
    /// Lowest energy over all accepted iterates of this run.
    pub lowest_visited: f64,
    pub pg_norm: f64,
    pub residual: f64,
    pub linf: f64,
    pub xnorm: f64,
    pub eta: f64,
    pub delta: Option<BoxMembership>,
    pub iterations: usize,
    pub converged: bool,
    /// Every accepted iterate stayed inside the box.
    pub feasible: bool,
}

/// Gradient at free nodes plus sign violations at active bounds.
pub fn residual_values(u: &DVector<f64>, grad: &DVector<f64>, eta: f64) -> f64 {
    u.iter()
        .zip(grad.iter())
        .map(|(&ui, &gi)| {
            let r = if ui <= 0.0 {
                gi.min(0.0)
            } else if ui >= eta {
                gi.max(0.0)
            } else {
                gi
            };
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

pub fn residual_norm(model: &EnergyModel, record: &SolutionRecord) -> f64 {
    residual_values(record.u.values(), &model.gradient_values(record.u.values()), record.eta)
}

fn projected_gradient_norm(u: &DVector<f64>, grad: &DVector<f64>, bounds: &BoxConstraint) -> f64 {
    let mut trial = u - grad;
    bounds.clamp_values(&mut trial);
    (u - trial).norm()
}

const STEP_MIN: f64 = 1e-30;
const STEP_MAX: f64 = 1e30;

struct Run {
    u: DVector<f64>,
    energy: f64,
    lowest: f64,
    pg: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    feasible: bool,
}

/// One projected-gradient run from a single start, followed by rounds of
/// coordinate well hopping and restarts while they lower the energy.
pub fn minimize_from(
    model: &EnergyModel,
    bounds: &BoxConstraint,
    label: &str,
    start: &NodalVector,
    opts: &SolverOptions,
) -> SolutionRecord {
    let mut u0 = start.values().clone();
    bounds.clamp_values(&mut u0);
    let start_energy = model.energy_values(&u0);
    let mut run = spg(model, bounds, u0, opts.max_iter, opts);
    let mut lowest = run.lowest;
    let mut iterations = run.iterations;
    let mut feasible = run.feasible;
    for _ in 0..opts.polish_rounds {
        if !run.converged || iterations >= opts.max_iter {
            break;
        }
        let Some(hopped) = hop_wells(model, bounds, &run.u, run.energy) else {
            break;
        };
        let next = spg(model, bounds, hopped, opts.max_iter - iterations, opts);
        iterations += next.iterations;
        lowest = lowest.min(next.lowest);
        feasible &= next.feasible;
        if next.energy < run.energy {
            run = next;
        } else {
            break;
        }
    }
    let u = NodalVector::from_parts_unchecked(*start.grid(), run.u);
    SolutionRecord {
        label: label.to_string(),
        energy: run.energy,
        start_energy,
        lowest_visited: lowest,
        pg_norm: run.pg,
        residual: run.residual,
        linf: u.linf_norm(),
        xnorm: model.stiffness().seminorm(&u),
        eta: bounds.upper(),
        delta: None,
        iterations,
        converged: run.converged,
        feasible,
        u,
    }
}

/// Candidate values per node in one hopping sweep.
const HOP_SAMPLES: usize = 64;
/// Half-width of the hopping window as a fraction of the box.
const HOP_WINDOW: f64 = 0.05;

/// Moves single nodes to the lowest sampled value of the one-dimensional
/// energy slice, which escapes wells of an oscillating `G` that gradient steps
/// cannot leave. Returns the new point if the energy decreased.
fn hop_wells(model: &EnergyModel, bounds: &BoxConstraint, u: &DVector<f64>, energy: f64) -> Option<DVector<f64>> {
    let a = model.stiffness().matrix();
    let m = model.mass().matrix();
    let mu = model.mu();
    let h = model.grid().spacing();
    let g = model.nonlinearity();
    let eta = bounds.upper();
    let mut u = u.clone();
    let mut smooth = a * &u + mu * (m * &u);
    let mut improved = 0.0;
    for i in 0..u.len() {
        let kii = a[(i, i)] + mu * m[(i, i)];
        let ui = u[i];
        let gi = g.primitive(ui);
        let lo = (ui - HOP_WINDOW * eta).max(0.0);
        let hi = (ui + HOP_WINDOW * eta).min(eta);
        let mut best = (0.0, 0.0);
        for j in 0..=HOP_SAMPLES {
            let v = lo + (hi - lo) * j as f64 / HOP_SAMPLES as f64;
            let d = v - ui;
            let de = 0.5 * kii * d * d + d * smooth[i] - h * (g.primitive(v) - gi);
            if de < best.1 {
                best = (d, de);
            }
        }
        if best.1 < 0.0 {
            let d = best.0;
            u[i] += d;
            for r in 0..u.len() {
                smooth[r] += d * (a[(r, i)] + mu * m[(r, i)]);
            }
            improved += best.1;
        }
    }
    let e_new = model.energy_values(&u);
    (improved < 0.0 && e_new < energy).then_some(u)
}

fn spg(model: &EnergyModel, bounds: &BoxConstraint, mut u: DVector<f64>, max_iter: usize, opts: &SolverOptions) -> Run {
    let n = u.len();
    let threshold = opts.tol * (n as f64).sqrt();
    let (mut e, mut grad) = model.energy_and_gradient(&u);
    let mut lowest = e;
    let mut history = std::collections::VecDeque::with_capacity(opts.memory);
    history.push_back(e);

    let mut step = {
        let pg = projected_gradient_norm(&u, &grad, bounds);
        let inf = grad.amax();
        if inf > 0.0 && pg > 0.0 {
            (1.0 / inf).clamp(STEP_MIN, STEP_MAX)
        } else {
            1.0
        }
    };
    let mut iterations = 0;
    let mut converged = false;
    let mut feasible = u.iter().all(|&v| (0.0..=bounds.upper()).contains(&v));
    let mut pg = projected_gradient_norm(&u, &grad, bounds);
    let mut residual = residual_values(&u, &grad, bounds.upper());

    while iterations < max_iter {
        if pg <= threshold && residual <= threshold {
            converged = true;
            break;
        }
        iterations += 1;
        let mut trial = &u - step * &grad;
        bounds.clamp_values(&mut trial);
        let d = trial - &u;
        let slope = grad.dot(&d);
        if slope >= 0.0 {
            // The projected step does not descend: only rounding is left.
            break;
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &u + lam * &d;
            let (ec, gc) = model.energy_and_gradient(&cand);
            if ec <= reference + opts.gamma * lam * slope {
                accepted = Some((cand, ec, gc));
                break;
            }
            // Safeguarded quadratic interpolation.
            let denom = 2.0 * (ec - e - lam * slope);
            let next = if denom > 0.0 { -slope * lam * lam / denom } else { 0.5 * lam };
            lam = next.clamp(0.1 * lam, 0.5 * lam);
        }
        let Some((un, en, gn)) = accepted else {
            break;
        };
        let s = &un - &u;
        let y = &gn - &grad;
        let sty = s.dot(&y);
        step = if sty > 0.0 {
            (s.dot(&s) / sty).clamp(STEP_MIN, STEP_MAX)
        } else {
            STEP_MAX.min(1e3 * step)
        };
        feasible &= un.iter().all(|&v| (0.0..=bounds.upper()).contains(&v));
        u = un;
        e = en;
        grad = gn;
        lowest = lowest.min(e);
        if history.len() == opts.memory {
            history.pop_front();
        }
        history.push_back(e);
        pg = projected_gradient_norm(&u, &grad, bounds);
        residual = residual_values(&u, &grad, bounds.upper());
    }
    if !converged && pg <= threshold && residual <= threshold {
        converged = true;
    }
    Run {
        u,
        energy: e,
        lowest,
        pg,
        residual,
        iterations,
        converged,
        feasible,
    }
}

/// Outcome of a multistart run: the selected record and every per-start record
/// in start order.
#[derive(Debug, Clone)]
pub struct Multistart {
    pub best: SolutionRecord,
    pub runs: Vec<SolutionRecord>,
}

/// Energies closer than this are treated as ties.
const ENERGY_TIE: f64 = 1e-12;

fn better(a: &SolutionRecord, b: &SolutionRecord) -> bool {
    if (a.energy - b.energy).abs() > ENERGY_TIE {
        return a.energy < b.energy;
    }
    if a.linf != b.linf {
        return a.linf < b.linf;
    }
    a.label < b.label
}

/// Runs every labelled start (in parallel) and returns the lowest-energy
/// converged record, ties broken by `L∞` norm and then by label.
pub fn minimize_in_box(
    model: &EnergyModel,
    bounds: &BoxConstraint,
    starts: &[(String, NodalVector)],
    opts: &SolverOptions,
) -> Result<Multistart> {
    opts.check()?;
    if starts.is_empty() {
        return Err(Error::invalid("minimize_in_box needs at least one start"));
    }
    for (label, s) in starts {
        model.grid().check_len(s.len()).map_err(|_| {
            Error::invalid(format!("start '{label}' does not live on the model grid"))
        })?;
    }
    let runs: Vec<SolutionRecord> = starts
        .par_iter()
        .map(|(label, s)| minimize_from(model, bounds, label, s, opts))
        .collect();
    let pick = |converged_only: bool| {
        runs.iter()
            .filter(|r| r.converged || !converged_only)
            .fold(None::<&SolutionRecord>, |acc, r| match acc {
                Some(b) if !better(r, b) => Some(b),
                _ => Some(r),
            })
            .cloned()
    };
    match pick(true) {
        Some(best) => Ok(Multistart { best, runs }),
        None => Err(Error::NonConvergence {
            max_iter: opts.max_iter,
            best: Box::new(pick(false).expect("at least one run")),
        }),
    }
}

pub fn check_box_membership(record: &SolutionRecord, delta: f64, tol: f64) -> BoxMembership {
    let max = record.u.max().max(0.0);
    BoxMembership {
        inside: max <= delta + tol,
        margin: delta - max,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distinctness {
    /// Group index of every input record.
    pub groups: Vec<usize>,
    /// Index of the lowest-energy record of each group.
    pub representatives: Vec<usize>,
    pub count: usize,
}

/// Groups records connected by pairwise `L∞` distance below `sep`.
pub fn distinctness(records: &[SolutionRecord], sep: f64) -> Distinctness {
    let n = records.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if records[i].u.linf_distance(&records[j].u) < sep {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut groups = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        let g = match roots.iter().position(|&x| x == r) {
            Some(g) => g,
            None => {
                roots.push(r);
                roots.len() - 1
            }
        };
        groups[i] = g;
    }
    let representatives = (0..roots.len())
        .map(|g| {
            (0..n)
                .filter(|&i| groups[i] == g)
                .min_by(|&a, &b| records[a].energy.total_cmp(&records[b].energy))
                .expect("non-empty group")
        })
        .collect();
    Distinctness {
        groups,
        representatives,
        count: roots.len(),
    }
}

/// Exhaustive search over the grid `{0, step, 2·step, …} ∩ [0, η]` in every
/// coordinate, for three-node models only. Returns the best grid point and its
/// energy.
pub fn exhaustive_box_search(model: &EnergyModel, bounds: &BoxConstraint, step: f64) -> Result<(NodalVector, f64)> {
    let grid = *model.grid();
    if grid.n_interior() != 3 {
        return Err(Error::invalid("exhaustive search needs exactly three nodes"));
    }
    if !(step > 0.0 && step <= bounds.upper()) {
        return Err(Error::invalid(format!("search step must lie in (0, η], got {step}")));
    }
    let count = (bounds.upper() / step * (1.0 + 1e-12)).floor() as usize + 1;
    let t: Vec<f64> = (0..count).map(|i| (i as f64 * step).min(bounds.upper())).collect();
    let h = grid.spacing();
    let k = model.stiffness().matrix() + model.mu() * model.mass().matrix();
    // E = ½ uᵀKu − h Σ G(uᵢ); the inner coordinate only needs a linear term.
    let diag: Vec<Vec<f64>> = (0..3)
        .map(|r| t.iter().map(|&v| 0.5 * k[(r, r)] * v * v - h * model.nonlinearity().primitive(v)).collect())
        .collect();
    let (e, idx) = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, [0usize; 3]);
            for j in 0..count {
                let base = diag[0][i] + diag[1][j] + k[(0, 1)] * t[i] * t[j];
                let slope = k[(0, 2)] * t[i] + k[(1, 2)] * t[j];
                for (l, (&tl, &dl)) in t.iter().zip(&diag[2]).enumerate() {
                    let e = base + slope * tl + dl;
                    if e < best.0 {
                        best = (e, [i, j, l]);
                    }
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, [0; 3]), |a, b| if b.0 < a.0 { b } else { a });
    let u = NodalVector::from_slice(grid, &idx.map(|i| t[i]))?;
    Ok((u, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::nonlinearity::Composite;
    use crate::operator::{assemble_stiffness, QuadratureConfig};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn quadratic_model(mu: f64) -> EnergyModel {
        let g = Grid::new(1.0, 9).unwrap();
        let a = Arc::new(assemble_stiffness(&g, 0.4, &QuadratureConfig::default()).unwrap());
        let zero = Arc::new(Composite::zero(4.0).unwrap()).truncate(2.0).unwrap();
        EnergyModel::with_mu(a, zero, mu).unwrap()
    }

    fn record(u: &[f64], energy: f64, label: &str) -> SolutionRecord {
        let g = Grid::new(1.0, u.len()).unwrap();
        let u = NodalVector::from_slice(g, u).unwrap();
        SolutionRecord {
            label: label.into(),
            energy,
            start_energy: energy,
            lowest_visited: energy,
            pg_norm: 0.0,
            residual: 0.0,
            linf: u.linf_norm(),
            xnorm: 0.0,
            eta: 1.0,
            delta: None,
            iterations: 0,
            converged: true,
            feasible: true,
            u,
        }
    }

    #[test]
    fn projection_examples() {
        let g = Grid::new(1.0, 3).unwrap();
        let b = BoxConstraint::new(2.0).unwrap();
        let u = NodalVector::from_slice(g, &[-1.0, 0.5, 3.0]).unwrap();
        let p = project(&u, &b);
        assert_eq!(p.as_slice(), &[0.0, 0.5, 2.0]);
        assert_eq!(project(&p, &b), p);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(v in proptest::collection::vec(-5.0f64..5.0, 3..12), eta in 0.1f64..4.0) {
            let g = Grid::new(1.0, v.len()).unwrap();
            let u = NodalVector::from_slice(g, &v).unwrap();
            let b = BoxConstraint::new(eta).unwrap();
            let p = project(&u, &b);
            prop_assert_eq!(project(&p, &b), p.clone());
            prop_assert!(p.as_slice().iter().all(|&x| (0.0..=eta).contains(&x)));
        }
    }

    #[test]
    fn quadratic_problem_goes_to_zero() {
        let m = quadratic_model(1.0);
        let b = BoxConstraint::new(1.0).unwrap();
        let start = m.grid().interpolate(|x| 0.8 * (1.0 - x.abs())).unwrap();
        let out = minimize_in_box(&m, &b, &[("s".into(), start)], &SolverOptions::default()).unwrap();
        assert!(out.best.converged);
        assert!(out.best.linf < 1e-8);
        assert!(out.best.energy.abs() < 1e-14);
        assert!(out.best.energy <= out.best.start_energy);
    }

    #[test]
    fn empty_start_list_is_rejected() {
        let m = quadratic_model(1.0);
        let b = BoxConstraint::new(1.0).unwrap();
        assert!(minimize_in_box(&m, &b, &[], &SolverOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_carries_best_record() {
        let m = quadratic_model(1.0);
        let b = BoxConstraint::new(1.0).unwrap();
        let start = m.grid().interpolate(|x| 0.8 * (1.0 - x.abs())).unwrap();
        let opts = SolverOptions {
            max_iter: 1,
            tol: 1e-300,
            ..SolverOptions::default()
        };
        match minimize_in_box(&m, &b, &[("s".into(), start)], &opts) {
            Err(Error::NonConvergence { best, .. }) => assert_eq!(best.label, "s"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn membership_examples() {
        let r = record(&[0.0, 0.0, 0.0], 0.0, "z");
        assert_eq!(check_box_membership(&r, 0.3, 0.0), BoxMembership { inside: true, margin: 0.3 });
        let r = record(&[0.1, 0.27, 0.2], 0.0, "a");
        assert!(check_box_membership(&r, 0.3, 0.0).inside);
        let r = record(&[0.1, 1.0, 0.2], 0.0, "b");
        assert!(!check_box_membership(&r, 0.3, 1e-10).inside);
    }

    #[test]
    fn distinctness_examples() {
        let a = record(&[0.1, 0.2, 0.1], -1.0, "a");
        let b = record(&[0.1, 0.2, 0.1], -1.0, "b");
        let d = distinctness(&[a.clone(), b], 1e-4);
        assert_eq!(d.count, 1);
        let c = record(&[0.1, 0.2 + 1e-3, 0.1], -2.0, "c");
        let d = distinctness(&[a, c], 1e-4);
        assert_eq!(d.count, 2);
        assert_eq!(d.representatives, vec![0, 1]);
    }

    #[test]
    fn residual_grows_under_perturbation() {
        let m = quadratic_model(0.5);
        let b = BoxConstraint::new(1.0).unwrap();
        let start = m.grid().interpolate(|x| 0.5 * (1.0 - x * x)).unwrap();
        let out = minimize_in_box(&m, &b, &[("s".into(), start)], &SolverOptions::default()).unwrap();
        let r0 = residual_norm(&m, &out.best);
        assert!(r0 <= 1e-8 * 3.0);
        let mut noisy = out.best.clone();
        noisy.u = m.grid().interpolate(|x| 1e-3 * (0.5 + 0.5 * (17.0 * x).sin())).unwrap();
        assert!(residual_norm(&m, &noisy) > r0);
    }
}
