//! Discrete Gagliardo form and mass matrices for continuous piecewise-linear
//! functions on a uniform grid.
//!
//! The bilinear form is
//!
//! ```text
//! B(u, v) = ∬_{ℝ×ℝ} (u(x) − u(y)) (v(x) − v(y)) / |x − y|^{1+2s} dx dy
//! ```
//!
//! with `u = v = 0` outside `(−L, L)`, and no normalization constant in
//! front. It splits into element–element interactions over `Ω × Ω` and the
//! interaction of `Ω` with its complement, which in 1D reduces to the weight
//! `∫_{ℝ∖Ω} |x − y|^{−1−2s} dy = ((L − x)^{−2s} + (L + x)^{−2s}) / (2s)`.
//!
//! Element pairs are grouped by their offset `d = |a − b|`. On a uniform
//! grid every pair with the same offset has the same local matrix, so each
//! offset is integrated once:
//!
//! * `d = 0`: the integrand is `u'² |x − y|^{1−2s}`, integrated in closed form;
//! * `d = 1`: corner singularity, removed by a Duffy split of the square into
//!   two triangles, leaving a smooth 1D integral;
//! * `d = 2`: adaptive tensor Gauss–Legendre with an error budget;
//! * `d ≥ 3`: a single tensor Gauss panel.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, NodalVector};
use crate::quadrature::{gauss10, gauss20, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Relative tolerance of the adaptive rule used for near element pairs.
    pub near_tol: f64,
    /// Maximum bisection depth of the adaptive rule.
    pub near_max_depth: u32,
    /// Largest offset treated as "near".
    pub near_offset: usize,
    /// Points per direction of the far-pair tensor rule.
    pub far_points: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            near_tol: 1e-14,
            near_max_depth: 12,
            near_offset: 2,
            far_points: 8,
        }
    }
}

/// Assembled Gagliardo form.
#[derive(Debug, Clone)]
pub struct StiffnessForm {
    grid: Grid,
    s: f64,
    matrix: DMatrix<f64>,
    quadrature: QuadratureConfig,
    /// Largest error estimate reported by the adaptive near-pair rule.
    pub near_error: f64,
    lambda_min: OnceLock<f64>,
}

impl StiffnessForm {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quadrature
    }

    /// `uᵀ A v`.
    pub fn inner(&self, u: &NodalVector, v: &NodalVector) -> f64 {
        u.values().dot(&(&self.matrix * v.values()))
    }

    /// `‖u‖²_X = uᵀ A u`.
    pub fn seminorm_squared(&self, u: &NodalVector) -> f64 {
        self.inner(u, u)
    }

    pub fn seminorm(&self, u: &NodalVector) -> f64 {
        self.seminorm_squared(u).max(0.0).sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        max_asymmetry(&self.matrix)
    }

    /// Smallest eigenvalue of `A`, computed once.
    pub fn smallest_eigenvalue(&self) -> f64 {
        *self.lambda_min.get_or_init(|| smallest_eigenvalue(&self.matrix))
    }

    /// `C₁ = sup ‖u‖_{L²} / ‖u‖_X` over nodal vectors with the lumped `L²` norm,
    /// i.e. `1 / sqrt(λ_min(A) / h)`.
    pub fn embedding_constant(&self) -> f64 {
        (self.grid.spacing() / self.smallest_eigenvalue()).sqrt()
    }

    /// Builds a form from an explicit matrix. Meant for fault-injection tests.
    pub fn from_matrix(grid: Grid, s: f64, matrix: DMatrix<f64>) -> Result<Self> {
        grid.check_len(matrix.nrows())?;
        grid.check_len(matrix.ncols())?;
        Ok(Self {
            grid,
            s,
            matrix,
            quadrature: QuadratureConfig::default(),
            near_error: 0.0,
            lambda_min: OnceLock::new(),
        })
    }

    /// Writes the matrix as row-major CSV with full precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|j| format!("{:?}", self.matrix[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        crate::report::write_atomic(path, out.as_bytes())
    }
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!(
            "fractional order s must lie in (0, 1), got {s}"
        )));
    }
    Ok(())
}

/// Weight `∫_{ℝ∖(−L,L)} |x − y|^{−1−2s} dy` for `x` inside the domain.
pub fn exterior_weight(half_width: f64, s: f64, x: f64) -> f64 {
    ((half_width - x).powf(-2.0 * s) + (half_width + x).powf(-2.0 * s)) / (2.0 * s)
}

pub fn assemble_stiffness(grid: &Grid, s: f64, quad: &QuadratureConfig) -> Result<StiffnessForm> {
    check_order(s)?;
    if quad.far_points == 0 || quad.near_offset < 1 {
        return Err(Error::invalid(
            "quadrature needs at least one far point and near_offset >= 1",
        ));
    }
    let n = grid.n_interior();
    let h = grid.spacing();
    let n_el = grid.n_elements();
    let far_rule = GaussLegendre::new(quad.far_points);

    let mut matrix = DMatrix::<f64>::zeros(n, n);
    let mut near_error = 0.0_f64;

    for d in 0..n_el {
        let (local, err) = pair_template(h, s, d, quad, &far_rule)?;
        near_error = near_error.max(err);
        let weight = if d == 0 { 1.0 } else { 2.0 };
        for a in 0..(n_el - d) {
            let nodes = pair_nodes(a, d);
            scatter(&mut matrix, n, &nodes, &local, weight);
        }
    }

    add_exterior(&mut matrix, grid, s);

    // Mirror so the stored matrix is symmetric to the last bit.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }

    Ok(StiffnessForm {
        grid: *grid,
        s,
        matrix,
        quadrature: *quad,
        near_error,
        lambda_min: OnceLock::new(),
    })
}

/// Global node ids (0 and n+1 are the boundary) touched by element pair `(a, a + d)`.
fn pair_nodes(a: usize, d: usize) -> Vec<usize> {
    match d {
        0 => vec![a, a + 1],
        1 => vec![a, a + 1, a + 2],
        _ => vec![a, a + 1, a + d, a + d + 1],
    }
}

fn scatter(matrix: &mut DMatrix<f64>, n: usize, nodes: &[usize], local: &[Vec<f64>], weight: f64) {
    for (p, &gi) in nodes.iter().enumerate() {
        if gi == 0 || gi > n {
            continue;
        }
        for (q, &gj) in nodes.iter().enumerate() {
            if gj == 0 || gj > n {
                continue;
            }
            matrix[(gi - 1, gj - 1)] += weight * local[p][q];
        }
    }
}

/// Local interaction matrix of one element pair at offset `d`, plus the
/// error estimate of the adaptive rule (zero for the other rules).
fn pair_template(
    h: f64,
    s: f64,
    d: usize,
    quad: &QuadratureConfig,
    far_rule: &GaussLegendre,
) -> Result<(Vec<Vec<f64>>, f64)> {
    match d {
        0 => {
            let c = 2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s)) / (h * h);
            Ok((vec![vec![c, -c], vec![-c, c]], 0.0))
        }
        1 => Ok((adjacent_template(h, s), 0.0)),
        _ if d <= quad.near_offset => {
            let (local, err, ok) = separated_adaptive(h, s, d, quad);
            if !ok {
                return Err(Error::Assembly { offset: d, error: err });
            }
            Ok((local, err))
        }
        _ => Ok((separated_fixed(h, s, d, far_rule), 0.0)),
    }
}

/// Adjacent elements sharing node `c`: `x = c − ξ`, `y = c + η`.
/// The difference vector is `(c_α ξ + d_α η) / h`, so every entry is a
/// combination of `∬ ξ^i η^j (ξ + η)^{−1−2s}` with `i + j = 2`. The Duffy
/// split gives `J_ij = h^{3−2s} (T_i + T_j) / (3 − 2s)` with
/// `T_j = ∫_0^1 t^j (1 + t)^{−1−2s} dt`.
fn adjacent_template(h: f64, s: f64) -> Vec<Vec<f64>> {
    let rule = gauss20();
    let t = |j: i32| rule.integrate(0.0, 1.0, |x| x.powi(j) * (1.0 + x).powf(-1.0 - 2.0 * s));
    let (t0, t1, t2) = (t(0), t(1), t(2));
    let scale = h.powf(3.0 - 2.0 * s) / (3.0 - 2.0 * s) / (h * h);
    let j20 = (t2 + t0) * scale;
    let j11 = (t1 + t1) * scale;
    let j02 = j20;
    let c = [1.0, -1.0, 0.0];
    let e = [0.0, 1.0, -1.0];
    let mut local = vec![vec![0.0; 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            local[p][q] = c[p] * c[q] * j20 + (c[p] * e[q] + e[p] * c[q]) * j11 + e[p] * e[q] * j02;
        }
    }
    local
}

/// Difference vector for separated elements, local coordinates `ξ, η ∈ [0, h]`
/// measured from the left ends of `e_a` and `e_b`.
#[inline]
fn separated_integrand(h: f64, s: f64, d: usize, xi: f64, eta: f64, acc: &mut [[f64; 4]; 4], w: f64) {
    let r = d as f64 * h + eta - xi;
    let k = w * r.powf(-1.0 - 2.0 * s);
    let v = [1.0 - xi / h, xi / h, -(1.0 - eta / h), -(eta / h)];
    for p in 0..4 {
        for q in 0..4 {
            acc[p][q] += k * v[p] * v[q];
        }
    }
}

fn separated_fixed(h: f64, s: f64, d: usize, rule: &GaussLegendre) -> Vec<Vec<f64>> {
    let mut acc = [[0.0; 4]; 4];
    for (xi, wx) in rule.mapped(0.0, h) {
        for (eta, wy) in rule.mapped(0.0, h) {
            separated_integrand(h, s, d, xi, eta, &mut acc, wx * wy);
        }
    }
    acc.iter().map(|row| row.to_vec()).collect()
}

fn separated_adaptive(h: f64, s: f64, d: usize, quad: &QuadratureConfig) -> (Vec<Vec<f64>>, f64, bool) {
    let rule = gauss10();
    let panel = |x0: f64, x1: f64, y0: f64, y1: f64| {
        let mut acc = [[0.0; 4]; 4];
        for (xi, wx) in rule.mapped(x0, x1) {
            for (eta, wy) in rule.mapped(y0, y1) {
                separated_integrand(h, s, d, xi, eta, &mut acc, wx * wy);
            }
        }
        acc
    };
    let whole = panel(0.0, h, 0.0, h);
    let scale = whole.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = quad.near_tol * scale;
    let mut err_total = 0.0;
    let mut ok = true;
    let acc = refine_square(
        &panel,
        (0.0, h, 0.0, h),
        whole,
        tol,
        quad.near_max_depth,
        &mut err_total,
        &mut ok,
    );
    let rel = if scale > 0.0 { err_total / scale } else { 0.0 };
    (acc.iter().map(|row| row.to_vec()).collect(), rel, ok)
}

type Block = [[f64; 4]; 4];

fn refine_square<P>(
    panel: &P,
    (x0, x1, y0, y1): (f64, f64, f64, f64),
    whole: Block,
    tol: f64,
    depth: u32,
    err_total: &mut f64,
    ok: &mut bool,
) -> Block
where
    P: Fn(f64, f64, f64, f64) -> Block,
{
    let xm = 0.5 * (x0 + x1);
    let ym = 0.5 * (y0 + y1);
    let quads = [
        (x0, xm, y0, ym),
        (xm, x1, y0, ym),
        (x0, xm, ym, y1),
        (xm, x1, ym, y1),
    ];
    let parts: Vec<Block> = quads.iter().map(|&(a, b, c, d)| panel(a, b, c, d)).collect();
    let mut refined = [[0.0; 4]; 4];
    for part in &parts {
        for p in 0..4 {
            for q in 0..4 {
                refined[p][q] += part[p][q];
            }
        }
    }
    let mut err = 0.0_f64;
    for p in 0..4 {
        for q in 0..4 {
            err = err.max((refined[p][q] - whole[p][q]).abs());
        }
    }
    if err <= tol {
        *err_total += err;
        return refined;
    }
    if depth == 0 {
        *err_total += err;
        *ok = false;
        return refined;
    }
    let mut out = [[0.0; 4]; 4];
    for (q, part) in quads.iter().zip(parts) {
        let sub = refine_square(panel, *q, part, 0.25 * tol, depth - 1, err_total, ok);
        for a in 0..4 {
            for b in 0..4 {
                out[a][b] += sub[a][b];
            }
        }
    }
    out
}

/// Adds `2 ∫_Ω φ_i φ_j κ(x) dx` with `κ` the exterior weight. The two
/// boundary elements carry an endpoint singularity `d^{−2s}` which is
/// integrated in closed form against the single interior hat.
fn add_exterior(matrix: &mut DMatrix<f64>, grid: &Grid, s: f64) {
    let n = grid.n_interior();
    let h = grid.spacing();
    let l = grid.half_width();
    let rule = gauss10();
    let n_el = grid.n_elements();
    let exact_end = h.powf(1.0 - 2.0 * s) / (3.0 - 2.0 * s) / (2.0 * s);

    for e in 0..n_el {
        let x0 = grid.coordinate(e);
        let x1 = x0 + h;
        let mut local = [[0.0; 2]; 2];
        for (x, w) in rule.mapped(x0, x1) {
            let phi = [(x1 - x) / h, (x - x0) / h];
            let kappa = if e == 0 {
                (l - x).powf(-2.0 * s) / (2.0 * s)
            } else if e == n_el - 1 {
                (l + x).powf(-2.0 * s) / (2.0 * s)
            } else {
                exterior_weight(l, s, x)
            };
            for p in 0..2 {
                for q in 0..2 {
                    local[p][q] += w * kappa * phi[p] * phi[q];
                }
            }
        }
        if e == 0 {
            local[1][1] += exact_end;
        }
        if e == n_el - 1 {
            local[0][0] += exact_end;
        }
        let nodes = [e, e + 1];
        for (p, &gi) in nodes.iter().enumerate() {
            if gi == 0 || gi > n {
                continue;
            }
            for (q, &gj) in nodes.iter().enumerate() {
                if gj == 0 || gj > n {
                    continue;
                }
                matrix[(gi - 1, gj - 1)] += 2.0 * local[p][q];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassKind {
    Consistent,
    Lumped,
}

#[derive(Debug, Clone)]
pub struct MassMatrix {
    kind: MassKind,
    matrix: DMatrix<f64>,
}

impl MassMatrix {
    pub fn kind(&self) -> MassKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn quadratic(&self, u: &NodalVector) -> f64 {
        u.values().dot(&(&self.matrix * u.values()))
    }
}

pub fn assemble_mass(grid: &Grid, kind: MassKind) -> MassMatrix {
    let n = grid.n_interior();
    let h = grid.spacing();
    let mut matrix = DMatrix::zeros(n, n);
    match kind {
        MassKind::Lumped => {
            for i in 0..n {
                matrix[(i, i)] = h;
            }
        }
        MassKind::Consistent => {
            for i in 0..n {
                matrix[(i, i)] = 2.0 * h / 3.0;
                if i + 1 < n {
                    matrix[(i, i + 1)] = h / 6.0;
                    matrix[(i + 1, i)] = h / 6.0;
                }
            }
        }
    }
    MassMatrix { kind, matrix }
}

/// Brute-force midpoint evaluation of `‖u‖²_X`, independent of the assembly.
///
/// Each element is split into `refinement` cells. Cell pairs in different
/// elements use the midpoint rule; pairs inside one element, where the
/// integrand is exactly `u'² |x − y|^{1−2s}`, are summed in closed form; the
/// exterior contributes `2 Σ u(z)² κ(z) H` with the exact weight `κ`.
pub fn oracle_gagliardo(grid: &Grid, u: &NodalVector, s: f64, refinement: usize) -> f64 {
    assert!(refinement >= 1, "refinement must be >= 1");
    let r = refinement;
    let h = grid.spacing();
    let cell = h / r as f64;
    let n_el = grid.n_elements();
    let m = n_el * r;
    let l = grid.half_width();
    let vals = u.as_slice();
    let node = |i: usize| {
        if i == 0 || i > grid.n_interior() {
            0.0
        } else {
            vals[i - 1]
        }
    };

    let mut mids = Vec::with_capacity(m);
    for e in 0..n_el {
        let (ul, ur) = (node(e), node(e + 1));
        for c in 0..r {
            let t = (c as f64 + 0.5) / r as f64;
            mids.push((1.0 - t) * ul + t * ur);
        }
    }
    // Kernel table indexed by cell distance.
    let kernel: Vec<f64> = (0..m)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                (k as f64 * cell).powf(-1.0 - 2.0 * s) * cell * cell
            }
        })
        .collect();

    let mut cross = 0.0;
    for p in 0..m {
        let ep = p / r;
        let up = mids[p];
        let start = (ep + 1) * r;
        let mut row = 0.0;
        for q in start..m {
            let du = up - mids[q];
            row += du * du * kernel[q - p];
        }
        cross += row;
    }
    let within_const = 2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
    let within: f64 = (0..n_el)
        .map(|e| {
            let slope = (node(e + 1) - node(e)) / h;
            slope * slope * within_const
        })
        .sum();
    let tail: f64 = (0..m)
        .map(|p| {
            let z = -l + (p as f64 + 0.5) * cell;
            2.0 * mids[p] * mids[p] * exterior_weight(l, s, z) * cell
        })
        .sum();
    2.0 * cross + within + tail
}

/// Hat, plateau bump and five seeded random sine sums: the standard vectors
/// for comparing the assembled form with the oracle.
pub fn oracle_test_vectors(grid: &Grid, seed: u64) -> Vec<(String, NodalVector)> {
    let l = grid.half_width();
    let hat = grid
        .interpolate(|x| (1.0 - x.abs() / l).max(0.0))
        .expect("finite profile");
    let bump = grid
        .interpolate(|x| {
            let r = l / 4.0;
            let d = x.abs();
            if d <= r {
                1.0
            } else if d <= 2.0 * r {
                (2.0 * r - d) / r
            } else {
                0.0
            }
        })
        .expect("finite profile");
    let mut out = vec![("hat".to_string(), hat), ("bump".to_string(), bump)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 0..5 {
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = grid
            .interpolate(|x| {
                c.iter()
                    .enumerate()
                    .map(|(k, ck)| ck * ((k + 1) as f64 * std::f64::consts::PI * (x + l) / (2.0 * l)).sin())
                    .sum()
            })
            .expect("finite profile");
        out.push((format!("random-{j}"), u));
    }
    out
}

/// Richardson combination of the oracle at `refinement` and `2·refinement`.
/// The leading error of the midpoint sum comes from the corner cells at shared
/// nodes and the boundary cells, both `O(H^{3−2s})`, capped at `O(H²)`.
pub fn oracle_gagliardo_extrapolated(grid: &Grid, u: &NodalVector, s: f64, refinement: usize) -> f64 {
    let coarse = oracle_gagliardo(grid, u, s, refinement);
    let fine = oracle_gagliardo(grid, u, s, 2 * refinement);
    let order = (3.0 - 2.0 * s).min(2.0);
    let factor = 2f64.powf(order);
    (factor * fine - coarse) / (factor - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignInequalityReport {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Smallest `lhs − rhs` seen (non-negative when the inequality holds).
    pub worst_margin: f64,
    pub holds: bool,
}

/// Checks `(u(x) − u(y)) (u⁻(x) − u⁻(y)) ≥ |u⁻(x) − u⁻(y)|²`, `u⁻ = min(u, 0)`,
/// at `sample_pairs` random node pairs (seeded), or at every pair when
/// `sample_pairs` is zero.
pub fn check_sign_inequality(u: &NodalVector, sample_pairs: usize, seed: u64) -> SignInequalityReport {
    let vals = u.as_slice();
    let n = vals.len();
    let mut report = SignInequalityReport {
        pairs_checked: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
        holds: true,
    };
    let mut check = |i: usize, j: usize| {
        let (ui, uj) = (vals[i], vals[j]);
        let (mi, mj) = (ui.min(0.0), uj.min(0.0));
        let lhs = (ui - uj) * (mi - mj);
        let rhs = (mi - mj) * (mi - mj);
        let margin = lhs - rhs;
        // Both sides are single products; allow their rounding only.
        let slack = 4.0 * f64::EPSILON * lhs.abs().max(rhs.abs());
        report.pairs_checked += 1;
        report.worst_margin = report.worst_margin.min(margin);
        if margin < -slack {
            report.violations += 1;
            report.holds = false;
        }
    };
    if sample_pairs == 0 {
        for i in 0..n {
            for j in 0..n {
                check(i, j);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..sample_pairs {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            check(i, j);
        }
    }
    report
}

/// Writes a dense matrix to a CSV file (used by the CLI dump flag).
pub fn write_matrix_csv<W: Write>(out: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{:?}", m[(i, j)])?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn zero_vector_has_zero_form() {
        let g = grid(9);
        let a = assemble_stiffness(&g, 0.4, &QuadratureConfig::default()).unwrap();
        assert_eq!(a.seminorm_squared(&g.zeros()), 0.0);
    }

    #[test]
    fn rejects_order_outside_unit_interval() {
        let g = grid(5);
        for s in [0.0, 1.0, 1.5, -0.2] {
            assert!(matches!(
                assemble_stiffness(&g, s, &QuadratureConfig::default()),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn exact_symmetry_and_quadratic_scaling() {
        let g = grid(17);
        let a = assemble_stiffness(&g, 0.3, &QuadratureConfig::default()).unwrap();
        assert_eq!(a.max_asymmetry(), 0.0);
        let u = g.interpolate(|x| (1.0 - x * x) * (2.0 + x)).unwrap();
        let q1 = a.seminorm_squared(&u);
        let q2 = a.seminorm_squared(&u.scaled(2.0));
        assert_eq!(q2 / q1, 4.0);
    }

    #[test]
    fn positive_definite() {
        for s in [0.1, 0.5, 0.9] {
            let a = assemble_stiffness(&grid(21), s, &QuadratureConfig::default()).unwrap();
            let lmin = a.smallest_eigenvalue();
            let norm = a.matrix().norm();
            assert!(lmin > 1e-12 * norm, "s={s}: lmin={lmin}");
        }
    }

    #[test]
    fn off_diagonal_entries_are_nonpositive() {
        for s in [0.25, 0.4, 0.75] {
            let a = assemble_stiffness(&grid(33), s, &QuadratureConfig::default()).unwrap();
            let m = a.matrix();
            for i in 0..33 {
                for j in 0..33 {
                    if i != j {
                        assert!(m[(i, j)] <= 0.0, "s={s} A[{i},{j}]={}", m[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn exhausted_adaptive_budget_is_an_assembly_error() {
        let quad = QuadratureConfig {
            near_tol: 0.0,
            near_max_depth: 0,
            ..QuadratureConfig::default()
        };
        let err = assemble_stiffness(&grid(9), 0.4, &quad).unwrap_err();
        assert!(matches!(err, Error::Assembly { offset: 2, .. }));
    }

    #[test]
    fn mass_matrices() {
        let g = grid(3);
        let lumped = assemble_mass(&g, MassKind::Lumped);
        assert_eq!(lumped.matrix().diagonal().as_slice(), &[0.5, 0.5, 0.5]);
        let ones = NodalVector::from_slice(g, &[1.0, 1.0, 1.0]).unwrap();
        let consistent = assemble_mass(&g, MassKind::Consistent);
        // Plateau of height 1 on [-0.5, 0.5] with linear ramps to ±1.
        assert!((consistent.quadratic(&ones) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(consistent.quadratic(&g.zeros()), 0.0);
        assert_eq!(max_asymmetry(consistent.matrix()), 0.0);
        assert!(smallest_eigenvalue(consistent.matrix()) > 0.0);
    }

    #[test]
    fn consistent_mass_matches_simpson() {
        let g = grid(7);
        let u = g.interpolate(|x| (3.0 * x).sin() + 0.5).unwrap();
        let m = assemble_mass(&g, MassKind::Consistent).quadratic(&u);
        let steps = 8 * 4096;
        let dx = 2.0 / steps as f64;
        let f = |x: f64| g.evaluate(u.as_slice(), x).powi(2);
        let mut simpson = f(-1.0) + f(1.0);
        for k in 1..steps {
            let x = -1.0 + k as f64 * dx;
            simpson += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        simpson *= dx / 3.0;
        assert!((m - simpson).abs() < 1e-10, "{m} vs {simpson}");
    }

    #[test]
    fn oracle_basic_properties() {
        let g = grid(3);
        assert_eq!(oracle_gagliardo(&g, &g.zeros(), 0.25, 8), 0.0);
        let u = NodalVector::from_slice(g, &[0.3, -1.0, 0.7]).unwrap();
        let a = oracle_gagliardo(&g, &u, 0.25, 16);
        let b = oracle_gagliardo(&g, &u.scaled(-1.0), 0.25, 16);
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_self_convergence_for_center_hat() {
        let g = grid(3);
        let hat = NodalVector::from_slice(g, &[0.0, 1.0, 0.0]).unwrap();
        let a = oracle_gagliardo(&g, &hat, 0.25, 32);
        let b = oracle_gagliardo(&g, &hat, 0.25, 64);
        assert!(((a - b) / b).abs() < 5e-3, "{a} vs {b}");
    }

    #[test]
    fn center_hat_matches_oracle() {
        let g = grid(3);
        let a = assemble_stiffness(&g, 0.25, &QuadratureConfig::default()).unwrap();
        let hat = NodalVector::from_slice(g, &[0.0, 1.0, 0.0]).unwrap();
        let q = a.seminorm_squared(&hat);
        let o = oracle_gagliardo_extrapolated(&g, &hat, 0.25, 64);
        assert!(((q - o) / o).abs() < 0.01, "{q} vs {o}");
    }

    #[test]
    fn sign_inequality_cases() {
        let g = grid(9);
        let pos = g.interpolate(|x| 1.0 - x * x).unwrap();
        assert!(check_sign_inequality(&pos, 0, 0).holds);
        let neg = pos.scaled(-1.0);
        let r = check_sign_inequality(&neg, 0, 0);
        assert!(r.holds);
        assert_eq!(r.pairs_checked, 81);
        let mixed = g.interpolate(|x| (7.0 * x).sin()).unwrap();
        let r = check_sign_inequality(&mixed, 10_000, 3);
        assert!(r.holds);
        assert_eq!(r.pairs_checked, 10_000);
        assert!(r.worst_margin >= 0.0);
    }
}
