//! Gauss–Legendre rules and a small adaptive integrator.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Points and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { p0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

pub(crate) fn gauss10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

pub(crate) fn gauss20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive bisection with a 10-point rule checked against its two halves.
/// `tol` is a local absolute tolerance applied to every accepted panel.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> Adaptive {
    let rule = gauss10();
    let whole = rule.integrate(a, b, f);
    recurse(f, rule, a, b, whole, tol, max_depth)
}

fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Adaptive {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let err = (left + right - whole).abs();
    if err <= tol {
        return Adaptive {
            value: left + right,
            error: err,
            converged: true,
        };
    }
    if depth == 0 {
        return Adaptive {
            value: left + right,
            error: err,
            converged: false,
        };
    }
    let l = recurse(f, rule, a, m, left, tol, depth - 1);
    let r = recurse(f, rule, m, b, right, tol, depth - 1);
    Adaptive {
        value: l.value + r.value,
        error: l.error + r.error,
        converged: l.converged && r.converged,
    }
}

/// Adaptive bisection that also reports the accepted panels as
/// `(right endpoint, integral over the panel)`, left to right.
pub fn adaptive_leaves<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
    leaves: &mut Vec<(f64, f64)>,
) -> Adaptive {
    let rule = gauss10();
    let whole = rule.integrate(a, b, f);
    leaf_recurse(f, rule, a, b, whole, tol, max_depth, leaves)
}

#[allow(clippy::too_many_arguments)]
fn leaf_recurse<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    leaves: &mut Vec<(f64, f64)>,
) -> Adaptive {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let err = (left + right - whole).abs();
    if err <= tol || depth == 0 {
        leaves.push((m, left));
        leaves.push((b, right));
        return Adaptive {
            value: left + right,
            error: err,
            converged: err <= tol,
        };
    }
    let l = leaf_recurse(f, rule, a, m, left, tol, depth - 1, leaves);
    let r = leaf_recurse(f, rule, m, b, right, tol, depth - 1, leaves);
    Adaptive {
        value: l.value + r.value,
        error: l.error + r.error,
        converged: l.converged && r.converged,
    }
}
