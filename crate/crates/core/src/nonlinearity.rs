//! Oscillatory nonlinearities, their antiderivatives, composite right-hand
//! sides, truncation, and the sign-ladder scanner.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_leaves, gauss10};

/// Base nonlinearity `f`, zero for `t ≤ 0` in every family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `f(t) = t^α (a + sin t^{−β})`.
    #[serde(rename = "origin-oscillatory")]
    Origin { alpha: f64, beta: f64, a: f64 },
    /// `f(t) = t^α (a + sin t^β)`.
    #[serde(rename = "infinity-oscillatory")]
    Infinity { alpha: f64, beta: f64, a: f64 },
    /// Linear interpolation of `(t, f(t))` samples, constant beyond either end.
    /// Samples with `t < 0` are ignored.
    Table { points: Vec<[f64; 2]> },
}

impl NonlinearitySpec {
    /// Reads a two-column CSV of `(t, f(t))` pairs. A non-numeric first row is
    /// treated as a header.
    pub fn table_from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut points = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if rec.len() != 2 {
                return Err(Error::Config(format!(
                    "{}: row {} has {} columns, expected 2",
                    path.display(),
                    row + 1,
                    rec.len()
                )));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(t), Ok(v)) => points.push([t, v]),
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Config(format!(
                        "{}: row {} is not numeric",
                        path.display(),
                        row + 1
                    )))
                }
            }
        }
        let spec = NonlinearitySpec::Table { points };
        spec.check()?;
        Ok(spec)
    }

    /// Basic sanity of the parameters (finite values, sorted table).
    pub fn check(&self) -> Result<()> {
        match self {
            Self::Origin { alpha, beta, a } | Self::Infinity { alpha, beta, a } => {
                if !(alpha.is_finite() && beta.is_finite() && a.is_finite()) || *beta <= 0.0 {
                    return Err(Error::invalid(format!(
                        "oscillatory family needs finite α, a and β > 0 (α={alpha}, β={beta}, a={a})"
                    )));
                }
            }
            Self::Table { points } => {
                let pos: Vec<&[f64; 2]> = points.iter().filter(|p| p[0] >= 0.0).collect();
                if pos.is_empty() {
                    return Err(Error::invalid("table needs at least one sample with t >= 0"));
                }
                if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
                    return Err(Error::invalid("table contains non-finite values"));
                }
                if pos.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::invalid("table abscissae must be strictly increasing"));
                }
            }
        }
        Ok(())
    }

    /// Parameter ranges of the example families under which the limit
    /// hypotheses hold.
    pub fn check_gate(&self) -> Result<()> {
        self.check()?;
        match *self {
            Self::Origin { alpha, beta, a } => {
                if !(0.0 < alpha && alpha < 1.0 && 1.0 < alpha + beta && 0.0 < a && a < 1.0) {
                    return Err(Error::invalid(format!(
                        "origin family requires 0 < α < 1 < α + β and 0 < a < 1 (α={alpha}, β={beta}, a={a})"
                    )));
                }
            }
            Self::Infinity { alpha, beta, a } => {
                if !(alpha > 1.0 && (alpha - beta).abs() < 1.0 && 0.0 < a && a < 1.0) {
                    return Err(Error::invalid(format!(
                        "infinity family requires α > 1, |α − β| < 1 and 0 < a < 1 (α={alpha}, β={beta}, a={a})"
                    )));
                }
            }
            Self::Table { .. } => {}
        }
        Ok(())
    }

    pub fn eval_f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Origin { alpha, beta, a } => t.powf(*alpha) * (a + t.powf(-beta).sin()),
            Self::Infinity { alpha, beta, a } => t.powf(*alpha) * (a + t.powf(*beta).sin()),
            Self::Table { points } => table_eval(points, t),
        }
    }

    /// One-off evaluation of `F(t) = ∫_0^t f`. Builds a fresh panel table; use
    /// [`Antiderivative`] for repeated calls.
    #[allow(non_snake_case)]
    pub fn eval_F(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        Antiderivative::build(self, t)?.eval(t)
    }
}

fn table_eval(points: &[[f64; 2]], t: f64) -> f64 {
    let start = points.partition_point(|p| p[0] < 0.0);
    let pts = &points[start..];
    if t <= pts[0][0] {
        return pts[0][1];
    }
    let last = pts[pts.len() - 1];
    if t >= last[0] {
        return last[1];
    }
    let j = pts.partition_point(|p| p[0] <= t);
    let (p0, p1) = (pts[j - 1], pts[j]);
    let w = (t - p0[0]) / (p1[0] - p0[0]);
    (1.0 - w) * p0[1] + w * p1[1]
}

/// Relative tolerance of every panel of the antiderivative table, before the
/// allowance for rounding in the phase.
const PANEL_RTOL: f64 = 1e-13;
const PANEL_DEPTH: u32 = 16;
/// Largest number of half-periods resolved next to the origin.
const MAX_ORIGIN_PANELS: usize = 200_000;

/// Cached panelization of `f` on `[0, t_max]` with cumulative integrals.
///
/// Panels end at the half-period points of the oscillation and are then
/// refined adaptively; `F(t)` is the cumulative sum up to the panel that
/// contains `t` plus a 10-point Gauss integral over the partial panel. For the
/// origin family the first `ε = τ_M` is integrated analytically,
/// `F(t) ≈ a t^{α+1}/(α+1) + t^{α+β+1} cos(t^{−β}) / β` for `t ≤ ε`.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    spec: NonlinearitySpec,
    t_max: f64,
    head: f64,
    breaks: Vec<f64>,
    cumulative: Vec<f64>,
    /// Largest panel error estimate relative to the panel scale.
    pub achieved: f64,
}

impl Antiderivative {
    pub fn build(spec: &NonlinearitySpec, t_max: f64) -> Result<Self> {
        spec.check()?;
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::invalid(format!("antiderivative range must be positive, got {t_max}")));
        }
        let f = |t: f64| spec.eval_f(t);
        let mut head = 0.0;
        let mut panel_ends: Vec<f64> = Vec::new();
        match *spec {
            NonlinearitySpec::Origin { alpha, beta, a: _ } => {
                let tau = |m: f64| (std::f64::consts::PI * m).powf(-1.0 / beta);
                // Analytic head: remainder of the expansion is about
                // (α+β+1)/β² · ε^{α+2β+1}.
                let c = (alpha + beta + 1.0) / (beta * beta);
                let mut m_head = 1usize;
                while m_head < MAX_ORIGIN_PANELS {
                    let eps = tau(m_head as f64);
                    if eps < 0.5 * t_max && c * eps.powf(alpha + 2.0 * beta + 1.0) <= 1e-18 {
                        break;
                    }
                    m_head += 1;
                }
                head = tau(m_head as f64).min(0.5 * t_max);
                let mut m = m_head;
                while m > 1 {
                    m -= 1;
                    let b = tau(m as f64);
                    if b >= t_max {
                        break;
                    }
                    if b > head {
                        panel_ends.push(b);
                    }
                }
                panel_ends.push(t_max);
            }
            NonlinearitySpec::Infinity { beta, .. } => {
                let mut m = 1usize;
                loop {
                    let b = (std::f64::consts::PI * m as f64).powf(1.0 / beta);
                    if b >= t_max {
                        break;
                    }
                    panel_ends.push(b);
                    m += 1;
                }
                panel_ends.push(t_max);
            }
            NonlinearitySpec::Table { ref points } => {
                panel_ends.extend(points.iter().map(|p| p[0]).filter(|&x| x > 0.0 && x < t_max));
                panel_ends.push(t_max);
            }
        }

        let mut breaks = vec![head];
        let mut cumulative = vec![if head > 0.0 { origin_head(spec, head) } else { 0.0 }];
        let mut leaves = Vec::new();
        let mut achieved = 0.0_f64;
        let mut left = head;
        for &right in &panel_ends {
            let scale = gauss10().integrate(left, right, |t| f(t).abs()) + f64::MIN_POSITIVE;
            // sin of a phase of size P carries an absolute error of about P·eps.
            let rtol = PANEL_RTOL.max(64.0 * f64::EPSILON * phase(spec, left).max(phase(spec, right)));
            let tol = rtol * scale;
            leaves.clear();
            let r = adaptive_leaves(&f, left, right, tol, PANEL_DEPTH, &mut leaves);
            achieved = achieved.max(r.error / scale);
            if !r.converged {
                return Err(Error::Quadrature {
                    achieved: r.error / scale,
                    requested: rtol,
                });
            }
            let mut acc = *cumulative.last().unwrap();
            for &(end, value) in &leaves {
                acc += value;
                breaks.push(end);
                cumulative.push(acc);
            }
            left = right;
        }
        Ok(Self {
            spec: spec.clone(),
            t_max,
            head,
            breaks,
            cumulative,
            achieved,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn n_panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t > self.t_max {
            return Err(Error::invalid(format!(
                "antiderivative requested at {t} beyond its table range {}",
                self.t_max
            )));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t <= self.head {
            return origin_head(&self.spec, t);
        }
        let j = self.breaks.partition_point(|&b| b <= t) - 1;
        let from = self.breaks[j];
        self.cumulative[j] + gauss10().integrate(from, t, |x| self.spec.eval_f(x))
    }
}

fn phase(spec: &NonlinearitySpec, t: f64) -> f64 {
    match *spec {
        NonlinearitySpec::Origin { beta, .. } => t.powf(-beta),
        NonlinearitySpec::Infinity { beta, .. } => t.powf(beta),
        NonlinearitySpec::Table { .. } => 0.0,
    }
}

fn origin_head(spec: &NonlinearitySpec, t: f64) -> f64 {
    match *spec {
        NonlinearitySpec::Origin { alpha, beta, a } => {
            a * t.powf(alpha + 1.0) / (alpha + 1.0)
                + t.powf(alpha + beta + 1.0) * t.powf(-beta).cos() / beta
        }
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Origin,
    Infinity,
}

/// How the composite right-hand side is assembled from `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Construction {
    /// `g = λ̃₀ u + f`, `μ = λ̃₀ − λ`. Without `lambda_tilde` the midpoint of
    /// `(λ₀, −l₀)` is used, with `l₀` the measured proxy.
    OriginLinear {
        lambda: f64,
        lambda0: f64,
        #[serde(default)]
        lambda_tilde: Option<f64>,
    },
    /// `g = λ u^p + λ₀ u + f`, `μ = λ₀`.
    OriginPower { lambda: f64, p: f64, lambda0: f64 },
    /// `g = λ̂_∞ u + f`, `μ = λ̂_∞ − λ`.
    InfinityLinear {
        lambda: f64,
        lambda_inf: f64,
        #[serde(default)]
        lambda_hat: Option<f64>,
    },
    /// `g = λ u^p + λ_∞ u + f`, `μ = λ_∞`.
    InfinityPower { lambda: f64, p: f64, lambda_inf: f64 },
    /// `g = λ u^p + μ_q u^q + μ_lin u + f`, `μ = μ_lin`.
    ConcaveConvex {
        lambda: f64,
        p: f64,
        mu_q: f64,
        q: f64,
        mu_lin: f64,
    },
    /// `g = μ_lin u + f + ε f₂`, `μ = μ_lin`.
    Perturbed {
        mu_lin: f64,
        epsilon: f64,
        second: NonlinearitySpec,
    },
}

impl Construction {
    /// Direction implied by the construction, if any.
    pub fn natural_direction(&self) -> Option<Direction> {
        match self {
            Self::OriginLinear { .. } | Self::OriginPower { .. } => Some(Direction::Origin),
            Self::InfinityLinear { .. } | Self::InfinityPower { .. } => Some(Direction::Infinity),
            _ => None,
        }
    }

    /// The swept parameter (`λ`, or `ε` for the perturbed problem).
    pub fn lambda(&self) -> f64 {
        match *self {
            Self::OriginLinear { lambda, .. }
            | Self::OriginPower { lambda, .. }
            | Self::InfinityLinear { lambda, .. }
            | Self::InfinityPower { lambda, .. }
            | Self::ConcaveConvex { lambda, .. } => lambda,
            Self::Perturbed { epsilon, .. } => epsilon,
        }
    }

    pub fn with_lambda(&self, value: f64) -> Self {
        let mut c = self.clone();
        match &mut c {
            Self::OriginLinear { lambda, .. }
            | Self::OriginPower { lambda, .. }
            | Self::InfinityLinear { lambda, .. }
            | Self::InfinityPower { lambda, .. }
            | Self::ConcaveConvex { lambda, .. } => *lambda = value,
            Self::Perturbed { epsilon, .. } => *epsilon = value,
        }
        c
    }

    /// Exponent of the swept term.
    pub fn power(&self) -> f64 {
        match *self {
            Self::OriginPower { p, .. } | Self::InfinityPower { p, .. } | Self::ConcaveConvex { p, .. } => p,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct PowerTerm {
    coefficient: f64,
    exponent: f64,
}

/// Composite nonlinearity `g` with the shift `μ` moved to the operator side.
#[derive(Debug, Clone)]
pub struct Composite {
    base: Arc<Antiderivative>,
    second: Option<(f64, Arc<Antiderivative>)>,
    terms: Vec<PowerTerm>,
    linear: f64,
    mu: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

impl Composite {
    /// Builds `g` for `construction`, tabulating antiderivatives up to `t_max`.
    pub fn compose(spec: &NonlinearitySpec, construction: &Construction, t_max: f64) -> Result<Self> {
        let base = Arc::new(Antiderivative::build(spec, t_max)?);
        Self::compose_with(base, construction)
    }

    /// As [`Composite::compose`], reusing an existing table for `f`.
    pub fn compose_with(base: Arc<Antiderivative>, construction: &Construction) -> Result<Self> {
        let spec = base.spec().clone();
        let power = |c: f64, e: f64| PowerTerm {
            coefficient: c,
            exponent: e,
        };
        let mut second = None;
        let (terms, linear, mu) = match construction {
            Construction::OriginLinear {
                lambda,
                lambda0,
                lambda_tilde,
            }
            | Construction::InfinityLinear {
                lambda,
                lambda_inf: lambda0,
                lambda_hat: lambda_tilde,
            } => {
                finite("λ", *lambda)?;
                finite("λ₀", *lambda0)?;
                let tilde = match lambda_tilde {
                    Some(v) => *v,
                    None => {
                        let direction = construction.natural_direction().unwrap_or(Direction::Origin);
                        default_linear_coefficient(&spec, direction, *lambda0)?
                    }
                };
                let mu = tilde - lambda;
                if !(mu > 0.0) {
                    return Err(Error::invalid(format!(
                        "μ = λ̃ − λ must be positive (λ̃ = {tilde}, λ = {lambda})"
                    )));
                }
                (vec![], tilde, mu)
            }
            Construction::OriginPower { lambda, p, lambda0 }
            | Construction::InfinityPower {
                lambda,
                p,
                lambda_inf: lambda0,
            } => {
                finite("λ", *lambda)?;
                positive("p", *p)?;
                positive("μ_lin", *lambda0)?;
                (vec![power(*lambda, *p)], *lambda0, *lambda0)
            }
            Construction::ConcaveConvex {
                lambda,
                p,
                mu_q,
                q,
                mu_lin,
            } => {
                finite("λ", *lambda)?;
                finite("μ_q", *mu_q)?;
                positive("p", *p)?;
                positive("q", *q)?;
                positive("μ_lin", *mu_lin)?;
                (vec![power(*lambda, *p), power(*mu_q, *q)], *mu_lin, *mu_lin)
            }
            Construction::Perturbed {
                mu_lin,
                epsilon,
                second: g2,
            } => {
                positive("μ_lin", *mu_lin)?;
                finite("ε", *epsilon)?;
                second = Some((*epsilon, Arc::new(Antiderivative::build(g2, base.t_max())?)));
                (vec![], *mu_lin, *mu_lin)
            }
        };
        Ok(Self {
            base,
            second,
            terms,
            linear,
            mu,
        })
    }

    /// `g ≡ 0` with `μ = 0`.
    pub fn zero(t_max: f64) -> Result<Self> {
        let zero = NonlinearitySpec::Table {
            points: vec![[1.0, 0.0]],
        };
        Ok(Self {
            base: Arc::new(Antiderivative::build(&zero, t_max)?),
            second: None,
            terms: vec![],
            linear: 0.0,
            mu: 0.0,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        self.base.spec()
    }

    pub fn antiderivative(&self) -> &Arc<Antiderivative> {
        &self.base
    }

    /// Largest argument at which `G` is tabulated.
    pub fn t_max(&self) -> f64 {
        self.base.t_max()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mut v = self.linear * t + self.base.spec().eval_f(t);
        for term in &self.terms {
            v += term.coefficient * t.powf(term.exponent);
        }
        if let Some((eps, g2)) = &self.second {
            v += eps * g2.spec().eval_f(t);
        }
        v
    }

    /// `G(t) = ∫_0^t g`, valid up to [`Composite::t_max`].
    pub fn primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mut v = 0.5 * self.linear * t * t + self.base.eval_unchecked(t);
        for term in &self.terms {
            v += term.coefficient * t.powf(term.exponent + 1.0) / (term.exponent + 1.0);
        }
        if let Some((eps, g2)) = &self.second {
            v += eps * g2.eval_unchecked(t);
        }
        v
    }

    pub fn truncate(self: &Arc<Self>, eta: f64) -> Result<TruncatedG> {
        TruncatedG::new(Arc::clone(self), eta)
    }
}

/// `g_k = g ∘ min(η, ·)`, with `G_k` continued linearly past `η`.
#[derive(Debug, Clone)]
pub struct TruncatedG {
    g: Arc<Composite>,
    eta: f64,
    g_eta: f64,
    big_g_eta: f64,
}

impl TruncatedG {
    pub fn new(g: Arc<Composite>, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid(format!("truncation level must be positive, got {eta}")));
        }
        if eta > g.t_max() {
            return Err(Error::invalid(format!(
                "truncation level {eta} exceeds the tabulated range {}",
                g.t_max()
            )));
        }
        let g_eta = g.eval(eta);
        let big_g_eta = g.primitive(eta);
        Ok(Self {
            g,
            eta,
            g_eta,
            big_g_eta,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mu(&self) -> f64 {
        self.g.mu()
    }

    pub fn composite(&self) -> &Arc<Composite> {
        &self.g
    }

    /// Truncating again at `η′` keeps the lower of the two levels.
    pub fn truncate(&self, eta: f64) -> Result<Self> {
        Self::new(Arc::clone(&self.g), self.eta.min(eta))
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= self.eta {
            self.g_eta
        } else {
            self.g.eval(t)
        }
    }

    pub fn primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= self.eta {
            self.big_g_eta + self.g_eta * (t - self.eta)
        } else {
            self.g.primitive(t)
        }
    }

    /// `sup |g_k|`, sampled densely on `[0, η]`.
    pub fn sup_abs(&self, samples: usize) -> f64 {
        let n = samples.max(2);
        (0..=n)
            .map(|i| self.eval(self.eta * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Nested negativity intervals `[δ_k, η_k]` of `g`, `k = 1..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationLadder {
    pub direction: Direction,
    pub pairs: Vec<(f64, f64)>,
}

impl TruncationLadder {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn delta(&self, k: usize) -> f64 {
        self.pairs[k].0
    }

    pub fn eta(&self, k: usize) -> f64 {
        self.pairs[k].1
    }

    /// Largest truncation level over the ladder.
    pub fn max_eta(&self) -> f64 {
        self.pairs.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn check_nesting(&self) -> Result<()> {
        for (k, &(d, e)) in self.pairs.iter().enumerate() {
            if !(0.0 < d && d < e) {
                return Err(Error::InvalidState(format!("rung {} has δ = {d} ≥ η = {e}", k + 1)));
            }
        }
        for (k, w) in self.pairs.windows(2).enumerate() {
            let ok = match self.direction {
                Direction::Origin => w[1].1 < w[0].0,
                Direction::Infinity => w[0].1 < w[1].0,
            };
            if !ok {
                return Err(Error::InvalidState(format!(
                    "rungs {} and {} are not nested: {:?} then {:?}",
                    k + 1,
                    k + 2,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanOptions {
    pub range: (f64, f64),
    pub samples_per_decade: usize,
    /// Fraction of each interval's width removed at both ends.
    pub margin: f64,
    pub certificate_samples: usize,
}

impl ScanOptions {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            range: (lo, hi),
            samples_per_decade: 20_000,
            margin: 0.01,
            certificate_samples: 1000,
        }
    }
}

/// Maximal closed intervals inside the search range on which `g ≤ 0`, in
/// increasing order. Intervals touching the range ends are dropped.
pub fn scan_sign_intervals<G: Fn(f64) -> f64>(g: G, opts: &ScanOptions) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = opts.range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid(format!("search range must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if opts.samples_per_decade == 0 {
        return Err(Error::invalid("samples_per_decade must be positive"));
    }
    let decades = (hi / lo).log10();
    let n = ((decades * opts.samples_per_decade as f64).ceil() as usize).max(2) + 1;
    let ratio = (hi / lo).ln();
    let t = |i: usize| lo * (ratio * i as f64 / (n - 1) as f64).exp();
    let neg: Vec<bool> = (0..n).map(|i| g(t(i)) <= 0.0).collect();

    let crossing = |mut pos: f64, mut negative: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (pos + negative);
            if mid == pos || mid == negative {
                break;
            }
            if g(mid) <= 0.0 {
                negative = mid;
            } else {
                pos = mid;
            }
        }
        negative
    };

    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if !neg[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && neg[i + 1] {
            i += 1;
        }
        let end = i;
        i += 1;
        if start == 0 || end == n - 1 {
            continue;
        }
        let left = crossing(t(start - 1), t(start));
        let right = crossing(t(end + 1), t(end));
        out.push((left, right));
    }
    Ok(out)
}

/// Finds `K` nested negativity intervals of `g` and certifies `g ≤ 0` on each.
pub fn scan_sign_ladder<G: Fn(f64) -> f64>(
    g: G,
    direction: Direction,
    k: usize,
    opts: &ScanOptions,
) -> Result<TruncationLadder> {
    if k == 0 {
        return Err(Error::invalid("ladder depth K must be at least 1"));
    }
    let raw = scan_sign_intervals(&g, opts)?;
    if raw.len() < k {
        return Err(Error::LadderExhausted {
            found: raw.len(),
            requested: k,
        });
    }
    let shrink = |(l, r): (f64, f64)| {
        let w = r - l;
        (l + opts.margin * w, r - opts.margin * w)
    };
    let pairs: Vec<(f64, f64)> = match direction {
        Direction::Origin => raw[..k].iter().rev().map(|&p| shrink(p)).collect(),
        Direction::Infinity => raw[raw.len() - k..].iter().map(|&p| shrink(p)).collect(),
    };
    let ladder = TruncationLadder { direction, pairs };
    ladder.check_nesting()?;
    let m = opts.certificate_samples.max(1);
    for &(d, e) in &ladder.pairs {
        for j in 0..=m {
            let t = d + (e - d) * j as f64 / m as f64;
            if g(t) > 0.0 {
                return Err(Error::LadderCertificate { t, delta: d, eta: e });
            }
        }
    }
    Ok(ladder)
}

/// Finite-sample diagnostics for the limit hypotheses; nothing here is a proof.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub scales: Vec<f64>,
    pub f_over_t_min: f64,
    pub f_over_t_max: f64,
    pub big_f_over_t2_min: f64,
    pub big_f_over_t2_max: f64,
    pub big_f_over_t2: Vec<f64>,
    /// Points near each scale with `f < 0`.
    pub witnesses: Vec<f64>,
    /// `min f(t)/t` over the witnesses (the `l₀` or `l_∞` proxy), or 0.
    pub l_proxy: f64,
    pub negativity_witnessed: bool,
    /// `F/t²` at the last scale exceeds its value at the first one.
    pub growth_witnessed: bool,
}

pub fn validate_hypotheses(spec: &NonlinearitySpec, scales: &[f64]) -> Result<HypothesisReport> {
    if scales.is_empty() || scales.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("scales must be positive and finite"));
    }
    let t_max = scales.iter().copied().fold(0.0, f64::max) * 2.5;
    let table = Antiderivative::build(spec, t_max)?;
    let f_over_t: Vec<f64> = scales.iter().map(|&t| spec.eval_f(t) / t).collect();
    let big: Vec<f64> = scales
        .iter()
        .map(|&t| table.eval_unchecked(t) / (t * t))
        .collect();
    let mut witnesses = Vec::new();
    for &t in scales {
        if let Some(w) = negativity_witness(spec, t) {
            witnesses.push(w);
        }
    }
    let l_proxy = witnesses
        .iter()
        .map(|&w| spec.eval_f(w) / w)
        .fold(0.0, f64::min);
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(HypothesisReport {
        scales: scales.to_vec(),
        f_over_t_min: min(&f_over_t),
        f_over_t_max: max(&f_over_t),
        big_f_over_t2_min: min(&big),
        big_f_over_t2_max: max(&big),
        growth_witnessed: big.len() > 1 && big[big.len() - 1] > big[0],
        big_f_over_t2: big,
        negativity_witnessed: !witnesses.is_empty(),
        witnesses,
        l_proxy,
    })
}

/// A point near `t` where `f` is most negative: the nearest phase `3π/2 mod 2π`
/// for the oscillatory families, dense sampling of `[t/2, 2t]` for tables.
fn negativity_witness(spec: &NonlinearitySpec, t: f64) -> Option<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let trough = |phase: f64| {
        let m = ((phase - 1.5 * std::f64::consts::PI) / two_pi).round().max(0.0);
        1.5 * std::f64::consts::PI + two_pi * m
    };
    let w = match *spec {
        NonlinearitySpec::Origin { beta, .. } => trough(t.powf(-beta)).powf(-1.0 / beta),
        NonlinearitySpec::Infinity { beta, .. } => trough(t.powf(beta)).powf(1.0 / beta),
        NonlinearitySpec::Table { .. } => {
            let n = 4000;
            (0..=n)
                .map(|i| 0.5 * t * 4f64.powf(i as f64 / n as f64))
                .min_by(|a, b| spec.eval_f(*a).total_cmp(&spec.eval_f(*b)))?
        }
    };
    (spec.eval_f(w) < 0.0).then_some(w)
}

/// Default scales for the hypothesis diagnostics in each direction.
pub fn default_scales(direction: Direction) -> Vec<f64> {
    match direction {
        Direction::Origin => (1..=6).map(|k| 10f64.powi(-k)).collect(),
        Direction::Infinity => (1..=4).map(|k| 10f64.powi(k)).collect(),
    }
}

/// Midpoint of `(λ₀, −l)` with `l` the measured `liminf f(t)/t` proxy.
pub fn default_linear_coefficient(spec: &NonlinearitySpec, direction: Direction, lambda0: f64) -> Result<f64> {
    let report = validate_hypotheses(spec, &default_scales(direction))?;
    let upper = -report.l_proxy;
    if !(upper > lambda0) {
        return Err(Error::invalid(format!(
            "cannot choose λ̃ in (λ₀, −l) = ({lambda0}, {upper}): interval is empty"
        )));
    }
    Ok(0.5 * (lambda0 + upper))
}
