//! Truncated energy `E_k(u) = ½‖u‖²_X + (μ/2)‖u‖²_{L²} − ∫ G_k(u)`, its
//! gradient, the coercivity lower bound and the plateau bump.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, NodalVector};
use crate::nonlinearity::TruncatedG;
use crate::operator::{assemble_mass, MassKind, MassMatrix, StiffnessForm};

/// Samples used to estimate `sup |g_k|` on `[0, η]`.
pub const SUP_SAMPLES: usize = 20_000;

#[derive(Debug, Clone)]
pub struct EnergyModel {
    stiffness: Arc<StiffnessForm>,
    mass: MassMatrix,
    g: TruncatedG,
    mu: f64,
}

impl EnergyModel {
    /// Model with the shift `μ` taken from the composite nonlinearity.
    pub fn new(stiffness: Arc<StiffnessForm>, g: TruncatedG) -> Result<Self> {
        let mu = g.mu();
        Self::with_mu(stiffness, g, mu)
    }

    pub fn with_mu(stiffness: Arc<StiffnessForm>, g: TruncatedG, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::invalid(format!("μ must be non-negative, got {mu}")));
        }
        let mass = assemble_mass(stiffness.grid(), MassKind::Consistent);
        Ok(Self {
            stiffness,
            mass,
            g,
            mu,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.stiffness.grid()
    }

    pub fn stiffness(&self) -> &Arc<StiffnessForm> {
        &self.stiffness
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn nonlinearity(&self) -> &TruncatedG {
        &self.g
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta(&self) -> f64 {
        self.g.eta()
    }

    pub fn energy(&self, u: &NodalVector) -> f64 {
        self.energy_values(u.values())
    }

    pub fn gradient(&self, u: &NodalVector) -> NodalVector {
        NodalVector::from_parts_unchecked(*self.grid(), self.gradient_values(u.values()))
    }

    pub fn energy_values(&self, u: &DVector<f64>) -> f64 {
        let au = self.stiffness.matrix() * u;
        let mu_term = self.mass.matrix() * u;
        self.combine(u, &au, &mu_term)
    }

    fn combine(&self, u: &DVector<f64>, au: &DVector<f64>, mu_term: &DVector<f64>) -> f64 {
        let h = self.grid().spacing();
        let nonlinear: f64 = u.iter().map(|&t| self.g.primitive(t)).sum();
        0.5 * u.dot(au) + 0.5 * self.mu * u.dot(mu_term) - h * nonlinear
    }

    pub fn gradient_values(&self, u: &DVector<f64>) -> DVector<f64> {
        self.energy_and_gradient(u).1
    }

    /// Energy and gradient sharing the matrix–vector products.
    pub fn energy_and_gradient(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let h = self.grid().spacing();
        let au = self.stiffness.matrix() * u;
        let mu_term = self.mass.matrix() * u;
        let e = self.combine(u, &au, &mu_term);
        let mut grad = au + self.mu * mu_term;
        for (gi, &t) in grad.iter_mut().zip(u.iter()) {
            *gi -= h * self.g.eval(t);
        }
        (e, grad)
    }

    /// `−½ (C₁ · sup|g_k| · |Ω|^{1/2})²`, a lower bound of the discrete energy.
    pub fn lower_bound(&self) -> f64 {
        let sup = self.g.sup_abs(SUP_SAMPLES);
        if sup == 0.0 {
            return 0.0;
        }
        let c = self.stiffness.embedding_constant() * sup * self.grid().measure().sqrt();
        -0.5 * c * c
    }
}

/// Worst relative mismatch between the analytic directional derivative and a
/// central difference of step `eps` over `pairs` seeded random pairs with
/// `u ∈ [0.25η, 0.95η]ⁿ` and `v ∈ [−η, η]ⁿ`.
pub fn gradient_check(model: &EnergyModel, pairs: usize, eps: f64, seed: u64) -> f64 {
    let n = model.grid().n_interior();
    let eta = model.eta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let u = DVector::from_fn(n, |_, _| rng.random_range(0.25 * eta..0.95 * eta));
        let v = DVector::from_fn(n, |_, _| rng.random_range(-eta..eta));
        let fd = (model.energy_values(&(&u + eps * &v)) - model.energy_values(&(&u - eps * &v))) / (2.0 * eps);
        let an = model.gradient_values(&u).dot(&v);
        worst = worst.max(((fd - an) / an).abs());
    }
    worst
}

/// Plateau bump: height `ζ` on `|x − c| ≤ R`, linear ramp to zero at `2R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub radius: f64,
    pub height: f64,
    pub center: f64,
}

impl BumpSpec {
    /// Largest admissible radius `R = L/2`, centered at the origin.
    pub fn centered(grid: &Grid, height: f64) -> Self {
        Self {
            radius: grid.half_width() / 2.0,
            height,
            center: 0.0,
        }
    }

    pub fn profile(&self, x: f64) -> f64 {
        let d = (x - self.center).abs();
        let r = self.radius;
        if d <= r {
            self.height
        } else if d <= 2.0 * r {
            self.height * (2.0 * r - d) / r
        } else {
            0.0
        }
    }
}

pub fn build_bump(grid: &Grid, bump: &BumpSpec) -> Result<NodalVector> {
    if !(bump.radius > 0.0 && bump.height.is_finite() && bump.center.is_finite()) {
        return Err(Error::invalid(format!("invalid bump {bump:?}")));
    }
    let room = grid.half_width() - bump.center.abs();
    if 2.0 * bump.radius > room * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "bump support [{}, {}] leaves the domain",
            bump.center - 2.0 * bump.radius,
            bump.center + 2.0 * bump.radius
        )));
    }
    grid.interpolate(|x| bump.profile(x))
}

/// `z₁ᵀ A z₁` for the unit-height centered bump of radius `R`.
pub fn bump_energy_constant(stiffness: &StiffnessForm, radius: f64) -> Result<f64> {
    let unit = build_bump(
        stiffness.grid(),
        &BumpSpec {
            radius,
            height: 1.0,
            center: 0.0,
        },
    )?;
    Ok(stiffness.seminorm_squared(&unit))
}

/// Energies of the scaled bumps `ζ z₁` without matrix products:
/// `E(ζ z₁) = ζ²/2 (z₁ᵀAz₁ + μ z₁ᵀMz₁) − h Σ G_k(ζ z₁ᵢ)`.
#[derive(Debug, Clone)]
pub struct BumpFamily {
    unit: NodalVector,
    quadratic: f64,
}

impl BumpFamily {
    pub fn new(model: &EnergyModel, radius: f64, center: f64) -> Result<Self> {
        let unit = build_bump(
            model.grid(),
            &BumpSpec {
                radius,
                height: 1.0,
                center,
            },
        )?;
        let quadratic =
            model.stiffness().seminorm_squared(&unit) + model.mu() * model.mass().quadratic(&unit);
        Ok(Self { unit, quadratic })
    }

    pub fn unit(&self) -> &NodalVector {
        &self.unit
    }

    pub fn energy(&self, model: &EnergyModel, zeta: f64) -> f64 {
        let h = model.grid().spacing();
        let g = model.nonlinearity();
        let nonlinear: f64 = self.unit.as_slice().iter().map(|&z| g.primitive(zeta * z)).sum();
        0.5 * zeta * zeta * self.quadratic - h * nonlinear
    }

    /// Height in `(0, ζ_max]` with the lowest bump energy, by a log-spaced scan
    /// followed by golden-section refinement around the best sample.
    pub fn best_height(&self, model: &EnergyModel, zeta_max: f64, samples: usize) -> (f64, f64) {
        let n = samples.max(8);
        let lo = zeta_max * 1e-3;
        let ratio = (zeta_max / lo).ln();
        let z = |i: usize| lo * (ratio * i as f64 / (n - 1) as f64).exp();
        let mut best = (zeta_max, self.energy(model, zeta_max));
        let mut best_i = n - 1;
        for i in 0..n {
            let zi = z(i).min(zeta_max);
            let e = self.energy(model, zi);
            if e < best.1 {
                best = (zi, e);
                best_i = i;
            }
        }
        let (mut a, mut b) = (z(best_i.saturating_sub(1)), z((best_i + 1).min(n - 1)).min(zeta_max));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            let (ec, ed) = (self.energy(model, c), self.energy(model, d));
            if ec < best.1 {
                best = (c, ec);
            }
            if ed < best.1 {
                best = (d, ed);
            }
            if ec < ed {
                b = d;
            } else {
                a = c;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{Composite, Construction, NonlinearitySpec};
    use crate::operator::{assemble_stiffness, QuadratureConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stiffness(n: usize) -> Arc<StiffnessForm> {
        let g = Grid::new(1.0, n).unwrap();
        Arc::new(assemble_stiffness(&g, 0.4, &QuadratureConfig::default()).unwrap())
    }

    fn zero_g() -> TruncatedG {
        Arc::new(Composite::zero(2.0).unwrap()).truncate(1.0).unwrap()
    }

    fn origin_model(n: usize) -> EnergyModel {
        let spec = NonlinearitySpec::Origin {
            alpha: 0.5,
            beta: 1.0,
            a: 0.5,
        };
        let c = Composite::compose(
            &spec,
            &Construction::OriginPower {
                lambda: 0.0,
                p: 0.5,
                lambda0: 0.1,
            },
            0.1,
        )
        .unwrap();
        EnergyModel::new(stiffness(n), Arc::new(c).truncate(0.05).unwrap()).unwrap()
    }

    #[test]
    fn energy_of_zero_is_zero() {
        let m = origin_model(17);
        assert_eq!(m.energy(&m.grid().zeros()), 0.0);
        assert!(m.gradient(&m.grid().zeros()).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quadratic_model_without_nonlinearity() {
        let a = stiffness(17);
        let m = EnergyModel::with_mu(a.clone(), zero_g(), 1.0).unwrap();
        let u = m.grid().interpolate(|x| 0.3 * (1.0 - x * x)).unwrap();
        let e = m.energy(&u);
        let expect = 0.5 * a.seminorm_squared(&u) + 0.5 * m.mass().quadratic(&u);
        assert!((e - expect).abs() < 1e-14 * expect);
        assert!(e > 0.0);
        let m0 = EnergyModel::with_mu(a.clone(), zero_g(), 0.0).unwrap();
        let grad = m0.gradient(&u);
        let au = a.matrix() * u.values();
        for (g, v) in grad.as_slice().iter().zip(au.iter()) {
            assert_eq!(*g, *v);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = origin_model(33);
        let worst = gradient_check(&m, 20, 1e-5, 5);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn lower_bound_contains_sampled_energies() {
        let m = origin_model(33);
        let lb = m.lower_bound();
        assert!(lb < 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let u = DVector::from_fn(33, |_, _| rng.random_range(0.0..m.eta()));
            assert!(m.energy_values(&u) >= lb);
        }
        let zero = EnergyModel::with_mu(stiffness(9), zero_g(), 0.0).unwrap();
        assert_eq!(zero.lower_bound(), 0.0);
    }

    #[test]
    fn coercivity_along_a_ray() {
        let m = origin_model(33);
        let dir = m.grid().interpolate(|x| (1.0 - x * x).max(0.0)).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for scale in [1e3, 2e3, 4e3, 8e3] {
            let e = m.energy(&dir.scaled(scale));
            assert!(e > 0.0 && e > prev);
            prev = e;
        }
    }

    #[test]
    fn bump_profile_branches() {
        let b = BumpSpec {
            radius: 0.25,
            height: 0.5,
            center: 0.0,
        };
        assert_eq!(b.profile(0.0), 0.5);
        assert!((b.profile(0.375) - 0.25).abs() < 1e-15);
        assert_eq!(b.profile(0.5), 0.0);
        assert_eq!(b.profile(-0.7), 0.0);
        let g = Grid::new(1.0, 7).unwrap();
        let too_wide = BumpSpec {
            radius: 0.3,
            height: 1.0,
            center: 0.5,
        };
        assert!(build_bump(&g, &too_wide).is_err());
    }

    #[test]
    fn bump_constant_is_homogeneous() {
        let a = stiffness(65);
        let c = bump_energy_constant(&a, BumpSpec::centered(a.grid(), 1.0).radius).unwrap();
        assert!(c > 0.0);
        for zeta in [0.1, 0.01, 0.001] {
            let z = build_bump(a.grid(), &BumpSpec::centered(a.grid(), zeta)).unwrap();
            let ratio = a.seminorm_squared(&z) / (zeta * zeta);
            assert!(((ratio - c) / c).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_family_matches_full_energy() {
        let m = origin_model(33);
        let fam = BumpFamily::new(&m, 0.25, 0.0).unwrap();
        for zeta in [0.001, 0.01, 0.04] {
            let full = m.energy(&fam.unit().scaled(zeta));
            let fast = fam.energy(&m, zeta);
            assert!((full - fast).abs() < 1e-13 * full.abs().max(1e-12));
        }
        let (z, e) = fam.best_height(&m, m.eta(), 400);
        assert!(z > 0.0 && z <= m.eta());
        assert!(e <= fam.energy(&m, m.eta()));
    }
}
