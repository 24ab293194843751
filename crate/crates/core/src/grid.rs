//! Uniform grid on `(-L, L)` with an implicit zero extension outside.
//!
//! A [`NodalVector`] stores one value per interior node and stands for the
//! continuous piecewise-linear function through those values that vanishes at
//! `±L` and on the rest of the real line.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n_interior: usize,
    spacing: f64,
}

impl Grid {
    pub fn new(half_width: f64, n_interior: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(format!(
                "half-width must be positive and finite, got {half_width}"
            )));
        }
        if n_interior < 3 {
            return Err(Error::invalid(format!(
                "need at least 3 interior nodes, got {n_interior}"
            )));
        }
        let spacing = 2.0 * half_width / (n_interior + 1) as f64;
        Ok(Self {
            half_width,
            n_interior,
            spacing,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Node spacing `h = 2L / (n + 1)`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of elements, counting the two boundary elements.
    pub fn n_elements(&self) -> usize {
        self.n_interior + 1
    }

    /// Measure of the domain, `2L`.
    pub fn measure(&self) -> f64 {
        2.0 * self.half_width
    }

    /// Coordinate of node `i`, with `i = 0` and `i = n + 1` the boundary points.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    /// Coordinates of the interior nodes, in increasing order.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n_interior).map(|i| self.coordinate(i)).collect()
    }

    pub fn zeros(&self) -> NodalVector {
        NodalVector {
            grid: *self,
            values: DVector::zeros(self.n_interior),
        }
    }

    pub fn interpolate<F>(&self, f: F) -> Result<NodalVector>
    where
        F: Fn(f64) -> f64,
    {
        let mut values = DVector::zeros(self.n_interior);
        for (k, x) in self.nodes().into_iter().enumerate() {
            let value = f(x);
            if !value.is_finite() {
                return Err(Error::Evaluation {
                    node: k + 1,
                    x,
                    value,
                });
            }
            values[k] = value;
        }
        Ok(NodalVector { grid: *self, values })
    }

    /// Value at `x` of the piecewise-linear function with nodal values `values`,
    /// zero outside the domain.
    pub fn evaluate(&self, values: &[f64], x: f64) -> f64 {
        let t = (x + self.half_width) / self.spacing;
        if !(t > 0.0 && t < (self.n_interior + 1) as f64) {
            return 0.0;
        }
        let left = t.floor() as usize;
        let frac = t - left as f64;
        let node = |i: usize| {
            if i == 0 || i > self.n_interior {
                0.0
            } else {
                values[i - 1]
            }
        };
        (1.0 - frac) * node(left) + frac * node(left + 1)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_interior {
            return Err(Error::invalid(format!(
                "vector has {len} entries but the grid has {} interior nodes",
                self.n_interior
            )));
        }
        Ok(())
    }
}

/// Nodal values of a piecewise-linear function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodalVector {
    grid: Grid,
    values: DVector<f64>,
}

impl NodalVector {
    pub fn new(grid: Grid, values: DVector<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                node: node + 1,
                x: grid.coordinate(node + 1),
                value: values[node],
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_slice(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, DVector::from_column_slice(values))
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: DVector<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_interior());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sup norm. Exact for piecewise-linear functions since extrema sit at nodes.
    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: &self.values * c,
        }
    }

    /// Sup-norm distance to another vector on the same grid.
    pub fn linf_distance(&self, other: &NodalVector) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_node_grid() {
        let g = Grid::new(1.0, 3).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.nodes(), vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn fine_grid_spacing() {
        let g = Grid::new(1.0, 255).unwrap();
        assert_eq!(g.spacing(), 0.0078125);
        let nodes = g.nodes();
        assert!(nodes[0] > -1.0 && *nodes.last().unwrap() < 1.0);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(Grid::new(0.0, 10), Err(Error::InvalidArgument(_))));
        assert!(matches!(Grid::new(-1.0, 10), Err(Error::InvalidArgument(_))));
        assert!(matches!(Grid::new(1.0, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn interpolation() {
        let g = Grid::new(1.0, 3).unwrap();
        let tent = g.interpolate(|x| 1.0 - x.abs()).unwrap();
        assert_eq!(tent.as_slice(), &[0.5, 1.0, 0.5]);
        let lin = g.interpolate(|x| x).unwrap();
        assert_eq!(lin.as_slice(), &[-0.5, 0.0, 0.5]);
        let zero = g.interpolate(|_| 0.0).unwrap();
        assert_eq!(zero.linf_norm(), 0.0);
    }

    #[test]
    fn interpolation_reports_bad_node() {
        let g = Grid::new(1.0, 3).unwrap();
        let err = g.interpolate(|x| 1.0 / x).unwrap_err();
        assert!(matches!(err, Error::Evaluation { node: 2, .. }));
    }

    #[test]
    fn linf_examples() {
        let g = Grid::new(1.0, 3).unwrap();
        let v = |s: &[f64]| NodalVector::from_slice(g, s).unwrap().linf_norm();
        assert_eq!(v(&[0.5, 1.0, 0.5]), 1.0);
        assert_eq!(v(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(v(&[-2.0, 1.0, 0.0]), 2.0);
    }

    #[test]
    fn evaluate_matches_nodes_and_vanishes_outside() {
        let g = Grid::new(1.0, 3).unwrap();
        let vals = [0.5, 1.0, 0.5];
        assert_eq!(g.evaluate(&vals, 0.0), 1.0);
        assert_eq!(g.evaluate(&vals, 0.25), 0.75);
        assert_eq!(g.evaluate(&vals, -0.75), 0.25);
        assert_eq!(g.evaluate(&vals, 1.0), 0.0);
        assert_eq!(g.evaluate(&vals, -3.0), 0.0);
    }

    proptest! {
        #[test]
        fn linf_is_absolutely_homogeneous(
            vals in proptest::collection::vec(-10.0..10.0f64, 5),
            c in -5.0..5.0f64,
        ) {
            let g = Grid::new(1.0, 5).unwrap();
            let u = NodalVector::from_slice(g, &vals).unwrap();
            let lhs = u.scaled(c).linf_norm();
            let rhs = c.abs() * u.linf_norm();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn interpolated_max_is_nodal_max(shift in -0.9..0.9f64) {
            let g = Grid::new(1.0, 31).unwrap();
            let f = |x: f64| 1.0 - (x - shift).abs();
            let u = g.interpolate(f).unwrap();
            let nodal_max = g.nodes().into_iter().map(|x| f(x).abs()).fold(0.0, f64::max);
            prop_assert_eq!(u.linf_norm(), nodal_max);
        }
    }
}
