//! Real-valued samples on a torus grid.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::par;

/// Real samples of a scalar function on a [`TorusGrid`]. Values are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps `values`, checking the length and that every value is finite.
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(ScalarField { grid, values })
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_vec_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    /// Samples `f` at every grid point. `f` receives `[x₁, x₂, x₃]` with unused
    /// axes set to 0.
    pub fn from_fn<F>(grid: TorusGrid, f: F) -> Result<Self>
    where
        F: Fn([f64; 3]) -> f64 + Sync + Send,
    {
        let values = par::map_range(grid.len(), |i| f(grid.point(i)));
        ScalarField::new(grid, values)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        ScalarField::from_vec_unchecked(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫ f` by the rectangle rule (equal to the mean on the unit torus).
    pub fn integral(&self) -> f64 {
        par::sum(&self.values) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.integral()
    }

    pub fn max_abs(&self) -> f64 {
        par::max_by(self.values.len(), |i| self.values[i].abs())
    }

    pub fn min(&self) -> f64 {
        -par::max_by(self.values.len(), |i| -self.values[i])
    }

    pub fn max(&self) -> f64 {
        par::max_by(self.values.len(), |i| self.values[i])
    }

    /// Pointwise map.
    pub fn map<F>(&self, f: F) -> ScalarField
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let values = par::map_range(self.values.len(), |i| f(self.values[i]));
        ScalarField::from_vec_unchecked(self.grid, values)
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<F>(&self, other: &ScalarField, f: F) -> Result<ScalarField>
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        self.check_grid(other.grid())?;
        let values = par::map_range(self.values.len(), |i| f(self.values[i], other.values[i]));
        Ok(ScalarField::from_vec_unchecked(self.grid, values))
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        self.map(|v| alpha * v)
    }

    /// `∫ f g`.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.check_grid(other.grid())?;
        Ok(par::sum_by(self.values.len(), |i| self.values[i] * other.values[i]) * self.grid.cell_volume())
    }

    pub(crate) fn check_grid(&self, other: &TorusGrid) -> Result<()> {
        if &self.grid != other {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other)));
        }
        Ok(())
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    /// Panics on grid mismatch; use [`ScalarField::zip_with`] for a checked version.
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a * b).expect("grid mismatch in field product")
    }
}

/// A `d`-component vector field on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    components: Vec<ScalarField>,
    divergence_free: bool,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::GridMismatch("vector field without components".into()));
        };
        let grid = *first.grid();
        if components.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "{} components on a {}-dimensional grid",
                components.len(),
                grid.dim()
            )));
        }
        for c in &components {
            c.check_grid(&grid)?;
        }
        Ok(VectorField {
            grid,
            components,
            divergence_free: false,
        })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        VectorField {
            grid,
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
            divergence_free: true,
        }
    }

    pub fn constant(grid: TorusGrid, c: &[f64]) -> Result<Self> {
        if c.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "constant vector of length {} on a {}-dimensional grid",
                c.len(),
                grid.dim()
            )));
        }
        let mut v = VectorField::new(c.iter().map(|&x| ScalarField::constant(grid, x)).collect())?;
        v.divergence_free = true;
        Ok(v)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Whether the field carries the (verified) divergence-free tag.
    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub(crate) fn set_divergence_free(&mut self, flag: bool) {
        self.divergence_free = flag;
    }

    /// Pointwise Euclidean magnitude `|v(x)|`.
    pub fn magnitude(&self) -> ScalarField {
        let values = par::map_range(self.grid.len(), |i| {
            self.components
                .iter()
                .map(|c| c.values[i] * c.values[i])
                .sum::<f64>()
                .sqrt()
        });
        ScalarField::from_vec_unchecked(self.grid, values)
    }

    /// Largest component modulus over the grid.
    pub fn max_component_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// Pointwise `v · w`.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        self.components[0].check_grid(other.grid())?;
        let values = par::map_range(self.grid.len(), |i| {
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.values[i] * b.values[i])
                .sum::<f64>()
        });
        Ok(ScalarField::from_vec_unchecked(self.grid, values))
    }

    /// Pointwise product `v f` with a scalar field.
    pub fn times_scalar(&self, f: &ScalarField) -> Result<VectorField> {
        let comps = self
            .components
            .iter()
            .map(|c| c.zip_with(f, |a, b| a * b))
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(comps)
    }

    pub fn scale(&self, alpha: f64) -> VectorField {
        VectorField {
            grid: self.grid,
            components: self.components.iter().map(|c| c.scale(alpha)).collect(),
            divergence_free: self.divergence_free,
        }
    }

    /// Whether every value is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.values.iter().all(|&v| v == 0.0))
    }
}
