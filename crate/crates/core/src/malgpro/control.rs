use crate::error::{Error, Result};
use crate::malgpro::AdmissibleSet;
use crate::scalar::Scalar;
use crate::sde::TimeGrid;

/// Deterministic piecewise-constant control: `values[j]` applies on `[t_j, t_{j+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseControl<T: Scalar> {
    grid: TimeGrid<T>,
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> PiecewiseControl<T> {
    pub fn zeros(grid: TimeGrid<T>, dim: usize) -> Self {
        Self { grid, dim, values: vec![T::zero(); grid.steps() * dim] }
    }

    /// Row-major `N × k` values.
    pub fn from_values(grid: TimeGrid<T>, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || values.len() != grid.steps() * dim {
            return Err(Error::InvalidArgument(format!("control needs {}x{} values, got {}", grid.steps(), dim, values.len())));
        }
        Ok(Self { grid, dim, values })
    }

    /// Samples `f(t_j)` at the left endpoint of every interval.
    pub fn from_fn(grid: TimeGrid<T>, dim: usize, f: impl Fn(T) -> Vec<T>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.steps() * dim);
        for j in 0..grid.steps() {
            let v = f(grid.node(j));
            if v.len() != dim {
                return Err(Error::InvalidArgument("control function returned wrong dimension".into()));
            }
            values.extend(v);
        }
        Ok(Self { grid, dim, values })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, j: usize) -> &[T] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_admissible(&self, set: &AdmissibleSet<T>) -> bool {
        (0..self.grid.steps()).all(|j| set.contains(self.at(j)))
    }

    /// `Σ_j ‖u_j − v_j‖² dt`.
    pub fn squared_distance(&self, other: &PiecewiseControl<T>) -> Result<T> {
        if !self.grid.matches(&other.grid) || self.dim != other.dim {
            return Err(Error::InvalidArgument("controls live on different grids".into()));
        }
        let s: T = self.values.iter().zip(&other.values).map(|(&a, &b)| (a - b) * (a - b)).sum();
        Ok(s * self.grid.dt())
    }

    pub fn sup_distance(&self, other: &PiecewiseControl<T>) -> Result<T> {
        if !self.grid.matches(&other.grid) || self.dim != other.dim {
            return Err(Error::InvalidArgument("controls live on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }
}
