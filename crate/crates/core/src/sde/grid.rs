use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform partition of `[0, T]` into `steps` subintervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    horizon: T,
    steps: usize,
    dt: T,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(horizon: T, steps: usize) -> Result<Self> {
        if horizon <= T::zero() || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        Ok(Self { horizon, steps, dt: horizon / T::from_usize_lossy(steps) })
    }

    #[inline]
    pub fn horizon(&self) -> T {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.dt
    }

    /// `t_j = j·dt`, with the last node pinned to the horizon.
    #[inline]
    pub fn node(&self, j: usize) -> T {
        debug_assert!(j <= self.steps);
        if j == self.steps {
            self.horizon
        } else {
            T::from_usize_lossy(j) * self.dt
        }
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..=self.steps).map(|j| self.node(j)).collect()
    }

    /// Same horizon and step count.
    pub fn matches(&self, other: &TimeGrid<T>) -> bool {
        self.steps == other.steps && self.horizon == other.horizon
    }
}

/// Convenience constructor mirroring [`TimeGrid::new`].
pub fn build_time_grid<T: Scalar>(horizon: T, steps: usize) -> Result<TimeGrid<T>> {
    TimeGrid::new(horizon, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_hundred_steps() {
        let g = build_time_grid(1.0_f64, 100).unwrap();
        assert_eq!(g.dt(), 0.01);
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 101);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[100], 1.0);
        assert!((nodes[37] - 0.37).abs() < 1e-15);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn single_interval() {
        let g = build_time_grid(1.0_f64, 1).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 1.0]);
        assert_eq!(g.dt(), 1.0);
    }

    #[test]
    fn half_horizon_two_hundred_steps() {
        let g = build_time_grid(0.5_f64, 200).unwrap();
        assert_eq!(g.dt(), 0.0025);
        assert!((g.node(200) - 0.5).abs() <= f64::EPSILON * 0.5);
        assert!((g.node(199) + g.dt() - 0.5).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_time_grid(0.0_f64, 10).is_err());
        assert!(build_time_grid(-1.0_f64, 10).is_err());
        assert!(build_time_grid(1.0_f64, 0).is_err());
        assert!(build_time_grid(f64::NAN, 10).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let g = build_time_grid(1.0_f32, 10).unwrap();
        assert_eq!(g.node(10), 1.0_f32);
    }
}
