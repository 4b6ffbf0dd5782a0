use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closed convex set of admissible control values in `R^k`.
#[derive(Clone, Debug, PartialEq)]
pub enum AdmissibleSet<T> {
    Unbounded {
        dim: usize,
    },
    /// Componentwise box; bounds may be infinite.
    Box {
        lower: Vec<T>,
        upper: Vec<T>,
    },
}

impl<T: Scalar> AdmissibleSet<T> {
    pub fn unbounded(dim: usize) -> Self {
        Self::Unbounded { dim }
    }

    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidArgument("box bounds differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::InvalidArgument("box requires lower <= upper componentwise".into()));
        }
        Ok(Self::Box { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Unbounded { dim } => *dim,
            Self::Box { lower, .. } => lower.len(),
        }
    }

    /// Euclidean projection of one control value, in place.
    pub fn project_point(&self, v: &mut [T]) {
        if let Self::Box { lower, upper } = self {
            for ((x, &lo), &hi) in v.iter_mut().zip(lower).zip(upper) {
                *x = x.max(lo).min(hi);
            }
        }
    }

    pub fn contains(&self, v: &[T]) -> bool {
        match self {
            Self::Unbounded { .. } => true,
            Self::Box { lower, upper } => v.iter().zip(lower).zip(upper).all(|((x, lo), hi)| x >= lo && x <= hi),
        }
    }
}
