//! The benchmark problems, their reference controls and the control-error metric.

mod lq;
mod scalar;
mod vector;

use std::fmt;
use std::sync::Arc;

pub use lq::{lq_matrices, lq_problem, riccati_oracle, Lq, RiccatiSolution};
pub use scalar::{scalar_blackscholes, scalar_sqrt_diffusion, BlackScholes, SqrtDiffusion};
pub use vector::{vector_nonlinear, vector_nonlinear_with, vector_tracking, Nonlinear, Tracking};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::malgpro::PiecewiseControl;
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, TimeGrid};

/// Registry identifiers, in a fixed order.
pub const REGISTRY: [&str; 5] = ["scalar-bs", "scalar-sqrt", "vector-tracking", "vector-nonlinear", "lq"];

/// Default LQ size and matrix seed used by the registry.
pub const LQ_DEFAULT_DIM: usize = 10;
pub const LQ_DEFAULT_SEED: u64 = 0;

/// A known optimal control.
#[derive(Clone)]
pub enum ReferenceControl<T: Scalar> {
    /// Closed form `t ↦ u(t)`.
    Analytic { dim: usize, f: Arc<dyn Fn(T) -> Vec<T> + Send + Sync> },
    /// Open-loop LQ optimum from the backward Riccati equation.
    Riccati { a: Mat<T>, b: Mat<T>, q: Mat<T>, r: Mat<T>, x0: Vec<T> },
}

impl<T: Scalar> fmt::Debug for ReferenceControl<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Analytic { dim, .. } => f.debug_struct("Analytic").field("dim", dim).finish_non_exhaustive(),
            Self::Riccati { .. } => f.write_str("Riccati"),
        }
    }
}

impl<T: Scalar> ReferenceControl<T> {
    pub fn analytic(dim: usize, f: impl Fn(T) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self::Analytic { dim, f: Arc::new(f) }
    }

    /// The reference sampled at the left endpoint of every grid interval.
    pub fn on_grid(&self, grid: &TimeGrid<T>) -> Result<PiecewiseControl<T>> {
        match self {
            Self::Analytic { dim, f } => PiecewiseControl::from_fn(*grid, *dim, |t| f(t)),
            Self::Riccati { a, b, q, r, x0 } => Ok(riccati_oracle(a, b, q, r, x0, grid)?.control),
        }
    }
}

/// A named problem with an optional reference control.
#[derive(Clone, Debug)]
pub struct BenchmarkProblem<T: Scalar> {
    pub name: &'static str,
    pub problem: ControlProblem<T>,
    pub reference: Option<ReferenceControl<T>>,
    pub notes: String,
}

impl<T: Scalar> BenchmarkProblem<T> {
    /// Reference control on the `steps`-interval grid over the problem horizon.
    pub fn reference_on(&self, steps: usize) -> Result<Option<PiecewiseControl<T>>> {
        let grid = TimeGrid::new(self.problem.horizon(), steps)?;
        self.reference.as_ref().map(|r| r.on_grid(&grid)).transpose()
    }
}

/// Looks up a registry identifier with default parameters.
pub fn by_name<T: Scalar>(id: &str) -> Result<BenchmarkProblem<T>> {
    match id {
        "scalar-bs" => scalar_blackscholes(),
        "scalar-sqrt" => scalar_sqrt_diffusion(),
        "vector-tracking" => vector_tracking(),
        "vector-nonlinear" => vector_nonlinear(),
        "lq" => lq_problem(LQ_DEFAULT_DIM, LQ_DEFAULT_SEED),
        other => Err(Error::InvalidArgument(format!("unknown problem `{other}`; valid ids: {}", REGISTRY.join(", ")))),
    }
}

/// `E_c = Σ_j ‖u_{t_j} − u_ref(t_j)‖² dt` over the control's grid.
pub fn control_error<T: Scalar>(u: &PiecewiseControl<T>, u_ref: impl Fn(T) -> Vec<T>) -> Result<T> {
    let grid = u.grid();
    let mut total = T::zero();
    for j in 0..grid.steps() {
        let r = u_ref(grid.node(j));
        if r.len() != u.dim() {
            return Err(Error::InvalidArgument("reference control has the wrong dimension".into()));
        }
        total += u.at(j).iter().zip(&r).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
    }
    Ok(total * grid.dt())
}
