//! Stochastic flows `Γ_{s,t}` of the controlled SDE and the Malliavin derivatives
//! `D_s x_t = Γ_{s,t} B(x_s)` built from them.

mod malliavin;
mod propagate;

use rayon::prelude::*;

pub use malliavin::{
    explicit_quotient, malliavin_derivative, scalar_flow_ratio, scalar_malliavin_closed_form, MalliavinSlice, DIFFUSION_FLOOR,
};
pub(crate) use propagate::factorized_from_generators;
pub use propagate::{
    propagate_flow_factorized, propagate_flow_from, step_generator, step_generators, DenseFlow, FactorizedFlow, CONDITION_LIMIT,
};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::malgpro::PiecewiseControl;
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, PathBundle, TimeGrid};

/// How flows are stored and queried.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FlowMode {
    /// `Y_t` and `Z_t` per node, `Γ_{s,t} = Y_t Z_s`.
    #[default]
    Factorized,
    /// `Γ_{r,j}` propagated separately from every anchor.
    Dense,
}

/// Flow of a single path in either representation.
#[derive(Clone, Debug, PartialEq)]
pub enum PathFlow<T> {
    Factorized(FactorizedFlow<T>),
    Dense(DenseFlow<T>),
}

impl<T: Scalar> PathFlow<T> {
    /// Factorized flow, or dense flow if the conditioning guard trips.
    pub fn build(
        problem: &ControlProblem<T>,
        path: &crate::sde::PathRef<'_, T>,
        control: &PiecewiseControl<T>,
        mode: FlowMode,
    ) -> Result<Self> {
        let gens = step_generators(problem, path, control)?;
        if mode == FlowMode::Factorized {
            match factorized_from_generators(&gens, problem.dims().state) {
                Ok(f) => return Ok(Self::Factorized(f)),
                Err(Error::IllConditionedFlow { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Self::Dense(DenseFlow::from_generators(&gens)))
    }

    pub fn steps(&self) -> usize {
        match self {
            Self::Factorized(f) => f.steps(),
            Self::Dense(d) => d.steps(),
        }
    }

    pub fn mode(&self) -> FlowMode {
        match self {
            Self::Factorized(_) => FlowMode::Factorized,
            Self::Dense(_) => FlowMode::Dense,
        }
    }

    /// `Γ_{t_s, t_t}`; rejects `s > t`.
    pub fn gamma(&self, s: usize, t: usize) -> Result<Mat<T>> {
        match self {
            Self::Factorized(f) => f.gamma(s, t),
            Self::Dense(d) => d.gamma(s, t),
        }
    }
}

/// Flows for every path of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowBundle<T> {
    pub mode: FlowMode,
    pub grid: TimeGrid<T>,
    pub flows: Vec<PathFlow<T>>,
}

impl<T: Scalar> FlowBundle<T> {
    /// Paths whose factorized flow was replaced by the dense one.
    pub fn dense_fallbacks(&self) -> usize {
        if self.mode == FlowMode::Dense {
            return 0;
        }
        self.flows.iter().filter(|f| f.mode() == FlowMode::Dense).count()
    }
}

pub fn build_flows<T: Scalar>(
    problem: &ControlProblem<T>,
    paths: &PathBundle<T>,
    control: &PiecewiseControl<T>,
    mode: FlowMode,
) -> Result<FlowBundle<T>> {
    let flows = (0..paths.batch())
        .into_par_iter()
        .map(|m| PathFlow::build(problem, &paths.path(m), control, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(FlowBundle { mode, grid: *paths.grid(), flows })
}
