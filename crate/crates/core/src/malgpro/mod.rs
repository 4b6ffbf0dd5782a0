//! Malliavin gradient of the cost functional and the projected gradient solver.

mod admissible;
mod control;
mod gradient;
mod projection;
mod solve;

pub use admissible::AdmissibleSet;
pub use control::PiecewiseControl;
pub use gradient::{
    gateaux_gradient_scalar, gateaux_gradient_vector, gradient_from_paths, optimality_residual, path_gradient,
    path_gradient_scalar, scalar_gradient_from_paths, simulate_batch, GradientEstimate, Residual,
};
pub use projection::{project, step};
pub(crate) use solve::run_loop;
pub use solve::{solve, Method, RateSchedule, SolveOptions, SolveResult, Termination};
