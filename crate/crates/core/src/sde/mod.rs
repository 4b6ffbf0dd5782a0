//! Problem data and Euler–Maruyama Monte Carlo simulation of the controlled SDE.

mod grid;
mod noise;
mod problem;
mod simulate;

pub use grid::{build_time_grid, TimeGrid};
pub use noise::{sample_wiener, sample_with_factor, Increments};
pub use problem::{ControlProblem, ControlProblemBuilder, Dims, Model, Sense};
pub use simulate::{
    evaluate_cost, mean_and_std_error, path_cost, simulate_forward, simulate_forward_tolerant, simulate_path, CostEstimate,
    Diverged, PathBundle, PathRef,
};
