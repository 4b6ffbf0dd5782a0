//! Stochastic optimal control by gradient projection, with the cost gradient
//! obtained from Malliavin derivatives of the state instead of an adjoint BSDE.
//!
//! The library is generic over the floating point type (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.
//!
//! ```
//! use malgpro::benchmarks;
//! use malgpro::malgpro::{solve, SolveOptions};
//!
//! let bench = benchmarks::scalar_blackscholes::<f64>().unwrap();
//! let opts = SolveOptions { steps: 20, max_iterations: 5, ..SolveOptions::default() };
//! let result = solve(&bench.problem, &opts).unwrap();
//! assert_eq!(result.iterations(), 5);
//! ```

pub mod adjoint;
pub mod benchmarks;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod malgpro;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Mat<f64>;
pub type Grid = sde::TimeGrid<f64>;
pub type Problem = sde::ControlProblem<f64>;
pub type Paths = sde::PathBundle<f64>;
pub type Control = malgpro::PiecewiseControl<f64>;
pub type Admissible = malgpro::AdmissibleSet<f64>;
pub type Flows = flow::FlowBundle<f64>;
pub type Gradient = malgpro::GradientEstimate<f64>;
pub type Options = malgpro::SolveOptions<f64>;
pub type Outcome = malgpro::SolveResult<f64>;
pub type Benchmark = benchmarks::BenchmarkProblem<f64>;
