use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::flow::FlowMode;
use crate::malgpro::{gradient_from_paths, project, scalar_gradient_from_paths, step, GradientEstimate, PiecewiseControl};
use crate::rng::iteration_seed;
use crate::scalar::Scalar;
use crate::sde::{evaluate_cost, sample_with_factor, simulate_forward_tolerant, ControlProblem, PathBundle, TimeGrid};

/// Step size per iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateSchedule<T> {
    Constant(T),
    /// Linear interpolation from `start` (first iteration) to `end` (last iteration).
    Linear {
        start: T,
        end: T,
    },
}

impl<T: Scalar> RateSchedule<T> {
    pub fn at(&self, iteration: usize, max_iterations: usize) -> T {
        match *self {
            Self::Constant(r) => r,
            Self::Linear { start, end } => {
                if max_iterations <= 1 {
                    start
                } else {
                    let f = T::from_usize_lossy(iteration) / T::from_usize_lossy(max_iterations - 1);
                    start + (end - start) * f
                }
            }
        }
    }

    fn is_valid(&self) -> bool {
        let ok = |r: T| r > T::zero() && r.is_finite();
        match *self {
            Self::Constant(r) => ok(r),
            Self::Linear { start, end } => ok(start) && ok(end),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    GradientTolerance,
    ObjectiveStall,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MaxIterations => "max-iterations",
            Self::GradientTolerance => "gradient-tolerance",
            Self::ObjectiveStall => "objective-stall",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    MalGpro,
    AdSgd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MalGpro => "mal-gpro",
            Self::AdSgd => "ad-sgd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions<T: Scalar> {
    /// Number of grid intervals over the problem horizon.
    pub steps: usize,
    /// Monte Carlo paths per iteration.
    pub batch: usize,
    pub rate: RateSchedule<T>,
    pub max_iterations: usize,
    /// Stop once `max_j |u_j − P(u_j ∓ λ g_j)| / λ` falls to this value.
    pub gradient_tolerance: T,
    /// Stop once `|J_i − J_{i−w}| ≤ tol · |J_{i−w}|` with `w = stall_window`.
    pub stall_tolerance: T,
    pub stall_window: usize,
    pub master_seed: u64,
    pub flow_mode: FlowMode,
    /// Largest tolerated fraction of diverged paths in one iteration.
    pub max_diverged_fraction: T,
    /// Reference control on the same grid; enables the control-error trace.
    pub reference: Option<PiecewiseControl<T>>,
    /// Starting control; `P(0)` when unset.
    pub initial_control: Option<PiecewiseControl<T>>,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            steps: 100,
            batch: 100,
            rate: RateSchedule::Constant(T::lit(1e-2)),
            max_iterations: 500,
            gradient_tolerance: T::lit(1e-4),
            stall_tolerance: T::lit(1e-8),
            stall_window: 10,
            master_seed: 0,
            flow_mode: FlowMode::Factorized,
            max_diverged_fraction: T::lit(0.1),
            reference: None,
            initial_control: None,
        }
    }
}

/// Outcome of a solve. Trace entry `i` describes the control at the start of iteration `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult<T: Scalar> {
    pub method: Method,
    pub control: PiecewiseControl<T>,
    pub objective: Vec<T>,
    pub objective_std_error: Vec<T>,
    pub gradient_norm: Vec<T>,
    /// Empty unless a reference control was supplied.
    pub control_error: Vec<T>,
    pub wall_ms: Vec<f64>,
    pub termination: Termination,
    /// `E_c` of the returned control.
    pub final_control_error: Option<T>,
}

impl<T: Scalar> SolveResult<T> {
    pub fn iterations(&self) -> usize {
        self.objective.len()
    }

    pub fn mean_wall_ms(&self) -> f64 {
        if self.wall_ms.is_empty() {
            0.0
        } else {
            self.wall_ms.iter().sum::<f64>() / self.wall_ms.len() as f64
        }
    }
}

fn validate<T: Scalar>(problem: &ControlProblem<T>, opts: &SolveOptions<T>) -> Result<TimeGrid<T>> {
    if opts.batch == 0 {
        return Err(Error::InvalidArgument("batch must be at least 1".into()));
    }
    if !opts.rate.is_valid() {
        return Err(Error::InvalidArgument("rates must be positive and finite".into()));
    }
    let negative = |v: T| v.is_nan() || v < T::zero();
    if negative(opts.gradient_tolerance) || negative(opts.stall_tolerance) {
        return Err(Error::InvalidArgument("tolerances must be non-negative".into()));
    }
    let grid = TimeGrid::new(problem.horizon(), opts.steps)?;
    let k = problem.dims().control;
    for (name, c) in [("reference", &opts.reference), ("initial", &opts.initial_control)] {
        if let Some(c) = c {
            if !c.grid().matches(&grid) || c.dim() != k {
                return Err(Error::InvalidArgument(format!("{name} control does not match the grid or control dimension")));
            }
        }
    }
    Ok(grid)
}

/// Projected stochastic gradient loop shared by every gradient estimator.
pub(crate) fn run_loop<T, G>(
    problem: &ControlProblem<T>,
    opts: &SolveOptions<T>,
    method: Method,
    gradient: G,
) -> Result<SolveResult<T>>
where
    T: Scalar,
    G: Fn(&PiecewiseControl<T>, &PathBundle<T>) -> Result<GradientEstimate<T>>,
{
    let grid = validate(problem, opts)?;
    let set = problem.admissible_set();
    let mut control = match &opts.initial_control {
        Some(c) => project(c.values(), grid, set)?,
        None => project(&vec![T::zero(); grid.steps() * problem.dims().control], grid, set)?,
    };
    let error_of = |c: &PiecewiseControl<T>| opts.reference.as_ref().map(|r| c.squared_distance(r)).transpose();
    let mut result = SolveResult {
        method,
        control: control.clone(),
        objective: Vec::new(),
        objective_std_error: Vec::new(),
        gradient_norm: Vec::new(),
        control_error: Vec::new(),
        wall_ms: Vec::new(),
        termination: Termination::MaxIterations,
        final_control_error: None,
    };
    for i in 0..opts.max_iterations {
        let clock = Instant::now();
        let seed = iteration_seed(opts.master_seed, i as u64);
        let inc = sample_with_factor(&grid, problem.noise_factor(), opts.batch, seed);
        let (paths, diverged) = simulate_forward_tolerant(problem, &control, &inc, &grid, seed)?;
        if T::from_usize_lossy(diverged.len()) > opts.max_diverged_fraction * T::from_usize_lossy(opts.batch)
            || paths.batch() == 0
        {
            return Err(Error::UnstableProblem { iteration: i, diverged: diverged.len(), batch: opts.batch });
        }
        let cost = evaluate_cost(problem, &paths, &control)?;
        let g = gradient(&control, &paths)?;
        let rate = opts.rate.at(i, opts.max_iterations);
        let next = step(&control, &g.values, rate, set, problem.sense())?;
        let moved = control.sup_distance(&next)? / rate;
        result.objective.push(cost.mean);
        result.objective_std_error.push(cost.std_error);
        result.gradient_norm.push(moved);
        if let Some(e) = error_of(&control)? {
            result.control_error.push(e);
        }
        control = next;
        result.wall_ms.push(clock.elapsed().as_secs_f64() * 1e3);
        if moved <= opts.gradient_tolerance {
            result.termination = Termination::GradientTolerance;
            break;
        }
        let w = opts.stall_window;
        let len = result.objective.len();
        if w > 0 && len > w {
            let (now, then) = (result.objective[len - 1], result.objective[len - 1 - w]);
            if (now - then).abs() <= opts.stall_tolerance * then.abs() {
                result.termination = Termination::ObjectiveStall;
                break;
            }
        }
    }
    result.final_control_error = error_of(&control)?;
    result.control = control;
    Ok(result)
}

/// Mal-GPro: projected gradient iteration with the Malliavin gradient, re-simulating
/// a fresh batch every iteration. Scalar problems use the flow-ratio form.
pub fn solve<T: Scalar>(problem: &ControlProblem<T>, opts: &SolveOptions<T>) -> Result<SolveResult<T>> {
    let scalar = problem.dims().is_scalar();
    run_loop(problem, opts, Method::MalGpro, |control, paths| {
        if scalar {
            scalar_gradient_from_paths(problem, control, paths)
        } else {
            gradient_from_paths(problem, control, paths, opts.flow_mode)
        }
    })
}
