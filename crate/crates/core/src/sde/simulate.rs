use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::malgpro::PiecewiseControl;
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, Increments, TimeGrid};

/// Forward trajectories of a batch, stored `batch × (N+1) × n`, together with the
/// increments that drove them.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle<T: Scalar> {
    grid: TimeGrid<T>,
    state_dim: usize,
    states: Vec<T>,
    increments: Increments<T>,
    seed: u64,
}

/// Borrowed view of one path.
#[derive(Clone, Copy, Debug)]
pub struct PathRef<'a, T> {
    pub states: &'a [T],
    pub increments: &'a [T],
    pub state_dim: usize,
    pub noise_dim: usize,
}

impl<'a, T> PathRef<'a, T> {
    #[inline]
    pub fn state(&self, j: usize) -> &'a [T] {
        &self.states[j * self.state_dim..(j + 1) * self.state_dim]
    }

    #[inline]
    pub fn dw(&self, j: usize) -> &'a [T] {
        &self.increments[j * self.noise_dim..(j + 1) * self.noise_dim]
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.noise_dim
    }
}

impl<T: Scalar> PathBundle<T> {
    pub fn batch(&self) -> usize {
        self.increments.batch()
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn increments(&self) -> &Increments<T> {
        &self.increments
    }

    pub fn path(&self, m: usize) -> PathRef<'_, T> {
        let len = (self.grid.steps() + 1) * self.state_dim;
        PathRef {
            states: &self.states[m * len..(m + 1) * len],
            increments: self.increments.path(m),
            state_dim: self.state_dim,
            noise_dim: self.increments.dim(),
        }
    }

    pub fn state(&self, m: usize, j: usize) -> &[T] {
        self.path(m).state(j)
    }
}

/// Euler–Maruyama for one path: `x_{j+1} = x_j + a(x_j,u_j,t_j) dt + B(x_j,u_j,t_j) Δw_j`.
///
/// `dw` holds the path's `N × d` increments. On a non-finite state the step index
/// is returned as the error.
pub fn simulate_path<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    dw: &[T],
    grid: &TimeGrid<T>,
) -> std::result::Result<Vec<T>, usize> {
    let dims = problem.dims();
    let (n, d) = (dims.state, dims.noise);
    let steps = grid.steps();
    let dt = grid.dt();
    let mut states = Vec::with_capacity((steps + 1) * n);
    states.extend_from_slice(problem.initial_state());
    let mut drift = vec![T::zero(); n];
    let mut diff = Mat::zeros(n, d);
    for j in 0..steps {
        let t = grid.node(j);
        let u = control.at(j);
        let x = &states[j * n..(j + 1) * n];
        problem.drift(x, u, t, &mut drift);
        problem.diffusion(x, u, t, &mut diff);
        let w = &dw[j * d..(j + 1) * d];
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = x[i] + drift[i] * dt;
            for (l, &wl) in w.iter().enumerate() {
                v += diff[(i, l)] * wl;
            }
            next.push(v);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(j + 1);
        }
        states.extend_from_slice(&next);
    }
    Ok(states)
}

fn check_shapes<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    increments: &Increments<T>,
    grid: &TimeGrid<T>,
) -> Result<()> {
    let dims = problem.dims();
    if !control.grid().matches(grid) {
        return Err(Error::InvalidArgument("control is defined on a different grid".into()));
    }
    if control.dim() != dims.control {
        return Err(Error::InvalidArgument("control dimension does not match the problem".into()));
    }
    if increments.steps() != grid.steps() || increments.dim() != dims.noise {
        return Err(Error::InvalidArgument("increments do not match the grid or noise dimension".into()));
    }
    Ok(())
}

/// Simulates every path of the batch. Any non-finite state aborts with
/// [`Error::DivergedPath`] naming the first offending path.
pub fn simulate_forward<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    increments: &Increments<T>,
    grid: &TimeGrid<T>,
    seed: u64,
) -> Result<PathBundle<T>> {
    let (bundle, diverged) = simulate_forward_tolerant(problem, control, increments, grid, seed)?;
    match diverged.first() {
        Some(&(path, step)) => Err(Error::DivergedPath { path, step }),
        None => Ok(bundle),
    }
}

/// A diverged path as `(path, step)`.
pub type Diverged = (usize, usize);

/// Like [`simulate_forward`] but drops diverged paths, returning them as
/// `(path, step)` pairs alongside the surviving bundle.
pub fn simulate_forward_tolerant<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    increments: &Increments<T>,
    grid: &TimeGrid<T>,
    seed: u64,
) -> Result<(PathBundle<T>, Vec<Diverged>)> {
    check_shapes(problem, control, increments, grid)?;
    let results: Vec<_> =
        (0..increments.batch()).into_par_iter().map(|m| simulate_path(problem, control, increments.path(m), grid)).collect();
    let mut states = Vec::with_capacity(increments.batch() * (grid.steps() + 1) * problem.dims().state);
    let mut keep = Vec::with_capacity(results.len());
    let mut diverged = Vec::new();
    for (m, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                states.extend(s);
                keep.push(m);
            }
            Err(step) => diverged.push((m, step)),
        }
    }
    let increments = if diverged.is_empty() { increments.clone() } else { increments.select(&keep) };
    Ok((PathBundle { grid: *grid, state_dim: problem.dims().state, states, increments, seed }, diverged))
}

/// Monte Carlo estimate of the cost with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct CostEstimate<T> {
    pub mean: T,
    pub std_error: T,
    pub per_path: Vec<T>,
}

/// Sample mean and standard error of the mean, reduced in index order.
pub fn mean_and_std_error<T: Scalar>(xs: &[T]) -> (T, T) {
    let m = xs.len();
    if m == 0 {
        return (T::nan(), T::nan());
    }
    let mf = T::from_usize_lossy(m);
    let mean = xs.iter().copied().sum::<T>() / mf;
    if m == 1 {
        return (mean, T::zero());
    }
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / T::from_usize_lossy(m - 1);
    (mean, (var / mf).sqrt())
}

/// Cost of a single path: left-point quadrature of the running cost plus the terminal cost.
pub fn path_cost<T: Scalar>(problem: &ControlProblem<T>, states: &[T], control: &PiecewiseControl<T>) -> T {
    let n = problem.dims().state;
    let grid = control.grid();
    let dt = grid.dt();
    let mut running = T::zero();
    for j in 0..grid.steps() {
        running += problem.running_cost(&states[j * n..(j + 1) * n], control.at(j), grid.node(j));
    }
    let steps = grid.steps();
    running * dt + problem.terminal_cost(&states[steps * n..(steps + 1) * n])
}

/// `(1/M) Σ_paths [Σ_{j<N} L(x_j, u_j, t_j) dt + h(x_N)]` and its standard error.
pub fn evaluate_cost<T: Scalar>(
    problem: &ControlProblem<T>,
    paths: &PathBundle<T>,
    control: &PiecewiseControl<T>,
) -> Result<CostEstimate<T>> {
    if !paths.grid().matches(control.grid()) {
        return Err(Error::InvalidArgument("paths and control use different grids".into()));
    }
    let per_path: Vec<T> =
        (0..paths.batch()).into_par_iter().map(|m| path_cost(problem, paths.path(m).states, control)).collect();
    let (mean, std_error) = mean_and_std_error(&per_path);
    Ok(CostEstimate { mean, std_error, per_path })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sde::{sample_wiener, Dims, Model};

    /// dx = c dt + s·x dw with L = l, h(x) = x (scalar).
    struct Toy {
        c: f64,
        s: f64,
        l: f64,
        terminal: bool,
    }

    impl Model<f64> for Toy {
        fn dims(&self) -> Dims {
            Dims::new(1, 1, 1)
        }
        fn drift(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut [f64]) {
            out[0] = self.c;
        }
        fn diffusion(&self, x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) {
            out[(0, 0)] = self.s * x[0];
        }
        fn running_cost(&self, _x: &[f64], _u: &[f64], _t: f64) -> f64 {
            self.l
        }
        fn terminal_cost(&self, x: &[f64]) -> f64 {
            if self.terminal {
                x[0]
            } else {
                0.0
            }
        }
    }

    fn setup(toy: Toy, x0: f64, steps: usize, batch: usize) -> (ControlProblem<f64>, PathBundle<f64>) {
        let p = ControlProblem::builder(Arc::new(toy)).initial_state(vec![x0]).build().unwrap();
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let u = PiecewiseControl::zeros(grid, 1);
        let inc = sample_wiener(&grid, 1, p.covariance(), batch, 1).unwrap();
        let paths = simulate_forward(&p, &u, &inc, &grid, 1).unwrap();
        (p, paths)
    }

    #[test]
    fn frozen_dynamics_stay_at_initial_state() {
        let (_, paths) = setup(Toy { c: 0.0, s: 0.0, l: 0.0, terminal: false }, 2.5, 10, 4);
        for m in 0..4 {
            for j in 0..=10 {
                assert_eq!(paths.state(m, j), &[2.5]);
            }
        }
    }

    #[test]
    fn unit_drift_reaches_one() {
        let (_, paths) = setup(Toy { c: 1.0, s: 0.0, l: 0.0, terminal: false }, 0.0, 100, 2);
        assert!((paths.state(0, 100)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_running_cost_integrates_to_horizon() {
        let (p, paths) = setup(Toy { c: 0.3, s: 0.5, l: 1.0, terminal: false }, 1.0, 64, 8);
        let u = PiecewiseControl::zeros(*paths.grid(), 1);
        let est = evaluate_cost(&p, &paths, &u).unwrap();
        assert!(est.per_path.iter().all(|&c| (c - 1.0).abs() < 1e-12));
        assert!((est.mean - 1.0).abs() < 1e-12);
        assert!(est.std_error.abs() < 1e-12);
    }

    #[test]
    fn terminal_cost_of_frozen_state() {
        let (p, paths) = setup(Toy { c: 0.0, s: 0.0, l: 0.0, terminal: true }, 3.0, 5, 3);
        let u = PiecewiseControl::zeros(*paths.grid(), 1);
        assert_eq!(evaluate_cost(&p, &paths, &u).unwrap().mean, 3.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (p, paths) = setup(Toy { c: 0.0, s: 0.0, l: 0.0, terminal: true }, 3.0, 5, 3);
        let other = PiecewiseControl::zeros(TimeGrid::new(1.0, 6).unwrap(), 1);
        assert!(matches!(evaluate_cost(&p, &paths, &other), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let p = ControlProblem::builder(Arc::new(Toy { c: 0.0, s: 1e300, l: 0.0, terminal: false }))
            .initial_state(vec![1.0])
            .build()
            .unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let inc = Increments::from_vec(2, 4, 1, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1e10, 0.0, 0.0]).unwrap();
        let u = PiecewiseControl::zeros(grid, 1);
        let err = simulate_forward(&p, &u, &inc, &grid, 0).unwrap_err();
        assert_eq!(err, Error::DivergedPath { path: 1, step: 2 });
        let (ok, bad) = simulate_forward_tolerant(&p, &u, &inc, &grid, 0).unwrap();
        assert_eq!(ok.batch(), 1);
        assert_eq!(bad, vec![(1, 2)]);
    }
}
