use crate::adjoint::hamiltonian::hamiltonian_grad_into;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::malgpro::{run_loop, GradientEstimate, Method, PiecewiseControl, SolveOptions, SolveResult};
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, PathBundle, PathRef};
use crate::stats::batch_moments;

/// Single-sample adjoint pair along one path: `y` is (N+1)×n, `z` is (N+1)×d×n with
/// row `i` of each node block holding `z^i`. The terminal `z` block is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointPath<T> {
    pub state_dim: usize,
    pub noise_dim: usize,
    pub y: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Scalar> AdjointPath<T> {
    pub fn y_at(&self, j: usize) -> &[T] {
        &self.y[j * self.state_dim..(j + 1) * self.state_dim]
    }

    /// `z_{t_j}` as a d×n matrix.
    pub fn z_at(&self, j: usize) -> Mat<T> {
        let len = self.state_dim * self.noise_dim;
        Mat::from_vec(self.noise_dim, self.state_dim, self.z[j * len..(j + 1) * len].to_vec())
    }
}

/// Backward sweep from `y_N = ∇h(x_N)`: for `j = N−1..0`,
/// `z_j^i = y_{j+1} Δw_j^i / dt` and `y_j = y_{j+1} + H_x(x_j, y_{j+1}, u_j, z_j, t_j) dt`.
pub fn adsgd_backward<T: Scalar>(
    path: &PathRef<'_, T>,
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
) -> Result<AdjointPath<T>> {
    let dims = problem.dims();
    let (n, k, d) = (dims.state, dims.control, dims.noise);
    let grid = control.grid();
    let steps = grid.steps();
    if path.steps() != steps || path.state_dim != n || path.noise_dim != d {
        return Err(Error::InvalidArgument("path does not match the problem or control grid".into()));
    }
    let dt = grid.dt();
    let mut y = vec![T::zero(); (steps + 1) * n];
    let mut z = vec![T::zero(); (steps + 1) * n * d];
    problem.terminal_grad(path.state(steps), &mut y[steps * n..])?;
    let mut zj = Mat::zeros(d, n);
    let mut hx = vec![T::zero(); n];
    let mut hu = vec![T::zero(); k];
    let mut mx = Mat::zeros(n, n);
    let mut mu = Mat::zeros(n, k);
    for j in (0..steps).rev() {
        let (head, tail) = y.split_at_mut((j + 1) * n);
        let next = &tail[..n];
        let dw = path.dw(j);
        for i in 0..d {
            for c in 0..n {
                zj[(i, c)] = next[c] * dw[i] / dt;
            }
        }
        hamiltonian_grad_into(
            problem,
            path.state(j),
            next,
            control.at(j),
            &zj,
            grid.node(j),
            &mut hx,
            &mut hu,
            &mut mx,
            &mut mu,
        )?;
        for c in 0..n {
            head[j * n + c] = next[c] + hx[c] * dt;
        }
        z[j * n * d..(j + 1) * n * d].copy_from_slice(zj.as_slice());
    }
    Ok(AdjointPath { state_dim: n, noise_dim: d, y, z })
}

/// Per-path Ad-SGD gradient: `H_u(x_j, y_j, u_j, z_j, t_j)` at every node, written into `out` (N×k).
pub fn adsgd_path_gradient<T: Scalar>(
    problem: &ControlProblem<T>,
    path: &PathRef<'_, T>,
    control: &PiecewiseControl<T>,
    out: &mut [T],
) -> Result<()> {
    let adj = adsgd_backward(path, problem, control)?;
    let dims = problem.dims();
    let (n, k) = (dims.state, dims.control);
    let grid = control.grid();
    let mut hx = vec![T::zero(); n];
    let mut mx = Mat::zeros(n, n);
    let mut mu = Mat::zeros(n, k);
    for j in 0..grid.steps() {
        let zj = adj.z_at(j);
        let o = &mut out[j * k..(j + 1) * k];
        hamiltonian_grad_into(
            problem,
            path.state(j),
            adj.y_at(j),
            control.at(j),
            &zj,
            grid.node(j),
            &mut hx,
            o,
            &mut mx,
            &mut mu,
        )?;
    }
    Ok(())
}

/// Batch mean of the Ad-SGD node gradients.
pub fn adsgd_gradient<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    paths: &PathBundle<T>,
) -> Result<GradientEstimate<T>> {
    if !paths.grid().matches(control.grid()) || control.dim() != problem.dims().control {
        return Err(Error::InvalidArgument("paths, control and problem disagree on grid or dimension".into()));
    }
    let grid = *control.grid();
    let dim = control.dim();
    let m =
        batch_moments(paths.batch(), grid.steps() * dim, |p, out| adsgd_path_gradient(problem, &paths.path(p), control, out))?;
    Ok(GradientEstimate { grid, dim, values: m.mean, std_errors: m.std_error, paths: m.count })
}

/// Ad-SGD baseline: the Mal-GPro loop with the single-sample adjoint gradient.
pub fn adsgd_solve<T: Scalar>(problem: &ControlProblem<T>, opts: &SolveOptions<T>) -> Result<SolveResult<T>> {
    run_loop(problem, opts, Method::AdSgd, |control, paths| adsgd_gradient(problem, control, paths))
}
