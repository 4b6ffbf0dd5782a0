use crate::error::{Error, Result};
use crate::flow::{factorized_from_generators, FlowMode};
use crate::linalg::{dot, matmul_into, vecmat_into, Mat};
use crate::malgpro::PiecewiseControl;
use crate::scalar::Scalar;
use crate::sde::{sample_with_factor, simulate_forward, ControlProblem, PathBundle, PathRef, TimeGrid};
use crate::stats::batch_moments;

/// Node-wise Monte Carlo gradient `∇_u J|_{t_j}` (N×k, row-major) and its standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate<T: Scalar> {
    pub grid: TimeGrid<T>,
    pub dim: usize,
    pub values: Vec<T>,
    pub std_errors: Vec<T>,
    pub paths: usize,
}

impl<T: Scalar> GradientEstimate<T> {
    pub fn at(&self, j: usize) -> &[T] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn std_error_at(&self, j: usize) -> &[T] {
        &self.std_errors[j * self.dim..(j + 1) * self.dim]
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Derivative data of one path at one node `j < N`.
struct Node<T> {
    step: Mat<T>,
    drive: Mat<T>,
    b: Mat<T>,
    jub: Vec<Mat<T>>,
    grad_x: Vec<T>,
    grad_u: Vec<T>,
    hess: Option<Mat<T>>,
}

struct PathData<T> {
    nodes: Vec<Node<T>>,
    term_grad: Vec<T>,
    term_hess: Option<Mat<T>>,
    second_order: bool,
}

fn need_hessian(e: Error) -> Error {
    match e {
        Error::MissingDerivative(name) => Error::Configuration(format!(
            "control-dependent diffusion makes the second-order gradient term active, but `{name}` is not supplied"
        )),
        other => other,
    }
}

/// Collects everything the gradient formulas need along a path. Hessians are only
/// requested when some `J_u b_l` is non-zero on the path.
fn collect<T: Scalar>(problem: &ControlProblem<T>, path: &PathRef<'_, T>, control: &PiecewiseControl<T>) -> Result<PathData<T>> {
    let dims = problem.dims();
    let (n, k, d) = (dims.state, dims.control, dims.noise);
    let grid = control.grid();
    let steps = grid.steps();
    let dt = grid.dt();
    let q = problem.covariance();
    let mut jxb = vec![Mat::zeros(n, n); d];
    let mut tmp = Mat::zeros(n, k);
    let mut nodes = Vec::with_capacity(steps);
    let mut second_order = false;
    for j in 0..steps {
        let (x, u, t) = (path.state(j), control.at(j), grid.node(j));
        let mut step = Mat::zeros(n, n);
        problem.drift_jac_x(x, u, t, &mut step)?;
        for v in step.as_mut_slice() {
            *v *= dt;
        }
        let mut drive = Mat::zeros(n, k);
        problem.drift_jac_u(x, u, t, &mut drive)?;
        let mut jub = Vec::with_capacity(d);
        for (l, jx) in jxb.iter_mut().enumerate() {
            problem.diffusion_jac_x(x, u, t, l, jx)?;
            step.add_scaled(path.dw(j)[l], jx);
            let mut m = Mat::zeros(n, k);
            problem.diffusion_jac_u(x, u, t, l, &mut m)?;
            second_order |= m.max_abs() > T::zero();
            jub.push(m);
        }
        // J_u a − Σ_{l,l'} q_{ll'} J_x b_l J_u b_{l'}
        for l in 0..d {
            for lp in 0..d {
                if q[(l, lp)] != T::zero() && jub[lp].max_abs() > T::zero() {
                    matmul_into(&jxb[l], &jub[lp], &mut tmp);
                    drive.add_scaled(-q[(l, lp)], &tmp);
                }
            }
        }
        let mut b = Mat::zeros(n, d);
        problem.diffusion(x, u, t, &mut b);
        let mut grad_x = vec![T::zero(); n];
        problem.cost_grad_x(x, u, t, &mut grad_x)?;
        let mut grad_u = vec![T::zero(); k];
        problem.cost_grad_u(x, u, t, &mut grad_u)?;
        nodes.push(Node { step, drive, b, jub, grad_x, grad_u, hess: None });
    }
    let x_t = path.state(steps);
    let mut term_grad = vec![T::zero(); n];
    problem.terminal_grad(x_t, &mut term_grad)?;
    let mut term_hess = None;
    if second_order {
        for (j, node) in nodes.iter_mut().enumerate() {
            let mut h = Mat::zeros(n, n);
            problem.cost_hess_xx(path.state(j), control.at(j), grid.node(j), &mut h).map_err(need_hessian)?;
            node.hess = Some(h);
        }
        let mut h = Mat::zeros(n, n);
        problem.terminal_hess(x_t, &mut h).map_err(need_hessian)?;
        term_hess = Some(h);
    }
    Ok(PathData { nodes, term_grad, term_hess, second_order })
}

/// `Σ_{l,l'} q_{ll'} c_lᵀ W J_u b_{l'}` added into `out` (k), with `c_l = Γ b_l`.
fn add_hessian_term<T: Scalar>(q: &Mat<T>, gb: &Mat<T>, w: &Mat<T>, jub: &[Mat<T>], out: &mut [T]) {
    let (n, d) = gb.shape();
    let mut c = vec![T::zero(); n];
    let mut r = vec![T::zero(); n];
    let mut rk = vec![T::zero(); out.len()];
    for l in 0..d {
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = gb[(i, l)];
        }
        vecmat_into(&c, w, &mut r);
        for lp in 0..d {
            let weight = q[(l, lp)];
            if weight == T::zero() {
                continue;
            }
            vecmat_into(&r, &jub[lp], &mut rk);
            for (o, v) in out.iter_mut().zip(&rk) {
                *o += weight * *v;
            }
        }
    }
}

/// Vector gradient along one path with `Γ_{s,t} = Y_t Z_s`, using suffix sums
/// `S_j = Σ_{i>j} ∇L_iᵀ Y_i dt + ∇hᵀ Y_N` and `M_j = Σ_{i>j} Y_iᵀ ∇²L_i Y_i dt + Y_Nᵀ ∇²h Y_N`.
fn assemble_factorized<T: Scalar>(data: &PathData<T>, y: &[Mat<T>], z: &[Mat<T>], q: &Mat<T>, dt: T, out: &mut [T]) {
    let steps = data.nodes.len();
    let n = data.term_grad.len();
    let k = out.len() / steps;
    let mut s = y[steps].vecmat(&data.term_grad);
    let mut m = data.term_hess.as_ref().map(|h| y[steps].transpose().matmul(h).matmul(&y[steps]));
    let mut row = vec![T::zero(); n];
    let mut gk = vec![T::zero(); k];
    let mut zb = Mat::zeros(n, data.nodes[0].b.cols());
    let mut w = Mat::zeros(n, n);
    for j in (0..steps).rev() {
        let node = &data.nodes[j];
        let o = &mut out[j * k..(j + 1) * k];
        vecmat_into(&s, &z[j], &mut row);
        vecmat_into(&row, &node.drive, &mut gk);
        for ((oi, g), lu) in o.iter_mut().zip(&gk).zip(&node.grad_u) {
            *oi = *g + *lu;
        }
        if let Some(mj) = m.as_mut() {
            matmul_into(&z[j], &node.b, &mut zb);
            matmul_into(mj, &z[j], &mut w);
            add_hessian_term(q, &zb, &w, &node.jub, o);
            if let Some(h) = &node.hess {
                let yh = y[j].transpose().matmul(h).matmul(&y[j]);
                mj.add_scaled(dt, &yh);
            }
        }
        let g = y[j].vecmat(&node.grad_x);
        for (si, gi) in s.iter_mut().zip(&g) {
            *si += *gi * dt;
        }
    }
}

/// Vector gradient along one path with `Γ_{r,j}` propagated from each anchor.
fn assemble_dense<T: Scalar>(data: &PathData<T>, q: &Mat<T>, dt: T, out: &mut [T]) {
    let steps = data.nodes.len();
    let n = data.term_grad.len();
    let k = out.len() / steps;
    let mut gamma = Mat::zeros(n, n);
    let mut next = Mat::zeros(n, n);
    let mut row = vec![T::zero(); n];
    let mut acc = vec![T::zero(); n];
    let mut gk = vec![T::zero(); k];
    let mut hacc = Mat::zeros(n, n);
    let mut gb = Mat::zeros(n, data.nodes[0].b.cols());
    for r in 0..steps {
        gamma.set_identity();
        acc.fill(T::zero());
        hacc.fill(T::zero());
        for i in r..steps {
            let e = &data.nodes[i].step;
            matmul_into(e, &gamma, &mut next);
            gamma.add_scaled(T::one(), &next);
            // gamma is now Γ_{r,i+1}
            let (g, h) = if i + 1 < steps {
                (&data.nodes[i + 1].grad_x, data.nodes[i + 1].hess.as_ref())
            } else {
                (&data.term_grad, data.term_hess.as_ref())
            };
            let weight = if i + 1 < steps { dt } else { T::one() };
            vecmat_into(g, &gamma, &mut row);
            for (a, v) in acc.iter_mut().zip(&row) {
                *a += weight * *v;
            }
            if data.second_order {
                if let Some(h) = h {
                    let gh = gamma.transpose().matmul(h).matmul(&gamma);
                    hacc.add_scaled(weight, &gh);
                }
            }
        }
        let node = &data.nodes[r];
        let o = &mut out[r * k..(r + 1) * k];
        vecmat_into(&acc, &node.drive, &mut gk);
        for ((oi, g), lu) in o.iter_mut().zip(&gk).zip(&node.grad_u) {
            *oi = *g + *lu;
        }
        if data.second_order {
            // Γ_{r,r} = I, so the bracket pairs B(s) with Γ_{r,t} through hacc.
            gb.copy_from(&node.b);
            add_hessian_term(q, &gb, &hacc, &node.jub, o);
        }
    }
}

/// Vector gradient contribution of a single path, written into `out` (N×k).
///
/// Inner time sums run over nodes `t_{j+1} .. t_{N-1}` with weight `dt` plus the
/// terminal term at `t_N`; the anchor's own running cost enters only through `∇_u L`.
pub fn path_gradient<T: Scalar>(
    problem: &ControlProblem<T>,
    path: &PathRef<'_, T>,
    control: &PiecewiseControl<T>,
    mode: FlowMode,
    out: &mut [T],
) -> Result<()> {
    let data = collect(problem, path, control)?;
    let dt = control.grid().dt();
    let q = problem.covariance();
    if mode == FlowMode::Factorized {
        let gens: Vec<Mat<T>> = data.nodes.iter().map(|nd| nd.step.clone()).collect();
        match factorized_from_generators(&gens, problem.dims().state) {
            Ok(f) => {
                assemble_factorized(&data, &f.y, &f.z, q, dt, out);
                return Ok(());
            }
            Err(Error::IllConditionedFlow { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    assemble_dense(&data, q, dt, out);
    Ok(())
}

/// Scalar gradient contribution of one path, with every `D_s x_t / b(s)` realized as
/// the flow ratio `ρ_{s,t} = Π_{s≤i<t} (1 + a_x dt + b_x Δw_i)`:
/// `(a_u − q b_x b_u)(Σ L_x ρ dt + h_x ρ_T) + q b_u b (Σ L_xx ρ² dt + h_xx ρ_T²) + L_u`.
/// Evaluated by one backward sweep, so `b(s)` is never a divisor.
pub fn path_gradient_scalar<T: Scalar>(
    problem: &ControlProblem<T>,
    path: &PathRef<'_, T>,
    control: &PiecewiseControl<T>,
    out: &mut [T],
) -> Result<()> {
    if !problem.dims().is_scalar() {
        return Err(Error::InvalidArgument(format!("scalar gradient needs n = k = d = 1, got {:?}", problem.dims())));
    }
    let data = collect(problem, path, control)?;
    let dt = control.grid().dt();
    let q = problem.covariance()[(0, 0)];
    let mut w1 = data.term_grad[0];
    let mut w2 = data.term_hess.as_ref().map_or(T::zero(), |h| h[(0, 0)]);
    for j in (0..data.nodes.len()).rev() {
        let node = &data.nodes[j];
        let f = T::one() + node.step[(0, 0)];
        let s1 = f * w1;
        let s2 = f * f * w2;
        // drive already holds a_u − q b_x b_u
        let mut g = node.drive[(0, 0)] * s1 + node.grad_u[0];
        if data.second_order {
            g += q * node.jub[0][(0, 0)] * node.b[(0, 0)] * s2;
        }
        out[j] = g;
        w1 = node.grad_x[0] * dt + s1;
        if let Some(h) = &node.hess {
            w2 = h[(0, 0)] * dt + s2;
        }
    }
    Ok(())
}

fn check_control<T: Scalar>(problem: &ControlProblem<T>, control: &PiecewiseControl<T>, paths: &PathBundle<T>) -> Result<()> {
    if control.dim() != problem.dims().control {
        return Err(Error::InvalidArgument(format!(
            "control has dimension {}, problem expects {}",
            control.dim(),
            problem.dims().control
        )));
    }
    if !paths.grid().matches(control.grid()) {
        return Err(Error::InvalidArgument("paths and control use different grids".into()));
    }
    if paths.state_dim() != problem.dims().state || paths.increments().dim() != problem.dims().noise {
        return Err(Error::InvalidArgument("paths do not match the problem dimensions".into()));
    }
    Ok(())
}

fn estimate<T: Scalar>(
    control: &PiecewiseControl<T>,
    paths: &PathBundle<T>,
    per_path: impl Fn(&PathRef<'_, T>, &mut [T]) -> Result<()> + Sync,
) -> Result<GradientEstimate<T>> {
    let grid = *control.grid();
    let dim = control.dim();
    let m = batch_moments(paths.batch(), grid.steps() * dim, |p, out| per_path(&paths.path(p), out))?;
    Ok(GradientEstimate { grid, dim, values: m.mean, std_errors: m.std_error, paths: m.count })
}

/// Vector gradient averaged over already simulated paths.
pub fn gradient_from_paths<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    paths: &PathBundle<T>,
    mode: FlowMode,
) -> Result<GradientEstimate<T>> {
    check_control(problem, control, paths)?;
    estimate(control, paths, |p, out| path_gradient(problem, p, control, mode, out))
}

/// Scalar gradient averaged over already simulated paths.
pub fn scalar_gradient_from_paths<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    paths: &PathBundle<T>,
) -> Result<GradientEstimate<T>> {
    check_control(problem, control, paths)?;
    estimate(control, paths, |p, out| path_gradient_scalar(problem, p, control, out))
}

/// Simulates `batch` fresh paths from `seed` under `control`.
pub fn simulate_batch<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    batch: usize,
    seed: u64,
) -> Result<PathBundle<T>> {
    if batch == 0 {
        return Err(Error::InvalidArgument("batch must be at least 1".into()));
    }
    let grid = control.grid();
    let inc = sample_with_factor(grid, problem.noise_factor(), batch, seed);
    simulate_forward(problem, control, &inc, grid, seed)
}

/// Monte Carlo scalar Gateaux derivative `J'(u, x_0)|_{t_j}` at every node.
pub fn gateaux_gradient_scalar<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    batch: usize,
    seed: u64,
) -> Result<GradientEstimate<T>> {
    let paths = simulate_batch(problem, control, batch, seed)?;
    scalar_gradient_from_paths(problem, control, &paths)
}

/// Monte Carlo vector gradient `∇_u J(u, x_0)|_{t_j}` at every node, factorized flows.
pub fn gateaux_gradient_vector<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    batch: usize,
    seed: u64,
) -> Result<GradientEstimate<T>> {
    let paths = simulate_batch(problem, control, batch, seed)?;
    gradient_from_paths(problem, control, &paths, FlowMode::Factorized)
}

/// Sup-norm over nodes of the gradient estimate, with the standard error of the
/// maximizing node's norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual<T: Scalar> {
    pub value: T,
    pub std_error: T,
    pub node: usize,
    pub gradient: GradientEstimate<T>,
}

impl<T: Scalar> Residual<T> {
    pub fn from_gradient(gradient: GradientEstimate<T>) -> Self {
        let mut best = (T::zero(), T::zero(), 0);
        for j in 0..gradient.grid.steps() {
            let g = gradient.at(j);
            let norm = dot(g, g).sqrt();
            if norm > best.0 || j == 0 {
                let se = gradient.std_error_at(j);
                // delta method for ‖g‖; falls back to the largest coordinate error at g = 0
                let std_error = if norm > T::zero() {
                    g.iter().zip(se).map(|(&gi, &si)| (gi / norm * si).powi(2)).sum::<T>().sqrt()
                } else {
                    se.iter().fold(T::zero(), |m, &s| m.max(s))
                };
                best = (norm, std_error, j);
            }
        }
        Self { value: best.0, std_error: best.1, node: best.2, gradient }
    }
}

/// Optimality diagnostic: `max_j ‖∇_u J|_{t_j}‖` for a deterministic control.
pub fn optimality_residual<T: Scalar>(
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    batch: usize,
    seed: u64,
) -> Result<Residual<T>> {
    let gradient = if problem.dims().is_scalar() {
        gateaux_gradient_scalar(problem, control, batch, seed)?
    } else {
        gateaux_gradient_vector(problem, control, batch, seed)?
    };
    Ok(Residual::from_gradient(gradient))
}
