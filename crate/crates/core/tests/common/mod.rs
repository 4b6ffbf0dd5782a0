#![allow(dead_code)]

use std::sync::Arc;

use malgpro::flow::FlowMode;
use malgpro::linalg::Mat;
use malgpro::malgpro::{gradient_from_paths, scalar_gradient_from_paths, GradientEstimate, PiecewiseControl};
use malgpro::sde::{
    evaluate_cost, mean_and_std_error, sample_with_factor, simulate_forward, ControlProblem, Dims, Increments, Model, TimeGrid,
};

/// Scalar affine dynamics `a = a0 + ax x + au u`, `b = b0 + bx x + bu u`,
/// cost `L = ½(x − 1)² + ½u²`, `h = x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Affine1 {
    pub a0: f64,
    pub ax: f64,
    pub au: f64,
    pub b0: f64,
    pub bx: f64,
    pub bu: f64,
}

impl Affine1 {
    pub fn gbm(mu: f64, sigma: f64) -> Self {
        Self { ax: mu, bx: sigma, ..Self::default() }
    }

    pub fn problem(self, x0: f64) -> ControlProblem<f64> {
        ControlProblem::builder(Arc::new(self)).horizon(1.0).initial_state(vec![x0]).build().unwrap()
    }
}

impl Model<f64> for Affine1 {
    fn dims(&self) -> Dims {
        Dims::new(1, 1, 1)
    }
    fn drift(&self, x: &[f64], u: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = self.a0 + self.ax * x[0] + self.au * u[0];
    }
    fn diffusion(&self, x: &[f64], u: &[f64], _t: f64, out: &mut Mat<f64>) {
        out[(0, 0)] = self.b0 + self.bx * x[0] + self.bu * u[0];
    }
    fn running_cost(&self, x: &[f64], u: &[f64], _t: f64) -> f64 {
        0.5 * ((x[0] - 1.0).powi(2) + u[0] * u[0])
    }
    fn terminal_cost(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn drift_jac_x(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
        out[(0, 0)] = self.ax;
        true
    }
    fn drift_jac_u(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
        out[(0, 0)] = self.au;
        true
    }
    fn diffusion_jac_x(&self, _x: &[f64], _u: &[f64], _t: f64, _l: usize, out: &mut Mat<f64>) -> bool {
        out[(0, 0)] = self.bx;
        true
    }
    fn diffusion_jac_u(&self, _x: &[f64], _u: &[f64], _t: f64, _l: usize, out: &mut Mat<f64>) -> bool {
        out[(0, 0)] = self.bu;
        true
    }
    fn cost_grad_x(&self, x: &[f64], _u: &[f64], _t: f64, out: &mut [f64]) -> bool {
        out[0] = x[0] - 1.0;
        true
    }
    fn cost_grad_u(&self, _x: &[f64], u: &[f64], _t: f64, out: &mut [f64]) -> bool {
        out[0] = u[0];
        true
    }
    fn cost_hess_xx(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
        out[(0, 0)] = 1.0;
        true
    }
    fn cost_hess_ux(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
        out[(0, 0)] = 0.0;
        true
    }
    fn terminal_grad(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[0] = 1.0;
        true
    }
    fn terminal_hess(&self, _x: &[f64], out: &mut Mat<f64>) -> bool {
        out[(0, 0)] = 0.0;
        true
    }
}

/// Vector affine dynamics `a = A x + B u`, `b_l = C_l x + D_l u + e_l`,
/// cost `L = ½|x − 1|² + ½|u|² + ¼ Σ x_i⁴`, `h = ½|x|²`.
#[derive(Clone, Debug)]
pub struct AffineN {
    pub a: Mat<f64>,
    pub b: Mat<f64>,
    pub c: Vec<Mat<f64>>,
    pub d: Vec<Mat<f64>>,
    pub e: Vec<Vec<f64>>,
    pub quartic: bool,
}

impl AffineN {
    /// Two states, two controls, two noises with state- and control-dependent diffusion.
    pub fn coupled() -> Self {
        Self {
            a: rows(&[vec![-0.5, 0.3], vec![0.2, -0.4]]),
            b: rows(&[vec![1.0, 0.0], vec![0.5, 1.0]]),
            c: vec![rows(&[vec![0.2, 0.0], vec![0.1, 0.1]]), rows(&[vec![0.0, -0.1], vec![0.15, 0.0]])],
            d: vec![rows(&[vec![0.3, 0.0], vec![0.0, 0.1]]), rows(&[vec![0.0, 0.2], vec![-0.1, 0.0]])],
            e: vec![vec![0.3, 0.1], vec![0.0, 0.2]],
            quartic: false,
        }
    }

    pub fn problem(self, x0: Vec<f64>, covariance: Option<Mat<f64>>) -> ControlProblem<f64> {
        let mut b = ControlProblem::builder(Arc::new(self)).horizon(1.0).initial_state(x0);
        if let Some(q) = covariance {
            b = b.covariance(q);
        }
        b.build().unwrap()
    }
}

impl Model<f64> for AffineN {
    fn dims(&self) -> Dims {
        Dims::new(self.a.rows(), self.b.cols(), self.c.len())
    }
    fn drift(&self, x: &[f64], u: &[f64], _t: f64, out: &mut [f64]) {
        let ax = self.a.matvec(x);
        let bu = self.b.matvec(u);
        for i in 0..out.len() {
            out[i] = ax[i] + bu[i];
        }
    }
    fn diffusion(&self, x: &[f64], u: &[f64], _t: f64, out: &mut Mat<f64>) {
        for l in 0..self.c.len() {
            let cx = self.c[l].matvec(x);
            let du = self.d[l].matvec(u);
            for i in 0..x.len() {
                out[(i, l)] = cx[i] + du[i] + self.e[l][i];
            }
        }
    }
    fn running_cost(&self, x: &[f64], u: &[f64], _t: f64) -> f64 {
        let mut s = 0.0;
        for &v in x {
            s += 0.5 * (v - 1.0).powi(2);
            if self.quartic {
                s += 0.25 * v.powi(4);
            }
        }
        s + 0.5 * u.iter().map(|v| v * v).sum::<f64>()
    }
    fn terminal_cost(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn drift_jac_x(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
        out.copy_from(&self.a);
        true
    }
    fn drift_jac_u(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
        out.copy_from(&self.b);
        true
    }
    fn diffusion_jac_x(&self, _x: &[f64], _u: &[f64], _t: f64, l: usize, out: &mut Mat<f64>) -> bool {
        out.copy_from(&self.c[l]);
        true
    }
    fn diffusion_jac_u(&self, _x: &[f64], _u: &[f64], _t: f64, l: usize, out: &mut Mat<f64>) -> bool {
        out.copy_from(&self.d[l]);
        true
    }
    fn cost_grad_x(&self, x: &[f64], _u: &[f64], _t: f64, out: &mut [f64]) -> bool {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = v - 1.0 + if self.quartic { v.powi(3) } else { 0.0 };
        }
        true
    }
    fn cost_grad_u(&self, _x: &[f64], u: &[f64], _t: f64, out: &mut [f64]) -> bool {
        out.copy_from_slice(u);
        true
    }
    fn cost_hess_xx(&self, x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
        out.fill(0.0);
        for (i, &v) in x.iter().enumerate() {
            out[(i, i)] = 1.0 + if self.quartic { 3.0 * v * v } else { 0.0 };
        }
        true
    }
    fn cost_hess_ux(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
        out.fill(0.0);
        true
    }
    fn terminal_grad(&self, x: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(x);
        true
    }
    fn terminal_hess(&self, _x: &[f64], out: &mut Mat<f64>) -> bool {
        out.set_identity();
        true
    }
}

/// Combined standard error of two independent-looking estimates.
pub fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Common-random-number central difference of `J` in `u_{t_j}[c]`, per unit `dt`,
/// with its standard error over paths.
pub fn crn_fd(
    problem: &ControlProblem<f64>,
    control: &PiecewiseControl<f64>,
    increments: &Increments<f64>,
    j: usize,
    c: usize,
    eps: f64,
) -> (f64, f64) {
    let grid = *control.grid();
    let cost = |sign: f64| {
        let mut u = control.clone();
        u.at_mut(j)[c] += sign * eps;
        let paths = simulate_forward(problem, &u, increments, &grid, 0).unwrap();
        evaluate_cost(problem, &paths, &u).unwrap().per_path
    };
    let (up, down) = (cost(1.0), cost(-1.0));
    let d: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * eps * grid.dt())).collect();
    mean_and_std_error(&d)
}

pub fn increments(problem: &ControlProblem<f64>, grid: &TimeGrid<f64>, batch: usize, seed: u64) -> Increments<f64> {
    sample_with_factor(grid, problem.noise_factor(), batch, seed)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub fn rows(r: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_rows(r).unwrap()
}

/// One Malliavin-vs-finite-difference comparison at `(node, coordinate)`.
#[derive(Clone, Debug)]
pub struct FdCheck {
    pub node: usize,
    pub coord: usize,
    pub malliavin: f64,
    pub malliavin_se: f64,
    pub fd: f64,
    pub fd_se: f64,
}

impl FdCheck {
    pub fn passes(&self) -> bool {
        let tol = (0.05 * self.fd.abs()).max(3.0 * combined(self.malliavin_se, self.fd_se));
        (self.malliavin - self.fd).abs() <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Scalar,
    Vector(FlowMode),
}

/// Gradient on one path batch, finite differences on the same increments.
pub fn fd_oracle(
    problem: &ControlProblem<f64>,
    control: &PiecewiseControl<f64>,
    batch: usize,
    seed: u64,
    pairs: &[(usize, usize)],
    route: Route,
) -> Vec<FdCheck> {
    let grid = *control.grid();
    let inc = increments(problem, &grid, batch, seed);
    let paths = simulate_forward(problem, control, &inc, &grid, seed).unwrap();
    let g: GradientEstimate<f64> = match route {
        Route::Scalar => scalar_gradient_from_paths(problem, control, &paths).unwrap(),
        Route::Vector(mode) => gradient_from_paths(problem, control, &paths, mode).unwrap(),
    };
    pairs
        .iter()
        .map(|&(j, c)| {
            let (fd, fd_se) = crn_fd(problem, control, &inc, j, c, 1e-4);
            FdCheck { node: j, coord: c, malliavin: g.at(j)[c], malliavin_se: g.std_error_at(j)[c], fd, fd_se }
        })
        .collect()
}

/// Six nodes spread over a 100-step grid, cycling through the control coordinates.
pub fn spread_pairs(dim: usize) -> Vec<(usize, usize)> {
    [0, 20, 40, 60, 80, 95].iter().enumerate().map(|(i, &j)| (j, i % dim)).collect()
}

/// Half the reference control where one exists, otherwise a decreasing ramp.
pub fn probe_control(bench: &malgpro::benchmarks::BenchmarkProblem<f64>, steps: usize) -> PiecewiseControl<f64> {
    let k = bench.problem.dims().control;
    match bench.reference_on(steps).unwrap() {
        Some(r) => PiecewiseControl::from_values(*r.grid(), k, r.values().iter().map(|v| 0.5 * v).collect()).unwrap(),
        None => {
            let grid = TimeGrid::new(bench.problem.horizon(), steps).unwrap();
            PiecewiseControl::from_fn(grid, k, |t: f64| vec![0.3 - 0.4 * t; k]).unwrap()
        }
    }
}
