use crate::error::{Error, Result};
use crate::flow::PathFlow;
use crate::linalg::Mat;
use crate::malgpro::PiecewiseControl;
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, PathRef};

/// Smallest `|b(x_s, u_s)|` accepted when a Malliavin derivative is divided by it.
pub const DIFFUSION_FLOOR: f64 = 1e-12;

/// `D_{t_r} x_{t_j}` (n×d) for `j = r..=N` along one path.
#[derive(Clone, Debug, PartialEq)]
pub struct MalliavinSlice<T> {
    pub anchor: usize,
    pub derivatives: Vec<Mat<T>>,
}

impl<T: Scalar> MalliavinSlice<T> {
    /// `D_{t_r} x_{t_j}`.
    pub fn at(&self, j: usize) -> Result<&Mat<T>> {
        if j < self.anchor {
            return Err(Error::InvalidArgument(format!("D_s x_t needs s <= t, got s={}, t={j}", self.anchor)));
        }
        self.derivatives.get(j - self.anchor).ok_or_else(|| Error::InvalidArgument(format!("node {j} is beyond the last node")))
    }
}

/// `D_{t_r} x_{t_j} = Γ_{t_r, t_j} B(x_{t_r}, u_{t_r})` for every `j ≥ r`.
pub fn malliavin_derivative<T: Scalar>(
    flow: &PathFlow<T>,
    path: &PathRef<'_, T>,
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    anchor: usize,
) -> Result<MalliavinSlice<T>> {
    let steps = flow.steps();
    if anchor > steps {
        return Err(Error::InvalidArgument(format!("anchor {anchor} is beyond the last node {steps}")));
    }
    let dims = problem.dims();
    let mut b = Mat::zeros(dims.state, dims.noise);
    // The control has no value at t_N; the anchor there reuses the last interval's value.
    let u = control.at(anchor.min(steps - 1));
    problem.diffusion(path.state(anchor), u, control.grid().node(anchor), &mut b);
    let derivatives = (anchor..=steps).map(|j| Ok(flow.gamma(anchor, j)?.matmul(&b))).collect::<Result<_>>()?;
    Ok(MalliavinSlice { anchor, derivatives })
}

fn require_scalar<T: Scalar>(problem: &ControlProblem<T>, s: usize, t: usize, steps: usize) -> Result<()> {
    let dims = problem.dims();
    if dims.state != 1 || dims.noise != 1 {
        return Err(Error::InvalidArgument(format!("closed form needs n = d = 1, got n = {}, d = {}", dims.state, dims.noise)));
    }
    if s > t || t > steps {
        return Err(Error::InvalidArgument(format!("need s <= t <= {steps}, got s={s}, t={t}")));
    }
    Ok(())
}

/// Scalar flow ratio `η_t / η_s = exp(Σ_{j∈[s,t)} (a_x − ½ q b_x²) dt + b_x Δw_j)`,
/// which equals `D_s x_t / b(x_s, u_s)` without dividing by `b`.
pub fn scalar_flow_ratio<T: Scalar>(
    path: &PathRef<'_, T>,
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    s: usize,
    t: usize,
) -> Result<T> {
    let grid = control.grid();
    require_scalar(problem, s, t, grid.steps())?;
    let q = problem.covariance()[(0, 0)];
    let mut ax = Mat::zeros(1, 1);
    let mut bx = Mat::zeros(1, 1);
    let mut exponent = T::zero();
    for j in s..t {
        let (x, u, tj) = (path.state(j), control.at(j), grid.node(j));
        problem.drift_jac_x(x, u, tj, &mut ax)?;
        problem.diffusion_jac_x(x, u, tj, 0, &mut bx)?;
        let (a, b) = (ax[(0, 0)], bx[(0, 0)]);
        exponent += (a - T::half() * q * b * b) * grid.dt() + b * path.dw(j)[0];
    }
    Ok(exponent.exp())
}

/// Scalar `D_s x_t = b(x_s, u_s) · η_t / η_s`.
pub fn scalar_malliavin_closed_form<T: Scalar>(
    path: &PathRef<'_, T>,
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
    s: usize,
    t: usize,
) -> Result<T> {
    let ratio = scalar_flow_ratio(path, problem, control, s, t)?;
    let grid = control.grid();
    let mut b = Mat::zeros(1, 1);
    problem.diffusion(path.state(s), control.at(s.min(grid.steps() - 1)), grid.node(s), &mut b);
    Ok(b[(0, 0)] * ratio)
}

/// `D_s x_t / b(x_s)` from an explicit derivative value. Rejects `|b| < 1e-12`;
/// prefer [`scalar_flow_ratio`], which never divides.
pub fn explicit_quotient<T: Scalar>(derivative: T, diffusion: T) -> Result<T> {
    if diffusion.is_nan() || diffusion.abs() < T::lit(DIFFUSION_FLOOR) {
        return Err(Error::InvalidArgument(format!(
            "|b(x_s, u_s)| = {} is below {DIFFUSION_FLOOR:e}; use the flow ratio instead",
            diffusion.abs()
        )));
    }
    Ok(derivative / diffusion)
}
