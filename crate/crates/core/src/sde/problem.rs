//! Problem data: controlled dynamics, costs and their derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::malgpro::AdmissibleSet;
use crate::scalar::Scalar;

/// State, control and noise dimensions `(n, k, d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub state: usize,
    pub control: usize,
    pub noise: usize,
}

impl Dims {
    pub fn new(state: usize, control: usize, noise: usize) -> Self {
        Self { state, control, noise }
    }

    pub fn is_scalar(&self) -> bool {
        self.state == 1 && self.control == 1 && self.noise == 1
    }
}

/// Whether the objective is minimized or maximized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

/// Callbacks describing `dx = a(x,u,t) dt + Σ_l b_l(x,u,t) dw^l` and the cost
/// `E[∫ L(x,u,t) dt + h(x_T)]`.
///
/// Derivative callbacks write into `out` and return `true`; the default
/// implementations return `false`, meaning "not supplied". Buffers always have
/// the shapes implied by [`Model::dims`].
pub trait Model<T: Scalar>: Send + Sync {
    fn dims(&self) -> Dims;

    fn drift(&self, x: &[T], u: &[T], t: T, out: &mut [T]);

    /// Diffusion matrix `B = [b_1 .. b_d]` (n×d).
    fn diffusion(&self, x: &[T], u: &[T], t: T, out: &mut Mat<T>);

    fn running_cost(&self, x: &[T], u: &[T], t: T) -> T;

    fn terminal_cost(&self, x: &[T]) -> T;

    /// `J_x a` (n×n).
    fn drift_jac_x(&self, _x: &[T], _u: &[T], _t: T, _out: &mut Mat<T>) -> bool {
        false
    }

    /// `J_u a` (n×k).
    fn drift_jac_u(&self, _x: &[T], _u: &[T], _t: T, _out: &mut Mat<T>) -> bool {
        false
    }

    /// `J_x b_l` (n×n).
    fn diffusion_jac_x(&self, _x: &[T], _u: &[T], _t: T, _l: usize, _out: &mut Mat<T>) -> bool {
        false
    }

    /// `J_u b_l` (n×k).
    fn diffusion_jac_u(&self, _x: &[T], _u: &[T], _t: T, _l: usize, _out: &mut Mat<T>) -> bool {
        false
    }

    fn cost_grad_x(&self, _x: &[T], _u: &[T], _t: T, _out: &mut [T]) -> bool {
        false
    }

    fn cost_grad_u(&self, _x: &[T], _u: &[T], _t: T, _out: &mut [T]) -> bool {
        false
    }

    /// `∇²_x L` (n×n).
    fn cost_hess_xx(&self, _x: &[T], _u: &[T], _t: T, _out: &mut Mat<T>) -> bool {
        false
    }

    /// `∇_{ux} L` (k×n).
    fn cost_hess_ux(&self, _x: &[T], _u: &[T], _t: T, _out: &mut Mat<T>) -> bool {
        false
    }

    fn terminal_grad(&self, _x: &[T], _out: &mut [T]) -> bool {
        false
    }

    fn terminal_hess(&self, _x: &[T], _out: &mut Mat<T>) -> bool {
        false
    }
}

/// A fully specified stochastic optimal control problem.
#[derive(Clone)]
pub struct ControlProblem<T: Scalar> {
    model: Arc<dyn Model<T>>,
    dims: Dims,
    horizon: T,
    initial_state: Vec<T>,
    covariance: Mat<T>,
    noise_factor: Mat<T>,
    admissible: AdmissibleSet<T>,
    sense: Sense,
    finite_difference_fallback: bool,
}

impl<T: Scalar> fmt::Debug for ControlProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("dims", &self.dims)
            .field("horizon", &self.horizon)
            .field("initial_state", &self.initial_state)
            .field("sense", &self.sense)
            .finish_non_exhaustive()
    }
}

pub struct ControlProblemBuilder<T: Scalar> {
    model: Arc<dyn Model<T>>,
    horizon: T,
    initial_state: Option<Vec<T>>,
    covariance: Option<Mat<T>>,
    admissible: Option<AdmissibleSet<T>>,
    sense: Sense,
    finite_difference_fallback: bool,
}

impl<T: Scalar> ControlProblemBuilder<T> {
    pub fn horizon(mut self, horizon: T) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn initial_state(mut self, x0: Vec<T>) -> Self {
        self.initial_state = Some(x0);
        self
    }

    /// Covariance `Q` of the driving Wiener process (identity when unset).
    pub fn covariance(mut self, q: Mat<T>) -> Self {
        self.covariance = Some(q);
        self
    }

    pub fn admissible_set(mut self, set: AdmissibleSet<T>) -> Self {
        self.admissible = Some(set);
        self
    }

    pub fn sense(mut self, sense: Sense) -> Self {
        self.sense = sense;
        self
    }

    /// Fill unsupplied derivative callbacks with central finite differences.
    pub fn finite_difference_fallback(mut self, enabled: bool) -> Self {
        self.finite_difference_fallback = enabled;
        self
    }

    pub fn build(self) -> Result<ControlProblem<T>> {
        let dims = self.model.dims();
        if dims.state == 0 || dims.control == 0 || dims.noise == 0 {
            return Err(Error::InvalidArgument(format!("dimensions must be positive, got {dims:?}")));
        }
        if self.horizon <= T::zero() || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        let initial_state = self.initial_state.unwrap_or_else(|| vec![T::zero(); dims.state]);
        if initial_state.len() != dims.state {
            return Err(Error::InvalidArgument(format!(
                "initial state has length {}, expected {}",
                initial_state.len(),
                dims.state
            )));
        }
        let covariance = self.covariance.unwrap_or_else(|| Mat::identity(dims.noise));
        if covariance.shape() != (dims.noise, dims.noise) {
            return Err(Error::InvalidArgument(format!(
                "covariance is {:?}, expected {}x{}",
                covariance.shape(),
                dims.noise,
                dims.noise
            )));
        }
        let noise_factor = covariance.cholesky()?;
        let admissible = self.admissible.unwrap_or(AdmissibleSet::Unbounded { dim: dims.control });
        if admissible.dim() != dims.control {
            return Err(Error::InvalidArgument(format!(
                "admissible set has dimension {}, expected {}",
                admissible.dim(),
                dims.control
            )));
        }
        let problem = ControlProblem {
            model: self.model,
            dims,
            horizon: self.horizon,
            initial_state,
            covariance,
            noise_factor,
            admissible,
            sense: self.sense,
            finite_difference_fallback: self.finite_difference_fallback,
        };
        problem.check_callbacks()?;
        Ok(problem)
    }
}

/// Central finite-difference step for a component of magnitude `v`.
fn fd_step<T: Scalar>(v: T) -> T {
    T::lit(1e-6) * (T::one() + v.abs())
}

impl<T: Scalar> ControlProblem<T> {
    pub fn builder(model: Arc<dyn Model<T>>) -> ControlProblemBuilder<T> {
        ControlProblemBuilder {
            model,
            horizon: T::one(),
            initial_state: None,
            covariance: None,
            admissible: None,
            sense: Sense::Minimize,
            finite_difference_fallback: false,
        }
    }

    /// Evaluates every callback once at `(x_0, u = 0, t = 0)` and rejects non-finite output.
    fn check_callbacks(&self) -> Result<()> {
        let Dims { state: n, control: k, noise: d } = self.dims;
        let x = self.initial_state.clone();
        let u = vec![T::zero(); k];
        let t = T::zero();
        let bad = |name: &str| Error::InvalidArgument(format!("callback `{name}` returned non-finite output at (x0, 0, 0)"));
        let mut v = vec![T::zero(); n];
        self.drift(&x, &u, t, &mut v);
        if v.iter().any(|a| !a.is_finite()) {
            return Err(bad("drift"));
        }
        let mut bm = Mat::zeros(n, d);
        self.diffusion(&x, &u, t, &mut bm);
        if !bm.is_finite() {
            return Err(bad("diffusion"));
        }
        if !self.running_cost(&x, &u, t).is_finite() {
            return Err(bad("running_cost"));
        }
        if !self.terminal_cost(&x).is_finite() {
            return Err(bad("terminal_cost"));
        }
        let mut nn = Mat::zeros(n, n);
        let mut nk = Mat::zeros(n, k);
        let mut kn = Mat::zeros(k, n);
        let mut vk = vec![T::zero(); k];
        // Missing callbacks are tolerated here; they only matter when a method needs them.
        let checks: [(&str, Result<bool>); 10] = [
            ("drift_jac_x", self.drift_jac_x(&x, &u, t, &mut nn).map(|_| nn.is_finite())),
            ("drift_jac_u", self.drift_jac_u(&x, &u, t, &mut nk).map(|_| nk.is_finite())),
            ("diffusion_jac_x", self.diffusion_jac_x(&x, &u, t, 0, &mut nn).map(|_| nn.is_finite())),
            ("diffusion_jac_u", self.diffusion_jac_u(&x, &u, t, 0, &mut nk).map(|_| nk.is_finite())),
            ("cost_grad_x", self.cost_grad_x(&x, &u, t, &mut v).map(|_| v.iter().all(|a| a.is_finite()))),
            ("cost_grad_u", self.cost_grad_u(&x, &u, t, &mut vk).map(|_| vk.iter().all(|a| a.is_finite()))),
            ("cost_hess_xx", self.cost_hess_xx(&x, &u, t, &mut nn).map(|_| nn.is_finite())),
            ("cost_hess_ux", self.cost_hess_ux(&x, &u, t, &mut kn).map(|_| kn.is_finite())),
            ("terminal_grad", self.terminal_grad(&x, &mut v).map(|_| v.iter().all(|a| a.is_finite()))),
            ("terminal_hess", self.terminal_hess(&x, &mut nn).map(|_| nn.is_finite())),
        ];
        for (name, r) in checks {
            match r {
                Ok(false) => return Err(bad(name)),
                Ok(true) | Err(Error::MissingDerivative(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn horizon(&self) -> T {
        self.horizon
    }

    #[inline]
    pub fn initial_state(&self) -> &[T] {
        &self.initial_state
    }

    /// Wiener covariance `Q`.
    #[inline]
    pub fn covariance(&self) -> &Mat<T> {
        &self.covariance
    }

    /// Lower Cholesky factor of `Q`.
    #[inline]
    pub fn noise_factor(&self) -> &Mat<T> {
        &self.noise_factor
    }

    #[inline]
    pub fn admissible_set(&self) -> &AdmissibleSet<T> {
        &self.admissible
    }

    #[inline]
    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn model(&self) -> &Arc<dyn Model<T>> {
        &self.model
    }

    pub fn with_sense(mut self, sense: Sense) -> Self {
        self.sense = sense;
        self
    }

    pub fn with_admissible_set(mut self, set: AdmissibleSet<T>) -> Result<Self> {
        if set.dim() != self.dims.control {
            return Err(Error::InvalidArgument("admissible set dimension mismatch".into()));
        }
        self.admissible = set;
        Ok(self)
    }

    #[inline]
    pub fn drift(&self, x: &[T], u: &[T], t: T, out: &mut [T]) {
        self.model.drift(x, u, t, out)
    }

    #[inline]
    pub fn diffusion(&self, x: &[T], u: &[T], t: T, out: &mut Mat<T>) {
        self.model.diffusion(x, u, t, out)
    }

    #[inline]
    pub fn running_cost(&self, x: &[T], u: &[T], t: T) -> T {
        self.model.running_cost(x, u, t)
    }

    #[inline]
    pub fn terminal_cost(&self, x: &[T]) -> T {
        self.model.terminal_cost(x)
    }

    fn fallback(&self, name: &'static str) -> Result<()> {
        if self.finite_difference_fallback {
            Ok(())
        } else {
            Err(Error::MissingDerivative(name))
        }
    }

    pub fn drift_jac_x(&self, x: &[T], u: &[T], t: T, out: &mut Mat<T>) -> Result<()> {
        if self.model.drift_jac_x(x, u, t, out) {
            return Ok(());
        }
        self.fallback("drift_jac_x")?;
        let n = self.dims.state;
        fd_jacobian(x, n, out, |xp, o| self.model.drift(xp, u, t, o));
        Ok(())
    }

    pub fn drift_jac_u(&self, x: &[T], u: &[T], t: T, out: &mut Mat<T>) -> Result<()> {
        if self.model.drift_jac_u(x, u, t, out) {
            return Ok(());
        }
        self.fallback("drift_jac_u")?;
        let n = self.dims.state;
        fd_jacobian(u, n, out, |up, o| self.model.drift(x, up, t, o));
        Ok(())
    }

    pub fn diffusion_jac_x(&self, x: &[T], u: &[T], t: T, l: usize, out: &mut Mat<T>) -> Result<()> {
        if self.model.diffusion_jac_x(x, u, t, l, out) {
            return Ok(());
        }
        self.fallback("diffusion_jac_x")?;
        let mut b = Mat::zeros(self.dims.state, self.dims.noise);
        fd_jacobian(x, self.dims.state, out, |xp, o| {
            self.model.diffusion(xp, u, t, &mut b);
            o.copy_from_slice(&b.column(l));
        });
        Ok(())
    }

    pub fn diffusion_jac_u(&self, x: &[T], u: &[T], t: T, l: usize, out: &mut Mat<T>) -> Result<()> {
        if self.model.diffusion_jac_u(x, u, t, l, out) {
            return Ok(());
        }
        self.fallback("diffusion_jac_u")?;
        let mut b = Mat::zeros(self.dims.state, self.dims.noise);
        fd_jacobian(u, self.dims.state, out, |up, o| {
            self.model.diffusion(x, up, t, &mut b);
            o.copy_from_slice(&b.column(l));
        });
        Ok(())
    }

    pub fn cost_grad_x(&self, x: &[T], u: &[T], t: T, out: &mut [T]) -> Result<()> {
        if self.model.cost_grad_x(x, u, t, out) {
            return Ok(());
        }
        self.fallback("cost_grad_x")?;
        fd_gradient(x, out, |xp| self.model.running_cost(xp, u, t));
        Ok(())
    }

    pub fn cost_grad_u(&self, x: &[T], u: &[T], t: T, out: &mut [T]) -> Result<()> {
        if self.model.cost_grad_u(x, u, t, out) {
            return Ok(());
        }
        self.fallback("cost_grad_u")?;
        fd_gradient(u, out, |up| self.model.running_cost(x, up, t));
        Ok(())
    }

    pub fn cost_hess_xx(&self, x: &[T], u: &[T], t: T, out: &mut Mat<T>) -> Result<()> {
        if self.model.cost_hess_xx(x, u, t, out) {
            return Ok(());
        }
        self.fallback("cost_hess_xx")?;
        let n = self.dims.state;
        let mut g = vec![T::zero(); n];
        fd_jacobian(x, n, out, |xp, o| {
            let _ = self.cost_grad_x(xp, u, t, &mut g);
            o.copy_from_slice(&g);
        });
        Ok(())
    }

    pub fn cost_hess_ux(&self, x: &[T], u: &[T], t: T, out: &mut Mat<T>) -> Result<()> {
        if self.model.cost_hess_ux(x, u, t, out) {
            return Ok(());
        }
        self.fallback("cost_hess_ux")?;
        let k = self.dims.control;
        let mut g = vec![T::zero(); k];
        fd_jacobian(x, k, out, |xp, o| {
            let _ = self.cost_grad_u(xp, u, t, &mut g);
            o.copy_from_slice(&g);
        });
        Ok(())
    }

    pub fn terminal_grad(&self, x: &[T], out: &mut [T]) -> Result<()> {
        if self.model.terminal_grad(x, out) {
            return Ok(());
        }
        self.fallback("terminal_grad")?;
        fd_gradient(x, out, |xp| self.model.terminal_cost(xp));
        Ok(())
    }

    pub fn terminal_hess(&self, x: &[T], out: &mut Mat<T>) -> Result<()> {
        if self.model.terminal_hess(x, out) {
            return Ok(());
        }
        self.fallback("terminal_hess")?;
        let n = self.dims.state;
        let mut g = vec![T::zero(); n];
        fd_jacobian(x, n, out, |xp, o| {
            let _ = self.terminal_grad(xp, &mut g);
            o.copy_from_slice(&g);
        });
        Ok(())
    }
}

/// Central differences of a vector function `f: R^m -> R^rows` into `out` (rows×m).
fn fd_jacobian<T: Scalar>(at: &[T], rows: usize, out: &mut Mat<T>, mut f: impl FnMut(&[T], &mut [T])) {
    let mut p = at.to_vec();
    let mut fp = vec![T::zero(); rows];
    let mut fm = vec![T::zero(); rows];
    for j in 0..at.len() {
        let h = fd_step(at[j]);
        p[j] = at[j] + h;
        f(&p, &mut fp);
        p[j] = at[j] - h;
        f(&p, &mut fm);
        p[j] = at[j];
        for i in 0..rows {
            out[(i, j)] = (fp[i] - fm[i]) / (T::two() * h);
        }
    }
}

fn fd_gradient<T: Scalar>(at: &[T], out: &mut [T], mut f: impl FnMut(&[T]) -> T) {
    let mut p = at.to_vec();
    for j in 0..at.len() {
        let h = fd_step(at[j]);
        p[j] = at[j] + h;
        let fp = f(&p);
        p[j] = at[j] - h;
        let fm = f(&p);
        p[j] = at[j];
        out[j] = (fp - fm) / (T::two() * h);
    }
}
