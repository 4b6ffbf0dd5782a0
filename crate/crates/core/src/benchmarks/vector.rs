use std::sync::Arc;

use crate::benchmarks::{BenchmarkProblem, ReferenceControl};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::malgpro::AdmissibleSet;
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, Dims, Model};

/// `dx = (u·1 − (t/2)·1) dt + dw` in R³, cost `½[(x − x*)ᵀC(x − x*) + u²]`.
#[derive(Clone, Debug)]
pub struct Tracking<T> {
    pub horizon: T,
    pub weights: [T; 3],
    pub offset: [T; 3],
}

impl<T: Scalar> Tracking<T> {
    pub fn standard() -> Self {
        Self { horizon: T::one(), weights: [T::lit(3.0), T::one(), T::two()], offset: [T::lit(-0.5), T::zero(), T::one()] }
    }

    /// `x*_t = (3Tt − t²/2)·1 + (−½, 0, 1)ᵀ`.
    pub fn target(&self, t: T) -> [T; 3] {
        let base = T::lit(3.0) * self.horizon * t - t * t * T::half();
        [base + self.offset[0], base + self.offset[1], base + self.offset[2]]
    }

    /// `u^a_t = 3T − t/2 − (2.5 cosh(√6 t) + √6 sinh(√6 (t − T))) / cosh(√6 T)`.
    pub fn analytic_control(&self, t: T) -> T {
        let r6 = T::lit(6.0).sqrt();
        T::lit(3.0) * self.horizon
            - t * T::half()
            - (T::lit(2.5) * (r6 * t).cosh() + r6 * (r6 * (t - self.horizon)).sinh()) / (r6 * self.horizon).cosh()
    }
}

impl<T: Scalar> Model<T> for Tracking<T> {
    fn dims(&self) -> Dims {
        Dims::new(3, 1, 3)
    }
    fn drift(&self, _x: &[T], u: &[T], t: T, out: &mut [T]) {
        out.fill(u[0] - t * T::half());
    }
    fn diffusion(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) {
        out.set_identity();
    }
    fn running_cost(&self, x: &[T], u: &[T], t: T) -> T {
        let target = self.target(t);
        let mut s = u[0] * u[0];
        for i in 0..3 {
            let e = x[i] - target[i];
            s += self.weights[i] * e * e;
        }
        T::half() * s
    }
    fn terminal_cost(&self, _x: &[T]) -> T {
        T::zero()
    }
    fn drift_jac_x(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.fill(T::zero());
        true
    }
    fn drift_jac_u(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.fill(T::one());
        true
    }
    fn diffusion_jac_x(&self, _x: &[T], _u: &[T], _t: T, _l: usize, out: &mut Mat<T>) -> bool {
        out.fill(T::zero());
        true
    }
    fn diffusion_jac_u(&self, _x: &[T], _u: &[T], _t: T, _l: usize, out: &mut Mat<T>) -> bool {
        out.fill(T::zero());
        true
    }
    fn cost_grad_x(&self, x: &[T], _u: &[T], t: T, out: &mut [T]) -> bool {
        let target = self.target(t);
        for i in 0..3 {
            out[i] = self.weights[i] * (x[i] - target[i]);
        }
        true
    }
    fn cost_grad_u(&self, _x: &[T], u: &[T], _t: T, out: &mut [T]) -> bool {
        out[0] = u[0];
        true
    }
    fn cost_hess_xx(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.copy_from(&Mat::from_diag(&self.weights));
        true
    }
    fn cost_hess_ux(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.fill(T::zero());
        true
    }
    fn terminal_grad(&self, _x: &[T], out: &mut [T]) -> bool {
        out.fill(T::zero());
        true
    }
    fn terminal_hess(&self, _x: &[T], out: &mut Mat<T>) -> bool {
        out.fill(T::zero());
        true
    }
}

/// Two-dimensional problem with cubic drift and control-dependent diffusion:
/// `a = (−x_0 − 2x_1² − x_c³/2 + u_0, −cos x_1 + u_1)`, `b = (0.4 + u_0, 0.2 + 2u_1)`,
/// cost `xᵀRx + uᵀCu`. The cubic term reads coordinate `c = cubic_index`.
#[derive(Clone, Debug)]
pub struct Nonlinear<T> {
    pub cubic_index: usize,
    pub r: [T; 2],
    pub c: [T; 2],
}

impl<T: Scalar> Nonlinear<T> {
    pub fn new(cubic_index: usize) -> Result<Self> {
        if cubic_index > 1 {
            return Err(Error::InvalidArgument(format!("cubic index must be 0 or 1, got {cubic_index}")));
        }
        Ok(Self { cubic_index, r: [T::one(), T::two()], c: [T::one(), T::lit(4.0)] })
    }
}

impl<T: Scalar> Model<T> for Nonlinear<T> {
    fn dims(&self) -> Dims {
        Dims::new(2, 2, 1)
    }
    fn drift(&self, x: &[T], u: &[T], _t: T, out: &mut [T]) {
        let xc = x[self.cubic_index];
        out[0] = -x[0] - T::two() * x[1] * x[1] - xc * xc * xc * T::half() + u[0];
        out[1] = -x[1].cos() + u[1];
    }
    fn diffusion(&self, _x: &[T], u: &[T], _t: T, out: &mut Mat<T>) {
        out[(0, 0)] = T::lit(0.4) + u[0];
        out[(1, 0)] = T::lit(0.2) + T::two() * u[1];
    }
    fn running_cost(&self, x: &[T], u: &[T], _t: T) -> T {
        self.r[0] * x[0] * x[0] + self.r[1] * x[1] * x[1] + self.c[0] * u[0] * u[0] + self.c[1] * u[1] * u[1]
    }
    fn terminal_cost(&self, _x: &[T]) -> T {
        T::zero()
    }
    fn drift_jac_x(&self, x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        let xc = x[self.cubic_index];
        let cubic = -T::lit(1.5) * xc * xc;
        out[(0, 0)] = -T::one();
        out[(0, 1)] = -T::lit(4.0) * x[1];
        out[(0, self.cubic_index)] += cubic;
        out[(1, 0)] = T::zero();
        out[(1, 1)] = x[1].sin();
        true
    }
    fn drift_jac_u(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.set_identity();
        true
    }
    fn diffusion_jac_x(&self, _x: &[T], _u: &[T], _t: T, _l: usize, out: &mut Mat<T>) -> bool {
        out.fill(T::zero());
        true
    }
    fn diffusion_jac_u(&self, _x: &[T], _u: &[T], _t: T, _l: usize, out: &mut Mat<T>) -> bool {
        out.copy_from(&Mat::from_diag(&[T::one(), T::two()]));
        true
    }
    fn cost_grad_x(&self, x: &[T], _u: &[T], _t: T, out: &mut [T]) -> bool {
        out[0] = T::two() * self.r[0] * x[0];
        out[1] = T::two() * self.r[1] * x[1];
        true
    }
    fn cost_grad_u(&self, _x: &[T], u: &[T], _t: T, out: &mut [T]) -> bool {
        out[0] = T::two() * self.c[0] * u[0];
        out[1] = T::two() * self.c[1] * u[1];
        true
    }
    fn cost_hess_xx(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.copy_from(&Mat::from_diag(&[T::two() * self.r[0], T::two() * self.r[1]]));
        true
    }
    fn cost_hess_ux(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.fill(T::zero());
        true
    }
    fn terminal_grad(&self, _x: &[T], out: &mut [T]) -> bool {
        out.fill(T::zero());
        true
    }
    fn terminal_hess(&self, _x: &[T], out: &mut Mat<T>) -> bool {
        out.fill(T::zero());
        true
    }
}

/// Three-dimensional tracking problem with a scalar control and closed-form optimum.
pub fn vector_tracking<T: Scalar>() -> Result<BenchmarkProblem<T>> {
    let model = Tracking::standard();
    let reference = model.clone();
    let problem = ControlProblem::builder(Arc::new(model)).horizon(T::one()).initial_state(vec![-T::one(); 3]).build()?;
    Ok(BenchmarkProblem {
        name: "vector-tracking",
        problem,
        reference: Some(ReferenceControl::analytic(1, move |t| vec![reference.analytic_control(t)])),
        notes: "n = d = 3, k = 1, C = diag(3, 1, 2), x0 = -1".into(),
    })
}

/// The nonlinear two-dimensional problem on the box `[−1, 1]²`, with the cubic drift
/// term reading state coordinate `cubic_index`.
pub fn vector_nonlinear_with<T: Scalar>(cubic_index: usize) -> Result<BenchmarkProblem<T>> {
    let problem = ControlProblem::builder(Arc::new(Nonlinear::new(cubic_index)?))
        .horizon(T::one())
        .initial_state(vec![-T::one(); 2])
        .admissible_set(AdmissibleSet::cube(2, -T::one(), T::one())?)
        .build()?;
    Ok(BenchmarkProblem {
        name: "vector-nonlinear",
        problem,
        reference: None,
        notes: format!("cubic drift term reads x_{cubic_index}; box [-1, 1]^2; x0 = -1"),
    })
}

/// [`vector_nonlinear_with`] reading the last state coordinate.
pub fn vector_nonlinear<T: Scalar>() -> Result<BenchmarkProblem<T>> {
    vector_nonlinear_with(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracking_values() {
        let m = Tracking::<f64>::standard();
        let r6 = 6.0_f64.sqrt();
        let expected = 3.0 - (2.5 + r6 * (-r6).sinh()) / r6.cosh();
        assert!((m.analytic_control(0.0) - expected).abs() < 1e-14);
        let mut a = [1.0; 3];
        m.drift(&[0.0; 3], &[0.0], 0.0, &mut a);
        assert_eq!(a, [0.0; 3]);
        let mut ju = Mat::zeros(3, 1);
        m.drift_jac_u(&[0.0; 3], &[0.0], 0.0, &mut ju);
        assert_eq!(ju.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn nonlinear_values() {
        let m = Nonlinear::<f64>::new(1).unwrap();
        let mut b = Mat::zeros(2, 1);
        m.diffusion(&[0.3, -0.2], &[0.0, 0.0], 0.0, &mut b);
        assert_eq!(b.as_slice(), &[0.4, 0.2]);
        let mut jub = Mat::zeros(2, 2);
        m.diffusion_jac_u(&[0.0, 0.0], &[0.0, 0.0], 0.0, 0, &mut jub);
        assert_eq!(jub.as_slice(), &[1.0, 0.0, 0.0, 2.0]);
        assert!(Nonlinear::<f64>::new(2).is_err());
    }
}
