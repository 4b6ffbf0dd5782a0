use std::sync::Arc;

use crate::benchmarks::{BenchmarkProblem, ReferenceControl};
use crate::error::Result;
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, Dims, Model};

/// `dx = u x dt + σ x dw`, cost `½(x − x*_t)² + ½u²`.
#[derive(Clone, Debug)]
pub struct BlackScholes<T> {
    pub sigma: T,
    pub horizon: T,
    pub x0: T,
}

impl<T: Scalar> BlackScholes<T> {
    fn denominator(&self, t: T) -> T {
        T::one() / self.x0 - self.horizon * t + t * t * T::half()
    }

    /// `x*_t = (e^{σ²t} − (T−t)²) / (1/x_0 − T t + t²/2) + 1`.
    pub fn target(&self, t: T) -> T {
        let rem = self.horizon - t;
        ((self.sigma * self.sigma * t).exp() - rem * rem) / self.denominator(t) + T::one()
    }

    /// `u^a_t = (T − t) / (1/x_0 − T t + t²/2)`.
    pub fn analytic_control(&self, t: T) -> T {
        (self.horizon - t) / self.denominator(t)
    }
}

impl<T: Scalar> Model<T> for BlackScholes<T> {
    fn dims(&self) -> Dims {
        Dims::new(1, 1, 1)
    }
    fn drift(&self, x: &[T], u: &[T], _t: T, out: &mut [T]) {
        out[0] = u[0] * x[0];
    }
    fn diffusion(&self, x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) {
        out[(0, 0)] = self.sigma * x[0];
    }
    fn running_cost(&self, x: &[T], u: &[T], t: T) -> T {
        let e = x[0] - self.target(t);
        T::half() * (e * e + u[0] * u[0])
    }
    fn terminal_cost(&self, _x: &[T]) -> T {
        T::zero()
    }
    fn drift_jac_x(&self, _x: &[T], u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = u[0];
        true
    }
    fn drift_jac_u(&self, x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = x[0];
        true
    }
    fn diffusion_jac_x(&self, _x: &[T], _u: &[T], _t: T, _l: usize, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = self.sigma;
        true
    }
    fn diffusion_jac_u(&self, _x: &[T], _u: &[T], _t: T, _l: usize, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = T::zero();
        true
    }
    fn cost_grad_x(&self, x: &[T], _u: &[T], t: T, out: &mut [T]) -> bool {
        out[0] = x[0] - self.target(t);
        true
    }
    fn cost_grad_u(&self, _x: &[T], u: &[T], _t: T, out: &mut [T]) -> bool {
        out[0] = u[0];
        true
    }
    fn cost_hess_xx(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = T::one();
        true
    }
    fn cost_hess_ux(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = T::zero();
        true
    }
    fn terminal_grad(&self, _x: &[T], out: &mut [T]) -> bool {
        out[0] = T::zero();
        true
    }
    fn terminal_hess(&self, _x: &[T], out: &mut Mat<T>) -> bool {
        out[(0, 0)] = T::zero();
        true
    }
}

/// `dx = u x dt + σ √(1 + x²) dw`, cost `½(x − 1)² + ½u²`.
#[derive(Clone, Debug)]
pub struct SqrtDiffusion<T> {
    pub sigma: T,
}

impl<T: Scalar> Model<T> for SqrtDiffusion<T> {
    fn dims(&self) -> Dims {
        Dims::new(1, 1, 1)
    }
    fn drift(&self, x: &[T], u: &[T], _t: T, out: &mut [T]) {
        out[0] = u[0] * x[0];
    }
    fn diffusion(&self, x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) {
        out[(0, 0)] = self.sigma * (T::one() + x[0] * x[0]).sqrt();
    }
    fn running_cost(&self, x: &[T], u: &[T], _t: T) -> T {
        let e = x[0] - T::one();
        T::half() * (e * e + u[0] * u[0])
    }
    fn terminal_cost(&self, _x: &[T]) -> T {
        T::zero()
    }
    fn drift_jac_x(&self, _x: &[T], u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = u[0];
        true
    }
    fn drift_jac_u(&self, x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = x[0];
        true
    }
    fn diffusion_jac_x(&self, x: &[T], _u: &[T], _t: T, _l: usize, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = self.sigma * x[0] / (T::one() + x[0] * x[0]).sqrt();
        true
    }
    fn diffusion_jac_u(&self, _x: &[T], _u: &[T], _t: T, _l: usize, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = T::zero();
        true
    }
    fn cost_grad_x(&self, x: &[T], _u: &[T], _t: T, out: &mut [T]) -> bool {
        out[0] = x[0] - T::one();
        true
    }
    fn cost_grad_u(&self, _x: &[T], u: &[T], _t: T, out: &mut [T]) -> bool {
        out[0] = u[0];
        true
    }
    fn cost_hess_xx(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = T::one();
        true
    }
    fn cost_hess_ux(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out[(0, 0)] = T::zero();
        true
    }
    fn terminal_grad(&self, _x: &[T], out: &mut [T]) -> bool {
        out[0] = T::zero();
        true
    }
    fn terminal_hess(&self, _x: &[T], out: &mut Mat<T>) -> bool {
        out[(0, 0)] = T::zero();
        true
    }
}

/// Black–Scholes type tracking problem with σ = 0.01, x_0 = 1, T = 1 and a closed-form optimum.
pub fn scalar_blackscholes<T: Scalar>() -> Result<BenchmarkProblem<T>> {
    let model = BlackScholes { sigma: T::lit(0.01), horizon: T::one(), x0: T::one() };
    let reference = model.clone();
    let problem = ControlProblem::builder(Arc::new(model)).horizon(T::one()).initial_state(vec![T::one()]).build()?;
    Ok(BenchmarkProblem {
        name: "scalar-bs",
        problem,
        reference: Some(ReferenceControl::analytic(1, move |t| vec![reference.analytic_control(t)])),
        notes: "dx = u x dt + 0.01 x dw, x0 = 1, T = 1".into(),
    })
}

/// State-dependent diffusion `σ√(1+x²)` with σ = 0.5; no known optimum.
pub fn scalar_sqrt_diffusion<T: Scalar>() -> Result<BenchmarkProblem<T>> {
    let problem = ControlProblem::builder(Arc::new(SqrtDiffusion { sigma: T::lit(0.5) }))
        .horizon(T::one())
        .initial_state(vec![T::one()])
        .build()?;
    Ok(BenchmarkProblem {
        name: "scalar-sqrt",
        problem,
        reference: None,
        notes: "dx = u x dt + 0.5 sqrt(1 + x^2) dw, x0 = 1, T = 1".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blackscholes_closed_forms() {
        let m = BlackScholes { sigma: 0.01_f64, horizon: 1.0, x0: 1.0 };
        assert_eq!(m.analytic_control(0.0), 1.0);
        assert_eq!(m.analytic_control(1.0), 0.0);
        assert!((m.target(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_diffusion_values() {
        let m = SqrtDiffusion { sigma: 0.5_f64 };
        let mut b = Mat::zeros(1, 1);
        m.diffusion(&[0.0], &[0.0], 0.0, &mut b);
        assert_eq!(b[(0, 0)], 0.5);
        m.diffusion_jac_x(&[1.0], &[0.0], 0.0, 0, &mut b);
        assert!((b[(0, 0)] - 0.353_553_390_593_273_8).abs() < 1e-12);
        m.diffusion_jac_u(&[3.0], &[2.0], 0.0, 0, &mut b);
        assert_eq!(b[(0, 0)], 0.0);
    }
}
