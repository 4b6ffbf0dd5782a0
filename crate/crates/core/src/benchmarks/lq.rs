use std::sync::Arc;

use rand::Rng;

use crate::benchmarks::{BenchmarkProblem, ReferenceControl};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::malgpro::PiecewiseControl;
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, Dims, Model, TimeGrid};

/// `dx = (A x + B u) dt + Σ dw`, cost `½(xᵀQx + uᵀRu)`, no terminal cost.
#[derive(Clone, Debug)]
pub struct Lq<T> {
    pub a: Mat<T>,
    pub b: Mat<T>,
    pub q: Mat<T>,
    pub r: Mat<T>,
    pub sigma: Mat<T>,
}

fn quad<T: Scalar>(m: &Mat<T>, v: &[T]) -> T {
    crate::linalg::dot(v, &m.matvec(v))
}

impl<T: Scalar> Model<T> for Lq<T> {
    fn dims(&self) -> Dims {
        Dims::new(self.a.rows(), self.b.cols(), self.sigma.cols())
    }
    fn drift(&self, x: &[T], u: &[T], _t: T, out: &mut [T]) {
        let ax = self.a.matvec(x);
        let bu = self.b.matvec(u);
        for ((o, p), q) in out.iter_mut().zip(ax).zip(bu) {
            *o = p + q;
        }
    }
    fn diffusion(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) {
        out.copy_from(&self.sigma);
    }
    fn running_cost(&self, x: &[T], u: &[T], _t: T) -> T {
        T::half() * (quad(&self.q, x) + quad(&self.r, u))
    }
    fn terminal_cost(&self, _x: &[T]) -> T {
        T::zero()
    }
    fn drift_jac_x(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.copy_from(&self.a);
        true
    }
    fn drift_jac_u(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.copy_from(&self.b);
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
    fn cost_grad_x(&self, x: &[T], _u: &[T], _t: T, out: &mut [T]) -> bool {
        out.copy_from_slice(&self.q.matvec(x));
        true
    }
    fn cost_grad_u(&self, _x: &[T], u: &[T], _t: T, out: &mut [T]) -> bool {
        out.copy_from_slice(&self.r.matvec(u));
        true
    }
    fn cost_hess_xx(&self, _x: &[T], _u: &[T], _t: T, out: &mut Mat<T>) -> bool {
        out.copy_from(&self.q);
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

/// Draws `A = −0.5 U_1` and `B = U_2` with i.i.d. uniform `[0, 1)` entries from `seed`.
pub fn lq_matrices<T: Scalar>(dim: usize, seed: u64) -> (Mat<T>, Mat<T>) {
    let mut rng = substream(seed, 0);
    let mut draw = |scale: f64| {
        let v: Vec<T> = (0..dim * dim).map(|_| T::lit(scale * rng.random::<f64>())).collect();
        Mat::from_vec(dim, dim, v)
    };
    let a = draw(-0.5);
    let b = draw(1.0);
    (a, b)
}

/// Linear-quadratic regulator with `n = k = d = dim`, `Q = I`, `R = 0.1 I`, `Σ = 0.3 I`,
/// `x_0 = −1` and the Riccati open-loop optimum attached.
pub fn lq_problem<T: Scalar>(dim: usize, seed: u64) -> Result<BenchmarkProblem<T>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("LQ dimension must be at least 1".into()));
    }
    let (a, b) = lq_matrices(dim, seed);
    let q = Mat::identity(dim);
    let r = Mat::identity(dim).scaled(T::lit(0.1));
    let sigma = Mat::identity(dim).scaled(T::lit(0.3));
    let x0 = vec![-T::one(); dim];
    let model = Lq { a: a.clone(), b: b.clone(), q: q.clone(), r: r.clone(), sigma };
    let problem = ControlProblem::builder(Arc::new(model)).horizon(T::one()).initial_state(x0.clone()).build()?;
    Ok(BenchmarkProblem {
        name: "lq",
        problem,
        reference: Some(ReferenceControl::Riccati { a, b, q, r, x0 }),
        notes: format!("n = k = d = {dim}, matrix seed {seed}, x0 = -1"),
    })
}

/// Backward Riccati solution, its mean trajectory and the open-loop optimal control.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiSolution<T: Scalar> {
    /// `P_{t_j}`, `j = 0..=N`.
    pub p: Vec<Mat<T>>,
    /// `m_{t_j}`, `j = 0..=N`.
    pub mean_path: Vec<Vec<T>>,
    /// `u^a_{t_j} = −R⁻¹Bᵀ P_{t_j} m_{t_j}`, `j < N`.
    pub control: PiecewiseControl<T>,
}

/// `AᵀP + PA − P S P + Q` with `S = B R⁻¹ Bᵀ`.
fn riccati_rhs<T: Scalar>(a: &Mat<T>, s: &Mat<T>, q: &Mat<T>, p: &Mat<T>) -> Mat<T> {
    let pa = p.matmul(a);
    let mut out = pa.transpose();
    out.add_scaled(T::one(), &pa);
    out.add_scaled(-T::one(), &p.matmul(s).matmul(p));
    out.add_scaled(T::one(), q);
    out
}

fn symmetrize<T: Scalar>(p: &mut Mat<T>) {
    let n = p.rows();
    for i in 0..n {
        for j in i + 1..n {
            let v = T::half() * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

fn combine<T: Scalar>(base: &Mat<T>, h: T, k: &Mat<T>) -> Mat<T> {
    let mut out = base.clone();
    out.add_scaled(h, k);
    out
}

/// Solves `−dP/dt = AᵀP + PA − PBR⁻¹BᵀP + Q`, `P_T = 0`, with classical RK4 on a
/// half-step grid, then integrates `ṁ = (A − BR⁻¹BᵀP) m` forward from `x_0` with RK4,
/// using the half-step values of `P` at the stage midpoints.
pub fn riccati_oracle<T: Scalar>(
    a: &Mat<T>,
    b: &Mat<T>,
    q_cost: &Mat<T>,
    r_cost: &Mat<T>,
    x0: &[T],
    grid: &TimeGrid<T>,
) -> Result<RiccatiSolution<T>> {
    let n = a.rows();
    let k = b.cols();
    if a.shape() != (n, n) || b.rows() != n || q_cost.shape() != (n, n) || r_cost.shape() != (k, k) || x0.len() != n {
        return Err(Error::InvalidArgument("Riccati data have inconsistent shapes".into()));
    }
    // K = R⁻¹ Bᵀ (k×n)
    let gain = r_cost
        .spd_solve(&b.transpose())
        .map_err(|e| Error::InvalidArgument(format!("R must be symmetric positive definite: {e}")))?;
    let s = b.matmul(&gain);
    let steps = grid.steps();
    let h = grid.dt() * T::half();
    let mut half = vec![Mat::zeros(n, n); 2 * steps + 1];
    for i in (0..2 * steps).rev() {
        // backward in time is forward in τ = T − t
        let p = &half[i + 1];
        let k1 = riccati_rhs(a, &s, q_cost, p);
        let k2 = riccati_rhs(a, &s, q_cost, &combine(p, h * T::half(), &k1));
        let k3 = riccati_rhs(a, &s, q_cost, &combine(p, h * T::half(), &k2));
        let k4 = riccati_rhs(a, &s, q_cost, &combine(p, h, &k3));
        let mut next = p.clone();
        let w = h / T::lit(6.0);
        next.add_scaled(w, &k1);
        next.add_scaled(w * T::two(), &k2);
        next.add_scaled(w * T::two(), &k3);
        next.add_scaled(w, &k4);
        symmetrize(&mut next);
        half[i] = next;
    }
    let closed = |p: &Mat<T>| {
        let mut c = a.clone();
        c.add_scaled(-T::one(), &s.matmul(p));
        c
    };
    let dt = grid.dt();
    let mut mean_path = Vec::with_capacity(steps + 1);
    mean_path.push(x0.to_vec());
    for j in 0..steps {
        let m = &mean_path[j];
        let (c0, c1, c2) = (closed(&half[2 * j]), closed(&half[2 * j + 1]), closed(&half[2 * j + 2]));
        let k1 = c0.matvec(m);
        let mid1: Vec<T> = m.iter().zip(&k1).map(|(&v, &d)| v + d * dt * T::half()).collect();
        let k2 = c1.matvec(&mid1);
        let mid2: Vec<T> = m.iter().zip(&k2).map(|(&v, &d)| v + d * dt * T::half()).collect();
        let k3 = c1.matvec(&mid2);
        let end: Vec<T> = m.iter().zip(&k3).map(|(&v, &d)| v + d * dt).collect();
        let k4 = c2.matvec(&end);
        let next = (0..n).map(|i| m[i] + dt / T::lit(6.0) * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i])).collect();
        mean_path.push(next);
    }
    let p: Vec<Mat<T>> = half.into_iter().step_by(2).collect();
    let mut values = Vec::with_capacity(steps * k);
    for j in 0..steps {
        let u = gain.matmul(&p[j]).matvec(&mean_path[j]);
        values.extend(u.into_iter().map(|v| -v));
    }
    let control = PiecewiseControl::from_values(*grid, k, values)?;
    Ok(RiccatiSolution { p, mean_path, control })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrices_are_seeded_and_scaled() {
        let (a, b) = lq_matrices::<f64>(4, 9);
        assert!(a.as_slice().iter().all(|&v| (-0.5..=0.0).contains(&v)));
        assert!(b.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
        assert_eq!(lq_matrices::<f64>(4, 9), (a, b.clone()));
        assert_ne!(lq_matrices::<f64>(4, 10).1, b);
    }

    #[test]
    fn no_state_cost_means_no_control() {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let (a, b) = lq_matrices::<f64>(3, 1);
        let sol = riccati_oracle(&a, &b, &Mat::zeros(3, 3), &Mat::identity(3), &[1.0, 2.0, 3.0], &grid).unwrap();
        assert!(sol.p.iter().all(|p| p.max_abs() == 0.0));
        assert!(sol.control.values().iter().all(|&u| u == 0.0));
    }

    #[test]
    fn singular_r_is_rejected() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let err = riccati_oracle(&Mat::zeros(1, 1), &Mat::identity(1), &Mat::identity(1), &Mat::zeros(1, 1), &[1.0], &grid);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}
