use crate::error::{Error, Result};
use crate::linalg::{matmul_into, Mat};
use crate::malgpro::PiecewiseControl;
use crate::scalar::Scalar;
use crate::sde::{ControlProblem, PathRef};

/// Largest accepted `‖Y‖_F ‖Z‖_F` before the factorized flow is abandoned.
pub const CONDITION_LIMIT: f64 = 1e8;

/// Writes the one-step flow increment `E = J_x a dt + Σ_l J_x b_l Δw^l` at node `j`.
pub fn step_generator<T: Scalar>(
    problem: &ControlProblem<T>,
    path: &PathRef<'_, T>,
    control: &PiecewiseControl<T>,
    j: usize,
    out: &mut Mat<T>,
    scratch: &mut Mat<T>,
) -> Result<()> {
    let grid = control.grid();
    let (x, u, t) = (path.state(j), control.at(j), grid.node(j));
    problem.drift_jac_x(x, u, t, out)?;
    for v in out.as_mut_slice() {
        *v *= grid.dt();
    }
    for (l, &w) in path.dw(j).iter().enumerate() {
        problem.diffusion_jac_x(x, u, t, l, scratch)?;
        out.add_scaled(w, scratch);
    }
    Ok(())
}

/// `E_j` for every step of a path.
pub fn step_generators<T: Scalar>(
    problem: &ControlProblem<T>,
    path: &PathRef<'_, T>,
    control: &PiecewiseControl<T>,
) -> Result<Vec<Mat<T>>> {
    check_path(problem, path, control)?;
    let n = problem.dims().state;
    let mut scratch = Mat::zeros(n, n);
    (0..control.grid().steps())
        .map(|j| {
            let mut e = Mat::zeros(n, n);
            step_generator(problem, path, control, j, &mut e, &mut scratch)?;
            Ok(e)
        })
        .collect()
}

fn check_path<T: Scalar>(problem: &ControlProblem<T>, path: &PathRef<'_, T>, control: &PiecewiseControl<T>) -> Result<()> {
    let dims = problem.dims();
    if path.state_dim != dims.state || path.noise_dim != dims.noise {
        return Err(Error::InvalidArgument("path dimensions do not match the problem".into()));
    }
    if path.steps() != control.grid().steps() {
        return Err(Error::InvalidArgument("path and control use different grids".into()));
    }
    Ok(())
}

/// Dense flow from anchor `r`: `Γ_{r,r} = I`, `Γ_{r,j+1} = (I + E_j) Γ_{r,j}`.
/// Returns `Γ_{r,j}` for `j = r..=N`.
pub fn propagate_flow_from<T: Scalar>(
    anchor: usize,
    path: &PathRef<'_, T>,
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
) -> Result<Vec<Mat<T>>> {
    let steps = control.grid().steps();
    if anchor > steps {
        return Err(Error::InvalidArgument(format!("anchor {anchor} is beyond the last node {steps}")));
    }
    let gens = step_generators(problem, path, control)?;
    Ok(dense_from_generators(&gens, anchor))
}

pub(crate) fn dense_from_generators<T: Scalar>(gens: &[Mat<T>], anchor: usize) -> Vec<Mat<T>> {
    let n = gens.first().map_or(0, Mat::rows);
    let mut out = Vec::with_capacity(gens.len() + 1 - anchor);
    out.push(Mat::identity(n));
    let mut prod = Mat::zeros(n, n);
    for e in &gens[anchor..] {
        let g = out.last().expect("non-empty");
        matmul_into(e, g, &mut prod);
        let mut next = g.clone();
        next.add_scaled(T::one(), &prod);
        out.push(next);
    }
    out
}

/// Forward flow `Y` and inverse flow `Z` at every node, with `Γ_{s,t} = Y_t Z_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedFlow<T> {
    pub y: Vec<Mat<T>>,
    pub z: Vec<Mat<T>>,
}

/// Per-anchor dense flows, `gammas[r][j - r] = Γ_{r,j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseFlow<T> {
    pub gammas: Vec<Vec<Mat<T>>>,
}

/// Propagates `Y_{j+1} = (I + E_j) Y_j` and `Z_{j+1} = Z_j (I − E_j + E_j² − E_j³)`
/// from `Y_0 = Z_0 = I`.
///
/// The `Z` update is the truncated Neumann series of `(I + E_j)^{-1}`; its
/// quadratic term carries the Itô correction `Σ q_{ll'} J_x b_l J_x b_{l'} dt` in
/// pathwise form, and `Z_j Y_j − I` stays at `O(E⁴)` per step. Fails with
/// [`Error::IllConditionedFlow`] when `‖Y_j‖_F ‖Z_j‖_F` exceeds [`CONDITION_LIMIT`].
pub fn propagate_flow_factorized<T: Scalar>(
    path: &PathRef<'_, T>,
    problem: &ControlProblem<T>,
    control: &PiecewiseControl<T>,
) -> Result<FactorizedFlow<T>> {
    let gens = step_generators(problem, path, control)?;
    factorized_from_generators(&gens, problem.dims().state)
}

pub(crate) fn factorized_from_generators<T: Scalar>(gens: &[Mat<T>], n: usize) -> Result<FactorizedFlow<T>> {
    let mut y = Vec::with_capacity(gens.len() + 1);
    let mut z = Vec::with_capacity(gens.len() + 1);
    y.push(Mat::identity(n));
    z.push(Mat::identity(n));
    let mut e2 = Mat::zeros(n, n);
    let mut e3 = Mat::zeros(n, n);
    let mut inv = Mat::zeros(n, n);
    let mut buf = Mat::zeros(n, n);
    let limit = T::lit(CONDITION_LIMIT);
    for (j, e) in gens.iter().enumerate() {
        let yj = y.last().expect("non-empty");
        matmul_into(e, yj, &mut buf);
        let mut next_y = yj.clone();
        next_y.add_scaled(T::one(), &buf);

        matmul_into(e, e, &mut e2);
        matmul_into(&e2, e, &mut e3);
        inv.set_identity();
        inv.add_scaled(-T::one(), e);
        inv.add_scaled(T::one(), &e2);
        inv.add_scaled(-T::one(), &e3);
        let mut next_z = Mat::zeros(n, n);
        matmul_into(z.last().expect("non-empty"), &inv, &mut next_z);

        let estimate = next_y.frobenius_norm() * next_z.frobenius_norm();
        if estimate.is_nan() || estimate > limit {
            return Err(Error::IllConditionedFlow { node: j + 1, estimate: estimate.as_f64(), limit: CONDITION_LIMIT });
        }
        y.push(next_y);
        z.push(next_z);
    }
    Ok(FactorizedFlow { y, z })
}

impl<T: Scalar> FactorizedFlow<T> {
    pub fn steps(&self) -> usize {
        self.y.len() - 1
    }

    /// `Y_t Z_s`.
    pub fn gamma(&self, s: usize, t: usize) -> Result<Mat<T>> {
        check_pair(s, t, self.steps())?;
        Ok(self.y[t].matmul(&self.z[s]))
    }
}

impl<T: Scalar> DenseFlow<T> {
    pub fn from_generators(gens: &[Mat<T>]) -> Self {
        Self { gammas: (0..=gens.len()).map(|r| dense_from_generators(gens, r)).collect() }
    }

    pub fn steps(&self) -> usize {
        self.gammas.len() - 1
    }

    pub fn gamma(&self, s: usize, t: usize) -> Result<Mat<T>> {
        check_pair(s, t, self.steps())?;
        Ok(self.gammas[s][t - s].clone())
    }
}

fn check_pair(s: usize, t: usize, steps: usize) -> Result<()> {
    if s > t {
        return Err(Error::InvalidArgument(format!("flow Γ(s, t) needs s <= t, got s={s}, t={t}")));
    }
    if t > steps {
        return Err(Error::InvalidArgument(format!("node {t} is beyond the last node {steps}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sde::{sample_wiener, simulate_forward, Dims, Model, TimeGrid};

    /// dx = A x dt + S dw with constant A, S.
    struct Linear {
        a: Mat<f64>,
        s: Mat<f64>,
    }

    impl Model<f64> for Linear {
        fn dims(&self) -> Dims {
            Dims::new(self.a.rows(), 1, self.s.cols())
        }
        fn drift(&self, x: &[f64], _u: &[f64], _t: f64, out: &mut [f64]) {
            out.copy_from_slice(&self.a.matvec(x));
        }
        fn diffusion(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) {
            out.copy_from(&self.s);
        }
        fn running_cost(&self, _x: &[f64], _u: &[f64], _t: f64) -> f64 {
            0.0
        }
        fn terminal_cost(&self, _x: &[f64]) -> f64 {
            0.0
        }
        fn drift_jac_x(&self, _x: &[f64], _u: &[f64], _t: f64, out: &mut Mat<f64>) -> bool {
            out.copy_from(&self.a);
            true
        }
        fn diffusion_jac_x(&self, _x: &[f64], _u: &[f64], _t: f64, _l: usize, out: &mut Mat<f64>) -> bool {
            out.fill(0.0);
            true
        }
    }

    fn linear_flows(a: Mat<f64>) -> (Vec<Mat<f64>>, FactorizedFlow<f64>, TimeGrid<f64>) {
        let s = Mat::from_rows(&[vec![0.3], vec![0.1]]).unwrap();
        let p = ControlProblem::builder(Arc::new(Linear { a, s })).initial_state(vec![1.0, -1.0]).build().unwrap();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let u = PiecewiseControl::zeros(grid, 1);
        let inc = sample_wiener(&grid, 1, p.covariance(), 1, 4).unwrap();
        let paths = simulate_forward(&p, &u, &inc, &grid, 4).unwrap();
        let path = paths.path(0);
        (propagate_flow_from(10, &path, &p, &u).unwrap(), propagate_flow_factorized(&path, &p, &u).unwrap(), grid)
    }

    #[test]
    fn zero_jacobian_gives_identity_flows() {
        let (dense, fact, _) = linear_flows(Mat::zeros(2, 2));
        assert!(dense.iter().all(|g| *g == Mat::identity(2)));
        assert!(fact.y.iter().chain(&fact.z).all(|g| *g == Mat::identity(2)));
    }

    #[test]
    fn linear_flow_is_euler_product() {
        let a = Mat::from_rows(&[vec![-0.5, 0.2], vec![0.0, -1.0]]).unwrap();
        let (dense, _, grid) = linear_flows(a.clone());
        let mut step = Mat::identity(2);
        step.add_scaled(grid.dt(), &a);
        let mut expected = Mat::identity(2);
        for g in &dense {
            assert!(g.sub(&expected).max_abs() < 1e-14);
            expected = step.matmul(&expected);
        }
    }

    #[test]
    fn anchor_at_last_node_is_identity() {
        let a = Mat::from_rows(&[vec![-0.5, 0.2], vec![0.0, -1.0]]).unwrap();
        let s = Mat::from_rows(&[vec![0.3], vec![0.1]]).unwrap();
        let p = ControlProblem::builder(Arc::new(Linear { a, s })).build().unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let u = PiecewiseControl::zeros(grid, 1);
        let inc = sample_wiener(&grid, 1, p.covariance(), 1, 0).unwrap();
        let paths = simulate_forward(&p, &u, &inc, &grid, 0).unwrap();
        let g = propagate_flow_from(8, &paths.path(0), &p, &u).unwrap();
        assert_eq!(g, vec![Mat::identity(2)]);
        assert!(propagate_flow_from(9, &paths.path(0), &p, &u).is_err());
    }

    #[test]
    fn factorized_pairs_reject_reversed_times() {
        let (_, fact, _) = linear_flows(Mat::identity(2));
        assert!(fact.gamma(5, 3).is_err());
        assert!(fact.gamma(3, 51).is_err());
        assert!(fact.gamma(3, 5).is_ok());
    }

    #[test]
    fn explosive_flow_trips_condition_guard() {
        let gens: Vec<Mat<f64>> = (0..40).map(|_| Mat::from_diag(&[1.0, -0.9])).collect();
        let err = factorized_from_generators(&gens, 2).unwrap_err();
        assert!(matches!(err, Error::IllConditionedFlow { .. }), "{err:?}");
    }
}
