use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::scalar::Scalar;
use crate::sde::ControlProblem;

fn check<T: Scalar>(problem: &ControlProblem<T>, x: &[T], y: &[T], u: &[T], z: &Mat<T>) -> Result<()> {
    let dims = problem.dims();
    if x.len() != dims.state || y.len() != dims.state || u.len() != dims.control || z.shape() != (dims.noise, dims.state) {
        return Err(Error::InvalidArgument("Hamiltonian arguments do not match the problem dimensions".into()));
    }
    Ok(())
}

/// `H = L(x,u,t) + a(x,u,t)ᵀ y + Σ_i b_i(x,u,t)ᵀ z^i`, where row `i` of `z` (d×n) is `z^i`.
pub fn hamiltonian<T: Scalar>(problem: &ControlProblem<T>, x: &[T], y: &[T], u: &[T], z: &Mat<T>, t: T) -> Result<T> {
    check(problem, x, y, u, z)?;
    let dims = problem.dims();
    let mut a = vec![T::zero(); dims.state];
    problem.drift(x, u, t, &mut a);
    let mut b = Mat::zeros(dims.state, dims.noise);
    problem.diffusion(x, u, t, &mut b);
    let mut h = problem.running_cost(x, u, t) + dot(&a, y);
    for i in 0..dims.noise {
        h += dot(&b.column(i), z.row(i));
    }
    Ok(h)
}

/// `(H_x, H_u)` with `H_x = ∇_x L + J_x aᵀ y + Σ_i J_x b_iᵀ z^i` and `H_u` likewise in `u`.
pub fn hamiltonian_grad<T: Scalar>(
    problem: &ControlProblem<T>,
    x: &[T],
    y: &[T],
    u: &[T],
    z: &Mat<T>,
    t: T,
) -> Result<(Vec<T>, Vec<T>)> {
    check(problem, x, y, u, z)?;
    let dims = problem.dims();
    let (n, k) = (dims.state, dims.control);
    let mut hx = vec![T::zero(); n];
    let mut hu = vec![T::zero(); k];
    let mut mx = Mat::zeros(n, n);
    let mut mu = Mat::zeros(n, k);
    hamiltonian_grad_into(problem, x, y, u, z, t, &mut hx, &mut hu, &mut mx, &mut mu)?;
    Ok((hx, hu))
}

/// Allocation-free core of [`hamiltonian_grad`]; `mx` (n×n) and `mu` (n×k) are scratch.
#[allow(clippy::too_many_arguments)]
pub(crate) fn hamiltonian_grad_into<T: Scalar>(
    problem: &ControlProblem<T>,
    x: &[T],
    y: &[T],
    u: &[T],
    z: &Mat<T>,
    t: T,
    hx: &mut [T],
    hu: &mut [T],
    mx: &mut Mat<T>,
    mu: &mut Mat<T>,
) -> Result<()> {
    problem.cost_grad_x(x, u, t, hx)?;
    problem.cost_grad_u(x, u, t, hu)?;
    problem.drift_jac_x(x, u, t, mx)?;
    add_transposed(mx, y, hx);
    problem.drift_jac_u(x, u, t, mu)?;
    add_transposed(mu, y, hu);
    for i in 0..problem.dims().noise {
        let zi = z.row(i);
        if zi.iter().all(|v| *v == T::zero()) {
            continue;
        }
        problem.diffusion_jac_x(x, u, t, i, mx)?;
        add_transposed(mx, zi, hx);
        problem.diffusion_jac_u(x, u, t, i, mu)?;
        add_transposed(mu, zi, hu);
    }
    Ok(())
}

/// `out += mᵀ v`.
fn add_transposed<T: Scalar>(m: &Mat<T>, v: &[T], out: &mut [T]) {
    for (r, &vr) in v.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            *o += m[(r, c)] * vr;
        }
    }
}
