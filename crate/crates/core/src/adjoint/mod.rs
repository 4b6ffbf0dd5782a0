//! Stochastic maximum principle quantities and the Ad-SGD baseline.

mod adsgd;
mod hamiltonian;

pub use adsgd::{adsgd_backward, adsgd_gradient, adsgd_path_gradient, adsgd_solve, AdjointPath};
pub use hamiltonian::{hamiltonian, hamiltonian_grad};
