use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::sde::TimeGrid;

/// Wiener increments `Δw` for a batch of paths, stored as `batch × steps × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Increments<T> {
    batch: usize,
    steps: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Increments<T> {
    pub fn zeros(batch: usize, steps: usize, dim: usize) -> Self {
        Self { batch, steps, dim, data: vec![T::zero(); batch * steps * dim] }
    }

    pub fn from_vec(batch: usize, steps: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != batch * steps * dim {
            return Err(Error::InvalidArgument("increment array has the wrong length".into()));
        }
        Ok(Self { batch, steps, dim, data })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All increments of one path, `steps × dim`.
    pub fn path(&self, m: usize) -> &[T] {
        let len = self.steps * self.dim;
        &self.data[m * len..(m + 1) * len]
    }

    pub fn path_mut(&mut self, m: usize) -> &mut [T] {
        let len = self.steps * self.dim;
        &mut self.data[m * len..(m + 1) * len]
    }

    pub fn at(&self, m: usize, j: usize) -> &[T] {
        let p = self.path(m);
        &p[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Keeps only the listed paths, in the given order.
    pub fn select(&self, keep: &[usize]) -> Self {
        let data = keep.iter().flat_map(|&m| self.path(m).iter().copied()).collect();
        Self { batch: keep.len(), steps: self.steps, dim: self.dim, data }
    }
}

/// Draws correlated increments with covariance `Q·dt`: `Δw = √dt · L ξ` with
/// `L Lᵀ = Q` and `ξ` standard normal. Path `m` uses substream `m` of `seed`,
/// so each `(seed, path, step)` triple maps to a fixed value.
pub fn sample_wiener<T: Scalar>(
    grid: &TimeGrid<T>,
    noise_dim: usize,
    covariance: &Mat<T>,
    batch: usize,
    seed: u64,
) -> Result<Increments<T>> {
    if covariance.shape() != (noise_dim, noise_dim) {
        return Err(Error::InvalidArgument(format!("covariance is {:?}, expected {noise_dim}x{noise_dim}", covariance.shape())));
    }
    let factor = covariance.cholesky()?;
    Ok(sample_with_factor(grid, &factor, batch, seed))
}

/// As [`sample_wiener`] with a precomputed lower Cholesky factor.
pub fn sample_with_factor<T: Scalar>(grid: &TimeGrid<T>, factor: &Mat<T>, batch: usize, seed: u64) -> Increments<T> {
    let d = factor.rows();
    let steps = grid.steps();
    let sqrt_dt = grid.dt().sqrt();
    let per_path: Vec<Vec<T>> = (0..batch)
        .into_par_iter()
        .map(|m| {
            let mut rng = substream(seed, m as u64);
            let mut xi = vec![T::zero(); d];
            let mut out = Vec::with_capacity(steps * d);
            for _ in 0..steps {
                for v in xi.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = T::lit(z);
                }
                for i in 0..d {
                    let mut s = T::zero();
                    for p in 0..=i {
                        s += factor[(i, p)] * xi[p];
                    }
                    out.push(s * sqrt_dt);
                }
            }
            out
        })
        .collect();
    Increments { batch, steps, dim: d, data: per_path.into_iter().flatten().collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_increments_have_unit_variance() {
        let grid = TimeGrid::new(1.0_f64, 1).unwrap();
        let m = 100_000;
        let inc = sample_wiener(&grid, 1, &Mat::identity(1), m, 11).unwrap();
        let xs = inc.as_slice();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        // 4σ band for the sample mean
        assert!(mean.abs() < 4.0 / (m as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn zero_covariance_gives_zero_increments() {
        let grid = TimeGrid::new(1.0_f64, 20).unwrap();
        let inc = sample_wiener(&grid, 2, &Mat::zeros(2, 2), 5, 3).unwrap();
        assert!(inc.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let grid = TimeGrid::new(1.0_f64, 50).unwrap();
        let q = Mat::from_rows(&[vec![1.0, 0.3], vec![0.3, 2.0]]).unwrap();
        let a = sample_wiener(&grid, 2, &q, 17, 99).unwrap();
        let b = sample_wiener(&grid, 2, &q, 17, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_wiener(&grid, 2, &q, 17, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn correlated_increments_match_covariance() {
        let grid = TimeGrid::new(0.5_f64, 1).unwrap();
        let q = Mat::from_rows(&[vec![1.0, 0.6], vec![0.6, 2.0]]).unwrap();
        let m = 50_000;
        let inc = sample_wiener(&grid, 2, &q, m, 5).unwrap();
        let mut c = [[0.0; 2]; 2];
        for p in 0..m {
            let w = inc.at(p, 0);
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += w[i] * w[j] / m as f64;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((c[i][j] - 0.5 * q[(i, j)]).abs() < 0.03, "{c:?}");
            }
        }
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let grid = TimeGrid::new(1.0_f64, 2).unwrap();
        let q = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(sample_wiener(&grid, 2, &q, 1, 0), Err(Error::Factorization(_))));
    }
}
