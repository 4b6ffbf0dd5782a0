//! Deterministic batch reductions.

use rayon::prelude::*;

use crate::error::Result;
use crate::scalar::Scalar;

/// Paths per reduction chunk. Fixed so the summation order never depends on the pool size.
const CHUNK: usize = 32;

/// Per-coordinate sample mean and standard error of the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub count: usize,
    pub mean: Vec<T>,
    pub std_error: Vec<T>,
}

struct Partial<T> {
    count: usize,
    mean: Vec<T>,
    m2: Vec<T>,
}

impl<T: Scalar> Partial<T> {
    fn new(width: usize) -> Self {
        Self { count: 0, mean: vec![T::zero(); width], m2: vec![T::zero(); width] }
    }

    fn push(&mut self, x: &[T]) {
        self.count += 1;
        let c = T::from_usize_lossy(self.count);
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / c;
            *s += delta * (v - *m);
        }
    }

    fn merge(mut self, other: Partial<T>) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (T::from_usize_lossy(self.count), T::from_usize_lossy(other.count));
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        self
    }
}

/// Evaluates `sample(m, out)` for every path `m < batch` in parallel and reduces the
/// `width`-long outputs with Welford/Chan updates in a fixed order.
pub fn batch_moments<T, F>(batch: usize, width: usize, sample: F) -> Result<Moments<T>>
where
    T: Scalar,
    F: Fn(usize, &mut [T]) -> Result<()> + Sync,
{
    let starts: Vec<usize> = (0..batch).step_by(CHUNK).collect();
    let partials: Vec<Result<Partial<T>>> = starts
        .par_iter()
        .map(|&start| {
            let mut p = Partial::new(width);
            let mut buf = vec![T::zero(); width];
            for m in start..(start + CHUNK).min(batch) {
                buf.fill(T::zero());
                sample(m, &mut buf)?;
                p.push(&buf);
            }
            Ok(p)
        })
        .collect();
    let mut total = Partial::new(width);
    for p in partials {
        total = total.merge(p?);
    }
    let std_error = if total.count < 2 {
        vec![T::zero(); width]
    } else {
        let c = T::from_usize_lossy(total.count);
        let dof = T::from_usize_lossy(total.count - 1);
        total.m2.iter().map(|&s| (s / dof / c).sqrt()).collect()
    };
    Ok(Moments { count: total.count, mean: total.mean, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::mean_and_std_error;

    #[test]
    fn matches_two_pass_formula() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64).sin() * 3.0 + 1.0).collect();
        let m = batch_moments(xs.len(), 1, |i, out| {
            out[0] = xs[i];
            Ok(())
        })
        .unwrap();
        let (mean, se) = mean_and_std_error(&xs);
        assert!((m.mean[0] - mean).abs() < 1e-12);
        assert!((m.std_error[0] - se).abs() < 1e-12);
        assert_eq!(m.count, 1000);
    }

    #[test]
    fn single_sample_has_zero_error() {
        let m = batch_moments(1, 2, |_, out| {
            out.copy_from_slice(&[1.0_f64, 2.0]);
            Ok(())
        })
        .unwrap();
        assert_eq!(m.mean, vec![1.0, 2.0]);
        assert_eq!(m.std_error, vec![0.0, 0.0]);
    }
}
