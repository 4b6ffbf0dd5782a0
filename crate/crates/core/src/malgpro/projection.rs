use crate::error::{Error, Result};
use crate::malgpro::{AdmissibleSet, PiecewiseControl};
use crate::scalar::Scalar;
use crate::sde::{Sense, TimeGrid};

/// Euclidean projection of an N×k candidate onto the piecewise-constant admissible controls.
/// For a box this is a clamp per node and coordinate.
pub fn project<T: Scalar>(candidate: &[T], grid: TimeGrid<T>, set: &AdmissibleSet<T>) -> Result<PiecewiseControl<T>> {
    let mut control = PiecewiseControl::from_values(grid, set.dim(), candidate.to_vec())?;
    for j in 0..grid.steps() {
        set.project_point(control.at_mut(j));
    }
    Ok(control)
}

/// `P(u − λ g)` when minimizing, `P(u + λ g)` when maximizing.
pub fn step<T: Scalar>(
    control: &PiecewiseControl<T>,
    gradient: &[T],
    rate: T,
    set: &AdmissibleSet<T>,
    sense: Sense,
) -> Result<PiecewiseControl<T>> {
    let values = control.values();
    if gradient.len() != values.len() {
        return Err(Error::InvalidArgument(format!("gradient has {} entries, control has {}", gradient.len(), values.len())));
    }
    let k = control.dim();
    if let Some(i) = gradient.iter().position(|g| !g.is_finite()) {
        return Err(Error::PoisonedGradient { node: i / k, coord: i % k });
    }
    let signed = match sense {
        Sense::Minimize => -rate,
        Sense::Maximize => rate,
    };
    let candidate: Vec<T> = values.iter().zip(gradient).map(|(&u, &g)| u + signed * g).collect();
    project(&candidate, *control.grid(), set)
}
