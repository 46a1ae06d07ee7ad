use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::Point;

pub(crate) const FOUR_PI_INV: f64 = 0.25 / PI;

/// Laplace fundamental solution `G(x, y) = 1 / (4π |x − y|)`.
pub fn greens_kernel(x: &Point, y: &Point) -> Result<f64> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(FOUR_PI_INV / r)
}

/// Double layer kernel `∂G/∂n_y = (x − y)·n_y / (4π |x − y|³)`.
pub fn double_layer_kernel(x: &Point, y: &Point, n_y: &Point) -> Result<f64> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(FOUR_PI_INV * d.dot(n_y) / (r * r * r))
}
