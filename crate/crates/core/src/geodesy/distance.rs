//! Midpoint retraction distance.
//!
//! The distance between `q_x` and `q_y` is the metric norm, at the
//! retraction midpoint `q̂ = R_{q_x}(½ R⁻¹_{q_x}(q_y))`, of the difference
//! `R⁻¹_q̂(q_y) − R⁻¹_q̂(q_x)`. It needs one metric evaluation, is exact on
//! constant metrics with a linear retraction, and is third-order accurate in
//! general.

use nalgebra::DVector;

use crate::error::Result;
use crate::manifold::{Configuration, Manifold};

/// `R_{q_x}(½ R⁻¹_{q_x}(q_y))`.
pub fn retraction_midpoint(m: &Manifold, q_x: &Configuration, q_y: &Configuration) -> Result<Configuration> {
    let v = m.inverse_retract(q_x, q_y)?;
    m.retract(q_x, &v.scale(0.5))
}

/// Approximate Riemannian distance `d̂(q_x, q_y)`.
pub fn midpoint_distance(m: &Manifold, q_x: &Configuration, q_y: &Configuration) -> Result<f64> {
    m.check_dim(q_x)?;
    m.check_dim(q_y)?;
    distance_raw(m, q_x.coords(), q_y.coords())
}

pub(crate) fn midpoint_raw(m: &Manifold, q_x: &DVector<f64>, q_y: &DVector<f64>) -> Result<DVector<f64>> {
    let v = m.inverse_retract_raw(q_x, q_y)?;
    Ok(m.retract_raw(q_x, &(v * 0.5)))
}

/// Tangent difference `R⁻¹_q̂(q_y) − R⁻¹_q̂(q_x)` at the retraction
/// midpoint, returned with the midpoint itself.
pub(crate) fn inverse_difference_raw(
    m: &Manifold,
    q_x: &DVector<f64>,
    q_y: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let mid = midpoint_raw(m, q_x, q_y)?;
    let wy = m.inverse_retract_raw(&mid, q_y)?;
    let wx = m.inverse_retract_raw(&mid, q_x)?;
    Ok((mid, wy - wx))
}

pub(crate) fn distance_raw(m: &Manifold, q_x: &DVector<f64>, q_y: &DVector<f64>) -> Result<f64> {
    let (mid, dw) = inverse_difference_raw(m, q_x, q_y)?;
    let g = m.metric_raw(&mid);
    Ok(dw.dot(&(g * &dw)).max(0.0).sqrt())
}
