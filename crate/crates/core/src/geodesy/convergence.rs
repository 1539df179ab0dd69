//! Order-of-accuracy studies for the midpoint distance.
//!
//! For a base point `q₀`, a direction `w` normalised in `G(q₀)` and step
//! sizes `h`, the pair `q_x = R_{q₀}(−½h w)`, `q_y = R_{q₀}(½h w)` is solved
//! with an oracle geodesic solver and compared against the midpoint
//! construction.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::distance::{distance_raw, inverse_difference_raw};
use super::solver::GeodesicSolveConfig;
use super::variational::solve_geodesic_variational;
use crate::error::{Error, Result};
use crate::manifold::{Configuration, Manifold};

/// Errors below this are treated as zero.
pub const EXACT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub distance: f64,
    pub oracle_distance: f64,
    /// `|d̂ − d*|`.
    pub err_distance: f64,
    /// Metric distance between the retraction midpoint and the oracle's.
    pub err_midpoint: f64,
    /// `‖(R⁻¹(q_y) − R⁻¹(q_x)) − 2u‖` at the midpoint, `u` the oracle log.
    pub err_inverse_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// `None` when the errors are all at round-off level.
    pub slope_distance: Option<f64>,
    pub slope_midpoint: Option<f64>,
    pub slope_inverse_difference: Option<f64>,
    /// All distance errors below [`EXACT_THRESHOLD`].
    pub exact: bool,
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// points or any `y` at round-off level.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || ys.iter().any(|&y| !(y > EXACT_THRESHOLD)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Endpoints `R_{q₀}(∓½h ŵ)` with `ŵ = w/‖w‖_{G(q₀)}`.
pub fn study_endpoints(
    m: &Manifold,
    base: &Configuration,
    direction: &DVector<f64>,
    h: f64,
) -> Result<(Configuration, Configuration)> {
    m.check_dim(base)?;
    if direction.len() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: direction.len() });
    }
    let g = m.metric_raw(base.coords());
    let norm = direction.dot(&(g * direction)).sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("direction must be nonzero".into()));
    }
    let w = direction * (0.5 * h / norm);
    let qx = Configuration::from_raw(m.retract_raw(base.coords(), &(-&w)));
    let qy = Configuration::from_raw(m.retract_raw(base.coords(), &w));
    Ok((qx, qy))
}

pub fn convergence_row(
    m: &Manifold,
    base: &Configuration,
    direction: &DVector<f64>,
    h: f64,
    oracle: &GeodesicSolveConfig,
) -> Result<ConvergenceRow> {
    let (qx, qy) = study_endpoints(m, base, direction, h)?;
    let d = distance_raw(m, qx.coords(), qy.coords())?;
    let sol = solve_geodesic_variational(m, &qx, &qy, oracle)?;
    let curve = sol.curve.as_ref().expect("spline solution");
    let d_star = sol.distance();
    let mid_star = curve.point(0.5);
    // log of q_y at the oracle midpoint, doubled
    let two_u = curve.velocity(0.5);
    let (mid_hat, dw) = inverse_difference_raw(m, qx.coords(), qy.coords())?;
    let g = m.metric_raw(&mid_star);
    let delta = m.chart_difference_raw(&mid_star, &mid_hat)?;
    let err_mid = delta.dot(&(&g * &delta)).max(0.0).sqrt();
    let e = dw - two_u;
    let err_inv = e.dot(&(&g * &e)).max(0.0).sqrt();
    Ok(ConvergenceRow {
        h,
        distance: d,
        oracle_distance: d_star,
        err_distance: (d - d_star).abs(),
        err_midpoint: err_mid,
        err_inverse_difference: err_inv,
    })
}

pub fn convergence_study(
    m: &Manifold,
    base: &Configuration,
    direction: &DVector<f64>,
    hs: &[f64],
    oracle: &GeodesicSolveConfig,
) -> Result<ConvergenceStudy> {
    let rows = hs.iter().map(|&h| convergence_row(m, base, direction, h, oracle)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(rows))
}

/// Fits slopes over the rows.
pub fn summarize(rows: Vec<ConvergenceRow>) -> ConvergenceStudy {
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let col = |f: fn(&ConvergenceRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let ed = col(|r| r.err_distance);
    let exact = ed.iter().all(|&e| e < EXACT_THRESHOLD);
    ConvergenceStudy {
        slope_distance: loglog_slope(&hs, &ed),
        slope_midpoint: loglog_slope(&hs, &col(|r| r.err_midpoint)),
        slope_inverse_difference: loglog_slope(&hs, &col(|r| r.err_inverse_difference)),
        exact,
        rows,
    }
}
