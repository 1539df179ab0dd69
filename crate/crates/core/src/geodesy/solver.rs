//! Solver configuration and results shared by the shooting and variational
//! geodesic solvers.

use serde::{Deserialize, Serialize};

use super::bvp::solve_geodesic_bvp;
use super::path::PathPolyline;
use super::spline::SplineCurve;
use super::variational::solve_geodesic_variational;
use crate::error::{Error, Result};
use crate::manifold::{Configuration, Manifold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    ShootingBvp,
    VariationalSpline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeodesicSolveConfig {
    pub mode: SolveMode,
    /// Free interior control points of the spline.
    pub num_control_points: usize,
    /// RK4 steps over the unit time horizon.
    pub integrator_steps: usize,
    pub max_iterations: usize,
    /// Endpoint residual (shooting) or relative energy decrease (spline).
    pub tolerance: f64,
    /// Finite-difference step for Jacobians and gradients.
    pub fd_step: f64,
    /// Waypoints in the returned polyline of the spline solver.
    pub output_points: usize,
}

impl Default for GeodesicSolveConfig {
    fn default() -> Self {
        Self::variational()
    }
}

impl GeodesicSolveConfig {
    pub fn variational() -> Self {
        Self {
            mode: SolveMode::VariationalSpline,
            num_control_points: 16,
            integrator_steps: 256,
            max_iterations: 200,
            tolerance: 1e-8,
            fd_step: 1e-6,
            output_points: 129,
        }
    }

    /// Tight settings used as ground truth in accuracy studies.
    pub fn oracle() -> Self {
        Self { num_control_points: 32, max_iterations: 400, tolerance: 1e-10, ..Self::variational() }
    }

    pub fn bvp() -> Self {
        Self {
            mode: SolveMode::ShootingBvp,
            max_iterations: 50,
            tolerance: 1e-10,
            fd_step: 1e-7,
            ..Self::variational()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidParameter(s.into()));
        if self.num_control_points < 4 {
            return bad("num_control_points must be at least 4");
        }
        if self.integrator_steps == 0 || self.max_iterations == 0 {
            return bad("integrator_steps and max_iterations must be positive");
        }
        if !(self.tolerance > 0.0) || !(self.fd_step > 0.0) {
            return bad("tolerance and fd_step must be positive");
        }
        if self.output_points < 2 {
            return bad("output_points must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Final endpoint residual (shooting) or last relative energy decrease.
    pub residual: f64,
    /// Continuous energy `½∫ q̇ᵀG q̇ dt` of the solution curve.
    pub energy: f64,
    /// Continuous length `∫ ‖q̇‖ dt` of the solution curve.
    pub length: f64,
    /// Energy after every accepted step, starting with the initial guess.
    pub energy_history: Vec<f64>,
    /// Largest relative deviation of the speed from its initial value.
    pub max_speed_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct GeodesicSolution {
    pub path: PathPolyline,
    pub report: SolveReport,
    /// Spline solution in unwrapped chart coordinates (spline mode only).
    pub curve: Option<SplineCurve>,
}

impl GeodesicSolution {
    /// Geodesic distance estimate, the continuous length of the solution.
    pub fn distance(&self) -> f64 {
        self.report.length
    }
}

/// Dispatches on `cfg.mode`.
pub fn solve_geodesic(
    m: &Manifold,
    q_x: &Configuration,
    q_y: &Configuration,
    cfg: &GeodesicSolveConfig,
) -> Result<GeodesicSolution> {
    match cfg.mode {
        SolveMode::ShootingBvp => solve_geodesic_bvp(m, q_x, q_y, cfg),
        SolveMode::VariationalSpline => solve_geodesic_variational(m, q_x, q_y, cfg),
    }
}
