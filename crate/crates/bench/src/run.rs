//! Running one method on one problem and evaluating what it returns.

use std::time::Instant;

use geoplan::geodesy::{
    path_energy, reparameterize_unit_speed, solve_geodesic_bvp, solve_variational_restarts, PathPolyline,
};
use geoplan::planner::{check_edge, plan, PlanRequest, PlannerMode};
use geoplan::{Configuration, Manifold};
use serde::Serialize;

use crate::config::{Method, MethodSettings, Problem};
use crate::error::Result;

/// Waypoints used when resampling solver output for evaluation.
pub const EVAL_POINTS: usize = 257;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub success: bool,
    /// Unit-speed path under the problem's metric.
    pub path: Option<PathPolyline>,
    pub length: Option<f64>,
    pub energy: Option<f64>,
    /// Planner tree cost or solver objective, when there is one.
    pub cost: Option<f64>,
    pub iterations: usize,
    pub nodes: usize,
    pub wall_time: f64,
    /// Why the method failed, when it did.
    pub failure: Option<String>,
}

impl Outcome {
    fn failed(why: String, wall_time: f64) -> Self {
        Self {
            success: false,
            path: None,
            length: None,
            energy: None,
            cost: None,
            iterations: 0,
            nodes: 0,
            wall_time,
            failure: Some(why),
        }
    }
}

/// Per-run budgets for the sampling-based methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_iterations: usize,
    pub time_limit: Option<f64>,
}

/// Chart-straight path between the endpoints, resampled to unit speed under
/// the problem's metric.
pub fn straight_line(m: &Manifold, a: &Configuration, b: &Configuration) -> Result<PathPolyline> {
    let delta = m.chart_difference(a, b)?;
    let k = EVAL_POINTS - 1;
    let w = (0..=k)
        .map(|i| if i == k { b.clone() } else { m.chart_advance(a, &(&delta * (i as f64 / k as f64))) })
        .collect();
    Ok(reparameterize_unit_speed(m, &PathPolyline::new(m, w)?, EVAL_POINTS)?)
}

/// Resamples a solver's path under the problem's metric and rechecks it for
/// collisions at half the planner's collision step.
fn evaluate_solver_path(p: &Problem, s: &MethodSettings, path: &PathPolyline) -> Result<Option<PathPolyline>> {
    let m = &p.manifold;
    let raw = PathPolyline::new(m, path.waypoints().to_vec())?;
    let unit = reparameterize_unit_speed(m, &raw, EVAL_POINTS)?;
    let ok = check_edge(m, p.world.env.as_ref(), &unit, 0.5 * s.planner.collision_step)?;
    Ok(ok.then_some(unit))
}

fn run_solver(method: Method, p: &Problem, s: &MethodSettings, seed: u64) -> Result<Outcome> {
    let started = Instant::now();
    let m = s.solver_manifold(p)?;
    let solved = match method {
        Method::Variational => {
            let sigma = s.restart_sigma(m.dim())?;
            solve_variational_restarts(&m, &p.start, &p.goal, &s.variational, s.restarts.count, &sigma, seed)
                .map(|(best, _)| best)
        }
        Method::Bvp => solve_geodesic_bvp(&m, &p.start, &p.goal, &s.bvp),
        _ => unreachable!("sampling methods are planned"),
    };
    let sol = match solved {
        Ok(sol) => sol,
        Err(e) => return Ok(Outcome::failed(e.to_string(), started.elapsed().as_secs_f64())),
    };
    let iterations = sol.report.iterations;
    let cost = Some(sol.report.energy);
    let evaluated = evaluate_solver_path(p, s, &sol.path)?;
    let wall_time = started.elapsed().as_secs_f64();
    Ok(match evaluated {
        Some(unit) => Outcome {
            success: true,
            length: Some(unit.length()),
            energy: Some(path_energy(&unit)),
            path: Some(unit),
            cost,
            iterations,
            nodes: 0,
            wall_time,
            failure: None,
        },
        None => Outcome { iterations, cost, ..Outcome::failed("solution is in collision".into(), wall_time) },
    })
}

fn run_planner(method: Method, p: &Problem, s: &MethodSettings, seed: u64, budget: Budget) -> Result<Outcome> {
    let mut settings = s.planner.clone();
    settings.mode = if method == Method::Riemannian { PlannerMode::Riemannian } else { PlannerMode::EuclideanBaseline };
    settings.max_iterations = budget.max_iterations;
    settings.time_limit = budget.time_limit;
    let req = PlanRequest {
        manifold: p.manifold.clone(),
        env: p.world.env.clone(),
        start: p.start.clone(),
        goal: p.goal.clone(),
        settings,
        seed,
    };
    let started = Instant::now();
    let r = match plan(req) {
        Ok(r) => r,
        Err(e) => return Ok(Outcome::failed(e.to_string(), started.elapsed().as_secs_f64())),
    };
    Ok(Outcome {
        success: r.success,
        failure: (!r.success).then(|| "budget exhausted".to_string()),
        path: r.path,
        length: r.length,
        energy: r.energy,
        cost: r.cost,
        iterations: r.iterations,
        nodes: r.nodes,
        wall_time: r.wall_time,
    })
}

/// Runs `method` once. Method failures are reported in the outcome; only
/// configuration and evaluation errors are returned as errors.
pub fn run_method(method: Method, p: &Problem, s: &MethodSettings, seed: u64, budget: Budget) -> Result<Outcome> {
    if method.is_sampling() {
        run_planner(method, p, s, seed, budget)
    } else {
        run_solver(method, p, s, seed)
    }
}
