//! Single-problem solves written out for plotting.

use std::path::Path;

use serde::Serialize;

use crate::config::{Method, SolveConfig};
use crate::error::Result;
use crate::run::{run_method, Budget, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub name: String,
    pub version: String,
    pub method: Method,
    pub seed: u64,
    pub success: bool,
    pub length: Option<f64>,
    pub energy: Option<f64>,
    pub cost: Option<f64>,
    pub wall_time: f64,
    pub iterations: usize,
    pub nodes: usize,
    pub waypoints: usize,
    pub failure: Option<String>,
}

pub fn run_solve(cfg: &SolveConfig, base_dir: &Path) -> Result<Outcome> {
    cfg.validate()?;
    let p = cfg.problem.build(base_dir)?;
    let budget =
        Budget { max_iterations: cfg.settings.planner.max_iterations, time_limit: cfg.settings.planner.time_limit };
    run_method(cfg.method, &p, &cfg.settings, cfg.seed, budget)
}

pub fn summary(cfg: &SolveConfig, o: &Outcome) -> SolveSummary {
    SolveSummary {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        method: cfg.method,
        seed: cfg.seed,
        success: o.success,
        length: o.length,
        energy: o.energy,
        cost: o.cost,
        wall_time: o.wall_time,
        iterations: o.iterations,
        nodes: o.nodes,
        waypoints: o.path.as_ref().map_or(0, |p| p.waypoints().len()),
        failure: o.failure.clone(),
    }
}

/// Writes `solution.json` and, on success, `solution.csv` with one waypoint
/// per row.
pub fn write_solution(cfg: &SolveConfig, o: &Outcome, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("solution.json"), serde_json::to_string_pretty(&summary(cfg, o))? + "\n")?;
    if let Some(path) = &o.path {
        let dim = path.first().dim();
        let mut w = csv::Writer::from_path(out_dir.join("solution.csv"))?;
        let mut header = vec!["index".to_string()];
        header.extend((0..dim).map(|i| format!("q{i}")));
        w.write_record(&header)?;
        for (i, q) in path.waypoints().iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(q.as_slice().iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(())
}
