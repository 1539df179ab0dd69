//! Order-of-accuracy studies over a set of base points.

use std::path::Path;

use geoplan::geodesy::{convergence_study, ConvergenceRow};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ConvergeConfig;
use crate::error::{BenchError, Result};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStudy {
    pub index: usize,
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    pub slope_distance: Option<f64>,
    pub slope_midpoint: Option<f64>,
    pub slope_inverse_difference: Option<f64>,
    pub exact: bool,
    pub rows: Vec<ConvergenceRow>,
}

/// A base point left out because the oracle failed at some step size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Excluded {
    pub index: usize,
    pub base: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeSummary {
    pub points: usize,
    pub excluded: usize,
    /// Every included point is exact to round-off.
    pub exact: bool,
    pub median_slope_distance: Option<f64>,
    pub median_slope_midpoint: Option<f64>,
    pub median_slope_inverse_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeReport {
    pub name: String,
    pub version: String,
    pub hs: Vec<f64>,
    pub studies: Vec<PointStudy>,
    pub excluded: Vec<Excluded>,
    pub summary: ConvergeSummary,
}

fn directions(cfg: &ConvergeConfig, dim: usize) -> Result<Vec<Vec<f64>>> {
    if let Some(d) = &cfg.directions {
        if d.iter().any(|v| v.len() != dim) {
            return Err(BenchError::Config(format!("directions must have {dim} components")));
        }
        return Ok(d.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(cfg.base_points.iter().map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()).collect())
}

pub fn run_converge(cfg: &ConvergeConfig, workers: usize) -> Result<ConvergeReport> {
    cfg.validate()?;
    let m = cfg.manifold.build()?;
    let dirs = directions(cfg, m.dim())?;
    let bases = cfg.base_points.iter().map(|b| Ok(m.configuration(b)?)).collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start {workers} workers: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| {
        bases
            .par_iter()
            .zip(dirs.par_iter())
            .map(|(b, d)| convergence_study(&m, b, &DVector::from_column_slice(d), &cfg.hs, &cfg.oracle))
            .collect()
    });
    let mut studies = Vec::new();
    let mut excluded = Vec::new();
    for (i, out) in outcomes.into_iter().enumerate() {
        let base = bases[i].as_slice().to_vec();
        match out {
            Ok(s) => studies.push(PointStudy {
                index: i,
                base,
                direction: dirs[i].clone(),
                slope_distance: s.slope_distance,
                slope_midpoint: s.slope_midpoint,
                slope_inverse_difference: s.slope_inverse_difference,
                exact: s.exact,
                rows: s.rows,
            }),
            Err(e) => excluded.push(Excluded { index: i, base, reason: e.to_string() }),
        }
    }
    let med = |f: fn(&PointStudy) -> Option<f64>| median(&studies.iter().filter_map(f).collect::<Vec<_>>());
    let summary = ConvergeSummary {
        points: studies.len(),
        excluded: excluded.len(),
        exact: !studies.is_empty() && studies.iter().all(|s| s.exact),
        median_slope_distance: med(|s| s.slope_distance),
        median_slope_midpoint: med(|s| s.slope_midpoint),
        median_slope_inverse_difference: med(|s| s.slope_inverse_difference),
    };
    Ok(ConvergeReport {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        hs: cfg.hs.clone(),
        studies,
        excluded,
        summary,
    })
}

#[derive(Serialize)]
struct CsvRow {
    point: usize,
    h: f64,
    distance: f64,
    oracle_distance: f64,
    err_distance: f64,
    err_midpoint: f64,
    err_inverse_difference: f64,
}

/// Writes `converge.csv` (one row per point and step size) and
/// `converge.json`.
pub fn write_converge(r: &ConvergeReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("converge.csv"))?;
    for s in &r.studies {
        for row in &s.rows {
            w.serialize(CsvRow {
                point: s.index,
                h: row.h,
                distance: row.distance,
                oracle_distance: row.oracle_distance,
                err_distance: row.err_distance,
                err_midpoint: row.err_midpoint,
                err_inverse_difference: row.err_inverse_difference,
            })?;
        }
    }
    w.flush()?;
    std::fs::write(out_dir.join("converge.json"), serde_json::to_string_pretty(r)? + "\n")?;
    Ok(())
}
