//! Multi-trial benchmarks with perturbed endpoints.

use std::path::Path;

use geoplan::geodesy::path_energy;
use geoplan::Configuration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BenchConfig, Method, Problem, SeedManifest, Tier, TierSpec, TrialSeeds};
use crate::error::{BenchError, Result};
use crate::run::{run_method, straight_line, Budget};
use crate::stats::{mad, median};

const MAX_PERTURBATION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub index: usize,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub straight_length: f64,
    pub straight_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub method: Method,
    pub trial: usize,
    pub run: usize,
    pub seed: u64,
    pub success: bool,
    pub length: Option<f64>,
    pub energy: Option<f64>,
    pub cost: Option<f64>,
    pub iterations: usize,
    pub nodes: usize,
    pub wall_time: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub median_length: Option<f64>,
    pub mad_length: Option<f64>,
    pub median_energy: Option<f64>,
    pub mad_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub version: String,
    pub tier: Tier,
    pub budget: TierSpec,
    pub config: BenchConfig,
    pub seeds: SeedManifest,
    pub trials: Vec<Trial>,
    pub methods: Vec<MethodSummary>,
    pub runs: Vec<RunRecord>,
}

/// Seeds for `trials × runs`, drawn from the master seed.
pub fn derive_seeds(master: u64, trials: usize, runs: usize) -> SeedManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    SeedManifest {
        trials: (0..trials)
            .map(|_| TrialSeeds { perturbation: rng.gen(), runs: (0..runs).map(|_| rng.gen()).collect() })
            .collect(),
    }
}

fn perturb(p: &Problem, base: &Configuration, std: &[f64], rng: &mut ChaCha8Rng) -> Result<Configuration> {
    let env = p.world.env.as_ref();
    if std.iter().all(|s| *s == 0.0) {
        if env.in_collision(base) {
            return Err(BenchError::Config("endpoint is in collision".into()));
        }
        return Ok(base.clone());
    }
    let noise: Vec<Normal<f64>> = std.iter().map(|s| Normal::new(0.0, *s).expect("std ≥ 0")).collect();
    for _ in 0..MAX_PERTURBATION_ATTEMPTS {
        let c: Vec<f64> = base.as_slice().iter().zip(&noise).map(|(x, n)| x + n.sample(rng)).collect();
        let q = p.manifold.configuration(&c)?;
        if !env.in_collision(&q) {
            return Ok(q);
        }
    }
    Err(BenchError::Config("no collision-free perturbation of an endpoint".into()))
}

/// Perturbed endpoints for one trial, start first.
pub fn trial_problem(p: &Problem, std: &[f64], seed: u64) -> Result<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = perturb(p, &p.start, std, &mut rng)?;
    let goal = perturb(p, &p.goal, std, &mut rng)?;
    Ok(Problem { start, goal, ..p.clone() })
}

/// Per-trial best (shortest) successful run for each trial with one.
pub fn best_per_trial<'a>(runs: &'a [RunRecord], method: Method) -> Vec<&'a RunRecord> {
    let mut best: Vec<Option<&RunRecord>> = Vec::new();
    for r in runs.iter().filter(|r| r.method == method) {
        if best.len() <= r.trial {
            best.resize(r.trial + 1, None);
        }
        if r.success && best[r.trial].map_or(true, |b| r.length < b.length) {
            best[r.trial] = Some(r);
        }
    }
    best.into_iter().flatten().collect()
}

pub fn summarize(method: Method, trials: usize, runs: &[RunRecord]) -> MethodSummary {
    let best = best_per_trial(runs, method);
    let lengths: Vec<f64> = best.iter().filter_map(|r| r.length).collect();
    let energies: Vec<f64> = best.iter().filter_map(|r| r.energy).collect();
    MethodSummary {
        method,
        trials,
        successes: best.len(),
        success_rate: best.len() as f64 / trials as f64,
        median_length: median(&lengths),
        mad_length: mad(&lengths),
        median_energy: median(&energies),
        mad_energy: mad(&energies),
    }
}

/// Sampling methods run every seed of a trial; the deterministic solvers
/// run once with the trial's first run seed.
fn runs_for(method: Method, runs: usize) -> usize {
    if method.is_sampling() {
        runs
    } else {
        1
    }
}

pub fn run_bench(cfg: &BenchConfig, base_dir: &Path, tier: Tier, workers: usize) -> Result<Report> {
    cfg.validate()?;
    let budget = cfg.tiers.get(tier);
    let seeds = match &cfg.seeds {
        Some(s) => {
            if s.trials.len() < budget.trials || s.trials.iter().take(budget.trials).any(|t| t.runs.len() < budget.runs)
            {
                return Err(BenchError::Config("seed manifest is smaller than the tier".into()));
            }
            SeedManifest { trials: s.trials[..budget.trials].to_vec() }
        }
        None => derive_seeds(cfg.seed, budget.trials, budget.runs),
    };
    let problem = cfg.problem.build(base_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start {workers} workers: {e}")))?;

    let problems: Vec<Problem> = seeds
        .trials
        .iter()
        .map(|t| trial_problem(&problem, &cfg.perturbation, t.perturbation))
        .collect::<Result<_>>()?;
    let trials = pool.install(|| {
        problems
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let line = straight_line(&p.manifold, &p.start, &p.goal)?;
                Ok(Trial {
                    index: i,
                    start: p.start.as_slice().to_vec(),
                    goal: p.goal.as_slice().to_vec(),
                    straight_length: line.length(),
                    straight_energy: path_energy(&line),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let jobs: Vec<(Method, usize, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| (0..budget.trials).flat_map(move |t| (0..runs_for(m, budget.runs)).map(move |r| (m, t, r))))
        .collect();
    let run_budget = Budget { max_iterations: budget.max_iterations, time_limit: budget.time_limit };
    let runs = pool.install(|| {
        jobs.par_iter()
            .map(|&(method, trial, run)| {
                let seed = seeds.trials[trial].runs[run];
                let o = run_method(method, &problems[trial], &cfg.settings, seed, run_budget)?;
                Ok(RunRecord {
                    method,
                    trial,
                    run,
                    seed,
                    success: o.success,
                    length: o.length,
                    energy: o.energy,
                    cost: o.cost,
                    iterations: o.iterations,
                    nodes: o.nodes,
                    wall_time: o.wall_time,
                    failure: o.failure,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let methods = cfg.methods.iter().map(|&m| summarize(m, budget.trials, &runs)).collect();
    Ok(Report {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        tier,
        budget,
        config: cfg.clone(),
        seeds,
        trials,
        methods,
        runs,
    })
}

/// CSV row of a run; wall time is left out so the file is reproducible.
#[derive(Serialize)]
struct CsvRow<'a> {
    method: &'a str,
    trial: usize,
    run: usize,
    seed: u64,
    success: bool,
    length: Option<f64>,
    energy: Option<f64>,
    cost: Option<f64>,
    iterations: usize,
    nodes: usize,
}

pub fn write_report(r: &Report, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(r)? + "\n")?;
    let mut w = csv::Writer::from_path(out_dir.join("report.csv"))?;
    for x in &r.runs {
        w.serialize(CsvRow {
            method: x.method.name(),
            trial: x.trial,
            run: x.run,
            seed: x.seed,
            success: x.success,
            length: x.length,
            energy: x.energy,
            cost: x.cost,
            iterations: x.iterations,
            nodes: x.nodes,
        })?;
    }
    w.flush()?;
    Ok(())
}
