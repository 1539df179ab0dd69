//! Shooting solver for the geodesic boundary value problem.

use nalgebra::{DMatrix, DVector};

use super::path::PathPolyline;
use super::solver::{GeodesicSolution, GeodesicSolveConfig, SolveReport};
use crate::error::{Error, Result};
use crate::manifold::{Configuration, Manifold};
use crate::metrics::{christoffel_raw, DEFAULT_CHRISTOFFEL_STEP};

/// `q̈ = −Γ(q)[q̇, q̇]`.
fn acceleration(m: &Manifold, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let g = m.metric_raw(q);
    let inv = g.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
    Ok(-christoffel_raw(m, q, DEFAULT_CHRISTOFFEL_STEP, &inv).contract(v))
}

/// Positions and velocities after each of `steps` RK4 steps over `t ∈ [0, 1]`,
/// in unwrapped chart coordinates.
pub fn integrate_geodesic(
    m: &Manifold,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    steps: usize,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let dt = 1.0 / steps as f64;
    let mut q = q0.clone();
    let mut v = v0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push((q.clone(), v.clone()));
    for _ in 0..steps {
        let a1 = acceleration(m, &q, &v)?;
        let q2 = &q + &v * (0.5 * dt);
        let v2 = &v + &a1 * (0.5 * dt);
        let a2 = acceleration(m, &q2, &v2)?;
        let q3 = &q + &v2 * (0.5 * dt);
        let v3 = &v + &a2 * (0.5 * dt);
        let a3 = acceleration(m, &q3, &v3)?;
        let q4 = &q + &v3 * dt;
        let v4 = &v + &a3 * dt;
        let a4 = acceleration(m, &q4, &v4)?;
        q += (&v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
        v += (&a1 + &a2 * 2.0 + &a3 * 2.0 + &a4) * (dt / 6.0);
        if q.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        out.push((q.clone(), v.clone()));
    }
    Ok(out)
}

fn endpoint(m: &Manifold, a: &DVector<f64>, v: &DVector<f64>, steps: usize) -> Result<DVector<f64>> {
    Ok(integrate_geodesic(m, a, v, steps)?.pop().expect("nonempty").0)
}

/// Damped Newton on the initial velocity from `a` toward `target`.
fn shoot(
    m: &Manifold,
    a: &DVector<f64>,
    target: &DVector<f64>,
    mut v: DVector<f64>,
    cfg: &GeodesicSolveConfig,
    iterations: &mut usize,
) -> Result<(DVector<f64>, f64)> {
    let n = a.len();
    let steps = cfg.integrator_steps;
    let mut r = endpoint(m, a, &v, steps)? - target;
    let mut res = r.norm();
    while res > cfg.tolerance {
        if *iterations == cfg.max_iterations {
            return Err(Error::NoConvergence { iterations: *iterations, residual: res });
        }
        *iterations += 1;
        let eps = cfg.fd_step * v.amax().max(1.0);
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += eps;
            vm[i] -= eps;
            let col = (endpoint(m, a, &vp, steps)? - endpoint(m, a, &vm, steps)?) / (2.0 * eps);
            jac.set_column(i, &col);
        }
        let delta = jac.lu().solve(&(-&r)).ok_or(Error::NoConvergence { iterations: *iterations, residual: res })?;
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let vt = &v + &delta * alpha;
            if let Ok(qe) = endpoint(m, a, &vt, steps) {
                let rt = qe - target;
                if rt.norm() < res {
                    v = vt;
                    r = rt;
                    res = r.norm();
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            return Err(Error::NoConvergence { iterations: *iterations, residual: res });
        }
    }
    Ok((v, res))
}

/// Shooting solve for the geodesic from `q_x` to `q_y` over unit time.
///
/// Newton starts from the chart chord. If it stalls, the target is moved
/// along the chord in 4 and then 16 continuation stages, each warm-started
/// from the previous stage's velocity. Iterations count across all stages.
pub fn solve_geodesic_bvp(
    m: &Manifold,
    q_x: &Configuration,
    q_y: &Configuration,
    cfg: &GeodesicSolveConfig,
) -> Result<GeodesicSolution> {
    cfg.validate()?;
    m.check_dim(q_x)?;
    m.check_dim(q_y)?;
    let steps = cfg.integrator_steps;
    let a = q_x.coords().clone();
    let chord = m.chart_difference_raw(q_x.coords(), q_y.coords())?;
    let mut iterations = 0;
    let mut last = None;
    let mut solved = None;
    for stages in [1usize, 4, 16] {
        let mut v = chord.clone() / stages as f64;
        let mut ok = true;
        for k in 1..=stages {
            let s = k as f64 / stages as f64;
            let target = &a + &chord * s;
            if k > 1 {
                v *= k as f64 / (k - 1) as f64;
            }
            match shoot(m, &a, &target, v.clone(), cfg, &mut iterations) {
                Ok((vk, res)) => {
                    v = vk;
                    if k == stages {
                        solved = Some((v.clone(), res));
                    }
                }
                Err(e) => {
                    last = Some(e);
                    ok = false;
                    break;
                }
            }
        }
        if ok || iterations >= cfg.max_iterations {
            break;
        }
    }
    let Some((v, res)) = solved else {
        return Err(last.expect("failed stage"));
    };

    let traj = integrate_geodesic(m, &a, &v, steps)?;
    let speed = |q: &DVector<f64>, v: &DVector<f64>| v.dot(&(m.metric_raw(q) * v)).max(0.0).sqrt();
    let s0 = speed(&traj[0].0, &traj[0].1);
    let max_dev =
        if s0 > 0.0 { traj.iter().map(|(q, v)| (speed(q, v) - s0).abs() / s0).fold(0.0, f64::max) } else { 0.0 };
    let stride = (steps / (cfg.output_points - 1)).max(1);
    let mut waypoints = Vec::with_capacity(steps / stride + 2);
    waypoints.push(q_x.clone());
    for (i, (q, _)) in traj.iter().enumerate().skip(1) {
        if i % stride == 0 && i < steps {
            let mut p = q.clone();
            m.wrap_in_place(&mut p);
            waypoints.push(Configuration::from_vector(p)?);
        }
    }
    waypoints.push(q_y.clone());
    Ok(GeodesicSolution {
        path: PathPolyline::new(m, waypoints)?,
        report: SolveReport {
            iterations,
            converged: true,
            residual: res,
            energy: 0.5 * s0 * s0,
            length: s0,
            energy_history: Vec::new(),
            max_speed_deviation: max_dev,
        },
        curve: None,
    })
}
