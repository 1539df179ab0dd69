//! Spline energy minimisation with fixed endpoints.
//!
//! The curve is a not-a-knot cubic spline through the endpoints and `K`
//! free control points at uniform parameters. Its energy `½∫ q̇ᵀG(q)q̇ dt`
//! is evaluated with five Gauss points per interval and minimised by
//! preconditioned gradient descent with Armijo backtracking. Gradients are
//! central finite differences; the preconditioner is the Gauss–Newton
//! matrix that ignores metric derivatives.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::path::PathPolyline;
use super::solver::{GeodesicSolution, GeodesicSolveConfig, SolveReport};
use super::spline::{SplineBasis, SplineCurve};
use crate::error::{Error, Result};
use crate::manifold::{Configuration, Manifold};

struct Problem<'a> {
    m: &'a Manifold,
    basis: SplineBasis,
    w: Vec<f64>,
    p: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl<'a> Problem<'a> {
    fn new(m: &'a Manifold, free: usize) -> Self {
        let basis = SplineBasis::new(free + 2);
        let (w, p, v) = basis.quadrature();
        Self { m, basis, w, p, v }
    }

    fn energy_from(&self, pos: &DMatrix<f64>, vel: &DMatrix<f64>) -> f64 {
        let mut e = 0.0;
        for q in 0..self.w.len() {
            let x = pos.row(q).transpose();
            let u = vel.row(q).transpose();
            let g = self.m.metric_raw(&x);
            e += self.w[q] * u.dot(&(g * &u));
        }
        0.5 * e
    }

    fn energy(&self, y: &DMatrix<f64>) -> f64 {
        self.energy_from(&(&self.p * y), &(&self.v * y))
    }

    fn length(&self, y: &DMatrix<f64>) -> f64 {
        let pos = &self.p * y;
        let vel = &self.v * y;
        (0..self.w.len())
            .map(|q| {
                let x = pos.row(q).transpose();
                let u = vel.row(q).transpose();
                self.w[q] * u.dot(&(self.m.metric_raw(&x) * &u)).max(0.0).sqrt()
            })
            .sum()
    }

    fn gradient(&self, y: &DMatrix<f64>, fd_step: f64) -> DVector<f64> {
        let n = y.ncols();
        let k = y.nrows() - 2;
        let pos = &self.p * y;
        let vel = &self.v * y;
        let mut g = DVector::zeros(k * n);
        for j in 1..=k {
            for c in 0..n {
                let eps = fd_step * y[(j, c)].abs().max(1.0);
                let mut pp = pos.clone();
                let mut vp = vel.clone();
                let mut pm = pos.clone();
                let mut vm = vel.clone();
                for q in 0..self.w.len() {
                    pp[(q, c)] += eps * self.p[(q, j)];
                    vp[(q, c)] += eps * self.v[(q, j)];
                    pm[(q, c)] -= eps * self.p[(q, j)];
                    vm[(q, c)] -= eps * self.v[(q, j)];
                }
                g[(j - 1) * n + c] = (self.energy_from(&pp, &vp) - self.energy_from(&pm, &vm)) / (2.0 * eps);
            }
        }
        g
    }

    fn gauss_newton(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = y.ncols();
        let k = y.nrows() - 2;
        let pos = &self.p * y;
        let mut h = DMatrix::zeros(k * n, k * n);
        for q in 0..self.w.len() {
            let g = self.m.metric_raw(&pos.row(q).transpose()) * self.w[q];
            for a in 1..=k {
                let va = self.v[(q, a)];
                if va == 0.0 {
                    continue;
                }
                for b in 1..=k {
                    let s = va * self.v[(q, b)];
                    for c in 0..n {
                        for d in 0..n {
                            h[((a - 1) * n + c, (b - 1) * n + d)] += s * g[(c, d)];
                        }
                    }
                }
            }
        }
        h
    }
}

fn straight_knots(basis: &SplineBasis, a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = a.len();
    DMatrix::from_fn(basis.knots(), n, |j, c| {
        let t = basis.knot(j);
        (1.0 - t) * a[c] + t * b[c]
    })
}

/// Endpoints in one unwrapped chart: `q_y` is replaced by `q_x ⊕ (q_y ⊖ q_x)`.
fn chart_endpoints(m: &Manifold, q_x: &Configuration, q_y: &Configuration) -> Result<(DVector<f64>, DVector<f64>)> {
    m.check_dim(q_x)?;
    m.check_dim(q_y)?;
    let a = q_x.coords().clone();
    let b = &a + m.chart_difference_raw(q_x.coords(), q_y.coords())?;
    Ok((a, b))
}

pub fn solve_geodesic_variational(
    m: &Manifold,
    q_x: &Configuration,
    q_y: &Configuration,
    cfg: &GeodesicSolveConfig,
) -> Result<GeodesicSolution> {
    solve_variational_from(m, q_x, q_y, cfg, None)
}

/// Like [`solve_geodesic_variational`] but starting from the given interior
/// control points (`num_control_points × dim`, unwrapped chart coordinates
/// relative to `q_x`).
pub fn solve_variational_from(
    m: &Manifold,
    q_x: &Configuration,
    q_y: &Configuration,
    cfg: &GeodesicSolveConfig,
    initial: Option<&DMatrix<f64>>,
) -> Result<GeodesicSolution> {
    cfg.validate()?;
    let (a, b) = chart_endpoints(m, q_x, q_y)?;
    let k = cfg.num_control_points;
    let prob = Problem::new(m, k);
    let mut y = straight_knots(&prob.basis, &a, &b);
    if let Some(init) = initial {
        if init.nrows() != k || init.ncols() != a.len() {
            return Err(Error::DimensionMismatch { expected: k * a.len(), got: init.len() });
        }
        for j in 0..k {
            y.set_row(j + 1, &init.row(j));
        }
    }
    let n = a.len();
    let mut e = prob.energy(&y);
    if !e.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut history = vec![e];
    let mut converged = e == 0.0;
    let mut residual = 0.0;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let g = prob.gradient(&y, cfg.fd_step);
        let dir = match prob.gauss_newton(&y).cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&dir);
        if !(slope < 0.0) {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial = y.clone();
            for j in 0..k {
                for c in 0..n {
                    trial[(j + 1, c)] += alpha * dir[j * n + c];
                }
            }
            let et = prob.energy(&trial);
            if et.is_finite() && et <= e + 1e-4 * alpha * slope {
                accepted = Some((trial, et));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, et)) = accepted else {
            // no representable decrease left along a descent direction
            residual = -slope / e;
            if residual <= 1e-6 {
                converged = true;
                break;
            }
            return Err(Error::NoConvergence { iterations, residual });
        };
        residual = (e - et) / e;
        y = trial;
        e = et;
        history.push(e);
        if residual <= cfg.tolerance {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations, residual });
    }
    let length = prob.length(&y);
    let curve = SplineCurve::new(prob.basis.clone(), y);
    let path = sample_curve(m, &curve, cfg.output_points, q_x, q_y)?;
    Ok(GeodesicSolution {
        path,
        report: SolveReport {
            iterations,
            converged,
            residual,
            energy: e,
            length,
            energy_history: history,
            max_speed_deviation: f64::NAN,
        },
        curve: Some(curve),
    })
}

fn sample_curve(
    m: &Manifold,
    curve: &SplineCurve,
    points: usize,
    q_x: &Configuration,
    q_y: &Configuration,
) -> Result<PathPolyline> {
    let mut out = Vec::with_capacity(points);
    out.push(q_x.clone());
    for i in 1..points - 1 {
        let mut p = curve.point(i as f64 / (points - 1) as f64);
        m.wrap_in_place(&mut p);
        out.push(Configuration::from_vector(p)?);
    }
    out.push(q_y.clone());
    PathPolyline::new(m, out)
}

/// Runs the spline solver from the straight initialisation and from
/// `restarts − 1` initialisations bent by `sin(πt)·ξ`, `ξᵢ ~ N(0, σᵢ²)`, and
/// returns the lowest-energy solution with every run's final energy
/// (`∞` for runs that failed).
pub fn solve_variational_restarts(
    m: &Manifold,
    q_x: &Configuration,
    q_y: &Configuration,
    cfg: &GeodesicSolveConfig,
    restarts: usize,
    sigma: &[f64],
    seed: u64,
) -> Result<(GeodesicSolution, Vec<f64>)> {
    let (a, b) = chart_endpoints(m, q_x, q_y)?;
    if sigma.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: sigma.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = SplineBasis::new(cfg.num_control_points + 2);
    let straight = straight_knots(&basis, &a, &b);
    let mut best: Option<GeodesicSolution> = None;
    let mut energies = Vec::with_capacity(restarts);
    let mut last_err = None;
    for r in 0..restarts.max(1) {
        let init = if r == 0 {
            None
        } else {
            let xi: Vec<f64> = sigma
                .iter()
                .map(|&s| if s > 0.0 { Normal::new(0.0, s).expect("finite sigma").sample(&mut rng) } else { 0.0 })
                .collect();
            Some(DMatrix::from_fn(cfg.num_control_points, a.len(), |j, c| {
                let t = basis.knot(j + 1);
                straight[(j + 1, c)] + (std::f64::consts::PI * t).sin() * xi[c]
            }))
        };
        match solve_variational_from(m, q_x, q_y, cfg, init.as_ref()) {
            Ok(sol) => {
                energies.push(sol.report.energy);
                if best.as_ref().map_or(true, |b| sol.report.energy < b.report.energy) {
                    best = Some(sol);
                }
            }
            Err(e) => {
                energies.push(f64::INFINITY);
                last_err = Some(e);
            }
        }
    }
    match best {
        Some(b) => Ok((b, energies)),
        None => Err(last_err.expect("at least one run")),
    }
}
