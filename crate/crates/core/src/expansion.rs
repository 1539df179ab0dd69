//! Vertex expansion by normalised natural-gradient retraction steps on the
//! potential `φ(q) = ½ d̂(q, q†)²`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::distance::distance_raw;
use crate::geodesy::PathPolyline;
use crate::manifold::{Configuration, Manifold, TangentVector};

/// Relative slack on the arrival and budget tests, absorbing round-off in
/// steps that land exactly on a threshold.
const ARRIVAL_SLACK: f64 = 1e-9;

/// Step-control parameters. Unset optional fields take defaults that
/// depend on the endpoints of each expansion; see [`ExpansionParams::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionParams {
    pub s: f64,
    pub lambda: f64,
    pub s_min: Option<f64>,
    pub d_max: Option<f64>,
    pub max_iters: Option<usize>,
    pub fd_step: Option<f64>,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        Self::with_step(0.05)
    }
}

/// Fully specified parameters for one expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedParams {
    pub s: f64,
    pub lambda: f64,
    pub s_min: f64,
    pub d_max: f64,
    pub max_iters: usize,
    pub fd_step: f64,
}

impl ExpansionParams {
    pub fn with_step(s: f64) -> Self {
        Self { s, lambda: 1.5, s_min: None, d_max: None, max_iters: None, fd_step: None }
    }

    /// Defaults: `s_min = s/64`, `d_max = 3·d₀`, `max_iters = 10⌈d_max/s⌉`,
    /// `fd_step = 1e−3·max(1, ‖q‖∞)`, with `d₀` the distance to cover.
    pub fn resolve(&self, d0: f64, q: &Configuration) -> Result<ResolvedParams> {
        let s_min = self.s_min.unwrap_or(self.s / 64.0);
        let d_max = self.d_max.unwrap_or(3.0 * d0);
        let max_iters = self.max_iters.unwrap_or_else(|| 10 * ((d_max / self.s).ceil().max(1.0) as usize));
        let fd_step = self.fd_step.unwrap_or_else(|| default_fd_step(q));
        let r = ResolvedParams { s: self.s, lambda: self.lambda, s_min, d_max, max_iters, fd_step };
        r.validate()?;
        Ok(r)
    }
}

impl ResolvedParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.s_min > 0.0
            && self.s_min <= self.s
            && self.lambda > 1.0
            && self.d_max > 0.0
            && self.max_iters >= 1
            && self.fd_step > 0.0
            && [self.s, self.lambda, self.s_min, self.d_max, self.fd_step].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid expansion parameters {self:?}")))
        }
    }
}

pub fn default_fd_step(q: &Configuration) -> f64 {
    1e-3 * q.coords().amax().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Reached,
    BudgetExhausted,
    StepUnderflow,
    IterCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTrace {
    /// Accepted configurations, starting at `q_near`.
    pub waypoints: Vec<Configuration>,
    /// Midpoint distance of each accepted step.
    pub step_lengths: Vec<f64>,
    /// Step length in force when each step was accepted.
    pub steps_used: Vec<f64>,
    pub reason: Termination,
    /// Cumulative distance travelled.
    pub d: f64,
}

impl ExpansionTrace {
    pub fn last(&self) -> &Configuration {
        self.waypoints.last().expect("trace starts at q_near")
    }

    /// The traversed polyline, or `None` if no step was accepted.
    pub fn polyline(&self) -> Option<PathPolyline> {
        (self.waypoints.len() >= 2).then(|| PathPolyline::from_parts(self.waypoints.clone(), self.step_lengths.clone()))
    }
}

/// `½ d̂(q, q†)²`.
pub fn potential(m: &Manifold, q: &Configuration, q_dagger: &Configuration) -> Result<f64> {
    m.check_dim(q)?;
    m.check_dim(q_dagger)?;
    let d = distance_raw(m, q.coords(), q_dagger.coords())?;
    Ok(0.5 * d * d)
}

fn potential_raw(m: &Manifold, q: &DVector<f64>, target: &DVector<f64>) -> Result<f64> {
    let d = distance_raw(m, q, target)?;
    Ok(0.5 * d * d)
}

fn natural_gradient_raw(m: &Manifold, q: &DVector<f64>, target: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let n = q.len();
    let mut grad = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    let phi = |u: &DVector<f64>| potential_raw(m, &m.retract_raw(q, u), target);
    for i in 0..n {
        let mut at = |k: f64| -> Result<f64> {
            u[i] = k * h;
            let v = phi(&u);
            u[i] = 0.0;
            v
        };
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        grad[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
    }
    let g = m.metric_raw(q);
    let chol = g.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(&grad))
}

/// `G(q)⁻¹ ∇_u(φ∘R_q)(0)` with the Euclidean gradient taken by the
/// fourth-order central difference stencil of step `fd_step` in tangent
/// coordinates.
pub fn natural_gradient(
    m: &Manifold,
    q: &Configuration,
    q_dagger: &Configuration,
    fd_step: f64,
) -> Result<TangentVector> {
    m.check_dim(q)?;
    m.check_dim(q_dagger)?;
    if !(fd_step > 0.0) {
        return Err(Error::InvalidParameter("fd_step must be positive".into()));
    }
    let v = natural_gradient_raw(m, q.coords(), q_dagger.coords(), fd_step)?;
    m.tangent(q, v.as_slice())
}

/// Expands from `q_near` toward `q_rand` by repeated steps
/// `q ← R_q(−s·v/‖v‖_q)` along the natural gradient `v` of the potential.
///
/// A step is rejected and `s` halved when its midpoint distance exceeds
/// `λ·s` or when it fails to decrease the distance to `q_rand`. A step that
/// would push the cumulative distance past `d_max` is not taken.
pub fn expand(
    m: &Manifold,
    q_near: &Configuration,
    q_rand: &Configuration,
    params: &ExpansionParams,
) -> Result<ExpansionTrace> {
    m.check_dim(q_near)?;
    m.check_dim(q_rand)?;
    let target = q_rand.coords();
    let mut q = q_near.coords().clone();
    let mut dist = distance_raw(m, &q, target)?;
    let p = params.resolve(dist, q_near)?;
    let mut trace = ExpansionTrace {
        waypoints: vec![q_near.clone()],
        step_lengths: Vec::new(),
        steps_used: Vec::new(),
        reason: Termination::Reached,
        d: 0.0,
    };
    let mut s = p.s;
    let mut iters = 0;
    while dist > s * (1.0 + ARRIVAL_SLACK) {
        if iters == p.max_iters {
            trace.reason = Termination::IterCap;
            break;
        }
        iters += 1;
        let v = natural_gradient_raw(m, &q, target, p.fd_step)?;
        let g = m.metric_raw(&q);
        let vn = v.dot(&(&g * &v)).max(0.0).sqrt();
        if !(vn > 0.0) {
            trace.reason = Termination::StepUnderflow;
            break;
        }
        let next = m.retract_raw(&q, &(&v * (-s / vn)));
        let step = distance_raw(m, &q, &next)?;
        let next_dist = distance_raw(m, &next, target)?;
        if step > p.lambda * s || !(next_dist < dist) {
            s *= 0.5;
            if s < p.s_min {
                trace.reason = Termination::StepUnderflow;
                break;
            }
            continue;
        }
        if trace.d + step > p.d_max * (1.0 + ARRIVAL_SLACK) {
            trace.reason = Termination::BudgetExhausted;
            break;
        }
        trace.d += step;
        trace.step_lengths.push(step);
        trace.steps_used.push(s);
        trace.waypoints.push(Configuration::from_raw(next.clone()));
        q = next;
        dist = next_dist;
    }
    Ok(trace)
}

/// Straight chart-coordinate stepping toward `q_rand` with chart-Euclidean
/// step length `s`, stopping within `s` or at the `d_max` budget. Step
/// lengths are chart-Euclidean.
pub fn expand_straight(
    m: &Manifold,
    q_near: &Configuration,
    q_rand: &Configuration,
    s: f64,
    d_max: Option<f64>,
) -> Result<ExpansionTrace> {
    let delta = m.chart_difference(q_near, q_rand)?;
    let total = delta.norm();
    let d_max = d_max.unwrap_or(3.0 * total);
    if !(s > 0.0) || !(d_max > 0.0) {
        return Err(Error::InvalidParameter("step and budget must be positive".into()));
    }
    let mut trace = ExpansionTrace {
        waypoints: vec![q_near.clone()],
        step_lengths: Vec::new(),
        steps_used: Vec::new(),
        reason: Termination::Reached,
        d: 0.0,
    };
    if total == 0.0 {
        return Ok(trace);
    }
    let dir = &delta / total;
    let mut k = 0usize;
    while total - k as f64 * s > s * (1.0 + ARRIVAL_SLACK) {
        if (k + 1) as f64 * s > d_max * (1.0 + ARRIVAL_SLACK) {
            trace.reason = Termination::BudgetExhausted;
            break;
        }
        k += 1;
        let step = k as f64 * s;
        trace.waypoints.push(m.chart_advance(q_near, &(&dir * step)));
        trace.step_lengths.push(s);
        trace.steps_used.push(s);
        trace.d = step;
    }
    Ok(trace)
}
