//! Manifold abstraction: chart coordinates, tangent vectors, metric tensors
//! and retractions.
//!
//! Every manifold in this crate is represented in a single global chart.
//! Angular coordinates are stored wrapped to `(-π, π]`, and a tangent vector
//! is only meaningful at the configuration it is based at.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    ConstantMetric, MetricField, Se2LeftInvariantMetric, Se2Weights, TwoLinkMassMatrix, TwoLinkParams,
};

/// Relative symmetry tolerance accepted by [`MetricTensor::new`].
const SYMMETRY_TOL: f64 = 1e-12;

/// Wraps an angle to `(-π, π]`. Ties at `±π` map to `π`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Per-coordinate wrapping behaviour of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapRule {
    None,
    Angular,
}

/// Which retraction a [`Manifold`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retraction {
    /// Coordinate addition followed by angle wrapping, `R_q(v) = q + v`.
    Chart,
    /// SE(2) only: `R_q(v) = q ∘ exp(A(θ) v)` where `A(θ)` maps chart
    /// velocities to body twists.
    Se2Exponential,
}

/// A point on a manifold, stored as chart coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Configuration {
    coords: DVector<f64>,
}

impl Configuration {
    /// Builds a configuration from raw coordinates without wrapping. Use
    /// [`Manifold::configuration`] to obtain a canonical (wrapped) point.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(coords))
    }

    pub fn from_vector(coords: DVector<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self { coords })
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub(crate) fn from_raw(coords: DVector<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Self { coords }
    }
}

impl TryFrom<Vec<f64>> for Configuration {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(c: Configuration) -> Self {
        c.coords.as_slice().to_vec()
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coords.iter()).finish()
    }
}

/// A tangent vector in the chart basis of `T_base M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Configuration,
    components: DVector<f64>,
}

impl TangentVector {
    pub fn base(&self) -> &Configuration {
        &self.base
    }

    pub fn components(&self) -> &DVector<f64> {
        &self.components
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { base: self.base.clone(), components: &self.components * k }
    }

    /// `self + other`; both must share a base point.
    pub fn add(&self, other: &TangentVector) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        Ok(Self { base: self.base.clone(), components: &self.components + &other.components })
    }

    /// `self - other`; both must share a base point.
    pub fn sub(&self, other: &TangentVector) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        Ok(Self { base: self.base.clone(), components: &self.components - &other.components })
    }
}

/// Symmetric positive definite matrix `G_q` in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    matrix: DMatrix<f64>,
}

impl MetricTensor {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let n = matrix.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        if matrix.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `uᵀ G v`.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.matrix * v))
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let chol = self.matrix.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(chol.solve(b))
    }
}

/// A Riemannian manifold in a single chart: dimension, metric field,
/// retraction and per-coordinate wrapping.
///
/// Cheap to clone; the metric field is shared.
#[derive(Clone)]
pub struct Manifold {
    wrap: Vec<WrapRule>,
    retraction: Retraction,
    metric: Arc<dyn MetricField>,
}

impl fmt::Debug for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manifold")
            .field("dim", &self.dim())
            .field("wrap", &self.wrap)
            .field("retraction", &self.retraction)
            .field("metric", &self.metric)
            .finish()
    }
}

impl Manifold {
    pub fn new(metric: Arc<dyn MetricField>, wrap: Vec<WrapRule>, retraction: Retraction) -> Result<Self> {
        let dim = metric.dim();
        if dim == 0 {
            return Err(Error::InvalidParameter("manifold dimension must be positive".into()));
        }
        if wrap.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: wrap.len() });
        }
        if retraction == Retraction::Se2Exponential && wrap != [WrapRule::None, WrapRule::None, WrapRule::Angular] {
            return Err(Error::InvalidParameter("group-exponential retraction requires SE(2) chart (x, y, θ)".into()));
        }
        Ok(Self { wrap, retraction, metric })
    }

    /// `R^dim` with the identity metric.
    pub fn euclidean(dim: usize) -> Self {
        Self::constant(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    /// `R^n` with a constant SPD metric.
    pub fn constant(g: DMatrix<f64>) -> Result<Self> {
        let metric = ConstantMetric::new(g)?;
        let n = metric.dim();
        Self::new(Arc::new(metric), vec![WrapRule::None; n], Retraction::Chart)
    }

    /// SE(2) in `(x, y, θ)` coordinates with a left-invariant metric.
    pub fn se2(weights: Se2Weights, retraction: Retraction) -> Result<Self> {
        weights.validate()?;
        Self::new(
            Arc::new(Se2LeftInvariantMetric::new(weights)),
            vec![WrapRule::None, WrapRule::None, WrapRule::Angular],
            retraction,
        )
    }

    /// Joint space of the two-link planar arm with its mass-matrix metric.
    ///
    /// Joints are treated as bounded revolute joints, so coordinates are not
    /// wrapped; joint limits live in the collision world.
    pub fn two_link(params: TwoLinkParams) -> Result<Self> {
        params.validate()?;
        Self::new(Arc::new(TwoLinkMassMatrix::new(params)), vec![WrapRule::None; 2], Retraction::Chart)
    }

    /// Same chart and retraction with a different metric field.
    pub fn with_metric(&self, metric: Arc<dyn MetricField>) -> Result<Self> {
        Self::new(metric, self.wrap.clone(), self.retraction)
    }

    pub fn dim(&self) -> usize {
        self.wrap.len()
    }

    pub fn wrap_rules(&self) -> &[WrapRule] {
        &self.wrap
    }

    pub fn retraction(&self) -> Retraction {
        self.retraction
    }

    pub fn metric_field(&self) -> &Arc<dyn MetricField> {
        &self.metric
    }

    /// Validates and wraps raw chart coordinates.
    pub fn configuration(&self, coords: &[f64]) -> Result<Configuration> {
        self.check_len(coords.len())?;
        let mut v = DVector::from_column_slice(coords);
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.wrap_in_place(&mut v);
        Ok(Configuration::from_raw(v))
    }

    pub fn tangent(&self, base: &Configuration, components: &[f64]) -> Result<TangentVector> {
        self.check_config(base)?;
        self.check_len(components.len())?;
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(TangentVector { base: base.clone(), components: DVector::from_column_slice(components) })
    }

    pub fn zero_tangent(&self, base: &Configuration) -> TangentVector {
        TangentVector { base: base.clone(), components: DVector::zeros(self.dim()) }
    }

    pub fn metric_at(&self, q: &Configuration) -> Result<MetricTensor> {
        self.check_config(q)?;
        MetricTensor::new(self.metric.eval(q.coords()))
    }

    /// `⟨u, v⟩_q = uᵀ G_q v`.
    pub fn inner(&self, q: &Configuration, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        if u.base != *q || v.base != *q {
            return Err(Error::BaseMismatch);
        }
        Ok(self.metric_at(q)?.inner(&u.components, &v.components))
    }

    pub fn norm(&self, v: &TangentVector) -> Result<f64> {
        Ok(self.inner(&v.base, v, v)?.max(0.0).sqrt())
    }

    /// `R_q(v)`.
    pub fn retract(&self, q: &Configuration, v: &TangentVector) -> Result<Configuration> {
        self.check_config(q)?;
        if v.base != *q {
            return Err(Error::BaseMismatch);
        }
        Ok(Configuration::from_raw(self.retract_raw(q.coords(), &v.components)))
    }

    /// `R_q⁻¹(p)`; fails when an angular coordinate is exactly antipodal.
    pub fn inverse_retract(&self, q: &Configuration, p: &Configuration) -> Result<TangentVector> {
        self.check_config(q)?;
        self.check_config(p)?;
        Ok(TangentVector { base: q.clone(), components: self.inverse_retract_raw(q.coords(), p.coords())? })
    }

    /// Wrap-aware coordinate difference `p ⊖ q` (shortest angular difference).
    pub fn chart_difference(&self, q: &Configuration, p: &Configuration) -> Result<DVector<f64>> {
        self.check_config(q)?;
        self.check_config(p)?;
        self.chart_difference_raw(q.coords(), p.coords())
    }

    /// `q ⊕ delta` in chart coordinates, wrapped.
    pub fn chart_advance(&self, q: &Configuration, delta: &DVector<f64>) -> Configuration {
        let mut out = q.coords() + delta;
        self.wrap_in_place(&mut out);
        Configuration::from_raw(out)
    }

    /// Evaluates the metric field without SPD validation.
    pub(crate) fn metric_raw(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.metric.eval(q)
    }

    pub(crate) fn wrap_in_place(&self, v: &mut DVector<f64>) {
        for (x, rule) in v.iter_mut().zip(&self.wrap) {
            if *rule == WrapRule::Angular {
                *x = wrap_angle(*x);
            }
        }
    }

    pub(crate) fn retract_raw(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self.retraction {
            Retraction::Chart => {
                let mut out = q + v;
                self.wrap_in_place(&mut out);
                out
            }
            Retraction::Se2Exponential => {
                let (x, y, th) = (q[0], q[1], q[2]);
                let (s, c) = th.sin_cos();
                // body twist ξ = A(θ) v
                let xi = [c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]];
                let g = se2_exp(xi);
                DVector::from_vec(vec![x + c * g[0] - s * g[1], y + s * g[0] + c * g[1], wrap_angle(th + g[2])])
            }
        }
    }

    pub(crate) fn inverse_retract_raw(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        match self.retraction {
            Retraction::Chart => self.chart_difference_raw(q, p),
            Retraction::Se2Exponential => {
                let (s, c) = q[2].sin_cos();
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                let w = wrap_angle(p[2] - q[2]);
                if w == PI {
                    return Err(Error::OutOfNeighborhood { coord: 2 });
                }
                let rel = [c * dx + s * dy, -s * dx + c * dy, w];
                let xi = se2_log(rel);
                // v = A(θ)ᵀ ξ
                Ok(DVector::from_vec(vec![c * xi[0] - s * xi[1], s * xi[0] + c * xi[1], xi[2]]))
            }
        }
    }

    pub(crate) fn chart_difference_raw(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        let mut d = p - q;
        for (i, (x, rule)) in d.iter_mut().zip(&self.wrap).enumerate() {
            if *rule == WrapRule::Angular {
                *x = wrap_angle(*x);
                if *x == PI {
                    return Err(Error::OutOfNeighborhood { coord: i });
                }
            }
        }
        Ok(d)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), got: n })
        }
    }

    fn check_config(&self, q: &Configuration) -> Result<()> {
        self.check_len(q.dim())
    }

    pub(crate) fn check_dim(&self, q: &Configuration) -> Result<()> {
        self.check_len(q.dim())
    }
}

/// `sin(w)/w` and `(1 - cos w)/w` with series near zero.
fn se2_v_coeffs(w: f64) -> (f64, f64) {
    if w.abs() < 1e-4 {
        let w2 = w * w;
        (1.0 - w2 / 6.0 + w2 * w2 / 120.0, w / 2.0 - w * w2 / 24.0)
    } else {
        (w.sin() / w, (1.0 - w.cos()) / w)
    }
}

/// Closed-form SE(2) exponential of a body twist `(v_x, v_y, ω)`, returned
/// as `(x, y, θ)` with θ unwrapped.
pub fn se2_exp(xi: [f64; 3]) -> [f64; 3] {
    let (a, b) = se2_v_coeffs(xi[2]);
    [a * xi[0] - b * xi[1], b * xi[0] + a * xi[1], xi[2]]
}

/// Inverse of [`se2_exp`] for `|θ| < π`.
pub fn se2_log(g: [f64; 3]) -> [f64; 3] {
    let (a, b) = se2_v_coeffs(g[2]);
    let det = a * a + b * b;
    [(a * g[0] + b * g[1]) / det, (-b * g[0] + a * g[1]) / det, g[2]]
}
